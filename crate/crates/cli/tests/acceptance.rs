//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria in KNOWN_RED fail for reasons analysed in the README; they are
//! reported as FAIL but do not fail the run unless RESLAB_ACCEPTANCE_STRICT=1.
//! Pass criterion numbers as arguments to run a subset.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reslab_cli::{run, Experiment, ExperimentConfig, GroupField};
use reslab_core::abelian::{
    cover_zeta_zeros, curve_derivatives, equidistribution_experiment, implicit_curve, nonvanishing_scan, union_zeros,
    AbelianQuotient, EquidistOptions, DEFAULT_ORDER_CAP,
};
use reslab_core::cayley::{gap_decay_experiment, sandwich_check, CayleyGraph};
use reslab_core::congruence::{class_statistics, conj1_check, group_order, multiplicity_growth};
use reslab_core::explicit_formula::{build_test_function, fourier_envelope_check, DEFAULT_GRID};
use reslab_core::schottky::primitive_geodesics;
use reslab_core::thermo::critical_exponent;
use reslab_core::transfer::{
    assemble, determinant, operator_trace_check, singular_value_slope, singular_values, GroupTable, TwistSpec,
};
use reslab_core::zeros::{euler_product, resonances, Rectangle, ZeroOptions};
use reslab_core::SchottkyData;

const KNOWN_RED: [u32; 2] = [10, 12];

type Verdict = Result<(bool, String), String>;

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn presets() -> Result<Vec<SchottkyData>, String> {
    ["cylinder", "symmetric3", "sl2z-pair", "sl2z-dense"].iter().map(|p| e(SchottkyData::preset(p))).collect()
}

fn determinant_euler_agreement() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for name in ["symmetric3", "sl2z-pair"] {
        let d = e(SchottkyData::preset(name))?;
        let delta = e(critical_exponent(&d, 32, 1e-13))?;
        for _ in 0..20 {
            let s = c(delta + 1.0, rng.gen_range(-10.0..10.0));
            let det = e(determinant(&d, s, &TwistSpec::Trivial, 32))?;
            let eul = e(euler_product(&d, s, &TwistSpec::Trivial, 8, 20, delta))?;
            worst = worst.max((det - eul).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-8 && secs < 60.0,
        format!("max |det - euler| = {worst:.3e} over 40 points, {secs:.1} s (need < 1e-8, < 60 s)"),
    ))
}

fn lefschetz_identity() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in presets()? {
        // the sl2z-dense discs nearly touch, so its Taylor basis converges slowly
        let lmax = if d.name == "sl2z-dense" { 128 } else { 32 };
        let twists = [TwistSpec::Trivial, TwistSpec::Abelian((0..d.m).map(|k| 0.3 - 0.17 * k as f64).collect())];
        for twist in &twists {
            for s in [c(0.8, 1.1), c(1.5, -2.0)] {
                for n in 1..=3 {
                    let r = e(operator_trace_check(&d, s, twist, lmax, n))?;
                    worst = worst.max(r.residual);
                    cases += 1;
                }
            }
        }
    }
    Ok((
        worst < 1e-8,
        format!("max residual {worst:.3e} over {cases} cases, lmax 32 (128 for sl2z-dense) (need < 1e-8)"),
    ))
}

fn cylinder_lattice() -> Verdict {
    let d = e(SchottkyData::preset("cylinder"))?;
    let ell = e(primitive_geodesics(&d, 20.0))?.classes[0].length;
    let rect = e(Rectangle::new(-0.5, 0.5, 0.0, 7.0))?;
    let set = e(resonances(&d, &TwistSpec::Trivial, &rect, &ZeroOptions::default()))?;
    let step = std::f64::consts::TAU / ell;
    let mut worst: f64 = 0.0;
    let mut ok = set.zeros.len() == 3;
    for (k, z) in set.zeros.iter().enumerate() {
        ok &= z.multiplicity == 2;
        worst = worst.max((z.s - c(0.0, k as f64 * step)).norm());
    }
    ok &= worst < 1e-7;
    Ok((
        ok,
        format!(
            "{} zeros, multiplicities {:?}, max distance to 2 pi i k / l = {worst:.3e} (need 3 double zeros to 1e-7)",
            set.zeros.len(),
            set.zeros.iter().map(|z| z.multiplicity).collect::<Vec<_>>()
        ),
    ))
}

fn factorization() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let delta = e(critical_exponent(&d, 32, 1e-13))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = ZeroOptions { lmax: 16, ..Default::default() };
    let rect = e(Rectangle::new(delta - 0.35, delta + 0.1, -0.5, 0.5))?;
    let mut worst_rel: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let mut counts_ok = true;
    let mut counts = Vec::new();
    for moduli in [vec![2, 1], vec![2, 2], vec![3, 2]] {
        let q = e(AbelianQuotient::new(moduli.clone()))?;
        let reg = TwistSpec::Regular(e(GroupTable::abelian(&moduli))?);
        for _ in 0..10 {
            let s = c(rng.gen_range(0.2..1.2), rng.gen_range(-3.0..3.0));
            let lhs = e(determinant(&d, s, &reg, 16))?;
            let mut rhs = c(1.0, 0.0);
            for alpha in q.characters() {
                rhs *= e(determinant(&d, s, &q.twist(&alpha), 16))?;
            }
            worst_rel = worst_rel.max((lhs - rhs).norm() / rhs.norm());
        }
        let union = union_zeros(&e(cover_zeta_zeros(&d, &q, &rect, &opts, DEFAULT_ORDER_CAP))?);
        let direct = e(resonances(&d, &reg, &rect, &opts))?;
        let nu: usize = union.iter().map(|z| z.multiplicity).sum();
        counts_ok &= direct.total_multiplicity() == nu as i64;
        counts.push(nu);
        for z in &direct.zeros {
            let near = union.iter().map(|w| (w.s - z.s).norm()).fold(f64::INFINITY, f64::min);
            worst_zero = worst_zero.max(near);
        }
    }
    Ok((
        worst_rel < 1e-8 && worst_zero < 1e-6 && counts_ok,
        format!(
            "orders 2, 4, 6: max relative det error {worst_rel:.3e}, zero counts {counts:?} match: {counts_ok}, max zero distance {worst_zero:.3e}"
        ),
    ))
}

fn nonvanishing() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let delta = e(critical_exponent(&d, 32, 1e-13))?;
    let scan = e(nonvanishing_scan(&d, delta, 64, 32))?;
    Ok((
        scan.min_modulus > 1e3 * scan.residual_at_zero,
        format!(
            "64^2 grid: min |L(delta, theta)| off the lattice = {:.3e} at {:?}, residual at 0 = {:.3e}",
            scan.min_modulus, scan.argmin, scan.residual_at_zero
        ),
    ))
}

fn implicit_curve_check() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let delta = e(critical_exponent(&d, 32, 1e-14))?;
    let curve = e(implicit_curve(&d, delta, 0.05, 5, 32))?;
    let at0 = curve.at_zero().ok_or("no sample at theta = 0")?;
    let der = e(curve_derivatives(&d, delta, 0.01, 32))?;
    let ok =
        curve.max_imag() < 1e-7 && (at0 - delta).norm() < 1e-8 && curve.max_asymmetry() < 1e-8 && der.negative_definite;
    Ok((
        ok,
        format!(
            "max |Im phi| {:.2e}, |phi(0) - delta| {:.2e}, asymmetry {:.2e}, Hessian eigenvalues {:?}",
            curve.max_imag(),
            (at0 - delta).norm(),
            curve.max_asymmetry(),
            der.hessian_eigenvalues
        ),
    ))
}

fn equidistribution() -> Verdict {
    let start = Instant::now();
    let d = e(SchottkyData::preset("symmetric3(0.6)"))?;
    let delta = e(critical_exponent(&d, 32, 1e-13))?;
    let r = e(equidistribution_experiment(&d, delta, &[8, 16, 32, 64], &EquidistOptions::default()))?;
    let ks: Vec<f64> = r.runs.iter().map(|q| q.kolmogorov).collect();
    let monotone = ks.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        monotone && *ks.last().unwrap() < 0.1 && secs < 600.0,
        format!(
            "symmetric3(0.6), N = 8, 16, 32, 64: Kolmogorov {ks:.4?}, {secs:.0} s (need non-increasing, < 0.1 at 64)"
        ),
    ))
}

fn singular_value_scaling() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let s = c(0.5, 0.0);
    let lmax = 32;
    let sv1 = e(singular_values(&e(assemble(&d, s, &TwistSpec::Trivial, lmax))?))?;
    let (ct, st) = (0.6f64.cos(), 0.6f64.sin());
    let rot = vec![c(ct, 0.0), c(-st, 0.0), c(st, 0.0), c(ct, 0.0)];
    let rot_inv = vec![c(ct, 0.0), c(st, 0.0), c(-st, 0.0), c(ct, 0.0)];
    let ph = Complex64::from_polar(1.0, 1.1);
    let diag = vec![ph, c(0.0, 0.0), c(0.0, 0.0), ph.conj()];
    let diag_inv = vec![ph.conj(), c(0.0, 0.0), c(0.0, 0.0), ph];
    let twist = TwistSpec::Matrix { d: 2, u: vec![rot, diag, rot_inv, diag_inv] };
    let sv2 = e(singular_values(&e(assemble(&d, s, &twist, lmax))?))?;
    let s1 = singular_value_slope(&sv1, 1e-12, 1e-1).ok_or("d = 1 fit failed")?;
    let s2 = singular_value_slope(&sv2, 1e-12, 1e-1).ok_or("d = 2 fit failed")?;
    let rel = (s2 - s1 / 2.0).abs() / (s1 / 2.0).abs();
    Ok((rel < 0.25, format!("slopes d=1 {s1:.4}, d=2 {s2:.4}; relative deviation from half {rel:.3} (need < 0.25)")))
}

fn sl2_structure() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [5u64, 7, 11, 13] {
        let t = e(class_statistics(p))?;
        let good = t.size_sum() == group_order(p) && t.verified == Some(true);
        ok &= good;
        parts.push(format!("p={p}: {} classes, sum {} = {}", t.classes.len(), t.size_sum(), group_order(p)));
    }
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let r = e(conj1_check(&d, 101, 1.5))?;
    ok &= r.violation_count == 0;
    parts.push(format!(
        "p=101, beta=1.5: {} violations in {} pairs over {} classes",
        r.violation_count, r.pairs_checked, r.classes
    ));
    Ok((ok, parts.join("; ")))
}

fn multiplicity_energy() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-dense"))?;
    let delta = e(critical_exponent(&d, 64, 1e-13))?;
    let g = e(multiplicity_growth(&d, 4.0, 10.0, 25))?;
    let diff = g.exponent_m2 - g.exponent_m;
    let need = 0.8 * (delta - 0.5);
    Ok((
        delta > 0.5 && diff >= need,
        format!(
            "sl2z-dense (delta {delta:.4}): exponents {:.4} (sum m^2) - {:.4} (sum m) = {diff:.4}, need >= {need:.4}",
            g.exponent_m2, g.exponent_m
        ),
    ))
}

fn test_function() -> Verdict {
    let phi = e(build_test_function(0.5, 12, DEFAULT_GRID))?;
    let min = phi.values.iter().copied().fold(f64::INFINITY, f64::min);
    let mass = phi.mass();
    let env = e(fourier_envelope_check(&phi, 10.0, 1e4, 0.5, 4096, 32))?;
    Ok((
        min >= 0.0 && phi.support <= 1.0 && (mass - 1.0).abs() < 1e-10 && env.c2 > 0.0 && env.holds,
        format!(
            "min {min:.2e}, support {:.4}, |mass - 1| {:.2e}, C2 {:.4}, R^2 {:.4} over {} resolved points",
            phi.support,
            (mass - 1.0).abs(),
            env.c2,
            env.r_squared,
            env.resolved
        ),
    ))
}

fn cayley_decay() -> Verdict {
    let d = e(SchottkyData::preset("sl2z-pair"))?;
    let r = e(gap_decay_experiment(&d, &[1, 1], 0, &[64, 128, 256, 512, 1024], 64))?;
    let mut violations = Vec::new();
    for n in 5..=24 {
        if let Err(err) = sandwich_check(&e(CayleyGraph::cycle(n))?) {
            violations.push(format!("N={n}: {err}"));
        }
    }
    Ok((
        r.spread < 0.05 && violations.is_empty(),
        format!(
            "lambda1 N^2 spread {:.2e} (limit {:.6}); sandwich violations: {}",
            r.spread,
            r.limit,
            if violations.is_empty() { "none".into() } else { violations.join("; ") }
        ),
    ))
}

fn determinism_configs(dir: &Path) -> Vec<ExperimentConfig> {
    let g = |name: &str| Some(GroupField::Name(name.into()));
    let base = |exp: Experiment, group: &str| ExperimentConfig {
        experiment: Some(exp),
        group: g(group),
        output_dir: Some(dir.to_path_buf()),
        ..Default::default()
    };
    vec![
        base(Experiment::Validate, "sl2z-pair"),
        base(Experiment::Delta, "symmetric3"),
        ExperimentConfig { grid: Some(8), lmax: Some(16), ..base(Experiment::ZetaScan, "sl2z-pair") },
        ExperimentConfig { rectangle: Some(vec![-0.5, 0.5, 0.0, 7.0]), ..base(Experiment::Resonances, "cylinder") },
        ExperimentConfig {
            moduli: Some(vec![2, 1]),
            rectangle: Some(vec![0.0, 0.5, -0.3, 0.3]),
            lmax: Some(16),
            ..base(Experiment::CoverAbelian, "sl2z-pair")
        },
        ExperimentConfig { sizes: Some(vec![4, 8]), lmax: Some(16), ..base(Experiment::Equidist, "sl2z-pair") },
        ExperimentConfig { primes: Some(vec![5, 7]), ..base(Experiment::Congruence, "sl2z-pair") },
        ExperimentConfig { grid: Some(8193), ..base(Experiment::ExplicitFormula, "sl2z-pair") },
        ExperimentConfig { sizes: Some(vec![64, 128]), ..base(Experiment::Cayley, "sl2z-pair") },
    ]
}

fn snapshot(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut files: Vec<PathBuf> =
        e(std::fs::read_dir(dir))?.map(|f| f.map(|f| f.path())).collect::<Result<_, _>>().map_err(|x| x.to_string())?;
    files.sort();
    files.into_iter().map(|p| Ok((PathBuf::from(p.file_name().unwrap()), e(std::fs::read(&p))?))).collect()
}

fn determinism() -> Verdict {
    let root = e(tempfile::tempdir())?;
    let mut differing = Vec::new();
    let mut total = 0;
    for k in 0..determinism_configs(root.path()).len() {
        let mut reference: Option<(String, Files)> = None;
        let mut name = "";
        for threads in [1usize, 2, 8] {
            let dir = root.path().join(format!("{k}-{threads}"));
            let cfg = ExperimentConfig { threads: Some(threads), ..determinism_configs(&dir)[k].clone() };
            name = cfg.experiment.unwrap().name();
            let out = run(&cfg).map_err(|x| format!("{name}: {x}"))?;
            let snap = snapshot(&dir)?;
            match &reference {
                None => {
                    total += snap.len();
                    reference = Some((out.summary, snap));
                }
                Some((summary, files)) => {
                    if *summary != out.summary || *files != snap {
                        differing.push(format!("{name} at {threads} threads"));
                    }
                }
            }
        }
        let _ = name;
    }
    Ok((
        differing.is_empty(),
        format!(
            "9 experiments, {total} output files, threads 1/2/8: {}",
            if differing.is_empty() { "byte-identical".into() } else { format!("differ for {}", differing.join(", ")) }
        ),
    ))
}

type Criterion = fn() -> Verdict;
type Files = Vec<(PathBuf, Vec<u8>)>;

fn main() {
    let criteria: Vec<(u32, &str, Criterion)> = vec![
        (1, "determinant vs Euler product", determinant_euler_agreement),
        (2, "Lefschetz trace identity", lefschetz_identity),
        (3, "cylinder resonance lattice", cylinder_lattice),
        (4, "factorization over characters", factorization),
        (5, "non-vanishing at delta", nonvanishing),
        (6, "implicit curve", implicit_curve_check),
        (7, "equidistribution trend", equidistribution),
        (8, "singular-value scaling", singular_value_scaling),
        (9, "SL2(F_p) structure", sl2_structure),
        (10, "multiplicity energy", multiplicity_energy),
        (11, "test function", test_function),
        (12, "Cayley decay and sandwich", cayley_decay),
        (13, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var("RESLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let verdict = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into())),
        };
        let (pass, detail) = match verdict {
            Ok(v) => v,
            Err(err) => (false, format!("error: {err}")),
        };
        let tag = match (pass, KNOWN_RED.contains(&n)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} {tag:<12} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
        let _ = std::io::stdout().flush();
        if !pass {
            failed += 1;
            if strict || !KNOWN_RED.contains(&n) {
                unexpected.push(n);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria pass", ran - failed);
    if !unexpected.is_empty() {
        println!("acceptance: failing criteria {unexpected:?}");
        std::process::exit(1);
    }
}
