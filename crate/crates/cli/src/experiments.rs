//! One function per experiment: compute, write artifacts, summarise.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use reslab_core::abelian::{self, AbelianQuotient, EquidistOptions};
use reslab_core::cayley::{self, CayleyGraph};
use reslab_core::congruence;
use reslab_core::explicit_formula as ef;
use reslab_core::schottky::{self, primitive_geodesics};
use reslab_core::thermo;
use reslab_core::transfer::{self, TwistSpec, DEFAULT_LMAX};
use reslab_core::zeros::{self, Rectangle, ZeroOptions};
use reslab_core::{Complex64, SchottkyData};
use serde::Serialize;

use crate::cells;
use crate::config::{check, Experiment, ExperimentConfig};
use crate::output::{to_json, write_atomic, Csv, Mark, Plot, Report, Series, PALETTE, SCHEMA_VERSION};
use crate::{CliError, Outcome};

const EULER_KMAX: usize = 20;
const EULER_SAMPLES: usize = 10;
const ENVELOPE_POINTS: usize = 4096;
const ENVELOPE_WINDOW: usize = 32;
const PHI_ROWS: usize = 2049;
const CAYLEY_SPREAD_FROM: usize = 64;
const CAYLEY_MAX_SPREAD: f64 = 0.05;

/// Maps a core error to an exit class, prefixed with the module and parameters.
fn core<T>(module: &str, params: impl FnOnce() -> String, r: reslab_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| {
        let msg = format!("{module}: {e} [{}]", params());
        if e.is_convergence_failure() {
            CliError::Convergence(msg)
        } else {
            CliError::Validation(msg)
        }
    })
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    experiment: Experiment,
    data: SchottkyData,
    out: PathBuf,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn name(&self) -> &'static str {
        self.experiment.name()
    }

    fn write(&mut self, file: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(file);
        write_atomic(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, results: T) -> Result<(), CliError> {
        let report =
            Report { schema_version: SCHEMA_VERSION, experiment: self.name(), group: &self.data.name, results };
        let bytes = to_json(&report).map_err(|e| CliError::Io(format!("json: {e}")))?;
        self.write(&format!("{}.json", self.name()), &bytes)
    }

    fn lmax(&self) -> Result<usize, CliError> {
        check("lmax", self.cfg.lmax.unwrap_or(DEFAULT_LMAX), 4, 256)
    }

    fn tol(&self) -> Result<f64, CliError> {
        check("tol", self.cfg.tol.unwrap_or(1e-13), 1e-15, 1e-3)
    }

    fn rectangle(&self, default: [f64; 4]) -> Result<Rectangle, CliError> {
        let r = self.cfg.rectangle.clone().unwrap_or(default.to_vec());
        if r.len() != 4 {
            return Err(CliError::Validation(format!("config: rect needs 4 numbers, got {r:?}")));
        }
        core("zeros", || format!("rect={r:?}"), Rectangle::new(r[0], r[1], r[2], r[3]))
    }

    fn twist(&self) -> Result<TwistSpec, CliError> {
        match &self.cfg.theta {
            None => Ok(TwistSpec::Trivial),
            Some(t) if t.len() == self.data.m && t.iter().all(|x| x.is_finite()) => Ok(TwistSpec::Abelian(t.clone())),
            Some(t) => Err(CliError::Validation(format!("config: theta = {t:?} needs {} finite entries", self.data.m))),
        }
    }

    fn delta(&self, lmax: usize) -> Result<f64, CliError> {
        let tol = self.tol()?;
        core("thermo", || format!("lmax={lmax}, tol={tol}"), thermo::critical_exponent(&self.data, lmax, tol))
    }

    fn zero_options(&self) -> Result<ZeroOptions, CliError> {
        let opts = ZeroOptions { lmax: self.lmax()?, ..ZeroOptions::default() };
        core("zeros", || format!("{opts:?}"), opts.validate())?;
        Ok(opts)
    }
}

pub fn dispatch(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let group = cfg.group.clone().unwrap_or(crate::config::GroupField::Name("symmetric3".into()));
    let data = core("schottky", || format!("group={group:?}"), group.build())?;
    let mut ctx = Ctx {
        cfg,
        experiment,
        data,
        out: cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("reslab-out")),
        files: Vec::new(),
    };
    let (summary, failed_check) = match experiment {
        Experiment::Validate => validate(&mut ctx)?,
        Experiment::Delta => delta(&mut ctx)?,
        Experiment::ZetaScan => zeta_scan(&mut ctx)?,
        Experiment::Resonances => resonances(&mut ctx)?,
        Experiment::CoverAbelian => cover_abelian(&mut ctx)?,
        Experiment::Equidist => equidist(&mut ctx)?,
        Experiment::Congruence => congruence_run(&mut ctx)?,
        Experiment::ExplicitFormula => explicit_formula(&mut ctx)?,
        Experiment::Cayley => cayley_run(&mut ctx)?,
    };
    Ok(Outcome { summary, failed_check, files: ctx.files })
}

type Run = Result<(String, Option<String>), CliError>;

fn validate(ctx: &mut Ctx) -> Run {
    let report = schottky::validate(&ctx.data);
    ctx.json(&report)?;
    let failures: Vec<String> = report.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let summary = format!(
        "validate {}: {} of {} checks passed, min disc gap {:.6e}",
        ctx.data.name,
        report.checks.len() - failures.len(),
        report.checks.len(),
        report.min_disc_gap
    );
    Ok((summary, (!failures.is_empty()).then(|| failures.join("; "))))
}

fn delta(ctx: &mut Ctx) -> Run {
    let lmax = ctx.lmax()?;
    let tol = ctx.tol()?;
    let points = check("grid", ctx.cfg.grid.unwrap_or(11), 3, 201)?;
    let sigmas: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let curve = core(
        "thermo",
        || format!("lmax={lmax}, tol={tol}, grid={points}"),
        thermo::pressure_curve(&ctx.data, &sigmas, lmax, tol),
    )?;
    let mut csv = Csv::new(&["sigma", "pressure"]);
    for &(s, p) in &curve.samples {
        csv.row(cells![s, p]);
    }
    ctx.write("pressure.csv", csv.into_string().as_bytes())?;
    #[derive(Serialize)]
    struct Out<'a> {
        delta: f64,
        lmax: usize,
        tol: f64,
        decreasing: bool,
        convex: bool,
        pressure: &'a [(f64, f64)],
    }
    ctx.json(Out {
        delta: curve.delta,
        lmax,
        tol,
        decreasing: curve.is_decreasing(),
        convex: curve.is_convex(1e-10),
        pressure: &curve.samples,
    })?;
    Ok((crate::output::fmt_f64(curve.delta), None))
}

fn zeta_scan(ctx: &mut Ctx) -> Run {
    let lmax = ctx.lmax()?;
    let rect = ctx.rectangle([0.0, 1.0, 0.0, 5.0])?;
    let twist = ctx.twist()?;
    let g = check("grid", ctx.cfg.grid.unwrap_or(32), 2, 1024)?;
    let depth = check("word_depth", ctx.cfg.word_depth.unwrap_or(8), 1, schottky::DEFAULT_DEPTH_CAP)?;
    let points: Vec<Complex64> = (0..g * g)
        .map(|k| {
            let (i, j) = (k % g, k / g);
            let fx = i as f64 / (g - 1) as f64;
            let fy = j as f64 / (g - 1) as f64;
            Complex64::new(rect.re0 + fx * rect.width(), rect.im0 + fy * rect.height())
        })
        .collect();
    let data = &ctx.data.clone();
    let dets: Vec<Complex64> = points
        .par_iter()
        .map(|&s| core("transfer", || format!("s={s}, lmax={lmax}"), transfer::determinant(data, s, &twist, lmax)))
        .collect::<Result<_, _>>()?;
    let mut csv = Csv::new(&["re", "im", "abs_det", "re_det", "im_det"]);
    for (s, d) in points.iter().zip(&dets) {
        csv.row(cells![s.re, s.im, d.norm(), d.re, d.im]);
    }
    ctx.write("zeta-scan.csv", csv.into_string().as_bytes())?;

    let (imin, dmin) = dets
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, d)| (i, d.norm()))
        .expect("grid >= 2");
    let delta = ctx.delta(lmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed.unwrap_or(0));
    let samples: Vec<Complex64> =
        (0..EULER_SAMPLES).map(|_| Complex64::new(delta + 1.0, rng.gen_range(rect.im0..=rect.im1))).collect();
    #[derive(Serialize)]
    struct EulerCheck {
        s: Complex64,
        det: Complex64,
        euler: Complex64,
        diff: f64,
    }
    let euler: Vec<EulerCheck> = samples
        .par_iter()
        .map(|&s| {
            let det = core("transfer", || format!("s={s}"), transfer::determinant(data, s, &twist, lmax))?;
            let euler = core(
                "zeros",
                || format!("s={s}, word_depth={depth}"),
                zeros::euler_product(data, s, &twist, depth, EULER_KMAX, delta),
            )?;
            Ok(EulerCheck { s, det, euler, diff: (det - euler).norm() })
        })
        .collect::<Result<_, CliError>>()?;
    let max_diff = euler.iter().map(|e| e.diff).fold(0.0, f64::max);
    #[derive(Serialize)]
    struct Out {
        rectangle: Rectangle,
        grid: usize,
        lmax: usize,
        theta: Option<Vec<f64>>,
        min_abs_det: f64,
        argmin: Complex64,
        delta: f64,
        word_depth: usize,
        euler_checks: Vec<EulerCheck>,
        max_euler_diff: f64,
    }
    ctx.json(Out {
        rectangle: rect,
        grid: g,
        lmax,
        theta: ctx.cfg.theta.clone(),
        min_abs_det: dmin,
        argmin: points[imin],
        delta,
        word_depth: depth,
        euler_checks: euler,
        max_euler_diff: max_diff,
    })?;
    Ok((
        format!(
            "zeta-scan {}: {}x{} grid, min |det| {:.6e} at {:.6}, max |det - euler| {:.3e} at Re s = delta + 1",
            ctx.data.name, g, g, dmin, points[imin], max_diff
        ),
        None,
    ))
}

fn cloud_plot(title: String, zeros: &[zeros::Zero], delta: Option<f64>) -> Plot {
    Plot {
        title,
        x_label: "Re s".into(),
        y_label: "Im s".into(),
        series: vec![Series {
            name: "zeros".into(),
            color: PALETTE[0],
            mark: Mark::Circles(zeros.iter().map(|z| (z.s.re, z.s.im, z.multiplicity as f64)).collect()),
        }],
        vlines: delta.map(|d| vec![(d, "delta".to_string())]).unwrap_or_default(),
        ..Default::default()
    }
}

fn resonances(ctx: &mut Ctx) -> Run {
    let opts = ctx.zero_options()?;
    let rect = ctx.rectangle([0.0, 1.0, 0.0, 3.0])?;
    let twist = ctx.twist()?;
    let set = core(
        "zeros",
        || format!("rect={rect:?}, lmax={}", opts.lmax),
        zeros::resonances(&ctx.data, &twist, &rect, &opts),
    )?;
    // one row per unit of multiplicity
    let mut csv = Csv::new(&["index", "re", "im", "multiplicity", "residual"]);
    for (i, z) in set.zeros.iter().enumerate() {
        for _ in 0..z.multiplicity {
            csv.row(cells![i, z.s.re, z.s.im, z.multiplicity, z.residual]);
        }
    }
    ctx.write("resonances.csv", csv.into_string().as_bytes())?;
    let delta = ctx.delta(opts.lmax).ok();
    let svg = cloud_plot(format!("resonances of {}", ctx.data.name), &set.zeros, delta).to_svg();
    ctx.write("resonances.svg", svg.as_bytes())?;
    ctx.json(&set)?;
    Ok((
        format!(
            "resonances {}: {} zeros ({} with multiplicity) in [{}, {}] x [{}, {}]",
            ctx.data.name,
            set.zeros.len(),
            set.total_multiplicity(),
            rect.re0,
            rect.re1,
            rect.im0,
            rect.im1
        ),
        None,
    ))
}

fn quotient(ctx: &Ctx, default: AbelianQuotient) -> Result<AbelianQuotient, CliError> {
    match &ctx.cfg.moduli {
        None => Ok(default),
        Some(m) => core("abelian", || format!("moduli={m:?}"), AbelianQuotient::new(m.clone())),
    }
}

fn cover_abelian(ctx: &mut Ctx) -> Run {
    let opts = ctx.zero_options()?;
    let rect = ctx.rectangle([0.0, 1.0, 0.0, 2.0])?;
    let default = core("abelian", String::new, AbelianQuotient::cyclic(4, ctx.data.m))?;
    let q = quotient(ctx, default)?;
    let per = core(
        "abelian",
        || format!("moduli={:?}, rect={rect:?}", q.moduli),
        abelian::cover_zeta_zeros(&ctx.data, &q, &rect, &opts, abelian::DEFAULT_ORDER_CAP),
    )?;
    let m = ctx.data.m;
    let mut header: Vec<String> = (1..=m).map(|k| format!("alpha{k}")).collect();
    header.extend(["re", "im", "multiplicity", "residual"].map(String::from));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for c in &per {
        for z in &c.set.zeros {
            let mut row: Vec<_> = c.alpha.iter().map(|&a| crate::output::Cell::from(a)).collect();
            row.extend(cells![z.s.re, z.s.im, z.multiplicity, z.residual]);
            csv.row(row);
        }
    }
    ctx.write("cover-abelian.csv", csv.into_string().as_bytes())?;
    let all = abelian::union_zeros(&per);
    let total: usize = all.iter().map(|z| z.multiplicity).sum();
    let delta = ctx.delta(opts.lmax).ok();
    let svg = cloud_plot(format!("cover of {} by Z/{:?}", ctx.data.name, q.moduli), &all, delta).to_svg();
    ctx.write("cover-abelian.svg", svg.as_bytes())?;
    #[derive(Serialize)]
    struct Out<'a> {
        moduli: &'a [usize],
        rectangle: Rectangle,
        total_multiplicity: usize,
        characters: &'a [abelian::CharacterZeros],
    }
    ctx.json(Out { moduli: &q.moduli, rectangle: rect, total_multiplicity: total, characters: &per })?;
    Ok((
        format!(
            "cover-abelian {} Z/{:?}: {} zeros with multiplicity over {} characters",
            ctx.data.name,
            q.moduli,
            total,
            per.len()
        ),
        None,
    ))
}

fn equidist(ctx: &mut Ctx) -> Run {
    let zopts = ctx.zero_options()?;
    let sizes = ctx.cfg.sizes.clone().unwrap_or(vec![8, 16, 32, 64]);
    for &n in &sizes {
        check("sizes", n, 2, 4096)?;
    }
    let window = match &ctx.cfg.rectangle {
        Some(_) => Some(ctx.rectangle([0.0; 4])?),
        None => None,
    };
    let opts = EquidistOptions {
        epsilon: ctx.cfg.epsilon.unwrap_or(EquidistOptions::default().epsilon),
        window,
        zeros: zopts,
        ..EquidistOptions::default()
    };
    let delta = ctx.delta(zopts.lmax)?;
    let report = core(
        "abelian",
        || format!("sizes={sizes:?}, epsilon={}", opts.epsilon),
        abelian::equidistribution_experiment(&ctx.data, delta, &sizes, &opts),
    )?;
    for run in &report.runs {
        let mut csv = Csv::new(&["alpha", "re", "im", "multiplicity"]);
        for (a, z) in &run.zeros {
            csv.row(cells![*a, z.s.re, z.s.im, z.multiplicity]);
        }
        ctx.write(&format!("equidist-N{}.csv", run.n), csv.into_string().as_bytes())?;
    }
    let mut header = vec!["bin_lo".to_string(), "bin_hi".into(), "reference".into()];
    header.extend(report.runs.iter().map(|r| format!("N{}", r.n)));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let edges = &report.bin_edges;
    for b in 0..edges.len() - 1 {
        let mut row = cells![edges[b], edges[b + 1], report.reference_histogram[b]];
        row.extend(report.runs.iter().map(|r| crate::output::Cell::from(r.histogram[b])));
        csv.row(row);
    }
    ctx.write("equidist-histogram.csv", csv.into_string().as_bytes())?;

    let steps = |h: &[f64]| -> Vec<(f64, f64)> {
        (0..h.len())
            .flat_map(|b| {
                let d = h[b] / (edges[b + 1] - edges[b]);
                [(edges[b], d), (edges[b + 1], d)]
            })
            .collect()
    };
    let mut series =
        vec![Series { name: "reference".into(), color: "black", mark: Mark::Line(steps(&report.reference_histogram)) }];
    for (k, r) in report.runs.iter().enumerate() {
        series.push(Series {
            name: format!("N = {}", r.n),
            color: PALETTE[k % PALETTE.len()],
            mark: Mark::Line(steps(&r.histogram)),
        });
    }
    let plot = Plot {
        title: format!("near-delta resonances of Z/N covers of {}", ctx.data.name),
        x_label: "Re s".into(),
        y_label: "density".into(),
        series,
        vlines: vec![(delta, "delta".into())],
        ..Default::default()
    };
    ctx.write("equidist.svg", plot.to_svg().as_bytes())?;
    ctx.json(&report)?;
    let ks: Vec<String> = report.runs.iter().map(|r| format!("N={}: {:.4}", r.n, r.kolmogorov)).collect();
    Ok((format!("equidist {}: Kolmogorov distance {}", ctx.data.name, ks.join(", ")), None))
}

fn congruence_run(ctx: &mut Ctx) -> Run {
    let primes = ctx.cfg.primes.clone().unwrap_or(vec![5, 7, 11, 13]);
    let p = ctx.cfg.p.unwrap_or(101);
    let beta = ctx.cfg.beta.unwrap_or(1.5);
    let t_min = ctx.cfg.t_min.unwrap_or(4.0);
    let t_max = ctx.cfg.t_max.unwrap_or(10.0);
    let steps = check("steps", ctx.cfg.steps.unwrap_or(25), 2, 400)?;
    let order = check("order", ctx.cfg.order.unwrap_or(12), 1, 64)?;
    let grid = ctx.cfg.grid.unwrap_or(4097);
    let data = &ctx.data.clone();

    let tables = primes
        .iter()
        .map(|&q| core("congruence", || format!("p={q}"), congruence::class_statistics(q)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["p", "label", "size", "centralizer"]);
    for t in &tables {
        for c in &t.classes {
            csv.row(cells![t.p, c.label.to_string(), c.size, c.centralizer]);
        }
    }
    ctx.write("congruence-classes.csv", csv.into_string().as_bytes())?;
    let mut failures = Vec::new();
    for t in &tables {
        if t.size_sum() != t.order || t.verified == Some(false) {
            failures.push(format!("class equation or classification fails at p = {}", t.p));
        }
    }

    let surjective = primes
        .iter()
        .filter(|&&q| q <= 257)
        .map(|&q| {
            let n = core("congruence", || format!("p={q}"), congruence::generated_order(data, q))?;
            Ok((q, n, n == congruence::group_order(q)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let conj1 = core("congruence", || format!("p={p}, beta={beta}"), congruence::conj1_check(data, p, beta))?;
    if conj1.violation_count > 0 {
        failures.push(format!("{} trace/conjugacy mismatches at p = {p}", conj1.violation_count));
    }
    let growth = core(
        "congruence",
        || format!("t_min={t_min}, t_max={t_max}, steps={steps}"),
        congruence::multiplicity_growth(data, t_min, t_max, steps),
    )?;
    let mut gcsv = Csv::new(&["t", "classes", "distinct_traces", "sum_m_squared"]);
    for r in &growth.rows {
        gcsv.row(cells![r.t, r.classes, r.distinct_traces, r.sum_m_squared]);
    }
    ctx.write("congruence-growth.csv", gcsv.into_string().as_bytes())?;

    let phi = core(
        "explicit_formula",
        || format!("order={order}, grid={grid}"),
        ef::build_test_function(ef::DEFAULT_EPSILON, order, grid),
    )?;
    let t = beta * (p as f64).ln();
    let cut = 1.0 - 0.9 * phi.support;
    let average = core(
        "congruence",
        || format!("p={p}, T={t}, cut={cut}"),
        congruence::character_average(data, p, t, &phi, cut),
    )?;
    #[derive(Serialize)]
    struct Out<'a> {
        class_tables: &'a [congruence::ClassTable],
        generated: &'a [(u64, u64, bool)],
        conj1: &'a congruence::Conj1Report,
        growth: &'a congruence::MultiplicityGrowth,
        character_average: &'a congruence::CharacterAverage,
    }
    ctx.json(Out {
        class_tables: &tables,
        generated: &surjective,
        conj1: &conj1,
        growth: &growth,
        character_average: &average,
    })?;
    let summary = format!(
        "congruence {}: class equation {} for p in {:?}; {} mismatches in {} pairs at p = {p}, beta = {beta}; growth exponents {:.4} (m) {:.4} (m^2)",
        ctx.data.name,
        if failures.iter().any(|f| f.starts_with("class")) { "fails" } else { "holds" },
        primes,
        conj1.violation_count,
        conj1.pairs_checked,
        growth.exponent_m,
        growth.exponent_m2
    );
    Ok((summary, (!failures.is_empty()).then(|| failures.join("; "))))
}

fn explicit_formula(ctx: &mut Ctx) -> Run {
    let epsilon = ctx.cfg.epsilon.unwrap_or(ef::DEFAULT_EPSILON);
    let order = check("order", ctx.cfg.order.unwrap_or(12), 1, 64)?;
    let grid = ctx.cfg.grid.unwrap_or(ef::DEFAULT_GRID);
    let xi = ctx.cfg.xi.clone().unwrap_or(vec![10.0, 1e4]);
    if xi.len() != 2 {
        return Err(CliError::Validation(format!("config: xi needs 2 numbers, got {xi:?}")));
    }
    let alpha = ctx.cfg.alpha.unwrap_or(0.5);
    let t = check("t_max", ctx.cfg.t_max.unwrap_or(16.0), 1e-3, 16.0)?;
    let phi = core(
        "explicit_formula",
        || format!("epsilon={epsilon}, order={order}, grid={grid}"),
        ef::build_test_function(epsilon, order, grid),
    )?;
    let env = core(
        "explicit_formula",
        || format!("xi={xi:?}, alpha={alpha}"),
        ef::fourier_envelope_check(&phi, xi[0], xi[1], alpha, ENVELOPE_POINTS, ENVELOPE_WINDOW),
    )?;
    let xs = phi.grid();
    let stride = (xs.len() - 1).div_ceil(PHI_ROWS - 1).max(1);
    let mut csv = Csv::new(&["x", "phi0"]);
    for i in (0..xs.len()).step_by(stride) {
        csv.row(cells![xs[i], phi.values[i]]);
    }
    ctx.write("phi0.csv", csv.into_string().as_bytes())?;
    let mut ecsv = Csv::new(&["xi", "envelope"]);
    for p in &env.envelope {
        ecsv.row(cells![p.xi, p.modulus]);
    }
    ctx.write("envelope.csv", ecsv.into_string().as_bytes())?;
    let fit: Vec<(f64, f64)> =
        env.envelope.iter().map(|p| (p.xi, (env.log_c1 - env.c2 * p.xi / p.xi.ln().powf(1.0 + alpha)).exp())).collect();
    let plot = Plot {
        title: format!("Fourier envelope of the test function, J = {order}"),
        x_label: "xi".into(),
        y_label: "|transform|".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                name: "window maxima".into(),
                color: PALETTE[0],
                mark: Mark::Circles(env.envelope.iter().map(|p| (p.xi, p.modulus, 0.5)).collect()),
            },
            Series { name: "fit".into(), color: PALETTE[1], mark: Mark::Line(fit) },
        ],
        ..Default::default()
    };
    ctx.write("explicit-formula.svg", plot.to_svg().as_bytes())?;

    let table = core("schottky", || format!("max_length={t}"), primitive_geodesics(&ctx.data, t))?;
    let trivial = core(
        "explicit_formula",
        || format!("T={t}"),
        ef::geodesic_sum(&table, t, &phi, |_, _| Complex64::new(1.0, 0.0)),
    )?;
    let mass = phi.mass();
    let min_value = phi.values.iter().copied().fold(f64::INFINITY, f64::min);
    #[derive(Serialize)]
    struct Out<'a> {
        epsilon: f64,
        order: usize,
        grid: usize,
        widths: &'a [f64],
        c_tilde: f64,
        tail_bound: f64,
        deficit: f64,
        support: f64,
        mass: f64,
        min_value: f64,
        envelope: &'a ef::EnvelopeReport,
        t: f64,
        classes: usize,
        trivial_sum: Complex64,
    }
    ctx.json(Out {
        epsilon,
        order,
        grid,
        widths: &phi.widths,
        c_tilde: phi.c_tilde,
        tail_bound: phi.tail_bound,
        deficit: phi.deficit,
        support: phi.support,
        mass,
        min_value,
        envelope: &env,
        t,
        classes: table.classes.len(),
        trivial_sum: trivial,
    })?;
    let mut failures = Vec::new();
    if min_value < 0.0 || (mass - 1.0).abs() > 1e-10 || phi.support > 1.0 {
        failures.push(format!("test function: min {min_value:e}, mass {mass}, support {}", phi.support));
    }
    if !env.holds {
        failures.push(format!("envelope fit: C2 = {}, R^2 = {}", env.c2, env.r_squared));
    }
    Ok((
        format!(
            "explicit-formula J={order}: mass {:.3e} off 1, support {:.4}, envelope C2 {:.4} (R^2 {:.3}), I(trivial, T={t}) = {:.6e}",
            mass - 1.0,
            phi.support,
            env.c2,
            env.r_squared,
            trivial.re
        ),
        (!failures.is_empty()).then(|| failures.join("; ")),
    ))
}

fn cayley_run(ctx: &mut Ctx) -> Run {
    let sizes = ctx.cfg.sizes.clone().unwrap_or(vec![64, 128, 256, 512, 1024]);
    for &n in &sizes {
        check("sizes", n, 2, cayley::ORDER_CAP)?;
    }
    let template = ctx.cfg.moduli.clone().unwrap_or(vec![1; ctx.data.m]);
    let cycles = ctx.cfg.cycles.clone().unwrap_or(vec![5, 24]);
    if cycles.len() != 2 || cycles[0] < 3 || cycles[1] < cycles[0] || cycles[1] > cayley::EXHAUSTIVE_CAP {
        return Err(CliError::Validation(format!(
            "config: cycles = {cycles:?} must be lo,hi with 3 <= lo <= hi <= {}",
            cayley::EXHAUSTIVE_CAP
        )));
    }
    let decay = core(
        "cayley",
        || format!("template={template:?}, sizes={sizes:?}"),
        cayley::gap_decay_experiment(&ctx.data, &template, 0, &sizes, CAYLEY_SPREAD_FROM),
    )?;
    let mut csv = Csv::new(&["n", "lambda1", "lambda1_n2", "cheeger", "cheeger_exact", "spectral_upper"]);
    for r in &decay.rows {
        csv.row(cells![r.n, r.lambda1, r.lambda1_n2, r.cheeger, r.cheeger_exact, r.spectral_upper]);
    }
    ctx.write("cayley.csv", csv.into_string().as_bytes())?;
    let sandwich = (cycles[0]..=cycles[1])
        .map(|n| {
            let g = core("cayley", || format!("n={n}"), CayleyGraph::cycle(n))?;
            core("cayley", || format!("n={n}"), cayley::sandwich_report(&g))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut scsv = Csv::new(&["n", "lambda1", "cheeger", "lower", "upper", "flagged", "lower_holds", "upper_holds"]);
    for (n, r) in (cycles[0]..).zip(&sandwich) {
        let upper = r.upper_holds().map(|b| b.to_string()).unwrap_or_else(|| "flagged".into());
        scsv.row(cells![n, r.lambda1, r.cheeger, r.lower, r.upper, r.flagged, r.lower_holds(), upper]);
    }
    ctx.write("cayley-sandwich.csv", scsv.into_string().as_bytes())?;
    let plot = Plot {
        title: format!("spectral gap of Z/N quotients of {}", ctx.data.name),
        x_label: "N".into(),
        y_label: "lambda1".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            name: "lambda1".into(),
            color: PALETTE[0],
            mark: Mark::Line(decay.rows.iter().map(|r| (r.n as f64, r.lambda1)).collect()),
        }],
        ..Default::default()
    };
    ctx.write("cayley.svg", plot.to_svg().as_bytes())?;
    #[derive(Serialize)]
    struct Out<'a> {
        decay: &'a cayley::GapDecay,
        sandwich: &'a [cayley::SandwichReport],
    }
    ctx.json(Out { decay: &decay, sandwich: &sandwich })?;
    let violated: Vec<String> = sandwich
        .iter()
        .filter(|r| !r.lower_holds() || r.upper_holds() == Some(false))
        .map(|r| format!("{}: h = {}, bounds [{}, {}]", r.graph, r.cheeger, r.lower, r.upper))
        .collect();
    let mut failures = violated.clone();
    if !(decay.spread < CAYLEY_MAX_SPREAD) {
        failures.push(format!("lambda1 N^2 spread {} over N >= {CAYLEY_SPREAD_FROM}", decay.spread));
    }
    Ok((
        format!(
            "cayley {}: lambda1 ~ N^{:.4}, lambda1 N^2 -> {:.6} (spread {:.2e}); sandwich violated on {} of {} cycles",
            ctx.data.name,
            decay.rate,
            decay.limit,
            decay.spread,
            violated.len(),
            sandwich.len()
        ),
        (!failures.is_empty()).then(|| failures.join("; ")),
    ))
}
