//! Abelian covers.
//!
//! A quotient G = Z/N_1 × … × Z/N_m of the homology of Γ has characters
//! χ_α(g) = exp(2πi Σ α_k g_k / N_k), and the cover's zeta function factors
//! into the twisted determinants L(s, θ) at θ = α/N. Near δ the zeros of
//! L(·, θ) lie on a real-analytic curve s = φ(θ) with φ(0) = δ; for growing
//! quotients the near-δ resonances equidistribute along the push-forward of
//! Lebesgue measure under φ.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{least_squares, linear_fit};
use crate::linalg::CMatrix;
use crate::schottky::{GeodesicClass, SchottkyData};
use crate::transfer::{determinant, unit_phase, GroupTable, TwistSpec};
use crate::zeros::{newton_with, resonances_with, Rectangle, ResonanceSet, Zero, ZeroOptions};

/// Quotients larger than this are refused by [`cover_zeta_zeros`] unless the
/// caller raises the cap.
pub const DEFAULT_ORDER_CAP: usize = 64;
/// Grid points closer than this to Z^m are excluded from the non-vanishing scan.
pub const OFF_LATTICE_RADIUS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianQuotient {
    pub moduli: Vec<usize>,
}

impl AbelianQuotient {
    pub fn new(moduli: Vec<usize>) -> Result<Self> {
        if moduli.is_empty() || moduli.contains(&0) {
            return Err(Error::InvalidInput(format!("moduli must be nonempty and >= 1, got {moduli:?}")));
        }
        if moduli.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).is_none() {
            return Err(Error::InvalidInput(format!("quotient order of {moduli:?} overflows")));
        }
        Ok(AbelianQuotient { moduli })
    }

    /// Z/N on the first generator, trivial on the others.
    pub fn cyclic(n: usize, m: usize) -> Result<Self> {
        let mut moduli = vec![1; m];
        moduli[0] = n;
        Self::new(moduli)
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().product()
    }

    /// All α with 0 ≤ α_k < N_k, first coordinate fastest.
    pub fn characters(&self) -> Vec<Vec<usize>> {
        (0..self.order())
            .map(|mut x| {
                self.moduli
                    .iter()
                    .map(|&n| {
                        let r = x % n;
                        x /= n;
                        r
                    })
                    .collect()
            })
            .collect()
    }

    fn check_alpha(&self, alpha: &[usize]) -> Result<()> {
        if alpha.len() != self.moduli.len() || alpha.iter().zip(&self.moduli).any(|(a, n)| a >= n) {
            return Err(Error::InvalidInput(format!("character {alpha:?} is not in the lattice of {:?}", self.moduli)));
        }
        Ok(())
    }

    /// θ_k = α_k/N_k reduced to [−1/2, 1/2).
    pub fn theta(&self, alpha: &[usize]) -> Vec<f64> {
        alpha
            .iter()
            .zip(&self.moduli)
            .map(|(&a, &n)| {
                let x = a as f64 / n as f64;
                if x >= 0.5 {
                    x - 1.0
                } else {
                    x
                }
            })
            .collect()
    }

    pub fn twist(&self, alpha: &[usize]) -> TwistSpec {
        TwistSpec::Abelian(self.theta(alpha))
    }

    /// Regular representation of the quotient, generator k ↦ e_k.
    pub fn regular_twist(&self) -> Result<TwistSpec> {
        Ok(TwistSpec::Regular(GroupTable::abelian(&self.moduli)?))
    }
}

/// Euclidean distance from θ to Z^m.
pub fn lattice_distance(theta: &[f64]) -> f64 {
    theta.iter().map(|t| (t - t.round()).powi(2)).sum::<f64>().sqrt()
}

/// χ_α on the homology class of `geodesic`.
pub fn character_of(q: &AbelianQuotient, alpha: &[usize], geodesic: &GeodesicClass) -> Result<Complex64> {
    q.check_alpha(alpha)?;
    if geodesic.homology.len() != q.moduli.len() {
        return Err(Error::InvalidInput(format!(
            "homology vector of length {} for a quotient of rank {}",
            geodesic.homology.len(),
            q.moduli.len()
        )));
    }
    let phase: f64 = alpha
        .iter()
        .zip(&q.moduli)
        .zip(&geodesic.homology)
        .map(|((&a, &n), &h)| {
            let n = n as i64;
            ((a as i64 * h.rem_euclid(n)) % n) as f64 / n as f64
        })
        .sum();
    Ok(unit_phase(phase))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacterZeros {
    pub alpha: Vec<usize>,
    pub theta: Vec<f64>,
    pub set: ResonanceSet,
}

/// Zeros of L(s, α/N) in `rect` for every character of `q`.
pub fn cover_zeta_zeros(
    data: &SchottkyData,
    q: &AbelianQuotient,
    rect: &Rectangle,
    opts: &ZeroOptions,
    order_cap: usize,
) -> Result<Vec<CharacterZeros>> {
    if q.moduli.len() != data.m {
        return Err(Error::InvalidInput(format!("quotient rank {} does not match m = {}", q.moduli.len(), data.m)));
    }
    if q.order() > order_cap {
        return Err(Error::InvalidInput(format!("quotient order {} exceeds the cap {order_cap}", q.order())));
    }
    q.characters()
        .par_iter()
        .map(|alpha| {
            let twist = q.twist(alpha);
            let set = resonances_with(&|s| determinant(data, s, &twist, opts.lmax), rect, opts)?;
            Ok(CharacterZeros { alpha: alpha.clone(), theta: q.theta(alpha), set })
        })
        .collect()
}

/// All zeros of the cover in one list, sorted by imaginary then real part.
pub fn union_zeros(per_character: &[CharacterZeros]) -> Vec<Zero> {
    let mut all: Vec<Zero> = per_character.iter().flat_map(|c| c.set.zeros.iter().copied()).collect();
    all.sort_by(|a, b| a.s.im.total_cmp(&b.s.im).then(a.s.re.total_cmp(&b.s.re)));
    all
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonvanishingScan {
    pub grid: usize,
    pub delta: f64,
    /// |L(δ, θ)| at θ = idx/grid, first coordinate fastest.
    pub moduli: Vec<f64>,
    /// |L(δ, 0)|.
    pub residual_at_zero: f64,
    /// Minimum over grid points at distance ≥ OFF_LATTICE_RADIUS from Z^m.
    pub min_modulus: f64,
    pub argmin: Vec<f64>,
}

impl NonvanishingScan {
    pub fn modulus_at(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for &i in idx.iter().rev() {
            flat = flat * self.grid + i;
        }
        self.moduli[flat]
    }
}

/// |L(δ, θ)| on the grid θ ∈ {0, 1/g, …, (g−1)/g}^m.
pub fn nonvanishing_scan(data: &SchottkyData, delta: f64, grid: usize, lmax: usize) -> Result<NonvanishingScan> {
    let m = data.m;
    let total = (grid as u64).checked_pow(m as u32).filter(|&t| t <= 1 << 22);
    let Some(total) = total.filter(|_| grid >= 2) else {
        return Err(Error::InvalidInput(format!("scan grid {grid}^{m} is empty or too large")));
    };
    let s = Complex64::new(delta, 0.0);
    let theta_of = |mut x: usize| -> Vec<f64> {
        (0..m)
            .map(|_| {
                let r = x % grid;
                x /= grid;
                r as f64 / grid as f64
            })
            .collect()
    };
    let moduli = (0..total as usize)
        .into_par_iter()
        .map(|i| Ok(determinant(data, s, &TwistSpec::Abelian(theta_of(i)), lmax)?.norm()))
        .collect::<Result<Vec<f64>>>()?;
    let mut min_modulus = f64::INFINITY;
    let mut argmin = vec![0.0; m];
    for (i, &v) in moduli.iter().enumerate() {
        let th = theta_of(i);
        if lattice_distance(&th) >= OFF_LATTICE_RADIUS && v < min_modulus {
            min_modulus = v;
            argmin = th;
        }
    }
    Ok(NonvanishingScan { grid, delta, residual_at_zero: moduli[0], moduli, min_modulus, argmin })
}

/// Largest accepted move of the zero in one continuation step; larger moves
/// are taken as a jump to another branch and the step is halved.
const MAX_JUMP: f64 = 0.02;
const MIN_STEP: f64 = 1e-6;

/// Follows the zero of s ↦ L(s, t·θ) from (t0, s0) to t1, halving the step
/// whenever Newton fails or the zero moves by more than MAX_JUMP.
fn track(data: &SchottkyData, theta: &[f64], t0: f64, s0: Complex64, t1: f64, lmax: usize) -> Result<Complex64> {
    let (mut t, mut s) = (t0, s0);
    let mut h = t1 - t0;
    while t < t1 {
        h = h.min(t1 - t);
        let twist = TwistSpec::Abelian(theta.iter().map(|x| x * (t + h)).collect());
        match newton_with(&|z| determinant(data, z, &twist, lmax), s, 1, true) {
            Ok((z, _)) if (z - s).norm() < MAX_JUMP => {
                s = z;
                t += h;
                h *= 2.0;
            }
            _ if h > MIN_STEP => h *= 0.5,
            Ok((z, _)) => return Err(Error::NoConvergence { start: s, last: z, residual: f64::NAN }),
            Err(e) => return Err(e),
        }
    }
    Ok(s)
}

/// Zeros of s ↦ L(s, t·θ) continued from s = δ at t = 0 through the given
/// increasing values of t ∈ (0, 1].
pub fn continue_along_ray(
    data: &SchottkyData,
    delta: f64,
    theta: &[f64],
    ts: &[f64],
    lmax: usize,
) -> Result<Vec<Complex64>> {
    let (mut t, mut s) = (0.0, Complex64::new(delta, 0.0));
    let mut out = Vec::with_capacity(ts.len());
    for &target in ts {
        s = track(data, theta, t, s, target, lmax)?;
        t = target;
        out.push(s);
    }
    Ok(out)
}

/// φ(θ) by continuation from δ in `steps` equal increments.
pub fn phi(data: &SchottkyData, delta: f64, theta: &[f64], steps: usize, lmax: usize) -> Result<Complex64> {
    if theta.iter().all(|&x| x == 0.0) {
        let s = Complex64::new(delta, 0.0);
        return Ok(newton_with(&|z| determinant(data, z, &TwistSpec::Trivial, lmax), s, 1, true)?.0);
    }
    let steps = steps.max(1);
    let ts: Vec<f64> = (1..=steps).map(|j| j as f64 / steps as f64).collect();
    Ok(*continue_along_ray(data, delta, theta, &ts, lmax)?.last().expect("steps >= 1"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSample {
    pub theta: Vec<f64>,
    pub phi: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicitCurve {
    /// Half-width of the sampled box after any shrinking.
    pub epsilon: f64,
    pub delta: f64,
    pub shrinks: usize,
    pub samples: Vec<CurveSample>,
}

impl ImplicitCurve {
    pub fn max_imag(&self) -> f64 {
        self.samples.iter().map(|p| p.phi.im.abs()).fold(0.0, f64::max)
    }

    pub fn at_zero(&self) -> Option<Complex64> {
        self.samples.iter().find(|p| p.theta.iter().all(|&x| x == 0.0)).map(|p| p.phi)
    }

    /// Largest |φ(θ) − φ(−θ)| over sample pairs present in the grid.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.samples {
            let neg: Vec<f64> = p.theta.iter().map(|x| -x).collect();
            if let Some(q) = self.samples.iter().find(|q| q.theta == neg) {
                worst = worst.max((p.phi - q.phi).norm());
            }
        }
        worst
    }
}

const MAX_SHRINKS: usize = 3;
/// Continuation increments per unit of ‖θ‖_∞ / ε.
const RAY_STEPS: f64 = 8.0;

/// φ on the grid of `grid` points per axis over [−ε, ε]^m.
pub fn implicit_curve(
    data: &SchottkyData,
    delta: f64,
    epsilon: f64,
    grid: usize,
    lmax: usize,
) -> Result<ImplicitCurve> {
    if !(epsilon > 0.0 && epsilon < 0.5) || grid < 3 || grid.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "implicit curve needs 0 < epsilon < 1/2 and an odd grid >= 3, got {epsilon}, {grid}"
        )));
    }
    let m = data.m;
    let total = grid
        .checked_pow(m as u32)
        .filter(|&t| t <= 1 << 20)
        .ok_or_else(|| Error::InvalidInput(format!("curve grid {grid}^{m} too large")))?;
    let mut eps = epsilon;
    for shrinks in 0..=MAX_SHRINKS {
        let thetas: Vec<Vec<f64>> = (0..total)
            .map(|mut x| {
                (0..m)
                    .map(|_| {
                        let r = x % grid;
                        x /= grid;
                        -eps + 2.0 * eps * r as f64 / (grid - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let results: Vec<Result<Complex64>> = thetas
            .par_iter()
            .map(|th| {
                let norm = th.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let steps = (RAY_STEPS * norm / eps).ceil() as usize;
                phi(data, delta, th, steps, lmax)
            })
            .collect();
        match results.iter().position(|r| r.is_err()) {
            None => {
                let samples = thetas
                    .into_iter()
                    .zip(results)
                    .map(|(theta, r)| CurveSample { theta, phi: r.expect("checked") })
                    .collect();
                return Ok(ImplicitCurve { epsilon: eps, delta, shrinks, samples });
            }
            Some(i) if shrinks == MAX_SHRINKS => return Err(Error::Continuation { theta: thetas[i].clone(), shrinks }),
            Some(_) => eps *= 0.5,
        }
    }
    unreachable!("loop returns on the last shrink")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveDerivatives {
    pub gradient: Vec<f64>,
    /// ∇² Re φ at θ = 0, row-major m×m.
    pub hessian: Vec<Vec<f64>>,
    pub hessian_eigenvalues: Vec<f64>,
    pub hessian_determinant: f64,
    pub negative_definite: bool,
}

/// Central finite differences of Re φ at θ = 0 with step h.
pub fn curve_derivatives(data: &SchottkyData, delta: f64, h: f64, lmax: usize) -> Result<CurveDerivatives> {
    let m = data.m;
    let eval = |pairs: &[(usize, f64)]| -> Result<f64> {
        let mut th = vec![0.0; m];
        for &(k, v) in pairs {
            th[k] += v;
        }
        Ok(phi(data, delta, &th, 4, lmax)?.re)
    };
    let center = eval(&[])?;
    let mut gradient = vec![0.0; m];
    let mut hessian = vec![vec![0.0; m]; m];
    for i in 0..m {
        let p = eval(&[(i, h)])?;
        let q = eval(&[(i, -h)])?;
        gradient[i] = (p - q) / (2.0 * h);
        hessian[i][i] = (p - 2.0 * center + q) / (h * h);
        for j in 0..i {
            let pp = eval(&[(i, h), (j, h)])?;
            let pm = eval(&[(i, h), (j, -h)])?;
            let mp = eval(&[(i, -h), (j, h)])?;
            let mm = eval(&[(i, -h), (j, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hessian[i][j] = v;
            hessian[j][i] = v;
        }
    }
    let cm = CMatrix { n: m, data: hessian.iter().flatten().map(|&v| Complex64::new(v, 0.0)).collect() };
    let hessian_eigenvalues = cm.hermitian_eigenvalues()?;
    let hessian_determinant = hessian_eigenvalues.iter().product();
    let negative_definite = hessian_eigenvalues.iter().all(|&l| l < 0.0);
    Ok(CurveDerivatives { gradient, hessian, hessian_eigenvalues, hessian_determinant, negative_definite })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticFit {
    /// Symmetric Q with δ − φ(θ) ≈ θᵀQθ.
    pub q: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub positive_definite: bool,
    pub samples_used: usize,
}

/// Least-squares quadratic model of δ − Re φ over samples with ‖θ‖_∞ ≤ radius.
pub fn fit_quadratic(curve: &ImplicitCurve, radius: f64) -> Result<QuadraticFit> {
    let pts: Vec<&CurveSample> =
        curve.samples.iter().filter(|p| p.theta.iter().all(|x| x.abs() <= radius + 1e-15)).collect();
    let m = pts.first().map_or(0, |p| p.theta.len());
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    if pts.len() < pairs.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} samples within radius {radius} cannot determine a quadratic form",
            pts.len()
        )));
    }
    let rows: Vec<Vec<f64>> =
        pts.iter().map(|p| pairs.iter().map(|&(i, j)| p.theta[i] * p.theta[j]).collect()).collect();
    let y: Vec<f64> = pts.iter().map(|p| curve.delta - p.phi.re).collect();
    let c = least_squares(&rows, &y).ok_or_else(|| Error::InvalidInput("singular quadratic fit".into()))?;
    let mut q = vec![vec![0.0; m]; m];
    for (&(i, j), &v) in pairs.iter().zip(&c) {
        if i == j {
            q[i][i] = v;
        } else {
            q[i][j] = 0.5 * v;
            q[j][i] = 0.5 * v;
        }
    }
    let max_residual = rows
        .iter()
        .zip(&y)
        .map(|(r, &yi)| (r.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() - yi).abs())
        .fold(0.0, f64::max);
    let cm = CMatrix { n: m, data: q.iter().flatten().map(|&v| Complex64::new(v, 0.0)).collect() };
    let positive_definite = cm.hermitian_eigenvalues()?.iter().all(|&l| l > 0.0);
    Ok(QuadraticFit { q, max_residual, positive_definite, samples_used: pts.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistOptions {
    /// Characters with |α/N| < epsilon (after reduction to [−1/2, 1/2)) are searched.
    pub epsilon: f64,
    /// Window U; `None` selects [δ − 0.1, δ + 0.02] × [−0.05, 0.05].
    pub window: Option<Rectangle>,
    /// Continuation nodes on [0, ε] for the reference curve.
    pub reference_nodes: usize,
    /// Uniform x-samples of the interpolated reference push-forward.
    pub reference_samples: usize,
    pub bins: usize,
    pub zeros: ZeroOptions,
}

impl Default for EquidistOptions {
    fn default() -> Self {
        EquidistOptions {
            epsilon: 0.25,
            window: None,
            reference_nodes: 129,
            reference_samples: 20000,
            bins: 24,
            zeros: ZeroOptions::default(),
        }
    }
}

pub fn default_window(delta: f64) -> Rectangle {
    Rectangle { re0: delta - 0.1, re1: delta + 0.02, im0: -0.05, im1: 0.05 }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientRun {
    pub n: usize,
    pub characters_searched: usize,
    /// (α_1, zero) for zeros in the window.
    pub zeros: Vec<(usize, Zero)>,
    /// Σ multiplicities in the window.
    pub count: i64,
    /// count / N.
    pub normalized_count: f64,
    pub max_imag: f64,
    pub histogram: Vec<f64>,
    pub kolmogorov: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquidistReport {
    pub delta: f64,
    pub window: Rectangle,
    pub epsilon: f64,
    pub bin_edges: Vec<f64>,
    /// Reference probability per bin.
    pub reference_histogram: Vec<f64>,
    /// Fitted exponent a in dμ/du ∝ (δ − u)^a near δ.
    pub density_exponent: f64,
    pub runs: Vec<QuotientRun>,
}

fn histogram(values: &[(f64, f64)], edges: &[f64]) -> Vec<f64> {
    let nb = edges.len() - 1;
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut h = vec![0.0; nb];
    for &(x, w) in values {
        if x < edges[0] || x > edges[nb] {
            continue;
        }
        let width = edges[1] - edges[0];
        let b = (((x - edges[0]) / width) as usize).min(nb - 1);
        h[b] += w;
    }
    if total > 0.0 {
        h.iter_mut().for_each(|v| *v /= total);
    }
    h
}

/// Two-sample Kolmogorov distance between weighted samples.
pub fn kolmogorov_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let wa: f64 = a.iter().map(|p| p.1).sum();
    let wb: f64 = b.iter().map(|p| p.1).sum();
    if wa == 0.0 || wb == 0.0 {
        return 1.0;
    }
    let mut events: Vec<(f64, f64, f64)> =
        a.iter().map(|p| (p.0, p.1 / wa, 0.0)).chain(b.iter().map(|p| (p.0, 0.0, p.1 / wb))).collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut fa, mut fb, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            fa += events[i].1;
            fb += events[i].2;
            i += 1;
        }
        worst = worst.max((fa - fb).abs());
    }
    worst
}

/// Near-δ resonances of the Z/N covers (first generator) against the
/// push-forward of Lebesgue measure on (−ε, ε) under x ↦ φ(x e_1).
pub fn equidistribution_experiment(
    data: &SchottkyData,
    delta: f64,
    sizes: &[usize],
    opts: &EquidistOptions,
) -> Result<EquidistReport> {
    if !(opts.epsilon > 0.0 && opts.epsilon <= 0.5) || opts.bins == 0 || opts.reference_nodes < 8 {
        return Err(Error::InvalidInput(format!("bad equidistribution options {opts:?}")));
    }
    let window = opts.window.unwrap_or_else(|| default_window(delta));
    let lmax = opts.zeros.lmax;
    let mut dir = vec![0.0; data.m];
    dir[0] = opts.epsilon;
    let nodes: Vec<f64> = (1..=opts.reference_nodes).map(|j| j as f64 / opts.reference_nodes as f64).collect();
    // Follow φ(x e_1) from x = 0 until it drops below the window; beyond that
    // point the branch no longer contributes to U.
    let h = opts.epsilon / opts.reference_nodes as f64;
    let mut curve = vec![(0.0, delta)];
    let mut s = Complex64::new(delta, 0.0);
    for &t in &nodes {
        let prev = curve.last().expect("nonempty").0 / opts.epsilon;
        s = track(data, &dir, prev, s, t, lmax)?;
        curve.push((t * opts.epsilon, s.re));
        if s.re < window.re0 - 2.0 * MAX_JUMP {
            break;
        }
    }
    let x_exit = curve.last().expect("nonempty").0;
    // φ is even, so sampling |x| uniformly on [0, ε) is enough.
    let interp = |x: f64| -> Option<f64> {
        if x > x_exit {
            return None;
        }
        let k = ((x / h) as usize).min(curve.len() - 2);
        let t = (x - curve[k].0) / h;
        Some(curve[k].1 * (1.0 - t) + curve[k + 1].1 * t)
    };
    let reference: Vec<(f64, f64)> = (0..opts.reference_samples)
        .filter_map(|i| interp((i as f64 + 0.5) / opts.reference_samples as f64 * opts.epsilon))
        .filter(|&u| u >= window.re0 && u <= window.re1)
        .map(|u| (u, 1.0))
        .collect();
    let bw = window.width() / opts.bins as f64;
    let bin_edges: Vec<f64> = (0..=opts.bins).map(|i| window.re0 + i as f64 * bw).collect();
    let reference_histogram = histogram(&reference, &bin_edges);

    // Mass of {δ − φ < v} ∝ v^{r/2}; the density exponent is r/2 − 1.
    let mut gaps: Vec<f64> = reference.iter().map(|p| delta - p.0).filter(|&v| v > 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    let total = reference.len() as f64;
    let vmax = gaps.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = (1..=12)
        .filter_map(|i| {
            let v = vmax * 0.25 * (i as f64 / 12.0);
            let c = gaps.partition_point(|&g| g < v) as f64;
            (c > 0.0 && v > 0.0).then(|| (v.ln(), (c / total).ln()))
        })
        .collect();
    let density_exponent = linear_fit(&pts).map_or(f64::NAN, |(slope, _)| slope - 1.0);

    let mut runs = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let q = AbelianQuotient::cyclic(n, data.m)?;
        let alphas: Vec<Vec<usize>> =
            q.characters().into_iter().filter(|a| q.theta(a)[0].abs() < opts.epsilon).collect();
        let found = alphas
            .par_iter()
            .map(|a| {
                let twist = q.twist(a);
                let set = resonances_with(&|s| determinant(data, s, &twist, lmax), &window, &opts.zeros)?;
                Ok(set.zeros.into_iter().map(|z| (a[0], z)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let zeros: Vec<(usize, Zero)> = found.into_iter().flatten().collect();
        let weighted: Vec<(f64, f64)> = zeros.iter().map(|(_, z)| (z.s.re, z.multiplicity as f64)).collect();
        let count = zeros.iter().map(|(_, z)| z.multiplicity as i64).sum();
        runs.push(QuotientRun {
            n,
            characters_searched: alphas.len(),
            count,
            normalized_count: count as f64 / n as f64,
            max_imag: zeros.iter().map(|(_, z)| z.s.im.abs()).fold(0.0, f64::max),
            histogram: histogram(&weighted, &bin_edges),
            kolmogorov: kolmogorov_distance(&weighted, &reference),
            zeros,
        });
    }
    Ok(EquidistReport { delta, window, epsilon: opts.epsilon, bin_edges, reference_histogram, density_exponent, runs })
}
