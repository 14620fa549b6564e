//! Compactly supported test functions with sub-exponential Fourier decay and
//! geodesic-side sums
//! I(ρ,T) = Σ_{C,k} χ_ρ(C^k) · ℓ(C)/(1 − e^{−kℓ(C)}) · φ₀(kℓ(C)/T).
//!
//! φ₀ is the iterated convolution of mass-one boxes on [−μ_j, μ_j] with
//! μ_j = C̃ / (j (log(1+j))^{1+ε}), C̃ normalising Σ_{j≥1} μ_j to one.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::schottky::{GeodesicClass, GeodesicTable};

pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_GRID: usize = 32769;
pub const MAX_GRID: usize = 1 << 16;
/// Terms of Σ_j 1/(j log(1+j)^{1+ε}) summed explicitly before the integral tail bound.
pub const HEAD_TERMS: usize = 1_000_000;
/// Transform values below this are unresolved by a double precision quadrature
/// of a unit-mass function and are left out of the envelope fit.
pub const ENVELOPE_FLOOR: f64 = 1e-15;
/// Minimum coefficient of determination for the envelope model to count as a fit.
pub const MIN_R_SQUARED: f64 = 0.95;
const MIN_RESOLVED: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct TestFunction {
    pub epsilon: f64,
    pub widths: Vec<f64>,
    pub c_tilde: f64,
    /// Upper bound for Σ_{j>J} μ_j.
    pub tail_bound: f64,
    /// 1 − Σ_{j≤J} μ_j.
    pub deficit: f64,
    /// φ₀ vanishes outside [−support, support].
    pub support: f64,
    pub step: f64,
    /// φ₀ at x_i = −1 + i·step.
    pub values: Vec<f64>,
    /// Cell masses w_0, w_1, … of each symmetric discrete box.
    #[serde(skip)]
    kernels: Vec<Vec<f64>>,
}

fn tail_integral(epsilon: f64, from: f64) -> f64 {
    1.0 / (epsilon * from.ln().powf(epsilon))
}

fn width_term(j: usize, epsilon: f64) -> f64 {
    let j = j as f64;
    1.0 / (j * j.ln_1p().powf(1.0 + epsilon))
}

/// Masses of a box of half-width μ and unit mass on cells of width h centred
/// on the integers; index k holds the cell at ±k.
fn box_kernel(mu: f64, h: f64) -> Vec<f64> {
    let kmax = (mu / h - 0.5).ceil().max(0.0) as usize;
    (0..=kmax)
        .map(|k| {
            let lo = (k as f64 - 0.5) * h;
            let hi = (k as f64 + 0.5) * h;
            let overlap = hi.min(mu) - lo.max(-mu);
            overlap.max(0.0) / (2.0 * mu)
        })
        .collect()
}

fn convolve(a: &[f64], half: &[f64]) -> Vec<f64> {
    // a is symmetric with centre index a.len()/2
    let r = half.len() - 1;
    let n = a.len() + 2 * r;
    let kernel: Vec<f64> = (0..=2 * r).map(|i| half[i.abs_diff(r)]).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let lo = i.saturating_sub(2 * r);
            let hi = i.min(a.len() - 1);
            (lo..=hi).map(|j| a[j] * kernel[i - j]).sum()
        })
        .collect()
}

/// φ₀ built from the first `j` boxes, sampled at `grid` points on [−1, 1].
pub fn build_test_function(epsilon: f64, j: usize, grid: usize) -> Result<TestFunction> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || j == 0 {
        return Err(Error::InvalidInput(format!("test function needs epsilon > 0 and J >= 1, got {epsilon}, {j}")));
    }
    if !(3..=MAX_GRID).contains(&grid) || grid.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("grid size must be odd in [3, {MAX_GRID}], got {grid}")));
    }
    if j >= HEAD_TERMS {
        return Err(Error::InvalidInput(format!("J must be below {HEAD_TERMS}, got {j}")));
    }
    let head: f64 = (1..=HEAD_TERMS).map(|k| width_term(k, epsilon)).sum();
    let tail = tail_integral(epsilon, HEAD_TERMS as f64);
    let c_tilde = 1.0 / (head + tail);
    let widths: Vec<f64> = (1..=j).map(|k| c_tilde * width_term(k, epsilon)).collect();
    let used: f64 = widths.iter().sum();
    let tail_bound = c_tilde * ((j + 1..=HEAD_TERMS).map(|k| width_term(k, epsilon)).sum::<f64>() + tail);

    let step = 2.0 / (grid - 1) as f64;
    let narrowest = widths[j - 1];
    if narrowest < step {
        return Err(Error::InvalidInput(format!(
            "grid step {step:e} too coarse for the narrowest width mu_{j} = {narrowest:e}"
        )));
    }
    let kernels: Vec<Vec<f64>> = widths.iter().map(|&mu| box_kernel(mu, step)).collect();
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by_key(|&i| kernels[i].len());
    let mut mass = vec![1.0];
    for &i in &order {
        mass = convolve(&mass, &kernels[i]);
    }
    let half = mass.len() / 2;
    let centre = (grid - 1) / 2;
    // the piecewise linear interpolant reaches one cell past the last node
    let support = (half + 1) as f64 * step;
    if half + 1 > centre {
        return Err(Error::InvalidInput(format!("support {support} exceeds [-1, 1]; refine the grid")));
    }
    let mut values = vec![0.0; grid];
    for (k, &w) in mass.iter().enumerate() {
        values[centre - half + k] = w / step;
    }
    Ok(TestFunction { epsilon, widths, c_tilde, tail_bound, deficit: 1.0 - used, support, step, values, kernels })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl TestFunction {
    pub fn order(&self) -> usize {
        self.widths.len()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| -1.0 + i as f64 * self.step).collect()
    }

    /// Linear interpolation of the samples; zero outside [−1, 1].
    pub fn eval(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        let u = (x + 1.0) / self.step;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let f = u - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// ∫ φ₀ of the interpolant.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step
    }

    /// ∫ φ₀(x) e^{−ixξ} dx of the interpolant, as the product of the discrete
    /// box transforms times the transform of the linear interpolation hat.
    pub fn transform(&self, xi: f64) -> f64 {
        let h = self.step;
        let hat = sinc(0.5 * xi * h).powi(2);
        self.kernels.iter().fold(hat, |acc, k| {
            let s: f64 = k.iter().enumerate().skip(1).map(|(n, w)| w * (n as f64 * h * xi).cos()).sum();
            acc * (k[0] + 2.0 * s)
        })
    }

    /// Same transform by direct quadrature over the samples.
    pub fn transform_direct(&self, xi: f64) -> f64 {
        let h = self.step;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| v * ((-1.0 + i as f64 * h) * xi).cos())
            .sum();
        s * h * sinc(0.5 * xi * h).powi(2)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopePoint {
    pub xi: f64,
    pub modulus: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub alpha: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub floor: f64,
    /// Window maxima of |φ̂₀| on a log-spaced grid.
    pub envelope: Vec<EnvelopePoint>,
    /// Envelope points above the floor, used in the fit.
    pub resolved: usize,
    pub log_c1: f64,
    pub c2: f64,
    pub r_squared: f64,
    pub holds: bool,
}

/// Fits log|φ̂₀(ξ)| ≈ log C₁ − C₂ ξ/(log ξ)^{1+α} to the upper envelope of
/// the transform on [ξ_min, ξ_max]. The envelope holds when C₂ > 0 and the
/// model explains at least MIN_R_SQUARED of the variance of the resolved points.
pub fn fourier_envelope_check(
    phi: &TestFunction,
    xi_min: f64,
    xi_max: f64,
    alpha: f64,
    points: usize,
    window: usize,
) -> Result<EnvelopeReport> {
    if !(xi_min > 1.0 && xi_max > xi_min && alpha >= 0.0) || window == 0 || points < window {
        return Err(Error::InvalidInput(format!(
            "envelope check needs 1 < xi_min < xi_max, alpha >= 0 and points >= window >= 1, got [{xi_min}, {xi_max}], {alpha}, {points}, {window}"
        )));
    }
    let (l0, l1) = (xi_min.ln(), xi_max.ln());
    let xs: Vec<f64> = (0..points).map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp()).collect();
    let values: Vec<f64> = xs.par_iter().map(|&x| phi.transform(x).abs()).collect();
    let envelope: Vec<EnvelopePoint> = xs
        .chunks(window)
        .zip(values.chunks(window))
        .map(|(x, v)| {
            let (i, m) = v
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &m)| if m > best.1 { (i, m) } else { best });
            EnvelopePoint { xi: x[i], modulus: m }
        })
        .collect();
    let used: Vec<&EnvelopePoint> = envelope.iter().filter(|p| p.modulus > ENVELOPE_FLOOR).collect();
    let u = |x: f64| x / x.ln().powf(1.0 + alpha);
    let rows: Vec<Vec<f64>> = used.iter().map(|p| vec![1.0, -u(p.xi)]).collect();
    let y: Vec<f64> = used.iter().map(|p| p.modulus.ln()).collect();
    let fit = if used.len() >= MIN_RESOLVED { least_squares(&rows, &y) } else { None };
    let (log_c1, c2, r_squared) = match fit {
        Some(c) => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let res: f64 = rows.iter().zip(&y).map(|(r, v)| (v - c[0] - c[1] * r[1]).powi(2)).sum();
            let r2 = if tot > 0.0 { 1.0 - res / tot } else { 0.0 };
            (c[0], c[1], r2)
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let holds = c2 > 0.0 && r_squared >= MIN_R_SQUARED;
    Ok(EnvelopeReport {
        alpha,
        xi_min,
        xi_max,
        floor: ENVELOPE_FLOOR,
        resolved: used.len(),
        envelope,
        log_c1,
        c2,
        r_squared,
        holds,
    })
}

/// ℓ/(1 − e^{−kℓ}), the weight of C^k in the logarithmic derivative.
pub fn weight(length: f64, k: u32) -> f64 {
    length / -(-(k as f64) * length).exp_m1()
}

/// Visits every (C, k) with kℓ(C) ≤ T.
pub fn for_each_power(table: &GeodesicTable, t: f64, mut f: impl FnMut(&GeodesicClass, u32)) -> Result<()> {
    let have = table.complete_to_length();
    if have < t {
        return Err(Error::IncompleteTable { have, need: t, depth: table.max_word_len });
    }
    for c in &table.classes {
        let mut k = 1u32;
        while k as f64 * c.length <= t {
            f(c, k);
            k += 1;
        }
    }
    Ok(())
}

/// I(ρ,T) with χ_ρ(C^k) supplied by `character`.
pub fn geodesic_sum(
    table: &GeodesicTable,
    t: f64,
    phi: &TestFunction,
    mut character: impl FnMut(&GeodesicClass, u32) -> Complex64,
) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t}")));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for_each_power(table, t, |c, k| {
        let x = k as f64 * c.length;
        sum += character(c, k) * weight(c.length, k) * phi.eval(x / t);
    })?;
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::{primitive_geodesics, SchottkyData};
    use proptest::prelude::*;

    fn small(j: usize) -> TestFunction {
        build_test_function(DEFAULT_EPSILON, j, 4001).unwrap()
    }

    #[test]
    fn widths_and_support() {
        let f = small(12);
        assert!(f.widths.windows(2).all(|w| w[0] > w[1]));
        let used: f64 = f.widths.iter().sum();
        assert!(used + f.tail_bound <= 1.0 + 1e-12);
        assert!((used + f.tail_bound - 1.0).abs() < 1e-9);
        assert!(f.support <= 1.0);
        assert!((f.mass() - 1.0).abs() < 1e-10);
        assert!(f.values.iter().all(|&v| v >= 0.0));
        let n = f.values.len();
        for i in 0..n {
            assert!((f.values[i] - f.values[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_box_and_trapezoid() {
        let f = small(1);
        let mu = f.widths[0];
        let height = 1.0 / (2.0 * mu);
        assert!((f.eval(0.0) - height).abs() < 1e-12);
        assert!((f.eval(0.9 * mu) - height).abs() < 1e-12);
        assert_eq!(f.eval(mu + 2.0 * f.step), 0.0);

        let g = small(2);
        let (m1, m2) = (g.widths[0], g.widths[1]);
        let trapezoid = |x: f64| {
            let a = x.abs();
            let top = 1.0 / (2.0 * m1);
            if a <= m1 - m2 {
                top
            } else if a >= m1 + m2 {
                0.0
            } else {
                top * (m1 + m2 - a) / (2.0 * m2)
            }
        };
        for i in 0..=200 {
            let x = -0.8 + 1.6 * i as f64 / 200.0;
            assert!((g.eval(x) - trapezoid(x)).abs() < 2.0 * g.step / (m1 * m2), "x = {x}");
        }
        assert_eq!(g.eval(m1 + m2 + 2.0 * g.step), 0.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(build_test_function(0.5, 12, 101).is_err());
        assert!(build_test_function(0.5, 2, 100).is_err());
        assert!(build_test_function(0.5, 0, 101).is_err());
    }

    #[test]
    fn transform_matches_quadrature_and_analytic_product() {
        let f = small(4);
        assert!((f.transform(0.0) - 1.0).abs() < 1e-12);
        for &xi in &[0.5, 3.0, 17.0, 80.0] {
            let a = f.transform(xi);
            let b = f.transform_direct(xi);
            assert!((a - b).abs() < 1e-12, "xi = {xi}: {a} vs {b}");
            let exact: f64 = f.widths.iter().map(|&m| sinc(m * xi)).product();
            assert!((a - exact).abs() < 1e-3, "xi = {xi}: {a} vs {exact}");
        }
    }

    #[test]
    fn envelope_separates_box_from_smooth() {
        let twelve = build_test_function(0.5, 12, DEFAULT_GRID).unwrap();
        let r = fourier_envelope_check(&twelve, 10.0, 1e4, 0.5, 4096, 32).unwrap();
        assert!(r.holds, "{} {}", r.c2, r.r_squared);
        let one = build_test_function(0.5, 1, DEFAULT_GRID).unwrap();
        let r = fourier_envelope_check(&one, 10.0, 1e4, 0.5, 4096, 32).unwrap();
        assert!(!r.holds, "{} {}", r.c2, r.r_squared);
    }

    #[test]
    fn geodesic_sums() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let table = primitive_geodesics(&d, 8.0).unwrap();
        let f = small(6);
        let shortest = table.classes[0].length;
        let z = geodesic_sum(&table, 0.9 * shortest, &f, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(z, Complex64::new(0.0, 0.0));
        assert!(geodesic_sum(&table, 9.0, &f, |_, _| Complex64::new(1.0, 0.0)).is_err());

        let theta = [0.3, -0.15];
        let chi = |c: &GeodesicClass, k: u32| {
            let x: f64 = c.homology.iter().zip(&theta).map(|(&h, &t)| h as f64 * t).sum();
            Complex64::from_polar(1.0, std::f64::consts::TAU * x * k as f64)
        };
        let t = 7.5;
        let got = geodesic_sum(&table, t, &f, chi).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for c in &table.classes {
            for k in 1..20u32 {
                let x = k as f64 * c.length;
                if x <= t {
                    want += chi(c, k) * (c.length / (1.0 - (-x).exp())) * f.eval(x / t);
                }
            }
        }
        assert!((got - want).norm() < 1e-12);
        let trivial = geodesic_sum(&table, t, &f, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert!(trivial.re > 0.0 && trivial.im == 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mass_symmetry_and_support(j in 1usize..8, eps in 0.2f64..2.0) {
            let f = build_test_function(eps, j, 2001).unwrap();
            prop_assert!((f.mass() - 1.0).abs() < 1e-10);
            prop_assert!(f.support <= 1.0);
            prop_assert!(f.values.iter().all(|&v| v >= 0.0));
            prop_assert!(f.widths.iter().sum::<f64>() + f.tail_bound <= 1.0 + 1e-12);
            for x in [0.1, 0.37, 0.8] {
                prop_assert!((f.eval(x) - f.eval(-x)).abs() < 1e-9);
            }
        }
    }
}
