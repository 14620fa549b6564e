//! Truncated matrices of the twisted transfer operator
//!
//! ```text
//! L_{ρ,s} F(z) = Σ_{a ≠ t} γ_a'(z)^s F(γ_a z) ρ(γ_a),   z ∈ D_t,
//! ```
//!
//! in the orthonormal Bergman basis
//! φ_ℓ^{(j)}(z) = √((ℓ+1)/π) · r_j⁻¹ · ((z − c_j)/r_j)^ℓ of each disc.
//!
//! Row index (t, ℓ', k), column index (j, ℓ, i) with j = inv(a); the entry is
//! the ℓ'-th coefficient of γ_a'^s φ_ℓ^{(j)}∘γ_a around c_t times ρ(γ_a)_{ik}.
//! Coefficients come from 4(lmax+1) samples on the circle of radius 0.75 r_t
//! and a forward FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{small_det, CMatrix};
use crate::schottky::{closed_words, log_derivative_cocycle, word_map, SchottkyData, Word};

/// Radius of the sampling circle relative to the target disc.
pub const SAMPLE_RADIUS: f64 = 0.75;
pub const DEFAULT_LMAX: usize = 32;

/// Multiplication table of a finite group with the images of the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTable {
    /// `mul[g][h]` = g·h.
    pub mul: Vec<Vec<usize>>,
    pub identity: usize,
    /// Image of γ_k for k < m.
    pub generator_images: Vec<usize>,
}

impl GroupTable {
    /// Z/N_1 × … × Z/N_m with γ_k ↦ e_k; elements in mixed radix, first
    /// coordinate fastest.
    pub fn abelian(moduli: &[usize]) -> Result<Self> {
        if moduli.contains(&0) {
            return Err(Error::InvalidInput("moduli must be >= 1".into()));
        }
        let order: usize = moduli.iter().product();
        let decode = |mut x: usize| -> Vec<usize> {
            moduli
                .iter()
                .map(|&n| {
                    let r = x % n;
                    x /= n;
                    r
                })
                .collect()
        };
        let encode = |v: &[usize]| -> usize {
            let mut x = 0;
            for (k, &n) in moduli.iter().enumerate().rev() {
                x = x * n + v[k] % n;
            }
            x
        };
        let mul = (0..order)
            .map(|g| {
                let a = decode(g);
                (0..order)
                    .map(|h| {
                        let b = decode(h);
                        let s: Vec<usize> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                        encode(&s)
                    })
                    .collect()
            })
            .collect();
        let generator_images = (0..moduli.len())
            .map(|k| {
                let mut e = vec![0; moduli.len()];
                e[k] = 1;
                encode(&e)
            })
            .collect();
        Ok(GroupTable { mul, identity: 0, generator_images })
    }

    pub fn order(&self) -> usize {
        self.mul.len()
    }

    pub fn inverse(&self, g: usize) -> usize {
        (0..self.order()).find(|&h| self.mul[g][h] == self.identity).expect("group table without inverse")
    }
}

/// A unitary twist of the transfer operator.
#[derive(Clone, Debug, PartialEq)]
pub enum TwistSpec {
    Trivial,
    /// γ_k ↦ e^{2πiθ_k}.
    Abelian(Vec<f64>),
    /// One d×d row-major unitary per letter (2m of them, U[k+m] = U[k]*).
    Matrix {
        d: usize,
        u: Vec<Vec<Complex64>>,
    },
    /// Left regular representation of a finite quotient.
    Regular(GroupTable),
}

/// e^{2πiθ} with θ first reduced to [−1/2, 1/2]; quarter turns are exact.
pub fn unit_phase(theta: f64) -> Complex64 {
    let x = theta - theta.round();
    if x == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if x == 0.25 {
        Complex64::new(0.0, 1.0)
    } else if x == -0.25 {
        Complex64::new(0.0, -1.0)
    } else if x.abs() == 0.5 {
        Complex64::new(-1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * x)
    }
}

impl TwistSpec {
    pub fn dim(&self) -> usize {
        match self {
            TwistSpec::Trivial | TwistSpec::Abelian(_) => 1,
            TwistSpec::Matrix { d, .. } => *d,
            TwistSpec::Regular(t) => t.order(),
        }
    }

    /// ρ(γ_a) for every letter a, as row-major d×d matrices.
    pub fn letter_matrices(&self, m: usize) -> Result<Vec<Vec<Complex64>>> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            TwistSpec::Trivial => Ok(vec![vec![one]; 2 * m]),
            TwistSpec::Abelian(theta) => {
                if theta.len() != m {
                    return Err(Error::InvalidInput(format!("abelian twist has {} angles for m = {m}", theta.len())));
                }
                let mut out: Vec<Vec<Complex64>> = theta.iter().map(|&t| vec![unit_phase(t)]).collect();
                out.extend(theta.iter().map(|&t| vec![unit_phase(t).conj()]));
                Ok(out)
            }
            TwistSpec::Matrix { d, u } => {
                let d = *d;
                if u.len() != 2 * m || u.iter().any(|x| x.len() != d * d) {
                    return Err(Error::InvalidInput(format!("matrix twist needs {} matrices of size {d}x{d}", 2 * m)));
                }
                for (k, mat) in u.iter().enumerate() {
                    let cm = CMatrix { n: d, data: mat.clone() };
                    let prod = cm.mul(&cm.conj_transpose());
                    let err = prod
                        .data
                        .iter()
                        .enumerate()
                        .map(|(idx, v)| (v - if idx / d == idx % d { one } else { Complex64::new(0.0, 0.0) }).norm())
                        .fold(0.0, f64::max);
                    if err > 1e-10 {
                        return Err(Error::InvalidInput(format!(
                            "twist matrix for letter {} is not unitary (error {err:e})",
                            k + 1
                        )));
                    }
                }
                for k in 0..m {
                    let adj = CMatrix { n: d, data: u[k].clone() }.conj_transpose();
                    let err = adj.data.iter().zip(&u[k + m]).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                    if err > 1e-10 {
                        return Err(Error::InvalidInput(format!(
                            "twist matrix for letter {} is not the adjoint of letter {}",
                            k + m + 1,
                            k + 1
                        )));
                    }
                }
                Ok(u.clone())
            }
            TwistSpec::Regular(table) => {
                if table.generator_images.len() != m {
                    return Err(Error::InvalidInput(format!(
                        "regular twist has {} generator images for m = {m}",
                        table.generator_images.len()
                    )));
                }
                let n = table.order();
                let perm = |g: usize| {
                    let mut p = vec![Complex64::new(0.0, 0.0); n * n];
                    for h in 0..n {
                        p[table.mul[g][h] * n + h] = one;
                    }
                    p
                };
                let mut out: Vec<Vec<Complex64>> = table.generator_images.iter().map(|&g| perm(g)).collect();
                out.extend(table.generator_images.iter().map(|&g| perm(table.inverse(g))));
                Ok(out)
            }
        }
    }
}

/// tr ρ(γ_{α_1}) ⋯ ρ(γ_{α_n}).
pub fn word_character(mats: &[Vec<Complex64>], d: usize, w: &Word) -> Complex64 {
    word_twist_matrix(mats, d, w).trace()
}

/// ρ(γ_{α_1}) ⋯ ρ(γ_{α_n}).
pub fn word_twist_matrix(mats: &[Vec<Complex64>], d: usize, w: &Word) -> CMatrix {
    w.0.iter().fold(CMatrix::identity(d), |acc, &a| acc.mul(&CMatrix { n: d, data: mats[a].clone() }))
}

/// det(I − x·U) for a d×d matrix U.
pub fn det_one_minus(u: &CMatrix, x: Complex64) -> Complex64 {
    if u.n == 1 {
        return 1.0 - x * u.data[0];
    }
    let d = u.n;
    let mut a: Vec<Complex64> = u.data.iter().map(|v| -x * v).collect();
    for i in 0..d {
        a[i * d + i] += 1.0;
    }
    small_det(d, a)
}

/// Truncated twisted transfer matrix.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub s: Complex64,
    pub lmax: usize,
    /// Twist dimension.
    pub d: usize,
    pub m: usize,
    pub matrix: CMatrix,
}

impl TransferMatrix {
    /// Position of basis element (disc j, degree ℓ, twist coordinate k).
    pub fn index(&self, disc: usize, ell: usize, k: usize) -> usize {
        (disc * (self.lmax + 1) + ell) * self.d + k
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }
}

/// Coefficient block for letter a acting on target disc t:
/// `block[ℓ' * (lmax+1) + ℓ]`.
fn letter_block(
    data: &SchottkyData,
    s: Complex64,
    t: usize,
    a: usize,
    lmax: usize,
    fft: &Arc<dyn Fft<f64>>,
) -> Result<Vec<Complex64>> {
    let n = lmax + 1;
    let k = 4 * n;
    let g = data.letter_map(a);
    let j = data.inverse_letter(a);
    let (ct, rt) = (data.discs[t].center, data.discs[t].radius);
    let (cj, rj) = (data.discs[j].center, data.discs[j].radius);
    let mut weight = Vec::with_capacity(k);
    let mut u = Vec::with_capacity(k);
    for q in 0..k {
        let z = ct + SAMPLE_RADIUS * rt * Complex64::from_polar(1.0, 2.0 * PI * q as f64 / k as f64);
        let ld = log_derivative_cocycle(data, &Word(vec![a]), z)?;
        weight.push((s * ld).exp());
        let w = g.apply(z).ok_or(Error::BranchCut { z, derivative: g.derivative(z) })?;
        u.push((w - cj) / rj);
    }
    let mut block = vec![Complex64::new(0.0, 0.0); n * n];
    let mut buf = weight.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![Complex64::new(1.0, 0.0); k];
    for ell in 0..n {
        for q in 0..k {
            buf[q] = weight[q] * power[q];
            power[q] *= u[q];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let src = (ell as f64 + 1.0).sqrt() * rt / rj / k as f64;
        let mut inv_rho = 1.0;
        for lp in 0..n {
            let f = src / (lp as f64 + 1.0).sqrt() * inv_rho;
            block[lp * n + ell] = buf[lp] * f;
            inv_rho /= SAMPLE_RADIUS;
        }
    }
    Ok(block)
}

/// Assembles the truncated matrix of L_{ρ,s}.
pub fn assemble(data: &SchottkyData, s: Complex64, twist: &TwistSpec, lmax: usize) -> Result<TransferMatrix> {
    if lmax < 2 {
        return Err(Error::InvalidInput(format!("lmax must be >= 2, got {lmax}")));
    }
    let m = data.m;
    let nl = 2 * m;
    let d = twist.dim();
    let mats = twist.letter_matrices(m)?;
    let n = lmax + 1;
    let fft = FftPlanner::new().plan_fft_forward(4 * n);
    let pairs: Vec<(usize, usize)> =
        (0..nl).flat_map(|t| (0..nl).filter(move |&a| a != t).map(move |a| (t, a))).collect();
    let blocks = pairs.par_iter().map(|&(t, a)| letter_block(data, s, t, a, lmax, &fft)).collect::<Result<Vec<_>>>()?;

    let dim = nl * n * d;
    let mut matrix = CMatrix::zeros(dim);
    for (&(t, a), block) in pairs.iter().zip(&blocks) {
        let j = data.inverse_letter(a);
        let rho = &mats[a];
        for lp in 0..n {
            for ell in 0..n {
                let b = block[lp * n + ell];
                if d == 1 {
                    matrix.set(t * n + lp, j * n + ell, b * rho[0]);
                    continue;
                }
                for i in 0..d {
                    for k in 0..d {
                        let r = rho[i * d + k];
                        if r != Complex64::new(0.0, 0.0) {
                            matrix.set((t * n + lp) * d + k, (j * n + ell) * d + i, b * r);
                        }
                    }
                }
            }
        }
    }
    Ok(TransferMatrix { s, lmax, d, m, matrix })
}

/// det(I − M).
pub fn fredholm_det(m: &TransferMatrix) -> Complex64 {
    m.matrix.det_identity_minus()
}

/// det(I − L_{ρ,s}) at truncation lmax.
pub fn determinant(data: &SchottkyData, s: Complex64, twist: &TwistSpec, lmax: usize) -> Result<Complex64> {
    Ok(fredholm_det(&assemble(data, s, twist, lmax)?))
}

/// Smallest lmax ≥ start (in steps of 8, at most `cap`) with
/// |det(lmax) − det(lmax + 8)| < tol.
pub fn converged_lmax(
    data: &SchottkyData,
    s: Complex64,
    twist: &TwistSpec,
    start: usize,
    tol: f64,
    cap: usize,
) -> Result<usize> {
    let mut l = start;
    let mut prev = determinant(data, s, twist, l)?;
    while l + 8 <= cap {
        let next = determinant(data, s, twist, l + 8)?;
        if (next - prev).norm() < tol {
            return Ok(l);
        }
        prev = next;
        l += 8;
    }
    Err(Error::NoConvergence { start: s, last: s, residual: f64::NAN })
}

/// Tr(M^N) against the fixed-point (Lefschetz) sum over closed words of length N.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceCheck {
    pub n: usize,
    pub matrix_trace: Complex64,
    pub lefschetz: Complex64,
    pub residual: f64,
}

/// Σ over cyclically reduced words α of length N of
/// χ(γ_α) (γ_α'(x_α))^s / (1 − γ_α'(x_α)).
pub fn lefschetz_sum(data: &SchottkyData, s: Complex64, twist: &TwistSpec, n: usize) -> Result<Complex64> {
    let mats = twist.letter_matrices(data.m)?;
    let d = twist.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for w in closed_words(data, n) {
        let g = word_map(data, &w)?;
        let (x, _) = g.fixed_points().ok_or_else(|| Error::InvalidInput(format!("word {w} not hyperbolic")))?;
        let ld = log_derivative_cocycle(data, &w, Complex64::new(x, 0.0))?;
        let mult = ld.exp();
        acc += word_character(&mats, d, &w) * (s * ld).exp() / (1.0 - mult);
    }
    Ok(acc)
}

pub fn operator_trace_check(
    data: &SchottkyData,
    s: Complex64,
    twist: &TwistSpec,
    lmax: usize,
    n: usize,
) -> Result<TraceCheck> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    let m = assemble(data, s, twist, lmax)?;
    let mut p = m.matrix.clone();
    for _ in 1..n {
        p = p.mul(&m.matrix);
    }
    let matrix_trace = p.trace();
    let lefschetz = lefschetz_sum(data, s, twist, n)?;
    Ok(TraceCheck { n, matrix_trace, lefschetz, residual: (matrix_trace - lefschetz).norm() })
}

pub fn singular_values(m: &TransferMatrix) -> Result<Vec<f64>> {
    m.matrix.singular_values()
}

pub fn spectral_radius(m: &TransferMatrix) -> Result<f64> {
    m.matrix.spectral_radius()
}

/// Least-squares slope of log μ_k against k over the μ_k with
/// lo·μ_1 ≤ μ_k ≤ hi·μ_1.
pub fn singular_value_slope(sv: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let top = *sv.first()?;
    let pts: Vec<(f64, f64)> = sv
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= lo * top && v <= hi * top && v > 0.0)
        .map(|(k, &v)| (k as f64, v.ln()))
        .collect();
    crate::fit::linear_fit(&pts).map(|(slope, _)| slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::DEFAULT_SYMMETRIC3_THETA;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cylinder_closed_form() {
        let data = SchottkyData::cylinder(3.0).unwrap();
        let l = 2.0 * 1.5f64.acosh();
        let s = c(3.0, 1.7);
        let det = determinant(&data, s, &TwistSpec::Trivial, 32).unwrap();
        let mut expect = c(1.0, 0.0);
        for k in 0..200 {
            let f = 1.0 - (-(s + k as f64) * l).exp();
            expect *= f * f;
        }
        assert!((det - expect).norm() < 1e-10, "{det} vs {expect}");
    }

    #[test]
    fn abelian_integer_theta_equals_trivial() {
        let data = SchottkyData::sl2z_pair_default().unwrap();
        let s = c(0.7, 2.0);
        let a = assemble(&data, s, &TwistSpec::Trivial, 8).unwrap();
        let b = assemble(&data, s, &TwistSpec::Abelian(vec![0.0, 0.0]), 8).unwrap();
        let z = assemble(&data, s, &TwistSpec::Abelian(vec![1.0, -3.0]), 8).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.matrix, z.matrix);
    }

    #[test]
    fn block_sparsity() {
        let data = SchottkyData::sl2z_pair_default().unwrap();
        let m = assemble(&data, c(1.0, 0.5), &TwistSpec::Trivial, 6).unwrap();
        for t in 0..4 {
            let j = data.inverse_letter(t);
            for lp in 0..7 {
                for ell in 0..7 {
                    assert_eq!(m.matrix.get(m.index(t, lp, 0), m.index(j, ell, 0)), c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn twist_phase_preserves_block_singular_values() {
        let data = SchottkyData::symmetric3(DEFAULT_SYMMETRIC3_THETA).unwrap();
        let s = c(0.4, 3.0);
        let a = assemble(&data, s, &TwistSpec::Trivial, 10).unwrap();
        let b = assemble(&data, s, &TwistSpec::Abelian(vec![0.3, 0.7]), 10).unwrap();
        let n = 11;
        for t in 0..4 {
            for a_letter in (0..4).filter(|&x| x != t) {
                let j = data.inverse_letter(a_letter);
                let extract = |mm: &TransferMatrix| {
                    let mut blk = CMatrix::zeros(n);
                    for i in 0..n {
                        for k in 0..n {
                            blk.set(i, k, mm.matrix.get(mm.index(t, i, 0), mm.index(j, k, 0)));
                        }
                    }
                    blk.singular_values().unwrap()
                };
                let sa = extract(&a);
                let sb = extract(&b);
                for (x, y) in sa.iter().zip(&sb) {
                    assert!((x - y).abs() < 1e-12 * sa[0]);
                }
            }
        }
    }

    #[test]
    fn regular_twist_factorizes_over_characters() {
        let data = SchottkyData::sl2z_pair_default().unwrap();
        let table = GroupTable::abelian(&[3, 1]).unwrap();
        let s = c(0.9, 1.3);
        let reg = determinant(&data, s, &TwistSpec::Regular(table), 16).unwrap();
        let mut prod = c(1.0, 0.0);
        for a in 0..3 {
            prod *= determinant(&data, s, &TwistSpec::Abelian(vec![a as f64 / 3.0, 0.0]), 16).unwrap();
        }
        assert!((reg - prod).norm() < 1e-10 * prod.norm(), "{reg} {prod}");
    }

    #[test]
    fn trace_identity_small_cases() {
        let data = SchottkyData::sl2z_pair_default().unwrap();
        let s = c(0.8, 1.1);
        let r = operator_trace_check(&data, s, &TwistSpec::Trivial, 24, 1).unwrap();
        assert!(r.residual < 1e-10, "{r:?}");
        let r = operator_trace_check(&data, s, &TwistSpec::Abelian(vec![0.3, 0.1]), 24, 3).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
    }

    #[test]
    fn matrix_twist_validation() {
        let one = c(1.0, 0.0);
        let bad = TwistSpec::Matrix { d: 1, u: vec![vec![c(2.0, 0.0)], vec![one], vec![one], vec![one]] };
        assert!(bad.letter_matrices(2).is_err());
        let i = c(0.0, 1.0);
        let not_adjoint = TwistSpec::Matrix { d: 1, u: vec![vec![i], vec![one], vec![i], vec![one]] };
        assert!(not_adjoint.letter_matrices(2).is_err());
    }
}
