//! Euler-product oracle, argument-principle zero counting, Newton refinement
//! and resonance sets of twisted determinants.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schottky::{primitive_classes_by_depth, GeodesicTable, SchottkyData};
use crate::transfer::{det_one_minus, determinant, word_twist_matrix, TwistSpec};

/// Euler products are refused for Re(s) ≤ δ + EULER_MARGIN.
pub const EULER_MARGIN: f64 = 0.1;
/// Contours whose sampled |det| drops below this are rejected.
pub const MIN_MODULUS: f64 = 1e-6;
/// Central-difference step for Newton derivatives.
pub const FD_STEP: f64 = 1e-6;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// ∏_C ∏_{k ≤ kmax} det(I − ρ(C) e^{−(s+k)ℓ(C)}) over the classes in `table`.
pub fn euler_product_with_table(
    data: &SchottkyData,
    table: &GeodesicTable,
    s: Complex64,
    twist: &TwistSpec,
    kmax: usize,
    delta: f64,
) -> Result<Complex64> {
    let bound = delta + EULER_MARGIN;
    if s.re <= bound {
        return Err(Error::EulerDivergent { re: s.re, bound });
    }
    let mats = twist.letter_matrices(data.m)?;
    let d = twist.dim();
    let mut prod = Complex64::new(1.0, 0.0);
    for c in &table.classes {
        let u = word_twist_matrix(&mats, d, &c.word);
        for k in 0..=kmax {
            let x = (-(s + k as f64) * c.length).exp();
            if x.norm() < 1e-300 {
                break;
            }
            prod *= det_one_minus(&u, x);
        }
    }
    Ok(prod)
}

/// Euler product over primitive classes of word length ≤ max_word_len.
pub fn euler_product(
    data: &SchottkyData,
    s: Complex64,
    twist: &TwistSpec,
    max_word_len: usize,
    kmax: usize,
    delta: f64,
) -> Result<Complex64> {
    let bound = delta + EULER_MARGIN;
    if s.re <= bound {
        return Err(Error::EulerDivergent { re: s.re, bound });
    }
    let table = primitive_classes_by_depth(data, max_word_len)?;
    euler_product_with_table(data, &table, s, twist, kmax, delta)
}

/// Closed axis-parallel rectangle in the s-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rectangle {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        let ok = [re0, re1, im0, im1].iter().all(|v| v.is_finite()) && re0 < re1 && im0 < im1;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "rectangle [{re0}, {re1}] x [{im0}, {im1}] must be finite with re0 < re1 and im0 < im1"
            )));
        }
        Ok(Rectangle { re0, re1, im0, im1 })
    }

    pub fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    pub fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    pub fn size(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    /// Closed containment, enlarged by `slack` on every side.
    pub fn contains(&self, s: Complex64, slack: f64) -> bool {
        s.re >= self.re0 - slack && s.re <= self.re1 + slack && s.im >= self.im0 - slack && s.im <= self.im1 + slack
    }

    pub fn expanded(&self, pad: f64) -> Rectangle {
        Rectangle { re0: self.re0 - pad, re1: self.re1 + pad, im0: self.im0 - pad, im1: self.im1 + pad }
    }

    /// Four sub-rectangles split at the given fractions of width and height.
    fn split(&self, fx: f64, fy: f64) -> [Rectangle; 4] {
        let xm = self.re0 + fx * self.width();
        let ym = self.im0 + fy * self.height();
        [
            Rectangle { re0: self.re0, re1: xm, im0: self.im0, im1: ym },
            Rectangle { re0: xm, re1: self.re1, im0: self.im0, im1: ym },
            Rectangle { re0: self.re0, re1: xm, im0: ym, im1: self.im1 },
            Rectangle { re0: xm, re1: self.re1, im0: ym, im1: self.im1 },
        ]
    }

    /// Counterclockwise boundary samples, `per_edge` per side, starting at (re0, im0).
    fn boundary(&self, per_edge: usize) -> Vec<Complex64> {
        let corners = [
            Complex64::new(self.re0, self.im0),
            Complex64::new(self.re1, self.im0),
            Complex64::new(self.re1, self.im1),
            Complex64::new(self.re0, self.im1),
        ];
        let mut pts = Vec::with_capacity(4 * per_edge);
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            for i in 0..per_edge {
                pts.push(a + (b - a) * (i as f64 / per_edge as f64));
            }
        }
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroOptions {
    /// Truncation order of the transfer matrix.
    pub lmax: usize,
    /// Initial contour samples per rectangle side.
    pub samples_per_edge: usize,
    /// Cells at most this size with several zeros are treated as one multiple zero.
    pub min_cell: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions { lmax: crate::transfer::DEFAULT_LMAX, samples_per_edge: 32, min_cell: 0.01 }
    }
}

impl ZeroOptions {
    pub fn validate(&self) -> Result<()> {
        if self.lmax < 1 || self.samples_per_edge < 2 || !(self.min_cell > 0.0) {
            return Err(Error::InvalidInput(format!(
                "zero options need lmax >= 1, samples_per_edge >= 2, min_cell > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Zero {
    pub s: Complex64,
    pub multiplicity: usize,
    /// |det| at the refined point.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceSet {
    /// Rectangle as requested.
    pub rectangle: Rectangle,
    /// Rectangle actually searched; slightly larger when an edge passed too close to a zero.
    pub searched: Rectangle,
    /// Sorted by imaginary then real part.
    pub zeros: Vec<Zero>,
    pub contour_count: i64,
}

impl ResonanceSet {
    pub fn total_multiplicity(&self) -> i64 {
        self.zeros.iter().map(|z| z.multiplicity as i64).sum()
    }
}

/// Bisection depth limit per contour segment.
const MAX_BISECTIONS: usize = 40;
/// Segments are also bisected while |log|f|| changes by more than this, which
/// catches zeros close to the contour that leave the sampled phase unchanged.
const MAX_LOG_MODULUS_STEP: f64 = 1.0;
/// Upper bound on the initial spacing of contour samples.
const MAX_SPACING: f64 = 0.05;
/// Refined zeros closer than this are merged into one multiple zero.
const MERGE_RADIUS: f64 = 1e-6;

fn checked_eval<F>(f: &F, s: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let v = f(s)?;
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite determinant at s = {s}")));
    }
    if v.norm() < MIN_MODULUS {
        return Err(Error::ContourTooClose { at: s, modulus: v.norm() });
    }
    Ok(v)
}

fn step_ok(ratio: Complex64) -> bool {
    ratio.arg().abs() < std::f64::consts::FRAC_PI_2 && ratio.norm().ln().abs() < MAX_LOG_MODULUS_STEP
}

/// Phase increment of `f` from `a` to `b`. A segment is accepted once both of
/// its halves have small steps that add up to the whole-segment step, which
/// guards against a phase that wraps a full turn between samples.
fn segment_phase<F>(f: &F, a: Complex64, fa: Complex64, b: Complex64, fb: Complex64, depth: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let m = 0.5 * (a + b);
    if depth >= MAX_BISECTIONS {
        return Err(Error::ContourTooClose { at: m, modulus: fa.norm().min(fb.norm()) });
    }
    let fm = checked_eval(f, m)?;
    let (r0, r1, r) = (fm / fa, fb / fm, fb / fa);
    if step_ok(r0) && step_ok(r1) && step_ok(r) && (r0.arg() + r1.arg() - r.arg()).abs() < 1e-6 {
        return Ok(r.arg());
    }
    Ok(segment_phase(f, a, fa, m, fm, depth + 1)? + segment_phase(f, m, fm, b, fb, depth + 1)?)
}

/// Winding number of `f` around `rect` by phase accumulation.
pub fn count_zeros_with<F>(f: &F, rect: &Rectangle, samples_per_edge: usize) -> Result<i64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let longest = rect.size();
    let per_edge = samples_per_edge.max(2).max((longest / MAX_SPACING).ceil() as usize);
    let pts = rect.boundary(per_edge);
    let vals = pts.par_iter().map(|&s| checked_eval(f, s)).collect::<Result<Vec<_>>>()?;
    let n = pts.len();
    let steps = (0..n)
        .into_par_iter()
        .map(|i| {
            let j = (i + 1) % n;
            segment_phase(f, pts[i], vals[i], pts[j], vals[j], 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = steps.iter().sum();
    Ok((total / std::f64::consts::TAU).round() as i64)
}

pub fn count_zeros(data: &SchottkyData, twist: &TwistSpec, rect: &Rectangle, opts: &ZeroOptions) -> Result<i64> {
    opts.validate()?;
    count_zeros_with(&|s| determinant(data, s, twist, opts.lmax), rect, opts.samples_per_edge)
}

fn fd_derivative<F>(f: &F, s: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let h = Complex64::new(FD_STEP, 0.0);
    Ok((f(s + h)? - f(s - h)?) / (2.0 * FD_STEP))
}

/// Newton iteration s ← s − k·f/f′ for a zero of multiplicity k.
///
/// With `polish` set, iteration continues after |f| < NEWTON_TOL until the
/// step stalls, and the iterate of smallest |f| is returned. Multiple zeros
/// need this to be located beyond the square root of the tolerance.
pub fn newton_with<F>(f: &F, s0: Complex64, multiplicity: usize, polish: bool) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let k = multiplicity.max(1) as f64;
    let mut s = s0;
    let mut best: Option<(Complex64, f64)> = None;
    let mut polish_steps = 0;
    for _ in 0..NEWTON_MAX_ITER {
        let v = f(s)?;
        let r = v.norm();
        if !r.is_finite() {
            break;
        }
        if best.is_none_or(|(_, br)| r < br) {
            best = Some((s, r));
        }
        if r < NEWTON_TOL {
            if !polish || polish_steps >= 8 {
                break;
            }
            polish_steps += 1;
        }
        let d = fd_derivative(f, s)?;
        if d.norm() == 0.0 || !d.norm().is_finite() {
            break;
        }
        let step = v / d * k;
        if r < NEWTON_TOL && step.norm() < 1e-13 * s.norm().max(1.0) {
            break;
        }
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            break;
        }
    }
    match best {
        Some((s, r)) if r < NEWTON_TOL => Ok((s, r)),
        _ => Err(Error::NoConvergence { start: s0, last: s, residual: best.map_or(f64::NAN, |b| b.1) }),
    }
}

/// Newton refinement of a simple zero of det(I − L_{ρ,s}) from `s0`.
pub fn refine_zero(data: &SchottkyData, twist: &TwistSpec, s0: Complex64, lmax: usize) -> Result<(Complex64, f64)> {
    newton_with(&|s| determinant(data, s, twist, lmax), s0, 1, false)
}

/// Off-centre so split lines avoid the symmetry axes where zeros tend to sit.
const SPLIT_FRACTIONS: [f64; 4] = [0.4637, 0.5389, 0.4219, 0.5712];

fn resolve_cell<F>(f: &F, cell: Rectangle, count: i64, opts: &ZeroOptions) -> Result<Vec<Zero>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if count <= 0 {
        return Ok(Vec::new());
    }
    let cluster = |k: i64| -> Option<Zero> {
        let (s, residual) = newton_with(f, cell.center(), k as usize, true).ok()?;
        cell.contains(s, 1e-9).then_some(Zero { s, multiplicity: k as usize, residual })
    };
    let unresolved = || Error::UnresolvedCluster { count, re0: cell.re0, re1: cell.re1, im0: cell.im0, im1: cell.im1 };
    let small = cell.size() <= opts.min_cell;
    if count == 1 || small {
        if let Some(z) = cluster(count) {
            return Ok(vec![z]);
        }
        if small {
            return Err(unresolved());
        }
    }
    for &fr in &SPLIT_FRACTIONS {
        let subs = cell.split(fr, fr);
        let counts: Result<Vec<i64>> = subs.par_iter().map(|r| count_zeros_with(f, r, opts.samples_per_edge)).collect();
        if let Ok(c) = counts {
            if c.iter().sum::<i64>() == count {
                let parts = subs
                    .par_iter()
                    .zip(c.par_iter())
                    .map(|(r, &k)| resolve_cell(f, *r, k, opts))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(parts.into_iter().flatten().collect());
            }
        }
    }
    // Every split line passed too close to a zero: the cell holds a tight
    // cluster, so try it as a single multiple zero.
    cluster(count).map(|z| vec![z]).ok_or_else(unresolved)
}

/// A multiple zero splits under rounding into nearby simple zeros that can
/// land in different cells; recombine them at their centroid.
fn merge_close(zeros: Vec<Zero>) -> Vec<Zero> {
    let mut out: Vec<Zero> = Vec::with_capacity(zeros.len());
    for z in zeros {
        match out.iter_mut().find(|w| (w.s - z.s).norm() < MERGE_RADIUS) {
            Some(w) => {
                let (a, b) = (w.multiplicity as f64, z.multiplicity as f64);
                w.s = (w.s * a + z.s * b) / (a + b);
                w.multiplicity += z.multiplicity;
                w.residual = w.residual.max(z.residual);
            }
            None => out.push(z),
        }
    }
    out
}

/// Zeros of `f` in `rect` with multiplicities.
pub fn resonances_with<F>(f: &F, rect: &Rectangle, opts: &ZeroOptions) -> Result<ResonanceSet>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    opts.validate()?;
    let scale = rect.size();
    let mut searched = *rect;
    let mut count = count_zeros_with(f, &searched, opts.samples_per_edge);
    for pad in [1.3e-3, 2.9e-3, 6.1e-3] {
        match count {
            Err(Error::ContourTooClose { .. }) => {
                searched = rect.expanded(pad * scale);
                count = count_zeros_with(f, &searched, opts.samples_per_edge);
            }
            _ => break,
        }
    }
    let count = count?;
    let mut zeros = merge_close(resolve_cell(f, searched, count, opts)?);
    zeros.sort_by(|a, b| a.s.im.total_cmp(&b.s.im).then(a.s.re.total_cmp(&b.s.re)));
    Ok(ResonanceSet { rectangle: *rect, searched, zeros, contour_count: count })
}

pub fn resonances(
    data: &SchottkyData,
    twist: &TwistSpec,
    rect: &Rectangle,
    opts: &ZeroOptions,
) -> Result<ResonanceSet> {
    resonances_with(&|s| determinant(data, s, twist, opts.lmax), rect, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::critical_exponent;

    fn cylinder_length() -> f64 {
        2.0 * 1.5f64.acosh()
    }

    #[test]
    fn euler_matches_determinant_far_right() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let delta = critical_exponent(&d, 24, 1e-13).unwrap();
        let s = Complex64::new(10.0, 2.5);
        let e = euler_product(&d, s, &TwistSpec::Trivial, 4, 20, delta).unwrap();
        let det = determinant(&d, s, &TwistSpec::Trivial, 24).unwrap();
        assert!((e - det).norm() < 1e-10);
    }

    #[test]
    fn euler_tends_to_one() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let e = euler_product(&d, Complex64::new(50.0, 1.0), &TwistSpec::Trivial, 4, 10, 0.4).unwrap();
        assert!((e - 1.0).norm() < 1e-12);
    }

    #[test]
    fn euler_integer_character_is_trivial() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let s = Complex64::new(2.0, -1.0);
        let a = euler_product(&d, s, &TwistSpec::Trivial, 5, 10, 0.4).unwrap();
        let b = euler_product(&d, s, &TwistSpec::Abelian(vec![2.0, -3.0]), 5, 10, 0.4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn euler_refuses_near_delta() {
        let d = SchottkyData::cylinder(3.0).unwrap();
        let r = euler_product(&d, Complex64::new(0.05, 0.0), &TwistSpec::Trivial, 3, 5, 0.0);
        assert!(matches!(r, Err(Error::EulerDivergent { .. })));
    }

    #[test]
    fn counts_on_simple_rectangles() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let delta = critical_exponent(&d, 24, 1e-13).unwrap();
        let opts = ZeroOptions { lmax: 24, ..Default::default() };
        let right = Rectangle::new(delta + 0.2, delta + 2.0, -3.0, 3.0).unwrap();
        assert_eq!(count_zeros(&d, &TwistSpec::Trivial, &right, &opts).unwrap(), 0);
        let around = Rectangle::new(delta - 0.05, delta + 0.05, -0.05, 0.05).unwrap();
        assert_eq!(count_zeros(&d, &TwistSpec::Trivial, &around, &opts).unwrap(), 1);

        let c = SchottkyData::cylinder(3.0).unwrap();
        let y = std::f64::consts::TAU / cylinder_length();
        let r = Rectangle::new(-0.2, 0.2, y - 0.2, y + 0.2).unwrap();
        assert_eq!(count_zeros(&c, &TwistSpec::Trivial, &r, &opts).unwrap(), 2);
    }

    #[test]
    fn contour_through_zero_is_rejected() {
        let d = SchottkyData::cylinder(3.0).unwrap();
        let r = Rectangle::new(-0.5, 0.5, 0.0, 1.0).unwrap();
        let res = count_zeros(&d, &TwistSpec::Trivial, &r, &ZeroOptions::default());
        assert!(matches!(res, Err(Error::ContourTooClose { .. })), "{res:?}");
    }

    #[test]
    fn refine_recovers_delta_and_rejects_zero_free_start() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let delta = critical_exponent(&d, 24, 1e-14).unwrap();
        let (s, _) = refine_zero(&d, &TwistSpec::Trivial, Complex64::new(delta + 0.03, 0.01), 24).unwrap();
        assert!((s - delta).norm() < 1e-8, "{s} vs {delta}");
        let bad = refine_zero(&d, &TwistSpec::Trivial, Complex64::new(6.0, 0.0), 24);
        assert!(matches!(bad, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn cylinder_lattice() {
        let d = SchottkyData::cylinder(3.0).unwrap();
        let rect = Rectangle::new(-0.5, 0.5, 0.0, 7.0).unwrap();
        let set = resonances(&d, &TwistSpec::Trivial, &rect, &ZeroOptions::default()).unwrap();
        assert_eq!(set.contour_count, 6);
        assert_eq!(set.total_multiplicity(), 6);
        assert_eq!(set.zeros.len(), 3);
        let y = std::f64::consts::TAU / cylinder_length();
        for (k, z) in set.zeros.iter().enumerate() {
            assert_eq!(z.multiplicity, 2);
            assert!((z.s - Complex64::new(0.0, k as f64 * y)).norm() < 1e-7, "{}", z.s);
        }
    }

    #[test]
    fn conjugate_symmetric_zero_set() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let rect = Rectangle::new(-0.4, 0.6, -2.1, 2.1).unwrap();
        let opts = ZeroOptions { lmax: 24, ..Default::default() };
        let set = resonances(&d, &TwistSpec::Trivial, &rect, &opts).unwrap();
        assert_eq!(set.total_multiplicity(), set.contour_count);
        for z in &set.zeros {
            assert!(z.residual < 1e-8);
            let mirrored =
                set.zeros.iter().any(|w| w.multiplicity == z.multiplicity && (w.s - z.s.conj()).norm() < 1e-6);
            assert!(mirrored, "{} has no conjugate partner", z.s);
        }
    }

    #[test]
    fn count_stable_under_truncation() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let rect = Rectangle::new(-0.6, 0.6, 0.3, 3.1).unwrap();
        let a = count_zeros(&d, &TwistSpec::Trivial, &rect, &ZeroOptions { lmax: 24, ..Default::default() }).unwrap();
        let b = count_zeros(&d, &TwistSpec::Trivial, &rect, &ZeroOptions { lmax: 32, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }
}
