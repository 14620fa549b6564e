//! Möbius maps, Schottky data and the symbolic coding by admissible words.
//!
//! Letters are stored 0-based: `0..m` are the generators γ_1..γ_m and
//! `m..2m` their inverses, so letter `a` and disc `a` share an index and the
//! inverse of `a` is `(a + m) % 2m`. Text output shifts to 1-based.
//!
//! For a letter `a`, γ_a maps the complement of the closure of D_a into
//! D_{inv(a)}; in particular it maps every D_t with t ≠ a into D_{inv(a)}.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOUNDARY_SAMPLES: usize = 16;
const BOUNDARY_TOL: f64 = 1e-10;

/// Default cap on word length when enumerating geodesics by length.
pub const DEFAULT_DEPTH_CAP: usize = 40;
/// Allowance for rounding in the prefix length bound.
const PREFIX_SLACK: f64 = 1e-9;

/// z ↦ (az + b)/(cz + d) with ad − bc = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusMap {
    /// Builds the map and rescales to unit determinant. Requires det > 0.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Moebius matrix [[{a}, {b}], [{c}, {d}]] has non-positive determinant {det}"
            )));
        }
        let k = det.sqrt();
        Ok(MoebiusMap { a: a / k, b: b / k, c: c / k, d: d / k })
    }

    pub fn identity() -> Self {
        MoebiusMap { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// self ∘ other.
    pub fn compose(&self, o: &MoebiusMap) -> MoebiusMap {
        let a = self.a * o.a + self.b * o.c;
        let b = self.a * o.b + self.b * o.d;
        let c = self.c * o.a + self.d * o.c;
        let d = self.c * o.b + self.d * o.d;
        // Both factors are normalized; recomputing ad - bc would cancel
        // catastrophically for long words.
        MoebiusMap { a, b, c, d }
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Image of z; `None` when z is the pole.
    pub fn apply(&self, z: Complex64) -> Option<Complex64> {
        let den = self.c * z + self.d;
        if den == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some((self.a * z + self.b) / den)
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        1.0 / (den * den)
    }

    /// The pole −d/c, or `None` for an affine map.
    pub fn pole(&self) -> Option<f64> {
        if self.c == 0.0 {
            None
        } else {
            Some(-self.d / self.c)
        }
    }

    /// (attracting, repelling) fixed points of a hyperbolic map, from
    /// cz² + (d − a)z − b = 0; the attracting root has |γ'| < 1.
    /// Infinity is returned as `f64::INFINITY`.
    pub fn fixed_points(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let disc = t * t - 4.0;
        if !(disc > 0.0) {
            return None;
        }
        let (r1, r2) = if self.c == 0.0 {
            // az + b = dz: one finite root and infinity
            (self.b / (self.d - self.a), f64::INFINITY)
        } else {
            let qa = self.c;
            let qb = self.d - self.a;
            let qc = -self.b;
            let sq = disc.sqrt();
            let sgn = if qb >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (qb + sgn * sq);
            (q / qa, qc / q)
        };
        let mult = |x: f64| -> f64 {
            if x.is_infinite() {
                // multiplier at infinity of z ↦ (az + b)/d
                self.d * self.d
            } else {
                let den = self.c * x + self.d;
                1.0 / (den * den)
            }
        };
        if mult(r1) < mult(r2) {
            Some((r1, r2))
        } else {
            Some((r2, r1))
        }
    }
}

/// Open disc centred on the real axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: f64,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn closure_contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }

    pub fn boundary_point(&self, angle: f64) -> Complex64 {
        self.center + self.radius * Complex64::from_polar(1.0, angle)
    }

    /// Distance between the closures (negative when they overlap).
    pub fn gap(&self, other: &Disc) -> f64 {
        (self.center - other.center).abs() - self.radius - other.radius
    }
}

/// Integer 2×2 matrix [[a, b], [c, d]].
pub type IntMatrix = [[i64; 2]; 2];

/// m generators and 2m discs.
#[derive(Clone, Debug, PartialEq)]
pub struct SchottkyData {
    pub m: usize,
    pub discs: Vec<Disc>,
    pub generators: Vec<MoebiusMap>,
    /// SL₂(Z) representatives when every generator entry is an integer.
    pub integer_generators: Option<Vec<IntMatrix>>,
    /// Human-readable origin, e.g. `cylinder(3)`.
    pub name: String,
}

impl SchottkyData {
    /// Builds data from explicit discs and generators; geometry is not
    /// checked here, see [`validate`].
    pub fn new(discs: Vec<Disc>, generators: Vec<MoebiusMap>) -> Result<Self> {
        let m = generators.len();
        if m == 0 {
            return Err(Error::InvalidInput("at least one generator required".into()));
        }
        if discs.len() != 2 * m {
            return Err(Error::InvalidInput(format!("{} discs given for {m} generators; need {}", discs.len(), 2 * m)));
        }
        for (i, d) in discs.iter().enumerate() {
            if !(d.radius > 0.0) || !d.center.is_finite() || !d.radius.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "disc {} has invalid center/radius ({}, {})",
                    i + 1,
                    d.center,
                    d.radius
                )));
            }
        }
        let integer_generators = integer_entries(&generators);
        Ok(SchottkyData { m, discs, generators, integer_generators, name: "custom".into() })
    }

    /// Discs taken from isometric circles: D_i = D(−d/c, 1/|c|) and
    /// D_{m+i} = D(a/c, 1/|c|).
    pub fn from_generators(generators: Vec<MoebiusMap>) -> Result<Self> {
        let m = generators.len();
        let mut discs = vec![Disc { center: 0.0, radius: 1.0 }; 2 * m];
        for (i, g) in generators.iter().enumerate() {
            if g.c == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "generator {} fixes infinity; isometric circles undefined",
                    i + 1
                )));
            }
            let r = 1.0 / g.c.abs();
            discs[i] = Disc { center: -g.d / g.c, radius: r };
            discs[m + i] = Disc { center: g.a / g.c, radius: r };
        }
        SchottkyData::new(discs, generators)
    }

    /// One hyperbolic generator of trace t > 2: [[t/2, t²/4 − 1], [1, t/2]].
    pub fn cylinder(t: f64) -> Result<Self> {
        if !(t > 2.0) {
            return Err(Error::InvalidInput(format!("cylinder trace must exceed 2, got {t}")));
        }
        let h = 0.5 * t;
        let g = MoebiusMap::new(h, h * h - 1.0, 1.0, h)?;
        let mut data = SchottkyData::from_generators(vec![g])?;
        data.name = format!("cylinder({t})");
        Ok(data)
    }

    /// Index-two rotation subgroup of the reflection group in three geodesics
    /// placed symmetrically in the disc model at angles π/3, π, 5π/3, each of
    /// angular half-width θ < π/3, transported to the upper half-plane by
    /// w ↦ i(1 + w)/(1 − w). With R_k the reflections, γ_1 = R_2R_1 and
    /// γ_2 = R_3R_1 pair R_1(D_2) with D_2 and R_1(D_3) with D_3.
    pub fn symmetric3(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI / 3.0) {
            return Err(Error::InvalidInput(format!("symmetric3 half-width must lie in (0, pi/3), got {theta}")));
        }
        let endpoint = |psi: f64| -(0.5 * psi).cos() / (0.5 * psi).sin();
        let circle = |phi: f64| {
            let x0 = endpoint(phi - theta);
            let x1 = endpoint(phi + theta);
            Disc { center: 0.5 * (x0 + x1), radius: 0.5 * (x1 - x0).abs() }
        };
        let c1 = circle(PI);
        let c2 = circle(PI / 3.0);
        let c3 = circle(5.0 * PI / 3.0);
        let invert = |d: &Disc| {
            let y0 = c1.center + c1.radius * c1.radius / (d.center - d.radius - c1.center);
            let y1 = c1.center + c1.radius * c1.radius / (d.center + d.radius - c1.center);
            Disc { center: 0.5 * (y0 + y1), radius: 0.5 * (y1 - y0).abs() }
        };
        let g1 = reflection_pair(&c1, &c2)?;
        let g2 = reflection_pair(&c1, &c3)?;
        let discs = vec![invert(&c2), invert(&c3), c2, c3];
        let mut data = SchottkyData::new(discs, vec![g1, g2])?;
        data.name = format!("symmetric3({theta})");
        Ok(data)
    }

    /// Two integer matrices with discs on their isometric circles.
    pub fn sl2z_pair(a: IntMatrix, b: IntMatrix) -> Result<Self> {
        let mut gens = Vec::new();
        for mat in [a, b] {
            let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
            if det != 1 {
                return Err(Error::InvalidInput(format!("sl2z-pair matrix {mat:?} has determinant {det}, not 1")));
            }
            gens.push(MoebiusMap {
                a: mat[0][0] as f64,
                b: mat[0][1] as f64,
                c: mat[1][0] as f64,
                d: mat[1][1] as f64,
            });
        }
        let mut data = SchottkyData::from_generators(gens)?;
        data.integer_generators = Some(vec![a, b]);
        data.name = format!("sl2z-pair({a:?}, {b:?})");
        Ok(data)
    }

    /// Default integer pair: traces 4 and 12, unit discs at ±2 and ±6.
    pub fn sl2z_pair_default() -> Result<Self> {
        Self::sl2z_pair([[2, 3], [1, 2]], [[6, 35], [1, 6]])
    }

    /// Reflection construction with integer generators: circles of radius √k
    /// centred at k·n for n ∈ {0} ∪ `shifts`, R_n the reflections, and
    /// γ_n = R_n R_0 = [[1 − k n², k n], [−n, 1]] pairing R_0(C_n) with C_n.
    pub fn integer_reflection(k: i64, shifts: &[i64]) -> Result<Self> {
        if k < 5 {
            return Err(Error::InvalidInput(format!(
                "integer reflection needs k >= 5 so that neighbouring circles are disjoint, got {k}"
            )));
        }
        if shifts.is_empty() || shifts.contains(&0) {
            return Err(Error::InvalidInput("shifts must be nonempty and nonzero".into()));
        }
        let r = (k as f64).sqrt();
        let circle = |n: i64| Disc { center: (k * n) as f64, radius: r };
        let reflect = |d: &Disc| {
            let y0 = k as f64 / (d.center - d.radius);
            let y1 = k as f64 / (d.center + d.radius);
            Disc { center: 0.5 * (y0 + y1), radius: 0.5 * (y1 - y0).abs() }
        };
        let mats: Vec<IntMatrix> = shifts.iter().map(|&n| [[1 - k * n * n, k * n], [-n, 1]]).collect();
        let gens = mats
            .iter()
            .map(|g| MoebiusMap::new(g[0][0] as f64, g[0][1] as f64, g[1][0] as f64, g[1][1] as f64))
            .collect::<Result<Vec<_>>>()?;
        let mut discs: Vec<Disc> = shifts.iter().map(|&n| reflect(&circle(n))).collect();
        discs.extend(shifts.iter().map(|&n| circle(n)));
        let mut data = SchottkyData::new(discs, gens)?;
        data.integer_generators = Some(mats);
        data.name = format!("sl2z-reflect({k}; {shifts:?})");
        Ok(data)
    }

    /// Four integer generators from five circles of radius √5; δ ≈ 0.61.
    pub fn sl2z_dense() -> Result<Self> {
        let mut data = Self::integer_reflection(5, &[-2, -1, 1, 2])?;
        data.name = "sl2z-dense".into();
        Ok(data)
    }

    /// Parses `cylinder`, `cylinder(t)`, `symmetric3`, `symmetric3(θ)`,
    /// `sl2z-pair`, `sl2z-dense`.
    pub fn preset(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, arg) = match spec.find('(') {
            Some(i) if spec.ends_with(')') => (&spec[..i], Some(&spec[i + 1..spec.len() - 1])),
            _ => (spec, None),
        };
        let num = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(s) => {
                    s.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad preset argument in {spec:?}")))
                }
            }
        };
        match name {
            "cylinder" => Self::cylinder(num(3.0)?),
            "symmetric3" => Self::symmetric3(num(DEFAULT_SYMMETRIC3_THETA)?),
            "sl2z-pair" => match arg {
                None => Self::sl2z_pair_default(),
                Some(a) => {
                    let v = a
                        .split(',')
                        .map(|t| t.trim().parse::<i64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::InvalidInput(format!("bad integer in {spec:?}")))?;
                    if v.len() != 8 {
                        return Err(Error::InvalidInput(format!(
                            "sl2z-pair takes 8 integers a1,b1,c1,d1,a2,b2,c2,d2; got {}",
                            v.len()
                        )));
                    }
                    Self::sl2z_pair([[v[0], v[1]], [v[2], v[3]]], [[v[4], v[5]], [v[6], v[7]]])
                }
            },
            "sl2z-dense" if arg.is_none() => Self::sl2z_dense(),
            _ => Err(Error::InvalidInput(format!(
                "unknown preset {spec:?}; expected cylinder(t), symmetric3(theta), sl2z-pair, sl2z-dense"
            ))),
        }
    }

    #[inline]
    pub fn num_letters(&self) -> usize {
        2 * self.m
    }

    #[inline]
    pub fn inverse_letter(&self, a: usize) -> usize {
        (a + self.m) % (2 * self.m)
    }

    /// γ_a: generator for a < m, inverse generator otherwise.
    pub fn letter_map(&self, a: usize) -> MoebiusMap {
        if a < self.m {
            self.generators[a]
        } else {
            self.generators[a - self.m].inverse()
        }
    }

    /// sup over D_t of |γ_a'| (closed form; the sup sits on the boundary).
    pub fn letter_contraction(&self, a: usize, t: usize) -> f64 {
        map_contraction(&self.letter_map(a), &self.discs[t])
    }
}

/// Image of a disc centred on the real axis, `None` if the pole lies in its closure.
pub fn disc_image(g: &MoebiusMap, d: &Disc) -> Option<Disc> {
    if let Some(p) = g.pole() {
        if (p - d.center).abs() <= d.radius {
            return None;
        }
    }
    let end = |x: f64| (g.a * x + g.b) / (g.c * x + g.d);
    let (y0, y1) = (end(d.center - d.radius), end(d.center + d.radius));
    Some(Disc { center: 0.5 * (y0 + y1), radius: 0.5 * (y1 - y0).abs() })
}

/// sup over `from` of the derivative of g : `from` → `to` measured in the
/// Poincaré metrics of the two discs; 1 when g(from) is not inside `to`.
///
/// After the affine normalisation of `to` to the unit disc, g(from) is a disc
/// B(c, r), and the sup equals the radius of the origin-centred disc at the
/// same hyperbolic radius.
pub fn hyperbolic_contraction(g: &MoebiusMap, from: &Disc, to: &Disc) -> f64 {
    let Some(img) = disc_image(g, from) else {
        return 1.0;
    };
    let c = ((img.center - to.center) / to.radius).abs();
    let r = img.radius / to.radius;
    if !(c + r < 1.0) {
        return 1.0;
    }
    // pseudo-hyperbolic distance between the diameter ends c − r and c + r
    let q = 2.0 * r / (1.0 - (c * c - r * r));
    q / (1.0 + (1.0 - q * q).sqrt())
}

/// sup over the disc of |g'|.
pub fn map_contraction(g: &MoebiusMap, d: &Disc) -> f64 {
    match g.pole() {
        None => 1.0 / (g.d * g.d),
        Some(p) => {
            let dist = (d.center - p).abs() - d.radius;
            if dist <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / (g.c * g.c * dist * dist)
            }
        }
    }
}

/// Half-width used by the `symmetric3` preset when no argument is given.
pub const DEFAULT_SYMMETRIC3_THETA: f64 = 0.25;

fn integer_entries(gens: &[MoebiusMap]) -> Option<Vec<IntMatrix>> {
    let mut out = Vec::new();
    for g in gens {
        let e = [g.a, g.b, g.c, g.d];
        if e.iter().any(|x| x.fract() != 0.0 || x.abs() > 1e15) {
            return None;
        }
        out.push([[g.a as i64, g.b as i64], [g.c as i64, g.d as i64]]);
    }
    Some(out)
}

/// Composition R_2 ∘ R_1 of reflections in circles orthogonal to the real line.
fn reflection_pair(c1: &Disc, c2: &Disc) -> Result<MoebiusMap> {
    let (x1, r1, x2, r2) = (c1.center, c1.radius, c2.center, c2.radius);
    let a = r2 * r2 + x2 * (x1 - x2);
    let b = -r2 * r2 * x1 + x2 * (r1 * r1 - (x1 - x2) * x1);
    let c = x1 - x2;
    let d = r1 * r1 - (x1 - x2) * x1;
    MoebiusMap::new(a, b, c, d)
}

/// One named check of a validation report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Positive when the check holds with room to spare.
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub min_disc_gap: f64,
    pub max_boundary_residual: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Checks disc disjointness, unit determinants and the disc-swap condition.
pub fn validate(data: &SchottkyData) -> ValidationReport {
    let mut checks = Vec::new();
    let n = data.discs.len();

    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let gap = data.discs[i].gap(&data.discs[j]);
            min_gap = min_gap.min(gap);
            if !(gap > 0.0) {
                checks.push(Check {
                    name: format!("disjoint D{} D{}", i + 1, j + 1),
                    passed: false,
                    margin: gap,
                    detail: format!("closures meet, gap {gap}"),
                });
            }
        }
    }
    checks.push(Check {
        name: "disjoint closures".into(),
        passed: min_gap > 0.0,
        margin: min_gap,
        detail: format!("minimal gap {min_gap}"),
    });

    let mut max_res: f64 = 0.0;
    for (i, g) in data.generators.iter().enumerate() {
        let det_err = (g.det() - 1.0).abs();
        checks.push(Check {
            name: format!("det gamma{}", i + 1),
            passed: det_err < 1e-12,
            margin: 1e-12 - det_err,
            detail: format!("|det - 1| = {det_err:e}"),
        });

        let src = data.discs[i];
        let dst = data.discs[data.m + i];
        let mut res: f64 = 0.0;
        for q in 0..BOUNDARY_SAMPLES {
            let z = src.boundary_point(2.0 * PI * (q as f64 + 0.5) / BOUNDARY_SAMPLES as f64);
            let r = match g.apply(z) {
                Some(w) => ((w - dst.center).norm() - dst.radius).abs(),
                None => f64::INFINITY,
            };
            res = res.max(r);
        }
        if res.is_nan() {
            res = f64::INFINITY;
        }
        max_res = max_res.max(res);
        checks.push(Check {
            name: format!("boundary map gamma{}", i + 1),
            passed: res < BOUNDARY_TOL,
            margin: BOUNDARY_TOL - res,
            detail: format!("max | |gamma(z) - c| - r | = {res:e} over {BOUNDARY_SAMPLES} points"),
        });

        // the centre of D_i must land outside the closure of D_{m+i}
        let (ok, margin) = match g.apply(Complex64::new(src.center, 0.0)) {
            None => (true, f64::INFINITY),
            Some(w) => {
                let dist = (w - dst.center).norm() - dst.radius;
                (dist > 0.0, dist)
            }
        };
        checks.push(Check {
            name: format!("orientation gamma{}", i + 1),
            passed: ok,
            margin,
            detail: "image of centre lies outside the paired disc".into(),
        });
    }

    ValidationReport { checks, min_disc_gap: min_gap, max_boundary_residual: max_res }
}

/// A word in the letters 0..2m (0-based; see module docs).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_admissible(&self, m: usize) -> bool {
        self.0.iter().all(|&a| a < 2 * m) && self.0.windows(2).all(|w| w[1] != (w[0] + m) % (2 * m))
    }

    /// Admissible and first letter not the inverse of the last.
    pub fn is_cyclically_reduced(&self, m: usize) -> bool {
        self.is_admissible(m)
            && match (self.0.first(), self.0.last()) {
                (Some(&f), Some(&l)) => self.0.len() == 1 || f != (l + m) % (2 * m),
                _ => false,
            }
    }

    /// Least cyclic rotation.
    pub fn canonical_rotation(&self) -> Word {
        let n = self.0.len();
        (0..n)
            .map(|k| {
                let mut v = self.0[k..].to_vec();
                v.extend_from_slice(&self.0[..k]);
                v
            })
            .min()
            .map(Word)
            .unwrap_or_else(|| self.clone())
    }

    /// Strictly smaller than each of its nontrivial rotations: primitive and canonical.
    pub fn is_lyndon(&self) -> bool {
        let w = &self.0;
        let n = w.len();
        if n == 0 {
            return false;
        }
        (1..n).all(|k| {
            for i in 0..n {
                let x = w[i];
                let y = w[(i + k) % n];
                if x != y {
                    return x < y;
                }
            }
            false
        })
    }

    pub fn homology(&self, m: usize) -> Vec<i64> {
        let mut h = vec![0i64; m];
        for &a in &self.0 {
            if a < m {
                h[a] += 1;
            } else {
                h[a - m] -= 1;
            }
        }
        h
    }
}

impl fmt::Display for Word {
    /// 1-based letters joined by '.'.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "{}", s.join("."))
    }
}

/// Admissible words of length n, optionally with last letter ≠ j, in
/// lexicographic order.
pub fn enumerate_words(data: &SchottkyData, n: usize, end_constraint: Option<usize>) -> Vec<Word> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let k = data.num_letters();
    let mut cur = Vec::with_capacity(n);
    fn rec(data: &SchottkyData, k: usize, n: usize, end: Option<usize>, cur: &mut Vec<usize>, out: &mut Vec<Word>) {
        if cur.len() == n {
            if end != Some(*cur.last().unwrap()) {
                out.push(Word(cur.clone()));
            }
            return;
        }
        for a in 0..k {
            if let Some(&p) = cur.last() {
                if a == data.inverse_letter(p) {
                    continue;
                }
            }
            cur.push(a);
            rec(data, k, n, end, cur, out);
            cur.pop();
        }
    }
    rec(data, k, n, end_constraint, &mut cur, &mut out);
    out
}

/// γ_{α_1} ∘ … ∘ γ_{α_n}; the empty word gives the identity.
pub fn word_map(data: &SchottkyData, w: &Word) -> Result<MoebiusMap> {
    if !w.is_empty() && !w.is_admissible(data.m) {
        return Err(Error::Inadmissible(w.0.iter().map(|a| a + 1).collect()));
    }
    Ok(w.0.iter().fold(MoebiusMap::identity(), |acc, &a| acc.compose(&data.letter_map(a))))
}

/// Integer word product in SL₂(Z), `None` on overflow or for a non-integer group.
pub fn integer_word_matrix(data: &SchottkyData, w: &Word) -> Option<IntMatrix> {
    let gens = data.integer_generators.as_ref()?;
    let mut acc: [[i128; 2]; 2] = [[1, 0], [0, 1]];
    for &a in &w.0 {
        let g = if a < data.m {
            gens[a]
        } else {
            let g = gens[a - data.m];
            [[g[1][1], -g[0][1]], [-g[1][0], g[0][0]]]
        };
        let mut next = [[0i128; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s: i128 = 0;
                for k in 0..2 {
                    s = s.checked_add(acc[i][k].checked_mul(g[k][j] as i128)?)?;
                }
                next[i][j] = s;
            }
        }
        acc = next;
    }
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = i64::try_from(acc[i][j]).ok()?;
        }
    }
    Some(out)
}

/// Σ of principal logs of the single-letter derivatives along the orbit of z
/// under γ_α (last letter applied first).
pub fn log_derivative_cocycle(data: &SchottkyData, w: &Word, z: Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut z = z;
    for &a in w.0.iter().rev() {
        let g = data.letter_map(a);
        let der = g.derivative(z);
        if der.im == 0.0 && der.re <= 0.0 || !der.is_finite() {
            return Err(Error::BranchCut { z, derivative: der });
        }
        acc += der.ln();
        z = g.apply(z).ok_or(Error::BranchCut { z, derivative: der })?;
    }
    Ok(acc)
}

/// A primitive conjugacy class, represented by its Lyndon word.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicClass {
    pub word: Word,
    /// ℓ(C) = 2·arccosh(|tr|/2).
    pub length: f64,
    pub trace: f64,
    /// Exact trace of the SL₂(Z) representative when the group is integral.
    pub integer_trace: Option<i64>,
    pub homology: Vec<i64>,
}

impl GeodesicClass {
    pub fn from_word(data: &SchottkyData, word: Word) -> Result<Self> {
        let g = word_map(data, &word)?;
        let int = integer_word_matrix(data, &word);
        let integer_trace = int.map(|mt| mt[0][0] + mt[1][1]);
        let trace = match integer_trace {
            Some(t) => t as f64,
            None => g.trace(),
        };
        let length = 2.0 * (0.5 * trace.abs()).acosh();
        let homology = word.homology(data.m);
        Ok(GeodesicClass { word, length, trace, integer_trace, homology })
    }

    /// Attracting fixed point of γ_α and γ_α' there.
    pub fn attracting_fixed_point(&self, data: &SchottkyData) -> Result<(f64, f64)> {
        let g = word_map(data, &self.word)?;
        let (x, _) =
            g.fixed_points().ok_or_else(|| Error::InvalidInput(format!("word {} is not hyperbolic", self.word)))?;
        Ok((x, g.derivative(Complex64::new(x, 0.0)).re))
    }
}

/// Primitive classes up to a word length and/or a geodesic length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicTable {
    pub classes: Vec<GeodesicClass>,
    pub max_word_len: usize,
    pub max_length: Option<f64>,
    /// Every class with ℓ ≤ max_length is present (false if the depth cap cut
    /// the search short).
    pub complete: bool,
}

impl GeodesicTable {
    /// Length up to which the table is known to be exhaustive.
    pub fn complete_to_length(&self) -> f64 {
        match (self.complete, self.max_length) {
            (true, Some(t)) => t,
            _ => 0.0,
        }
    }
}

/// Visits every cyclically reduced Lyndon word with word length ≤ max_word_len
/// whose rigorous length lower bound does not exceed `max_length`.
/// Returns false when a prefix at the depth cap could still close under the bound.
fn visit_lyndon(
    data: &SchottkyData,
    max_word_len: usize,
    max_length: Option<f64>,
    visit: &mut dyn FnMut(&Word),
) -> bool {
    let k = data.num_letters();
    // lower bound on the length contributed by letter a acting on D_t: the
    // Poincaré-metric contraction D_t → D_{inv(a)}; along a closed orbit the
    // metric densities cancel at the fixed point
    let mut lb = vec![0.0f64; k * k];
    let mut prunable = max_length.is_some();
    for a in 0..k {
        for t in 0..k {
            if t == a {
                continue;
            }
            let s = hyperbolic_contraction(&data.letter_map(a), &data.discs[t], &data.discs[data.inverse_letter(a)]);
            let v = -s.ln();
            lb[a * k + t] = v;
            if !(v > 0.0) {
                prunable = false;
            }
        }
    }
    let bound = max_length.unwrap_or(f64::INFINITY);
    let mut complete = true;
    let mut cur: Vec<usize> = Vec::with_capacity(max_word_len);

    #[allow(clippy::too_many_arguments)]
    fn rec(
        data: &SchottkyData,
        k: usize,
        lb: &[f64],
        prunable: bool,
        bound: f64,
        max_len: usize,
        cur: &mut Vec<usize>,
        prefix: &MoebiusMap,
        partial: f64,
        complete: &mut bool,
        visit: &mut dyn FnMut(&Word),
    ) {
        let n = cur.len();
        if n > 0 {
            let w = Word(cur.clone());
            if w.is_cyclically_reduced(data.m) && w.is_lyndon() {
                visit(&w);
            }
        }
        if n == max_len {
            if bound.is_finite() && (!prunable || partial <= bound) {
                *complete = false;
            }
            return;
        }
        for a in 0..k {
            let mut next_partial = partial;
            if let Some(&p) = cur.last() {
                if a == data.inverse_letter(p) {
                    continue;
                }
                // previous letter p now acts on D_{inv(a)}
                next_partial += lb[p * k + data.inverse_letter(a)];
            }
            // Lyndon words start with their least letter
            if let Some(&f) = cur.first() {
                if a < f {
                    continue;
                }
            }
            let next_prefix = prefix.compose(&data.letter_map(a));
            if prunable {
                // a closed word u·v has γ_v(x) in some D_t with t ≠ a, γ_u maps
                // D_t into D_{inv(u_1)}, and the letters of v only add length
                let target = &data.discs[data.inverse_letter(cur.first().copied().unwrap_or(a))];
                let sup = (0..k)
                    .filter(|&t| t != a)
                    .map(|t| hyperbolic_contraction(&next_prefix, &data.discs[t], target))
                    .fold(0.0f64, f64::max);
                if next_partial > bound || -sup.ln() - PREFIX_SLACK > bound {
                    continue;
                }
            }
            cur.push(a);
            rec(data, k, lb, prunable, bound, max_len, cur, &next_prefix, next_partial, complete, visit);
            cur.pop();
        }
    }

    rec(data, k, &lb, prunable, bound, max_word_len, &mut cur, &MoebiusMap::identity(), 0.0, &mut complete, visit);
    complete
}

/// All primitive classes with word length ≤ n, sorted by word.
pub fn primitive_classes_by_depth(data: &SchottkyData, n: usize) -> Result<GeodesicTable> {
    let mut words = Vec::new();
    visit_lyndon(data, n, None, &mut |w| words.push(w.clone()));
    let classes = words.into_iter().map(|w| GeodesicClass::from_word(data, w)).collect::<Result<Vec<_>>>()?;
    Ok(GeodesicTable { classes, max_word_len: n, max_length: None, complete: true })
}

/// One representative per primitive class with ℓ(C) ≤ max_length, sorted by
/// length then word. C and C⁻¹ are distinct classes.
pub fn primitive_geodesics(data: &SchottkyData, max_length: f64) -> Result<GeodesicTable> {
    primitive_geodesics_capped(data, max_length, DEFAULT_DEPTH_CAP)
}

pub fn primitive_geodesics_capped(data: &SchottkyData, max_length: f64, depth_cap: usize) -> Result<GeodesicTable> {
    if !(max_length > 0.0) {
        return Err(Error::InvalidInput(format!("max_length must be positive, got {max_length}")));
    }
    let mut words = Vec::new();
    let complete = visit_lyndon(data, depth_cap, Some(max_length), &mut |w| words.push(w.clone()));
    let mut classes = Vec::new();
    for w in words {
        let c = GeodesicClass::from_word(data, w)?;
        if c.length <= max_length {
            classes.push(c);
        }
    }
    classes.sort_by(|x, y| x.length.total_cmp(&y.length).then_with(|| x.word.cmp(&y.word)));
    Ok(GeodesicTable { classes, max_word_len: depth_cap, max_length: Some(max_length), complete })
}

/// Every cyclically reduced admissible word of length n (not up to rotation).
pub fn closed_words(data: &SchottkyData, n: usize) -> Vec<Word> {
    enumerate_words(data, n, None).into_iter().filter(|w| w.is_cyclically_reduced(data.m)).collect()
}

/// sup over sampled boundary points of D_t of |γ_α'|, for α with last letter ≠ t.
pub fn sup_derivative(data: &SchottkyData, w: &Word, t: usize, samples: usize) -> Result<f64> {
    let g = word_map(data, w)?;
    let d = data.discs[t];
    Ok((0..samples)
        .map(|q| g.derivative(d.boundary_point(2.0 * PI * q as f64 / samples as f64)).norm())
        .fold(0.0, f64::max))
}

/// |γ_α''/γ_α'| at z, equal to |2c/(cz + d)| for the composed map.
pub fn distortion(data: &SchottkyData, w: &Word, z: Complex64) -> Result<f64> {
    let g = word_map(data, w)?;
    Ok((2.0 * g.c / (g.c * z + g.d)).norm())
}

/// Group description accepted in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Preset { preset: String },
    Explicit { m: usize, discs: Vec<Disc>, generators: Vec<[[f64; 2]; 2]> },
}

impl GroupSpec {
    pub fn build(&self) -> Result<SchottkyData> {
        match self {
            GroupSpec::Preset { preset } => SchottkyData::preset(preset),
            GroupSpec::Explicit { m, discs, generators } => {
                if generators.len() != *m {
                    return Err(Error::InvalidInput(format!("m = {m} but {} generators given", generators.len())));
                }
                let gens = generators
                    .iter()
                    .map(|g| MoebiusMap::new(g[0][0], g[0][1], g[1][0], g[1][1]))
                    .collect::<Result<Vec<_>>>()?;
                SchottkyData::new(discs.clone(), gens)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn presets() -> Vec<SchottkyData> {
        vec![
            SchottkyData::cylinder(3.0).unwrap(),
            SchottkyData::symmetric3(DEFAULT_SYMMETRIC3_THETA).unwrap(),
            SchottkyData::sl2z_pair_default().unwrap(),
            SchottkyData::sl2z_dense().unwrap(),
        ]
    }

    #[test]
    fn presets_validate() {
        for p in presets() {
            let r = validate(&p);
            assert!(r.passed(), "{}: {:?}", p.name, r.failures());
        }
    }

    #[test]
    fn overlapping_discs_fail_with_negative_gap() {
        let g = MoebiusMap::new(2.0, 3.0, 1.0, 2.0).unwrap();
        let h = MoebiusMap::new(3.0, 8.0, 1.0, 3.0).unwrap();
        let data = SchottkyData::from_generators(vec![g, h]).unwrap();
        let r = validate(&data);
        assert!(!r.passed());
        assert!(r.min_disc_gap < 0.0);
    }

    #[test]
    fn bad_boundary_map_is_reported() {
        let mut data = SchottkyData::sl2z_pair_default().unwrap();
        data.discs[2].radius = 0.9;
        let r = validate(&data);
        assert!(r.failures().iter().any(|c| c.name.starts_with("boundary map")));
    }

    #[test]
    fn symmetric3_is_reflection_symmetric() {
        let d = SchottkyData::symmetric3(0.3).unwrap();
        // x -> -x swaps D1 <-> D2 and D3 <-> D4
        assert!((d.discs[0].center + d.discs[1].center).abs() < 1e-12);
        assert!((d.discs[2].center + d.discs[3].center).abs() < 1e-12);
        assert!((d.discs[0].radius - d.discs[1].radius).abs() < 1e-12);
        // equal traces for the two generators and their product
        let t1 = d.generators[0].trace().abs();
        let t2 = d.generators[1].trace().abs();
        assert!((t1 - t2).abs() < 1e-10);
        let prod = d.generators[0].inverse().compose(&d.generators[1]).trace().abs();
        assert!((t1 - prod).abs() < 1e-9, "{t1} {prod}");
    }

    #[test]
    fn word_counts() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        assert_eq!(enumerate_words(&d, 1, None).len(), 4);
        assert_eq!(enumerate_words(&d, 3, None).len(), 36);
        assert_eq!(enumerate_words(&d, 2, Some(0)).len(), 9);
        // brute-force filter over all 16 pairs
        let brute = (0..4)
            .flat_map(|a| (0..4).map(move |b| vec![a, b]))
            .filter(|v| Word(v.clone()).is_admissible(2) && v[1] != 0)
            .count();
        assert_eq!(brute, 9);
    }

    #[test]
    fn word_map_basics() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        assert_eq!(word_map(&d, &Word(vec![])).unwrap(), MoebiusMap::identity());
        assert_eq!(word_map(&d, &Word(vec![1])).unwrap(), d.generators[1]);
        assert_eq!(word_map(&d, &Word(vec![3])).unwrap(), d.generators[1].inverse());
        assert!(matches!(word_map(&d, &Word(vec![0, 2])), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn cylinder_has_two_short_classes() {
        let d = SchottkyData::cylinder(3.0).unwrap();
        let l = 2.0 * 1.5f64.acosh();
        let t = primitive_geodesics(&d, l + 0.01).unwrap();
        assert_eq!(t.classes.len(), 2);
        assert!(t.complete);
        for c in &t.classes {
            assert!((c.length - l).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_derivative_matches_length() {
        for d in presets() {
            let t = primitive_classes_by_depth(&d, 5).unwrap();
            for c in &t.classes {
                let (_, der) = c.attracting_fixed_point(&d).unwrap();
                assert!(
                    (der - (-c.length).exp()).abs() < 1e-8 * (-c.length).exp().max(1e-300) + 1e-14,
                    "{} {}",
                    c.word,
                    der
                );
                let expect = 2.0 * (0.5 * c.trace.abs()).acosh();
                assert!((c.length - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn length_enumeration_matches_brute_force() {
        for (d, tmax) in [(SchottkyData::sl2z_pair_default().unwrap(), 9.0), (SchottkyData::sl2z_dense().unwrap(), 4.5)]
        {
            let fast = primitive_geodesics(&d, tmax).unwrap();
            assert!(fast.complete);
            // brute force: all cyclically reduced words to a depth where every
            // class is longer than tmax, deduplicated by canonical rotation
            let depth = fast.classes.iter().map(|c| c.word.len()).max().unwrap() + 2;
            let mut brute = std::collections::BTreeSet::new();
            for n in 1..=depth {
                for w in closed_words(&d, n) {
                    let c = w.canonical_rotation();
                    if !c.is_lyndon() {
                        continue;
                    }
                    let g = GeodesicClass::from_word(&d, c.clone()).unwrap();
                    if g.length <= tmax {
                        brute.insert(c);
                    }
                }
            }
            let got: std::collections::BTreeSet<Word> = fast.classes.iter().map(|c| c.word.clone()).collect();
            assert_eq!(got, brute, "{}", d.name);
        }
    }

    #[test]
    fn cocycle_single_letter_and_chain_rule() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let z = Complex64::new(d.discs[0].center + 0.3, 0.0);
        let l = log_derivative_cocycle(&d, &Word(vec![1]), z).unwrap();
        assert_eq!(l.im, 0.0);
        assert!((l.re - d.generators[1].derivative(z).re.ln()).abs() < 1e-14);
        assert_eq!(log_derivative_cocycle(&d, &Word(vec![]), z).unwrap(), Complex64::new(0.0, 0.0));
        let w = Word(vec![0, 1, 1, 2]);
        let zc = d.discs[0].center + Complex64::new(0.2, 0.4);
        let l = log_derivative_cocycle(&d, &w, zc).unwrap();
        let direct = word_map(&d, &w).unwrap().derivative(zc);
        assert!((l.exp() - direct).norm() < 1e-10 * direct.norm());
    }

    #[test]
    fn integer_trace_matches_float_trace() {
        let d = SchottkyData::sl2z_dense().unwrap();
        for c in primitive_classes_by_depth(&d, 4).unwrap().classes {
            let f = word_map(&d, &c.word).unwrap().trace();
            assert!((f - c.integer_trace.unwrap() as f64).abs() < 1e-9 * f.abs());
        }
    }

    #[test]
    fn preset_parsing() {
        assert!(SchottkyData::preset("cylinder(4)").is_ok());
        assert!(SchottkyData::preset("symmetric3(0.2)").is_ok());
        assert!(SchottkyData::preset("sl2z-pair").is_ok());
        assert_eq!(SchottkyData::preset("sl2z-dense").unwrap().m, 4);
        let p = SchottkyData::preset("sl2z-pair(2,3,1,2, 6,35,1,6)").unwrap();
        assert_eq!(p.integer_generators, SchottkyData::sl2z_pair_default().unwrap().integer_generators);
        assert!(SchottkyData::preset("sl2z-pair(2,3,1,2)").is_err());
        assert!(SchottkyData::preset("nope").is_err());
        assert!(SchottkyData::preset("cylinder(1.5)").is_err());
    }
}
