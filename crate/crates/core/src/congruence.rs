//! Reduction mod p, conjugacy classes of SL₂(F_p), trace multiplicities of
//! the integral group, trace rigidity and the character average
//! S(p) = Σ_ρ |I(ρ,T)|² in its Dirac form
//! S(p) = Σ_{classes K} |Z(K)| · (Σ_{(C,k): C^k mod p ∈ K} w(C,k))².

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::explicit_formula::{for_each_power, weight, TestFunction};
use crate::fit::linear_fit;
use crate::schottky::{primitive_geodesics, GeodesicClass, IntMatrix, MoebiusMap, SchottkyData, Word};

/// Largest p for which orbit enumeration and conjugator search are run.
pub const BRUTE_FORCE_CAP: u64 = 31;
/// Violating pairs listed in a [`Conj1Report`]; all are counted.
pub const MAX_LISTED_VIOLATIONS: usize = 50;

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn check_prime(p: u64) -> Result<()> {
    if p <= 3 || !is_prime(p) || p > 1 << 31 {
        return Err(Error::InvalidInput(format!("p must be a prime in (3, 2^31], got {p}")));
    }
    Ok(())
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn reduce(x: i128, p: u64) -> u64 {
    x.rem_euclid(p as i128) as u64
}

/// Legendre symbol (x/p): 0, 1 or −1.
pub fn legendre(x: i64, p: u64) -> i32 {
    match pow_mod(reduce(x as i128, p), (p - 1) / 2, p) {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FpMatrix {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub p: u64,
}

impl FpMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64, p: u64) -> Result<Self> {
        check_prime(p)?;
        let r = |x: i64| reduce(x as i128, p);
        let g = FpMatrix { a: r(a), b: r(b), c: r(c), d: r(d), p };
        if g.det() != 1 {
            return Err(Error::InvalidInput(format!(
                "[[{a}, {b}], [{c}, {d}]] has determinant {} mod {p}, not 1",
                g.det()
            )));
        }
        Ok(g)
    }

    pub fn identity(p: u64) -> Self {
        FpMatrix { a: 1, b: 0, c: 0, d: 1, p }
    }

    pub fn det(&self) -> u64 {
        let p = self.p;
        (self.a * self.d % p + p - self.b * self.c % p) % p
    }

    pub fn trace(&self) -> u64 {
        (self.a + self.d) % self.p
    }

    pub fn mul(&self, o: &FpMatrix) -> FpMatrix {
        let p = self.p;
        FpMatrix {
            a: (self.a * o.a + self.b * o.c) % p,
            b: (self.a * o.b + self.b * o.d) % p,
            c: (self.c * o.a + self.d * o.c) % p,
            d: (self.c * o.b + self.d * o.d) % p,
            p,
        }
    }

    pub fn inverse(&self) -> FpMatrix {
        let p = self.p;
        FpMatrix { a: self.d, b: (p - self.b) % p, c: (p - self.c) % p, d: self.a, p }
    }

    pub fn neg(&self) -> FpMatrix {
        let p = self.p;
        FpMatrix { a: (p - self.a) % p, b: (p - self.b) % p, c: (p - self.c) % p, d: (p - self.d) % p, p }
    }

    pub fn pow(&self, mut k: u64) -> FpMatrix {
        let mut r = FpMatrix::identity(self.p);
        let mut b = *self;
        while k > 0 {
            if k & 1 == 1 {
                r = r.mul(&b);
            }
            b = b.mul(&b);
            k >>= 1;
        }
        r
    }

    fn key(&self) -> usize {
        let p = self.p as usize;
        ((self.a as usize * p + self.b as usize) * p + self.c as usize) * p + self.d as usize
    }
}

/// Conjugacy class in SL₂(F_p). Semisimple classes are determined by the
/// trace; ±I are central; ±(I + N) with N ≠ 0 nilpotent split into two
/// classes by the quadratic character of the off-diagonal entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjClassLabel {
    Central { sign: i8 },
    Unipotent { sign: i8, square: bool },
    Split { trace: u64 },
    Nonsplit { trace: u64 },
}

impl fmt::Display for ConjClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |x: i8| if x > 0 { '+' } else { '-' };
        match self {
            ConjClassLabel::Central { sign } => write!(f, "central({}I)", s(*sign)),
            ConjClassLabel::Unipotent { sign, square } => {
                write!(f, "unipotent({}, {})", s(*sign), if *square { "square" } else { "nonsquare" })
            }
            ConjClassLabel::Split { trace } => write!(f, "split(t={trace})"),
            ConjClassLabel::Nonsplit { trace } => write!(f, "nonsplit(t={trace})"),
        }
    }
}

impl ConjClassLabel {
    pub fn centralizer_size(&self, p: u64) -> u64 {
        match self {
            ConjClassLabel::Central { .. } => group_order(p),
            ConjClassLabel::Unipotent { .. } => 2 * p,
            ConjClassLabel::Split { .. } => p - 1,
            ConjClassLabel::Nonsplit { .. } => p + 1,
        }
    }
}

pub fn group_order(p: u64) -> u64 {
    p * (p * p - 1)
}

pub fn classify(g: &FpMatrix) -> ConjClassLabel {
    let p = g.p;
    let t = g.trace();
    let sign: i8 = if t == 2 {
        1
    } else if t == p - 2 {
        -1
    } else {
        let disc = (t * t % p + p - 4) % p;
        return if legendre(disc as i64, p) == 1 {
            ConjClassLabel::Split { trace: t }
        } else {
            ConjClassLabel::Nonsplit { trace: t }
        };
    };
    let h = if sign > 0 { *g } else { g.neg() };
    if h == FpMatrix::identity(p) {
        return ConjClassLabel::Central { sign };
    }
    // h = I + N; (1 x; 0 1) has class χ(x) and (1 0; y 1) is conjugate to (1 −y; 0 1)
    let x = if h.b != 0 { h.b as i64 } else { -(h.c as i64) };
    ConjClassLabel::Unipotent { sign, square: legendre(x, p) == 1 }
}

pub fn are_conjugate(g: &FpMatrix, h: &FpMatrix) -> bool {
    classify(g) == classify(h)
}

/// Every element of SL₂(F_p), in lexicographic order of (a, b, c, d).
pub fn elements(p: u64) -> Result<Vec<FpMatrix>> {
    check_prime(p)?;
    if p > BRUTE_FORCE_CAP {
        return Err(Error::InvalidInput(format!("element enumeration capped at p <= {BRUTE_FORCE_CAP}, got {p}")));
    }
    let mut out = Vec::with_capacity(group_order(p) as usize);
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                for d in 0..p {
                    let g = FpMatrix { a, b, c, d, p };
                    if g.det() == 1 {
                        out.push(g);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Some x with x g x⁻¹ = h, by exhaustive search (p ≤ BRUTE_FORCE_CAP).
pub fn find_conjugator(g: &FpMatrix, h: &FpMatrix) -> Result<Option<FpMatrix>> {
    Ok(elements(g.p)?.into_iter().find(|x| x.mul(g).mul(&x.inverse()) == *h))
}

/// Conjugacy classes by orbit enumeration, each sorted, ordered by first element.
pub fn brute_force_classes(p: u64) -> Result<Vec<Vec<FpMatrix>>> {
    let all = elements(p)?;
    let mut seen = vec![false; (p * p * p * p) as usize];
    let mut classes = Vec::new();
    for g in &all {
        if seen[g.key()] {
            continue;
        }
        let mut orbit: Vec<FpMatrix> = Vec::new();
        for x in &all {
            let y = x.mul(g).mul(&x.inverse());
            if !seen[y.key()] {
                seen[y.key()] = true;
                orbit.push(y);
            }
        }
        orbit.sort();
        classes.push(orbit);
    }
    Ok(classes)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassStat {
    pub label: ConjClassLabel,
    pub size: u64,
    pub centralizer: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassTable {
    pub p: u64,
    pub order: u64,
    pub classes: Vec<ClassStat>,
    /// Result of the orbit-enumeration cross-check, when p ≤ BRUTE_FORCE_CAP.
    pub verified: Option<bool>,
}

impl ClassTable {
    pub fn size_sum(&self) -> u64 {
        self.classes.iter().map(|c| c.size).sum()
    }
}

/// Every class label of SL₂(F_p) with its size and centralizer order.
pub fn class_labels(p: u64) -> Result<Vec<ConjClassLabel>> {
    check_prime(p)?;
    let mut labels = vec![ConjClassLabel::Central { sign: 1 }, ConjClassLabel::Central { sign: -1 }];
    for sign in [1, -1] {
        for square in [true, false] {
            labels.push(ConjClassLabel::Unipotent { sign, square });
        }
    }
    for t in 0..p {
        if t == 2 || t == p - 2 {
            continue;
        }
        let disc = (t * t % p + p - 4) % p;
        labels.push(if legendre(disc as i64, p) == 1 {
            ConjClassLabel::Split { trace: t }
        } else {
            ConjClassLabel::Nonsplit { trace: t }
        });
    }
    labels.sort();
    Ok(labels)
}

pub fn class_statistics(p: u64) -> Result<ClassTable> {
    let order = group_order(p);
    let classes: Vec<ClassStat> = class_labels(p)?
        .into_iter()
        .map(|label| {
            let centralizer = label.centralizer_size(p);
            ClassStat { label, size: order / centralizer, centralizer }
        })
        .collect();
    let verified = if p <= BRUTE_FORCE_CAP {
        let orbits = brute_force_classes(p)?;
        let expected: HashMap<ConjClassLabel, u64> = classes.iter().map(|c| (c.label, c.size)).collect();
        let mut labels_seen = std::collections::HashSet::new();
        let ok = orbits.len() == classes.len()
            && orbits.iter().all(|o| {
                let l = classify(&o[0]);
                o.iter().all(|g| classify(g) == l)
                    && labels_seen.insert(l)
                    && expected.get(&l) == Some(&(o.len() as u64))
            });
        Some(ok)
    } else {
        None
    };
    Ok(ClassTable { p, order, classes, verified })
}

fn int_to_fp(m: &IntMatrix, p: u64) -> Result<FpMatrix> {
    FpMatrix::new(m[0][0], m[0][1], m[1][0], m[1][1], p)
}

/// Entrywise reduction of a Möbius map with integer entries.
pub fn reduce_map(g: &MoebiusMap, p: u64) -> Result<FpMatrix> {
    let int = |x: f64| -> Result<i64> {
        let r = x.round();
        if (x - r).abs() > 1e-9 || r.abs() > 9.0e15 {
            return Err(Error::NonInteger);
        }
        Ok(r as i64)
    };
    FpMatrix::new(int(g.a)?, int(g.b)?, int(g.c)?, int(g.d)?, p)
}

/// Generator images mod p, inverses included, indexed by letter.
pub fn letter_images(data: &SchottkyData, p: u64) -> Result<Vec<FpMatrix>> {
    let gens = data.integer_generators.as_ref().ok_or(Error::NonInteger)?;
    let fwd = gens.iter().map(|g| int_to_fp(g, p)).collect::<Result<Vec<_>>>()?;
    let inv: Vec<FpMatrix> = fwd.iter().map(|g| g.inverse()).collect();
    Ok(fwd.into_iter().chain(inv).collect())
}

/// γ_α mod p using the integer SL₂(Z) representatives of the generators.
pub fn reduce_word(data: &SchottkyData, w: &Word, p: u64) -> Result<FpMatrix> {
    let images = letter_images(data, p)?;
    Ok(reduce_with(&images, w, p))
}

fn reduce_with(images: &[FpMatrix], w: &Word, p: u64) -> FpMatrix {
    w.0.iter().fold(FpMatrix::identity(p), |acc, &a| acc.mul(&images[a]))
}

/// Order of the subgroup of SL₂(F_p) generated by the generator images.
pub fn generated_order(data: &SchottkyData, p: u64) -> Result<u64> {
    let images = letter_images(data, p)?;
    if p > 257 {
        return Err(Error::InvalidInput(format!("generated subgroup search capped at p <= 257, got {p}")));
    }
    let mut seen = vec![false; (p * p * p * p) as usize];
    let id = FpMatrix::identity(p);
    seen[id.key()] = true;
    let mut queue = VecDeque::from([id]);
    let mut count = 1u64;
    while let Some(g) = queue.pop_front() {
        for s in &images {
            let h = g.mul(s);
            if !seen[h.key()] {
                seen[h.key()] = true;
                count += 1;
                queue.push_back(h);
            }
        }
    }
    Ok(count)
}

/// A power C^k of a primitive class with the exact trace of its integer representative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassPower {
    pub word: Word,
    pub k: u32,
    pub length: f64,
    pub trace: i64,
}

impl ClassPower {
    /// kℓ(C).
    pub fn total_length(&self) -> f64 {
        self.k as f64 * self.length
    }
}

fn power_trace(t: i64, k: u32) -> Result<i64> {
    // tr(g^k) = t·tr(g^{k−1}) − tr(g^{k−2})
    let (mut prev, mut cur): (i128, i128) = (2, t as i128);
    for _ in 1..k {
        let next = (t as i128)
            .checked_mul(cur)
            .and_then(|x| x.checked_sub(prev))
            .filter(|x| x.abs() < i64::MAX as i128)
            .ok_or_else(|| Error::InvalidInput(format!("trace of power {k} of trace {t} overflows")))?;
        prev = cur;
        cur = next;
    }
    Ok(cur as i64)
}

fn class_power(c: &GeodesicClass, k: u32) -> Result<ClassPower> {
    let t = c.integer_trace.ok_or(Error::NonInteger)?;
    Ok(ClassPower { word: c.word.clone(), k, length: c.length, trace: power_trace(t, k)? })
}

/// Every (C, k) with kℓ(C) ≤ T, ordered by kℓ then word then k.
pub fn class_powers(data: &SchottkyData, t: f64) -> Result<Vec<ClassPower>> {
    if data.integer_generators.is_none() {
        return Err(Error::NonInteger);
    }
    let table = primitive_geodesics(data, t)?;
    let mut out = Vec::new();
    let mut err = None;
    for_each_power(&table, t, |c, k| match class_power(c, k) {
        Ok(x) => out.push(x),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    out.sort_by(|x, y| {
        x.total_length().total_cmp(&y.total_length()).then_with(|| x.word.cmp(&y.word)).then_with(|| x.k.cmp(&y.k))
    });
    Ok(out)
}

fn multiplicities<'a>(powers: impl Iterator<Item = &'a ClassPower>) -> BTreeMap<i64, usize> {
    let mut m = BTreeMap::new();
    for x in powers {
        *m.entry(x.trace).or_insert(0) += 1;
    }
    m
}

/// t ↦ m(t) = #{(C, k) : kℓ(C) ≤ T, tr(C^k) = t}, keyed by signed integer trace.
pub fn trace_multiplicities(data: &SchottkyData, t: f64) -> Result<BTreeMap<i64, usize>> {
    Ok(multiplicities(class_powers(data, t)?.iter()))
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub classes: usize,
    pub distinct_traces: usize,
    pub sum_m_squared: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicityGrowth {
    pub rows: Vec<GrowthRow>,
    /// Slope of log Σ m(t) against T.
    pub exponent_m: f64,
    /// Slope of log Σ m(t)² against T.
    pub exponent_m2: f64,
}

/// Σ m(t) and Σ m(t)² on `steps` equally spaced T in [t_min, t_max], with
/// their fitted exponential growth rates.
pub fn multiplicity_growth(data: &SchottkyData, t_min: f64, t_max: f64, steps: usize) -> Result<MultiplicityGrowth> {
    if !(t_min > 0.0 && t_max > t_min) || steps < 2 {
        return Err(Error::InvalidInput(format!(
            "growth fit needs 0 < t_min < t_max and steps >= 2, got [{t_min}, {t_max}], {steps}"
        )));
    }
    let powers = class_powers(data, t_max)?;
    let rows: Vec<GrowthRow> = (0..steps)
        .map(|i| {
            let t = t_min + (t_max - t_min) * i as f64 / (steps - 1) as f64;
            let m = multiplicities(powers.iter().filter(|x| x.total_length() <= t));
            GrowthRow {
                t,
                classes: m.values().sum(),
                distinct_traces: m.len(),
                sum_m_squared: m.values().map(|&v| (v * v) as u64).sum(),
            }
        })
        .collect();
    let fit = |f: &dyn Fn(&GrowthRow) -> f64| -> Result<f64> {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.classes > 0).map(|r| (r.t, f(r).ln())).collect();
        linear_fit(&pts)
            .map(|(slope, _)| slope)
            .ok_or_else(|| Error::InvalidInput("too few nonempty rows to fit growth".into()))
    };
    let exponent_m = fit(&|r| r.classes as f64)?;
    let exponent_m2 = fit(&|r| r.sum_m_squared as f64)?;
    Ok(MultiplicityGrowth { rows, exponent_m, exponent_m2 })
}

#[derive(Clone, Debug, Serialize)]
pub struct Conj1Violation {
    pub first: ClassPower,
    pub second: ClassPower,
    pub first_label: ConjClassLabel,
    pub second_label: ConjClassLabel,
}

#[derive(Clone, Debug, Serialize)]
pub struct Conj1Report {
    pub p: u64,
    pub beta: f64,
    /// β log p.
    pub max_length: f64,
    pub classes: usize,
    pub pairs_checked: u64,
    pub violation_count: u64,
    /// The first MAX_LISTED_VIOLATIONS violating pairs.
    pub violations: Vec<Conj1Violation>,
}

/// Whether equality of integer traces and conjugacy mod p disagree.
pub fn violates(x: &ClassPower, lx: &ConjClassLabel, y: &ClassPower, ly: &ConjClassLabel) -> bool {
    (x.trace == y.trace) != (lx == ly)
}

/// Tests tr(C^k) = tr(C'^{k'}) ⇔ C^k ~ C'^{k'} mod p over all pairs with
/// kℓ, k'ℓ' ≤ β log p.
pub fn conj1_check(data: &SchottkyData, p: u64, beta: f64) -> Result<Conj1Report> {
    check_prime(p)?;
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 2), got {beta}")));
    }
    let max_length = beta * (p as f64).ln();
    let powers = class_powers(data, max_length)?;
    let images = letter_images(data, p)?;
    let labels: Vec<ConjClassLabel> =
        powers.iter().map(|x| classify(&reduce_with(&images, &x.word, p).pow(x.k as u64))).collect();
    let n = powers.len();
    let per_row: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).filter(|&j| violates(&powers[i], &labels[i], &powers[j], &labels[j])).collect())
        .collect();
    let violation_count = per_row.iter().map(|r| r.len() as u64).sum();
    let violations = per_row
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
        .take(MAX_LISTED_VIOLATIONS)
        .map(|(i, j)| Conj1Violation {
            first: powers[i].clone(),
            second: powers[j].clone(),
            first_label: labels[i],
            second_label: labels[j],
        })
        .collect();
    Ok(Conj1Report {
        p,
        beta,
        max_length,
        classes: n,
        pairs_checked: (n as u64) * (n as u64).saturating_sub(1) / 2,
        violation_count,
        violations,
    })
}

/// Σ_K centralizer(K) · (Σ_{entries in K} w)², summed in key order.
pub fn dirac_sum<K: Ord + Clone>(entries: &[(K, f64)], centralizer: impl Fn(&K) -> f64) -> f64 {
    let mut groups: BTreeMap<K, f64> = BTreeMap::new();
    for (k, w) in entries {
        *groups.entry(k.clone()).or_insert(0.0) += w;
    }
    groups.iter().map(|(k, w)| centralizer(k) * w * w).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacterAverage {
    pub p: u64,
    pub t: f64,
    pub beta: f64,
    /// Lower-bound terms use kℓ ≤ T(1 − cut).
    pub cut: f64,
    pub terms: usize,
    pub s: f64,
    /// Σ_x w_x² |Z(x)|, the pairs of each (C, k) with itself.
    pub diagonal: f64,
    /// (p − 1) Σ_K (Σ_{x ∈ K, kℓ ≤ T(1−cut)} w_x)².
    pub lower_bound: f64,
    /// min w_x² over the cut terms.
    pub c_cut: f64,
    /// Σ_t m(t)² over the cut terms.
    pub sum_m_squared: u64,
    /// c_cut · (p − 1) · Σ m(t)².
    pub multiplicity_bound: f64,
    /// log S / log p.
    pub exponent: f64,
    /// (p − 1)/2, the least degree of a nontrivial irreducible.
    pub min_degree: u64,
}

/// S(p) = Σ_ρ |I(ρ,T)|² over the irreducibles of SL₂(F_p), computed from
/// column orthogonality Σ_ρ χ_ρ(g) conj χ_ρ(h) = |Z(g)|·[g ~ h].
pub fn character_average(
    data: &SchottkyData,
    p: u64,
    t: f64,
    phi: &TestFunction,
    cut: f64,
) -> Result<CharacterAverage> {
    check_prime(p)?;
    let beta = t / (p as f64).ln();
    if !(t > 0.0 && beta < 2.0) || !(0.0..1.0).contains(&cut) {
        return Err(Error::InvalidInput(format!(
            "character average needs 0 < T < 2 log p and cut in [0, 1), got T = {t}, cut = {cut}"
        )));
    }
    if 1.0 - cut >= phi.support {
        return Err(Error::InvalidInput(format!(
            "cut {cut} leaves [0, {}] which reaches the edge of the test function support {}",
            1.0 - cut,
            phi.support
        )));
    }
    let powers = class_powers(data, t)?;
    let images = letter_images(data, p)?;
    let entries: Vec<(ConjClassLabel, f64, bool)> = powers
        .iter()
        .map(|x| {
            let label = classify(&reduce_with(&images, &x.word, p).pow(x.k as u64));
            let w = weight(x.length, x.k) * phi.eval(x.total_length() / t);
            (label, w, x.total_length() <= t * (1.0 - cut))
        })
        .collect();
    let z = |l: &ConjClassLabel| l.centralizer_size(p) as f64;
    let all: Vec<(ConjClassLabel, f64)> = entries.iter().map(|e| (e.0, e.1)).collect();
    let s = dirac_sum(&all, z);
    let diagonal = entries.iter().map(|e| z(&e.0) * e.1 * e.1).sum();
    let kept: Vec<(ConjClassLabel, f64)> = entries.iter().filter(|e| e.2).map(|e| (e.0, e.1)).collect();
    let lower_bound = dirac_sum(&kept, |_| (p - 1) as f64);
    let c_cut = kept.iter().map(|e| e.1 * e.1).fold(f64::INFINITY, f64::min);
    let c_cut = if c_cut.is_finite() { c_cut } else { 0.0 };
    let m = multiplicities(powers.iter().zip(&entries).filter(|(_, e)| e.2).map(|(x, _)| x));
    let sum_m_squared: u64 = m.values().map(|&v| (v * v) as u64).sum();
    Ok(CharacterAverage {
        p,
        t,
        beta,
        cut,
        terms: powers.len(),
        s,
        diagonal,
        lower_bound,
        c_cut,
        sum_m_squared,
        multiplicity_bound: c_cut * (p - 1) as f64 * sum_m_squared as f64,
        exponent: s.ln() / (p as f64).ln(),
        min_degree: (p - 1) / 2,
    })
}
