//! Cayley graphs of abelian quotients: the normalised Laplacian
//! L = I − A/k, its spectrum λ_α = (1/k) Σ_s (1 − cos 2π⟨α, s/N⟩) by
//! characters, Cheeger constants and the spectral sandwich
//! (k/2)·λ₁ ≤ h ≤ k·√(λ₁(1 − λ₁)).

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::abelian::AbelianQuotient;
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::CMatrix;
use crate::schottky::SchottkyData;
use crate::Complex64;

/// Largest vertex count for exhaustive Cheeger search.
pub const EXHAUSTIVE_CAP: usize = 24;
/// Largest vertex count for the character formula.
pub const ORDER_CAP: usize = 1_000_000;
/// Largest vertex count for dense diagonalisation.
pub const DENSE_CAP: usize = 2000;

#[derive(Clone, Debug, Serialize)]
pub struct CayleyGraph {
    pub quotient: AbelianQuotient,
    /// The multiset S: each generator and its negative, once if they coincide.
    pub generators: Vec<Vec<usize>>,
}

impl CayleyGraph {
    /// Symmetrises `gens` mod the moduli; the zero element is kept only when
    /// `loops` is set. Fails unless the result generates the quotient.
    pub fn new(quotient: AbelianQuotient, gens: &[Vec<i64>], loops: bool) -> Result<Self> {
        let order = quotient.order();
        if order > ORDER_CAP {
            return Err(Error::InvalidInput(format!("quotient order {order} exceeds {ORDER_CAP}")));
        }
        let m = quotient.moduli.len();
        let mut generators = Vec::new();
        for g in gens {
            if g.len() != m {
                return Err(Error::InvalidInput(format!(
                    "generator {g:?} has {} coordinates, quotient has {m}",
                    g.len()
                )));
            }
            let reduce = |sign: i64| -> Vec<usize> {
                g.iter().zip(&quotient.moduli).map(|(&x, &n)| (sign * x).rem_euclid(n as i64) as usize).collect()
            };
            let (s, t) = (reduce(1), reduce(-1));
            if s.iter().all(|&x| x == 0) && !loops {
                continue;
            }
            let same = s == t;
            generators.push(s);
            if !same {
                generators.push(t);
            }
        }
        if generators.is_empty() {
            return Err(Error::InvalidInput("generating set is empty after removing loops".into()));
        }
        let graph = CayleyGraph { quotient, generators };
        if !graph.is_connected() {
            return Err(Error::InvalidInput(format!(
                "generators {gens:?} do not generate Z/{:?}",
                graph.quotient.moduli
            )));
        }
        Ok(graph)
    }

    /// Z/N with S = {±1}.
    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(AbelianQuotient::new(vec![n])?, &[vec![1]], false)
    }

    /// The images of the Schottky generators (homology basis vectors) in the quotient.
    pub fn from_generators(data: &SchottkyData, quotient: AbelianQuotient) -> Result<Self> {
        if quotient.moduli.len() != data.m {
            return Err(Error::InvalidInput(format!(
                "quotient has {} factors, group has {} generators",
                quotient.moduli.len(),
                data.m
            )));
        }
        let gens: Vec<Vec<i64>> = (0..data.m).map(|i| (0..data.m).map(|j| i64::from(i == j)).collect()).collect();
        Self::new(quotient, &gens, false)
    }

    pub fn order(&self) -> usize {
        self.quotient.order()
    }

    pub fn degree(&self) -> usize {
        self.generators.len()
    }

    pub fn name(&self) -> String {
        format!("Cay(Z/{:?}, {} generators)", self.quotient.moduli, self.degree())
    }

    /// Mixed-radix index, first coordinate fastest.
    pub fn index(&self, g: &[usize]) -> usize {
        g.iter().rev().zip(self.quotient.moduli.iter().rev()).fold(0, |acc, (&x, &n)| acc * n + x)
    }

    pub fn element(&self, mut i: usize) -> Vec<usize> {
        self.quotient
            .moduli
            .iter()
            .map(|&n| {
                let r = i % n;
                i /= n;
                r
            })
            .collect()
    }

    /// Neighbour indices of vertex i, one per element of S.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let g = self.element(i);
        self.generators
            .iter()
            .map(|s| {
                let h: Vec<usize> =
                    g.iter().zip(s).zip(&self.quotient.moduli).map(|((&x, &y), &n)| (x + y) % n).collect();
                self.index(&h)
            })
            .collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.order();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }
}

/// λ_α for every character α, sorted ascending.
pub fn laplacian_eigenvalues(graph: &CayleyGraph) -> Vec<f64> {
    let k = graph.degree() as f64;
    let moduli = &graph.quotient.moduli;
    let mut out: Vec<f64> = (0..graph.order())
        .into_par_iter()
        .map(|i| {
            let alpha = graph.element(i);
            graph
                .generators
                .iter()
                .map(|s| {
                    // each term reduced mod N_l before dividing
                    let x: f64 =
                        alpha.iter().zip(s).zip(moduli).map(|((&a, &b), &n)| ((a * b) % n) as f64 / n as f64).sum();
                    1.0 - (std::f64::consts::TAU * x).cos()
                })
                .sum::<f64>()
                / k
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// I − A/k as a dense row-major matrix.
pub fn dense_laplacian(graph: &CayleyGraph) -> Result<Vec<f64>> {
    let n = graph.order();
    if n > DENSE_CAP {
        return Err(Error::InvalidInput(format!("dense Laplacian capped at {DENSE_CAP} vertices, got {n}")));
    }
    let k = graph.degree() as f64;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        l[i * n + i] += 1.0;
        for j in graph.neighbours(i) {
            l[i * n + j] -= 1.0 / k;
        }
    }
    Ok(l)
}

/// Eigenvalues of the dense Laplacian, sorted ascending.
pub fn dense_eigenvalues(graph: &CayleyGraph) -> Result<Vec<f64>> {
    let n = graph.order();
    let l = dense_laplacian(graph)?;
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, Complex64::new(l[i * n + j], 0.0));
        }
    }
    let mut ev = m.hermitian_eigenvalues()?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest nonzero-index eigenvalue λ₁.
pub fn spectral_gap(graph: &CayleyGraph) -> f64 {
    let ev = laplacian_eigenvalues(graph);
    ev.get(1).copied().unwrap_or(0.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct Cheeger {
    pub value: f64,
    /// |∂A| and |A| of a minimising set.
    pub boundary: usize,
    pub size: usize,
    /// Vertex indices of a minimising set.
    pub set: Vec<usize>,
    /// False when the value is only an upper bound from candidate sets.
    pub exact: bool,
}

fn boundary_of(graph: &CayleyGraph, inside: &[bool]) -> usize {
    (0..graph.order())
        .filter(|&v| inside[v])
        .map(|v| graph.neighbours(v).into_iter().filter(|&w| !inside[w]).count())
        .sum()
}

/// Best (|∂A|, |A|, mask) over masks whose top `fixed` bits equal `block`,
/// visiting the low bits in Gray code order.
fn search_block(nbr: &[Vec<usize>], n: usize, fixed: usize, block: u32) -> Option<(usize, usize, u32)> {
    let low = n - fixed;
    let mut mask: u32 = block << low;
    let mut size = mask.count_ones() as usize;
    let inside = |mask: u32, v: usize| mask >> v & 1 == 1;
    let mut boundary: usize =
        (0..n).filter(|&v| inside(mask, v)).map(|v| nbr[v].iter().filter(|&&w| !inside(mask, w)).count()).sum();
    let mut best: Option<(usize, usize, u32)> = None;
    let consider = |b: usize, s: usize, m: u32, best: &mut Option<(usize, usize, u32)>| {
        if s == 0 || 2 * s > n {
            return;
        }
        let better = match best {
            None => true,
            Some((bb, bs, bm)) => {
                let (l, r) = (b * *bs, *bb * s);
                l < r || (l == r && m < *bm)
            }
        };
        if better {
            *best = Some((b, s, m));
        }
    };
    consider(boundary, size, mask, &mut best);
    for i in 1u64..(1u64 << low) {
        let v = i.trailing_zeros() as usize;
        // edges from v to the inside/outside; loops never cross the cut
        let (mut to_in, mut to_out) = (0usize, 0usize);
        for &w in &nbr[v] {
            if w == v {
                continue;
            }
            if inside(mask, w) {
                to_in += 1;
            } else {
                to_out += 1;
            }
        }
        if inside(mask, v) {
            mask &= !(1 << v);
            size -= 1;
            boundary = boundary + to_in - to_out;
        } else {
            mask |= 1 << v;
            size += 1;
            boundary = boundary + to_out - to_in;
        }
        consider(boundary, size, mask, &mut best);
    }
    best
}

/// h(G) = min |∂A|/|A| over 0 < |A| ≤ |V|/2; exhaustive up to
/// EXHAUSTIVE_CAP vertices, otherwise the best of the BFS balls around 0.
pub fn cheeger_constant(graph: &CayleyGraph) -> Result<Cheeger> {
    let n = graph.order();
    if n < 2 {
        return Err(Error::InvalidInput("Cheeger constant needs at least two vertices".into()));
    }
    if n > EXHAUSTIVE_CAP {
        return Ok(ball_bound(graph));
    }
    let nbr: Vec<Vec<usize>> = (0..n).map(|v| graph.neighbours(v)).collect();
    let fixed = n.min(6);
    let best = (0..1u32 << fixed)
        .into_par_iter()
        .filter_map(|block| search_block(&nbr, n, fixed, block))
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)).then(a.2.cmp(&b.2)))
        .expect("some subset has size in (0, n/2]");
    let set: Vec<usize> = (0..n).filter(|&v| best.2 >> v & 1 == 1).collect();
    Ok(Cheeger { value: best.0 as f64 / best.1 as f64, boundary: best.0, size: best.1, set, exact: true })
}

/// Upper bound from the prefixes of a breadth-first ordering from 0.
fn ball_bound(graph: &CayleyGraph) -> Cheeger {
    let n = graph.order();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for w in graph.neighbours(v) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    let mut inside = vec![false; n];
    let mut boundary = 0usize;
    let mut best = (usize::MAX, 1usize, 0usize);
    for (i, &v) in order.iter().take(n / 2).enumerate() {
        let nb = graph.neighbours(v);
        let to_in = nb.iter().filter(|&&w| w != v && inside[w]).count();
        let to_out = nb.iter().filter(|&&w| w != v && !inside[w]).count();
        inside[v] = true;
        boundary = boundary + to_out - to_in;
        let size = i + 1;
        if best.0 == usize::MAX || boundary * best.1 < best.0 * size {
            best = (boundary, size, i);
        }
    }
    let set: Vec<usize> = order[..=best.2].to_vec();
    debug_assert_eq!(
        boundary_of(graph, &{
            let mut f = vec![false; n];
            set.iter().for_each(|&v| f[v] = true);
            f
        }),
        best.0
    );
    Cheeger { value: best.0 as f64 / best.1 as f64, boundary: best.0, size: best.1, set, exact: false }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub graph: String,
    pub degree: usize,
    pub lambda1: f64,
    pub cheeger: f64,
    /// (k/2)·λ₁.
    pub lower: f64,
    /// k·√(λ_c(1 − λ_c)) with λ_c = λ₁ clamped to [0, 1].
    pub upper: f64,
    /// λ₁ ≥ 1: the upper bound is degenerate and not asserted.
    pub flagged: bool,
    pub lower_slack: f64,
    pub upper_slack: f64,
}

const SANDWICH_TOL: f64 = 1e-12;

/// Checks (k/2)·λ₁ ≤ h ≤ k·√(λ₁(1 − λ₁)) with the exhaustive Cheeger constant.
/// A violation is returned as an error; the upper side is skipped when λ₁ ≥ 1.
pub fn sandwich_report(graph: &CayleyGraph) -> Result<SandwichReport> {
    let ch = cheeger_constant(graph)?;
    if !ch.exact {
        return Err(Error::InvalidInput(format!(
            "sandwich check needs an exhaustive Cheeger constant (at most {EXHAUSTIVE_CAP} vertices)"
        )));
    }
    let k = graph.degree() as f64;
    let lambda1 = spectral_gap(graph);
    let lc = lambda1.clamp(0.0, 1.0);
    let lower = 0.5 * k * lambda1;
    let upper = k * (lc * (1.0 - lc)).sqrt();
    Ok(SandwichReport {
        graph: graph.name(),
        degree: graph.degree(),
        lambda1,
        cheeger: ch.value,
        lower,
        upper,
        flagged: lambda1 >= 1.0,
        lower_slack: ch.value - lower,
        upper_slack: upper - ch.value,
    })
}

impl SandwichReport {
    pub fn lower_holds(&self) -> bool {
        self.lower_slack >= -SANDWICH_TOL
    }

    /// None when flagged.
    pub fn upper_holds(&self) -> Option<bool> {
        (!self.flagged).then_some(self.upper_slack >= -SANDWICH_TOL)
    }
}

pub fn sandwich_check(graph: &CayleyGraph) -> Result<SandwichReport> {
    let r = sandwich_report(graph)?;
    if !r.lower_holds() {
        return Err(Error::Sandwich {
            graph: r.graph.clone(),
            detail: format!("h = {} < (k/2)·lambda1 = {}", r.cheeger, r.lower),
        });
    }
    if r.upper_holds() == Some(false) {
        return Err(Error::Sandwich {
            graph: r.graph.clone(),
            detail: format!(
                "h = {} > k·sqrt(lambda1(1 − lambda1)) = {} at lambda1 = {}",
                r.cheeger, r.upper, r.lambda1
            ),
        });
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub lambda1: f64,
    pub lambda1_n2: f64,
    /// Exhaustive Cheeger constant or a BFS-ball upper bound.
    pub cheeger: f64,
    pub cheeger_exact: bool,
    /// k·√(λ_c(1 − λ_c)).
    pub spectral_upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapDecay {
    pub moduli_template: Vec<usize>,
    pub growing: usize,
    pub rows: Vec<GapRow>,
    /// Slope of log λ₁ against log N.
    pub rate: f64,
    /// λ₁·N² at the largest N.
    pub limit: f64,
    /// (max − min)/mean of λ₁·N² over rows with N ≥ spread_from.
    pub spread: f64,
    pub spread_from: usize,
}

/// λ₁ and Cheeger data along quotients whose `growing` modulus runs through `ns`.
pub fn gap_decay_experiment(
    data: &SchottkyData,
    template: &[usize],
    growing: usize,
    ns: &[usize],
    spread_from: usize,
) -> Result<GapDecay> {
    if growing >= template.len() || ns.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "growing index {growing} outside {template:?} or fewer than two sizes"
        )));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut moduli = template.to_vec();
        moduli[growing] = n;
        let graph = CayleyGraph::from_generators(data, AbelianQuotient::new(moduli)?)?;
        let lambda1 = spectral_gap(&graph);
        let ch = cheeger_constant(&graph)?;
        let lc = lambda1.clamp(0.0, 1.0);
        rows.push(GapRow {
            n,
            lambda1,
            lambda1_n2: lambda1 * (n * n) as f64,
            cheeger: ch.value,
            cheeger_exact: ch.exact,
            spectral_upper: graph.degree() as f64 * (lc * (1.0 - lc)).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.lambda1.ln())).collect();
    let rate = linear_fit(&pts).map(|f| f.0).unwrap_or(f64::NAN);
    let tail: Vec<f64> = rows.iter().filter(|r| r.n >= spread_from).map(|r| r.lambda1_n2).collect();
    let spread = if tail.is_empty() {
        f64::NAN
    } else {
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        (hi - lo) / mean
    };
    Ok(GapDecay {
        moduli_template: template.to_vec(),
        growing,
        limit: rows.last().map(|r| r.lambda1_n2).unwrap_or(f64::NAN),
        rows,
        rate,
        spread,
        spread_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    /// min |∂A|/|A| by listing every subset.
    fn naive_cheeger(graph: &CayleyGraph) -> f64 {
        let n = graph.order();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            let size = mask.count_ones() as usize;
            if 2 * size > n {
                continue;
            }
            let inside: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
            best = best.min(boundary_of(graph, &inside) as f64 / size as f64);
        }
        best
    }

    #[test]
    fn cycle_spectra() {
        let c4 = CayleyGraph::cycle(4).unwrap();
        assert!(close(&laplacian_eigenvalues(&c4), &[0.0, 1.0, 1.0, 2.0], 1e-14));
        assert!(close(&dense_eigenvalues(&c4).unwrap(), &[0.0, 1.0, 1.0, 2.0], 1e-10));
        for n in [5usize, 16, 100] {
            let g = CayleyGraph::cycle(n).unwrap();
            assert!((spectral_gap(&g) - (1.0 - (2.0 * PI / n as f64).cos())).abs() < 1e-14);
            let ev = laplacian_eigenvalues(&g);
            assert!(ev[0].abs() < 1e-15 && ev[1] > 1e-6);
        }
    }

    #[test]
    fn character_formula_matches_dense() {
        let cases = [
            (vec![4usize], vec![vec![1i64], vec![2]]),
            (vec![3, 5], vec![vec![1, 0], vec![0, 1]]),
            (vec![6, 4], vec![vec![1, 1], vec![0, 1], vec![2, 0]]),
            (vec![10, 20], vec![vec![1, 0], vec![0, 1]]),
        ];
        for (moduli, gens) in cases {
            let g = CayleyGraph::new(AbelianQuotient::new(moduli).unwrap(), &gens, false).unwrap();
            let a = laplacian_eigenvalues(&g);
            let b = dense_eigenvalues(&g).unwrap();
            assert!(close(&a, &b, 1e-10), "{a:?} vs {b:?}");
            assert!(a.iter().all(|&x| (-1e-12..=2.0 + 1e-12).contains(&x)));
            let trace: f64 = a.iter().sum();
            assert!((trace - g.order() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn loops_and_trace() {
        let q = AbelianQuotient::new(vec![5]).unwrap();
        let g = CayleyGraph::new(q.clone(), &[vec![1], vec![0]], true).unwrap();
        assert_eq!(g.degree(), 3);
        let trace: f64 = laplacian_eigenvalues(&g).iter().sum();
        assert!((trace - 5.0 * (1.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(CayleyGraph::new(q.clone(), &[vec![1], vec![0]], false).unwrap().degree(), 2);
        assert!(CayleyGraph::new(AbelianQuotient::new(vec![4]).unwrap(), &[vec![2]], false).is_err());
        assert!(CayleyGraph::new(q, &[vec![0]], false).is_err());
    }

    #[test]
    fn cheeger_examples() {
        let c4 = CayleyGraph::cycle(4).unwrap();
        assert_eq!(cheeger_constant(&c4).unwrap().value, 1.0);
        let k4 = CayleyGraph::new(AbelianQuotient::new(vec![4]).unwrap(), &[vec![1], vec![2]], false).unwrap();
        assert_eq!(k4.degree(), 3);
        assert_eq!(cheeger_constant(&k4).unwrap().value, 2.0);
        assert!((cheeger_constant(&CayleyGraph::cycle(6).unwrap()).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cheeger_constant(&CayleyGraph::cycle(8).unwrap()).unwrap().value, 0.5);
        for n in 3..=12 {
            let g = CayleyGraph::cycle(n).unwrap();
            let h = cheeger_constant(&g).unwrap();
            assert!(h.exact);
            assert!((h.value - naive_cheeger(&g)).abs() < 1e-15, "n = {n}");
            assert!(h.value <= g.degree() as f64);
        }
        let big = cheeger_constant(&CayleyGraph::cycle(100).unwrap()).unwrap();
        assert!(!big.exact);
        assert!((big.value - 2.0 / 50.0).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_matches_naive_on_two_factor_groups() {
        for (moduli, gens) in [
            (vec![3usize, 4], vec![vec![1i64, 0], vec![0, 1]]),
            (vec![2, 7], vec![vec![1, 1], vec![0, 1]]),
            (vec![4, 4], vec![vec![1, 0], vec![0, 1], vec![1, 1]]),
        ] {
            let g = CayleyGraph::new(AbelianQuotient::new(moduli).unwrap(), &gens, false).unwrap();
            let h = cheeger_constant(&g).unwrap();
            assert!((h.value - naive_cheeger(&g)).abs() < 1e-15);
            let inside: Vec<bool> = (0..g.order()).map(|v| h.set.contains(&v)).collect();
            assert_eq!(boundary_of(&g, &inside), h.boundary);
        }
    }

    #[test]
    fn sandwich_examples() {
        let r = sandwich_report(&CayleyGraph::cycle(4).unwrap()).unwrap();
        assert!(r.flagged && r.lower_holds() && r.upper_holds().is_none());
        let r6 = sandwich_check(&CayleyGraph::cycle(6).unwrap()).unwrap();
        assert!((r6.lower - 0.5).abs() < 1e-12 && (r6.upper - 1.0).abs() < 1e-12);
        let r8 = sandwich_check(&CayleyGraph::cycle(8).unwrap()).unwrap();
        assert!((r8.lambda1 - 0.2929).abs() < 1e-4 && (r8.upper - 0.9102).abs() < 1e-4);
        assert_eq!(r8.cheeger, 0.5);
        // h(Z/5) = 1 exceeds 2·sqrt(λ₁(1 − λ₁)) ≈ 0.924
        let r5 = sandwich_report(&CayleyGraph::cycle(5).unwrap()).unwrap();
        assert_eq!(r5.cheeger, 1.0);
        assert_eq!(r5.upper_holds(), Some(false));
        assert!(matches!(sandwich_check(&CayleyGraph::cycle(5).unwrap()), Err(Error::Sandwich { .. })));
        for n in 6..=24 {
            assert!(sandwich_check(&CayleyGraph::cycle(n).unwrap()).is_ok(), "n = {n}");
        }
    }

    #[test]
    fn gap_decay() {
        let d = SchottkyData::sl2z_pair_default().unwrap();
        let ns = [16usize, 32, 64, 128, 256, 512, 1024];
        let r = gap_decay_experiment(&d, &[1, 1], 0, &ns, 64).unwrap();
        assert!(r.rows.windows(2).all(|w| w[1].lambda1 < w[0].lambda1));
        assert!((r.rate + 2.0).abs() < 0.01);
        assert!((r.limit - 2.0 * PI * PI).abs() < 1e-3);
        assert!(r.spread < 0.05);
        assert!(r.rows.last().unwrap().cheeger < 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn spectrum_invariant_under_generator_relabelling(
            n1 in 2usize..7, n2 in 2usize..7,
            a in 0i64..7, b in 0i64..7, rot in 0usize..3,
        ) {
            let q = AbelianQuotient::new(vec![n1, n2]).unwrap();
            let mut gens = vec![vec![1i64, 0], vec![0, 1], vec![a, b]];
            let g1 = CayleyGraph::new(q.clone(), &gens, false).unwrap();
            gens.rotate_left(rot);
            let g2 = CayleyGraph::new(q, &gens, false).unwrap();
            let (e1, e2) = (laplacian_eigenvalues(&g1), laplacian_eigenvalues(&g2));
            prop_assert!(close(&e1, &e2, 1e-12));
            prop_assert!(e1[0].abs() < 1e-12 && e1[1] > 1e-9);
            let h = cheeger_constant(&g1).unwrap();
            prop_assert!(h.value <= g1.degree() as f64);
            prop_assert!(0.5 * g1.degree() as f64 * e1[1] <= h.value + 1e-12);
        }
    }
}
