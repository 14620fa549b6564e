//! Topological pressure and the critical exponent δ.
//!
//! P(σ) is the log of the spectral radius of the untwisted truncated transfer
//! matrix at real s = σ; δ is its root on [0, 1].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schottky::SchottkyData;
use crate::transfer::{assemble, spectral_radius, TwistSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureCurve {
    /// (σ, P(σ)) pairs in increasing σ.
    pub samples: Vec<(f64, f64)>,
    pub delta: f64,
}

impl PressureCurve {
    pub fn is_decreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// Second differences nonnegative up to `tol` (uniform grids).
    pub fn is_convex(&self, tol: f64) -> bool {
        self.samples.windows(3).all(|w| w[0].1 - 2.0 * w[1].1 + w[2].1 >= -tol)
    }
}

pub fn pressure(data: &SchottkyData, sigma: f64, lmax: usize) -> Result<f64> {
    if lmax < 4 {
        return Err(Error::InvalidInput(format!("pressure needs lmax >= 4, got {lmax}")));
    }
    let m = assemble(data, Complex64::new(sigma, 0.0), &TwistSpec::Trivial, lmax)?;
    Ok(spectral_radius(&m)?.ln())
}

/// Root of σ ↦ P(σ) on [0, 1] with |P(δ)| < tol (Illinois regula falsi).
pub fn critical_exponent(data: &SchottkyData, lmax: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut pa = pressure(data, a, lmax)?;
    let mut pb = pressure(data, b, lmax)?;
    if pa.abs() < tol {
        return Ok(0.0);
    }
    if pb.abs() < tol {
        return Ok(1.0);
    }
    if !(pa > 0.0 && pb < 0.0) {
        return Err(Error::NoSignChange { p0: pa, p1: pb });
    }
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * pb - b * pa) / (pb - pa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let pc = pressure(data, c, lmax)?;
        if pc.abs() < tol || (b - a) < 1e-15 {
            return Ok(c);
        }
        if (pc > 0.0) == (pa > 0.0) {
            a = c;
            pa = pc;
            if side == -1 {
                pb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            pb = pc;
            if side == 1 {
                pa *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence {
        start: Complex64::new(0.5, 0.0),
        last: Complex64::new(0.5 * (a + b), 0.0),
        residual: pa.abs().min(pb.abs()),
    })
}

/// Samples P on `sigmas` (in parallel, merged in input order) and attaches δ.
pub fn pressure_curve(data: &SchottkyData, sigmas: &[f64], lmax: usize, tol: f64) -> Result<PressureCurve> {
    let values = sigmas.par_iter().map(|&s| pressure(data, s, lmax)).collect::<Result<Vec<_>>>()?;
    let delta = critical_exponent(data, lmax, tol)?;
    Ok(PressureCurve { samples: sigmas.iter().copied().zip(values).collect(), delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::DEFAULT_SYMMETRIC3_THETA;

    #[test]
    fn cylinder_pressure_is_linear() {
        let d = SchottkyData::cylinder(3.0).unwrap();
        let l = 2.0 * 1.5f64.acosh();
        for &s in &[0.0, 0.3, 1.0] {
            assert!((pressure(&d, s, 16).unwrap() + s * l).abs() < 1e-10);
        }
        assert_eq!(critical_exponent(&d, 16, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn symmetric3_delta_root() {
        let d = SchottkyData::symmetric3(DEFAULT_SYMMETRIC3_THETA).unwrap();
        let delta = critical_exponent(&d, 24, 1e-13).unwrap();
        assert!(delta > 0.0 && delta < 0.5, "{delta}");
        assert!(pressure(&d, delta, 24).unwrap().abs() < 1e-8);
    }

    #[test]
    fn pressure_decreasing_convex() {
        let d = SchottkyData::sl2z_dense().unwrap();
        let sig: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let c = pressure_curve(&d, &sig, 16, 1e-12).unwrap();
        assert!(c.is_decreasing());
        assert!(c.is_convex(1e-9));
    }
}
