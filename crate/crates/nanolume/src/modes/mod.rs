//! Analytic step-index cylindrical waveguide solver for the nanowire.
//!
//! The fundamental HE₁₁ hybrid mode is the root of the full-vector
//! characteristic equation at azimuthal order m = 1,
//!
//! ```text
//! (J₁'/(u J₁) + K₁'/(w K₁)) (J₁'/(u J₁) + (n₂/n₁)² K₁'/(w K₁))
//!     = (n_eff/n₁)² (1/u² + 1/w²)²
//! ```
//!
//! with u = k₀a√(n₁²−n_eff²), w = k₀a√(n_eff²−n₂²), u²+w² = V². The root
//! with the largest n_eff is HE₁₁; it exists at every V. The residual is
//! normalized by the dominant term so the reported tolerance is meaningful
//! across the whole V range (the raw terms scale like 1/u⁴).

pub mod bessel;

pub use bessel::{bessel_kernel, BesselEval, BesselKind};

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModesError {
    #[error("bessel kernel supports orders 0 and 1, got {0}")]
    UnsupportedOrder(u8),
    #[error("bessel argument out of domain: {0}")]
    BadArgument(f64),
    #[error("invalid waveguide spec: {0}")]
    InvalidSpec(&'static str),
    #[error("no sign change of the characteristic equation in (n_clad, n_core)")]
    NoSignChange,
    #[error("root refinement stalled with residual {residual:.3e}")]
    RefinementFailed { residual: f64 },
}

/// Step-index cylinder: core radius, indices, free-space wavelength.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveguideSpec {
    pub radius_nm: f64,
    pub n_core: f64,
    pub n_clad: f64,
    pub wavelength_nm: f64,
}

impl WaveguideSpec {
    pub fn validate(&self) -> Result<(), ModesError> {
        if !(self.radius_nm > 0.0) || !self.radius_nm.is_finite() {
            return Err(ModesError::InvalidSpec("radius must be positive"));
        }
        if !(self.wavelength_nm > 0.0) || !self.wavelength_nm.is_finite() {
            return Err(ModesError::InvalidSpec("wavelength must be positive"));
        }
        if !(self.n_core > self.n_clad) || !(self.n_clad >= 1.0) {
            return Err(ModesError::InvalidSpec(
                "need n_core > n_clad >= 1 for a guided mode",
            ));
        }
        Ok(())
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength_nm
    }
}

/// A solved guided mode.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModeSolution {
    pub n_eff: f64,
    /// Propagation constant β = 2π n_eff / λ (1/nm).
    pub beta_per_nm: f64,
    /// Transverse core parameter u = k₀a√(n_core² − n_eff²).
    pub u: f64,
    /// Transverse cladding decay parameter w = k₀a√(n_eff² − n_clad²).
    /// Carries the full root location even when n_eff − n_clad underflows.
    pub w: f64,
    pub azimuthal_order: u32,
    pub label: &'static str,
    /// Set when n_eff sits within 1e-9 of the cladding index.
    pub near_cutoff: bool,
}

/// Normalized frequency V = (2πa/λ)·√(n_core² − n_clad²).
pub fn v_number(spec: &WaveguideSpec) -> f64 {
    spec.k0() * spec.radius_nm * (spec.n_core * spec.n_core - spec.n_clad * spec.n_clad).sqrt()
}

/// Normalized characteristic function at transverse parameter u ∈ (0, V).
/// Returns NaN where the terms are not finite (J₁ pole); genuine roots are
/// the only sign changes because the product form diverges to +∞ at poles.
fn char_eq(spec: &WaveguideSpec, v: f64, u: f64) -> f64 {
    let w2 = v * v - u * u;
    if w2 <= 0.0 || u <= 0.0 {
        return f64::NAN;
    }
    let w = w2.sqrt();
    let j1 = bessel::j1(u);
    let j1p = bessel::j0(u) - j1 / u;
    let (k0s, k1s) = bessel::k01_scaled(w);
    let k1p = -k0s - k1s / w;
    let a = j1p / (u * j1);
    let b = k1p / (w * k1s);
    let ratio = (spec.n_clad / spec.n_core) * (spec.n_clad / spec.n_core);
    let lhs = (a + b) * (a + ratio * b);
    let n_eff2 = spec.n_core * spec.n_core - (u / (spec.k0() * spec.radius_nm)).powi(2);
    let inv = 1.0 / (u * u) + 1.0 / w2;
    let rhs = n_eff2 / (spec.n_core * spec.n_core) * inv * inv;
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    (lhs - rhs) / scale
}

fn n_eff_of_u(spec: &WaveguideSpec, u: f64) -> f64 {
    let x = u / (spec.k0() * spec.radius_nm);
    (spec.n_core * spec.n_core - x * x).sqrt()
}

/// Cutoff-stable characteristic function: the original equation multiplied
/// by w² with the 1/w⁴ and 1/w² divergences cancelled symbolically via
/// K₁' = −K₀ − K₁/w and B = −L − 1/w², L = K₀/(wK₁). Exact algebraic
/// rearrangement, so the roots coincide with [`char_eq`]; unlike it, this
/// form stays numerically meaningful down to w ~ 1e-15.
fn char_eq_cutoff(spec: &WaveguideSpec, v: f64, w: f64) -> f64 {
    let u2 = v * v - w * w;
    if u2 <= 0.0 || w <= 0.0 {
        return f64::NAN;
    }
    let u = u2.sqrt();
    let j1 = bessel::j1(u);
    let j1p = bessel::j0(u) - j1 / u;
    let a = j1p / (u * j1);
    let (k0s, k1s) = bessel::k01_scaled(w);
    let l = k0s / (w * k1s);
    let n1sq = spec.n_core * spec.n_core;
    let ratio = spec.n_clad * spec.n_clad / n1sq;
    let s = 1.0 / (spec.k0() * spec.radius_nm).powi(2);
    let finite =
        (a - l) * (a - ratio * l) - ratio / (u2 * u2) - 2.0 * s / (n1sq * u2)
            - s * w * w / (n1sq * u2 * u2);
    let bracket = ratio * (a - l) + (a - ratio * l) + 2.0 * ratio / u2 + s / n1sq;
    let g = w * w * finite - bracket;
    let scale = (w * w * finite.abs())
        + (ratio * (a - l)).abs()
        + (a - ratio * l).abs()
        + 2.0 * ratio / u2
        + s / n1sq;
    g / scale.max(f64::MIN_POSITIVE)
}

/// Locate the HE₁₁ root: bracket by scanning u upward from the n_core side
/// (the first sign change is the largest-n_eff root), bisect, and verify
/// the normalized residual. A logarithmic scan in w picks up roots
/// exponentially close to cutoff at small V.
pub fn solve_he11(spec: &WaveguideSpec) -> Result<ModeSolution, ModesError> {
    spec.validate()?;
    let v = v_number(spec);
    // HE11 always has u below the first J1 pole at 3.83; capping the scan
    // keeps huge-V cases cheap and excludes higher m = 1 roots.
    let u_hi = (v * (1.0 - 1e-12)).min(3.8);
    // The 1/u⁴ leading terms cancel analytically as u → 0; below ~1e-3 the
    // normalized difference drops under f64 noise and fake sign flips
    // appear. The genuine root always sits well above this floor.
    let u_lo = 1e-3_f64.min(0.3 * u_hi);
    let f = |u: f64| char_eq(spec, v, u);

    let mut bracket: Option<(f64, f64)> = None;
    let n_scan = 2000;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n_scan {
        let u = u_lo + (u_hi - u_lo) * i as f64 / n_scan as f64;
        let fu = f(u);
        if !fu.is_finite() {
            prev = None;
            continue;
        }
        if let Some((pu, pf)) = prev {
            if pf == 0.0 {
                bracket = Some((pu, pu));
                break;
            }
            if pf * fu < 0.0 {
                bracket = Some((pu, u));
                break;
            }
        }
        prev = Some((u, fu));
    }
    if let Some((lo0, hi0)) = bracket {
        let (mut lo, mut hi) = (lo0, hi0);
        let mut flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = f(mid);
            if !fm.is_finite() {
                // Nudge off the pole by shrinking toward the low side.
                hi = mid;
                continue;
            }
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        let u_root = 0.5 * (lo + hi);
        let residual = f(u_root);
        if !(residual.abs() < 1e-12) {
            return Err(ModesError::RefinementFailed {
                residual: residual.abs(),
            });
        }
        let n_eff = n_eff_of_u(spec, u_root);
        let w_root = (v * v - u_root * u_root).max(0.0).sqrt();
        return Ok(ModeSolution {
            n_eff,
            beta_per_nm: 2.0 * PI * n_eff / spec.wavelength_nm,
            u: u_root,
            w: w_root,
            azimuthal_order: 1,
            label: "HE11",
            near_cutoff: n_eff - spec.n_clad < 1e-9,
        });
    }

    // No crossing in the main range: the root is exponentially close to
    // cutoff. Hunt it in log-w with the cancellation-free form.
    let g = |lw: f64| char_eq_cutoff(spec, v, lw.exp());
    let (lw_hi, lw_lo) = ((v * 0.7).ln(), (1e-30_f64).ln());
    let mut wbracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=4000 {
        let lw = lw_hi + (lw_lo - lw_hi) * i as f64 / 4000.0;
        let gv = g(lw);
        if !gv.is_finite() {
            prev = None;
            continue;
        }
        if let Some((plw, pg)) = prev {
            if pg * gv < 0.0 {
                wbracket = Some((lw, plw));
                break;
            }
        }
        prev = Some((lw, gv));
    }
    let (mut lo, mut hi) = wbracket.ok_or(ModesError::NoSignChange)?;
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if glo * gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    let w_root = (0.5 * (lo + hi)).exp();
    let residual = g(0.5 * (lo + hi));
    if !(residual.abs() < 1e-12) {
        return Err(ModesError::RefinementFailed {
            residual: residual.abs(),
        });
    }
    let u_root = (v * v - w_root * w_root).sqrt();
    let sq = 1.0 / (spec.k0() * spec.radius_nm);
    let n_eff = (spec.n_clad * spec.n_clad + (w_root * sq) * (w_root * sq)).sqrt();
    Ok(ModeSolution {
        n_eff,
        beta_per_nm: 2.0 * PI * n_eff / spec.wavelength_nm,
        u: u_root,
        w: w_root,
        azimuthal_order: 1,
        label: "HE11",
        near_cutoff: n_eff - spec.n_clad < 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn paper_geometry() -> WaveguideSpec {
        WaveguideSpec {
            radius_nm: 100.0,
            n_core: 2.4,
            n_clad: 1.0,
            wavelength_nm: 637.0,
        }
    }

    #[test]
    fn v_number_direct_arithmetic() {
        // (2π·100/637)·√(5.76−1), carried out independently of v_number.
        let manual = 2.0 * PI * 100.0 / 637.0 * (2.4_f64 * 2.4 - 1.0).sqrt();
        let v = v_number(&paper_geometry());
        assert_abs_diff_eq!(v, manual, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 2.1520081531846493, epsilon = 1e-12);
    }

    #[test]
    fn v_number_vanishes_without_contrast() {
        let spec = WaveguideSpec {
            n_clad: 2.4 - 1e-12,
            ..paper_geometry()
        };
        assert!(v_number(&spec) < 1e-5);
    }

    #[test]
    fn he11_root_for_paper_geometry() {
        let m = solve_he11(&paper_geometry()).unwrap();
        assert!(m.n_eff > 1.0 && m.n_eff < 2.4);
        assert!(!m.near_cutoff);
        assert_abs_diff_eq!(m.beta_per_nm, 2.0 * PI * m.n_eff / 637.0, epsilon = 1e-15);
        // Sanity anchor; the independent finite-difference cross-check lives
        // in the integration suite.
        assert_abs_diff_eq!(m.n_eff, 1.405, epsilon = 2e-3);
    }

    #[test]
    fn plane_wave_limit_at_huge_radius() {
        let spec = WaveguideSpec {
            radius_nm: 50.0 * 637.0,
            ..paper_geometry()
        };
        let m = solve_he11(&spec).unwrap();
        assert!(
            (m.n_eff - 2.4).abs() < 1e-3,
            "n_eff {} far from core index",
            m.n_eff
        );
    }

    #[test]
    fn fundamental_mode_survives_at_tiny_radius() {
        // No cutoff: at a = 20 nm (V = 0.43) the root still exists but sits
        // exponentially close to the cladding line — n_eff − n_clad is below
        // one f64 ulp (60-digit arithmetic puts it near 4e-17), so the exact
        // w is conditioned on the last digit of V. What must hold: a root is
        // found, deep inside the flag zone, with w carried explicitly.
        let spec = WaveguideSpec {
            radius_nm: 20.0,
            ..paper_geometry()
        };
        let m = solve_he11(&spec).unwrap();
        assert!(m.near_cutoff);
        assert!(m.w > 0.0 && m.w < 1e-6, "w = {:.3e}", m.w);
        assert!(m.n_eff >= 1.0 && m.n_eff < 1.01);
    }

    #[test]
    fn residual_at_root_is_small() {
        for radius in [60.0, 100.0, 180.0, 320.0] {
            let spec = WaveguideSpec {
                radius_nm: radius,
                ..paper_geometry()
            };
            let v = v_number(&spec);
            let m = solve_he11(&spec).unwrap();
            let u = spec.k0() * spec.radius_nm
                * (spec.n_core * spec.n_core - m.n_eff * m.n_eff).sqrt();
            let res = char_eq(&spec, v, u).abs();
            assert!(res < 1e-10, "residual {res:.2e} at a = {radius}");
        }
    }

    #[test]
    fn n_eff_increases_with_radius() {
        let mut last = 0.0;
        for a in (50..=400).step_by(1) {
            let spec = WaveguideSpec {
                radius_nm: a as f64,
                ..paper_geometry()
            };
            let m = solve_he11(&spec).unwrap();
            assert!(
                m.n_eff > last,
                "monotonicity broke at a = {a}: {} <= {last}",
                m.n_eff
            );
            last = m.n_eff;
        }
    }

    #[test]
    fn n_eff_decreases_with_wavelength() {
        let mut last = f64::INFINITY;
        for lam in (600..=800).step_by(1) {
            let spec = WaveguideSpec {
                wavelength_nm: lam as f64,
                ..paper_geometry()
            };
            let m = solve_he11(&spec).unwrap();
            assert!(
                m.n_eff < last,
                "monotonicity broke at lambda = {lam}: {} >= {last}",
                m.n_eff
            );
            last = m.n_eff;
        }
    }

    #[test]
    fn rejects_inverted_indices() {
        let spec = WaveguideSpec {
            n_core: 1.0,
            n_clad: 2.4,
            ..paper_geometry()
        };
        assert!(solve_he11(&spec).is_err());
    }
}
