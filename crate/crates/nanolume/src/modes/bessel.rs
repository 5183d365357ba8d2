//! Bessel kernel for the waveguide characteristic equation: J₀, J₁ of the
//! first kind and K₀, K₁ modified of the second kind, with derivatives.
//!
//! J uses the power series below x = 12 and the integral representation
//! J_m(x) = (1/π)∫₀^π cos(mθ − x sinθ) dθ by midpoint rule above it; the
//! rule is exact up to the aliased orders J_{m±2N}, which are below f64
//! noise for x ≤ 50 at N = 256 samples. K comes from the doubly-exponential
//! tail integral e^x K_m(x) = ∫₀^∞ e^{-x(cosh t − 1)} cosh(mt) dt on a
//! trapezoid grid; computing the e^x-scaled value keeps the large-x regime
//! exact, and the unscaled value is reconstructed whenever it is
//! representable. Relative accuracy is ~1e-14 over x ∈ (0, 50].

use super::ModesError;

const J_SERIES_CUTOFF: f64 = 12.0;
const J_QUADRATURE_POINTS: usize = 256;
const K_TRAPEZOID_STEP: f64 = 0.05;
/// Above this argument e^{-x} underflows toward the subnormal range and K
/// switches to the scaled-value channel.
const K_SCALE_CUTOFF: f64 = 600.0;

/// Which Bessel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// First kind, J_m.
    J,
    /// Modified second kind, K_m.
    K,
}

/// Value and derivative, with an exponent channel: the represented numbers
/// are `value·exp(log_scale)` and `derivative·exp(log_scale)`.
/// `log_scale` is zero everywhere except deep in the K decay (x > 600).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub value: f64,
    pub derivative: f64,
    pub log_scale: f64,
}

fn j_series(order: u8, x: f64) -> f64 {
    let xh = 0.5 * x;
    let mut term = if order == 0 { 1.0 } else { xh };
    let mut sum = term;
    let x2 = xh * xh;
    for k in 1..80u32 {
        term *= -x2 / (k as f64 * (k as f64 + order as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

fn j_quadrature(order: u8, x: f64) -> f64 {
    let n = J_QUADRATURE_POINTS;
    let m = order as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let theta = (i as f64 + 0.5) * std::f64::consts::PI / n as f64;
        sum += (m * theta - x * theta.sin()).cos();
    }
    sum / n as f64
}

pub(crate) fn j0(x: f64) -> f64 {
    if x <= J_SERIES_CUTOFF {
        j_series(0, x)
    } else {
        j_quadrature(0, x)
    }
}

pub(crate) fn j1(x: f64) -> f64 {
    if x <= J_SERIES_CUTOFF {
        j_series(1, x)
    } else {
        j_quadrature(1, x)
    }
}

/// (e^x K₀(x), e^x K₁(x)) from the shared tail integral.
pub(crate) fn k01_scaled(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    let h = K_TRAPEZOID_STEP;
    // t = 0 endpoint with trapezoid half weight: integrand is 1 for both.
    let mut s0 = 0.5;
    let mut s1 = 0.5;
    let mut t = h;
    loop {
        let c = t.cosh();
        let expo = x * (c - 1.0);
        if expo > 745.0 {
            break;
        }
        let e = (-expo).exp();
        s0 += e;
        s1 += e * c;
        if e * c < 1e-18 * s1 {
            break;
        }
        t += h;
    }
    (s0 * h, s1 * h)
}

/// Evaluate the kernel for order m ∈ {0, 1}. Preconditions: x ≥ 0 for J,
/// x > 0 for K.
pub fn bessel_kernel(order: u8, kind: BesselKind, x: f64) -> Result<BesselEval, ModesError> {
    if order > 1 {
        return Err(ModesError::UnsupportedOrder(order));
    }
    if !x.is_finite() {
        return Err(ModesError::BadArgument(x));
    }
    match kind {
        BesselKind::J => {
            if x < 0.0 {
                return Err(ModesError::BadArgument(x));
            }
            let (value, derivative) = if order == 0 {
                (j0(x), -j1(x))
            } else if x == 0.0 {
                (0.0, 0.5)
            } else {
                let v = j1(x);
                (v, j0(x) - v / x)
            };
            Ok(BesselEval {
                value,
                derivative,
                log_scale: 0.0,
            })
        }
        BesselKind::K => {
            if x <= 0.0 {
                return Err(ModesError::BadArgument(x));
            }
            let (k0s, k1s) = k01_scaled(x);
            // K0' = -K1 ; K1' = -K0 - K1/x (identical under the e^x scale).
            let (vs, ds) = if order == 0 {
                (k0s, -k1s)
            } else {
                (k1s, -k0s - k1s / x)
            };
            if x > K_SCALE_CUTOFF {
                Ok(BesselEval {
                    value: vs,
                    derivative: ds,
                    log_scale: -x,
                })
            } else {
                let e = (-x).exp();
                Ok(BesselEval {
                    value: vs * e,
                    derivative: ds * e,
                    log_scale: 0.0,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arithmetic (mpmath).
    const J0_REF: [(f64, f64); 6] = [
        (0.25, 0.9844359292958527),
        (1.0, 0.76519768655796655),
        (5.0, -0.1775967713143383),
        (12.0, 0.047689310796833537),
        (30.0, -0.086367983581040211),
        (50.0, 0.055812327669251815),
    ];
    const J1_REF: [(f64, f64); 6] = [
        (0.25, 0.12402597732272692),
        (1.0, 0.44005058574493352),
        (5.0, -0.32757913759146522),
        (12.0, -0.22344710449062761),
        (30.0, -0.11875106261662294),
        (50.0, -0.097511828125175138),
    ];
    const K0_REF: [(f64, f64); 6] = [
        (0.25, 1.5415067512483028),
        (1.0, 0.42102443824070833),
        (5.0, 0.0036910983340425943),
        (12.0, 2.2008253973114914e-6),
        (30.0, 2.1324774964630564e-14),
        (50.0, 3.4101677497894955e-23),
    ];
    const K1_REF: [(f64, f64); 6] = [
        (0.25, 3.7470259744407116),
        (1.0, 0.60190723019723457),
        (5.0, 0.0040446134454521642),
        (12.0, 2.2907574647671878e-6),
        (30.0, 2.1677320018915494e-14),
        (50.0, 3.4441022267175556e-23),
    ];

    fn check(kind: BesselKind, order: u8, table: &[(f64, f64)]) {
        for &(x, want) in table {
            let got = bessel_kernel(order, kind, x).unwrap();
            assert_eq!(got.log_scale, 0.0);
            let rel = ((got.value - want) / want).abs();
            assert!(
                rel < 1e-10,
                "{kind:?}{order}({x}) = {} vs {want}, rel {rel:.2e}",
                got.value
            );
        }
    }

    #[test]
    fn matches_reference_tables() {
        check(BesselKind::J, 0, &J0_REF);
        check(BesselKind::J, 1, &J1_REF);
        check(BesselKind::K, 0, &K0_REF);
        check(BesselKind::K, 1, &K1_REF);
    }

    #[test]
    fn j_values_at_origin() {
        let j0 = bessel_kernel(0, BesselKind::J, 0.0).unwrap();
        let j1 = bessel_kernel(1, BesselKind::J, 0.0).unwrap();
        assert_eq!(j0.value, 1.0);
        assert_eq!(j1.value, 0.0);
        assert_eq!(j1.derivative, 0.5);
    }

    #[test]
    fn derivative_identity_j0_prime_is_minus_j1() {
        for x in [0.1, 0.7, 2.404825557695773, 9.3, 17.0, 41.5] {
            let d = bessel_kernel(0, BesselKind::J, x).unwrap().derivative;
            let j1v = bessel_kernel(1, BesselKind::J, x).unwrap().value;
            assert!(
                (d + j1v).abs() < 1e-12,
                "J0'({x}) = {d} vs -J1 = {}",
                -j1v
            );
        }
    }

    #[test]
    fn series_and_quadrature_paths_agree_at_the_seam() {
        for x in [11.5, 11.9, 12.0] {
            for order in [0u8, 1] {
                let s = j_series(order, x);
                let q = j_quadrature(order, x);
                assert!(
                    (s - q).abs() < 1e-11,
                    "J{order}({x}) series {s} vs quadrature {q}"
                );
            }
        }
    }

    #[test]
    fn k_wronskian_identity() {
        // K0'(x) K1(x)... use K1 K0' - K0 K1' = K1² + K0 K1/x + ... instead
        // verify the raw identity K1'(x) = -K0 - K1/x against a central
        // difference of the returned K1 values.
        for x in [0.5, 1.0, 3.0, 10.0, 30.0] {
            let h = 1e-5 * x;
            let up = bessel_kernel(1, BesselKind::K, x + h).unwrap().value;
            let dn = bessel_kernel(1, BesselKind::K, x - h).unwrap().value;
            let fd = (up - dn) / (2.0 * h);
            let d = bessel_kernel(1, BesselKind::K, x).unwrap().derivative;
            let rel = ((fd - d) / d).abs();
            assert!(rel < 1e-6, "K1'({x}) {d} vs finite diff {fd}");
        }
    }

    #[test]
    fn k_overflow_region_uses_exponent_channel() {
        let big = bessel_kernel(0, BesselKind::K, 800.0).unwrap();
        assert_eq!(big.log_scale, -800.0);
        // e^x K0(x) ~ sqrt(pi/(2x)) at large x.
        let asym = (std::f64::consts::PI / (2.0 * 800.0)).sqrt();
        assert!(
            ((big.value - asym) / asym).abs() < 1e-3,
            "scaled K0(800) = {} vs asymptote {asym}",
            big.value
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bessel_kernel(2, BesselKind::J, 1.0).is_err());
        assert!(bessel_kernel(0, BesselKind::J, -1.0).is_err());
        assert!(bessel_kernel(0, BesselKind::K, 0.0).is_err());
        assert!(bessel_kernel(0, BesselKind::K, f64::NAN).is_err());
    }
}
