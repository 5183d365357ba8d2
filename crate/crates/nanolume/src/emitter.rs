//! Three-level photophysics of the emitter.
//!
//! Level scheme: ground (1), radiative excited state (2) and a long-lived
//! non-radiative shelf (3). Transitions: 1→2 pump at rate `r`, 2→1
//! radiative decay at rate `Γ`, 2→3 shelving at `k23`, 3→1 deshelving at
//! `k31`. No direct 1→3 or 3→2 paths. Rates are in 1/ns, times in ns.
//!
//! The second-order correlation follows from re-initializing the emitter
//! in the ground state at τ = 0 and propagating the rate equations:
//! g²(τ) = p₂(τ)/p₂(∞). The reduced 2×2 system in (p₂, p₃) is solved in
//! closed form through its eigenvalues; a fixed-step RK4 integrator of the
//! full 3×3 system is provided as an independent cross-check.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmitterError {
    #[error("rate {name} must be finite and non-negative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("radiative rate must be positive, got {0}")]
    NonPositiveRadiative(f64),
    #[error("no steady emission: excited-state steady population is zero")]
    ZeroSteadyEmission,
    #[error("tau must be finite, got {0}")]
    NonFiniteTau(f64),
    #[error("tau grid must be sorted and non-negative")]
    BadTauGrid,
    #[error("integration produced non-finite populations at t = {t_ns} ns")]
    UnstableIntegration { t_ns: f64 },
}

/// Kinetic rates of the three-level system, all in 1/ns.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmitterParams {
    /// Pump rate r (1→2).
    pub pump_rate: f64,
    /// Radiative decay rate Γ (2→1).
    pub radiative_rate: f64,
    /// Shelving rate k23 (2→3).
    pub shelving_rate: f64,
    /// Deshelving rate k31 (3→1).
    pub deshelving_rate: f64,
}

impl EmitterParams {
    pub fn new(
        pump_rate: f64,
        radiative_rate: f64,
        shelving_rate: f64,
        deshelving_rate: f64,
    ) -> Result<Self, EmitterError> {
        let p = Self {
            pump_rate,
            radiative_rate,
            shelving_rate,
            deshelving_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EmitterError> {
        for (name, value) in [
            ("pump_rate", self.pump_rate),
            ("radiative_rate", self.radiative_rate),
            ("shelving_rate", self.shelving_rate),
            ("deshelving_rate", self.deshelving_rate),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(EmitterError::InvalidRate { name, value });
            }
        }
        if self.radiative_rate <= 0.0 {
            return Err(EmitterError::NonPositiveRadiative(self.radiative_rate));
        }
        Ok(())
    }

    /// Same kinetics at a different pump rate.
    pub fn with_pump_rate(&self, pump_rate: f64) -> Self {
        Self { pump_rate, ..*self }
    }

    /// Generator matrix M of dp/dt = M p, column-ordered (ground, excited, shelf).
    pub fn rate_matrix(&self) -> [[f64; 3]; 3] {
        let (r, g, k23, k31) = (
            self.pump_rate,
            self.radiative_rate,
            self.shelving_rate,
            self.deshelving_rate,
        );
        [
            [-r, g, k31],
            [r, -(g + k23), 0.0],
            [0.0, k23, -k31],
        ]
    }

    fn max_rate(&self) -> f64 {
        self.pump_rate
            .max(self.radiative_rate)
            .max(self.shelving_rate)
            .max(self.deshelving_rate)
    }
}

/// Linear pump-power conversion r = sigma · P.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PumpModel {
    /// Pump rate per µW of optical power, 1/(ns·µW).
    pub sigma: f64,
}

impl PumpModel {
    pub fn new(sigma: f64) -> Result<Self, EmitterError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(EmitterError::InvalidRate {
                name: "sigma",
                value: sigma,
            });
        }
        Ok(Self { sigma })
    }

    /// Pump rate (1/ns) at optical power `power_uw` (µW).
    pub fn pump_rate(&self, power_uw: f64) -> f64 {
        self.sigma * power_uw
    }
}

/// Occupation probabilities of the three levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations {
    pub ground: f64,
    pub excited: f64,
    pub shelf: f64,
}

impl Populations {
    pub fn sum(&self) -> f64 {
        self.ground + self.excited + self.shelf
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ground, self.excited, self.shelf]
    }
}

/// Steady state of the rate equations: the normalized null vector of the
/// generator matrix.
pub fn steady_state(params: &EmitterParams) -> Result<Populations, EmitterError> {
    params.validate()?;
    let (r, g, k23, k31) = (
        params.pump_rate,
        params.radiative_rate,
        params.shelving_rate,
        params.deshelving_rate,
    );
    if r == 0.0 {
        // No pumping: everything relaxes to the ground state. This also
        // covers the degenerate r = 0, k31 = 0 null space.
        return Ok(Populations {
            ground: 1.0,
            excited: 0.0,
            shelf: 0.0,
        });
    }
    if k31 == 0.0 && k23 > 0.0 {
        // Absorbing shelf.
        return Ok(Populations {
            ground: 0.0,
            excited: 0.0,
            shelf: 1.0,
        });
    }
    let norm = (g + k23) * k31 + r * (k31 + k23);
    Ok(Populations {
        ground: (g + k23) * k31 / norm,
        excited: r * k31 / norm,
        shelf: r * k23 / norm,
    })
}

/// Eigenstructure of the reduced 2×2 system d(p₂,p₃)/dt = A (p₂,p₃) + b.
#[derive(Debug, Clone, Copy)]
struct Reduced {
    /// A = [[-a, -r], [k23, -d]] with a = r+Γ+k23, d = k31.
    a: f64,
    d: f64,
    r: f64,
    k23: f64,
    /// Half-trace of A (negative).
    alpha: f64,
    /// Discriminant (a-d)² - 4 r k23 of the eigenvalue pair λ = α ± √disc/2.
    disc: f64,
}

impl Reduced {
    fn of(params: &EmitterParams) -> Self {
        let a = params.pump_rate + params.radiative_rate + params.shelving_rate;
        let d = params.deshelving_rate;
        let r = params.pump_rate;
        let k23 = params.shelving_rate;
        Reduced {
            a,
            d,
            r,
            k23,
            alpha: -0.5 * (a + d),
            disc: (a - d) * (a - d) - 4.0 * r * k23,
        }
    }

    fn confluent(&self) -> bool {
        let trace = self.a + self.d;
        self.disc.abs() < 1e-14 * trace * trace
    }

    fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [-self.a * v[0] - self.r * v[1], self.k23 * v[0] - self.d * v[1]]
    }

    /// First component of exp(A t) v, for t ≥ 0.
    fn expm_first(&self, t: f64, v: [f64; 2]) -> f64 {
        let av = self.apply(v);
        if self.confluent() {
            // exp(At) = e^{αt} (I + t (A - αI))
            (v[0] + t * (av[0] - self.alpha * v[0])) * (self.alpha * t).exp()
        } else if self.disc > 0.0 {
            // Distinct real eigenvalues; Lagrange form keeps both exponents
            // non-positive so nothing overflows at large t.
            let s = 0.5 * self.disc.sqrt();
            let (l1, l2) = (self.alpha + s, self.alpha - s);
            ((l1 * t).exp() * (av[0] - l2 * v[0]) - (l2 * t).exp() * (av[0] - l1 * v[0]))
                / (l1 - l2)
        } else {
            // Complex pair α ± iω: damped oscillation, still real arithmetic.
            let w = 0.5 * (-self.disc).sqrt();
            let (c, s) = ((w * t).cos(), (w * t).sin());
            (self.alpha * t).exp() * (c * v[0] + s / w * (av[0] - self.alpha * v[0]))
        }
    }

    /// Eigenvalues when real-distinct, else None.
    fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        if self.confluent() || self.disc <= 0.0 {
            None
        } else {
            let s = 0.5 * self.disc.sqrt();
            Some((self.alpha + s, self.alpha - s))
        }
    }
}

/// Closed-form g²(τ) = p₂(|τ|)/p₂(∞) with the emitter re-initialized in the
/// ground state at τ = 0. Symmetric in τ; g²(0) = 0 exactly.
pub fn g2_analytic(params: &EmitterParams, tau_ns: f64) -> Result<f64, EmitterError> {
    params.validate()?;
    if !tau_ns.is_finite() {
        return Err(EmitterError::NonFiniteTau(tau_ns));
    }
    let ss = steady_state(params)?;
    if ss.excited <= 0.0 {
        return Err(EmitterError::ZeroSteadyEmission);
    }
    let red = Reduced::of(params);
    let v = [-ss.excited, -ss.shelf];
    let g2 = 1.0 + red.expm_first(tau_ns.abs(), v) / ss.excited;
    // Rounding guard: the exact expression is a probability ratio ≥ 0 but
    // can land a few ulp below zero near τ = 0.
    Ok(g2.max(0.0))
}

/// |λ₊| of the reduced system: the eigenvalue branch continuously connected
/// to r+Γ as k23 → 0, which sets the antibunching dip decay.
pub fn antibunching_rate(params: &EmitterParams) -> Result<f64, EmitterError> {
    params.validate()?;
    let red = Reduced::of(params);
    match red.real_eigenvalues() {
        Some((l1, l2)) => {
            // The branch that reduces to -(r+Γ+k23) when the off-diagonal
            // coupling r·k23 vanishes.
            if (l1 + red.a).abs() <= (l2 + red.a).abs() {
                Ok(l1.abs())
            } else {
                Ok(l2.abs())
            }
        }
        // Confluent or complex pair: a single decay envelope |α| remains.
        None => Ok(red.alpha.abs()),
    }
}

/// Saturation law I(P) = I_sat/(1 + P_sat/P) + bg_slope·P, evaluated as
/// I_sat·P/(P + P_sat) so that I(0) = 0 exactly.
pub fn saturation_curve(power_uw: f64, i_sat: f64, p_sat: f64, bg_slope: f64) -> f64 {
    debug_assert!(power_uw >= 0.0 && i_sat > 0.0 && p_sat > 0.0 && bg_slope >= 0.0);
    i_sat * power_uw / (power_uw + p_sat) + bg_slope * power_uw
}

/// Fixed-step RK4 integration of dp/dt = M p from `p0` over `t_ns`,
/// with step ≤ 0.01/max-rate. Used as the brute-force oracle.
pub fn integrate_populations(
    params: &EmitterParams,
    p0: Populations,
    t_ns: f64,
) -> Result<Populations, EmitterError> {
    params.validate()?;
    let m = params.rate_matrix();
    let mut p = p0.as_array();
    let h_max = 0.01 / params.max_rate().max(f64::MIN_POSITIVE);
    let n = (t_ns / h_max).ceil().max(1.0) as u64;
    let h = t_ns / n as f64;
    let deriv = |p: &[f64; 3]| -> [f64; 3] {
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    };
    for step in 0..n {
        let k1 = deriv(&p);
        let p2 = [
            p[0] + 0.5 * h * k1[0],
            p[1] + 0.5 * h * k1[1],
            p[2] + 0.5 * h * k1[2],
        ];
        let k2 = deriv(&p2);
        let p3 = [
            p[0] + 0.5 * h * k2[0],
            p[1] + 0.5 * h * k2[1],
            p[2] + 0.5 * h * k2[2],
        ];
        let k3 = deriv(&p3);
        let p4 = [p[0] + h * k3[0], p[1] + h * k3[1], p[2] + h * k3[2]];
        let k4 = deriv(&p4);
        for i in 0..3 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(EmitterError::UnstableIntegration {
                t_ns: (step + 1) as f64 * h,
            });
        }
    }
    Ok(Populations {
        ground: p[0],
        excited: p[1],
        shelf: p[2],
    })
}

/// Brute-force g²(τ) on a sorted non-negative grid: RK4 integration of the
/// full rate equations from the ground state, normalized by the closed-form
/// steady state. Independent of the eigenvalue path in [`g2_analytic`].
pub fn g2_ode_oracle(params: &EmitterParams, tau_grid: &[f64]) -> Result<Vec<f64>, EmitterError> {
    params.validate()?;
    if tau_grid.is_empty()
        || tau_grid[0] < 0.0
        || tau_grid.windows(2).any(|w| w[1] < w[0])
        || tau_grid.iter().any(|t| !t.is_finite())
    {
        return Err(EmitterError::BadTauGrid);
    }
    let ss = steady_state(params)?;
    if ss.excited <= 0.0 {
        return Err(EmitterError::ZeroSteadyEmission);
    }
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut p = Populations {
        ground: 1.0,
        excited: 0.0,
        shelf: 0.0,
    };
    let mut t = 0.0;
    for &tau in tau_grid {
        let dt = tau - t;
        if dt > 0.0 {
            p = integrate_populations(params, p, dt)?;
            t = tau;
        }
        out.push(p.excited / ss.excited);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn generic() -> EmitterParams {
        EmitterParams::new(0.05, 0.0714, 0.02, 0.002).unwrap()
    }

    #[test]
    fn steady_state_no_pump_is_ground() {
        let p = EmitterParams::new(0.0, 0.0714, 0.02, 0.002).unwrap();
        let ss = steady_state(&p).unwrap();
        assert_eq!(ss.as_array(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn steady_state_two_level_limit() {
        let (r, g) = (0.03, 0.0714);
        let p = EmitterParams::new(r, g, 0.0, 0.002).unwrap();
        let ss = steady_state(&p).unwrap();
        assert_abs_diff_eq!(ss.excited, r / (r + g), epsilon = 1e-14);
        assert_abs_diff_eq!(ss.shelf, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn steady_state_absorbing_shelf() {
        let p = EmitterParams::new(0.05, 0.0714, 0.02, 0.0).unwrap();
        let ss = steady_state(&p).unwrap();
        assert_eq!(ss.as_array(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn steady_state_matches_long_time_integration() {
        let p = generic();
        let ss = steady_state(&p).unwrap();
        let long = integrate_populations(
            &p,
            Populations {
                ground: 1.0,
                excited: 0.0,
                shelf: 0.0,
            },
            1e4,
        )
        .unwrap();
        for (a, b) in ss.as_array().iter().zip(long.as_array()) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(ss.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn steady_state_is_fixed_point_of_rate_matrix() {
        for p in [
            generic(),
            EmitterParams::new(0.5, 0.0714, 0.001, 0.08).unwrap(),
            EmitterParams::new(0.002, 0.2, 0.05, 0.0005).unwrap(),
        ] {
            let ss = steady_state(&p).unwrap().as_array();
            let m = p.rate_matrix();
            for row in m {
                let dot: f64 = row.iter().zip(ss).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-10, "rate-matrix residual {dot}");
            }
        }
    }

    #[test]
    fn rejects_non_finite_rates() {
        assert!(EmitterParams::new(f64::NAN, 0.1, 0.0, 0.0).is_err());
        assert!(EmitterParams::new(0.1, f64::INFINITY, 0.0, 0.0).is_err());
        assert!(EmitterParams::new(-0.1, 0.1, 0.0, 0.0).is_err());
        assert!(EmitterParams::new(0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn g2_is_zero_at_tau_zero_and_one_at_infinity() {
        let p = generic();
        assert_eq!(g2_analytic(&p, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(g2_analytic(&p, 1e7).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g2_analytic(&p, -1e7).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn g2_two_level_closed_form() {
        let (r, g) = (0.1, 0.0714);
        let p = EmitterParams::new(r, g, 0.0, 0.01).unwrap();
        for tau in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let expect = 1.0 - (-(r + g) * tau).exp();
            assert_abs_diff_eq!(g2_analytic(&p, tau).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn g2_matches_ode_oracle() {
        let p = generic();
        let grid: Vec<f64> = (0..=500).map(|i| i as f64).collect();
        let oracle = g2_ode_oracle(&p, &grid).unwrap();
        let mut worst = 0.0_f64;
        for (tau, o) in grid.iter().zip(&oracle) {
            let a = g2_analytic(&p, *tau).unwrap();
            worst = worst.max((a - o).abs());
        }
        assert!(worst < 1e-8, "max |analytic - oracle| = {worst:.3e}");
    }

    #[test]
    fn g2_matches_ode_oracle_in_oscillatory_regime() {
        // (a-d)^2 < 4 r k23: complex eigenvalue pair.
        let p = EmitterParams::new(1.0, 0.001, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let oracle = g2_ode_oracle(&p, &grid).unwrap();
        for (tau, o) in grid.iter().zip(&oracle) {
            let a = g2_analytic(&p, *tau).unwrap();
            assert_abs_diff_eq!(a, o, epsilon = 1e-8);
        }
    }

    #[test]
    fn g2_high_pump_shows_bunching() {
        let p = EmitterParams::new(0.714, 0.0714, 0.02, 0.002).unwrap();
        let max = (0..3000)
            .map(|i| g2_analytic(&p, i as f64).unwrap())
            .fold(f64::MIN, f64::max)
            ;
        assert!(max > 1.0, "expected bunching shoulder, max g2 = {max}");
    }

    #[test]
    fn g2_converges_to_two_level_as_deshelving_diverges() {
        let (r, g, k23) = (0.05, 0.0714, 0.02);
        let fast = EmitterParams::new(r, g, k23, 1e5).unwrap();
        for tau in [0.5, 2.0, 10.0, 50.0] {
            let two_level = 1.0 - (-(r + g + k23) * tau).exp();
            let got = g2_analytic(&fast, tau).unwrap();
            assert_abs_diff_eq!(got, two_level, epsilon = 1e-3);
        }
    }

    #[test]
    fn g2_errors_without_steady_emission() {
        let p = EmitterParams::new(0.0, 0.0714, 0.0, 0.0).unwrap();
        assert_eq!(
            g2_analytic(&p, 1.0).unwrap_err(),
            EmitterError::ZeroSteadyEmission
        );
        assert_eq!(
            g2_ode_oracle(&p, &[0.0, 1.0]).unwrap_err(),
            EmitterError::ZeroSteadyEmission
        );
    }

    #[test]
    fn ode_oracle_rejects_bad_grid() {
        let p = generic();
        assert_eq!(
            g2_ode_oracle(&p, &[1.0, 0.5]).unwrap_err(),
            EmitterError::BadTauGrid
        );
        assert_eq!(
            g2_ode_oracle(&p, &[-1.0, 0.5]).unwrap_err(),
            EmitterError::BadTauGrid
        );
    }

    #[test]
    fn antibunching_rate_two_level_is_exact() {
        let p = EmitterParams::new(0.05, 0.0714, 0.0, 0.002).unwrap();
        assert_eq!(antibunching_rate(&p).unwrap(), 0.05 + 0.0714);
    }

    #[test]
    fn antibunching_rate_zero_pump_approaches_gamma() {
        let p = EmitterParams::new(1e-6, 0.0714, 4e-4, 0.002).unwrap();
        let rate = antibunching_rate(&p).unwrap();
        let rel = (rate - 0.0714).abs() / 0.0714;
        assert!(rel < 0.01, "rate {rate} vs gamma 0.0714, rel {rel}");
    }

    #[test]
    fn saturation_curve_examples() {
        assert_abs_diff_eq!(saturation_curve(58.0, 168.0, 58.0, 0.0), 84.0);
        assert_abs_diff_eq!(
            saturation_curve(1e9, 168.0, 58.0, 0.0),
            168.0,
            epsilon = 1e-5
        );
        assert_eq!(saturation_curve(0.0, 168.0, 58.0, 3.0), 0.0);
    }

    #[test]
    fn pump_model_is_linear() {
        let pm = PumpModel::new(1.25e-3).unwrap();
        assert_abs_diff_eq!(pm.pump_rate(40.0), 0.05);
        assert!(PumpModel::new(0.0).is_err());
    }

    fn arb_params() -> impl Strategy<Value = EmitterParams> {
        (
            1e-4..0.5_f64,
            0.02..0.2_f64,
            5e-4..0.05_f64,
            5e-4..0.05_f64,
        )
            .prop_map(|(r, g, k23, k31)| EmitterParams::new(r, g, k23, k31).unwrap())
    }

    proptest! {
        #[test]
        fn g2_symmetric_and_nonnegative(p in arb_params(), tau in -500.0..500.0_f64) {
            let plus = g2_analytic(&p, tau).unwrap();
            let minus = g2_analytic(&p, -tau).unwrap();
            prop_assert_eq!(plus.to_bits(), minus.to_bits());
            prop_assert!(plus >= 0.0);
        }

        #[test]
        fn saturation_monotone_in_power(
            p1 in 0.0..500.0_f64,
            dp in 0.001..500.0_f64,
            i_sat in 1.0..300.0_f64,
            p_sat in 1.0..200.0_f64,
            bg in 0.0..5.0_f64,
        ) {
            let lo = saturation_curve(p1, i_sat, p_sat, bg);
            let hi = saturation_curve(p1 + dp, i_sat, p_sat, bg);
            prop_assert!(hi >= lo);
        }

        #[test]
        fn analytic_tracks_oracle_on_random_draws(p in arb_params()) {
            let grid: Vec<f64> = (0..60).map(|i| i as f64 * 2.5).collect();
            let oracle = g2_ode_oracle(&p, &grid).unwrap();
            for (tau, o) in grid.iter().zip(&oracle) {
                let a = g2_analytic(&p, *tau).unwrap();
                prop_assert!((a - o).abs() < 1e-8, "tau {} diff {:.2e}", tau, (a - o).abs());
            }
        }
    }
}
