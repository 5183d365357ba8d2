//! The three fitting procedures of the measurement chain.
//!
//! g²(τ) histograms are fitted with the three-level model diluted by the
//! signal fraction ρ: g²_meas = 1 + ρ²(g²_ideal − 1). Saturation data are
//! fitted in two stages (linear background off-device, then the L-L knee).
//! The lifetime comes from a weighted linear extrapolation of the g² decay
//! rate to zero pump power.

use super::engine::{
    least_squares_multistart, FitError, FitFlag, FitOptions, FitResult, Transform,
};
use crate::emitter::{g2_analytic, EmitterParams};
use crate::hbt::{normalize, CorrelationHistogram};

/// Three-level kinetics plus the signal fraction ρ of the detected light.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct G2Model {
    pub params: EmitterParams,
    /// Fraction of detected counts coming from the emitter, ρ ∈ [0, 1].
    pub signal_fraction: f64,
}

impl G2Model {
    /// Background-diluted g²: 1 + ρ²(g²_ideal(τ) − 1).
    pub fn evaluate(&self, tau_ns: f64) -> f64 {
        let rho2 = self.signal_fraction * self.signal_fraction;
        match g2_analytic(&self.params, tau_ns) {
            Ok(ideal) => 1.0 + rho2 * (ideal - 1.0),
            Err(_) => f64::NAN,
        }
    }
}

/// Outcome of [`fit_g2`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct G2FitOutcome {
    pub model: G2Model,
    pub fit: FitResult,
    /// g²_meas(0) of the fitted model.
    pub g2_zero: f64,
}

fn model_vector(m: &G2Model) -> [f64; 5] {
    [
        m.params.pump_rate,
        m.params.radiative_rate,
        m.params.shelving_rate,
        m.params.deshelving_rate,
        m.signal_fraction,
    ]
}

fn vector_model(p: &[f64]) -> G2Model {
    G2Model {
        params: EmitterParams {
            pump_rate: p[0],
            radiative_rate: p[1],
            shelving_rate: p[2],
            deshelving_rate: p[3],
        },
        signal_fraction: p[4],
    }
}

/// Starting point heuristics: ρ from the dip depth, the overall rate from
/// the dip width, the shelf rates from the shoulder if one is visible.
fn auto_guess(tau: &[f64], g2: &[f64]) -> G2Model {
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for &g in g2 {
        g_min = g_min.min(g);
        g_max = g_max.max(g);
    }
    let depth = (1.0 - g_min).clamp(0.05, 1.0);
    let rho = depth.sqrt().clamp(0.1, 0.999);
    // Width: first |τ| where the dip has recovered to 1 - depth/e.
    let target = 1.0 - depth * (1.0 - 1.0 / std::f64::consts::E);
    let mut tau_e = f64::NAN;
    let mut order: Vec<usize> = (0..tau.len()).collect();
    order.sort_by(|&a, &b| tau[a].abs().total_cmp(&tau[b].abs()));
    for &i in &order {
        if g2[i] >= target && tau[i].abs() > 0.0 {
            tau_e = tau[i].abs();
            break;
        }
    }
    let total_rate = if tau_e.is_finite() { 1.0 / tau_e } else { 0.05 };
    let gamma = 0.8 * total_rate;
    let pump = 0.2 * total_rate;
    let (k23, k31) = if g_max > 1.02 {
        let shoulder = g_max - 1.0;
        let k31 = total_rate / 50.0;
        (
            (shoulder * k31 * total_rate / pump).clamp(1e-6, total_rate),
            k31,
        )
    } else {
        (0.02 * gamma, 0.01 * gamma)
    };
    G2Model {
        params: EmitterParams {
            pump_rate: pump,
            radiative_rate: gamma,
            shelving_rate: k23,
            deshelving_rate: k31,
        },
        signal_fraction: rho,
    }
}

/// Fit the diluted three-level model to a coincidence histogram.
///
/// Weights are the Poisson errors from normalization; empty bins get the
/// one-count floor. Multi-start (8 jittered guesses) around `guess` or the
/// automatic starting point.
pub fn fit_g2(
    hist: &CorrelationHistogram,
    guess: Option<G2Model>,
) -> Result<G2FitOutcome, FitError> {
    let est = normalize(hist)?;
    let scale = est
        .tau_ns
        .iter()
        .zip(hist.counts.iter())
        .find(|_| true)
        .map(|_| hist.acquisition_time_ns
            / (hist.n1 as f64 * hist.n2 as f64 * hist.bin_width_ns))
        .unwrap_or(1.0);
    let sigma_floor = scale; // one count
    let data: Vec<(f64, f64, f64)> = est
        .tau_ns
        .iter()
        .zip(est.g2.iter().zip(&est.g2_err))
        .map(|(&t, (&g, &e))| (t, g, e.max(sigma_floor)))
        .collect();
    let start = guess.unwrap_or_else(|| auto_guess(&est.tau_ns, &est.g2));
    let transforms = [
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::Logit01,
    ];
    let fit = least_squares_multistart(
        |p, tau| vector_model(p).evaluate(tau),
        &data,
        &model_vector(&start),
        &transforms,
        &FitOptions::default(),
        8,
        hist.n1 ^ hist.n2,
    )?;
    let model = vector_model(&fit.params);
    let g2_zero = model.evaluate(0.0);
    Ok(G2FitOutcome {
        model,
        fit,
        g2_zero,
    })
}

/// Saturation fit result: I(P) = I_sat·P/(P + P_sat) + bg_slope·P.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SaturationFit {
    /// Saturated count rate (counts/s).
    pub i_sat: f64,
    /// Saturation power (µW).
    pub p_sat: f64,
    /// Linear background slope (counts/s/µW) from the off-device points.
    pub bg_slope: f64,
    pub fit: FitResult,
}

/// Two-stage L-L fit: linear regression through the origin on the
/// off-device background points, then the knee fit on net counts.
///
/// Flags [`FitFlag::IllConditioned`] when all powers sit far below the
/// fitted knee (P_max < P_sat/10).
pub fn fit_saturation(
    on_device: &[(f64, f64)],
    background: &[(f64, f64)],
) -> Result<SaturationFit, FitError> {
    if on_device.len() < 3 {
        return Err(FitError::NotEnoughData {
            need: 3,
            got: on_device.len(),
            params: 2,
        });
    }
    let bg_slope = if background.is_empty() {
        0.0
    } else {
        let sxy: f64 = background.iter().map(|(p, y)| p * y).sum();
        let sxx: f64 = background.iter().map(|(p, _)| p * p).sum();
        if sxx <= 0.0 {
            return Err(FitError::SingularDesign("background powers are all zero"));
        }
        sxy / sxx
    };
    let net: Vec<(f64, f64, f64)> = on_device
        .iter()
        .map(|(p, y)| (*p, y - bg_slope * p, 1.0))
        .collect();

    let i_max = net.iter().map(|(_, y, _)| *y).fold(f64::MIN, f64::max);
    let half = i_max / 2.0;
    let p_half = net
        .iter()
        .find(|(_, y, _)| *y >= half)
        .map(|(p, _, _)| *p)
        .unwrap_or(net[net.len() / 2].0);
    let guess = [i_max.max(1.0) * 1.2, p_half.max(1e-3)];

    let fit = least_squares_multistart(
        |p, x| p[0] * x / (x + p[1]),
        &net,
        &guess,
        &[Transform::LogPositive, Transform::LogPositive],
        &FitOptions::default(),
        8,
        on_device.len() as u64,
    )?;
    let mut fit = fit;
    let (i_sat, p_sat) = (fit.params[0], fit.params[1]);
    let p_max = on_device.iter().map(|(p, _)| *p).fold(f64::MIN, f64::max);
    if p_max < p_sat / 10.0 {
        fit.flags.push(FitFlag::IllConditioned);
    }
    Ok(SaturationFit {
        i_sat,
        p_sat,
        bg_slope,
        fit,
    })
}

/// Zero-power lifetime extrapolation from (P, R, σ_R) samples of the g²
/// decay rate: weighted linear fit R = Γ + σ_pump·P, lifetime 1/Γ.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LifetimeFit {
    /// Zero-power intercept Γ (1/ns).
    pub gamma: f64,
    pub gamma_err: f64,
    /// Pump-rate slope (1/ns/µW).
    pub slope: f64,
    pub slope_err: f64,
    /// 1/Γ (ns) with the intercept error propagated.
    pub lifetime_ns: f64,
    pub lifetime_err_ns: f64,
    pub fit: FitResult,
}

pub fn fit_lifetime(points: &[(f64, f64, f64)]) -> Result<LifetimeFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::NotEnoughData {
            need: 2,
            got: points.len(),
            params: 2,
        });
    }
    if points.iter().any(|(_, _, s)| !(*s > 0.0) || !s.is_finite()) {
        return Err(FitError::BadSigma);
    }
    // Closed-form weighted linear regression.
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y, sig) in points {
        let w = 1.0 / (sig * sig);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let scale = (s * sxx).abs().max(sx * sx);
    if det.abs() < 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(FitError::SingularDesign(
            "all pump powers identical: intercept and slope degenerate",
        ));
    }
    let gamma = (sxx * sy - sx * sxy) / det;
    let slope = (s * sxy - sx * sy) / det;
    let gamma_var = sxx / det;
    let slope_var = s / det;
    let cov_gs = -sx / det;
    let chi2: f64 = points
        .iter()
        .map(|(x, y, sig)| {
            let r = (gamma + slope * x - y) / sig;
            r * r
        })
        .sum();
    let mut flags = Vec::new();
    if gamma <= 0.0 {
        flags.push(FitFlag::Unphysical);
    }
    let lifetime_ns = 1.0 / gamma;
    let gamma_err = gamma_var.sqrt();
    let lifetime_err_ns = gamma_err / (gamma * gamma);
    let fit = FitResult {
        params: vec![gamma, slope],
        covariance: vec![vec![gamma_var, cov_gs], vec![cov_gs, slope_var]],
        chi2,
        residual_norm: chi2.sqrt(),
        iterations: 1,
        converged: true,
        chi2_trace: vec![chi2],
        flags,
    };
    Ok(LifetimeFit {
        gamma,
        gamma_err,
        slope,
        slope_err: slope_var.sqrt(),
        lifetime_ns,
        lifetime_err_ns,
        fit,
    })
}
