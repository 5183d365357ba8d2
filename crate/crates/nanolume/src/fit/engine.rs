//! Damped Gauss–Newton (Levenberg–Marquardt) curve fitting.
//!
//! The solver works on transformed parameters: positive quantities are
//! fitted in log space, fractions through a logistic map, so box
//! constraints never enter the linear algebra. The Jacobian is numerical
//! (central differences, relative step 1e-6). Convergence: relative χ²
//! change < 1e-10 or step norm < 1e-12, capped at 500 iterations. Singular
//! normal equations are reported as non-convergence, never papered over.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} data points for {params} parameters, got {got}")]
    NotEnoughData {
        need: usize,
        got: usize,
        params: usize,
    },
    #[error("data sigma must be positive and finite")]
    BadSigma,
    #[error("singular design matrix: {0}")]
    SingularDesign(&'static str),
    #[error("histogram error: {0}")]
    Histogram(#[from] crate::hbt::HbtError),
    #[error("emitter error: {0}")]
    Emitter(#[from] crate::emitter::EmitterError),
}

/// Diagnostic flags attached to an otherwise usable result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FitFlag {
    /// Normal equations went singular; parameters are best-effort.
    SingularNormalEquations,
    /// Damping exhausted without an accepted step.
    StalledDamping,
    /// Data do not constrain the model (e.g. all powers far below the knee).
    IllConditioned,
    /// A physically meaningless parameter came out (e.g. negative decay
    /// intercept).
    Unphysical,
}

/// Per-parameter reparameterization used inside the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Free,
    /// p = exp(θ): keeps the parameter strictly positive.
    LogPositive,
    /// p = 1/(1+exp(-θ)): keeps the parameter strictly inside (0, 1).
    Logit01,
}

impl Transform {
    pub fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Free => p,
            Transform::LogPositive => p.max(1e-12).ln(),
            Transform::Logit01 => {
                let c = p.clamp(1e-9, 1.0 - 1e-9);
                (c / (1.0 - c)).ln()
            }
        }
    }

    pub fn to_external(self, theta: f64) -> f64 {
        match self {
            Transform::Free => theta,
            Transform::LogPositive => theta.exp(),
            Transform::Logit01 => 1.0 / (1.0 + (-theta).exp()),
        }
    }

    /// dp/dθ, for mapping the covariance back to external parameters.
    fn derivative(self, theta: f64) -> f64 {
        match self {
            Transform::Free => 1.0,
            Transform::LogPositive => theta.exp(),
            Transform::Logit01 => {
                let s = 1.0 / (1.0 + (-theta).exp());
                s * (1.0 - s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub chi2_rel_tol: f64,
    pub step_tol: f64,
    pub jacobian_rel_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            chi2_rel_tol: 1e-10,
            step_tol: 1e-12,
            jacobian_rel_step: 1e-6,
        }
    }
}

/// Fitted parameters (external units), covariance estimate, χ² bookkeeping.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Covariance of the external parameters; zero matrix when the normal
    /// equations were singular at the solution (flagged).
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    /// √χ².
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// χ² after each accepted step (starts with the initial value).
    pub chi2_trace: Vec<f64>,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn degrees_of_freedom(&self, n_data: usize) -> usize {
        n_data.saturating_sub(self.params.len())
    }
}

fn residuals<M>(model: &M, data: &[(f64, f64, f64)], p: &[f64], out: &mut [f64])
where
    M: Fn(&[f64], f64) -> f64,
{
    for (r, (x, y, s)) in out.iter_mut().zip(data) {
        *r = (model(p, *x) - y) / s;
    }
}

fn chi2_of(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

/// Central-difference Jacobian of the weighted residual vector with respect
/// to the internal (transformed) parameters. Row-major, n_data × n_params.
pub fn numerical_jacobian<M>(
    model: &M,
    data: &[(f64, f64, f64)],
    theta: &[f64],
    transforms: &[Transform],
    rel_step: f64,
) -> Vec<Vec<f64>>
where
    M: Fn(&[f64], f64) -> f64,
{
    let n = data.len();
    let np = theta.len();
    let mut jac = vec![vec![0.0; np]; n];
    let mut th = theta.to_vec();
    let mut ext = vec![0.0; np];
    let mut rp = vec![0.0; n];
    let mut rm = vec![0.0; n];
    for j in 0..np {
        let h = rel_step * theta[j].abs().max(1.0);
        th[j] = theta[j] + h;
        for (e, (t, tr)) in ext.iter_mut().zip(th.iter().zip(transforms)) {
            *e = tr.to_external(*t);
        }
        residuals(model, data, &ext, &mut rp);
        th[j] = theta[j] - h;
        for (e, (t, tr)) in ext.iter_mut().zip(th.iter().zip(transforms)) {
            *e = tr.to_external(*t);
        }
        residuals(model, data, &ext, &mut rm);
        th[j] = theta[j];
        let inv = 1.0 / (2.0 * h);
        for i in 0..n {
            jac[i][j] = (rp[i] - rm[i]) * inv;
        }
    }
    jac
}

/// Solve A x = b in place by Gaussian elimination with partial pivoting.
/// Returns None when a pivot collapses.
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pivot < 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Invert a small symmetric matrix; None when singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve_linear(&mut m, &mut e)?);
    }
    let mut inv = vec![vec![0.0; n]; n];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Levenberg–Marquardt minimization of Σ ((f(p, xᵢ) − yᵢ)/σᵢ)².
///
/// `data` is (x, y, σ) with σ > 0; `guess` and the returned parameters are
/// in external units.
pub fn least_squares<M>(
    model: M,
    data: &[(f64, f64, f64)],
    guess: &[f64],
    transforms: &[Transform],
    opts: &FitOptions,
) -> Result<FitResult, FitError>
where
    M: Fn(&[f64], f64) -> f64,
{
    let np = guess.len();
    assert_eq!(np, transforms.len(), "one transform per parameter");
    if data.len() < np {
        return Err(FitError::NotEnoughData {
            need: np,
            got: data.len(),
            params: np,
        });
    }
    if data.iter().any(|(_, _, s)| !(*s > 0.0) || !s.is_finite()) {
        return Err(FitError::BadSigma);
    }

    let mut theta: Vec<f64> = guess
        .iter()
        .zip(transforms)
        .map(|(p, t)| t.to_internal(*p))
        .collect();
    let ext = |th: &[f64]| -> Vec<f64> {
        th.iter()
            .zip(transforms)
            .map(|(t, tr)| tr.to_external(*t))
            .collect()
    };

    let n = data.len();
    let mut res = vec![0.0; n];
    residuals(&model, data, &ext(&theta), &mut res);
    let mut chi2 = chi2_of(&res);
    let mut trace = vec![chi2];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut flags = Vec::new();
    let mut iterations = 0;

    for _ in 0..opts.max_iterations {
        iterations += 1;
        if chi2 == 0.0 {
            converged = true;
            break;
        }
        let jac = numerical_jacobian(&model, data, &theta, transforms, opts.jacobian_rel_step);
        // Normal equations: (JᵀJ + λ diag(JᵀJ)) δ = -Jᵀ r
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for i in 0..n {
            for a in 0..np {
                jtr[a] += jac[i][a] * res[i];
                for b in a..np {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let max_diag = jtj
            .iter()
            .enumerate()
            .map(|(a, row)| row[a])
            .fold(0.0_f64, f64::max);
        // Relative floor keeps the damped system solvable when a parameter
        // does not influence the residuals at all (dead direction: δ = 0).
        let diag_floor = 1e-12 * max_diag + 1e-300;
        let mut accepted = false;
        for _damp in 0..16 {
            let mut lhs = jtj.clone();
            for a in 0..np {
                lhs[a][a] += lambda * jtj[a][a].max(diag_floor);
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = solve_linear(&mut lhs, &mut rhs) else {
                lambda *= 10.0;
                if lambda > 1e14 {
                    flags.push(FitFlag::SingularNormalEquations);
                    break;
                }
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
            let mut trial_res = vec![0.0; n];
            residuals(&model, data, &ext(&trial), &mut trial_res);
            let trial_chi2 = chi2_of(&trial_res);
            let step_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            if trial_chi2.is_finite() && trial_chi2 >= chi2 && step_norm < opts.step_tol {
                // Stationary: the proposed step is below resolution and does
                // not improve.
                converged = true;
                break;
            }
            if trial_chi2.is_finite() && trial_chi2 < chi2 {
                let rel_drop = (chi2 - trial_chi2) / chi2.max(f64::MIN_POSITIVE);
                theta = trial;
                res = trial_res;
                chi2 = trial_chi2;
                trace.push(chi2);
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel_drop < opts.chi2_rel_tol || step_norm < opts.step_tol || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                // No descent direction left at machine damping: we are at
                // (or numerically on top of) a minimum.
                converged = true;
                break;
            }
        }
        if !accepted {
            if !converged {
                flags.push(FitFlag::StalledDamping);
            }
            break;
        }
        if converged {
            break;
        }
    }

    let params = ext(&theta);
    // Covariance in external units: D (JᵀJ)⁻¹ D with D = diag(dp/dθ).
    let jac = numerical_jacobian(&model, data, &theta, transforms, opts.jacobian_rel_step);
    let mut jtj = vec![vec![0.0; np]; np];
    for i in 0..n {
        for a in 0..np {
            for b in a..np {
                jtj[a][b] += jac[i][a] * jac[i][b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    let covariance = match invert(&jtj) {
        Some(mut c) => {
            for (a, (ta, tra)) in theta.iter().zip(transforms).enumerate() {
                let da = tra.derivative(*ta);
                for (b, (tb, trb)) in theta.iter().zip(transforms).enumerate() {
                    c[a][b] *= da * trb.derivative(*tb);
                }
            }
            c
        }
        None => {
            if !flags.contains(&FitFlag::SingularNormalEquations) {
                flags.push(FitFlag::SingularNormalEquations);
            }
            vec![vec![0.0; np]; np]
        }
    };

    Ok(FitResult {
        params,
        covariance,
        chi2,
        residual_norm: chi2.sqrt(),
        iterations,
        converged,
        chi2_trace: trace,
        flags,
    })
}

/// Run [`least_squares`] from the supplied guess plus `extra_starts` jittered
/// copies (log-normal-ish ±20% in internal coordinates); return the best χ².
pub fn least_squares_multistart<M>(
    model: M,
    data: &[(f64, f64, f64)],
    guess: &[f64],
    transforms: &[Transform],
    opts: &FitOptions,
    extra_starts: usize,
    seed: u64,
) -> Result<FitResult, FitError>
where
    M: Fn(&[f64], f64) -> f64,
{
    use rand::Rng;
    let mut best: Option<FitResult> = None;
    for start in 0..=extra_starts {
        let mut g = guess.to_vec();
        if start > 0 {
            let mut rng = crate::rng::substream(seed, crate::rng::Domain::FitJitter, start as u64);
            for (p, t) in g.iter_mut().zip(transforms) {
                let th = t.to_internal(*p);
                let jitter = 0.2 * (th.abs() + 0.5) * (2.0 * rng.random::<f64>() - 1.0);
                *p = t.to_external(th + jitter);
            }
        }
        let r = least_squares(&model, data, &g, transforms, opts)?;
        let better = match &best {
            None => true,
            Some(b) => {
                (r.converged, -r.chi2) > (b.converged, -b.chi2)
            }
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(p: &[f64], x: f64) -> f64 {
        p[0] * x + p[1]
    }

    #[test]
    fn exact_line_recovers_slope_and_intercept() {
        let data: Vec<(f64, f64, f64)> =
            (0..20).map(|i| (i as f64, 2.0 * i as f64 + 1.0, 1.0)).collect();
        let r = least_squares(
            line,
            &data,
            &[0.5, 0.0],
            &[Transform::Free, Transform::Free],
            &FitOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.params[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.params[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn exact_exponential_recovers_rate() {
        let rate = 0.173;
        let data: Vec<(f64, f64, f64)> = (0..60)
            .map(|i| {
                let x = i as f64 * 0.5;
                (x, 3.0 * (-rate * x).exp(), 1.0)
            })
            .collect();
        let model = |p: &[f64], x: f64| p[0] * (-p[1] * x).exp();
        let r = least_squares(
            model,
            &data,
            &[1.0, 0.05],
            &[Transform::LogPositive, Transform::LogPositive],
            &FitOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.params[1], rate, epsilon = 1e-8);
        assert_abs_diff_eq!(r.params[0], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn quartic_landscape_beats_grid_search() {
        // chi2 is quartic in (a, b): model (a + b x)^2 with two symmetric
        // global minima.
        let truth = (1.2, -0.7);
        let data: Vec<(f64, f64, f64)> = (0..40)
            .map(|i| {
                let x = -2.0 + i as f64 * 0.1;
                (x, (truth.0 + truth.1 * x) * (truth.0 + truth.1 * x), 1.0)
            })
            .collect();
        let model = |p: &[f64], x: f64| (p[0] + p[1] * x) * (p[0] + p[1] * x);
        let mut grid_best = f64::INFINITY;
        for ia in 0..100 {
            for ib in 0..100 {
                let a = -3.0 + 6.0 * ia as f64 / 99.0;
                let b = -3.0 + 6.0 * ib as f64 / 99.0;
                let chi2: f64 = data
                    .iter()
                    .map(|(x, y, _)| {
                        let d = (a + b * x) * (a + b * x) - y;
                        d * d
                    })
                    .sum();
                grid_best = grid_best.min(chi2);
            }
        }
        let r = least_squares_multistart(
            model,
            &data,
            &[0.4, 0.4],
            &[Transform::Free, Transform::Free],
            &FitOptions::default(),
            8,
            7,
        )
        .unwrap();
        assert!(
            r.chi2 <= grid_best + 1e-12,
            "LM chi2 {} vs grid {}",
            r.chi2,
            grid_best
        );
    }

    #[test]
    fn accepted_steps_never_increase_chi2() {
        let data: Vec<(f64, f64, f64)> = (0..30)
            .map(|i| {
                let x = i as f64 * 0.3;
                (x, 2.0 * (-0.4 * x).exp() + 0.05 * (x * 0.77).sin(), 0.1)
            })
            .collect();
        let model = |p: &[f64], x: f64| p[0] * (-p[1] * x).exp();
        let r = least_squares(
            model,
            &data,
            &[0.5, 1.5],
            &[Transform::LogPositive, Transform::LogPositive],
            &FitOptions::default(),
        )
        .unwrap();
        for w in r.chi2_trace.windows(2) {
            assert!(w[1] <= w[0], "chi2 increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn refit_from_converged_point_is_idempotent() {
        let data: Vec<(f64, f64, f64)> = (0..25)
            .map(|i| {
                let x = i as f64;
                (x, 5.0 / (1.0 + (-0.3 * (x - 10.0)).exp()), 0.2)
            })
            .collect();
        let model = |p: &[f64], x: f64| p[0] / (1.0 + (-p[1] * (x - p[2])).exp());
        let tr = [Transform::LogPositive, Transform::LogPositive, Transform::Free];
        let first = least_squares(model, &data, &[3.0, 0.5, 8.0], &tr, &FitOptions::default())
            .unwrap();
        assert!(first.converged);
        let second =
            least_squares(model, &data, &first.params, &tr, &FitOptions::default()).unwrap();
        for (a, b) in first.params.iter().zip(&second.params) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn singular_problem_reports_nonconvergence_without_fabrication() {
        // Model ignores p[1] entirely: JtJ singular in that direction and the
        // data are pure noise around a constant.
        let data: Vec<(f64, f64, f64)> =
            (0..10).map(|i| (i as f64, 1.0, 1.0)).collect();
        let model = |p: &[f64], _x: f64| p[0];
        let r = least_squares(
            model,
            &data,
            &[0.5, 3.0],
            &[Transform::Free, Transform::Free],
            &FitOptions::default(),
        )
        .unwrap();
        // p[1] must come back untouched; covariance flagged singular.
        assert_abs_diff_eq!(r.params[1], 3.0, epsilon = 1e-12);
        assert!(
            r.flags.contains(&FitFlag::SingularNormalEquations)
                || r.covariance[1][1] == 0.0
        );
        assert_abs_diff_eq!(r.params[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn jacobian_matches_finer_step() {
        let data: Vec<(f64, f64, f64)> = (0..15)
            .map(|i| {
                let x = 0.2 * i as f64;
                (x, (1.3 + 0.4 * x) * (-0.25 * x).exp(), 0.5)
            })
            .collect();
        let model = |p: &[f64], x: f64| (p[0] + p[1] * x) * (-p[2] * x).exp();
        let tr = [Transform::Free, Transform::Free, Transform::LogPositive];
        let theta = [1.1, 0.3, (0.2_f64).ln()];
        let coarse = numerical_jacobian(&model, &data, &theta, &tr, 1e-6);
        let fine = numerical_jacobian(&model, &data, &theta, &tr, 1e-7);
        for (rc, rf) in coarse.iter().zip(&fine) {
            for (a, b) in rc.iter().zip(rf) {
                let denom = b.abs().max(1e-8);
                assert!(
                    ((a - b) / denom).abs() < 1e-4,
                    "jacobian mismatch {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn rejects_underdetermined_and_bad_sigma() {
        let model = |p: &[f64], x: f64| p[0] * x + p[1];
        assert!(matches!(
            least_squares(
                model,
                &[(0.0, 0.0, 1.0)],
                &[1.0, 1.0],
                &[Transform::Free, Transform::Free],
                &FitOptions::default()
            ),
            Err(FitError::NotEnoughData { .. })
        ));
        assert!(matches!(
            least_squares(
                model,
                &[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)],
                &[1.0, 1.0],
                &[Transform::Free, Transform::Free],
                &FitOptions::default()
            ),
            Err(FitError::BadSigma)
        ));
    }
}
