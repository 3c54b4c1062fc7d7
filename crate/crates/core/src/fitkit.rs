//! Weighted least-squares parameter extraction.
//!
//! Linear models are solved in closed form from the normal equations;
//! nonlinear models use Gauss–Newton with multiplicative Levenberg damping
//! and a forward-difference Jacobian. Parameter uncertainties come from the
//! inverse of the weighted normal matrix.

use crate::error::{Error, Result};
use crate::qubit;

/// Models understood by [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    /// y = a + b·x, params `[a, b]`.
    Linear,
    /// y = y₀·exp(−(πγx)²/(2·ln2)), params `[y0, gamma]` (γ in 1/x units).
    GaussianDecay,
    /// y = A·(1 + V·cos(x − φ)) + baseline, x and φ in degrees,
    /// params `[amplitude, visibility, phase_deg]`. The baseline is a known
    /// offset, not a fit parameter; a free baseline would be degenerate with
    /// the amplitude.
    Sinusoid { baseline: f64 },
    /// Total-fidelity model F_T(μ; α) with μ₁ₚ held fixed, params `[alpha]`.
    FidelityModel { mu1p: f64 },
}

impl FitModel {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            FitModel::Linear => &["intercept", "slope"],
            FitModel::GaussianDecay => &["y0", "gamma"],
            FitModel::Sinusoid { .. } => &["amplitude", "visibility", "phase_deg"],
            FitModel::FidelityModel { .. } => &["alpha"],
        }
    }

    /// Model value at `x` for parameter vector `p`.
    pub fn evaluate(&self, x: f64, p: &[f64]) -> f64 {
        self.eval(x, p)
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match self {
            FitModel::Linear => p[0] + p[1] * x,
            FitModel::GaussianDecay => {
                let arg = std::f64::consts::PI * p[1] * x;
                p[0] * (-arg * arg / (2.0 * std::f64::consts::LN_2)).exp()
            }
            FitModel::Sinusoid { baseline } => {
                let th = (x - p[2]).to_radians();
                p[0] * (1.0 + p[1] * th.cos()) + baseline
            }
            FitModel::FidelityModel { mu1p } => qubit::fidelity_total(x, *mu1p, p[0]).f_total,
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    /// √(Σ w·r²) at the solution.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.model
            .param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.params[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.model
            .param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.uncertainties[i])
    }
}

/// Fit `(x, y, σ_y)` triples with the given model.
///
/// `initial_guess` may be empty for the linear model; nonlinear models
/// require a starting point with one value per parameter.
pub fn fit(data: &[(f64, f64, f64)], model: FitModel, initial_guess: &[f64]) -> Result<FitResult> {
    let n_params = model.param_names().len();
    if data.len() < n_params + 2 {
        return Err(Error::FitFailed(format!(
            "need at least {} points for {} parameters, got {}",
            n_params + 2,
            n_params,
            data.len()
        )));
    }
    if data.iter().any(|&(_, _, s)| !(s > 0.0)) {
        return Err(Error::FitFailed("all σ_y must be positive".into()));
    }

    if model == FitModel::Linear {
        return fit_linear(data);
    }
    if initial_guess.len() != n_params {
        return Err(Error::FitFailed(format!(
            "initial guess has {} values, model needs {}",
            initial_guess.len(),
            n_params
        )));
    }
    let f = |x: f64, p: &[f64]| model.eval(x, p);
    let out = gauss_newton(data, &f, initial_guess)?;
    Ok(FitResult {
        model,
        params: out.params,
        uncertainties: out.uncertainties,
        residual_norm: out.residual_norm,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Closed-form weighted linear regression y = a + b·x.
fn fit_linear(data: &[(f64, f64, f64)]) -> Result<FitResult> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, s) in data {
        let w = 1.0 / (s * s);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 * sw.max(1.0) {
        return Err(Error::FitFailed("singular normal matrix (degenerate x)".into()));
    }
    let a = (sxx * sy - sx * sxy) / det;
    let b = (sw * sxy - sx * sy) / det;
    let var_a = sxx / det;
    let var_b = sw / det;
    let residual_norm = data
        .iter()
        .map(|&(x, y, s)| {
            let r = (y - a - b * x) / s;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        model: FitModel::Linear,
        params: vec![a, b],
        uncertainties: vec![var_a.sqrt(), var_b.sqrt()],
        residual_norm,
        converged: true,
        iterations: 0,
    })
}

pub(crate) struct GnResult {
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-10;

/// Damped Gauss–Newton on an arbitrary model function. Also used internally
/// (comb-shape refinement) with models that are not part of [`FitModel`].
pub(crate) fn gauss_newton<F>(
    data: &[(f64, f64, f64)],
    model: &F,
    initial: &[f64],
) -> Result<GnResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let np = initial.len();
    let mut p = initial.to_vec();
    let mut lambda = 0.0;
    let mut chi2 = chi_square(data, model, &p);
    let chi2_scale = chi2.max(1.0);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        let jac = jacobian_fd(data, model, &p);
        // normal matrix and gradient
        let mut jtj = vec![0.0; np * np];
        let mut jtr = vec![0.0; np];
        for (i, &(x, y, s)) in data.iter().enumerate() {
            let w = 1.0 / (s * s);
            let r = y - model(x, &p);
            for a in 0..np {
                jtr[a] += w * jac[i * np + a] * r;
                for b in 0..np {
                    jtj[a * np + b] += w * jac[i * np + a] * jac[i * np + b];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < GRAD_TOL * chi2_scale {
            converged = true;
            break;
        }

        // damped step, retried with stronger damping until chi² improves
        let mut improved = false;
        for _ in 0..24 {
            let mut m = jtj.clone();
            if lambda > 0.0 {
                for a in 0..np {
                    m[a * np + a] += lambda * jtj[a * np + a].max(1e-300);
                }
            }
            let Some(step) = solve_dense(&m, &jtr, np) else {
                lambda = (lambda * 10.0).max(1e-4);
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(v, d)| v + d).collect();
            let trial_chi2 = chi_square(data, model, &trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let delta = chi2 - trial_chi2;
                p = trial;
                chi2 = trial_chi2;
                lambda /= 10.0;
                if lambda < 1e-12 {
                    lambda = 0.0;
                }
                improved = true;
                if delta < 1e-14 * chi2_scale {
                    converged = true;
                }
                break;
            }
            lambda = (lambda * 10.0).max(1e-4);
        }
        if !improved {
            converged = grad_norm < 1e-6 * chi2_scale;
            break;
        }
        if converged {
            break;
        }
    }

    // covariance from the undamped normal matrix at the solution
    let jac = jacobian_fd(data, model, &p);
    let mut jtj = vec![0.0; np * np];
    for (i, &(_, _, s)) in data.iter().enumerate() {
        let w = 1.0 / (s * s);
        for a in 0..np {
            for b in 0..np {
                jtj[a * np + b] += w * jac[i * np + a] * jac[i * np + b];
            }
        }
    }
    let cov = invert_dense(&jtj, np)
        .ok_or_else(|| Error::FitFailed("singular normal matrix at solution".into()))?;
    let uncertainties = (0..np).map(|a| cov[a * np + a].max(0.0).sqrt()).collect();

    Ok(GnResult {
        params: p,
        uncertainties,
        residual_norm: chi2.sqrt(),
        converged,
        iterations,
    })
}

fn chi_square<F: Fn(f64, &[f64]) -> f64>(data: &[(f64, f64, f64)], model: &F, p: &[f64]) -> f64 {
    data.iter()
        .map(|&(x, y, s)| {
            let r = (y - model(x, p)) / s;
            r * r
        })
        .sum()
}

/// Forward-difference Jacobian, row-major `data.len() × p.len()`.
fn jacobian_fd<F: Fn(f64, &[f64]) -> f64>(
    data: &[(f64, f64, f64)],
    model: &F,
    p: &[f64],
) -> Vec<f64> {
    let np = p.len();
    let mut jac = vec![0.0; data.len() * np];
    let base: Vec<f64> = data.iter().map(|&(x, _, _)| model(x, p)).collect();
    let mut pp = p.to_vec();
    for a in 0..np {
        let h = 1e-6 * p[a].abs().max(1e-6);
        pp[a] = p[a] + h;
        for (i, &(x, _, _)) in data.iter().enumerate() {
            jac[i * np + a] = (model(x, &pp) - base[i]) / h;
        }
        pp[a] = p[a];
    }
    jac
}

/// Solve M·x = b for small dense systems (partial pivoting).
fn solve_dense(m: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let (pivot, pv) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|p, q| p.1.total_cmp(&q.1))?;
        if pv < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

fn invert_dense(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for col in 0..n {
        e.fill(0.0);
        e[col] = 1.0;
        let x = solve_dense(m, &e, n)?;
        for r in 0..n {
            inv[r * n + col] = x[r];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_fit_recovers_mu1_slope_exactly() {
        let mu1 = 0.069;
        let data: Vec<(f64, f64, f64)> = (1..10)
            .map(|i| {
                let x = 0.2 * i as f64;
                (x, x / mu1, 1.0)
            })
            .collect();
        let r = fit(&data, FitModel::Linear, &[]).unwrap();
        assert_relative_eq!(1.0 / r.param("slope").unwrap(), mu1, epsilon = 1e-9);
        assert!(r.param("intercept").unwrap().abs() < 1e-9);
    }

    #[test]
    fn gauss_newton_matches_closed_form_on_linear_model() {
        let data = vec![
            (0.0, 1.1, 0.2),
            (1.0, 2.9, 0.1),
            (2.0, 5.2, 0.3),
            (3.0, 6.8, 0.2),
            (4.0, 9.1, 0.4),
        ];
        let closed = fit(&data, FitModel::Linear, &[]).unwrap();
        let f = |x: f64, p: &[f64]| p[0] + p[1] * x;
        let gn = gauss_newton(&data, &f, &[0.0, 1.0]).unwrap();
        assert!(gn.converged);
        assert!(gn.iterations <= 3, "iterations {}", gn.iterations);
        assert_relative_eq!(gn.params[0], closed.params[0], epsilon = 1e-10);
        assert_relative_eq!(gn.params[1], closed.params[1], epsilon = 1e-10);
        assert_relative_eq!(
            gn.residual_norm,
            closed.residual_norm,
            epsilon = 1e-9
        );
    }

    #[test]
    fn gaussian_decay_fit_recovers_gamma() {
        let gamma = 0.026; // MHz
        let data: Vec<(f64, f64, f64)> = (0..12)
            .map(|i| {
                let t = 2.0 * i as f64;
                let y = 10.0
                    * (-(std::f64::consts::PI * gamma * t).powi(2)
                        / (2.0 * std::f64::consts::LN_2))
                        .exp();
                (t, y, 0.05 * y.max(0.05))
            })
            .collect();
        let r = fit(&data, FitModel::GaussianDecay, &[8.0, 0.04]).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.param("gamma").unwrap(), gamma, max_relative = 1e-6);
    }

    #[test]
    fn sinusoid_fit_recovers_visibility_and_phase() {
        let (a, v, phi) = (120.0, 0.73, 40.0);
        let data: Vec<(f64, f64, f64)> = (0..8)
            .map(|i| {
                let th = 45.0 * i as f64;
                let y = a * (1.0 + v * (th - phi).to_radians().cos());
                (th, y, 3.0)
            })
            .collect();
        let r = fit(
            &data,
            FitModel::Sinusoid { baseline: 0.0 },
            &[100.0, 0.5, 0.0],
        )
        .unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.param("visibility").unwrap(), v, max_relative = 1e-6);
        assert_relative_eq!(r.param("phase_deg").unwrap(), phi, max_relative = 1e-5);
    }

    #[test]
    fn rejects_underdetermined_and_bad_sigma() {
        let data = vec![(0.0, 1.0, 1.0), (1.0, 2.0, 1.0)];
        assert!(fit(&data, FitModel::Linear, &[]).is_err());
        let data = vec![(0.0, 1.0, 0.0); 8];
        assert!(fit(&data, FitModel::Linear, &[]).is_err());
    }
}
