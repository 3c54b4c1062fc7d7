//! Classical measure-and-prepare fidelity bound for weak coherent time-bin
//! qubits stored in a memory of finite efficiency.
//!
//! A classical cheater measures each incoming pulse and re-prepares a state,
//! post-selecting photon-rich events. With n detected photons the best
//! qubit-estimation fidelity is F_n = (n+1)/(n+2) (F₀ = 1/2, a random
//! guess). The cheater picks acceptance probabilities q_n ∈ [0,1] that
//! maximise the mean fidelity of accepted events subject to reproducing the
//! memory's efficiency, Σ P_μ(n)·q_n = η. Since F_n increases with n the
//! optimum is a greedy threshold strategy: accept all photon numbers above a
//! threshold and a fraction of the threshold term.

use crate::error::{Error, Result};
use crate::qubit;

/// Poisson tail mass below which the photon-number sum is truncated.
const TAIL_EPS: f64 = 1e-12;

/// Optimal classical strategy and its fidelity.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub mu: f64,
    pub eta: f64,
    /// Classical bound F_C.
    pub fc: f64,
    /// Acceptance probability per photon number, q_0..q_nmax.
    pub strategy: Vec<f64>,
    /// Σ P_μ(n)·q_n, equal to η by construction.
    pub accepted_probability: f64,
}

/// Poisson probabilities P_μ(0..=n_max) with n_max chosen so the tail mass
/// is below `TAIL_EPS`.
pub fn poisson_pmf(mu: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(32);
    let mut term = (-mu).exp();
    let mut cum = term;
    p.push(term);
    let mut n = 0usize;
    while 1.0 - cum > TAIL_EPS && n < 400 {
        n += 1;
        term *= mu / n as f64;
        cum += term;
        p.push(term);
    }
    p
}

/// n-copy estimation fidelity, F_0 = 1/2 and F_n = (n+1)/(n+2).
pub fn estimation_fidelity(n: usize) -> f64 {
    if n == 0 {
        0.5
    } else {
        (n as f64 + 1.0) / (n as f64 + 2.0)
    }
}

/// Best classical fidelity at mean photon number `mu` and memory efficiency
/// `eta` (acceptance probability pinned to η).
pub fn classical_bound(mu: f64, eta: f64) -> Result<BenchmarkResult> {
    if mu <= 0.0 {
        return Err(Error::invalid("mu", "must be > 0"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", "must be in (0, 1]"));
    }
    let pmf = poisson_pmf(mu);
    let mut q = vec![0.0; pmf.len()];
    let mut budget = eta;
    let mut num = 0.0; // Σ P q F, ascending-n accumulation after the greedy pass
    for n in (0..pmf.len()).rev() {
        if budget >= pmf[n] {
            q[n] = 1.0;
            budget -= pmf[n];
        } else {
            q[n] = budget / pmf[n];
            break;
        }
    }
    // budget can stay positive only if eta exceeds the truncated total mass,
    // which the TAIL_EPS truncation makes negligible for eta ≤ 1
    let mut accepted = 0.0;
    for n in 0..pmf.len() {
        accepted += pmf[n] * q[n];
        num += pmf[n] * q[n] * estimation_fidelity(n);
    }
    Ok(BenchmarkResult {
        mu,
        eta,
        fc: num / accepted,
        strategy: q,
        accepted_probability: accepted,
    })
}

/// Classical bound for a single-photon Fock input: the cheater always holds
/// exactly one copy, so F_C = F_1 = 2/3 independent of efficiency.
pub fn fock_bound() -> f64 {
    estimation_fidelity(1)
}

/// Mean fidelity of an arbitrary strategy `q` under (mu, eta); used by the
/// optimality checks. Returns `None` when the strategy violates the
/// efficiency constraint by more than `tol`.
pub fn strategy_fidelity(mu: f64, eta: f64, q: &[f64], tol: f64) -> Option<f64> {
    let pmf = poisson_pmf(mu);
    let mut accepted = 0.0;
    let mut num = 0.0;
    for n in 0..pmf.len().min(q.len()) {
        accepted += pmf[n] * q[n];
        num += pmf[n] * q[n] * estimation_fidelity(n);
    }
    if (accepted - eta).abs() > tol {
        return None;
    }
    Some(num / accepted)
}

/// Where the fidelity model crosses the classical bound.
#[derive(Debug, Clone)]
pub struct CrossingReport {
    /// Root of F_T(μ) − F_C(μ, η), if bracketed in [0.01, 10].
    pub mu_star: Option<f64>,
    /// True when F_T ≥ F_C over the whole bracket.
    pub always_quantum: bool,
    /// (μ, F_T, F_C, F_T − F_C) sampled at the requested μ values.
    pub sign_table: Vec<(f64, f64, f64, f64)>,
}

/// Locate the quantum/classical crossing of the model F_T(μ; μ₁ₚ, α) against
/// F_C(μ, η) by bisection, and evaluate the sign of the margin at the given
/// μ values.
pub fn quantum_crossing(
    mu1p: f64,
    alpha: f64,
    eta: f64,
    table_mu: &[f64],
) -> Result<CrossingReport> {
    if mu1p <= 0.0 || alpha < 1.0 {
        return Err(Error::invalid("mu1p/alpha", "need mu1p > 0 and alpha ≥ 1"));
    }
    let margin = |mu: f64| -> Result<f64> {
        Ok(qubit::fidelity_total(mu, mu1p, alpha).f_total - classical_bound(mu, eta)?.fc)
    };

    let (mut lo, mut hi) = (0.01, 10.0);
    let m_lo = margin(lo)?;
    let m_hi = margin(hi)?;
    let mut sign_table = Vec::with_capacity(table_mu.len());
    for &mu in table_mu {
        let ft = qubit::fidelity_total(mu, mu1p, alpha).f_total;
        let fc = classical_bound(mu, eta)?.fc;
        sign_table.push((mu, ft, fc, ft - fc));
    }

    if m_lo > 0.0 && m_hi > 0.0 {
        return Ok(CrossingReport {
            mu_star: None,
            always_quantum: true,
            sign_table,
        });
    }
    if m_lo < 0.0 && m_hi < 0.0 {
        return Err(Error::NoBracket(format!(
            "F_T − F_C negative over [{lo}, {hi}]"
        )));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if margin(mid)?.signum() == m_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CrossingReport {
        mu_star: Some(0.5 * (lo + hi)),
        always_quantum: false,
        sign_table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_sums_to_one_within_tail() {
        for mu in [0.1, 0.6, 3.2, 5.9, 20.0] {
            let s: f64 = poisson_pmf(mu).iter().sum();
            assert!((1.0 - s).abs() < 1e-11, "mu={mu} sum={s}");
        }
    }

    #[test]
    fn table_values_at_memory_efficiency() {
        // independently hand-computed greedy sums for η = 0.022
        assert_relative_eq!(classical_bound(0.6, 0.022).unwrap().fc, 0.8056, epsilon = 1e-3);
        assert_relative_eq!(classical_bound(3.2, 0.022).unwrap().fc, 0.9008, epsilon = 1e-3);
        assert_relative_eq!(classical_bound(5.9, 0.022).unwrap().fc, 0.9301, epsilon = 1e-3);
    }

    #[test]
    fn fock_input_gives_two_thirds() {
        assert_eq!(fock_bound(), 2.0 / 3.0);
    }

    #[test]
    fn accepted_probability_equals_eta() {
        for (mu, eta) in [(0.6, 0.022), (1.5, 0.022), (2.0, 0.3), (0.2, 0.9)] {
            let r = classical_bound(mu, eta).unwrap();
            assert_relative_eq!(r.accepted_probability, eta, epsilon = 1e-9);
            assert!(r.fc >= 0.5 && r.fc <= 1.0);
        }
    }

    #[test]
    fn strategy_is_threshold_shaped() {
        let r = classical_bound(1.5, 0.022).unwrap();
        let q = &r.strategy;
        // at most one fractional entry; ones above it, zeros below
        let frac: Vec<usize> = (0..q.len())
            .filter(|&n| q[n] > 1e-12 && q[n] < 1.0 - 1e-12)
            .collect();
        assert!(frac.len() <= 1, "fractional entries at {frac:?}");
        if let Some(&k) = frac.first() {
            assert!(q[..k].iter().all(|&v| v == 0.0));
            assert!(q[k + 1..].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn high_eta_falls_back_to_q0() {
        // eta close to 1 forces acceptance of vacuum events
        let r = classical_bound(0.5, 0.95).unwrap();
        assert!(r.strategy[0] > 0.0);
        assert!(r.fc >= 0.5);
        assert_relative_eq!(r.accepted_probability, 0.95, epsilon = 1e-9);
    }

    #[test]
    fn monotone_in_mu_and_eta() {
        let mut prev = 0.0;
        for mu in [0.3, 0.6, 1.1, 2.5, 5.0, 10.0] {
            let fc = classical_bound(mu, 0.022).unwrap().fc;
            assert!(fc >= prev);
            prev = fc;
        }
        let mut prev = 1.0;
        for eta in [0.01, 0.05, 0.2, 0.5, 1.0] {
            let fc = classical_bound(1.5, eta).unwrap().fc;
            assert!(fc <= prev + 1e-12);
            prev = fc;
        }
    }

    #[test]
    fn fc_approaches_one_for_bright_inputs() {
        assert!(classical_bound(200.0, 0.022).unwrap().fc > 0.99);
    }

    #[test]
    fn crossing_bracketed_between_table_rows() {
        let r = quantum_crossing(0.11, 2.5, 0.022, &[0.6, 1.1, 1.5, 3.2, 5.9]).unwrap();
        let mu_star = r.mu_star.expect("crossing exists");
        assert!(mu_star > 0.6 && mu_star < 1.1, "mu* = {mu_star}");
        assert!(r.sign_table[0].3 < 0.0);
        for row in &r.sign_table[1..] {
            assert!(row.3 > 0.0, "expected quantum at mu={}", row.0);
        }
    }

    #[test]
    fn perfect_memory_is_always_quantum() {
        let r = quantum_crossing(1e-9, 1.0, 0.022, &[1.0]).unwrap();
        assert!(r.always_quantum);
        assert!(r.mu_star.is_none());
    }
}
