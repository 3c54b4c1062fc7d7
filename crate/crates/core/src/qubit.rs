//! Time-bin qubit storage, the double-write self-analysis, and the
//! noise-limited fidelity model.
//!
//! A qubit c₁|e⟩ + c₂e^{iΔα}|l⟩ is stored and read out through two partial
//! write pulses with relative phase Δβ. The late echo of the early bin and
//! the early echo of the late bin overlap in a central output bin where they
//! interfere; the pole bins carry c₁² and c₂². Relative to a single-write
//! measurement the signal is reduced by a factor 4α: ×½ for the input split
//! over two bins, ×½ for the echo split over two write pulses, and ×1/α for
//! the shorter (less efficient) write pulses.

use crate::error::{Error, Result};

/// Weak-coherent time-bin qubit at the memory input.
#[derive(Debug, Clone, Copy)]
pub struct TimeBinQubit {
    /// Early-bin amplitude (real by convention).
    pub c1: f64,
    /// Late-bin amplitude (real by convention).
    pub c2: f64,
    /// Relative phase Δα in degrees.
    pub delta_alpha_deg: f64,
    /// Separation of the early and late bins in µs.
    pub bin_separation_us: f64,
    /// Pulse duration per bin (FWHM, µs).
    pub pulse_fwhm_us: f64,
    /// Mean photon number per qubit.
    pub mu_q: f64,
}

impl TimeBinQubit {
    pub fn new(
        c1: f64,
        c2: f64,
        delta_alpha_deg: f64,
        bin_separation_us: f64,
        pulse_fwhm_us: f64,
        mu_q: f64,
    ) -> Result<Self> {
        let norm = c1 * c1 + c2 * c2;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("c1,c2", format!("c1²+c2² = {norm}, must be 1")));
        }
        if mu_q < 0.0 {
            return Err(Error::invalid("mu_q", "must be ≥ 0"));
        }
        if bin_separation_us <= 0.0 || pulse_fwhm_us <= 0.0 {
            return Err(Error::invalid("bin_separation/pulse_fwhm", "must be > 0"));
        }
        Ok(Self {
            c1,
            c2,
            delta_alpha_deg,
            bin_separation_us,
            pulse_fwhm_us,
            mu_q,
        })
    }

    /// Equal superposition with relative phase Δα.
    pub fn equator(delta_alpha_deg: f64, bin_separation_us: f64, mu_q: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            c1: s,
            c2: s,
            delta_alpha_deg,
            bin_separation_us,
            pulse_fwhm_us: 0.26,
            mu_q,
        }
    }

    /// Pole state |e⟩ (early = true) or |l⟩.
    pub fn pole(early: bool, bin_separation_us: f64, mu_q: f64) -> Self {
        Self {
            c1: if early { 1.0 } else { 0.0 },
            c2: if early { 0.0 } else { 1.0 },
            delta_alpha_deg: 0.0,
            bin_separation_us,
            pulse_fwhm_us: 0.26,
            mu_q,
        }
    }
}

/// Double-write analysis settings.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWriteConfig {
    /// Relative phase Δβ of the two partial write pulses, degrees.
    pub delta_beta_deg: f64,
    /// Time between the two write pulses, µs. Must equal the qubit bin
    /// separation for the |el⟩ and |le⟩ echoes to overlap.
    pub write_separation_us: f64,
    /// Efficiency penalty of the shortened write pulses, α ≥ 1.
    pub alpha: f64,
    /// μ₁ of the poles measurement.
    pub mu1p: f64,
}

impl DoubleWriteConfig {
    pub fn new(delta_beta_deg: f64, write_separation_us: f64, alpha: f64, mu1p: f64) -> Result<Self> {
        if alpha < 1.0 {
            return Err(Error::invalid("alpha", "must be ≥ 1"));
        }
        if mu1p <= 0.0 {
            return Err(Error::invalid("mu1p", "must be > 0"));
        }
        Ok(Self {
            delta_beta_deg,
            write_separation_us,
            alpha,
            mu1p,
        })
    }
}

/// Mean detected intensity per output bin (signal only) plus the per-bin
/// noise level, all in photons per trial at the memory output.
#[derive(Debug, Clone, Copy)]
pub struct TimeBinOutput {
    /// |ee⟩ bin signal.
    pub ee: f64,
    /// Central |el⟩+|le⟩ bin signal (coherent sum).
    pub central: f64,
    /// |ll⟩ bin signal.
    pub ll: f64,
    /// Noise added to every bin.
    pub noise_per_bin: f64,
}

impl TimeBinOutput {
    pub fn total_signal(&self) -> f64 {
        self.ee + self.central + self.ll
    }
}

/// Mean output-bin intensities for a stored time-bin qubit under the
/// double-write analysis.
pub fn store_timebin(
    q: &TimeBinQubit,
    dw: &DoubleWriteConfig,
    noise_p_n: f64,
    eta_sw: f64,
) -> Result<TimeBinOutput> {
    if (q.bin_separation_us - dw.write_separation_us).abs() > 1e-9 {
        return Err(Error::invalid(
            "write_separation_us",
            format!(
                "write separation {} µs must match qubit bin separation {} µs",
                dw.write_separation_us, q.bin_separation_us
            ),
        ));
    }
    let scale = q.mu_q * eta_sw / (4.0 * dw.alpha);
    let da = q.delta_alpha_deg.to_radians();
    let db = dw.delta_beta_deg.to_radians();
    // central bin: |c1·e^{iΔβ} + c2·e^{iΔα}|²
    let re = q.c1 * db.cos() + q.c2 * da.cos();
    let im = q.c1 * db.sin() + q.c2 * da.sin();
    Ok(TimeBinOutput {
        ee: scale * q.c1 * q.c1,
        central: scale * (re * re + im * im),
        ll: scale * q.c2 * q.c2,
        noise_per_bin: noise_p_n,
    })
}

/// Pole fidelity F_el = (μ_q + μ₁ₚ)/(μ_q + 2μ₁ₚ), i.e. (SNR+1)/(SNR+2)
/// with SNR = μ_q/μ₁ₚ.
pub fn fidelity_poles(mu_q: f64, mu1p: f64) -> f64 {
    (mu_q + mu1p) / (mu_q + 2.0 * mu1p)
}

/// Fringe visibility V = SNR/(SNR + 2α) = μ_q/(μ_q + 2αμ₁ₚ).
pub fn visibility_model(mu_q: f64, mu1p: f64, alpha: f64) -> f64 {
    mu_q / (mu_q + 2.0 * alpha * mu1p)
}

/// Fidelity summary per μ_q.
#[derive(Debug, Clone, Copy)]
pub struct FidelityRecord {
    pub mu_q: f64,
    pub f_el: f64,
    /// Equator fidelity F₊₋ = (1 + V)/2.
    pub f_pm: f64,
    /// F_T = F_el/3 + 2·F₊₋/3.
    pub f_total: f64,
    pub visibility: f64,
}

/// Evaluate the full fidelity model at one μ_q.
pub fn fidelity_total(mu_q: f64, mu1p: f64, alpha: f64) -> FidelityRecord {
    let f_el = fidelity_poles(mu_q, mu1p);
    let v = visibility_model(mu_q, mu1p, alpha);
    let f_pm = 0.5 * (1.0 + v);
    FidelityRecord {
        mu_q,
        f_el,
        f_pm,
        f_total: f_el / 3.0 + 2.0 * f_pm / 3.0,
        visibility: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dwc(delta_beta_deg: f64) -> DoubleWriteConfig {
        DoubleWriteConfig::new(delta_beta_deg, 0.5, 2.5, 0.11).unwrap()
    }

    #[test]
    fn pole_input_puts_signal_in_ee_and_central_only() {
        let q = TimeBinQubit::pole(true, 0.5, 1.0);
        let out = store_timebin(&q, &dwc(0.0), 2e-3, 0.022).unwrap();
        // early qubit: ee and central carry c1² each, ll is empty
        assert!(out.ee > 0.0);
        assert_relative_eq!(out.central, out.ee, epsilon = 1e-15);
        assert_eq!(out.ll, 0.0);
    }

    #[test]
    fn matched_phases_give_central_four_times_ll() {
        let q = TimeBinQubit::equator(135.0, 0.5, 1.5);
        let out = store_timebin(&q, &dwc(135.0), 0.0, 0.022).unwrap();
        assert_relative_eq!(out.central, 4.0 * out.ll, epsilon = 1e-12);
    }

    #[test]
    fn opposite_phases_cancel_central_bin() {
        let q = TimeBinQubit::equator(30.0, 0.5, 1.5);
        let out = store_timebin(&q, &dwc(30.0 + 180.0), 0.0, 0.022).unwrap();
        assert!(out.central.abs() < 1e-15);
    }

    #[test]
    fn bin_energy_matches_closed_form() {
        let q = TimeBinQubit::new(0.6, 0.8, 70.0, 0.5, 0.26, 2.0).unwrap();
        let dw = dwc(10.0);
        let out = store_timebin(&q, &dw, 0.0, 0.028).unwrap();
        let scale = q.mu_q * 0.028 / (4.0 * dw.alpha);
        let da = q.delta_alpha_deg.to_radians();
        let db = dw.delta_beta_deg.to_radians();
        let cross = (q.c1 * db.cos() + q.c2 * da.cos()).powi(2)
            + (q.c1 * db.sin() + q.c2 * da.sin()).powi(2);
        let expect = scale * (q.c1 * q.c1 + cross + q.c2 * q.c2);
        assert_relative_eq!(out.total_signal(), expect, epsilon = 1e-15);
    }

    #[test]
    fn mismatched_separation_is_rejected() {
        let q = TimeBinQubit::equator(0.0, 0.4, 1.0);
        assert!(store_timebin(&q, &dwc(0.0), 0.0, 0.02).is_err());
    }

    #[test]
    fn pole_fidelity_limits() {
        assert_relative_eq!(fidelity_poles(1e9, 0.11), 1.0, epsilon = 1e-6);
        // SNR = 1 gives 2/3 exactly
        assert_relative_eq!(fidelity_poles(0.11, 0.11), 2.0 / 3.0, epsilon = 1e-15);
        // Table-S1-like operating point
        assert_relative_eq!(fidelity_poles(5.9, 0.11), 0.982, epsilon = 5e-4);
    }

    #[test]
    fn visibility_values() {
        assert_relative_eq!(visibility_model(1.5, 0.11, 2.5), 0.732, epsilon = 5e-4);
        assert_relative_eq!(visibility_model(1e12, 0.11, 2.5), 1.0, epsilon = 1e-9);
        assert_eq!(visibility_model(0.0, 0.11, 2.5), 0.0);
    }

    #[test]
    fn total_fidelity_values_and_composition() {
        let r = fidelity_total(1.5, 0.11, 2.5);
        assert_relative_eq!(r.f_total, 0.889, epsilon = 5e-4);
        let r = fidelity_total(5.9, 0.11, 2.5);
        assert_relative_eq!(r.f_total, 0.966, epsilon = 5e-4);
        // exact composition identity
        for mu in [0.3, 0.9, 2.7, 8.1] {
            let r = fidelity_total(mu, 0.11, 2.5);
            let composed = fidelity_poles(mu, 0.11) / 3.0
                + 2.0 / 3.0 * 0.5 * (1.0 + visibility_model(mu, 0.11, 2.5));
            assert_relative_eq!(r.f_total, composed, epsilon = 1e-15);
            assert_relative_eq!(
                r.f_total,
                r.f_el / 3.0 + 2.0 * r.f_pm / 3.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn fidelities_monotone_in_mu_and_parameters() {
        let mus = [0.2, 0.6, 1.1, 1.5, 3.2, 5.9, 20.0];
        for w in mus.windows(2) {
            let a = fidelity_total(w[0], 0.11, 2.5);
            let b = fidelity_total(w[1], 0.11, 2.5);
            assert!(b.f_el > a.f_el && b.f_pm > a.f_pm && b.f_total > a.f_total);
        }
        assert!(fidelity_total(1.5, 0.11, 2.5).f_pm > fidelity_total(1.5, 0.11, 3.5).f_pm);
        assert!(fidelity_total(1.5, 0.11, 2.5).f_total > fidelity_total(1.5, 0.2, 2.5).f_total);
    }
}
