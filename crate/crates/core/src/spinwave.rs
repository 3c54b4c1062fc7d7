//! Control-pulse transfer to/from the spin state and spin-wave dephasing.
//!
//! The transfer efficiency η_T is the final inversion probability of a
//! two-level system driven by a Gaussian-envelope, linearly chirped control
//! pulse, averaged over the detunings spanned by the comb. The spin-storage
//! survival factor η_C comes from the Fourier transform of a Gaussian spin
//! line of FWHM γ_in: at the intensity level
//! η_C(T_S) = exp(−(π·γ_in·T_S)²/(2·ln2)). The total spin-wave efficiency
//! composes as η_SW = η_AFC·η_T²·η_C (two control passes).

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

/// Chirped Gaussian control pulse.
#[derive(Debug, Clone, Copy)]
pub struct TransferPulse {
    /// Field-envelope FWHM in µs.
    pub fwhm_us: f64,
    /// Full frequency span of the linear chirp in MHz, swept across ±2σ of
    /// the envelope.
    pub chirp_span_mhz: f64,
    /// Peak Rabi frequency Ω/2π in MHz.
    pub peak_rabi_mhz: f64,
    /// Offset of the chirp centre from the comb centre in MHz.
    pub center_detuning_mhz: f64,
}

impl TransferPulse {
    pub fn new(fwhm_us: f64, chirp_span_mhz: f64, peak_rabi_mhz: f64) -> Result<Self> {
        if fwhm_us <= 0.0 {
            return Err(Error::invalid("fwhm_us", "must be > 0"));
        }
        if chirp_span_mhz < 0.0 || peak_rabi_mhz < 0.0 {
            return Err(Error::invalid("chirp/peak_rabi", "must be ≥ 0"));
        }
        Ok(Self {
            fwhm_us,
            chirp_span_mhz,
            peak_rabi_mhz,
            center_detuning_mhz: 0.0,
        })
    }

    /// Gaussian envelope standard deviation in µs.
    pub fn sigma_us(&self) -> f64 {
        self.fwhm_us / (2.0 * (2.0 * LN_2).sqrt())
    }

    /// Chirp rate in MHz/µs (span divided by the ±2σ window).
    pub fn chirp_rate(&self) -> f64 {
        self.chirp_span_mhz / (4.0 * self.sigma_us())
    }
}

/// Spin-line parameters.
#[derive(Debug, Clone, Copy)]
pub struct SpinParams {
    /// Spin inhomogeneous FWHM γ_in in kHz.
    pub gamma_in_khz: f64,
    /// Optional measured decoherence factor at a reference storage time,
    /// carried through reports for comparison.
    pub eta_c_ref: Option<(f64, f64)>,
}

impl SpinParams {
    pub fn new(gamma_in_khz: f64) -> Result<Self> {
        if gamma_in_khz <= 0.0 {
            return Err(Error::invalid("gamma_in_khz", "must be > 0"));
        }
        Ok(Self {
            gamma_in_khz,
            eta_c_ref: None,
        })
    }
}

/// Storage-time bookkeeping: τ_s = 1/Δ + T_S.
#[derive(Debug, Clone, Copy)]
pub struct StorageTimeline {
    pub afc_delay_us: f64,
    pub spin_time_us: f64,
}

impl StorageTimeline {
    pub fn new(delta_mhz: f64, spin_time_us: f64) -> Result<Self> {
        if delta_mhz <= 0.0 || spin_time_us < 0.0 {
            return Err(Error::invalid("timeline", "Δ > 0 and T_S ≥ 0 required"));
        }
        Ok(Self {
            afc_delay_us: 1.0 / delta_mhz,
            spin_time_us,
        })
    }

    pub fn total_us(&self) -> f64 {
        self.afc_delay_us + self.spin_time_us
    }
}

/// η_SW = η_AFC·η_T²·η_C and its factors.
#[derive(Debug, Clone, Copy)]
pub struct EfficiencyBreakdown {
    pub eta_afc: f64,
    pub eta_t: f64,
    pub eta_c: f64,
    pub eta_sw: f64,
}

/// Compose the total spin-wave efficiency from its factors.
pub fn total_efficiency(eta_afc: f64, eta_t: f64, eta_c: f64) -> Result<EfficiencyBreakdown> {
    for (name, v) in [("eta_afc", eta_afc), ("eta_t", eta_t), ("eta_c", eta_c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid("efficiency", format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(EfficiencyBreakdown {
        eta_afc,
        eta_t,
        eta_c,
        eta_sw: eta_afc * eta_t * eta_t * eta_c,
    })
}

/// Spin-dephasing survival factor η_C(T_S) = exp(−(πγT_S)²/(2·ln2)).
pub fn spin_decoherence(params: &SpinParams, spin_time_us: f64) -> f64 {
    let gamma_mhz = params.gamma_in_khz * 1e-3;
    let arg = PI * gamma_mhz * spin_time_us;
    (-arg * arg / (2.0 * LN_2)).exp()
}

/// Integration time step for the Bloch solver (µs).
const BLOCH_DT: f64 = 5e-4;
/// Detuning-average quadrature points (odd, endpoint rule).
const BLOCH_DETUNINGS: usize = 41;
/// Envelope support half-width in units of σ.
const BLOCH_SPAN_SIGMA: f64 = 4.0;

/// Single-pass transfer efficiency from a fixed-step RK4 integration of the
/// two-level Schrödinger equation, averaged over detunings uniform in
/// ±`detuning_spread_mhz`/2.
pub fn transfer_efficiency_bloch(pulse: &TransferPulse, detuning_spread_mhz: f64) -> Result<f64> {
    if detuning_spread_mhz < 0.0 {
        return Err(Error::invalid("detuning_spread_mhz", "must be ≥ 0"));
    }
    if pulse.peak_rabi_mhz == 0.0 {
        return Ok(0.0);
    }
    let n = if detuning_spread_mhz == 0.0 {
        1
    } else {
        BLOCH_DETUNINGS
    };
    let mut acc = 0.0;
    for k in 0..n {
        let det = if n == 1 {
            0.0
        } else {
            -detuning_spread_mhz / 2.0
                + detuning_spread_mhz * k as f64 / (n - 1) as f64
        };
        acc += invert_probability(pulse, det + pulse.center_detuning_mhz)?;
    }
    Ok(acc / n as f64)
}

/// Final excited-state population for one detuning.
fn invert_probability(pulse: &TransferPulse, detuning_mhz: f64) -> Result<f64> {
    let sigma = pulse.sigma_us();
    let rate = pulse.chirp_rate();
    let t0 = -BLOCH_SPAN_SIGMA * sigma;
    let t1 = BLOCH_SPAN_SIGMA * sigma;
    let steps = ((t1 - t0) / BLOCH_DT).ceil() as usize;
    let dt = (t1 - t0) / steps as f64;

    // two-level Hamiltonian in angular units (rad/µs):
    // H(t) = ½[[−δ(t), Ω(t)], [Ω(t), δ(t)]]
    let omega = |t: f64| {
        2.0 * PI
            * pulse.peak_rabi_mhz
            * (-2.0 * LN_2 * t * t / (pulse.fwhm_us * pulse.fwhm_us)).exp()
    };
    let delta = |t: f64| 2.0 * PI * (detuning_mhz - rate * t);
    let deriv = |t: f64, g: Complex64, e: Complex64| {
        let om = omega(t);
        let de = delta(t);
        let dg = Complex64::new(0.0, -0.5) * (Complex64::new(-de, 0.0) * g + om * e);
        let de_ = Complex64::new(0.0, -0.5) * (om * g + Complex64::new(de, 0.0) * e);
        (dg, de_)
    };

    let mut g = Complex64::new(1.0, 0.0);
    let mut e = Complex64::new(0.0, 0.0);
    let mut t = t0;
    for _ in 0..steps {
        let (k1g, k1e) = deriv(t, g, e);
        let (k2g, k2e) = deriv(t + dt / 2.0, g + k1g * (dt / 2.0), e + k1e * (dt / 2.0));
        let (k3g, k3e) = deriv(t + dt / 2.0, g + k2g * (dt / 2.0), e + k2e * (dt / 2.0));
        let (k4g, k4e) = deriv(t + dt, g + k3g * dt, e + k3e * dt);
        g += (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (dt / 6.0);
        e += (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (dt / 6.0);
        t += dt;
    }
    let norm = g.norm_sqr() + e.norm_sqr();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NormDrift {
            drift: (norm - 1.0).abs(),
        });
    }
    Ok(e.norm_sqr() / norm)
}

/// Find the peak Rabi frequency that reproduces a target η_T for the given
/// pulse shape (1-D bisection on the monotone adiabatic branch).
pub fn calibrate_peak_rabi(
    fwhm_us: f64,
    chirp_span_mhz: f64,
    detuning_spread_mhz: f64,
    target_eta_t: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&target_eta_t) {
        return Err(Error::invalid("target_eta_t", "must be in [0, 1)"));
    }
    let eval = |rabi: f64| -> Result<f64> {
        let p = TransferPulse::new(fwhm_us, chirp_span_mhz, rabi)?;
        transfer_efficiency_bloch(&p, detuning_spread_mhz)
    };
    let (mut lo, mut hi) = (1e-3, 0.5);
    while eval(hi)? < target_eta_t {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::NoBracket(format!(
                "eta_T = {target_eta_t} not reached below 64 MHz Rabi"
            )));
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target_eta_t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
