//! Filter/detection chain, noise budget, and photon-counting statistics.
//!
//! Noise referred to the memory output is decomposed into three calibrated
//! sources: narrowband fluorescence with spectral density ρ passing the
//! filter hole (∝ hole width), a broadband floor B absorbed by the filter
//! crystal whenever it is in the beam, and temporally gated control leakage
//! L suppressed by the filter's extinction ratio when the control frequency
//! falls outside the hole. The two control pulses contribute equally, so
//! every per-pulse source scales with the number of enabled control pulses.

use crate::error::{Error, Result};
use crate::rng::trial_rng;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Transmissions and detector constants of the detection path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Cryostat→detector transmission, fiber coupling included.
    pub path_transmission: f64,
    /// Fiber-coupling share of `path_transmission`, recorded for reference.
    pub fiber_coupling: f64,
    /// Single-photon detector efficiency η_d.
    pub detector_efficiency: f64,
    /// Detector dark count rate in Hz.
    pub dark_rate_hz: f64,
    /// Detection gate per trial in µs.
    pub gate_window_us: f64,
    /// Control→signal spatial mode extinction.
    pub spatial_extinction: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            path_transmission: 0.13,
            fiber_coupling: 0.60,
            detector_efficiency: 0.60,
            dark_rate_hz: 10.0,
            gate_window_us: 0.7,
            spatial_extinction: 1e-5,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("path_transmission", self.path_transmission),
            ("fiber_coupling", self.fiber_coupling),
            ("detector_efficiency", self.detector_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid("chain", format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.dark_rate_hz < 0.0 {
            return Err(Error::invalid("dark_rate_hz", "must be ≥ 0"));
        }
        Ok(())
    }

    /// Memory-output→click transmission: the quoted path transmission is
    /// cryostat→detector inclusive of fiber coupling, exclusive of η_d.
    pub fn t_chain(&self) -> f64 {
        self.path_transmission * self.detector_efficiency
    }

    /// Dark counts per trial inside the gate.
    pub fn dark_counts_per_trial(&self) -> f64 {
        self.dark_rate_hz * self.gate_window_us * 1e-6
    }
}

/// Spectral filter setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FilterMode {
    /// Hole of the given width burned at the signal frequency.
    Hole { width_mhz: f64 },
    /// 14 MHz transparency window matching the memory pit; the control
    /// frequency passes.
    WidePit,
    /// Filter crystal out of the beam.
    Bypassed,
}

/// Filter crystal configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub mode: FilterMode,
    /// Extinction ratio at the control frequency for holes that exclude it.
    pub control_extinction: f64,
}

/// Width of the matched wide-pit window in MHz.
pub const WIDE_PIT_MHZ: f64 = 14.0;

impl FilterConfig {
    pub fn hole(width_mhz: f64) -> Result<Self> {
        if width_mhz <= 0.0 {
            return Err(Error::invalid("width_mhz", "hole width must be > 0"));
        }
        Ok(Self {
            mode: FilterMode::Hole { width_mhz },
            control_extinction: 750.0,
        })
    }

    pub fn wide_pit() -> Self {
        Self {
            mode: FilterMode::WidePit,
            control_extinction: 750.0,
        }
    }

    pub fn bypassed() -> Self {
        Self {
            mode: FilterMode::Bypassed,
            control_extinction: 750.0,
        }
    }

    pub fn validate(&self, input_control_separation_mhz: f64) -> Result<()> {
        if self.control_extinction < 1.0 {
            return Err(Error::invalid("control_extinction", "must be ≥ 1"));
        }
        if let FilterMode::Hole { width_mhz } = self.mode {
            if width_mhz <= 0.0 {
                return Err(Error::invalid("width_mhz", "hole width must be > 0"));
            }
            if width_mhz / 2.0 >= input_control_separation_mhz {
                return Err(Error::invalid(
                    "width_mhz",
                    "hole reaches the control frequency; use the wide-pit mode",
                ));
            }
        }
        Ok(())
    }

    /// Spectral window open to narrowband fluorescence, MHz.
    fn fluorescence_window_mhz(&self) -> f64 {
        match self.mode {
            FilterMode::Hole { width_mhz } => width_mhz,
            FilterMode::WidePit | FilterMode::Bypassed => WIDE_PIT_MHZ,
        }
    }

    /// Pass factor for gated control leakage.
    fn control_pass(&self) -> f64 {
        match self.mode {
            FilterMode::Hole { .. } => 1.0 / self.control_extinction,
            FilterMode::WidePit | FilterMode::Bypassed => 1.0,
        }
    }

    /// True when the broadband floor reaches the detector.
    fn broadband_passes(&self) -> bool {
        matches!(self.mode, FilterMode::Bypassed)
    }

    /// Share of a Gaussian echo spectrum (set by the pulse duration)
    /// transmitted through the hole.
    pub fn signal_pass_fraction(&self, pulse_fwhm_us: f64) -> f64 {
        match self.mode {
            FilterMode::Hole { width_mhz } => {
                let arg = std::f64::consts::PI * pulse_fwhm_us * width_mhz
                    / (2.0 * std::f64::consts::LN_2.sqrt());
                erf(arg)
            }
            FilterMode::WidePit | FilterMode::Bypassed => 1.0,
        }
    }

    /// Nominal signal loss at this setting for the default 430 ns pulse.
    pub fn signal_pass_loss(&self) -> f64 {
        1.0 - self.signal_pass_fraction(0.43)
    }
}

/// Calibrated noise sources referred to the memory output, quoted for the
/// full two-control-pulse sequence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Narrowband fluorescence spectral density, photons/pulse/MHz.
    pub fluor_density_per_mhz: f64,
    /// Broadband floor absorbed by the filter crystal, photons/pulse.
    pub broadband_floor: f64,
    /// Gated control leakage before filter extinction, photons/pulse.
    pub gated_leakage: f64,
    /// Enabled control pulses (2 in normal operation).
    pub control_pulses: u8,
}

impl NoiseModel {
    /// Scale factor for per-pulse sources.
    fn pulse_scale(&self) -> f64 {
        f64::from(self.control_pulses) / 2.0
    }

    /// Fluorescence part of the unconditional noise (density + broadband).
    pub fn fluorescence_contribution(&self, filter: &FilterConfig) -> f64 {
        let mut p = self.fluor_density_per_mhz * filter.fluorescence_window_mhz();
        if filter.broadband_passes() {
            p += self.broadband_floor;
        }
        p * self.pulse_scale()
    }

    /// Leakage part of the unconditional noise.
    pub fn leakage_contribution(&self, filter: &FilterConfig) -> f64 {
        self.gated_leakage * filter.control_pass() * self.pulse_scale()
    }

    /// Same model with a different number of enabled control pulses.
    pub fn with_control_pulses(&self, pulses: u8) -> Self {
        Self {
            control_pulses: pulses,
            ..*self
        }
    }
}

/// Unconditional noise floor p_N (photons/pulse at the memory output) for a
/// filter setting.
pub fn noise_budget(noise: &NoiseModel, filter: &FilterConfig) -> f64 {
    noise.fluorescence_contribution(filter) + noise.leakage_contribution(filter)
}

/// Solve the noise model from measured (filter, p_N) anchors.
///
/// Three anchors (hole, wide pit, bypass) pin all three sources; a hole plus
/// a wide pit pin the density and leakage; a single hole anchor pins the
/// density alone.
pub fn calibrate_noise(anchors: &[(FilterConfig, f64)]) -> Result<NoiseModel> {
    if anchors.is_empty() {
        return Err(Error::InfeasibleAnchors("no anchors given".into()));
    }
    let hole = anchors
        .iter()
        .find(|(f, _)| matches!(f.mode, FilterMode::Hole { .. }));
    let pit = anchors.iter().find(|(f, _)| f.mode == FilterMode::WidePit);
    let bypass = anchors
        .iter()
        .find(|(f, _)| f.mode == FilterMode::Bypassed);

    let (rho, leak) = match (hole, pit) {
        (Some(&(hf, hp)), Some(&(_, pp))) => {
            let (w, ext) = match hf.mode {
                FilterMode::Hole { width_mhz } => (width_mhz, hf.control_extinction),
                _ => unreachable!(),
            };
            // hp = ρw + L/ext ; pp = ρ·14 + L
            let rho = (hp - pp / ext) / (w - WIDE_PIT_MHZ / ext);
            let leak = pp - rho * WIDE_PIT_MHZ;
            (rho, leak)
        }
        (Some(&(hf, hp)), None) => {
            let w = match hf.mode {
                FilterMode::Hole { width_mhz } => width_mhz,
                _ => unreachable!(),
            };
            (hp / w, 0.0)
        }
        (None, Some(&(_, pp))) => (pp / WIDE_PIT_MHZ, 0.0),
        (None, None) => {
            return Err(Error::InfeasibleAnchors(
                "need at least one hole or wide-pit anchor".into(),
            ))
        }
    };
    let broadband = match bypass {
        Some(&(_, bp)) => bp - rho * WIDE_PIT_MHZ - leak,
        None => 0.0,
    };
    for (name, v) in [
        ("fluorescence density", rho),
        ("gated leakage", leak),
        ("broadband floor", broadband),
    ] {
        if v < 0.0 {
            return Err(Error::InfeasibleAnchors(format!(
                "{name} would be negative ({v:.3e})"
            )));
        }
    }
    let model = NoiseModel {
        fluor_density_per_mhz: rho,
        broadband_floor: broadband,
        gated_leakage: leak,
        control_pulses: 2,
    };
    // anchors must be reproduced within their own rounding
    for (f, p) in anchors {
        let back = noise_budget(&model, f);
        if (back - p).abs() > 1e-9 + 1e-6 * p.abs() {
            return Err(Error::InfeasibleAnchors(format!(
                "anchor at {:?} not reproduced: {back:.4e} vs {p:.4e}",
                f.mode
            )));
        }
    }
    Ok(model)
}

/// Per-window mean counts per trial at the detector.
#[derive(Debug, Clone, Copy)]
pub struct WindowMeans {
    /// Echo-window mean (signal plus noise).
    pub echo: f64,
    /// Matched-width noise-window mean.
    pub noise: f64,
    /// Analytic SNR = (echo − noise)/noise.
    pub snr: f64,
}

/// Analytic expected counts for one input pulse of mean photon number
/// `mu_in`. `capture_fraction` is the share of the retrieved echo falling in
/// the detection window; the quoted p_N and η_SW refer to the same window,
/// so the default operating point uses 1.0.
pub fn expected_counts(
    mu_in: f64,
    eta_sw: f64,
    capture_fraction: f64,
    chain: &DetectionChain,
    p_n: f64,
) -> Result<WindowMeans> {
    if mu_in < 0.0 {
        return Err(Error::invalid("mu_in", "must be ≥ 0"));
    }
    let noise = p_n * chain.t_chain() + chain.dark_counts_per_trial();
    let signal = mu_in * eta_sw * capture_fraction * chain.t_chain();
    Ok(WindowMeans {
        echo: signal + noise,
        noise,
        snr: if noise > 0.0 { signal / noise } else { f64::INFINITY },
    })
}

/// Input photon number at which SNR = 1: μ₁ = p_N/(η_SW·capture).
pub fn mu_one(p_n: f64, eta_sw: f64, capture_fraction: f64) -> f64 {
    p_n / (eta_sw * capture_fraction)
}

/// Histogram of detected counts over time bins.
#[derive(Debug, Clone)]
pub struct CountHistogram {
    /// Bin edges in µs, `counts.len() + 1` entries.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub trials: u64,
    /// Named (label, lo_us, hi_us) windows.
    pub windows: Vec<(String, f64, f64)>,
}

impl CountHistogram {
    /// Total counts with bin centres inside `[lo, hi)`.
    pub fn counts_in(&self, lo: f64, hi: f64) -> u64 {
        let mut acc = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            let mid = 0.5 * (self.bin_edges[i] + self.bin_edges[i + 1]);
            if mid >= lo && mid < hi {
                acc += c;
            }
        }
        acc
    }

    pub fn window_counts(&self, label: &str) -> Option<u64> {
        self.windows
            .iter()
            .find(|(l, _, _)| l == label)
            .map(|&(_, lo, hi)| self.counts_in(lo, hi))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV rows `bin_start_us,bin_end_us,counts`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.counts.len() * 24);
        s.push_str("bin_start_us,bin_end_us,counts\n");
        for (i, &c) in self.counts.iter().enumerate() {
            s.push_str(&format!(
                "{:.4},{:.4},{}\n",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                c
            ));
        }
        s
    }
}

/// One named emission window for the counting Monte Carlo.
#[derive(Debug, Clone)]
pub struct EmissionWindow {
    pub label: String,
    pub lo_us: f64,
    pub hi_us: f64,
    /// Mean detected counts per trial in this window.
    pub mean_per_trial: f64,
}

/// Draw Poissonian counts per trial and window; each count lands uniformly
/// inside its window. Per-trial substreams make the result independent of
/// trial ordering.
pub fn simulate_counting(
    windows: &[EmissionWindow],
    record_us: f64,
    bin_width_us: f64,
    trials: u64,
    seed: u64,
) -> Result<CountHistogram> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be ≥ 1"));
    }
    if bin_width_us <= 0.0 || record_us <= bin_width_us {
        return Err(Error::invalid("bins", "need record > bin width > 0"));
    }
    for w in windows {
        if w.mean_per_trial < 0.0 || w.hi_us <= w.lo_us {
            return Err(Error::invalid("windows", "need hi > lo and mean ≥ 0"));
        }
    }
    let n_bins = (record_us / bin_width_us).ceil() as usize;
    let mut counts = vec![0u64; n_bins];
    let samplers: Vec<Option<Poisson<f64>>> = windows
        .iter()
        .map(|w| {
            if w.mean_per_trial > 0.0 {
                Some(Poisson::new(w.mean_per_trial).expect("positive mean"))
            } else {
                None
            }
        })
        .collect();
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        for (w, sampler) in windows.iter().zip(&samplers) {
            let Some(sampler) = sampler else { continue };
            let n = sampler.sample(&mut rng) as u64;
            for _ in 0..n {
                let t: f64 = rng.gen_range(w.lo_us..w.hi_us);
                let bin = ((t / bin_width_us) as usize).min(n_bins - 1);
                counts[bin] += 1;
            }
        }
    }
    let bin_edges = (0..=n_bins).map(|i| i as f64 * bin_width_us).collect();
    Ok(CountHistogram {
        bin_edges,
        counts,
        trials,
        windows: windows
            .iter()
            .map(|w| (w.label.clone(), w.lo_us, w.hi_us))
            .collect(),
    })
}

/// SNR estimate from counted events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrEstimate {
    Finite { snr: f64, sigma: f64 },
    /// Empty noise window: SNR unbounded.
    Infinite,
}

/// (S − N)/N over the histogram's `echo` and `noise` windows with Poissonian
/// error propagation. A width mismatch rescales the noise window.
pub fn snr_from_histogram(h: &CountHistogram) -> Result<SnrEstimate> {
    let find = |label: &str| {
        h.windows
            .iter()
            .find(|(l, _, _)| l == label)
            .map(|&(_, lo, hi)| (lo, hi))
    };
    let (s_lo, s_hi) =
        find("echo").ok_or_else(|| Error::invalid("histogram", "missing `echo` window"))?;
    let (n_lo, n_hi) =
        find("noise").ok_or_else(|| Error::invalid("histogram", "missing `noise` window"))?;
    if n_hi <= n_lo {
        return Err(Error::invalid("histogram", "empty noise window"));
    }
    let s = h.counts_in(s_lo, s_hi) as f64;
    let n = h.counts_in(n_lo, n_hi) as f64;
    let ratio = (s_hi - s_lo) / (n_hi - n_lo);
    if n == 0.0 {
        return Ok(SnrEstimate::Infinite);
    }
    let n_eff = ratio * n;
    let snr = (s - n_eff) / n_eff;
    let var = s / (n_eff * n_eff) + s * s / (n_eff * n_eff * n_eff) * ratio;
    Ok(SnrEstimate::Finite {
        snr,
        sigma: var.sqrt(),
    })
}

/// Error function (Abramowitz & Stegun 7.1.26, |ε| ≤ 1.5e−7).
pub(crate) fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}
