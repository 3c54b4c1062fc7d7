//! Field propagation through a spectral grid and AFC echo analysis.
//!
//! The grid's absorption profile defines a transfer function
//! H(ν) = exp(−d(ν)/2 + iφ(ν)) whose phase is the Hilbert transform of
//! −d(ν)/2, the minimum-phase (Kramers–Kronig) response of a causal
//! absorber. Propagation multiplies the input spectrum by H on a
//! zero-padded record whose frequency resolution matches the grid sampling,
//! so comb teeth are fully resolved.

use crate::error::{Error, Result};
use crate::fourier;
use crate::spectrum::{CombSpec, SpectralGrid, ToothShape};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

/// Complex baseband optical field sampled in time.
#[derive(Debug, Clone)]
pub struct FieldEnvelope {
    pub samples: Vec<Complex64>,
    /// Sample interval in µs.
    pub dt_us: f64,
    /// Time of the first sample in µs.
    pub t0_us: f64,
    /// Detuning of the envelope carrier from the comb centre in MHz.
    pub carrier_offset_mhz: f64,
}

impl FieldEnvelope {
    pub fn new(samples: Vec<Complex64>, dt_us: f64, t0_us: f64) -> Result<Self> {
        if dt_us <= 0.0 || dt_us > 0.02 + 1e-15 {
            return Err(Error::invalid(
                "dt_us",
                format!("sample interval {dt_us} µs must be in (0, 0.02]"),
            ));
        }
        let energy: f64 = samples.iter().map(|a| a.norm_sqr()).sum::<f64>() * dt_us;
        if !energy.is_finite() {
            return Err(Error::invalid("samples", "field energy is not finite"));
        }
        Ok(Self {
            samples,
            dt_us,
            t0_us,
            carrier_offset_mhz: 0.0,
        })
    }

    /// Gaussian pulse with the given field-envelope FWHM, centred at
    /// `peak_us`, on a record `[0, record_us)`.
    pub fn gaussian(fwhm_us: f64, peak_us: f64, dt_us: f64, record_us: f64) -> Result<Self> {
        if fwhm_us <= 0.0 || record_us <= 0.0 {
            return Err(Error::invalid("fwhm/record", "must be > 0"));
        }
        let n = (record_us / dt_us).round() as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt_us - peak_us;
                Complex64::new((-2.0 * LN_2 * t * t / (fwhm_us * fwhm_us)).exp(), 0.0)
            })
            .collect();
        Self::new(samples, dt_us, 0.0)
    }

    /// Total energy Σ|a|²·dt.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt_us
    }

    /// Energy within `[lo_us, hi_us)`.
    pub fn energy_in(&self, lo_us: f64, hi_us: f64) -> f64 {
        let mut acc = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            let t = self.t0_us + i as f64 * self.dt_us;
            if t >= lo_us && t < hi_us {
                acc += a.norm_sqr();
            }
        }
        acc * self.dt_us
    }

    /// Time of maximum intensity within `[lo_us, hi_us)`.
    pub fn peak_time_in(&self, lo_us: f64, hi_us: f64) -> f64 {
        let mut best = (self.t0_us, 0.0);
        for (i, a) in self.samples.iter().enumerate() {
            let t = self.t0_us + i as f64 * self.dt_us;
            if t >= lo_us && t < hi_us && a.norm_sqr() > best.1 {
                best = (t, a.norm_sqr());
            }
        }
        best.0
    }

    /// Support of the pulse: the region where the intensity exceeds
    /// `frac` of its maximum.
    pub fn support(&self, frac: f64) -> (f64, f64) {
        let peak = self
            .samples
            .iter()
            .map(|a| a.norm_sqr())
            .fold(0.0, f64::max);
        let thr = frac * peak;
        let mut lo = self.t0_us;
        let mut hi = self.t0_us;
        let mut found = false;
        for (i, a) in self.samples.iter().enumerate() {
            if a.norm_sqr() >= thr {
                let t = self.t0_us + i as f64 * self.dt_us;
                if !found {
                    lo = t;
                    found = true;
                }
                hi = t;
            }
        }
        (lo, hi)
    }

    /// CSV rows `time_us,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.samples.len() * 32);
        s.push_str("time_us,re,im\n");
        for (i, a) in self.samples.iter().enumerate() {
            s.push_str(&format!(
                "{:.6},{:.9e},{:.9e}\n",
                self.t0_us + i as f64 * self.dt_us,
                a.re,
                a.im
            ));
        }
        s
    }
}

/// Complex spectral response H(ν) sampled on the grid axis.
#[derive(Debug, Clone)]
pub struct SpectralResponse {
    pub start_mhz: f64,
    pub spacing_mhz: f64,
    /// Phase φ(ν): Hilbert transform of −d(ν)/2.
    pub phase: Vec<f64>,
    /// Amplitude |H(ν)| = exp(−d(ν)/2), exact by construction.
    pub amplitude: Vec<f64>,
}

impl SpectralResponse {
    pub fn h_at(&self, nu_mhz: f64) -> Complex64 {
        let amp = self.interp(&self.amplitude, nu_mhz);
        let ph = self.interp(&self.phase, nu_mhz);
        Complex64::from_polar(amp, ph)
    }

    fn interp(&self, values: &[f64], nu: f64) -> f64 {
        let idx = (nu - self.start_mhz) / self.spacing_mhz;
        if idx <= 0.0 {
            return values[0];
        }
        let last = values.len() - 1;
        if idx >= last as f64 {
            return values[last];
        }
        let i = idx.floor() as usize;
        let frac = idx - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

/// Edge-step tolerance for the Kramers–Kronig transform, relative to the
/// depth range.
const KK_EDGE_TOL: f64 = 0.05;

/// Causal spectral response of the grid.
pub fn kramers_kronig(grid: &SpectralGrid) -> Result<SpectralResponse> {
    let d = &grid.optical_depth;
    let range = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - d.iter().cloned().fold(f64::INFINITY, f64::min);
    let jump = (d[0] - d[d.len() - 1]).abs();
    if range > 1e-12 && jump > KK_EDGE_TOL * range {
        return Err(Error::WindowTooNarrow { jump });
    }
    let half: Vec<f64> = d.iter().map(|&v| -0.5 * v).collect();
    let phase = fourier::hilbert(&half, 4);
    let amplitude = d.iter().map(|&v| (-0.5 * v).exp()).collect();
    Ok(SpectralResponse {
        start_mhz: grid.start_mhz,
        spacing_mhz: grid.spacing_mhz,
        phase,
        amplitude,
    })
}

/// Largest share of the input energy allowed outside the grid window.
const BAND_LEAK_TOL: f64 = 1e-3;
/// Aliasing guard: energy share in the trailing 5% of the padded record.
const ALIAS_TOL: f64 = 1e-2;

/// Propagate a field through the grid.
pub fn propagate(field: &FieldEnvelope, grid: &SpectralGrid) -> Result<FieldEnvelope> {
    let response = kramers_kronig(grid)?;
    propagate_with(field, grid, &response)
}

/// Propagate with a precomputed response (saves the Hilbert transform when
/// sweeping many pulses over one grid).
pub fn propagate_with(
    field: &FieldEnvelope,
    grid: &SpectralGrid,
    response: &SpectralResponse,
) -> Result<FieldEnvelope> {
    let n = field.samples.len();
    if n == 0 {
        return Ok(field.clone());
    }
    // pad so the FFT resolution matches the grid sampling
    let needed = (1.0 / (grid.spacing_mhz * field.dt_us)).ceil() as usize;
    let n_pad = fourier::next_pow2(needed.max(n));

    let mut buf = field.samples.clone();
    buf.resize(n_pad, Complex64::new(0.0, 0.0));
    let mut spectrum = fourier::time_to_freq(&buf);
    let freqs = fourier::fft_freq(n_pad, field.dt_us);

    // band check: input energy outside the grid window
    let total: f64 = spectrum.iter().map(|a| a.norm_sqr()).sum();
    if total > 0.0 {
        let window = grid.end_mhz().min(-grid.start_mhz);
        let outside: f64 = spectrum
            .iter()
            .zip(&freqs)
            .filter(|(_, &f)| (f + field.carrier_offset_mhz).abs() > window)
            .map(|(a, _)| a.norm_sqr())
            .sum();
        if outside / total > BAND_LEAK_TOL {
            return Err(Error::FieldOutsideWindow {
                field_mhz: 1.0 / field.dt_us / 2.0,
                window_mhz: window,
            });
        }
    }

    for (a, &f) in spectrum.iter_mut().zip(&freqs) {
        *a *= response.h_at(f + field.carrier_offset_mhz);
    }
    let out_full = fourier::freq_to_time(&spectrum);

    // aliasing guard on the padded record
    let out_energy: f64 = out_full.iter().map(|a| a.norm_sqr()).sum();
    let tail: f64 = out_full[n_pad - n_pad / 20..]
        .iter()
        .map(|a| a.norm_sqr())
        .sum();
    if out_energy > 0.0 && tail / out_energy > ALIAS_TOL {
        return Err(Error::Aliasing {
            frac: tail / out_energy,
        });
    }

    Ok(FieldEnvelope {
        samples: out_full[..n].to_vec(),
        dt_us: field.dt_us,
        t0_us: field.t0_us,
        carrier_offset_mhz: field.carrier_offset_mhz,
    })
}

/// Analytic AFC echo efficiency for well-separated teeth.
///
/// Gaussian teeth: η = d̃²·e^{−d̃}·e^{−7/F²}·e^{−d₀};
/// square teeth: η = d̃²·e^{−d̃}·sinc²(π/F)·e^{−d₀}, with d̃ = d/F.
pub fn afc_efficiency_analytic(spec: &CombSpec) -> f64 {
    let dt = spec.effective_depth();
    let dephasing = match spec.tooth_shape {
        ToothShape::Gaussian => (-7.0 / (spec.finesse * spec.finesse)).exp(),
        ToothShape::Square => {
            let x = PI / spec.finesse;
            let s = x.sin() / x;
            s * s
        }
    };
    dt * dt * (-dt).exp() * dephasing * (-spec.background_depth).exp()
}

/// Windowed energy bookkeeping of a propagated record.
#[derive(Debug, Clone)]
pub struct EchoReport {
    /// Energy in the input (transmitted pulse) window over input energy.
    pub transmitted_energy_fraction: f64,
    /// Energy in the echo window over input energy.
    pub echo_energy_fraction: f64,
    /// Time of the echo intensity maximum in µs.
    pub echo_peak_time_us: f64,
    /// The echo window actually integrated, µs.
    pub window_used: (f64, f64),
    /// Share of the total echo-mode energy (everything after the
    /// transmitted pulse) captured by the window.
    pub capture_fraction: f64,
}

/// Integrate the propagated field in an echo window and report energy
/// fractions normalised to the input energy.
pub fn extract_echo(
    field: &FieldEnvelope,
    input_ref: &FieldEnvelope,
    expected_echo_time_us: f64,
    window_width_us: f64,
) -> Result<EchoReport> {
    let record_end = field.t0_us + field.samples.len() as f64 * field.dt_us;
    if expected_echo_time_us < field.t0_us || expected_echo_time_us > record_end {
        return Err(Error::invalid(
            "expected_echo_time_us",
            format!("{expected_echo_time_us} µs outside the record"),
        ));
    }
    let input_energy = input_ref.energy();
    let (in_lo, in_hi) = input_ref.support(1e-6);
    let win = (
        expected_echo_time_us - window_width_us / 2.0,
        expected_echo_time_us + window_width_us / 2.0,
    );
    if win.0 < in_hi && win.1 > in_lo {
        return Err(Error::WindowOverlapsInput {
            lo_us: win.0,
            hi_us: win.1,
        });
    }
    if input_energy <= 0.0 || field.energy() <= 0.0 {
        return Ok(EchoReport {
            transmitted_energy_fraction: 0.0,
            echo_energy_fraction: 0.0,
            echo_peak_time_us: expected_echo_time_us,
            window_used: win,
            capture_fraction: 0.0,
        });
    }
    let transmitted = field.energy_in(in_lo, in_hi);
    let echo = field.energy_in(win.0, win.1);
    let echo_mode_total = field.energy_in(in_hi, record_end);
    let search = (window_width_us * 2.0).max(1.0);
    let peak = field.peak_time_in(
        (expected_echo_time_us - search).max(in_hi),
        (expected_echo_time_us + search).min(record_end),
    );
    Ok(EchoReport {
        transmitted_energy_fraction: transmitted / input_energy,
        echo_energy_fraction: echo / input_energy,
        echo_peak_time_us: peak,
        window_used: win,
        capture_fraction: if echo_mode_total > 0.0 {
            echo / echo_mode_total
        } else {
            0.0
        },
    })
}
