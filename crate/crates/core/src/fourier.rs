//! Thin FFT helpers over `rustfft` plus the discrete Hilbert transform.
//!
//! Conventions: a time-domain signal sampled at `dt` transforms to the
//! frequency domain with the kernel e^{+i2πνt} ([`time_to_freq`]) and back
//! with e^{−i2πνt}/N ([`freq_to_time`]). With frequencies in MHz and times
//! in µs the product νt is dimensionless. A causal response is then analytic
//! in the upper half of the complex ν plane, which fixes the sign of the
//! Hilbert transform used for Kramers–Kronig phases.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// FFT bin frequencies for `n` samples spaced by `dt` (same layout as the
/// usual fftfreq: positive bins first, then negative).
pub fn fft_freq(n: usize, dt: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * dt);
    (0..n)
        .map(|k| {
            if k <= (n - 1) / 2 {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}

/// Smallest power of two ≥ `n`.
pub fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

/// Transform time samples to the frequency domain (kernel e^{+i2πνt},
/// unnormalized).
pub fn time_to_freq(samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf
}

/// Transform a spectrum back to time samples (kernel e^{−i2πνt}, scaled by
/// 1/N so that `freq_to_time(time_to_freq(x)) == x`).
pub fn freq_to_time(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Discrete Hilbert transform of a real sequence via the analytic-signal
/// construction: returns h with `x + i·h` analytic in the upper half plane.
///
/// The input is extended to `pad_factor` times its length (power of two)
/// after subtracting the mean of its two edge values, which keeps
/// wrap-around leakage small for profiles that settle to a constant at the
/// edges.
pub fn hilbert(x: &[f64], pad_factor: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > 1, "hilbert needs at least two samples");
    let base = 0.5 * (x[0] + x[n - 1]);
    let nfft = next_pow2(n * pad_factor.max(1));

    let mut buf: Vec<Complex64> = Vec::with_capacity(nfft);
    buf.extend(x.iter().map(|&v| Complex64::new(v - base, 0.0)));
    buf.resize(nfft, Complex64::new(0.0, 0.0));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(nfft).process(&mut buf);

    // analytic-signal filter: keep DC and Nyquist, double positive bins,
    // zero negative bins
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || k == nfft / 2 {
            // unchanged
        } else if k < nfft / 2 {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    let scale = 1.0 / nfft as f64;
    buf.iter().take(n).map(|v| v.im * scale).collect()
}
