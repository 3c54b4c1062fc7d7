//! Property suites over randomized inputs.

use afcsim_core::benchmark::classical_bound;
use afcsim_core::detection::{expected_counts, DetectionChain};
use afcsim_core::fitkit::{fit, FitModel};
use afcsim_core::harness::validate_config;
use afcsim_core::propagation::{afc_efficiency_analytic, kramers_kronig, propagate_with};
use afcsim_core::spectrum::{
    build_comb_analytic, measure_comb, simulate_pumping, CombSpec, HyperfineScheme, PumpSequence,
    PumpStep, SpectralGrid, TargetTransition, ToothShape,
};
use afcsim_core::spinwave::{spin_decoherence, SpinParams};
use afcsim_core::FieldEnvelope;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // measure_comb ∘ build_comb_analytic recovers every field within 2%
    #[test]
    fn comb_measurement_round_trips(
        finesse in 2.0..10.0f64,
        depth in 0.5..8.0f64,
        background in 0.0..1.2f64,
    ) {
        let spec = CombSpec::new(0.2, 3.5, ToothShape::Gaussian, depth, background, finesse)
            .unwrap();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        let m = measure_comb(&grid).unwrap();
        prop_assert!((m.delta_mhz - spec.delta_mhz).abs() <= 0.02 * spec.delta_mhz);
        prop_assert!((m.peak_depth - depth).abs() <= 0.02 * depth);
        prop_assert!((m.finesse - finesse).abs() <= 0.02 * finesse);
        // the background tolerance is absolute when d0 sits near zero
        let tol = (0.02 * background).max(0.01);
        prop_assert!((m.background_depth - background).abs() <= tol);
    }

    // propagation through any passive comb never creates energy
    #[test]
    fn propagation_is_passive(
        finesse in 2.5..8.0f64,
        depth in 0.2..6.0f64,
        background in 0.0..1.0f64,
        fwhm in 0.2..0.8f64,
    ) {
        let spec = CombSpec::new(0.2, 3.5, ToothShape::Gaussian, depth, background, finesse)
            .unwrap();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        let response = kramers_kronig(&grid).unwrap();
        let input = FieldEnvelope::gaussian(fwhm, 2.0, 0.01, 20.0).unwrap();
        let out = propagate_with(&input, &grid, &response).unwrap();
        prop_assert!(out.energy() <= input.energy() * (1.0 + 1e-9));
    }

    // the superposition principle holds through the full FFT path
    #[test]
    fn propagation_is_linear(
        a_re in -2.0..2.0f64,
        b_im in -2.0..2.0f64,
        shift in 0.0..2.0f64,
    ) {
        let spec = CombSpec::paper_default();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        let response = kramers_kronig(&grid).unwrap();
        let f1 = FieldEnvelope::gaussian(0.43, 2.0, 0.01, 20.0).unwrap();
        let f2 = FieldEnvelope::gaussian(0.3, 2.0 + shift, 0.01, 20.0).unwrap();
        let (a, b) = (Complex64::new(a_re, 0.3), Complex64::new(0.1, b_im));
        let mut combo = f1.clone();
        for i in 0..combo.samples.len() {
            combo.samples[i] = a * f1.samples[i] + b * f2.samples[i];
        }
        let p1 = propagate_with(&f1, &grid, &response).unwrap();
        let p2 = propagate_with(&f2, &grid, &response).unwrap();
        let pc = propagate_with(&combo, &grid, &response).unwrap();
        let scale = pc.samples.iter().map(|v| v.norm()).fold(1e-12, f64::max);
        for i in 0..pc.samples.len() {
            let lin = a * p1.samples[i] + b * p2.samples[i];
            prop_assert!((pc.samples[i] - lin).norm() <= 1e-9 * scale);
        }
    }

    // ground-state population is conserved by arbitrary pump steps
    #[test]
    fn pumping_conserves_population(
        center in -18.0..18.0f64,
        width in 0.0..6.0f64,
        strength in 0.1..30.0f64,
        duration in 0.4..4.0f64,
    ) {
        let scheme = HyperfineScheme::default();
        let classes = scheme.classes();
        let grid = SpectralGrid::thermal(24.0, 0.005, 7.0, scheme.clone()).unwrap();
        let seq = PumpSequence(vec![PumpStep {
            center_mhz: center,
            sweep_width_mhz: width,
            duration_ms: duration,
            target: TargetTransition::All,
            strength,
        }]);
        let out = simulate_pumping(&grid, &scheme, &classes, &seq).unwrap();
        for p in &out.populations {
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "population sum {sum}");
        }
        for &d in &out.optical_depth {
            prop_assert!(d >= -1e-12);
        }
    }

    // spin decay: strictly decreasing in T_S and γ, log-quadratic in T_S
    #[test]
    fn spin_decay_shape(gamma in 5.0..80.0f64, t in 1.0..30.0f64) {
        let sp = SpinParams::new(gamma).unwrap();
        prop_assert!(spin_decoherence(&sp, t + 0.5) < spin_decoherence(&sp, t));
        let sp2 = SpinParams::new(gamma + 5.0).unwrap();
        prop_assert!(spin_decoherence(&sp2, t) < spin_decoherence(&sp, t));
        let (t1, t2, t3) = (0.5 * t, t, 2.0 * t);
        let s01 = (spin_decoherence(&sp, t2).ln() - spin_decoherence(&sp, t1).ln())
            / (t2 * t2 - t1 * t1);
        let s12 = (spin_decoherence(&sp, t3).ln() - spin_decoherence(&sp, t2).ln())
            / (t3 * t3 - t2 * t2);
        prop_assert!((s01 - s12).abs() < 1e-9);
    }

    // classical bound: monotone in μ, anti-monotone in η
    #[test]
    fn classical_bound_monotonicity(mu in 0.1..8.0f64, eta in 0.01..0.8f64) {
        let base = classical_bound(mu, eta).unwrap().fc;
        prop_assert!(classical_bound(mu * 1.3, eta).unwrap().fc >= base - 1e-12);
        prop_assert!(classical_bound(mu, (eta * 1.3).min(1.0)).unwrap().fc <= base + 1e-12);
        prop_assert!((0.5..=1.0).contains(&base));
    }

    // analytic SNR is exactly linear in the input photon number
    #[test]
    fn snr_linearity(mu in 0.01..20.0f64, eta_sw in 0.001..0.2f64) {
        let chain = DetectionChain::default();
        let unit = expected_counts(1.0, eta_sw, 1.0, &chain, 2.0e-3).unwrap().snr;
        let w = expected_counts(mu, eta_sw, 1.0, &chain, 2.0e-3).unwrap();
        prop_assert!((w.snr / mu - unit).abs() <= 1e-9 * unit);
    }

    // rescaling the x axis rescales the decay constant and nothing else
    #[test]
    fn fit_equivariant_under_x_rescale(k in 0.2..5.0f64, gamma in 0.01..0.08f64) {
        let data: Vec<(f64, f64, f64)> = (0..14)
            .map(|i| {
                let t = 1.0 + 1.4 * i as f64;
                let arg = std::f64::consts::PI * gamma * t;
                let y = 12.0 * (-arg * arg / (2.0 * std::f64::consts::LN_2)).exp();
                (t, y, 0.03 * y.max(1e-6))
            })
            .collect();
        let scaled: Vec<(f64, f64, f64)> =
            data.iter().map(|&(x, y, s)| (k * x, y, s)).collect();
        let f1 = fit(&data, FitModel::GaussianDecay, &[12.0, 0.05]).unwrap();
        let f2 = fit(&scaled, FitModel::GaussianDecay, &[12.0, 0.05 / k]).unwrap();
        prop_assert!(f1.converged && f2.converged);
        let g1 = f1.param("gamma").unwrap().abs();
        let g2 = f2.param("gamma").unwrap().abs();
        prop_assert!((g2 * k - g1).abs() <= 1e-6 * g1);
        prop_assert!((f1.residual_norm - f2.residual_norm).abs() <= 1e-6);
    }

    // η_AFC stays in [0, 1) over the whole parameter box
    #[test]
    fn analytic_efficiency_bounded(
        d in 0.0..10.0f64,
        f in 1.01..12.0f64,
        d0 in 0.0..3.0f64,
        square in proptest::bool::ANY,
    ) {
        let shape = if square { ToothShape::Square } else { ToothShape::Gaussian };
        let spec = CombSpec::new(0.2, 3.5, shape, d, d0, f).unwrap();
        let eta = afc_efficiency_analytic(&spec);
        prop_assert!((0.0..1.0).contains(&eta));
    }

    // config serialization is a fixed point of validate ∘ serialize
    #[test]
    fn config_round_trip(seed in 0u64..u64::MAX, trials in 0u64..1_000_000) {
        let raw = format!("seed = {seed}\ntrials = {trials}\n");
        let cfg = validate_config(&raw).unwrap();
        let once = cfg.to_toml();
        let again = validate_config(&once).unwrap().to_toml();
        prop_assert_eq!(once, again);
    }
}
