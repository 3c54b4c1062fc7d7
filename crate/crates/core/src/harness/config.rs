//! Experiment configuration: strict TOML schema with full defaults.
//!
//! Every field has a default matching the memory's standard operating point
//! (Δ = 0.2 MHz comb with d = 4.5, d₀ = 0.75, F = 4.7; γ_in = 26 kHz;
//! η_T = 0.817; T_S = 7.8 µs; 430 ns inputs; 260 ns qubit pulses; 2 MHz
//! filter hole), so an empty config plus an experiment name is valid.
//! Unknown keys are rejected at parse time; semantic violations name the
//! offending field.

use crate::detection::{DetectionChain, FilterConfig, FilterMode};
use crate::error::{Error, Result};
use crate::spectrum::{CombSpec, ToothShape};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Named experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig2aHistograms,
    Fig2bSnrScaling,
    Fig2cDecay,
    Fig3bFringes,
    Fig4Fidelity,
    TableS1,
    FigSFilterSweep,
    FigSNoiseVsTs,
    CombPreparation,
    EfficiencyReport,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Fig2aHistograms,
        Experiment::Fig2bSnrScaling,
        Experiment::Fig2cDecay,
        Experiment::Fig3bFringes,
        Experiment::Fig4Fidelity,
        Experiment::TableS1,
        Experiment::FigSFilterSweep,
        Experiment::FigSNoiseVsTs,
        Experiment::CombPreparation,
        Experiment::EfficiencyReport,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig2aHistograms => "fig2a_histograms",
            Experiment::Fig2bSnrScaling => "fig2b_snr_scaling",
            Experiment::Fig2cDecay => "fig2c_decay",
            Experiment::Fig3bFringes => "fig3b_fringes",
            Experiment::Fig4Fidelity => "fig4_fidelity",
            Experiment::TableS1 => "table_s1",
            Experiment::FigSFilterSweep => "fig_s_filter_sweep",
            Experiment::FigSNoiseVsTs => "fig_s_noise_vs_ts",
            Experiment::CombPreparation => "comb_preparation",
            Experiment::EfficiencyReport => "efficiency_report",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|e| e.name() == name)
            .copied()
            .ok_or_else(|| Error::Config {
                field: "experiment".into(),
                reason: format!(
                    "unknown experiment `{name}`; valid names: {}",
                    Self::ALL
                        .iter()
                        .map(|e| e.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSection {
    pub delta_mhz: f64,
    pub bandwidth_mhz: f64,
    pub tooth_shape: ToothShape,
    pub peak_depth: f64,
    pub background_depth: f64,
    pub finesse: f64,
}

impl Default for CombSection {
    fn default() -> Self {
        let c = CombSpec::paper_default();
        Self {
            delta_mhz: c.delta_mhz,
            bandwidth_mhz: c.bandwidth_mhz,
            tooth_shape: c.tooth_shape,
            peak_depth: c.peak_depth,
            background_depth: c.background_depth,
            finesse: c.finesse,
        }
    }
}

impl CombSection {
    pub fn to_spec(&self) -> Result<CombSpec> {
        CombSpec::new(
            self.delta_mhz,
            self.bandwidth_mhz,
            self.tooth_shape,
            self.peak_depth,
            self.background_depth,
            self.finesse,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSection {
    pub gamma_in_khz: f64,
    pub spin_time_us: f64,
}

impl Default for SpinSection {
    fn default() -> Self {
        Self {
            gamma_in_khz: 26.0,
            spin_time_us: 7.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    /// Transfer efficiency used when `solve_bloch` is false.
    pub eta_t: f64,
    /// Integrate the optical Bloch equations instead of using the constant.
    pub solve_bloch: bool,
    pub fwhm_us: f64,
    pub chirp_span_mhz: f64,
    pub peak_rabi_mhz: f64,
    pub detuning_spread_mhz: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            eta_t: 0.817,
            solve_bloch: false,
            fwhm_us: 0.7,
            chirp_span_mhz: 5.0,
            peak_rabi_mhz: 1.07,
            detuning_spread_mhz: 3.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaAfcMode {
    /// Use the measured constant below (the comb as realised in the lab).
    Measured,
    /// Evaluate the analytic comb formula on the `[comb]` section.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySection {
    pub eta_afc_mode: EtaAfcMode,
    /// Measured comb efficiency at the counting operating point.
    pub eta_afc: f64,
    /// Share of the retrieved echo inside the detection window; the quoted
    /// p_N and η_SW refer to the same window, hence 1.0.
    pub capture_fraction: f64,
}

impl Default for EfficiencySection {
    fn default() -> Self {
        Self {
            eta_afc_mode: EtaAfcMode::Measured,
            eta_afc: 0.056,
            capture_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// "hole", "pit" or "bypass".
    pub mode: String,
    pub width_mhz: f64,
    pub control_extinction: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            mode: "hole".into(),
            width_mhz: 2.0,
            control_extinction: 750.0,
        }
    }
}

impl FilterSection {
    pub fn to_filter(&self) -> Result<FilterConfig> {
        let mode = match self.mode.as_str() {
            "hole" => FilterMode::Hole {
                width_mhz: self.width_mhz,
            },
            "pit" => FilterMode::WidePit,
            "bypass" => FilterMode::Bypassed,
            other => {
                return Err(Error::Config {
                    field: "filter.mode".into(),
                    reason: format!("unknown mode `{other}` (hole | pit | bypass)"),
                })
            }
        };
        let f = FilterConfig {
            mode,
            control_extinction: self.control_extinction,
        };
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAnchor {
    /// "hole", "pit" or "bypass".
    pub mode: String,
    #[serde(default)]
    pub width_mhz: f64,
    pub p_n: f64,
}

fn default_noise_anchors() -> Vec<NoiseAnchor> {
    vec![
        NoiseAnchor {
            mode: "hole".into(),
            width_mhz: 2.0,
            p_n: 2.0e-3,
        },
        NoiseAnchor {
            mode: "pit".into(),
            width_mhz: 14.0,
            p_n: 2.3e-2,
        },
        NoiseAnchor {
            mode: "bypass".into(),
            width_mhz: 0.0,
            p_n: 0.23,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Input pulse intensity FWHM in µs.
    pub fwhm_us: f64,
    /// Mean photon numbers for the SNR sweep.
    pub mu_in: Vec<f64>,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            fwhm_us: 0.43,
            mu_in: vec![0.057, 0.115, 0.23, 0.46, 1.15, 2.3, 4.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSection {
    pub pulse_fwhm_us: f64,
    pub bin_separation_us: f64,
    /// Spin-wave efficiency at the shorter qubit pulses.
    pub eta_sw: f64,
    pub delta_alpha_deg: f64,
    pub mu_q: Vec<f64>,
}

impl Default for QubitSection {
    fn default() -> Self {
        Self {
            pulse_fwhm_us: 0.26,
            bin_separation_us: 0.5,
            eta_sw: 0.022,
            delta_alpha_deg: 90.0,
            mu_q: vec![0.6, 1.1, 1.5, 3.2, 5.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWriteSection {
    pub alpha: f64,
    pub mu1p: f64,
    pub delta_beta_deg: Vec<f64>,
    /// Photon number per qubit for the fringe scan.
    pub fringe_mu_q: f64,
}

impl Default for DoubleWriteSection {
    fn default() -> Self {
        Self {
            alpha: 2.5,
            mu1p: 0.11,
            delta_beta_deg: (0..8).map(|i| 45.0 * i as f64).collect(),
            fringe_mu_q: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    /// Memory efficiency assumed by the classical cheater.
    pub eta: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self { eta: 0.022 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Spin storage times for the decay and noise-vs-T_S experiments, µs.
    pub ts_us: Vec<f64>,
    /// Filter hole widths for the filter sweep, MHz.
    pub hole_widths_mhz: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ts_us: vec![5.0, 6.5, 7.8, 9.5, 11.0, 12.8, 14.5, 16.0, 17.5, 18.8, 20.0],
            hole_widths_mhz: vec![0.8, 1.2, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreparationSection {
    pub window_half_mhz: f64,
    pub spacing_mhz: f64,
    pub full_depth: f64,
}

impl Default for PreparationSection {
    fn default() -> Self {
        Self {
            window_half_mhz: 56.0,
            spacing_mhz: 0.005,
            full_depth: 7.0,
        }
    }
}

/// Experiment cycle numbers, recorded as report metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSection {
    pub period_ms: f64,
    pub repetition_khz: f64,
    pub trials_per_preparation: u64,
}

impl Default for CycleSection {
    fn default() -> Self {
        Self {
            period_ms: 700.0,
            repetition_khz: 7.0,
            trials_per_preparation: 1000,
        }
    }
}

/// Full validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    /// Monte Carlo trials; 0 keeps only the analytic path.
    pub trials: u64,
    pub out_dir: String,
    /// "csv" or "json".
    pub format: String,
    pub comb: CombSection,
    pub spin: SpinSection,
    pub transfer: TransferSection,
    pub efficiency: EfficiencySection,
    pub chain: DetectionChain,
    pub filter: FilterSection,
    #[serde(rename = "noise_anchor")]
    pub noise_anchors: Vec<NoiseAnchor>,
    pub input: InputSection,
    pub qubit: QubitSection,
    pub double_write: DoubleWriteSection,
    pub benchmark: BenchmarkSection,
    pub sweep: SweepSection,
    pub preparation: PreparationSection,
    pub cycle: CycleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 1,
            trials: 0,
            out_dir: "out".into(),
            format: "csv".into(),
            comb: CombSection::default(),
            spin: SpinSection::default(),
            transfer: TransferSection::default(),
            efficiency: EfficiencySection::default(),
            chain: DetectionChain::default(),
            filter: FilterSection::default(),
            noise_anchors: default_noise_anchors(),
            input: InputSection::default(),
            qubit: QubitSection::default(),
            double_write: DoubleWriteSection::default(),
            benchmark: BenchmarkSection::default(),
            sweep: SweepSection::default(),
            preparation: PreparationSection::default(),
            cycle: CycleSection::default(),
        }
    }
}

/// Parse and validate a raw config document.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(raw).map_err(|e| {
        // toml errors carry span and key context
        Error::ConfigParse(e.to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Semantic validation after parsing.
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.into(),
                reason,
            })
        };
        if self.format != "csv" && self.format != "json" {
            return err("format", format!("`{}` is not csv|json", self.format));
        }
        if self.comb.finesse <= 1.0 {
            return err("comb.finesse", "finesse must exceed 1".into());
        }
        self.comb.to_spec().map_err(|e| Error::Config {
            field: "comb".into(),
            reason: e.to_string(),
        })?;
        if self.spin.gamma_in_khz <= 0.0 {
            return err("spin.gamma_in_khz", "must be > 0".into());
        }
        if self.spin.spin_time_us < 0.0 {
            return err("spin.spin_time_us", "must be ≥ 0".into());
        }
        if !(0.0..=1.0).contains(&self.transfer.eta_t) {
            return err("transfer.eta_t", "must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.efficiency.eta_afc) {
            return err("efficiency.eta_afc", "must be in [0, 1]".into());
        }
        if !(self.efficiency.capture_fraction > 0.0 && self.efficiency.capture_fraction <= 1.0) {
            return err("efficiency.capture_fraction", "must be in (0, 1]".into());
        }
        self.chain.validate().map_err(|e| Error::Config {
            field: "chain".into(),
            reason: e.to_string(),
        })?;
        let filter = self.filter.to_filter()?;
        filter.validate(10.2).map_err(|e| Error::Config {
            field: "filter".into(),
            reason: e.to_string(),
        })?;
        if self.noise_anchors.is_empty() {
            return err("noise_anchor", "at least one anchor required".into());
        }
        for (i, a) in self.noise_anchors.iter().enumerate() {
            if a.p_n < 0.0 {
                return err("noise_anchor", format!("anchor {i} has negative p_n"));
            }
            if a.mode == "hole" && a.width_mhz <= 0.0 {
                return err("noise_anchor", format!("anchor {i} needs width_mhz > 0"));
            }
            if !["hole", "pit", "bypass"].contains(&a.mode.as_str()) {
                return err(
                    "noise_anchor",
                    format!("anchor {i} mode `{}` is not hole|pit|bypass", a.mode),
                );
            }
        }
        if self.input.mu_in.iter().any(|&m| m < 0.0) {
            return err("input.mu_in", "photon numbers must be ≥ 0".into());
        }
        if self.qubit.mu_q.iter().any(|&m| m <= 0.0) {
            return err("qubit.mu_q", "photon numbers must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.qubit.eta_sw) {
            return err("qubit.eta_sw", "must be in [0, 1]".into());
        }
        if self.double_write.alpha < 1.0 {
            return err("double_write.alpha", "must be ≥ 1".into());
        }
        if self.double_write.mu1p <= 0.0 {
            return err("double_write.mu1p", "must be > 0".into());
        }
        if !(self.benchmark.eta > 0.0 && self.benchmark.eta <= 1.0) {
            return err("benchmark.eta", "must be in (0, 1]".into());
        }
        if self.sweep.ts_us.iter().any(|&t| t < 0.0) {
            return err("sweep.ts_us", "storage times must be ≥ 0".into());
        }
        if self
            .sweep
            .hole_widths_mhz
            .iter()
            .any(|&w| w <= 0.0 || w / 2.0 >= 10.2)
        {
            return err(
                "sweep.hole_widths_mhz",
                "widths must be in (0, 20.4) MHz".into(),
            );
        }
        if self.preparation.spacing_mhz <= 0.0 || self.preparation.spacing_mhz > 0.01 {
            return err("preparation.spacing_mhz", "must be in (0, 0.01] MHz".into());
        }
        if self.preparation.window_half_mhz < 20.0 {
            return err("preparation.window_half_mhz", "must be ≥ 20 MHz".into());
        }
        Ok(())
    }

    /// Anchors as typed filter configs.
    pub fn anchor_list(&self) -> Result<Vec<(FilterConfig, f64)>> {
        self.noise_anchors
            .iter()
            .map(|a| {
                let f = FilterSection {
                    mode: a.mode.clone(),
                    width_mhz: a.width_mhz,
                    control_extinction: self.filter.control_extinction,
                }
                .to_filter()?;
                Ok((f, a.p_n))
            })
            .collect()
    }

    /// Canonical serialized form (field order fixed by the struct).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Short hash identifying the validated config.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_fully_defaulted() {
        let cfg = validate_config("").unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.comb.delta_mhz, 0.2);
        assert_eq!(cfg.spin.gamma_in_khz, 26.0);
        assert_eq!(cfg.transfer.eta_t, 0.817);
        assert_eq!(cfg.noise_anchors.len(), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = validate_config("typo_key = 1").unwrap_err();
        assert!(matches!(e, Error::ConfigParse(_)));
        let e = validate_config("[comb]\nwidth = 2.0").unwrap_err();
        assert!(e.to_string().contains("width"));
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let e = validate_config("[comb]\ndelta_mhz = 0.2\nbandwidth_mhz = 3.5\ntooth_shape = \"gaussian\"\npeak_depth = 4.5\nbackground_depth = 0.75\nfinesse = 0.5").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("finesse") && msg.contains("exceed 1"), "{msg}");
    }

    #[test]
    fn mu_in_override_round_trips() {
        let raw = "experiment = \"fig2b_snr_scaling\"\n[input]\nfwhm_us = 0.43\nmu_in = [0.1, 0.5, 2.5]\n";
        let cfg = validate_config(raw).unwrap();
        assert_eq!(cfg.input.mu_in, vec![0.1, 0.5, 2.5]);
        let round = validate_config(&cfg.to_toml()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn serialization_is_idempotent() {
        let cfg = validate_config("seed = 42").unwrap();
        let once = validate_config(&cfg.to_toml()).unwrap();
        assert_eq!(once.to_toml(), cfg.to_toml());
        assert_eq!(once.hash(), cfg.hash());
    }

    #[test]
    fn hash_tracks_content() {
        let a = validate_config("seed = 1").unwrap();
        let b = validate_config("seed = 2").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 12);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()).unwrap(), e);
        }
        assert!(Experiment::from_name("nope").is_err());
    }
}
