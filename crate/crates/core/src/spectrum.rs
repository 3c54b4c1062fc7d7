//! Hyperfine level scheme and spectral-hole-burning preparation of the
//! memory and filter crystals.
//!
//! Ions are parameterised by the detuning x of their 1/2g–3/2e transition
//! from the comb centre. A grid sample holds the three ground-state
//! population fractions of the ions at that detuning; the optical depth
//! d(ν) is the strength-weighted sum of all nine transitions of all ion
//! classes overlapping ν. Pumping is modelled as discrete pump–decay
//! rounds: per round, each ground state loses a saturation-law fraction of
//! its population through every transition the pump band overlaps, and the
//! excited population redistributes over the ground states according to the
//! branching table.

use crate::error::{Error, Result};
use crate::fitkit;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::LN_2;

/// Ground splittings (1/2g–3/2g, 3/2g–5/2g) in MHz.
pub const PR_GROUND_SPLITTINGS_MHZ: (f64, f64) = (10.2, 17.3);
/// Excited splittings (1/2e–3/2e, 3/2e–5/2e) in MHz.
pub const PR_EXCITED_SPLITTINGS_MHZ: (f64, f64) = (4.84, 4.59);
/// Relative oscillator strengths (ground × excited) for Pr³⁺:Y₂SiO₅ after
/// Nilsson et al., Phys. Rev. B 70, 214116 (2004). Rows and columns both
/// sum to one.
pub const PR_BRANCHING_TABLE: [[f64; 3]; 3] = [
    [0.55, 0.38, 0.07],
    [0.38, 0.60, 0.02],
    [0.07, 0.02, 0.91],
];
/// Unpumped optical depth of the crystal at line centre.
pub const DEFAULT_FULL_DEPTH: f64 = 7.0;
/// Effective homogeneous + laser linewidth (FWHM, MHz) seen by the pump.
pub const GAMMA_H_MHZ: f64 = 0.005;
/// Pump–decay rounds per millisecond of step duration.
pub const ROUNDS_PER_MS: f64 = 3.0;

/// Hyperfine level scheme with optical branching ratios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperfineScheme {
    /// (1/2g–3/2g, 3/2g–5/2g) in MHz.
    pub ground_splittings_mhz: (f64, f64),
    /// (1/2e–3/2e, 3/2e–5/2e) in MHz.
    pub excited_splittings_mhz: (f64, f64),
    /// Row-normalised relative transition strengths, ground × excited.
    pub branching: [[f64; 3]; 3],
}

/// One of the nine ion classes addressed by a fixed laser frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonClass {
    /// Ground level index: 0 = 1/2g, 1 = 3/2g, 2 = 5/2g.
    pub ground: usize,
    /// Excited level index: 0 = 1/2e, 1 = 3/2e, 2 = 5/2e.
    pub excited: usize,
    /// Offset of this class's 1/2g–3/2e resonance from the reference class
    /// in MHz.
    pub class_offset_mhz: f64,
}

/// Validate splittings and branching table into a scheme.
pub fn build_level_scheme(
    ground_splittings_mhz: (f64, f64),
    excited_splittings_mhz: (f64, f64),
    branching: [[f64; 3]; 3],
) -> Result<HyperfineScheme> {
    for (name, v) in [
        ("ground_splittings", ground_splittings_mhz.0),
        ("ground_splittings", ground_splittings_mhz.1),
        ("excited_splittings", excited_splittings_mhz.0),
        ("excited_splittings", excited_splittings_mhz.1),
    ] {
        if v <= 0.0 {
            return Err(Error::invalid(name, format!("splitting {v} must be > 0")));
        }
    }
    let mut table = branching;
    for (g, row) in table.iter_mut().enumerate() {
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("branching", "entries must be ≥ 0"));
        }
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid(
                "branching",
                format!("row {g} of the branching table is all zeros"),
            ));
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(HyperfineScheme {
        ground_splittings_mhz,
        excited_splittings_mhz,
        branching: table,
    })
}

impl Default for HyperfineScheme {
    fn default() -> Self {
        build_level_scheme(
            PR_GROUND_SPLITTINGS_MHZ,
            PR_EXCITED_SPLITTINGS_MHZ,
            PR_BRANCHING_TABLE,
        )
        .expect("default scheme is valid")
    }
}

impl HyperfineScheme {
    /// Frequency separation of the input (1/2g–3/2e) and control
    /// (3/2g–3/2e) transitions — equal to the 1/2g–3/2g splitting.
    pub fn input_control_separation_mhz(&self) -> f64 {
        self.ground_splittings_mhz.0
    }

    fn ground_energy(&self, g: usize) -> f64 {
        match g {
            0 => 0.0,
            1 => self.ground_splittings_mhz.0,
            _ => self.ground_splittings_mhz.0 + self.ground_splittings_mhz.1,
        }
    }

    fn excited_energy(&self, e: usize) -> f64 {
        match e {
            0 => 0.0,
            1 => self.excited_splittings_mhz.0,
            _ => self.excited_splittings_mhz.0 + self.excited_splittings_mhz.1,
        }
    }

    /// Frequency of transition (g, e) relative to the same ion's 1/2g–3/2e
    /// transition.
    pub fn transition_offset_mhz(&self, g: usize, e: usize) -> f64 {
        (self.excited_energy(e) - self.excited_energy(1)) - (self.ground_energy(g) - 0.0)
    }

    /// The nine ion classes, one per (ground, excited) transition pair.
    pub fn classes(&self) -> Vec<IonClass> {
        let mut out = Vec::with_capacity(9);
        for g in 0..3 {
            for e in 0..3 {
                out.push(IonClass {
                    ground: g,
                    excited: e,
                    class_offset_mhz: -self.transition_offset_mhz(g, e),
                });
            }
        }
        out
    }

    /// Decay branching from excited level `e` into ground level `g`
    /// (column-normalised strengths).
    pub fn decay_branching(&self, g: usize, e: usize) -> f64 {
        let col: f64 = (0..3).map(|gg| self.branching[gg][e]).sum();
        self.branching[g][e] / col
    }

    /// Normalisation so a thermal grid reproduces the full optical depth.
    fn thermal_strength(&self) -> f64 {
        let total: f64 = self.branching.iter().flatten().sum();
        total / 3.0
    }
}

/// Tooth shape of an analytic comb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToothShape {
    Gaussian,
    Square,
}

/// Comb parameters used by the analytic efficiency formulas and the comb
/// synthesiser.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CombSpec {
    /// Tooth period Δ in MHz.
    pub delta_mhz: f64,
    /// Comb bandwidth in MHz.
    pub bandwidth_mhz: f64,
    pub tooth_shape: ToothShape,
    /// Peak tooth depth d above the background.
    pub peak_depth: f64,
    /// Background depth d₀ inside the pit.
    pub background_depth: f64,
    /// Finesse F = Δ/γ_tooth.
    pub finesse: f64,
}

impl CombSpec {
    pub fn new(
        delta_mhz: f64,
        bandwidth_mhz: f64,
        tooth_shape: ToothShape,
        peak_depth: f64,
        background_depth: f64,
        finesse: f64,
    ) -> Result<Self> {
        if delta_mhz <= 0.0 {
            return Err(Error::invalid("delta_mhz", "must be > 0"));
        }
        if bandwidth_mhz <= 0.0 {
            return Err(Error::invalid("bandwidth_mhz", "must be > 0"));
        }
        if finesse <= 1.0 {
            return Err(Error::invalid("finesse", "must exceed 1"));
        }
        if peak_depth < 0.0 || background_depth < 0.0 {
            return Err(Error::invalid("depth", "must be ≥ 0"));
        }
        Ok(Self {
            delta_mhz,
            bandwidth_mhz,
            tooth_shape,
            peak_depth,
            background_depth,
            finesse,
        })
    }

    /// Effective comb depth d̃ = d/F.
    pub fn effective_depth(&self) -> f64 {
        self.peak_depth / self.finesse
    }

    /// Tooth FWHM γ = Δ/F in MHz.
    pub fn tooth_fwhm_mhz(&self) -> f64 {
        self.delta_mhz / self.finesse
    }

    /// The operating point used throughout the reports: Δ = 200 kHz comb of
    /// 3.5 MHz bandwidth with d = 4.5, d₀ = 0.75, F = 4.7, Gaussian teeth.
    pub fn paper_default() -> Self {
        Self {
            delta_mhz: 0.2,
            bandwidth_mhz: 3.5,
            tooth_shape: ToothShape::Gaussian,
            peak_depth: 4.5,
            background_depth: 0.75,
            finesse: 4.7,
        }
    }
}

/// Sampled optical-depth profile plus per-detuning ground-state populations.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    /// Frequency of the first sample in MHz.
    pub start_mhz: f64,
    /// Sample spacing in MHz.
    pub spacing_mhz: f64,
    /// Optical depth per sample.
    pub optical_depth: Vec<f64>,
    /// Ground-state population fractions `[n_1/2g, n_3/2g, n_5/2g]` per
    /// sample, indexed by the same frequency axis.
    pub populations: Vec<[f64; 3]>,
    /// Optical depth of the unpumped crystal.
    pub full_depth: f64,
    /// Level scheme used to map populations to optical depth.
    pub scheme: HyperfineScheme,
}

impl SpectralGrid {
    /// Thermal (unpumped) grid over ±`half_window_mhz`.
    pub fn thermal(
        half_window_mhz: f64,
        spacing_mhz: f64,
        full_depth: f64,
        scheme: HyperfineScheme,
    ) -> Result<Self> {
        if half_window_mhz < 20.0 {
            return Err(Error::invalid(
                "half_window_mhz",
                "window must reach at least ±20 MHz",
            ));
        }
        if spacing_mhz <= 0.0 || spacing_mhz > 0.010 + 1e-12 {
            return Err(Error::GridTooCoarse {
                spacing_mhz,
                required_mhz: 0.010,
            });
        }
        let n = (2.0 * half_window_mhz / spacing_mhz).round() as usize + 1;
        let mut grid = Self {
            start_mhz: -half_window_mhz,
            spacing_mhz,
            optical_depth: vec![0.0; n],
            populations: vec![[1.0 / 3.0; 3]; n],
            full_depth,
            scheme,
        };
        grid.recompute_depth();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.optical_depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.optical_depth.is_empty()
    }

    pub fn freq(&self, i: usize) -> f64 {
        self.start_mhz + i as f64 * self.spacing_mhz
    }

    pub fn end_mhz(&self) -> f64 {
        self.freq(self.len() - 1)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.freq(i)).collect()
    }

    /// Linear interpolation of d(ν); edge values extend beyond the window.
    pub fn depth_at(&self, nu_mhz: f64) -> f64 {
        interp(
            nu_mhz,
            self.start_mhz,
            self.spacing_mhz,
            &self.optical_depth,
            self.optical_depth[0],
            self.optical_depth[self.len() - 1],
        )
    }

    /// Population of ground level `g` for ions at detuning `x`; out-of-grid
    /// ions are thermal.
    fn population_at(&self, x_mhz: f64, g: usize) -> f64 {
        let idx = (x_mhz - self.start_mhz) / self.spacing_mhz;
        if idx < 0.0 || idx > (self.len() - 1) as f64 {
            return 1.0 / 3.0;
        }
        let i = idx.floor() as usize;
        let frac = idx - i as f64;
        if i + 1 >= self.len() {
            self.populations[i][g]
        } else {
            self.populations[i][g] * (1.0 - frac) + self.populations[i + 1][g] * frac
        }
    }

    /// Rebuild d(ν) from the populations: the strength-weighted sum of all
    /// class transitions overlapping each frequency, linear in the
    /// population fractions.
    pub fn recompute_depth(&mut self) {
        let scheme = self.scheme.clone();
        let norm = scheme.thermal_strength();
        let offsets: Vec<(usize, f64, f64)> = (0..3)
            .flat_map(|g| {
                let scheme = &scheme;
                (0..3).map(move |e| {
                    (
                        g,
                        scheme.transition_offset_mhz(g, e),
                        scheme.branching[g][e],
                    )
                })
            })
            .collect();
        for i in 0..self.len() {
            let nu = self.freq(i);
            let mut acc = 0.0;
            for &(g, t, s) in &offsets {
                acc += self.population_at(nu - t, g) * s;
            }
            self.optical_depth[i] = self.full_depth * acc / norm;
        }
    }

    /// Two-column text table `frequency_MHz  optical_depth`.
    pub fn depth_table(&self) -> String {
        let mut s = String::with_capacity(self.len() * 24);
        s.push_str("frequency_mhz,optical_depth\n");
        for i in 0..self.len() {
            s.push_str(&format!("{:.6},{:.9}\n", self.freq(i), self.optical_depth[i]));
        }
        s
    }

    /// Sidecar table with the per-detuning ground-state populations.
    pub fn population_table(&self) -> String {
        let mut s = String::with_capacity(self.len() * 40);
        s.push_str("frequency_mhz,n_1half_g,n_3half_g,n_5half_g\n");
        for i in 0..self.len() {
            let p = self.populations[i];
            s.push_str(&format!(
                "{:.6},{:.9},{:.9},{:.9}\n",
                self.freq(i),
                p[0],
                p[1],
                p[2]
            ));
        }
        s
    }
}

fn interp(x: f64, start: f64, spacing: f64, values: &[f64], left: f64, right: f64) -> f64 {
    let idx = (x - start) / spacing;
    if idx < 0.0 {
        return left;
    }
    if idx > (values.len() - 1) as f64 {
        return right;
    }
    let i = idx.floor() as usize;
    let frac = idx - i as f64;
    if i + 1 >= values.len() {
        values[i]
    } else {
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

/// Which transition a pump step drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetTransition {
    /// Every transition the band overlaps (a physical frequency sweep).
    All,
    /// Only (ground, excited); an idealised class-selective step.
    Single(usize, usize),
}

/// One optical-pumping step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PumpStep {
    pub center_mhz: f64,
    /// Swept band width in MHz; 0 burns at a single frequency.
    pub sweep_width_mhz: f64,
    pub duration_ms: f64,
    pub target: TargetTransition,
    /// Dimensionless saturation parameter per pump–decay round.
    pub strength: f64,
}

impl PumpStep {
    fn rounds(&self) -> usize {
        (self.duration_ms * ROUNDS_PER_MS).ceil().max(1.0) as usize
    }
}

/// Ordered pump steps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PumpSequence(pub Vec<PumpStep>);

impl PumpSequence {
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.0.iter().enumerate() {
            if s.duration_ms <= 0.0 {
                return Err(Error::invalid(
                    "duration_ms",
                    format!("step {i} has non-positive duration"),
                ));
            }
            if s.sweep_width_mhz < 0.0 {
                return Err(Error::invalid(
                    "sweep_width_mhz",
                    format!("step {i} has negative sweep width"),
                ));
            }
            if s.strength < 0.0 {
                return Err(Error::invalid(
                    "strength",
                    format!("step {i} has negative strength"),
                ));
            }
            if let TargetTransition::Single(g, e) = s.target {
                if g > 2 || e > 2 {
                    return Err(Error::invalid(
                        "target",
                        format!("step {i} targets out-of-range levels ({g}, {e})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The full memory-crystal preparation: a 14 MHz pit containing the comb
    /// and control frequencies, burn-back of the 5/2g reservoir into the
    /// comb region, clean pulses on the control transition, and swept
    /// hole-burning at the anti-tooth positions alternated with short clean
    /// bursts.
    pub fn memory_preparation(scheme: &HyperfineScheme, comb: &CombSpec) -> Self {
        let sep = scheme.input_control_separation_mhz();
        let pit_hi = comb.bandwidth_mhz / 2.0 + 0.35;
        let pit_width = 14.0;
        let pit_center = pit_hi - pit_width / 2.0;
        let clean = PumpStep {
            center_mhz: -sep,
            sweep_width_mhz: 5.0,
            duration_ms: 6.7,
            target: TargetTransition::All,
            strength: 8.0,
        };
        // burn-back drives the 5/2g–5/2e transition of ions whose reference
        // transition sits in the comb region
        let bb = PumpStep {
            center_mhz: scheme.transition_offset_mhz(2, 2),
            sweep_width_mhz: comb.bandwidth_mhz - 0.3,
            duration_ms: 20.0,
            target: TargetTransition::All,
            strength: 2.0,
        };
        let mut steps = vec![PumpStep {
            center_mhz: pit_center,
            sweep_width_mhz: pit_width,
            duration_ms: 100.0,
            target: TargetTransition::All,
            strength: 20.0,
        }];
        for _ in 0..6 {
            steps.push(bb);
            steps.push(clean);
        }
        // anti-tooth holes: swept segments between the teeth, narrowed by
        // the target tooth width and the pump linewidth
        let hole_width =
            (comb.delta_mhz - comb.tooth_fwhm_mhz() - 2.5 * GAMMA_H_MHZ).max(comb.delta_mhz * 0.2);
        let mut holes = Vec::new();
        let mut k = 0;
        loop {
            let c = (k as f64 + 0.5) * comb.delta_mhz;
            if c > comb.bandwidth_mhz / 2.0 {
                break;
            }
            holes.push(c);
            holes.push(-c);
            k += 1;
        }
        holes.sort_by(|a, b| a.total_cmp(b));
        let short_clean = PumpStep {
            duration_ms: 1.4,
            strength: 6.0,
            ..clean
        };
        for _ in 0..20 {
            for &c in &holes {
                steps.push(PumpStep {
                    center_mhz: c,
                    sweep_width_mhz: hole_width,
                    duration_ms: 1.4,
                    target: TargetTransition::All,
                    strength: 2.0,
                });
            }
            steps.push(short_clean);
        }
        PumpSequence(steps)
    }

    /// Preparation of the filter crystal: a plain spectral hole of the given
    /// width centred on the signal frequency.
    pub fn filter_hole(width_mhz: f64) -> Self {
        PumpSequence(vec![PumpStep {
            center_mhz: 0.0,
            sweep_width_mhz: width_mhz,
            duration_ms: 100.0,
            target: TargetTransition::All,
            strength: 15.0,
        }])
    }
}

/// Apply a pump sequence to a grid, returning the pumped grid.
pub fn simulate_pumping(
    grid: &SpectralGrid,
    scheme: &HyperfineScheme,
    classes: &[IonClass],
    seq: &PumpSequence,
) -> Result<SpectralGrid> {
    seq.validate()?;
    let mut out = grid.clone();
    out.scheme = scheme.clone();
    if seq.0.is_empty() {
        return Ok(out);
    }
    if grid.spacing_mhz > GAMMA_H_MHZ + 1e-12 {
        return Err(Error::GridTooCoarse {
            spacing_mhz: grid.spacing_mhz,
            required_mhz: GAMMA_H_MHZ,
        });
    }
    for s in &seq.0 {
        if s.sweep_width_mhz > 0.0 && grid.spacing_mhz > s.sweep_width_mhz / 4.0 {
            return Err(Error::GridTooCoarse {
                spacing_mhz: grid.spacing_mhz,
                required_mhz: s.sweep_width_mhz / 4.0,
            });
        }
    }

    let n = out.len();
    // cache excitation profiles per distinct (center, width, target)
    let mut profiles: HashMap<(u64, u64, i8, i8), ExcitationProfile> = HashMap::new();
    for step in &seq.0 {
        let (tg, te) = match step.target {
            TargetTransition::All => (-1i8, -1i8),
            TargetTransition::Single(g, e) => (g as i8, e as i8),
        };
        let key = (
            step.center_mhz.to_bits(),
            step.sweep_width_mhz.to_bits(),
            tg,
            te,
        );
        if !profiles.contains_key(&key) {
            profiles.insert(
                key,
                ExcitationProfile::build(&out, scheme, classes, step)?,
            );
        }
        let prof = &profiles[&key];
        let mut next = vec![[0.0f64; 3]; n];
        for _ in 0..step.rounds() {
            for i in 0..n {
                let pops = out.populations[i];
                let mut gained = [0.0f64; 3];
                let mut lost = [0.0f64; 3];
                for g in 0..3 {
                    let p = 1.0 - (-step.strength * prof.total[g][i]).exp();
                    if p <= 0.0 {
                        continue;
                    }
                    let exc = p * pops[g];
                    lost[g] = exc;
                    let total = prof.total[g][i];
                    for e in 0..3 {
                        let share = if total > 0.0 {
                            prof.per_excited[g][e][i] / total
                        } else {
                            0.0
                        };
                        let amt = exc * share;
                        for (gp, gv) in gained.iter_mut().enumerate() {
                            *gv += amt * scheme.decay_branching(gp, e);
                        }
                    }
                }
                for g in 0..3 {
                    next[i][g] = pops[g] - lost[g] + gained[g];
                }
            }
            std::mem::swap(&mut out.populations, &mut next);
        }
    }
    out.recompute_depth();
    Ok(out)
}

/// Per-class band-overlap factors for one pump step.
struct ExcitationProfile {
    /// total[g][i] = Σ_e s_ge·O(x_i + t_ge)
    total: [Vec<f64>; 3],
    /// per_excited[g][e][i] = s_ge·O(x_i + t_ge)
    per_excited: [[Vec<f64>; 3]; 3],
}

impl ExcitationProfile {
    fn build(
        grid: &SpectralGrid,
        scheme: &HyperfineScheme,
        classes: &[IonClass],
        step: &PumpStep,
    ) -> Result<Self> {
        let n = grid.len();
        let mut per: [[Vec<f64>; 3]; 3] = Default::default();
        for row in per.iter_mut() {
            for v in row.iter_mut() {
                *v = vec![0.0; n];
            }
        }
        let (lo, hi) = (
            step.center_mhz - step.sweep_width_mhz / 2.0,
            step.center_mhz + step.sweep_width_mhz / 2.0,
        );
        let half = GAMMA_H_MHZ / 2.0;
        let mut touched = false;
        for class in classes {
            let (g, e) = (class.ground, class.excited);
            if let TargetTransition::Single(tg, te) = step.target {
                if g != tg || e != te {
                    continue;
                }
            }
            let t = scheme.transition_offset_mhz(g, e);
            let s = scheme.branching[g][e];
            let buf = &mut per[g][e];
            for (i, v) in buf.iter_mut().enumerate() {
                let f = grid.freq(i) + t;
                let o = if step.sweep_width_mhz <= 0.0 {
                    let r = (f - step.center_mhz) / half;
                    1.0 / (1.0 + r * r)
                } else {
                    (((hi - f) / half).atan() - ((lo - f) / half).atan())
                        / std::f64::consts::PI
                };
                if o > 1e-3 {
                    touched = true;
                }
                *v += s * o.max(0.0);
            }
        }
        if !touched {
            return Err(Error::SweepOutsideGrid {
                lo_mhz: lo,
                hi_mhz: hi,
            });
        }
        let mut total: [Vec<f64>; 3] = Default::default();
        for (g, tg) in total.iter_mut().enumerate() {
            *tg = vec![0.0; n];
            for e in 0..3 {
                for i in 0..n {
                    tg[i] += per[g][e][i];
                }
            }
        }
        Ok(Self {
            total,
            per_excited: per,
        })
    }
}

/// Build d(ν) for an analytic comb on a fresh grid. The populations of the
/// result are thermal placeholders; the depth profile is authoritative.
pub fn build_comb_analytic(
    spec: &CombSpec,
    half_window_mhz: f64,
    spacing_mhz: Option<f64>,
) -> Result<SpectralGrid> {
    if spec.finesse <= 1.0 {
        return Err(Error::invalid("finesse", "teeth overlap into a flat line"));
    }
    if half_window_mhz < spec.bandwidth_mhz / 2.0 + 2.0 * spec.delta_mhz {
        return Err(Error::invalid(
            "half_window_mhz",
            "window must cover the comb bandwidth plus 4Δ",
        ));
    }
    let gamma = spec.tooth_fwhm_mhz();
    let spacing = spacing_mhz.unwrap_or((gamma / 8.0).min(0.005));
    if spacing > gamma / 4.0 {
        return Err(Error::GridTooCoarse {
            spacing_mhz: spacing,
            required_mhz: gamma / 4.0,
        });
    }
    let n = (2.0 * half_window_mhz / spacing).round() as usize + 1;
    let mut depth = vec![spec.background_depth; n];
    let k_max = (spec.bandwidth_mhz / 2.0 / spec.delta_mhz + 1e-9).floor() as i64;
    for (i, d) in depth.iter_mut().enumerate() {
        let nu = -half_window_mhz + i as f64 * spacing;
        let mut teeth = 0.0;
        for k in -k_max..=k_max {
            let c = k as f64 * spec.delta_mhz;
            let r = nu - c;
            teeth += match spec.tooth_shape {
                ToothShape::Gaussian => (-4.0 * LN_2 * r * r / (gamma * gamma)).exp(),
                ToothShape::Square => {
                    if r.abs() <= gamma / 2.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        *d += spec.peak_depth * teeth;
    }
    Ok(SpectralGrid {
        start_mhz: -half_window_mhz,
        spacing_mhz: spacing,
        optical_depth: depth,
        populations: vec![[1.0 / 3.0; 3]; n],
        full_depth: DEFAULT_FULL_DEPTH,
        scheme: HyperfineScheme::default(),
    })
}

/// Extract comb parameters from a grid: tooth period from peak spacing,
/// depths from peak heights and inter-tooth floors, finesse from the tooth
/// width, refined by a least-squares fit of the Gaussian comb model.
pub fn measure_comb(grid: &SpectralGrid) -> Result<CombSpec> {
    let d = &grid.optical_depth;
    let n = d.len();
    let (dmin, dmax) = d
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if dmax - dmin < 1e-6 || dmax - dmin < 0.05 * dmax.max(1e-9) {
        return Err(Error::NoCombStructure("profile is flat".into()));
    }

    // candidate peaks: local maxima with prominence over the profile floor
    let threshold = dmin + 0.15 * (dmax - dmin);
    let mut candidates: Vec<(f64, f64)> = Vec::new(); // (position, height)
    for i in 1..n - 1 {
        if d[i] >= d[i - 1] && d[i] > d[i + 1] && d[i] > threshold {
            // plateau maxima (square teeth) report the plateau centre
            let mut j = i;
            while j > 1 && (d[j - 1] - d[i]).abs() <= 1e-9 * d[i].abs().max(1.0) {
                j -= 1;
            }
            if j < i {
                candidates.push((0.5 * (grid.freq(j) + grid.freq(i)), d[i]));
                continue;
            }
            // parabolic refinement through the three samples around the max
            let (a, b, c) = (d[i - 1], d[i], d[i + 1]);
            let denom = a - 2.0 * b + c;
            let (off, height) = if denom.abs() > 1e-12 {
                let off = 0.5 * (a - c) / denom;
                (off, b - 0.25 * (a - c) * off)
            } else {
                (0.0, b)
            };
            candidates.push((grid.freq(i) + off * grid.spacing_mhz, height));
        }
    }
    // prominence over the dips towards the neighbouring candidates; ripples
    // riding on broad structures score low and are dropped
    let prominence = |idx: usize| -> f64 {
        let (pos, height) = candidates[idx];
        let lo = if idx > 0 { candidates[idx - 1].0 } else { grid.start_mhz };
        let hi = if idx + 1 < candidates.len() {
            candidates[idx + 1].0
        } else {
            grid.end_mhz()
        };
        let min_between = |a: f64, b: f64| {
            let ia = ((a - grid.start_mhz) / grid.spacing_mhz).ceil().max(0.0) as usize;
            let ib = (((b - grid.start_mhz) / grid.spacing_mhz).floor() as usize).min(n - 1);
            d[ia..=ib.max(ia)].iter().cloned().fold(f64::INFINITY, f64::min)
        };
        height - min_between(lo, pos).max(min_between(pos, hi))
    };
    let proms: Vec<f64> = (0..candidates.len()).map(prominence).collect();
    let max_prom = proms.iter().cloned().fold(0.0, f64::max);
    let candidates: Vec<(f64, f64)> = candidates
        .iter()
        .zip(&proms)
        .filter(|(_, &p)| p > 0.25 * max_prom)
        .map(|(&c, _)| c)
        .collect();

    // the comb is the longest run of near-equidistant candidates
    let peaks = longest_periodic_run(&candidates);
    if peaks.len() < 5 {
        return Err(Error::NoCombStructure(format!(
            "found only {} periodic teeth",
            peaks.len()
        )));
    }
    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let delta = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if gaps.iter().any(|&g| (g - delta).abs() > 0.2 * delta) {
        return Err(Error::NoCombStructure(
            "tooth spacing is not periodic".into(),
        ));
    }

    // floors between successive peaks
    let mut floors = Vec::with_capacity(peaks.len() - 1);
    for w in peaks.windows(2) {
        let a = ((w[0].0 + 0.35 * delta - grid.start_mhz) / grid.spacing_mhz) as usize;
        let b = ((w[0].0 + 0.65 * delta - grid.start_mhz) / grid.spacing_mhz) as usize;
        let m = d[a..=b.min(n - 1)]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        floors.push(m);
    }
    let d0 = floors.iter().sum::<f64>() / floors.len() as f64;
    let peak_mean = peaks.iter().map(|p| p.1).sum::<f64>() / peaks.len() as f64;
    let depth = peak_mean - d0;

    // FWHM of the central tooth at half height above the floor
    let center_peak = peaks
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .unwrap();
    let gamma = tooth_fwhm(grid, center_peak.0, delta, d0, center_peak.1)?;

    // shape from the shoulder level at a quarter tooth-width off centre:
    // a Gaussian has dropped to 0.84 of its height there, a square tooth
    // has not dropped at all
    let central = peaks
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .unwrap();
    let shoulder = 0.5
        * (grid.depth_at(central.0 - gamma / 4.0) + grid.depth_at(central.0 + gamma / 4.0));
    let rel = (shoulder - d0) / (central.1 - d0).max(1e-12);
    let shape = if rel > 0.93 {
        ToothShape::Square
    } else {
        ToothShape::Gaussian
    };

    // Gaussian teeth: refine by a least-squares fit of the comb model (the
    // direct floor and width estimators are biased once teeth overlap)
    let centers: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let span_lo = centers.first().unwrap() - delta / 2.0;
    let span_hi = centers.last().unwrap() + delta / 2.0;
    let (depth, d0, gamma) = if shape == ToothShape::Gaussian {
        let data: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| (grid.freq(i), d[i], 1.0))
            .filter(|&(x, _, _)| x >= span_lo && x <= span_hi)
            .collect();
        let gauss_model = |x: f64, p: &[f64]| {
            let (dd, bg, gm) = (p[0], p[1], p[2].abs().max(1e-6));
            let mut teeth = 0.0;
            for &c in &centers {
                let r = x - c;
                teeth += (-4.0 * LN_2 * r * r / (gm * gm)).exp();
            }
            bg + dd * teeth
        };
        match fitkit::gauss_newton(&data, &gauss_model, &[depth, d0, gamma]) {
            Ok(fit) if fit.converged => {
                (fit.params[0], fit.params[1].max(0.0), fit.params[2].abs())
            }
            _ => (depth, d0, gamma),
        }
    } else {
        (depth, d0, gamma)
    };

    let bandwidth = (span_hi - span_lo).max(delta);
    CombSpec::new(delta, bandwidth, shape, depth, d0, delta / gamma)
}

/// Longest run of consecutive candidates whose successive gaps agree within
/// 25% of the running mean gap. Runs containing the window centre win over
/// longer runs elsewhere (hole burning imprints periodic anti-hole combs at
/// other class offsets), and edge teeth with outlier gaps are trimmed.
fn longest_periodic_run(candidates: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut best: &[(f64, f64)] = &[];
    let mut best_centred = false;
    for start in 0..candidates.len() {
        let mut end = start + 1;
        let mut gap_sum = 0.0;
        let mut gaps = 0usize;
        while end < candidates.len() {
            let gap = candidates[end].0 - candidates[end - 1].0;
            if gaps > 0 {
                let mean = gap_sum / gaps as f64;
                if (gap - mean).abs() > 0.25 * mean {
                    break;
                }
            }
            gap_sum += gap;
            gaps += 1;
            end += 1;
        }
        let run = &candidates[start..end];
        let centred =
            run.len() >= 5 && run[0].0 <= 0.0 && run[run.len() - 1].0 >= 0.0;
        let better = match (centred, best_centred) {
            (true, false) => true,
            (false, true) => false,
            _ => run.len() > best.len(),
        };
        if better {
            best = run;
            best_centred = centred;
        }
    }
    let mut run = best.to_vec();
    // trim edge teeth whose gap is an outlier against the median gap
    while run.len() >= 3 {
        let gaps: Vec<f64> = run.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let mut sorted = gaps.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        if (gaps[0] - median).abs() > 0.2 * median {
            run.remove(0);
        } else if (gaps[gaps.len() - 1] - median).abs() > 0.2 * median {
            run.pop();
        } else {
            break;
        }
    }
    run
}

fn tooth_fwhm(grid: &SpectralGrid, center: f64, delta: f64, floor: f64, peak: f64) -> Result<f64> {
    let half = floor + 0.5 * (peak - floor);
    let d = &grid.optical_depth;
    let idx = |x: f64| ((x - grid.start_mhz) / grid.spacing_mhz).round() as usize;
    let c = idx(center);
    let reach = (delta / grid.spacing_mhz) as usize;
    let mut left = None;
    for i in (c.saturating_sub(reach)..=c).rev() {
        if d[i] < half {
            let frac = (half - d[i]) / (d[i + 1] - d[i]).max(1e-12);
            left = Some(grid.freq(i) + frac * grid.spacing_mhz);
            break;
        }
    }
    let mut right = None;
    for i in c..(c + reach).min(d.len() - 1) {
        if d[i + 1] < half {
            let frac = (d[i] - half) / (d[i] - d[i + 1]).max(1e-12);
            right = Some(grid.freq(i) + frac * grid.spacing_mhz);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Ok(r - l),
        _ => Err(Error::NoCombStructure(
            "could not bracket the tooth half-maximum".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn scheme() -> HyperfineScheme {
        HyperfineScheme::default()
    }

    #[test]
    fn scheme_separation_and_classes() {
        let s = scheme();
        assert_relative_eq!(s.input_control_separation_mhz(), 10.2);
        let classes = s.classes();
        assert_eq!(classes.len(), 9);
        let reference = classes
            .iter()
            .find(|c| c.ground == 0 && c.excited == 1)
            .unwrap();
        assert_eq!(reference.class_offset_mhz, 0.0);
        // offsets are signed sums of splittings
        let c52 = classes
            .iter()
            .find(|c| c.ground == 2 && c.excited == 2)
            .unwrap();
        assert_relative_eq!(c52.class_offset_mhz, 10.2 + 17.3 - 4.59, epsilon = 1e-12);
    }

    #[test]
    fn scheme_rejects_bad_input() {
        assert!(build_level_scheme((0.0, 17.3), (4.84, 4.59), PR_BRANCHING_TABLE).is_err());
        let mut zero_row = PR_BRANCHING_TABLE;
        zero_row[1] = [0.0; 3];
        assert!(build_level_scheme((10.2, 17.3), (4.84, 4.59), zero_row).is_err());
    }

    #[test]
    fn branching_rows_normalised() {
        let s = scheme();
        for row in &s.branching {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        for e in 0..3 {
            let col: f64 = (0..3).map(|g| s.decay_branching(g, e)).sum();
            assert_relative_eq!(col, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_comb_peaks_at_d0_plus_d() {
        let spec = CombSpec::paper_default();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        let max = grid.optical_depth.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(max, 5.25, epsilon = 1e-6);
        // background only, away from the comb
        assert_relative_eq!(grid.depth_at(8.0), 0.75, epsilon = 1e-9);
    }

    #[test]
    fn analytic_comb_zero_teeth_is_flat() {
        let spec = CombSpec::new(0.2, 3.5, ToothShape::Gaussian, 0.0, 0.6, 4.0).unwrap();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        for &v in &grid.optical_depth {
            assert_relative_eq!(v, 0.6, epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_comb_guards() {
        assert!(CombSpec::new(0.2, 3.5, ToothShape::Gaussian, 4.5, 0.75, 0.9).is_err());
        let spec = CombSpec::paper_default();
        assert!(build_comb_analytic(&spec, 1.0, None).is_err());
        assert!(build_comb_analytic(&spec, 20.0, Some(0.04)).is_err());
    }

    #[test]
    fn measure_comb_round_trips_paper_comb() {
        let spec = CombSpec::paper_default();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        let m = measure_comb(&grid).unwrap();
        assert_eq!(m.tooth_shape, ToothShape::Gaussian);
        assert_relative_eq!(m.delta_mhz, spec.delta_mhz, max_relative = 0.02);
        assert_relative_eq!(m.peak_depth, spec.peak_depth, max_relative = 0.02);
        assert_relative_eq!(m.background_depth, spec.background_depth, max_relative = 0.02);
        assert_relative_eq!(m.finesse, spec.finesse, max_relative = 0.02);
    }

    #[test]
    fn measure_comb_handles_square_teeth() {
        let spec = CombSpec::new(0.2, 3.5, ToothShape::Square, 4.5, 0.0, 3.2).unwrap();
        let grid = build_comb_analytic(&spec, 20.0, Some(0.0025)).unwrap();
        let m = measure_comb(&grid).unwrap();
        assert_eq!(m.tooth_shape, ToothShape::Square);
        assert_relative_eq!(m.peak_depth, spec.peak_depth, max_relative = 0.02);
        assert_relative_eq!(m.finesse, spec.finesse, max_relative = 0.05);
    }

    #[test]
    fn measure_comb_rejects_flat_grid() {
        let spec = CombSpec::new(0.2, 3.5, ToothShape::Gaussian, 0.0, 0.75, 4.7).unwrap();
        let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
        assert!(matches!(
            measure_comb(&grid),
            Err(Error::NoCombStructure(_))
        ));
    }

    // The pumped grid takes a couple of seconds to build; share it.
    fn prepared() -> &'static (SpectralGrid, SpectralGrid) {
        static CELL: OnceLock<(SpectralGrid, SpectralGrid)> = OnceLock::new();
        CELL.get_or_init(|| {
            let s = scheme();
            let classes = s.classes();
            let thermal =
                SpectralGrid::thermal(56.0, 0.005, DEFAULT_FULL_DEPTH, s.clone()).unwrap();
            let pit_only = simulate_pumping(
                &thermal,
                &s,
                &classes,
                &PumpSequence(
                    PumpSequence::memory_preparation(&s, &CombSpec::paper_default()).0[..1]
                        .to_vec(),
                ),
            )
            .unwrap();
            let full = simulate_pumping(
                &thermal,
                &s,
                &classes,
                &PumpSequence::memory_preparation(&s, &CombSpec::paper_default()),
            )
            .unwrap();
            (pit_only, full)
        })
    }

    #[test]
    fn empty_sequence_is_identity() {
        let s = scheme();
        let grid = SpectralGrid::thermal(56.0, 0.005, 7.0, s.clone()).unwrap();
        let out = simulate_pumping(&grid, &s, &s.classes(), &PumpSequence::default()).unwrap();
        assert_eq!(out.populations, grid.populations);
        assert_eq!(out.optical_depth, grid.optical_depth);
    }

    #[test]
    fn thermal_grid_reproduces_full_depth() {
        let grid = SpectralGrid::thermal(56.0, 0.005, 7.0, scheme()).unwrap();
        assert_relative_eq!(grid.depth_at(0.0), 7.0, epsilon = 1e-9);
    }

    #[test]
    fn pit_is_transparent_over_its_central_12_mhz() {
        let (pit, _) = prepared();
        let comb = CombSpec::paper_default();
        let hi = comb.bandwidth_mhz / 2.0 + 0.35 - 1.0;
        let lo = hi - 12.0;
        let mut worst: f64 = 0.0;
        let mut nu = lo;
        while nu <= hi {
            worst = worst.max(pit.depth_at(nu));
            nu += 0.01;
        }
        assert!(
            worst < 0.1 * comb.background_depth,
            "pit residual {worst} too high"
        );
    }

    #[test]
    fn burn_back_creates_feature_inside_pit() {
        let s = scheme();
        let classes = s.classes();
        let comb = CombSpec::paper_default();
        let prep = PumpSequence::memory_preparation(&s, &comb);
        // pit + burn-back/clean cycles only (strip the comb-burning tail)
        let head = PumpSequence(prep.0[..13].to_vec());
        let thermal = SpectralGrid::thermal(56.0, 0.005, 7.0, s.clone()).unwrap();
        let g = simulate_pumping(&thermal, &s, &classes, &head).unwrap();
        let peak = g.depth_at(0.0);
        assert!(peak > 3.0, "feature peak {peak}");
        // contiguous half-maximum width around the centre
        let half = peak / 2.0;
        let mut lo = 0.0;
        while g.depth_at(lo - 0.01) > half && lo > -6.0 {
            lo -= 0.01;
        }
        let mut hi = 0.0;
        while g.depth_at(hi + 0.01) > half && hi < 6.0 {
            hi += 0.01;
        }
        let width = hi - lo;
        assert!(
            (3.0..=4.0).contains(&width),
            "feature width {width} outside 3–4 MHz"
        );
    }

    #[test]
    fn prepared_comb_lands_near_the_operating_point() {
        let (_, full) = prepared();
        let m = measure_comb(full).unwrap();
        assert!(
            (3.0..=6.0).contains(&m.peak_depth),
            "comb depth {}",
            m.peak_depth
        );
        assert!(
            (0.3..=1.2).contains(&m.background_depth),
            "background {}",
            m.background_depth
        );
        assert_relative_eq!(m.delta_mhz, 0.2, max_relative = 0.05);
    }

    #[test]
    fn populations_conserved_through_preparation() {
        let (_, full) = prepared();
        for p in &full.populations {
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "population sum {sum}");
        }
    }

    #[test]
    fn stronger_pit_never_increases_residual_depth() {
        let s = scheme();
        let classes = s.classes();
        let thermal = SpectralGrid::thermal(56.0, 0.005, 7.0, s.clone()).unwrap();
        let pit = |strength: f64| {
            simulate_pumping(
                &thermal,
                &s,
                &classes,
                &PumpSequence(vec![PumpStep {
                    center_mhz: -4.9,
                    sweep_width_mhz: 14.0,
                    duration_ms: 10.0,
                    target: TargetTransition::All,
                    strength,
                }]),
            )
            .unwrap()
        };
        let weak = pit(1.0);
        let strong = pit(4.0);
        let mut nu = -11.4;
        while nu <= 1.6 {
            assert!(
                strong.depth_at(nu) <= weak.depth_at(nu) + 1e-9,
                "monotonicity violated at {nu}"
            );
            nu += 0.05;
        }
    }

    #[test]
    fn depth_reconstruction_linear_in_populations() {
        let s = scheme();
        let mut g = SpectralGrid::thermal(56.0, 0.005, 7.0, s).unwrap();
        for p in g.populations.iter_mut() {
            *p = [0.0, 0.0, 0.0];
        }
        // a lone block of 1/2g population
        let i0 = g.len() / 2;
        for i in i0..i0 + 200 {
            g.populations[i][0] = 0.2;
        }
        g.recompute_depth();
        let base = g.depth_at(g.freq(i0 + 100));
        for i in i0..i0 + 200 {
            g.populations[i][0] = 0.4;
        }
        g.recompute_depth();
        let doubled = g.depth_at(g.freq(i0 + 100));
        assert_relative_eq!(doubled, 2.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn sweep_that_touches_nothing_is_rejected() {
        let s = scheme();
        let classes = s.classes();
        let grid = SpectralGrid::thermal(20.0, 0.005, 7.0, s.clone()).unwrap();
        let seq = PumpSequence(vec![PumpStep {
            center_mhz: 90.0,
            sweep_width_mhz: 2.0,
            duration_ms: 1.0,
            target: TargetTransition::All,
            strength: 5.0,
        }]);
        assert!(matches!(
            simulate_pumping(&grid, &s, &classes, &seq),
            Err(Error::SweepOutsideGrid { .. })
        ));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let s = scheme();
        let classes = s.classes();
        let mut grid = SpectralGrid::thermal(20.0, 0.005, 7.0, s.clone()).unwrap();
        grid.spacing_mhz = 0.008; // coarser than the pump linewidth
        let seq = PumpSequence(vec![PumpStep {
            center_mhz: 0.0,
            sweep_width_mhz: 2.0,
            duration_ms: 1.0,
            target: TargetTransition::All,
            strength: 5.0,
        }]);
        assert!(matches!(
            simulate_pumping(&grid, &s, &classes, &seq),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
