//! Run configuration: a TOML file with one table per stage. Every key is
//! optional; omitted keys take the defaults below. Unknown keys are errors.

use std::f64::consts::PI;
use std::path::Path;

use photonsub::conditional::{AnsatzParams, NelderMeadOptions, Objective};
use photonsub::datasynth::PhasePlan;
use photonsub::fock::GridSpec;
use photonsub::gaussian_model::{gain_to_pump, OpoModel};
use photonsub::tomography::MaxLikOptions;
use serde::{Deserialize, Serialize};

pub const DEFAULT_GAIN: f64 = 2.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub opo: OpoSection,
    pub mode: ModeSection,
    pub data: DataSection,
    pub tomography: TomographySection,
    pub simulate: SimulateSection,
    pub optimize: OptimizeSection,
    pub spectrum: SpectrumSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            opo: OpoSection::default(),
            mode: ModeSection::default(),
            data: DataSection::default(),
            tomography: TomographySection::default(),
            simulate: SimulateSection::default(),
            optimize: OptimizeSection::default(),
            spectrum: SpectrumSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpoSection {
    /// Power gain `1/(1-x)^2`; give this or `pump_parameter`, not both.
    /// Defaults to 2.3 when neither is set.
    pub gain: Option<f64>,
    /// Pump amplitude relative to threshold, `x` in `[0, 1)`.
    pub pump_parameter: Option<f64>,
    pub cavity_hwhm_hz: f64,
    pub eta_opo: f64,
    pub eta_pr: f64,
    pub eta_hom: f64,
    pub eta_det: f64,
    pub bs_reflectivity: f64,
    pub trigger_filter_hwhm_hz: f64,
    pub dark_fraction: f64,
    pub trigger_path_efficiency: f64,
    pub dark_count_rate_hz: f64,
    /// When set, replaces the individual signal efficiencies by one overall
    /// value (detector included).
    pub total_signal_efficiency: Option<f64>,
}

impl Default for OpoSection {
    fn default() -> Self {
        let p = OpoModel::reference();
        OpoSection {
            gain: None,
            pump_parameter: None,
            cavity_hwhm_hz: p.cavity_hwhm_hz,
            eta_opo: p.eta_opo,
            eta_pr: p.eta_pr,
            eta_hom: p.eta_hom,
            eta_det: p.eta_det,
            bs_reflectivity: p.bs_reflectivity,
            trigger_filter_hwhm_hz: p.trigger_filter_hwhm_hz,
            dark_fraction: p.dark_fraction,
            trigger_path_efficiency: p.trigger_path_efficiency,
            dark_count_rate_hz: p.dark_count_rate_hz,
            total_signal_efficiency: None,
        }
    }
}

impl OpoSection {
    /// Fills in the default gain when no drive strength was given.
    pub fn resolve(&mut self) {
        if self.gain.is_none() && self.pump_parameter.is_none() {
            self.gain = Some(DEFAULT_GAIN);
        }
    }

    pub fn model(&self) -> photonsub::Result<OpoModel> {
        let pump_parameter = match (self.gain, self.pump_parameter) {
            (Some(_), Some(_)) => {
                return Err(photonsub::Error::Config("give either gain or pump_parameter, not both".into()))
            }
            (_, Some(x)) => x,
            (g, None) => gain_to_pump(g.unwrap_or(DEFAULT_GAIN))?,
        };
        let m = OpoModel {
            pump_parameter,
            cavity_hwhm_hz: self.cavity_hwhm_hz,
            eta_opo: self.eta_opo,
            eta_pr: self.eta_pr,
            eta_hom: self.eta_hom,
            eta_det: self.eta_det,
            bs_reflectivity: self.bs_reflectivity,
            trigger_filter_hwhm_hz: self.trigger_filter_hwhm_hz,
            dark_fraction: self.dark_fraction,
            trigger_path_efficiency: self.trigger_path_efficiency,
            dark_count_rate_hz: self.dark_count_rate_hz,
        };
        m.validate()?;
        match self.total_signal_efficiency {
            Some(eta) => m.with_total_signal_efficiency(eta),
            None => Ok(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSection {
    /// Full widths of the signal Ansatz, Hz.
    pub gamma_hz: f64,
    pub kappa_hz: f64,
    pub delay_s: f64,
}

impl Default for ModeSection {
    fn default() -> Self {
        let a = AnsatzParams::default();
        ModeSection {
            gamma_hz: a.gamma_hz,
            kappa_hz: a.kappa_hz,
            delay_s: a.delay_s,
        }
    }
}

impl ModeSection {
    pub fn params(&self) -> AnsatzParams {
        AnsatzParams {
            gamma_hz: self.gamma_hz,
            kappa_hz: self.kappa_hz,
            delay_s: self.delay_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplementKind {
    Vacuum,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub records: usize,
    /// Homodyne detector efficiency applied when sampling. The state is
    /// generated without the `opo.eta_det` loss.
    pub eta_det: f64,
    /// Fock cutoff of the state used for bookkeeping; sampling is exact.
    pub n_max: usize,
    pub phase_plan: PhasePlan,
    /// LO-only records for the calibration run; 0 disables it.
    pub calibration_records: usize,
    /// Unknown electronic scale applied to every raw value.
    pub electronic_gain: f64,
    /// Number of raw 1000-point segments to write (first records); 0 disables.
    pub segments: usize,
    pub complement: ComplementKind,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            records: 20_000,
            eta_det: 0.85,
            n_max: 12,
            phase_plan: PhasePlan::LinearScan {
                scan_rate_rad_s: PI,
                click_rate_hz: 1e3,
                jitter_rad: 0.0,
            },
            calibration_records: 0,
            electronic_gain: 1.0,
            segments: 0,
            complement: ComplementKind::Stationary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    pub n_max: usize,
    /// Detector efficiency folded into the measurement operators.
    pub eta: f64,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub dilution: f64,
    /// Vacuum calibration dataset. Defaults to `vacuum.csv` next to the data.
    pub calibration: Option<String>,
}

impl Default for TomographySection {
    fn default() -> Self {
        let o = MaxLikOptions::default();
        TomographySection {
            n_max: 12,
            eta: 0.85,
            max_iterations: o.max_iterations,
            rel_tol: o.rel_tol,
            dilution: o.dilution,
            calibration: None,
        }
    }
}

impl TomographySection {
    pub fn options(&self) -> MaxLikOptions {
        MaxLikOptions {
            max_iterations: self.max_iterations,
            rel_tol: self.rel_tol,
            dilution: self.dilution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_max: usize,
    pub grid_half_width: f64,
    pub grid_points: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let g = GridSpec::default();
        SimulateSection {
            n_max: 14,
            grid_half_width: g.half_width,
            grid_points: g.points,
        }
    }
}

impl SimulateSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            half_width: self.grid_half_width,
            points: self.grid_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub objective: Objective,
    pub max_evaluations: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let o = NelderMeadOptions::default();
        OptimizeSection {
            objective: Objective::MinWignerOrigin,
            max_evaluations: o.max_evaluations,
            f_tol: o.f_tol,
            x_tol: o.x_tol,
            initial_step: o.initial_step,
        }
    }
}

impl OptimizeSection {
    pub fn options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_evaluations: self.max_evaluations,
            f_tol: self.f_tol,
            x_tol: self.x_tol,
            initial_step: self.initial_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Efficiency of the squeezing measurement (independent of the tomography
    /// chain).
    pub eta_t: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Points of the synthetic spectrum; 0 disables it.
    pub points: usize,
    /// Gaussian noise added to each dB value.
    pub noise_db: f64,
    /// Length of the synthetic noise traces; 0 disables them.
    pub trace_duration_s: f64,
    pub sample_rate_hz: f64,
    pub welch_segment: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            eta_t: 0.56,
            f_min_hz: 1e5,
            f_max_hz: 2e7,
            points: 200,
            noise_db: 0.1,
            trace_duration_s: 0.0,
            sample_rate_hz: 2e8,
            welch_segment: 16_384,
        }
    }
}

/// Parse and validate a config file.
pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.opo.model().map_err(|e| format!("[opo] {e}"))?;
        self.mode.params().mode().map_err(|e| format!("[mode] {e}"))?;
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(format!("{name} = {v} must lie in (0, 1]"))
            }
        };
        unit("[data] eta_det", self.data.eta_det)?;
        unit("[tomography] eta", self.tomography.eta)?;
        if !(self.data.electronic_gain > 0.0) {
            return Err(format!("[data] electronic_gain = {} must be > 0", self.data.electronic_gain));
        }
        if self.data.records == 0 {
            return Err("[data] records must be > 0".into());
        }
        if self.tomography.max_iterations == 0 {
            return Err("[tomography] max_iterations must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.spectrum.eta_t) {
            return Err(format!("[spectrum] eta_t = {} must lie in [0, 1]", self.spectrum.eta_t));
        }
        if !(self.spectrum.f_min_hz > 0.0 && self.spectrum.f_max_hz > self.spectrum.f_min_hz) {
            return Err("[spectrum] need 0 < f_min_hz < f_max_hz".into());
        }
        if self.simulate.grid_points < 2 || !(self.simulate.grid_half_width > 0.0) {
            return Err("[simulate] grid needs >= 2 points and a positive half width".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse("[opo]\ngain = 2.3\ngian = 1.8\n").unwrap_err();
        assert!(err.contains("gian"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn drive_is_gain_or_pump_parameter() {
        let by_gain = parse("[opo]\ngain = 1.8\n").unwrap().opo.model().unwrap();
        let x = by_gain.pump_parameter;
        let by_pump = parse(&format!("[opo]\npump_parameter = {x}\n")).unwrap().opo.model().unwrap();
        assert_eq!(by_gain, by_pump);
        assert!(parse("[opo]\ngain = 1.8\npump_parameter = 0.2\n").is_err());
        assert!(parse("[opo]\npump_parameter = 1.0\n").is_err());
        let mut cfg = parse("").unwrap();
        cfg.opo.resolve();
        assert_eq!(cfg.opo.gain, Some(DEFAULT_GAIN));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("[opo]\ngain = 0.5\n").is_err());
        assert!(parse("[data]\neta_det = 1.5\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = parse("seed = 9\n[data.phase_plan]\nkind = \"fixed\"\ntheta = 0.5\n").unwrap();
        let again = parse(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
