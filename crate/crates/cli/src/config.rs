//! Experiment configuration. Every section rejects unknown keys; omitted
//! keys take the documented defaults. Angles are in degrees here and
//! converted to radians before reaching the library.

use std::path::PathBuf;

use mzweak_core::fit::FitMethod;
use mzweak_core::jones::{class_operator, JonesMatrix, JonesVector};
use mzweak_core::mzi::ImperfectionModel;
use mzweak_core::synth::{BeamEnvelope, DetectorConfig, FramePhase, FringeModelParams};
use mzweak_core::weakmeas::{DisplacedComponent, WeakValueRemap, DEFAULT_BEAM_SIGMA_UM, REALISTIC_A_OVER_SIGMA, WEAK_A_OVER_SIGMA};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Decompose,
    MziTheory,
    Synth,
    Fit,
    Sweep,
    Weakmeas,
    Reproduce,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Decompose => "decompose",
            Mode::MziTheory => "mzi-theory",
            Mode::Synth => "synth",
            Mode::Fit => "fit",
            Mode::Sweep => "sweep",
            Mode::Weakmeas => "weakmeas",
            Mode::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig8,
    Fig9,
    Fig10,
}

impl Figure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stabilized: bool,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub mzi_theory: MziTheoryConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub weakmeas: WeakmeasConfig,
    #[serde(default)]
    pub reproduce: ReproduceConfig,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            stabilized: false,
            paths: Paths::default(),
            output: OutputOptions::default(),
            decompose: DecomposeConfig::default(),
            mzi_theory: MziTheoryConfig::default(),
            synth: SynthConfig::default(),
            fit: FitConfig::default(),
            sweep: SweepConfig::default(),
            weakmeas: WeakmeasConfig::default(),
            reproduce: ReproduceConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match self.mode {
            Mode::Decompose => {
                self.decompose.operator.resolve()?;
                self.decompose.psi.resolve()?;
            }
            Mode::MziTheory => {
                self.mzi_theory.thetas.validate()?;
                if let Some(imp) = &self.mzi_theory.imperfection {
                    imp.to_model().validate()?;
                }
            }
            Mode::Synth => {
                self.synth.detector.validate()?;
                if let SourceConfig::Interferometer { imperfection: Some(imp), .. } = &self.synth.source {
                    imp.to_model().validate()?;
                }
                if self.synth.n_frames == 0 {
                    return bad("synth.n_frames must be positive".into());
                }
                if let SourceConfig::Model { params } = &self.synth.source {
                    params.validate()?;
                }
            }
            Mode::Fit => {}
            Mode::Sweep => {
                self.sweep.thetas.validate()?;
                self.sweep.detector.validate()?;
                if let Some(imp) = &self.sweep.imperfection {
                    imp.to_model().validate()?;
                }
                if self.sweep.n_frames < 2 {
                    return bad("sweep.n_frames must be at least 2".into());
                }
            }
            Mode::Weakmeas => {
                self.weakmeas.thetas.validate()?;
                if self.weakmeas.a_over_sigma.is_empty() || self.weakmeas.a_over_sigma.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad("weakmeas.a_over_sigma must list positive ratios".into());
                }
                if !(self.weakmeas.beam_sigma > 0.0) {
                    return bad("weakmeas.beam_sigma must be positive".into());
                }
                self.weakmeas.psi.resolve()?;
            }
            Mode::Reproduce => {
                if self.reproduce.figure.is_none() {
                    return bad("reproduce.figure is required".into());
                }
                if self.reproduce.n_frames < 2 {
                    return bad("reproduce.n_frames must be at least 2".into());
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and for `config.json`.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn frame_phase(&self, drift: Option<DriftConfig>) -> FramePhase {
        match (self.stabilized, drift) {
            (_, Some(d)) => FramePhase::Drift { step_std: d.step_std, bound: d.bound },
            (true, None) => FramePhase::Stabilized,
            (false, None) => FramePhase::Unstabilized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub output_dir: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    pub format: OutputFormat,
    pub svg: bool,
    pub timestamps: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { format: OutputFormat::Csv, svg: true, timestamps: true }
    }
}

/// Inclusive grid `start, start + step, …, stop` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self { start_deg: 0.0, stop_deg: 360.0, step_deg: 2.0 }
    }
}

impl ThetaGrid {
    pub fn half_turn() -> Self {
        Self { start_deg: 0.0, stop_deg: 180.0, step_deg: 2.0 }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let ok = self.start_deg.is_finite() && self.stop_deg.is_finite() && self.step_deg > 0.0 && self.stop_deg >= self.start_deg;
        if !ok || self.len() > 1_000_000 {
            return Err(CliError::Config(format!("invalid θ grid {:?}", self)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.start_deg + i as f64 * self.step_deg).collect()
    }

    pub fn radians(&self) -> Vec<f64> {
        self.degrees().into_iter().map(f64::to_radians).collect()
    }
}

/// Interferometer imperfection with wave-plate angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionSpec {
    /// Retardance per reflection, radians.
    #[serde(default)]
    pub ellipticity_retardance: f64,
    #[serde(default)]
    pub compensation_qwp_deg: Option<f64>,
    #[serde(default = "default_axis_deg")]
    pub axis_deg: f64,
}

fn default_axis_deg() -> f64 {
    45.0
}

impl ImperfectionSpec {
    pub fn to_model(&self) -> ImperfectionModel {
        ImperfectionModel {
            ellipticity_retardance: self.ellipticity_retardance,
            compensation_qwp_angle: self.compensation_qwp_deg.map(f64::to_radians),
            axis: self.axis_deg.to_radians(),
        }
    }
}

/// A named operator, a class operator `hwp(θ)·Π_H`, or explicit entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Preset(String),
    ClassOperator { class_operator_theta_deg: f64 },
    Entries(JonesMatrix),
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::Preset("lowering".into())
    }
}

impl OperatorSpec {
    pub fn resolve(&self) -> Result<JonesMatrix, CliError> {
        match self {
            OperatorSpec::Preset(name) => match name.as_str() {
                "lowering" => Ok(JonesMatrix::lowering()),
                "raising" => Ok(JonesMatrix::lowering().adjoint()),
                "identity" => Ok(JonesMatrix::identity()),
                "pauli_x" => Ok(JonesMatrix::pauli_x()),
                "pauli_y" => Ok(JonesMatrix::pauli_y()),
                "pauli_z" => Ok(JonesMatrix::pauli_z()),
                "proj_h" => Ok(JonesMatrix::proj_h()),
                "proj_v" => Ok(JonesMatrix::proj_v()),
                other => Err(CliError::Config(format!("unknown operator preset '{other}'"))),
            },
            OperatorSpec::ClassOperator { class_operator_theta_deg } => Ok(class_operator(class_operator_theta_deg.to_radians())),
            OperatorSpec::Entries(m) => Ok(*m),
        }
    }
}

/// A named polarization state or explicit normalized components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Preset(String),
    Components(JonesVector),
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Preset("plus".into())
    }
}

impl StateSpec {
    pub fn resolve(&self) -> Result<JonesVector, CliError> {
        let v = match self {
            StateSpec::Preset(name) => match name.as_str() {
                "h" | "horizontal" => JonesVector::horizontal(),
                "v" | "vertical" => JonesVector::vertical(),
                "plus" | "diagonal" => JonesVector::diagonal(),
                "minus" | "antidiagonal" => JonesVector::antidiagonal(),
                "right" => JonesVector::circular_right(),
                "left" => JonesVector::circular_left(),
                other => return Err(CliError::Config(format!("unknown state preset '{other}'"))),
            },
            StateSpec::Components(v) => *v,
        };
        if !v.is_normalized(1e-9) {
            return Err(CliError::Config(format!("state {v} is not normalized")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    pub operator: OperatorSpec,
    pub psi: StateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MziTheoryConfig {
    pub thetas: ThetaGrid,
    pub imperfection: Option<ImperfectionSpec>,
    /// Phase-scan steps used to cross-check the closed form; 0 disables.
    pub scan_steps: usize,
}

impl Default for MziTheoryConfig {
    fn default() -> Self {
        Self { thetas: ThetaGrid::default(), imperfection: None, scan_steps: 360 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub step_std: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Model {
        params: FringeModelParams,
    },
    Interferometer {
        theta_deg: f64,
        #[serde(default = "yes")]
        polarizer: bool,
        #[serde(default)]
        envelope: BeamEnvelope,
        #[serde(default)]
        imperfection: Option<ImperfectionSpec>,
    },
}

fn yes() -> bool {
    true
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Interferometer { theta_deg: 45.0, polarizer: true, envelope: BeamEnvelope::default(), imperfection: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub source: SourceConfig,
    pub detector: DetectorConfig,
    pub n_frames: usize,
    pub drift: Option<DriftConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { source: SourceConfig::default(), detector: DetectorConfig::default(), n_frames: 10, drift: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub method: FitMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub thetas: ThetaGrid,
    pub n_frames: usize,
    pub detector: DetectorConfig,
    pub envelope: BeamEnvelope,
    pub method: FitMethod,
    pub imperfection: Option<ImperfectionSpec>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thetas: ThetaGrid::default(),
            n_frames: 100,
            detector: DetectorConfig::default(),
            envelope: BeamEnvelope::default(),
            method: FitMethod::FullModel,
            imperfection: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakmeasConfig {
    pub thetas: ThetaGrid,
    pub psi: StateSpec,
    pub a_over_sigma: Vec<f64>,
    pub beam_sigma: f64,
    pub displaced_component: DisplacedComponent,
    pub centroid_noise_std: f64,
    /// Images averaged per angle when centroid noise is on.
    pub n_images: usize,
    pub remap: WeakValueRemap,
}

impl Default for WeakmeasConfig {
    fn default() -> Self {
        Self {
            thetas: ThetaGrid::half_turn(),
            psi: StateSpec::default(),
            a_over_sigma: vec![WEAK_A_OVER_SIGMA, REALISTIC_A_OVER_SIGMA],
            beam_sigma: DEFAULT_BEAM_SIGMA_UM,
            displaced_component: DisplacedComponent::V,
            centroid_noise_std: 0.0,
            n_images: 10,
            remap: WeakValueRemap::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReproduceConfig {
    pub figure: Option<Figure>,
    /// Frames per angle for the interferometer figures.
    pub n_frames: usize,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self { figure: None, n_frames: 100 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_json(r#"{"mode": "decompose"}"#).unwrap();
        assert_eq!(cfg.decompose.operator.resolve().unwrap(), JonesMatrix::lowering());
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"mode": "decompose", "colour": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"mode": "sweep", "sweep": {"n_frame": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"mode": "nope"}"#).is_err());
    }

    #[test]
    fn round_trip_through_canonical_json() {
        let mut cfg = ExperimentConfig::new(Mode::Weakmeas);
        cfg.seed = 17;
        let back = ExperimentConfig::from_json(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn theta_grid_is_inclusive() {
        let g = ThetaGrid::default();
        assert_eq!(g.len(), 181);
        assert_eq!(*g.degrees().last().unwrap(), 360.0);
        assert!(ThetaGrid { start_deg: 0.0, stop_deg: -1.0, step_deg: 1.0 }.validate().is_err());
    }

    #[test]
    fn operator_specs() {
        let entries: OperatorSpec = serde_json::from_str("[[0,0],[0,0],[1,0],[0,0]]").unwrap();
        assert_eq!(entries.resolve().unwrap(), JonesMatrix::lowering());
        let class: OperatorSpec = serde_json::from_str(r#"{"class_operator_theta_deg": 45}"#).unwrap();
        assert!(class.resolve().unwrap().approx_eq(&JonesMatrix::lowering(), 1e-15));
        assert!(OperatorSpec::Preset("bogus".into()).resolve().is_err());
        assert!(StateSpec::Components(JonesVector::from_real(1.0, 1.0)).resolve().is_err());
    }

    #[test]
    fn mode_mismatch_fields_validate() {
        let mut cfg = ExperimentConfig::new(Mode::Reproduce);
        assert!(cfg.validate().is_err());
        cfg.reproduce.figure = Some(Figure::Fig5);
        assert!(cfg.validate().is_ok());
    }
}
