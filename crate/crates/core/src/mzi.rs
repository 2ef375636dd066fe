//! Analytic Mach–Zehnder propagation with polarization optics in each arm,
//! and the two inference pipelines built on it: `|⟨A⟩|` from visibility, and
//! `|⟨R⟩_w|` from the ratio of two visibility runs.
//!
//! Arm `a` carries `R`, arm `b` carries `U†`. After the second beam splitter
//! the ports hold `c = ½(a − e^{iε} b)` and `d = ½(a + e^{iε} b)`, so the
//! detector in port `d` sees `I_d = ¼(1 + ⟨R²⟩ + 2|z| cos(φ − ε))` with
//! `z = ⟨ψ|U R|ψ⟩ = |z| e^{iφ}`.

use std::f64::consts::{FRAC_PI_4, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jones::{self, JonesError, JonesMatrix, JonesVector};

/// Below this `v_without_r` the weak-value ratio is flagged as dominated by
/// division noise.
pub const AMPLIFICATION_THRESHOLD: f64 = 1e-3;
/// Hard floor on the denominator of the weak-value ratio.
pub const MIN_OVERLAP_VISIBILITY: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MziError {
    #[error(transparent)]
    Jones(#[from] JonesError),
    #[error("phase scan needs at least 8 steps, got {0}")]
    TooFewSteps(usize),
    #[error("phase scan is degenerate: max + min intensity = {0:e}")]
    DegenerateScan(f64),
    #[error("visibility without R is {0:e}; weak value is undefined")]
    ZeroOverlapVisibility(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Ellipticity picked up on reflections, modeled as retarders.
///
/// Three reflection events are modeled, each a retarder of
/// `ellipticity_retardance` with fast axis at `axis` (default 45°): one after
/// `R` in arm `a` and two after `U†` in arm `b`. Only the surplus reflection
/// in arm `b` changes the fringe. An optional compensator with retardance
/// `−ellipticity_retardance` and fast axis at `compensation_qwp_angle` sits
/// after `U†` in arm `b`; at the imperfection axis it cancels the surplus
/// reflection exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionModel {
    #[serde(default)]
    pub ellipticity_retardance: f64,
    #[serde(default)]
    pub compensation_qwp_angle: Option<f64>,
    #[serde(default = "default_axis")]
    pub axis: f64,
}

fn default_axis() -> f64 {
    FRAC_PI_4
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        Self { ellipticity_retardance: 0.0, compensation_qwp_angle: None, axis: FRAC_PI_4 }
    }
}

impl ImperfectionModel {
    pub fn uncompensated(retardance: f64) -> Self {
        Self { ellipticity_retardance: retardance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MziError> {
        let d = self.ellipticity_retardance;
        if !(0.0..=std::f64::consts::PI).contains(&d) {
            return Err(MziError::InvalidConfig("ellipticity_retardance must lie in [0, π]"));
        }
        if !self.axis.is_finite() || self.compensation_qwp_angle.is_some_and(|a| !a.is_finite()) {
            return Err(MziError::InvalidConfig("imperfection angles must be finite"));
        }
        Ok(())
    }

    fn reflection(&self) -> JonesMatrix {
        jones::retarder(self.axis, self.ellipticity_retardance)
    }

    fn arm_a(&self) -> JonesMatrix {
        self.reflection()
    }

    fn arm_b(&self) -> JonesMatrix {
        let j = self.reflection();
        let comp = match self.compensation_qwp_angle {
            Some(angle) => jones::retarder(angle, -self.ellipticity_retardance),
            None => JonesMatrix::identity(),
        };
        j * j * comp
    }
}

/// Interferometer description. `arm_b_op` is the operator physically placed
/// in arm `b`, i.e. `U†`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziConfig {
    pub psi: JonesVector,
    pub arm_a_op: JonesMatrix,
    pub arm_b_op: JonesMatrix,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub imperfection: Option<ImperfectionModel>,
}

impl MziConfig {
    /// `R` in arm `a`, `U†` in arm `b`.
    pub fn from_polar(psi: JonesVector, r: JonesMatrix, u: JonesMatrix, epsilon: f64) -> Self {
        Self { psi, arm_a_op: r, arm_b_op: u.adjoint(), epsilon, imperfection: None }
    }

    /// Polarizer (Π_H) in arm `a`, HWP at `theta` in arm `b`, input |+⟩.
    pub fn with_polarizer(theta: f64) -> Self {
        Self::from_polar(JonesVector::diagonal(), JonesMatrix::proj_h(), jones::hwp(theta), 0.0)
    }

    /// Polarizer removed: empty arm `a`, HWP at `theta` in arm `b`, input |+⟩.
    pub fn without_polarizer(theta: f64) -> Self {
        Self::from_polar(JonesVector::diagonal(), JonesMatrix::identity(), jones::hwp(theta), 0.0)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_imperfection(mut self, imperfection: Option<ImperfectionModel>) -> Self {
        self.imperfection = imperfection;
        self
    }

    pub fn validate(&self) -> Result<(), MziError> {
        self.psi.require_normalized()?;
        if !self.epsilon.is_finite() || !self.arm_a_op.is_finite() || !self.arm_b_op.is_finite() {
            return Err(MziError::InvalidConfig("non-finite configuration value"));
        }
        if let Some(imp) = &self.imperfection {
            imp.validate()?;
        }
        Ok(())
    }

    /// Polarization amplitudes arriving at the second beam splitter from
    /// arms `a` and `b` (without the arm phase).
    pub fn arm_amplitudes(&self) -> (JonesVector, JonesVector) {
        let a = self.arm_a_op.apply(&self.psi);
        let b = self.arm_b_op.apply(&self.psi);
        match &self.imperfection {
            Some(imp) => (imp.arm_a().apply(&a), imp.arm_b().apply(&b)),
            None => (a, b),
        }
    }

    /// `z = ⟨b|a⟩`, which equals `⟨ψ|U R|ψ⟩` when no imperfection is present.
    pub fn fringe_amplitude(&self) -> Complex64 {
        let (a, b) = self.arm_amplitudes();
        b.inner(&a)
    }

    /// `‖a‖²`, i.e. `⟨R†R⟩` in arm `a`.
    pub fn arm_a_power(&self) -> f64 {
        self.arm_amplitudes().0.norm_sqr()
    }
}

/// Amplitudes in the two output ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortState {
    pub c_amp: JonesVector,
    pub d_amp: JonesVector,
}

impl PortState {
    pub fn intensity_c(&self) -> f64 {
        self.c_amp.norm_sqr()
    }

    pub fn intensity_d(&self) -> f64 {
        self.d_amp.norm_sqr()
    }
}

pub fn propagate(cfg: &MziConfig) -> PortState {
    let (a, b) = cfg.arm_amplitudes();
    let b = b.scale(Complex64::from_polar(1.0, cfg.epsilon));
    let half = Complex64::new(0.5, 0.0);
    PortState { c_amp: (a - b).scale(half), d_amp: (a + b).scale(half) }
}

pub fn intensity_d(cfg: &MziConfig) -> f64 {
    propagate(cfg).intensity_d()
}

pub fn intensity_c(cfg: &MziConfig) -> f64 {
    propagate(cfg).intensity_c()
}

/// Closed form `¼(‖a‖² + ‖b‖² + 2|z| cos(φ − ε))`.
pub fn intensity_d_closed_form(cfg: &MziConfig) -> f64 {
    let (a, b) = cfg.arm_amplitudes();
    let z = b.inner(&a);
    0.25 * (a.norm_sqr() + b.norm_sqr() + 2.0 * z.norm() * (z.arg() - cfg.epsilon).cos())
}

/// Whether the interferometer arm phase is locked, so the fringe phase is
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Stabilized,
    #[default]
    Unstabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub visibility: f64,
    /// `arg z`; only reported for a stabilized scan.
    pub phase_shift: Option<f64>,
    pub r_squared_mean: f64,
}

/// Closed-form `V = 2|z|/(‖a‖² + ‖b‖²)`, i.e. `2|z|/(1+⟨R²⟩)` for the ideal
/// interferometer.
pub fn analytic_visibility(cfg: &MziConfig) -> VisibilityResult {
    let (a, b) = cfg.arm_amplitudes();
    let z = b.inner(&a);
    let total = a.norm_sqr() + b.norm_sqr();
    let visibility = if total > 0.0 { 2.0 * z.norm() / total } else { 0.0 };
    VisibilityResult { visibility, phase_shift: Some(z.arg()), r_squared_mean: a.norm_sqr() }
}

/// Step ε uniformly over `[0, 2π)` and reduce the detector readings.
///
/// The readings are reduced by N-step phase shifting: the mean and the first
/// Fourier harmonic of the samples give the sinusoid `m + h cos(ε − φ)`
/// exactly, from which `V = h/m` and the argmax `φ` follow. The configured
/// `epsilon` is ignored.
pub fn visibility_phase_scan(cfg: &MziConfig, n_steps: usize, mode: ScanMode) -> Result<VisibilityResult, MziError> {
    if n_steps < 8 {
        return Err(MziError::TooFewSteps(n_steps));
    }
    cfg.validate()?;
    let mut sum = 0.0;
    let mut harmonic = Complex64::new(0.0, 0.0);
    for j in 0..n_steps {
        let eps = TAU * j as f64 / n_steps as f64;
        let i_d = intensity_d(&cfg.with_epsilon(eps));
        sum += i_d;
        harmonic += Complex64::from_polar(i_d, eps);
    }
    let mean = sum / n_steps as f64;
    let harmonic = harmonic * (2.0 / n_steps as f64);
    let (max, min) = (mean + harmonic.norm(), mean - harmonic.norm());
    if max + min < 1e-15 {
        return Err(MziError::DegenerateScan(max + min));
    }
    let phase_shift = match mode {
        ScanMode::Stabilized => Some(harmonic.arg()),
        ScanMode::Unstabilized => None,
    };
    Ok(VisibilityResult {
        visibility: (max - min) / (max + min),
        phase_shift,
        r_squared_mean: cfg.arm_a_power(),
    })
}

/// `⟨R²⟩ = ‖Rψ‖²`, the power transmitted by `R` alone.
pub fn measure_r_squared(psi: &JonesVector, r: &JonesMatrix) -> Result<f64, MziError> {
    psi.require_normalized()?;
    if !r.is_hermitian(jones::PREDICATE_TOL) {
        return Err(JonesError::NotHermitian.into());
    }
    Ok(r.apply(psi).norm_sqr())
}

/// `|z| = V·(1 + ⟨R²⟩)/2`.
pub fn infer_z(visibility: f64, r_squared: f64) -> f64 {
    visibility * (1.0 + r_squared) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValueInference {
    pub magnitude: f64,
    /// Set when the overlap visibility is below [`AMPLIFICATION_THRESHOLD`].
    pub amplification_region: bool,
}

/// `|R_w| = [V_R·(1+⟨R²⟩)/2] / V_noR`, where `V_noR = |⟨φ|ψ⟩|` is the
/// visibility with `R` removed.
pub fn infer_weak_value(v_with_r: f64, v_without_r: f64, r_squared: f64) -> Result<WeakValueInference, MziError> {
    if !(v_without_r > MIN_OVERLAP_VISIBILITY) {
        return Err(MziError::ZeroOverlapVisibility(v_without_r));
    }
    Ok(WeakValueInference {
        magnitude: infer_z(v_with_r, r_squared) / v_without_r,
        amplification_region: v_without_r < AMPLIFICATION_THRESHOLD,
    })
}

/// One row of the HWP-angle sweep, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub theta: f64,
    pub v_with_r: f64,
    pub v_without_r: f64,
    pub z_abs: f64,
    /// `None` at exactly orthogonal selection.
    pub weak_value_abs: Option<f64>,
    pub amplification_region: bool,
    /// `⟨φ|ψ⟩ = sin 2θ`.
    pub overlap: f64,
}

/// Tabulate the polarizer/HWP sweep from the analytic layer.
pub fn theory_sweep(thetas: &[f64]) -> Vec<TheoryRow> {
    theory_sweep_with(thetas, None)
}

pub fn theory_sweep_with(thetas: &[f64], imperfection: Option<ImperfectionModel>) -> Vec<TheoryRow> {
    let r_sq = 0.5;
    thetas
        .iter()
        .map(|&theta| {
            let v_with_r = analytic_visibility(&MziConfig::with_polarizer(theta).with_imperfection(imperfection)).visibility;
            let v_without_r =
                analytic_visibility(&MziConfig::without_polarizer(theta).with_imperfection(imperfection)).visibility;
            let inferred = infer_weak_value(v_with_r, v_without_r, r_sq).ok();
            TheoryRow {
                theta,
                v_with_r,
                v_without_r,
                z_abs: infer_z(v_with_r, r_sq),
                weak_value_abs: inferred.map(|w| w.magnitude),
                amplification_region: inferred.is_none_or(|w| w.amplification_region),
                overlap: (2.0 * theta).sin(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn balanced_empty_interferometer_is_constructive_in_d() {
        let cfg = MziConfig::from_polar(JonesVector::diagonal(), JonesMatrix::identity(), JonesMatrix::identity(), 0.0);
        let ports = propagate(&cfg);
        assert!(ports.c_amp.norm() < 1e-15);
        assert!((ports.d_amp - cfg.psi).norm() < 1e-15);
        for eps in [0.0, 0.5, 2.0, PI] {
            let i = intensity_d(&cfg.with_epsilon(eps));
            assert!((i - 0.5 * (1.0 + eps.cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn paper_configuration_intensities() {
        let cfg = MziConfig::with_polarizer(FRAC_PI_4);
        assert!((intensity_d(&cfg) - 0.625).abs() < 1e-12);
        assert!((intensity_d(&cfg.with_epsilon(PI)) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn scan_paper_configuration() {
        let r = visibility_phase_scan(&MziConfig::with_polarizer(FRAC_PI_4), 360, ScanMode::Stabilized).unwrap();
        assert!((r.visibility - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.phase_shift.unwrap().abs() < 1e-12);
        assert!((r.r_squared_mean - 0.5).abs() < 1e-15);
        let r = visibility_phase_scan(&MziConfig::with_polarizer(FRAC_PI_4), 360, ScanMode::Unstabilized).unwrap();
        assert!(r.phase_shift.is_none());
    }

    #[test]
    fn scan_without_polarizer_is_abs_sin() {
        for deg in [0.0f64, 10.0, 22.5, 45.0, 100.0, 300.0] {
            let t = deg.to_radians();
            let r = visibility_phase_scan(&MziConfig::without_polarizer(t), 64, ScanMode::Unstabilized).unwrap();
            assert!((r.visibility - (2.0 * t).sin().abs()).abs() < 1e-12, "θ={deg}");
        }
    }

    #[test]
    fn scan_zero_fringe() {
        let cfg = MziConfig::from_polar(JonesVector::vertical(), JonesMatrix::proj_h(), JonesMatrix::identity(), 0.0);
        let r = visibility_phase_scan(&cfg, 16, ScanMode::Unstabilized).unwrap();
        assert!(r.visibility.abs() < 1e-15);
    }

    #[test]
    fn scan_errors() {
        let cfg = MziConfig::with_polarizer(0.3);
        assert_eq!(visibility_phase_scan(&cfg, 7, ScanMode::Stabilized), Err(MziError::TooFewSteps(7)));
        let dark = MziConfig::from_polar(JonesVector::vertical(), JonesMatrix::proj_h(), JonesMatrix::zero(), 0.0);
        assert!(matches!(visibility_phase_scan(&dark, 8, ScanMode::Stabilized), Err(MziError::DegenerateScan(_))));
    }

    #[test]
    fn r_squared_measurement() {
        assert!((measure_r_squared(&JonesVector::diagonal(), &JonesMatrix::proj_h()).unwrap() - 0.5).abs() < 1e-15);
        assert!((measure_r_squared(&JonesVector::circular_left(), &JonesMatrix::identity()).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            measure_r_squared(&JonesVector::diagonal(), &JonesMatrix::lowering()),
            Err(MziError::Jones(JonesError::NotHermitian))
        ));
    }

    #[test]
    fn infer_z_examples() {
        assert!((infer_z(2.0 / 3.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(infer_z(0.0, 0.7), 0.0);
        // Visibility 0.64 with ⟨R²⟩ = ½ back-solves to 0.480.
        assert!((infer_z(0.64, 0.5) - 0.48).abs() < 1e-15);
    }

    #[test]
    fn weak_value_inference() {
        let w = infer_weak_value(2.0 / 3.0, 1.0, 0.5).unwrap();
        assert!((w.magnitude - 0.5).abs() < 1e-15);
        assert!(!w.amplification_region);
        assert_eq!(infer_weak_value(0.0, 0.5, 0.5).unwrap().magnitude, 0.0);
        let w = infer_weak_value(0.6, 5e-4, 0.5).unwrap();
        assert!(w.amplification_region);
        assert!(w.magnitude.is_finite());
        assert!(matches!(infer_weak_value(0.6, 0.0, 0.5), Err(MziError::ZeroOverlapVisibility(_))));
    }

    #[test]
    fn theory_rows() {
        let rows = theory_sweep(&[FRAC_PI_4, 0.0, PI / 8.0]);
        let r45 = rows[0];
        assert!((r45.v_with_r - 2.0 / 3.0).abs() < 1e-12);
        assert!((r45.v_without_r - 1.0).abs() < 1e-12);
        assert!((r45.z_abs - 0.5).abs() < 1e-12);
        assert!((r45.weak_value_abs.unwrap() - 0.5).abs() < 1e-12);
        assert!((r45.overlap - 1.0).abs() < 1e-15);

        let r0 = rows[1];
        assert!((r0.v_with_r - 2.0 / 3.0).abs() < 1e-12);
        assert!(r0.v_without_r.abs() < 1e-15);
        assert!((r0.z_abs - 0.5).abs() < 1e-12);
        assert!(r0.amplification_region);
        assert_eq!(r0.overlap, 0.0);

        let r22 = rows[2];
        let t = PI / 8.0;
        let expected = (2.0 / 3.0) * ((2.0 * t).cos() + (2.0 * t).sin()).abs();
        assert!((r22.v_with_r - expected).abs() < 1e-12);
    }

    #[test]
    fn arm_order_is_irrelevant() {
        let base = MziConfig::with_polarizer(0.3).with_epsilon(0.8);
        let swapped = MziConfig { arm_a_op: base.arm_b_op, arm_b_op: base.arm_a_op, ..base }.with_epsilon(-0.8);
        assert!((intensity_d(&base) - intensity_d(&swapped)).abs() < 1e-15);
        let v1 = visibility_phase_scan(&base, 90, ScanMode::Unstabilized).unwrap().visibility;
        let v2 = visibility_phase_scan(&swapped, 90, ScanMode::Unstabilized).unwrap().visibility;
        assert!((v1 - v2).abs() < 1e-14);
    }

    #[test]
    fn exact_compensation_restores_ideal_fringe() {
        let imp = ImperfectionModel { ellipticity_retardance: 0.25, compensation_qwp_angle: Some(FRAC_PI_4), ..Default::default() };
        for deg in [0.0f64, 22.5, 40.0, 67.5] {
            let t = deg.to_radians();
            let ideal = analytic_visibility(&MziConfig::with_polarizer(t)).visibility;
            let comp = analytic_visibility(&MziConfig::with_polarizer(t).with_imperfection(Some(imp))).visibility;
            assert!((ideal - comp).abs() < 1e-12);
        }
    }

    #[test]
    fn imperfection_validation() {
        assert!(ImperfectionModel::uncompensated(-0.1).validate().is_err());
        assert!(ImperfectionModel::uncompensated(4.0).validate().is_err());
        assert!(ImperfectionModel::uncompensated(0.3).validate().is_ok());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = MziConfig::with_polarizer(0.2).with_imperfection(Some(ImperfectionModel::uncompensated(0.1)));
        let s = serde_json::to_string(&cfg).unwrap();
        let back: MziConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<MziConfig>(r#"{"psi":[[1,0],[0,0]],"arm_a_op":[[1,0],[0,0],[0,0],[1,0]],"arm_b_op":[[1,0],[0,0],[0,0],[1,0]],"bogus":1}"#).is_err());
    }
}
