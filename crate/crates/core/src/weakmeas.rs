//! Weak measurement of a polarization projector with a transverse beam
//! displacer.
//!
//! One linear polarization passes undeviated, the other is shifted by `a`.
//! After post-selection on `φ` the transverse amplitude is
//! `c_u G₀(x) + c_d G_a(x)` with `c_u = ⟨φ|Π_u|ψ⟩`, `c_d = ⟨φ|Π_d|ψ⟩` and
//! `G_c(x) = (2πσ²)^{-1/4} exp(−(x−c)²/4σ²)`, so the intensity profile has
//! standard deviation σ. Writing `w = c_u* c_d` and `η = exp(−a²/8σ²)`:
//!
//! ```text
//! ∫ f      = |c_u|² + |c_d|² + 2 Re(w) η
//! ⟨x⟩      = a (|c_d|² + Re(w) η) / ∫ f
//! ⟨p⟩      = (a / 2σ²) Im(w) η / ∫ f          (ħ = 1)
//! ```
//!
//! and `⟨x⟩/a → Re⟨Π_d⟩_w`, `⟨p⟩ → (a/2σ²) Im⟨Π_d⟩_w` as `a/σ → 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jones::{hwp, JonesError, JonesMatrix, JonesVector};
use crate::quad;

/// Both post-selected amplitudes below this count as a failed post-selection.
pub const ZERO_POSTSELECTION: f64 = 1e-15;
/// `a/σ` used for weak-limit scenarios.
pub const WEAK_A_OVER_SIGMA: f64 = 0.01;
/// `a/σ` of a realistic displacer.
pub const REALISTIC_A_OVER_SIGMA: f64 = 0.2;
/// Beam width at the profiler, in micrometres.
pub const DEFAULT_BEAM_SIGMA_UM: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeakMeasError {
    #[error(transparent)]
    Jones(#[from] JonesError),
    #[error("post-selection amplitudes vanish (|c_u| = {c_u:e}, |c_d| = {c_d:e})")]
    ZeroPostSelection { c_u: f64, c_d: f64 },
    #[error("displacement must be positive to infer a weak value")]
    ZeroDisplacement,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Polarization component shifted by the displacer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DisplacedComponent {
    H,
    #[default]
    V,
}

impl DisplacedComponent {
    fn projectors(self) -> (JonesMatrix, JonesMatrix) {
        match self {
            DisplacedComponent::V => (JonesMatrix::proj_h(), JonesMatrix::proj_v()),
            DisplacedComponent::H => (JonesMatrix::proj_v(), JonesMatrix::proj_h()),
        }
    }
}

/// Linear map applied to the raw `centroid/a` before it is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakValueRemap {
    pub scale: f64,
    pub offset: f64,
}

impl Default for WeakValueRemap {
    fn default() -> Self {
        Self { scale: 1.0, offset: 0.0 }
    }
}

impl WeakValueRemap {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakMeasConfig {
    pub psi: JonesVector,
    pub phi: JonesVector,
    pub displacement_a: f64,
    pub beam_sigma: f64,
    #[serde(default)]
    pub displaced_component: DisplacedComponent,
    /// Standard deviation of the profiler's centroid readout.
    #[serde(default)]
    pub centroid_noise_std: f64,
    #[serde(default)]
    pub remap: WeakValueRemap,
}

impl WeakMeasConfig {
    /// Config with `a = ratio·σ` and σ at its default.
    pub fn with_ratio(psi: JonesVector, phi: JonesVector, a_over_sigma: f64) -> Self {
        Self {
            psi,
            phi,
            displacement_a: a_over_sigma * DEFAULT_BEAM_SIGMA_UM,
            beam_sigma: DEFAULT_BEAM_SIGMA_UM,
            displaced_component: DisplacedComponent::V,
            centroid_noise_std: 0.0,
            remap: WeakValueRemap::default(),
        }
    }

    pub fn a_over_sigma(&self) -> f64 {
        self.displacement_a / self.beam_sigma
    }

    pub fn validate(&self) -> Result<(), WeakMeasError> {
        self.psi.require_normalized()?;
        self.phi.require_normalized()?;
        if !(self.beam_sigma > 0.0 && self.beam_sigma.is_finite()) {
            return Err(WeakMeasError::InvalidConfig("beam_sigma must be positive"));
        }
        if !(self.displacement_a >= 0.0 && self.displacement_a.is_finite()) {
            return Err(WeakMeasError::InvalidConfig("displacement_a must be non-negative"));
        }
        if !(self.centroid_noise_std >= 0.0 && self.centroid_noise_std.is_finite()) {
            return Err(WeakMeasError::InvalidConfig("centroid_noise_std must be non-negative"));
        }
        Ok(())
    }
}

/// Post-selected pointer amplitude `c_u G₀ + c_d G_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerState {
    pub c_undisplaced: Complex64,
    pub c_displaced: Complex64,
    /// `∫ f(x) dx`, the post-selection probability.
    pub norm: f64,
    pub displacement_a: f64,
    pub beam_sigma: f64,
}

impl PointerState {
    /// `exp(−a²/8σ²)`, the overlap of the two displaced Gaussians.
    pub fn gaussian_overlap(&self) -> f64 {
        (-self.displacement_a.powi(2) / (8.0 * self.beam_sigma.powi(2))).exp()
    }

    fn amplitude(&self, c: f64, x: f64) -> f64 {
        let s = self.beam_sigma;
        (2.0 * PI * s * s).powf(-0.25) * (-(x - c).powi(2) / (4.0 * s * s)).exp()
    }

    /// Unnormalized post-selected intensity `|c_u G₀(x) + c_d G_a(x)|²`.
    pub fn density(&self, x: f64) -> f64 {
        (self.c_undisplaced * self.amplitude(0.0, x) + self.c_displaced * self.amplitude(self.displacement_a, x)).norm_sqr()
    }

    /// Unnormalized momentum-space intensity.
    pub fn momentum_density(&self, p: f64) -> f64 {
        let s = self.beam_sigma;
        let g = (2.0 * s * s / PI).powf(0.25) * (-s * s * p * p).exp();
        let phase = Complex64::from_polar(1.0, -p * self.displacement_a);
        ((self.c_undisplaced + self.c_displaced * phase) * g).norm_sqr()
    }

    fn cross(&self) -> Complex64 {
        self.c_undisplaced.conj() * self.c_displaced
    }

    /// Integration window covering both Gaussians to well below 1e-20.
    fn x_window(&self) -> (f64, f64) {
        let s = self.beam_sigma;
        let (lo, hi) = (self.displacement_a.min(0.0), self.displacement_a.max(0.0));
        (lo - 14.0 * s, hi + 14.0 * s)
    }
}

/// Amplitudes of the two pointer components after post-selection.
pub fn pointer_after_postselection(cfg: &WeakMeasConfig) -> Result<PointerState, WeakMeasError> {
    cfg.validate()?;
    let (stay, shift) = cfg.displaced_component.projectors();
    let c_u = cfg.phi.inner(&stay.apply(&cfg.psi));
    let c_d = cfg.phi.inner(&shift.apply(&cfg.psi));
    if c_u.norm() < ZERO_POSTSELECTION && c_d.norm() < ZERO_POSTSELECTION {
        return Err(WeakMeasError::ZeroPostSelection { c_u: c_u.norm(), c_d: c_d.norm() });
    }
    let mut state = PointerState {
        c_undisplaced: c_u,
        c_displaced: c_d,
        norm: 0.0,
        displacement_a: cfg.displacement_a,
        beam_sigma: cfg.beam_sigma,
    };
    state.norm = c_u.norm_sqr() + c_d.norm_sqr() + 2.0 * state.cross().re * state.gaussian_overlap();
    if !(state.norm > 0.0) {
        return Err(WeakMeasError::ZeroPostSelection { c_u: c_u.norm(), c_d: c_d.norm() });
    }
    Ok(state)
}

/// Closed-form centroid `⟨x⟩` of the post-selected intensity.
pub fn centroid_exact(cfg: &WeakMeasConfig) -> Result<f64, WeakMeasError> {
    let st = pointer_after_postselection(cfg)?;
    Ok(centroid_of(&st))
}

fn centroid_of(st: &PointerState) -> f64 {
    st.displacement_a * (st.c_displaced.norm_sqr() + st.cross().re * st.gaussian_overlap()) / st.norm
}

/// Centroid by adaptive quadrature of `x f(x)` and `f(x)`.
pub fn centroid_numeric(cfg: &WeakMeasConfig) -> Result<f64, WeakMeasError> {
    let st = pointer_after_postselection(cfg)?;
    let (lo, hi) = st.x_window();
    let mass = quad::integrate_panels(|x| st.density(x), lo, hi, 16, 1e-13, 0.0).value;
    let first = quad::integrate_panels(|x| x * st.density(x), lo, hi, 16, 1e-13, 1e-16 * cfg.beam_sigma).value;
    Ok(first / mass)
}

/// Post-selection probability `∫ f(x) dx` by quadrature.
pub fn postselection_probability_numeric(cfg: &WeakMeasConfig) -> Result<f64, WeakMeasError> {
    let st = pointer_after_postselection(cfg)?;
    let (lo, hi) = st.x_window();
    Ok(quad::integrate_panels(|x| st.density(x), lo, hi, 16, 1e-13, 0.0).value)
}

/// Mean transverse momentum (ħ = 1), integrated in the Fourier domain.
pub fn momentum_centroid(cfg: &WeakMeasConfig) -> Result<f64, WeakMeasError> {
    let st = pointer_after_postselection(cfg)?;
    if cfg.displacement_a == 0.0 {
        return Ok(0.0);
    }
    let reach = 10.0 / cfg.beam_sigma;
    // Enough panels to resolve the e^{−ipa} oscillation.
    let panels = ((reach * cfg.displacement_a / PI).ceil() as usize * 4).clamp(16, 4096);
    let mass = quad::integrate_panels(|p| st.momentum_density(p), -reach, reach, panels, 1e-13, 0.0).value;
    let scale = reach * mass;
    let first = quad::integrate_panels(|p| p * st.momentum_density(p), -reach, reach, panels, 1e-12, 1e-15 * scale).value;
    Ok(first / mass)
}

/// Real-part weak values inferred from one centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValueEstimate {
    pub centroid: f64,
    /// Remapped `centroid/a`, the estimate of `Re⟨Π_d⟩_w` for the displaced component.
    pub centroid_over_a: f64,
    /// Estimate of `Re⟨Π_H⟩_w`.
    pub weak_value_h_re: f64,
    /// Estimate of `Re⟨Π_V⟩_w`.
    pub weak_value_v_re: f64,
    /// True for the finite-displacement result, false for the `a/σ → 0` limit.
    pub exact: bool,
}

impl WeakValueEstimate {
    fn from_ratio(centroid: f64, ratio: f64, component: DisplacedComponent, exact: bool) -> Self {
        let (h, v) = match component {
            DisplacedComponent::V => (1.0 - ratio, ratio),
            DisplacedComponent::H => (ratio, 1.0 - ratio),
        };
        Self { centroid, centroid_over_a: ratio, weak_value_h_re: h, weak_value_v_re: v, exact }
    }

    /// Estimate from a measured centroid, e.g. the mean of noisy readouts.
    pub fn from_centroid(cfg: &WeakMeasConfig, centroid: f64) -> Result<Self, WeakMeasError> {
        if cfg.displacement_a == 0.0 {
            return Err(WeakMeasError::ZeroDisplacement);
        }
        let ratio = cfg.remap.apply(centroid / cfg.displacement_a);
        Ok(Self::from_ratio(centroid, ratio, cfg.displaced_component, true))
    }
}

/// `centroid/a`, remapped, with the complementary projector's value as `1 − ·`.
pub fn inferred_weak_value(cfg: &WeakMeasConfig) -> Result<WeakValueEstimate, WeakMeasError> {
    if cfg.displacement_a == 0.0 {
        cfg.validate()?;
        return Err(WeakMeasError::ZeroDisplacement);
    }
    WeakValueEstimate::from_centroid(cfg, centroid_exact(cfg)?)
}

/// The `a/σ → 0` limit: the real part of the displaced projector's weak value.
pub fn weak_limit_estimate(cfg: &WeakMeasConfig) -> Result<WeakValueEstimate, WeakMeasError> {
    let st = pointer_after_postselection(cfg)?;
    let total = st.c_undisplaced + st.c_displaced;
    if total.norm() < crate::jones::ORTHOGONALITY_CUTOFF {
        return Err(JonesError::OrthogonalSelection { overlap: total.norm() }.into());
    }
    let ratio = cfg.remap.apply((st.c_displaced / total).re);
    Ok(WeakValueEstimate::from_ratio(ratio * cfg.displacement_a, ratio, cfg.displaced_component, false))
}

/// Mean and sample standard deviation of `n` noisy centroid readouts.
pub fn sample_centroids(cfg: &WeakMeasConfig, n: usize, seed: u64) -> Result<Vec<f64>, WeakMeasError> {
    let centroid = centroid_exact(cfg)?;
    if cfg.centroid_noise_std == 0.0 {
        return Ok(vec![centroid; n]);
    }
    let normal = Normal::new(centroid, cfg.centroid_noise_std).map_err(|_| WeakMeasError::InvalidConfig("centroid noise"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// One row of the θ-sweep: post-selection `φ = hwp(θ)ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakMeasRow {
    pub theta: f64,
    pub a_over_sigma: f64,
    pub centroid_over_a: f64,
    /// Inferred `Re⟨Π_H⟩_w`.
    pub weak_value_re_inferred: f64,
    /// Real part of `⟨φ|Π_H|ψ⟩/⟨φ|ψ⟩`; `None` at orthogonal selection.
    pub weak_value_re_exact: Option<f64>,
    /// `Re⟨φ|ψ⟩`.
    pub overlap: f64,
    /// Inferred weak value times the known overlap.
    pub expectation_inferred: f64,
    /// `Re⟨ψ|U Π_H|ψ⟩` computed directly.
    pub expectation_true: f64,
    /// Overlap smaller than `a/σ`: the displacement is no longer weak
    /// compared with the post-selection suppression.
    pub unreliable: bool,
}

/// Inferred `⟨A(θ)⟩` over a θ grid (radians). `template` supplies ψ, a, σ
/// and the displacer; its `phi` is replaced at each angle.
pub fn expectation_of_a_via_weakmeas(thetas: &[f64], template: &WeakMeasConfig) -> Result<Vec<WeakMeasRow>, WeakMeasError> {
    template.validate()?;
    if template.displacement_a == 0.0 {
        return Err(WeakMeasError::ZeroDisplacement);
    }
    thetas
        .par_iter()
        .map(|&theta| {
            let u = hwp(theta);
            let phi = u.adjoint().apply(&template.psi);
            let cfg = WeakMeasConfig { phi, ..*template };
            let est = inferred_weak_value(&cfg)?;
            let overlap = phi.inner(&template.psi);
            let ph = JonesMatrix::proj_h();
            let exact = crate::jones::weak_value(&ph, &template.psi, &phi).ok().map(|w| w.re);
            let expectation_true = template.psi.inner(&(u * ph).apply(&template.psi)).re;
            Ok(WeakMeasRow {
                theta,
                a_over_sigma: template.a_over_sigma(),
                centroid_over_a: est.centroid_over_a,
                weak_value_re_inferred: est.weak_value_h_re,
                weak_value_re_exact: exact,
                overlap: overlap.re,
                expectation_inferred: est.weak_value_h_re * overlap.re,
                expectation_true,
                unreliable: overlap.norm() < template.a_over_sigma(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(psi: JonesVector, phi: JonesVector, ratio: f64) -> WeakMeasConfig {
        WeakMeasConfig::with_ratio(psi, phi, ratio)
    }

    #[test]
    fn horizontal_in_and_out() {
        let h = JonesVector::horizontal();
        let st = pointer_after_postselection(&cfg(h, h, 0.5)).unwrap();
        assert_eq!(st.c_displaced, Complex64::new(0.0, 0.0));
        assert!((st.c_undisplaced - 1.0).norm() < 1e-15);
        assert_eq!(centroid_exact(&cfg(h, h, 0.5)).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_amplitudes() {
        let (p, m) = (JonesVector::diagonal(), JonesVector::antidiagonal());
        let st = pointer_after_postselection(&cfg(p, p, 0.1)).unwrap();
        assert!((st.c_undisplaced - 0.5).norm() < 1e-15 && (st.c_displaced - 0.5).norm() < 1e-15);
        let st = pointer_after_postselection(&cfg(p, m, 0.1)).unwrap();
        assert!((st.c_undisplaced - 0.5).norm() < 1e-15 && (st.c_displaced + 0.5).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_selection_centroid_is_half_displacement() {
        let (p, m) = (JonesVector::diagonal(), JonesVector::antidiagonal());
        for ratio in [0.01, 0.2, 1.0, 3.0] {
            let c = cfg(p, m, ratio);
            assert_eq!(centroid_exact(&c).unwrap(), 0.5 * c.displacement_a);
            let est = inferred_weak_value(&c).unwrap();
            assert_eq!(est.weak_value_v_re, 0.5);
        }
    }

    #[test]
    fn weak_limit_diagonal() {
        let p = JonesVector::diagonal();
        let est = inferred_weak_value(&cfg(p, p, 0.01)).unwrap();
        assert!((est.centroid_over_a - 0.5).abs() < 1e-4);
        assert!((est.weak_value_h_re - 0.5).abs() < 1e-4);
    }

    #[test]
    fn zero_postselection() {
        let c = cfg(JonesVector::horizontal(), JonesVector::vertical(), 0.1);
        assert!(matches!(pointer_after_postselection(&c), Err(WeakMeasError::ZeroPostSelection { .. })));
    }

    #[test]
    fn zero_displacement() {
        let p = JonesVector::diagonal();
        let c = cfg(p, p, 0.0);
        assert_eq!(inferred_weak_value(&c), Err(WeakMeasError::ZeroDisplacement));
        assert_eq!(momentum_centroid(&c).unwrap(), 0.0);
    }

    #[test]
    fn numeric_centroid_matches_closed_form() {
        let psi = JonesVector::diagonal();
        let phi = JonesVector::linear(0.3);
        for ratio in [0.01, 0.5, 2.0] {
            let c = cfg(psi, phi, ratio);
            let exact = centroid_exact(&c).unwrap();
            let num = centroid_numeric(&c).unwrap();
            assert!((exact - num).abs() <= 1e-9 * c.beam_sigma, "{exact} vs {num}");
        }
    }

    #[test]
    fn real_states_have_no_momentum_shift() {
        let c = cfg(JonesVector::diagonal(), JonesVector::linear(0.2), 0.3);
        assert!(momentum_centroid(&c).unwrap().abs() < 1e-12 / c.beam_sigma);
    }

    #[test]
    fn displaced_h_swaps_roles() {
        let psi = JonesVector::diagonal();
        let phi = JonesVector::linear(0.4);
        let v = inferred_weak_value(&cfg(psi, phi, 0.05)).unwrap();
        let h = inferred_weak_value(&WeakMeasConfig { displaced_component: DisplacedComponent::H, ..cfg(psi, phi, 0.05) }).unwrap();
        assert!((v.weak_value_h_re - h.weak_value_h_re).abs() < 5e-3);
        assert_eq!(h.weak_value_h_re + h.weak_value_v_re, 1.0);
    }

    #[test]
    fn remap_applies_linearly() {
        let p = JonesVector::diagonal();
        let plain = inferred_weak_value(&cfg(p, p, 0.2)).unwrap();
        let mapped = inferred_weak_value(&WeakMeasConfig { remap: WeakValueRemap { scale: 2.0, offset: -0.1 }, ..cfg(p, p, 0.2) }).unwrap();
        assert!((mapped.centroid_over_a - (2.0 * plain.centroid_over_a - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn sweep_endpoints() {
        let template = cfg(JonesVector::diagonal(), JonesVector::diagonal(), WEAK_A_OVER_SIGMA);
        let rows = expectation_of_a_via_weakmeas(&[0.0, PI / 4.0], &template).unwrap();
        assert!(rows[0].expectation_inferred.abs() < 1e-12);
        assert!(rows[0].unreliable && rows[0].weak_value_re_exact.is_none());
        assert!((rows[0].expectation_true - 0.5).abs() < 1e-12);
        assert!((rows[1].expectation_inferred - 0.5).abs() < 1e-4);
        assert!(!rows[1].unreliable);
    }

    #[test]
    fn noiseless_samples_repeat_centroid() {
        let p = JonesVector::diagonal();
        let c = cfg(p, p, 0.2);
        assert_eq!(sample_centroids(&c, 3, 1).unwrap(), vec![centroid_exact(&c).unwrap(); 3]);
        let noisy = WeakMeasConfig { centroid_noise_std: 1.0, ..c };
        assert_eq!(sample_centroids(&noisy, 10, 4).unwrap(), sample_centroids(&noisy, 10, 4).unwrap());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let c = cfg(JonesVector::diagonal(), JonesVector::diagonal(), 0.2);
        let mut v = serde_json::to_value(c).unwrap();
        assert_eq!(serde_json::from_value::<WeakMeasConfig>(v.clone()).unwrap(), c);
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<WeakMeasConfig>(v).is_err());
    }
}
