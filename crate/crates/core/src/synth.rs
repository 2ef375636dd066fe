//! Synthetic line-camera fringe profiles.
//!
//! Profiles follow `A₀ exp(−(x−μ)²/2σ²) (1 + V cos(k(x−μ) + α))` sampled at
//! integer pixel positions, optionally averaged over each pixel window and
//! corrupted with read and shot noise. Each frame draws from its own RNG
//! stream derived from `(seed, frame_index)`, so output does not depend on
//! the order frames are generated in.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mzi::{self, MziConfig, MziError};
use crate::quad;

pub const MIN_PIXELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid fringe parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid detector: {0}")]
    InvalidDetector(&'static str),
    #[error("at least one frame is required")]
    NoFrames,
    #[error(transparent)]
    Mzi(#[from] MziError),
}

/// Where the fringe phase `α` is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReference {
    /// `cos(k(x−μ) + α)`: α is the phase at the envelope center.
    #[default]
    EnvelopeCenter,
    /// `cos(kx + α)`: α is the phase at pixel 0.
    PixelOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeModelParams {
    pub a0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub v: f64,
    /// Fringe wavenumber, radians per pixel.
    pub k: f64,
    pub alpha: f64,
    #[serde(default)]
    pub phase_reference: PhaseReference,
}

impl FringeModelParams {
    pub fn new(a0: f64, mu: f64, sigma: f64, v: f64, k: f64, alpha: f64) -> Self {
        Self { a0, mu, sigma, v, k, alpha, phase_reference: PhaseReference::EnvelopeCenter }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let all = [self.a0, self.mu, self.sigma, self.v, self.k, self.alpha];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(SynthError::InvalidParams("non-finite parameter"));
        }
        if self.a0 <= 0.0 {
            return Err(SynthError::InvalidParams("a0 must be positive"));
        }
        if self.sigma <= 0.0 {
            return Err(SynthError::InvalidParams("sigma must be positive"));
        }
        if self.k <= 0.0 {
            return Err(SynthError::InvalidParams("k must be positive"));
        }
        if !(0.0..=1.0).contains(&self.v) {
            return Err(SynthError::InvalidParams("v must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Phase of the cosine at `x`.
    pub fn fringe_phase(&self, x: f64) -> f64 {
        match self.phase_reference {
            PhaseReference::EnvelopeCenter => self.k * (x - self.mu) + self.alpha,
            PhaseReference::PixelOrigin => self.k * x + self.alpha,
        }
    }

    pub fn envelope(&self, x: f64) -> f64 {
        let u = (x - self.mu) / self.sigma;
        self.a0 * (-0.5 * u * u).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.envelope(x) * (1.0 + self.v * self.fringe_phase(x).cos())
    }

    /// Same fringe expressed with α measured from `target`.
    pub fn with_phase_reference(&self, target: PhaseReference) -> Self {
        let alpha = match (self.phase_reference, target) {
            (PhaseReference::EnvelopeCenter, PhaseReference::PixelOrigin) => self.alpha - self.k * self.mu,
            (PhaseReference::PixelOrigin, PhaseReference::EnvelopeCenter) => self.alpha + self.k * self.mu,
            _ => self.alpha,
        };
        Self { alpha: wrap_phase(alpha), phase_reference: target, ..*self }
    }
}

/// Wrap into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub n_pixels: usize,
    /// Half-width of each pixel's integration window, in pixels.
    pub pixel_half_width: f64,
    /// Additive Gaussian read noise, standard deviation relative to `A₀`.
    pub read_noise_std: f64,
    pub shot_noise: bool,
    /// Photon counts per unit intensity when shot noise is enabled.
    pub photons_per_unit: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_pixels: 1024,
            pixel_half_width: 0.0,
            read_noise_std: 0.01,
            shot_noise: false,
            photons_per_unit: 1.0e4,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    /// Noise-free point-sampling detector.
    pub fn noiseless(n_pixels: usize) -> Self {
        Self { n_pixels, read_noise_std: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_pixels < MIN_PIXELS {
            return Err(SynthError::InvalidDetector("n_pixels must be at least 16"));
        }
        if !(self.pixel_half_width >= 0.0) || !self.pixel_half_width.is_finite() {
            return Err(SynthError::InvalidDetector("pixel_half_width must be finite and non-negative"));
        }
        if !(self.read_noise_std >= 0.0) || !self.read_noise_std.is_finite() {
            return Err(SynthError::InvalidDetector("read_noise_std must be finite and non-negative"));
        }
        if self.shot_noise && !(self.photons_per_unit > 0.0) {
            return Err(SynthError::InvalidDetector("photons_per_unit must be positive"));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.read_noise_std == 0.0 && !self.shot_noise
    }
}

/// Two Gaussian beams meeting at a small angle on the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBeamConfig {
    pub amp1: f64,
    pub amp2: f64,
    pub center1: f64,
    pub center2: f64,
    /// Intensity standard deviations of each beam.
    pub sigma1: f64,
    pub sigma2: f64,
    pub tilt_k: f64,
    pub rel_phase: f64,
}

impl TwoBeamConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.amp1 < 0.0 || self.amp2 < 0.0 {
            return Err(SynthError::InvalidParams("beam amplitudes must be non-negative"));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(SynthError::InvalidParams("beam sigmas must be positive"));
        }
        Ok(())
    }

    /// Fringe visibility for coincident, equal-width beams.
    pub fn coincident_visibility(&self) -> f64 {
        let p = self.amp1 * self.amp1 + self.amp2 * self.amp2;
        if p == 0.0 {
            0.0
        } else {
            2.0 * self.amp1 * self.amp2 / p
        }
    }
}

/// Anything that gives intensity at a continuous transverse position.
pub trait IntensityField: Sync {
    fn intensity(&self, x: f64) -> f64;
}

impl IntensityField for FringeModelParams {
    fn intensity(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

impl IntensityField for TwoBeamConfig {
    /// `|E₁(x) + E₂(x) e^{i(kx + φ)}|²` with Gaussian field envelopes.
    fn intensity(&self, x: f64) -> f64 {
        let field = |amp: f64, c: f64, s: f64| {
            let u = (x - c) / s;
            amp * (-0.25 * u * u).exp()
        };
        let e1 = field(self.amp1, self.center1, self.sigma1);
        let e2 = field(self.amp2, self.center2, self.sigma2);
        e1 * e1 + e2 * e2 + 2.0 * e1 * e2 * (self.tilt_k * x + self.rel_phase).cos()
    }
}

/// A sampled line profile, one intensity per pixel at positions `0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeProfile {
    pub intensities: Vec<f64>,
    pub detector: DetectorConfig,
    #[serde(default)]
    pub truth: Option<FringeModelParams>,
}

impl FringeProfile {
    pub fn from_samples(intensities: Vec<f64>) -> Self {
        let detector = DetectorConfig { n_pixels: intensities.len(), ..DetectorConfig::noiseless(intensities.len()) };
        Self { intensities, detector, truth: None }
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// `(max − min)/(max + min)` over pixels within `half_window` of `center`.
    pub fn local_contrast(&self, center: f64, half_window: f64) -> Option<f64> {
        let (lo, hi) = self
            .intensities
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as f64 - center).abs() <= half_window)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &y)| (lo.min(y), hi.max(y)));
        (hi + lo > 0.0 && hi.is_finite()).then(|| (hi - lo) / (hi + lo))
    }
}

fn sample_field<F: IntensityField + ?Sized>(field: &F, det: &DetectorConfig) -> Vec<f64> {
    if det.pixel_half_width > 0.0 {
        average_over_pixels(field, det)
    } else {
        (0..det.n_pixels).map(|i| field.intensity(i as f64)).collect()
    }
}

/// Point samples of the fringe model at pixel centers.
pub fn ideal_profile(p: &FringeModelParams, det: &DetectorConfig) -> Result<FringeProfile, SynthError> {
    p.validate()?;
    det.validate()?;
    let intensities = (0..det.n_pixels).map(|i| p.eval(i as f64)).collect();
    Ok(FringeProfile { intensities, detector: *det, truth: Some(*p) })
}

/// Point samples of two tilted Gaussian beams.
pub fn two_beam_profile(tb: &TwoBeamConfig, det: &DetectorConfig) -> Result<FringeProfile, SynthError> {
    tb.validate()?;
    det.validate()?;
    let intensities = (0..det.n_pixels).map(|i| tb.intensity(i as f64)).collect();
    let truth = (tb.center1 == tb.center2 && tb.sigma1 == tb.sigma2 && tb.tilt_k > 0.0).then(|| FringeModelParams {
        a0: tb.amp1 * tb.amp1 + tb.amp2 * tb.amp2,
        mu: tb.center1,
        sigma: tb.sigma1,
        v: tb.coincident_visibility(),
        k: tb.tilt_k,
        alpha: tb.rel_phase,
        phase_reference: PhaseReference::PixelOrigin,
    });
    Ok(FringeProfile { intensities, detector: *det, truth })
}

fn average_over_pixels<F: IntensityField + ?Sized>(field: &F, det: &DetectorConfig) -> Vec<f64> {
    let w = det.pixel_half_width;
    (0..det.n_pixels)
        .map(|i| {
            let x = i as f64;
            let q = quad::integrate(|t| field.intensity(t), x - w, x + w, 1e-10, 0.0);
            q.value / (2.0 * w)
        })
        .collect()
}

/// Mean intensity over each pixel window `[x−𝒜, x+𝒜]`, by adaptive quadrature.
pub fn pixel_average<F: IntensityField + ?Sized>(field: &F, det: &DetectorConfig) -> Result<FringeProfile, SynthError> {
    det.validate()?;
    if !(det.pixel_half_width > 0.0) {
        return Err(SynthError::InvalidDetector("pixel averaging needs pixel_half_width > 0"));
    }
    Ok(FringeProfile { intensities: average_over_pixels(field, det), detector: *det, truth: None })
}

/// Fringe attenuation `sin(k𝒜)/(k𝒜)` from boxcar pixel averaging.
pub fn pixel_attenuation(k: f64, half_width: f64) -> f64 {
    let x = k * half_width;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Beam geometry on the camera used when frames are driven by an
/// interferometer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamEnvelope {
    /// Intensity scale: `A₀ = peak_intensity · ¼(‖a‖² + ‖b‖²)`.
    pub peak_intensity: f64,
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
}

impl Default for BeamEnvelope {
    fn default() -> Self {
        Self { peak_intensity: 1.0, mu: 512.0, sigma: 120.0, k: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSource {
    Model(FringeModelParams),
    Mzi { config: MziConfig, envelope: BeamEnvelope },
}

impl FrameSource {
    /// Fringe parameters before any per-frame phase draw. For an
    /// interferometer source α is `arg z − ε`.
    pub fn base_params(&self) -> Result<FringeModelParams, SynthError> {
        let p = match self {
            FrameSource::Model(p) => *p,
            FrameSource::Mzi { config, envelope } => {
                config.validate()?;
                let vis = mzi::analytic_visibility(config);
                let (a, b) = config.arm_amplitudes();
                FringeModelParams::new(
                    envelope.peak_intensity * 0.25 * (a.norm_sqr() + b.norm_sqr()),
                    envelope.mu,
                    envelope.sigma,
                    vis.visibility.min(1.0),
                    envelope.k,
                    wrap_phase(vis.phase_shift.unwrap_or(0.0) - config.epsilon),
                )
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// How the fringe phase behaves from frame to frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePhase {
    /// α drawn uniformly in `[0, 2π)` for every frame.
    #[default]
    Unstabilized,
    /// α fixed at the source value.
    Stabilized,
    /// Random walk of α around the source value, reflected at `±bound`.
    Drift { step_std: f64, bound: f64 },
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn drift_phases(base: f64, n: usize, step_std: f64, bound: f64, seed: u64) -> Vec<f64> {
    let mut rng = frame_rng(seed, 0);
    let step = Normal::new(0.0, step_std.max(0.0)).expect("finite step");
    let bound = bound.abs();
    let mut offset = 0.0f64;
    (0..n)
        .map(|i| {
            if i > 0 {
                offset += step.sample(&mut rng);
                // Reflect into [-bound, bound].
                if bound > 0.0 {
                    let period = 4.0 * bound;
                    let m = (offset + bound).rem_euclid(period);
                    offset = if m <= 2.0 * bound { m - bound } else { 3.0 * bound - m };
                } else {
                    offset = 0.0;
                }
            }
            wrap_phase(base + offset)
        })
        .collect()
}

fn add_noise(samples: &mut [f64], a0: f64, det: &DetectorConfig, rng: &mut ChaCha8Rng) {
    if det.shot_noise {
        for y in samples.iter_mut() {
            let lambda = *y * det.photons_per_unit;
            *y = if lambda > 0.0 {
                Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(lambda) / det.photons_per_unit
            } else {
                0.0
            };
        }
    }
    if det.read_noise_std > 0.0 {
        let normal = Normal::new(0.0, det.read_noise_std * a0).expect("finite noise std");
        for y in samples.iter_mut() {
            *y += normal.sample(rng);
        }
    }
}

/// Render one frame with the given phase; `frame_index` selects the RNG
/// stream used for the noise.
pub fn render_frame(params: &FringeModelParams, det: &DetectorConfig, frame_index: u64) -> Result<FringeProfile, SynthError> {
    params.validate()?;
    det.validate()?;
    let mut rng = frame_rng(det.seed, frame_index + 1);
    Ok(render_with_rng(params, det, &mut rng))
}

fn render_with_rng(params: &FringeModelParams, det: &DetectorConfig, rng: &mut ChaCha8Rng) -> FringeProfile {
    let mut intensities = sample_field(params, det);
    add_noise(&mut intensities, params.a0, det, rng);
    FringeProfile { intensities, detector: *det, truth: Some(*params) }
}

/// Generate `n_frames` profiles from `source`.
///
/// Frame `i` uses RNG stream `i + 1` of `det.seed` for its phase draw and
/// noise, so the output is independent of scheduling.
pub fn generate_frames(
    source: &FrameSource,
    det: &DetectorConfig,
    n_frames: usize,
    phase: FramePhase,
) -> Result<Vec<FringeProfile>, SynthError> {
    if n_frames == 0 {
        return Err(SynthError::NoFrames);
    }
    det.validate()?;
    let base = source.base_params()?;
    let drift = match phase {
        FramePhase::Drift { step_std, bound } => Some(drift_phases(base.alpha, n_frames, step_std, bound, det.seed)),
        _ => None,
    };
    let frames = (0..n_frames)
        .into_par_iter()
        .map(|i| {
            let mut rng = frame_rng(det.seed, i as u64 + 1);
            let alpha = match (&phase, &drift) {
                (FramePhase::Unstabilized, _) => wrap_phase(rng.random_range(0.0..TAU)),
                (FramePhase::Drift { .. }, Some(d)) => d[i],
                _ => base.alpha,
            };
            render_with_rng(&FringeModelParams { alpha, ..base }, det, &mut rng)
        })
        .collect();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::JonesVector;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn default_params() -> FringeModelParams {
        FringeModelParams::new(1.0, 512.0, 120.0, 0.8, 0.25, 0.3)
    }

    #[test]
    fn zero_visibility_is_gaussian() {
        let p = FringeModelParams { v: 0.0, ..default_params() };
        let prof = ideal_profile(&p, &DetectorConfig::noiseless(1024)).unwrap();
        let argmax = prof
            .intensities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 512);
        assert!((prof.intensities[512] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_destructive_point() {
        let p = FringeModelParams { v: 1.0, alpha: PI, ..default_params() };
        let prof = ideal_profile(&p, &DetectorConfig::noiseless(1024)).unwrap();
        assert!(prof.intensities[512].abs() < 1e-15);
    }

    #[test]
    fn central_window_contrast() {
        // Dense sampling of the central ±σ/2 window as an independent check.
        let p = FringeModelParams { sigma: 100.0, k: 0.2, ..default_params() };
        let dense: Vec<f64> = (0..=10_000).map(|i| 462.0 + i as f64 * 0.01).map(|x| p.eval(x)).collect();
        let (lo, hi) = dense.iter().fold((f64::MAX, f64::MIN), |(l, h), &y| (l.min(y), h.max(y)));
        let dense_c = (hi - lo) / (hi + lo);
        let prof = ideal_profile(&p, &DetectorConfig::noiseless(1024)).unwrap();
        let c = prof.local_contrast(512.0, 50.0).unwrap();
        // Integer pixels can miss the true extrema by half a pixel: k/2 rad of fringe phase.
        assert!((c - dense_c).abs() < 5e-3, "{c} vs {dense_c}");
        // The envelope falls by ~10% across the window, so this exceeds V.
        assert!(dense_c > 0.8 && dense_c < 0.83);
    }

    #[test]
    fn two_beam_visibilities() {
        let tb = TwoBeamConfig {
            amp1: 1.0,
            amp2: 0.0,
            center1: 500.0,
            center2: 500.0,
            sigma1: 100.0,
            sigma2: 100.0,
            tilt_k: 0.3,
            rel_phase: 0.0,
        };
        assert_eq!(tb.coincident_visibility(), 0.0);
        assert_eq!(TwoBeamConfig { amp2: 1.0, ..tb }.coincident_visibility(), 1.0);
        assert!((TwoBeamConfig { amp1: 2.0, amp2: 1.0, ..tb }.coincident_visibility() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_beam_reduces_to_model() {
        let tb = TwoBeamConfig {
            amp1: 2.0,
            amp2: 1.0,
            center1: 480.0,
            center2: 480.0,
            sigma1: 110.0,
            sigma2: 110.0,
            tilt_k: 0.21,
            rel_phase: 0.7,
        };
        let det = DetectorConfig::noiseless(1024);
        let prof = two_beam_profile(&tb, &det).unwrap();
        let truth = prof.truth.unwrap();
        let model = ideal_profile(&truth, &det).unwrap();
        for (a, b) in prof.intensities.iter().zip(&model.intensities) {
            assert!((a - b).abs() <= 1e-12 * truth.a0, "{a} vs {b}");
        }
        // Same fringe with α re-referenced to the envelope center.
        let centered = truth.with_phase_reference(PhaseReference::EnvelopeCenter);
        let model = ideal_profile(&centered, &det).unwrap();
        for (a, b) in prof.intensities.iter().zip(&model.intensities) {
            assert!((a - b).abs() <= 1e-12 * truth.a0);
        }
    }

    #[test]
    fn attenuation_limits() {
        assert!((pixel_attenuation(1e-9, 1.0) - 1.0).abs() < 1e-15);
        assert!(pixel_attenuation(PI, 1.0).abs() < 1e-15);
        assert!((pixel_attenuation(0.2, 2.0) - 0.4f64.sin() / 0.4).abs() < 1e-15);
    }

    #[test]
    fn pixel_average_closed_form() {
        // Constant envelope: the boxcar mean of 1 + V cos(kx+α) is exactly
        // 1 + V·sinc(k𝒜)·cos(kx+α).
        let p = FringeModelParams { sigma: 1e9, ..default_params() };
        let det = DetectorConfig { pixel_half_width: 2.0, ..DetectorConfig::noiseless(64) };
        let prof = pixel_average(&p, &det).unwrap();
        let att = pixel_attenuation(p.k, 2.0);
        for (i, y) in prof.intensities.iter().enumerate() {
            let x = i as f64;
            let expect = 1.0 + p.v * att * p.fringe_phase(x).cos();
            assert!((y - expect).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn pixel_average_preserves_total_intensity() {
        let p = FringeModelParams::new(1.0, 256.0, 40.0, 0.7, 0.6, 0.2);
        let det = DetectorConfig { pixel_half_width: 0.5, ..DetectorConfig::noiseless(512) };
        let prof = pixel_average(&p, &det).unwrap();
        let total: f64 = prof.intensities.iter().sum();
        let exact = quad::integrate_panels(|x| p.eval(x), -0.5, 511.5, 64, 1e-12, 0.0).value;
        assert!((total - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn pixel_average_requires_width() {
        assert!(pixel_average(&default_params(), &DetectorConfig::noiseless(64)).is_err());
    }

    #[test]
    fn frames_are_deterministic_and_seed_dependent() {
        let det = DetectorConfig { seed: 7, ..DetectorConfig::default() };
        let src = FrameSource::Model(default_params());
        let a = generate_frames(&src, &det, 20, FramePhase::Unstabilized).unwrap();
        let b = generate_frames(&src, &det, 20, FramePhase::Unstabilized).unwrap();
        assert_eq!(a, b);
        let c = generate_frames(&src, &DetectorConfig { seed: 8, ..det }, 20, FramePhase::Unstabilized).unwrap();
        assert_ne!(a, c);
        // Frame i does not depend on how many frames were requested.
        let short = generate_frames(&src, &det, 5, FramePhase::Unstabilized).unwrap();
        assert_eq!(short[..], a[..5]);
        let fixed = generate_frames(&src, &det, 5, FramePhase::Stabilized).unwrap();
        assert_eq!(render_frame(&fixed[3].truth.unwrap(), &det, 3).unwrap(), fixed[3]);
    }

    #[test]
    fn noiseless_frames_are_nonnegative() {
        let det = DetectorConfig { pixel_half_width: 0.5, ..DetectorConfig::noiseless(256) };
        let p = FringeModelParams::new(1.0, 128.0, 30.0, 1.0, 0.5, 0.0);
        let frames = generate_frames(&FrameSource::Model(p), &det, 4, FramePhase::Unstabilized).unwrap();
        assert!(frames.iter().flat_map(|f| &f.intensities).all(|&y| y >= 0.0));
    }

    #[test]
    fn stabilized_and_drift_phases() {
        let det = DetectorConfig::noiseless(128);
        let p = FringeModelParams::new(1.0, 64.0, 20.0, 0.5, 0.5, 0.4);
        let fixed = generate_frames(&FrameSource::Model(p), &det, 3, FramePhase::Stabilized).unwrap();
        assert!(fixed.iter().all(|f| f.truth.unwrap().alpha == 0.4));
        let drift = FramePhase::Drift { step_std: 0.3, bound: 0.5 };
        let frames = generate_frames(&FrameSource::Model(p), &det, 200, drift).unwrap();
        for f in &frames {
            let a = f.truth.unwrap().alpha;
            assert!((a - 0.4).abs() <= 0.5 + 1e-12);
        }
        assert_eq!(frames[0].truth.unwrap().alpha, 0.4);
    }

    #[test]
    fn mzi_source_parameters() {
        let cfg = MziConfig::with_polarizer(FRAC_PI_4);
        let src = FrameSource::Mzi { config: cfg, envelope: BeamEnvelope::default() };
        let p = src.base_params().unwrap();
        assert!((p.v - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.a0 - 0.375).abs() < 1e-12);
        assert!(p.alpha.abs() < 1e-12);
        let dark = MziConfig::from_polar(
            JonesVector::vertical(),
            crate::jones::JonesMatrix::proj_h(),
            crate::jones::JonesMatrix::zero(),
            0.0,
        );
        let src = FrameSource::Mzi { config: dark, envelope: BeamEnvelope::default() };
        assert!(src.base_params().is_err());
    }

    #[test]
    fn validation() {
        assert!(FringeModelParams { v: 1.2, ..default_params() }.validate().is_err());
        assert!(FringeModelParams { sigma: 0.0, ..default_params() }.validate().is_err());
        assert!(DetectorConfig { n_pixels: 8, ..DetectorConfig::default() }.validate().is_err());
        assert!(DetectorConfig { pixel_half_width: -1.0, ..DetectorConfig::default() }.validate().is_err());
        assert!(matches!(
            generate_frames(&FrameSource::Model(default_params()), &DetectorConfig::default(), 0, FramePhase::Stabilized),
            Err(SynthError::NoFrames)
        ));
    }

    #[test]
    fn phase_wrapping() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_phase(0.5), 0.5);
    }
}
