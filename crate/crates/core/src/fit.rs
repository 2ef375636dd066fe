//! Visibility extraction from fringe profiles.
//!
//! Two routes are provided:
//!
//! * the envelope method: locate peaks and dips, fit each set with a
//!   Gaussian `A exp(−a(x−x₀)²)`, and take `V = (A_p − A_d)/(A_p + A_d)`;
//! * a full-model fit of `A₀ exp(−(x−μ)²/2σ²)(1 + V cos(k(x−μ) + α))` by
//!   damped least squares, seeded from the profile's spectrum.
//!
//! Both solve their least-squares problems with the small fixed-size
//! Levenberg–Marquardt loop in [`levenberg_marquardt`].

use std::f64::consts::{PI, TAU};

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{wrap_phase, FringeModelParams, FringeProfile, PhaseReference};

pub const MIN_EXTREMA_SAMPLES: usize = 64;
pub const MIN_FIT_SAMPLES: usize = 128;
pub const MIN_EXTREMA: usize = 3;
/// Extrema must stand out by this fraction of the profile's global range.
pub const PROMINENCE_FRACTION: f64 = 0.02;
/// Fitted visibilities below this leave the fringe phase unidentifiable.
pub const PHASE_IDENTIFIABLE_MIN_V: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("profile has {got} samples, at least {need} are required")]
    TooFewSamples { got: usize, need: usize },
    #[error("found {peaks} peaks and {dips} dips, need at least 3 of each")]
    TooFewExtrema { peaks: usize, dips: usize },
    #[error("envelope fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("least squares did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("need at least 2 frames per angle, got {0}")]
    TooFewFrames(usize),
    #[error("only {succeeded} of {total} frames fitted at θ = {theta}: {first_error}")]
    InsufficientFrames { theta: f64, succeeded: usize, total: usize, first_error: Box<FitError> },
}

// ---------------------------------------------------------------------------
// Levenberg–Marquardt

/// Damping schedule and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    /// Stop when an accepted step lowers the residual sum of squares by less
    /// than this relative amount (actual and predicted).
    pub relative_tolerance: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 0.2,
            relative_tolerance: 1e-10,
        }
    }
}

/// A least-squares problem over `P` parameters with data `y_i`.
#[allow(clippy::len_without_is_empty)]
pub trait LeastSquaresProblem<const P: usize>: Sync {
    fn len(&self) -> usize;
    fn observed(&self, i: usize) -> f64;
    fn model(&self, p: &[f64; P], i: usize) -> f64;
    /// Model value and its gradient with respect to the parameters.
    fn model_and_gradient(&self, p: &[f64; P], i: usize) -> (f64, [f64; P]);
    /// Map a trial point back into the valid domain.
    fn project(&self, p: [f64; P]) -> [f64; P] {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOutcome<const P: usize> {
    pub params: [f64; P],
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal of `(JᵀJ)⁻¹` at the solution; infinite where singular.
    pub inverse_hessian_diag: [f64; P],
}

fn sum_squares<const P: usize, T: LeastSquaresProblem<P> + ?Sized>(prob: &T, p: &[f64; P]) -> f64 {
    (0..prob.len())
        .map(|i| {
            let r = prob.observed(i) - prob.model(p, i);
            r * r
        })
        .sum()
}

fn normal_equations<const P: usize, T: LeastSquaresProblem<P> + ?Sized>(
    prob: &T,
    p: &[f64; P],
) -> (SMatrix<f64, P, P>, SVector<f64, P>, f64) {
    let mut jtj = SMatrix::<f64, P, P>::zeros();
    let mut jtr = SVector::<f64, P>::zeros();
    let mut ssr = 0.0;
    for i in 0..prob.len() {
        let (f, g) = prob.model_and_gradient(p, i);
        let r = prob.observed(i) - f;
        ssr += r * r;
        for a in 0..P {
            jtr[a] += g[a] * r;
            for b in 0..=a {
                jtj[(a, b)] += g[a] * g[b];
            }
        }
    }
    for a in 0..P {
        for b in 0..a {
            jtj[(b, a)] = jtj[(a, b)];
        }
    }
    (jtj, jtr, ssr)
}

fn inverse_diag<const P: usize>(jtj: &SMatrix<f64, P, P>) -> [f64; P] {
    let mut out = [f64::INFINITY; P];
    let scale = (0..P).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return out;
    }
    if let Some(chol) = jtj.cholesky() {
        let inv = chol.inverse();
        for (i, o) in out.iter_mut().enumerate() {
            let d = inv[(i, i)];
            // A nearly singular direction shows up as a huge diagonal entry.
            *o = if d.is_finite() && d >= 0.0 && d * scale < 1e14 { d } else { f64::INFINITY };
        }
    }
    out
}

/// Marquardt-scaled damped Gauss–Newton iteration.
pub fn levenberg_marquardt<const P: usize, T: LeastSquaresProblem<P> + ?Sized>(
    prob: &T,
    start: [f64; P],
    settings: &LmSettings,
) -> LmOutcome<P> {
    let mut p = prob.project(start);
    let (mut jtj, mut jtr, mut ssr) = normal_equations(prob, &p);
    let mut lambda = settings.initial_damping;
    let data_scale: f64 = (0..prob.len()).map(|i| prob.observed(i).powi(2)).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut iterations = 0;

    if ssr <= 1e-30 * data_scale {
        converged = true;
    }
    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let diag_floor = (0..P).map(|i| jtj[(i, i)]).fold(0.0, f64::max) * 1e-12;
        let mut damped = jtj;
        for i in 0..P {
            damped[(i, i)] += lambda * jtj[(i, i)].max(diag_floor).max(f64::MIN_POSITIVE);
        }
        let step = damped.cholesky().map(|c| c.solve(&jtr));
        let Some(step) = step.filter(|s| s.iter().all(|x| x.is_finite())) else {
            lambda *= settings.damping_increase;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let mut trial = p;
        for (t, s) in trial.iter_mut().zip(step.iter()) {
            *t += s;
        }
        let trial = prob.project(trial);
        let trial_ssr = sum_squares(prob, &trial);
        if trial_ssr.is_finite() && trial_ssr < ssr {
            let predicted = 2.0 * step.dot(&jtr) - (step.transpose() * jtj * step)[(0, 0)];
            let actual_rel = (ssr - trial_ssr) / ssr;
            let predicted_rel = predicted.abs() / ssr;
            p = trial;
            (jtj, jtr, ssr) = normal_equations(prob, &p);
            lambda = (lambda * settings.damping_decrease).max(1e-15);
            if (actual_rel < settings.relative_tolerance && predicted_rel < settings.relative_tolerance)
                || ssr <= 1e-30 * data_scale
            {
                converged = true;
            }
        } else {
            lambda *= settings.damping_increase;
            if lambda > 1e16 {
                // No downhill step exists at working precision.
                converged = true;
            }
        }
    }
    LmOutcome { params: p, ssr, iterations, converged, inverse_hessian_diag: inverse_diag(&jtj) }
}

// ---------------------------------------------------------------------------
// Spectral seeding

/// Dominant fringe component of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Fringe wavenumber, radians per pixel.
    pub k: f64,
    /// Phase of the fringe at pixel 0, `cos(kx + phase)`.
    pub phase_at_origin: f64,
    /// Peak magnitude over the median magnitude of the searched band.
    pub prominence: f64,
    /// White-noise standard deviation estimated from the top of the band.
    pub noise_std: f64,
}

impl SpectralEstimate {
    pub fn is_significant(&self) -> bool {
        self.prominence > 8.0
    }
}

/// Locate the fringe peak in the spectrum of the mean-subtracted profile.
///
/// The low-frequency lobe of the envelope is skipped by starting the search
/// after the first local minimum of the magnitude spectrum. The peak bin is
/// refined by log-parabolic interpolation.
pub fn spectral_estimate(samples: &[f64]) -> Option<SpectralEstimate> {
    let n = samples.len();
    if n < 16 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = samples.iter().map(|&y| Complex64::new(y - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|z| z.norm()).collect();

    let noise_band = &buf[(3 * n) / 8..half];
    let noise_std = if noise_band.is_empty() {
        0.0
    } else {
        (noise_band.iter().map(|z| z.norm_sqr()).sum::<f64>() / noise_band.len() as f64 / n as f64).sqrt()
    };

    let start = (1..half.saturating_sub(1)).find(|&b| mag[b] <= mag[b + 1])?;
    let peak = (start..half).max_by(|&a, &b| mag[a].total_cmp(&mag[b]))?;
    if mag[peak] <= 0.0 {
        return None;
    }
    let mut band: Vec<f64> = mag[start..half].to_vec();
    band.sort_by(f64::total_cmp);
    let median = band[band.len() / 2];
    let prominence = if median > 0.0 { mag[peak] / median } else { f64::INFINITY };

    let offset = if peak > 1 && peak + 1 <= half {
        let (l, c, r) = (mag[peak - 1].max(1e-300).ln(), mag[peak].ln(), mag[peak + 1].max(1e-300).ln());
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let k = TAU * (peak as f64 + offset) / n as f64;
    let phase_at_origin = buf[peak].arg();
    Some(SpectralEstimate { k, phase_at_origin, prominence, noise_std })
}

fn odd_window(w: f64) -> usize {
    let w = w.round().max(3.0) as usize;
    w | 1
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average(samples: &[f64], window: usize) -> Vec<f64> {
    let n = samples.len();
    let h = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &y in samples {
        prefix.push(prefix.last().unwrap() + y);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Extrema

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Sub-pixel position.
    pub position: f64,
    pub intensity: f64,
}

/// Peaks and dips of a fringe profile, interleaved along the pixel axis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub peaks: Vec<Extremum>,
    pub dips: Vec<Extremum>,
}

/// Vertex of the parabola through three equally spaced samples around `i`.
fn parabolic_vertex(y: &[f64], i: usize) -> Extremum {
    if i == 0 || i + 1 >= y.len() {
        return Extremum { position: i as f64, intensity: y[i] };
    }
    let (l, c, r) = (y[i - 1], y[i], y[i + 1]);
    let denom = l - 2.0 * c + r;
    if denom == 0.0 {
        return Extremum { position: i as f64, intensity: c };
    }
    let d = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    Extremum { position: i as f64 + d, intensity: c - 0.25 * (l - r) * d }
}

/// Local maxima and minima of `profile`.
///
/// The profile is smoothed with a centered moving average of
/// `max(3, round(π/(2k̂)))` pixels, turning points separated by less than
/// 2% of the global range are discarded (zig-zag hysteresis), and each
/// surviving extremum is refined on the raw samples by parabolic
/// interpolation.
pub fn find_extrema(profile: &FringeProfile) -> Result<ExtremaSet, FitError> {
    let y = &profile.intensities;
    if y.len() < MIN_EXTREMA_SAMPLES {
        return Err(FitError::TooFewSamples { got: y.len(), need: MIN_EXTREMA_SAMPLES });
    }
    let too_few = |s: &ExtremaSet| FitError::TooFewExtrema { peaks: s.peaks.len(), dips: s.dips.len() };
    let Some(est) = spectral_estimate(y) else {
        return Err(too_few(&ExtremaSet::default()));
    };
    let window = odd_window(PI / (2.0 * est.k));
    let smooth = moving_average(y, window);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let delta = PROMINENCE_FRACTION * (hi - lo);

    // Zig-zag detection: an extremum is confirmed once the signal retreats
    // from it by at least `delta`.
    let mut turning: Vec<(usize, bool)> = Vec::new();
    let (mut max_i, mut min_i) = (0usize, 0usize);
    let mut looking_for_max = None::<bool>;
    for i in 1..smooth.len() {
        if smooth[i] > smooth[max_i] {
            max_i = i;
        }
        if smooth[i] < smooth[min_i] {
            min_i = i;
        }
        match looking_for_max {
            None => {
                if smooth[max_i] - smooth[i] >= delta && delta > 0.0 {
                    turning.push((max_i, true));
                    looking_for_max = Some(false);
                    min_i = i;
                } else if smooth[i] - smooth[min_i] >= delta && delta > 0.0 {
                    turning.push((min_i, false));
                    looking_for_max = Some(true);
                    max_i = i;
                }
            }
            Some(true) => {
                if smooth[max_i] - smooth[i] >= delta {
                    turning.push((max_i, true));
                    looking_for_max = Some(false);
                    min_i = i;
                }
            }
            Some(false) => {
                if smooth[i] - smooth[min_i] >= delta {
                    turning.push((min_i, false));
                    looking_for_max = Some(true);
                    max_i = i;
                }
            }
        }
    }

    let reach = window / 2 + 1;
    let mut set = ExtremaSet::default();
    // A run that starts or ends at the array edge is not a turning point.
    turning.retain(|&(idx, _)| idx > 0 && idx + 1 < smooth.len());
    for (idx, is_peak) in turning {
        let lo_i = idx.saturating_sub(reach);
        let hi_i = (idx + reach + 1).min(y.len());
        let pick = (lo_i..hi_i)
            .max_by(|&a, &b| {
                if is_peak {
                    y[a].total_cmp(&y[b])
                } else {
                    y[b].total_cmp(&y[a])
                }
            })
            .unwrap_or(idx);
        let e = parabolic_vertex(y, pick);
        if is_peak {
            set.peaks.push(e);
        } else {
            set.dips.push(e);
        }
    }
    if set.peaks.len() < MIN_EXTREMA || set.dips.len() < MIN_EXTREMA {
        return Err(too_few(&set));
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Envelope method

/// Gaussian `amplitude · exp(−width_param (x − center)²)` through a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub amplitude: f64,
    pub width_param: f64,
    pub center: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl EnvelopeFit {
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * (-self.width_param * d * d).exp()
    }
}

struct GaussianPoints<'a>(&'a [Extremum]);

impl LeastSquaresProblem<3> for GaussianPoints<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn observed(&self, i: usize) -> f64 {
        self.0[i].intensity
    }
    fn model(&self, p: &[f64; 3], i: usize) -> f64 {
        let d = self.0[i].position - p[2];
        p[0] * (-p[1] * d * d).exp()
    }
    fn model_and_gradient(&self, p: &[f64; 3], i: usize) -> (f64, [f64; 3]) {
        let d = self.0[i].position - p[2];
        let e = (-p[1] * d * d).exp();
        let f = p[0] * e;
        (f, [e, -f * d * d, 2.0 * f * p[1] * d])
    }
}

/// Least-squares solve of the 3×3 log-parabola through positive points.
fn log_parabola_seed(points: &[Extremum]) -> Option<[f64; 3]> {
    let pos: Vec<&Extremum> = points.iter().filter(|e| e.intensity > 0.0).collect();
    if pos.len() < 3 {
        return None;
    }
    let xm = pos.iter().map(|e| e.position).sum::<f64>() / pos.len() as f64;
    let mut ata = SMatrix::<f64, 3, 3>::zeros();
    let mut atb = SVector::<f64, 3>::zeros();
    for e in &pos {
        let t = e.position - xm;
        let row = SVector::<f64, 3>::new(1.0, t, t * t);
        ata += row * row.transpose();
        atb += row * e.intensity.ln();
    }
    let c = ata.lu().solve(&atb)?;
    if !(c[2] < 0.0) {
        return None;
    }
    let a = -c[2];
    let t0 = c[1] / (2.0 * a);
    let amp = (c[0] + a * t0 * t0).exp();
    let seed = [amp, a, xm + t0];
    seed.iter().all(|v| v.is_finite()).then_some(seed)
}

/// Fit `A exp(−a(x−x₀)²)` to extremum points: log-parabola seed, then damped
/// least squares.
pub fn fit_envelope(points: &[Extremum]) -> Result<EnvelopeFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let seed = log_parabola_seed(points).unwrap_or_else(|| {
        let top = points.iter().max_by(|a, b| a.intensity.total_cmp(&b.intensity)).unwrap();
        let (xmin, xmax) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| (l.min(e.position), h.max(e.position)));
        let half_span = (0.5 * (xmax - xmin)).max(1.0);
        [top.intensity, 0.5 / (half_span * half_span), top.position]
    });
    let prob = GaussianPoints(points);
    let out = levenberg_marquardt(&prob, seed, &LmSettings::default());
    if !out.converged {
        return Err(FitError::NonConvergence { iterations: out.iterations });
    }
    let [amplitude, width_param, center] = out.params;
    if !(amplitude > 0.0 && width_param > 0.0) {
        return Err(FitError::DegenerateProfile(format!(
            "envelope fit gave amplitude {amplitude:e}, width {width_param:e}"
        )));
    }
    Ok(EnvelopeFit {
        amplitude,
        width_param,
        center,
        rms_residual: (out.ssr / points.len() as f64).sqrt(),
        iterations: out.iterations,
    })
}

/// `V = (A_p − A_d)/(A_p + A_d)`.
pub fn visibility_from_envelopes(peaks: &EnvelopeFit, dips: &EnvelopeFit) -> f64 {
    (peaks.amplitude - dips.amplitude) / (peaks.amplitude + dips.amplitude)
}

/// Everything the envelope method produces for one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeAnalysis {
    pub extrema: ExtremaSet,
    pub peak_envelope: EnvelopeFit,
    pub dip_envelope: EnvelopeFit,
    pub visibility: f64,
}

pub fn envelope_visibility(profile: &FringeProfile) -> Result<EnvelopeAnalysis, FitError> {
    let extrema = find_extrema(profile)?;
    let peak_envelope = fit_envelope(&extrema.peaks)?;
    let dip_envelope = fit_envelope(&extrema.dips)?;
    let visibility = visibility_from_envelopes(&peak_envelope, &dip_envelope);
    Ok(EnvelopeAnalysis { extrema, peak_envelope, dip_envelope, visibility })
}

// ---------------------------------------------------------------------------
// Full-model fit

struct FringeModel<'a>(&'a [f64]);

const A0: usize = 0;
const MU: usize = 1;
const SIGMA: usize = 2;
const VIS: usize = 3;
const K: usize = 4;
const ALPHA: usize = 5;

impl LeastSquaresProblem<6> for FringeModel<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn observed(&self, i: usize) -> f64 {
        self.0[i]
    }
    fn model(&self, p: &[f64; 6], i: usize) -> f64 {
        let d = i as f64 - p[MU];
        let u = d / p[SIGMA];
        p[A0] * (-0.5 * u * u).exp() * (1.0 + p[VIS] * (p[K] * d + p[ALPHA]).cos())
    }
    fn model_and_gradient(&self, p: &[f64; 6], i: usize) -> (f64, [f64; 6]) {
        let d = i as f64 - p[MU];
        let s = p[SIGMA];
        let u = d / s;
        let g = (-0.5 * u * u).exp();
        let (sn, cs) = (p[K] * d + p[ALPHA]).sin_cos();
        let fringe = 1.0 + p[VIS] * cs;
        let env = p[A0] * g;
        let f = env * fringe;
        let avs = env * p[VIS] * sn;
        let grad = [
            g * fringe,
            f * d / (s * s) + avs * p[K],
            f * d * d / (s * s * s),
            env * cs,
            -avs * d,
            -avs,
        ];
        (f, grad)
    }
    fn project(&self, mut p: [f64; 6]) -> [f64; 6] {
        p[SIGMA] = p[SIGMA].abs().max(1e-6);
        p
    }
}

/// Per-parameter standard errors of the full-model fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStd {
    pub a0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub v: f64,
    pub k: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted parameters, α referenced to the envelope center.
    pub params: FringeModelParams,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Standard errors from the local quadratic model, `s²(JᵀJ)⁻¹`.
    pub param_std: ParamStd,
    /// Fitted V exceeds 1; reported unclamped.
    pub v_out_of_range: bool,
    pub alpha_identifiable: bool,
    /// Read-noise level estimated from the profile's high-frequency band.
    pub noise_estimate: f64,
    pub seed: FringeModelParams,
}

/// Starting point for the full-model fit.
///
/// `k̂` and `α̂` come from the dominant spectral peak, `A₀`, `μ`, `σ` from
/// the moments of the fringe midline (the profile averaged over one fringe
/// period), and `V̂` from the local contrast within one period of `μ̂`.
pub fn seed_full_model(samples: &[f64]) -> FringeModelParams {
    let n = samples.len();
    let est = spectral_estimate(samples);
    let k = est.map(|e| e.k).filter(|k| *k > 0.0).unwrap_or(TAU * 8.0 / n as f64);
    let period = TAU / k;
    let midline = match est {
        Some(e) if e.is_significant() => moving_average(samples, odd_window(period)),
        _ => samples.to_vec(),
    };
    let peak = midline.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = 0.02 * peak;
    let (mut w, mut wx, mut wxx) = (0.0, 0.0, 0.0);
    for (i, &m) in midline.iter().enumerate() {
        if m > floor {
            let x = i as f64;
            w += m;
            wx += m * x;
            wxx += m * x * x;
        }
    }
    let (mu, sigma) = if w > 0.0 {
        let mu = wx / w;
        (mu, (wxx / w - mu * mu).max(1.0).sqrt())
    } else {
        (0.5 * n as f64, 0.25 * n as f64)
    };
    let a0 = {
        let c = mu.round().clamp(0.0, (n - 1) as f64) as usize;
        midline[c].max(f64::MIN_POSITIVE)
    };
    let v = {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &y) in samples.iter().enumerate() {
            if (i as f64 - mu).abs() <= period {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        if hi + lo > 0.0 {
            ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let alpha = est.map(|e| wrap_phase(e.phase_at_origin + k * mu)).unwrap_or(0.0);
    FringeModelParams::new(a0, mu, sigma, v, k, alpha)
}

/// Least-squares fit of the Gaussian-enveloped fringe model to a profile.
pub fn fit_full_model(profile: &FringeProfile) -> Result<FitResult, FitError> {
    fit_full_model_with(profile, &LmSettings::default())
}

pub fn fit_full_model_with(profile: &FringeProfile, settings: &LmSettings) -> Result<FitResult, FitError> {
    let y = &profile.intensities;
    if y.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples { got: y.len(), need: MIN_FIT_SAMPLES });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FitError::DegenerateProfile("non-finite sample".into()));
    }
    let noise_estimate = spectral_estimate(y).map(|e| e.noise_std).unwrap_or(0.0);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = hi - lo;
    if !(range > 10.0 * noise_estimate) || range <= 0.0 {
        return Err(FitError::DegenerateProfile(format!(
            "dynamic range {range:e} is below 10× the noise estimate {noise_estimate:e}"
        )));
    }

    let seed = seed_full_model(y);
    let start = [seed.a0, seed.mu, seed.sigma, seed.v, seed.k, seed.alpha];
    let prob = FringeModel(y);
    let out = levenberg_marquardt(&prob, start, settings);
    if !out.converged {
        return Err(FitError::NonConvergence { iterations: out.iterations });
    }

    let [a0, mu, sigma, mut v, mut k, mut alpha] = out.params;
    if k < 0.0 {
        k = -k;
        alpha = -alpha;
    }
    if v < 0.0 {
        v = -v;
        alpha += PI;
    }
    let alpha = wrap_phase(alpha);
    let dof = (y.len() - 6) as f64;
    let s2 = out.ssr / dof;
    let sd = |i: usize| (s2 * out.inverse_hessian_diag[i]).sqrt();
    let param_std = ParamStd { a0: sd(A0), mu: sd(MU), sigma: sd(SIGMA), v: sd(VIS), k: sd(K), alpha: sd(ALPHA) };
    let params = FringeModelParams { a0, mu, sigma: sigma.abs(), v, k, alpha, phase_reference: PhaseReference::EnvelopeCenter };
    Ok(FitResult {
        params,
        rms_residual: (out.ssr / y.len() as f64).sqrt(),
        iterations: out.iterations,
        converged: true,
        param_std,
        v_out_of_range: v > 1.0,
        alpha_identifiable: v > PHASE_IDENTIFIABLE_MIN_V && (param_std.v.is_nan() || v > 3.0 * param_std.v),
        noise_estimate,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Two-beam model

/// Fitted parameters of two tilted Gaussian beams, see
/// [`crate::synth::TwoBeamConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBeamFit {
    pub amp1: f64,
    pub amp2: f64,
    pub center1: f64,
    pub center2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub tilt_k: f64,
    pub rel_phase: f64,
    /// `2·amp1·amp2/(amp1² + amp2²)`, the visibility where the beams overlap.
    pub visibility: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

struct TwoBeamModel<'a>(&'a [f64]);

impl LeastSquaresProblem<8> for TwoBeamModel<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn observed(&self, i: usize) -> f64 {
        self.0[i]
    }
    fn model(&self, p: &[f64; 8], i: usize) -> f64 {
        self.model_and_gradient(p, i).0
    }
    fn model_and_gradient(&self, p: &[f64; 8], i: usize) -> (f64, [f64; 8]) {
        let x = i as f64;
        let [a1, a2, c1, c2, s1, s2, k, ph] = *p;
        let (d1, d2) = (x - c1, x - c2);
        let e1 = (-0.25 * d1 * d1 / (s1 * s1)).exp();
        let e2 = (-0.25 * d2 * d2 / (s2 * s2)).exp();
        let (f1, f2) = (a1 * e1, a2 * e2);
        let (sn, cs) = (k * x + ph).sin_cos();
        let value = f1 * f1 + f2 * f2 + 2.0 * f1 * f2 * cs;
        let di1 = 2.0 * f1 + 2.0 * f2 * cs;
        let di2 = 2.0 * f2 + 2.0 * f1 * cs;
        let cross = -2.0 * f1 * f2 * sn;
        let grad = [
            di1 * e1,
            di2 * e2,
            di1 * f1 * d1 / (2.0 * s1 * s1),
            di2 * f2 * d2 / (2.0 * s2 * s2),
            di1 * f1 * d1 * d1 / (2.0 * s1 * s1 * s1),
            di2 * f2 * d2 * d2 / (2.0 * s2 * s2 * s2),
            cross * x,
            cross,
        ];
        (value, grad)
    }
    fn project(&self, mut p: [f64; 8]) -> [f64; 8] {
        p[4] = p[4].abs().max(1e-6);
        p[5] = p[5].abs().max(1e-6);
        p
    }
}

/// Fit two separately enveloped beams, seeded from the single-envelope fit.
/// Suited to profiles whose envelope is visibly asymmetric.
pub fn fit_two_beam(profile: &FringeProfile) -> Result<TwoBeamFit, FitError> {
    let single = fit_full_model(profile)?;
    let p = single.params;
    let v = p.v.min(0.999);
    let root = p.a0.sqrt();
    let a1 = 0.5 * root * ((1.0 + v).sqrt() + (1.0 - v).sqrt());
    let a2 = 0.5 * root * ((1.0 + v).sqrt() - (1.0 - v).sqrt());
    // Split the centers slightly so the two envelopes are distinguishable.
    let split = 0.05 * p.sigma;
    let start = [a1, a2, p.mu - split, p.mu + split, p.sigma, p.sigma, p.k, wrap_phase(p.alpha - p.k * p.mu)];
    let y = &profile.intensities;
    let out = levenberg_marquardt(&TwoBeamModel(y), start, &LmSettings { max_iterations: 400, ..LmSettings::default() });
    if !out.converged {
        return Err(FitError::NonConvergence { iterations: out.iterations });
    }
    let [mut amp1, mut amp2, center1, center2, sigma1, sigma2, mut tilt_k, mut rel_phase] = out.params;
    if amp1 < 0.0 && amp2 < 0.0 {
        amp1 = -amp1;
        amp2 = -amp2;
    } else if amp1 * amp2 < 0.0 {
        amp1 = amp1.abs();
        amp2 = amp2.abs();
        rel_phase += PI;
    }
    if tilt_k < 0.0 {
        tilt_k = -tilt_k;
        rel_phase = -rel_phase;
    }
    let power = amp1 * amp1 + amp2 * amp2;
    Ok(TwoBeamFit {
        amp1,
        amp2,
        center1,
        center2,
        sigma1,
        sigma2,
        tilt_k,
        rel_phase: wrap_phase(rel_phase),
        visibility: if power > 0.0 { 2.0 * amp1 * amp2 / power } else { 0.0 },
        rms_residual: (out.ssr / y.len() as f64).sqrt(),
        iterations: out.iterations,
    })
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Envelope,
    #[default]
    FullModel,
    TwoBeam,
}

impl FitMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::Envelope => "envelope",
            FitMethod::FullModel => "full_model",
            FitMethod::TwoBeam => "two_beam",
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "envelope" => Ok(FitMethod::Envelope),
            "full_model" => Ok(FitMethod::FullModel),
            "two_beam" => Ok(FitMethod::TwoBeam),
            other => Err(format!("unknown fit method '{other}'")),
        }
    }
}

/// Visibility of one profile by the chosen method.
pub fn fit_visibility(profile: &FringeProfile, method: FitMethod) -> Result<f64, FitError> {
    match method {
        FitMethod::Envelope => envelope_visibility(profile).map(|a| a.visibility),
        FitMethod::FullModel => fit_full_model(profile).map(|r| r.params.v),
        FitMethod::TwoBeam => fit_two_beam(profile).map(|r| r.visibility),
    }
}

/// Frame-to-frame statistics of the fitted visibility at one HWP angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStatistics {
    /// HWP angle in radians.
    pub theta: f64,
    pub visibility_mean: f64,
    /// Sample standard deviation over the successful frames.
    pub visibility_std: f64,
    /// Frames that fitted successfully.
    pub n_frames: usize,
    pub n_failed: usize,
    pub method: FitMethod,
    /// Mean outside [0, 1]; reported raw.
    pub out_of_range: bool,
}

/// Mean and sample standard deviation, summed in slice order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Reduce the visibilities of one angle's frames.
pub fn summarize_frames(theta: f64, results: &[Result<f64, FitError>], method: FitMethod) -> Result<SweepStatistics, FitError> {
    if results.len() < 2 {
        return Err(FitError::TooFewFrames(results.len()));
    }
    let values: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    if 2 * values.len() < results.len() {
        let first_error = results.iter().find_map(|r| r.as_ref().err().cloned()).expect("some frame failed");
        return Err(FitError::InsufficientFrames {
            theta,
            succeeded: values.len(),
            total: results.len(),
            first_error: Box::new(first_error),
        });
    }
    let (visibility_mean, visibility_std) = mean_std(&values);
    Ok(SweepStatistics {
        theta,
        visibility_mean,
        visibility_std,
        n_frames: values.len(),
        n_failed: results.len() - values.len(),
        method,
        out_of_range: !(0.0..=1.0).contains(&visibility_mean),
    })
}

/// Fit every frame (in parallel) and reduce per angle (in input order).
pub fn aggregate_sweep(frames_by_theta: &[(f64, Vec<FringeProfile>)], method: FitMethod) -> Result<Vec<SweepStatistics>, FitError> {
    frames_by_theta
        .iter()
        .map(|(theta, frames)| {
            if frames.len() < 2 {
                return Err(FitError::TooFewFrames(frames.len()));
            }
            let results: Vec<Result<f64, FitError>> = frames.par_iter().map(|f| fit_visibility(f, method)).collect();
            summarize_frames(*theta, &results, method)
        })
        .collect()
}
