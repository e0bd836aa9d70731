//! Synthetic test signals: Pearson VII peaks plus spline-smoothed Gaussian
//! white noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{spline_fit, uniform_grid, CubicSpline, SampledSignal};

/// Relative noise level used when a scenario leaves the amplitude open.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.08;
pub const DEFAULT_KNOT_COUNT: usize = 64;

/// Pearson VII peak `A / [1 + 4 ((x - mu)/sigma)^2 (2^(1/q) - 1)]^q`.
///
/// `sigma` is the full width at half maximum; `q = 1` is a Lorentzian and
/// large `q` approaches a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PearsonPeakSpec {
    #[serde(rename = "A")]
    pub height: f64,
    #[serde(rename = "mu")]
    pub position: f64,
    #[serde(rename = "sigma")]
    pub width: f64,
    #[serde(rename = "q")]
    pub shape: f64,
}

impl PearsonPeakSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::invalid(format!(
                "peak width must be positive, got {}",
                self.width
            )));
        }
        if !(self.shape > 0.0) || !self.shape.is_finite() {
            return Err(Error::invalid(format!(
                "peak shape must be positive, got {}",
                self.shape
            )));
        }
        if !self.height.is_finite() || !self.position.is_finite() {
            return Err(Error::invalid("peak height and position must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        pearson_vii(self, x)
    }
}

pub fn pearson_vii(spec: &PearsonPeakSpec, x: f64) -> f64 {
    let z = (x - spec.position) / spec.width;
    let bracket = 1.0 + 4.0 * z * z * ((1.0 / spec.shape).exp2() - 1.0);
    spec.height / bracket.powf(spec.shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub seed: u64,
    pub knot_count: usize,
    /// Standard deviation of the knot values.
    pub amplitude: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.knot_count < 3 {
            return Err(Error::invalid(format!(
                "noise needs at least 3 knots, got {}",
                self.knot_count
            )));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid(format!(
                "noise amplitude must be finite and nonnegative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }
}

/// Seeded i.i.d. Gaussian values at `knot_count` equidistant knots on [0, 1].
pub fn noise_knots(spec: &NoiseSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let normal = Normal::new(0.0, spec.amplitude)
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xs = uniform_grid(spec.knot_count);
    let ys = (0..spec.knot_count)
        .map(|_| normal.sample(&mut rng))
        .collect();
    Ok((xs, ys))
}

/// Natural cubic spline through seeded Gaussian knot values.
pub fn make_noise(spec: &NoiseSpec) -> Result<CubicSpline> {
    let (xs, ys) = noise_knots(spec)?;
    spline_fit(&xs, &ys)
}

/// Maps the unit solver domain onto the physical window the peaks are
/// specified in.
pub fn to_physical(window: [f64; 2], x: f64) -> f64 {
    window[0] + (window[1] - window[0]) * x
}

/// Clean and noisy versions of the same test signal on a common grid.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub clean: SampledSignal,
    pub noisy: SampledSignal,
}

/// Sum of the peaks on `grid` equidistant points of [0, 1].
pub fn clean_signal(
    peaks: &[PearsonPeakSpec],
    grid: usize,
    window: [f64; 2],
) -> Result<SampledSignal> {
    for p in peaks {
        p.validate()?;
    }
    if !(window[1] > window[0]) {
        return Err(Error::invalid(format!(
            "physical window must be increasing, got [{}, {}]",
            window[0], window[1]
        )));
    }
    SampledSignal::from_fn(grid, |x| {
        let xp = to_physical(window, x);
        peaks.iter().map(|p| p.eval(xp)).sum()
    })
}

pub fn synthesize(
    peaks: &[PearsonPeakSpec],
    noise: &NoiseSpec,
    grid: usize,
    window: [f64; 2],
) -> Result<Synthetic> {
    let clean = clean_signal(peaks, grid, window)?;
    let spline = make_noise(noise)?;
    let mut ys = Vec::with_capacity(clean.len());
    for (&x, &y) in clean.xs().iter().zip(clean.ys()) {
        ys.push(y + spline.eval(x, 0)?);
    }
    let noisy = clean.with_values(ys)?;
    Ok(Synthetic { clean, noisy })
}

/// `DEFAULT_NOISE_FRACTION * max |clean|`.
pub fn default_noise_amplitude(clean: &SampledSignal) -> f64 {
    DEFAULT_NOISE_FRACTION * clean.ys().iter().fold(0.0f64, |m, y| m.max(y.abs()))
}
