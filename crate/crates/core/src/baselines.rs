//! Moving-average and Savitzky-Golay smoothers.
//!
//! Both return only the interior samples whose full window lies inside the
//! signal; nothing is padded at the ends.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthopoly::legendre;
use crate::signal::SampledSignal;

const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgFilterSpec {
    /// Window is `2 * half_width + 1` samples.
    pub half_width: usize,
    pub degree: usize,
}

impl SgFilterSpec {
    pub fn window(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_width == 0 {
            return Err(Error::invalid(
                "Savitzky-Golay half width must be at least 1",
            ));
        }
        if self.degree >= self.window() {
            return Err(Error::invalid(format!(
                "polynomial degree {} must be below the window size {}",
                self.degree,
                self.window()
            )));
        }
        Ok(())
    }
}

fn check_uniform(signal: &SampledSignal) -> Result<()> {
    let xs = signal.xs();
    let h = xs[1] - xs[0];
    if xs
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > UNIFORM_TOL * h.max(1.0))
    {
        return Err(Error::invalid("smoothing filters need a uniform grid"));
    }
    Ok(())
}

fn convolve(signal: &SampledSignal, coeffs: &[f64]) -> Result<SampledSignal> {
    check_uniform(signal)?;
    let window = coeffs.len();
    let n = window / 2;
    if window > signal.len() {
        return Err(Error::invalid(format!(
            "window of {window} samples exceeds the signal length {}",
            signal.len()
        )));
    }
    let norm: f64 = coeffs.iter().sum();
    let ys = signal.ys();
    let out: Vec<f64> = (n..signal.len() - n)
        .map(|k| {
            coeffs
                .iter()
                .zip(&ys[k - n..=k + n])
                .map(|(a, y)| a * y)
                .sum::<f64>()
                / norm
        })
        .collect();
    let xs = signal.xs()[n..signal.len() - n].to_vec();
    if xs.len() < 2 {
        return Err(Error::invalid(
            "window leaves fewer than 2 interior samples",
        ));
    }
    SampledSignal::new(xs, out)
}

/// Mean over `2n + 1` neighbours.
pub fn moving_average(signal: &SampledSignal, half_width: usize) -> Result<SampledSignal> {
    let window = 2 * half_width + 1;
    convolve(signal, &vec![1.0 / window as f64; window])
}

/// Convolution weights `A_{-n} .. A_n` that evaluate at the window centre the
/// least-squares polynomial of the given degree.
///
/// The local fit is written in Legendre polynomials of `t = i / n` so the
/// normal equations stay well conditioned for wide windows and high degrees.
pub fn sg_coefficients(spec: &SgFilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.half_width as i64;
    let cols = spec.degree + 1;
    let rows = spec.window();
    let mut design = DMatrix::<f64>::zeros(rows, cols);
    for (r, i) in (-n..=n).enumerate() {
        let t = i as f64 / n as f64;
        for k in 0..cols {
            design[(r, k)] = legendre(k, t);
        }
    }
    let gram = design.transpose() * &design;
    let centre = DVector::from_iterator(cols, (0..cols).map(|k| legendre(k, 0.0)));
    // A = J (J^T J)^{-1} p(0)
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("Savitzky-Golay normal equations".into()))?;
    let z = chol.solve(&centre);
    Ok((design * z).iter().copied().collect())
}

pub fn savitzky_golay(signal: &SampledSignal, spec: &SgFilterSpec) -> Result<SampledSignal> {
    let coeffs = sg_coefficients(spec)?;
    convolve(signal, &coeffs)
}
