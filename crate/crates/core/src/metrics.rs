//! Signal-to-noise ratio and edge-retention measures.
//!
//! [`snr_db`] follows the convention where the smoothed signal supplies the
//! power in the numerator and its distance from the noisy input is treated as
//! the noise. [`snr_db_clean`] is the ground-truth variant used for
//! diagnostics when the clean signal is known.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::signal::{SampledSignal, GRID_TOL};

pub const DEFAULT_INTERVAL: [f64; 2] = [0.2, 0.8];

/// An SNR in decibels, with the two degenerate ratios kept distinct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Finite(f64),
    /// Zero residual power.
    Infinite,
    /// Zero signal power.
    ZeroSignal,
}

impl Snr {
    pub fn db(self) -> f64 {
        match self {
            Snr::Finite(v) => v,
            Snr::Infinite => f64::INFINITY,
            Snr::ZeroSignal => f64::NEG_INFINITY,
        }
    }

    fn from_powers(signal: f64, noise: f64) -> Self {
        if signal == 0.0 {
            Snr::ZeroSignal
        } else if noise == 0.0 {
            Snr::Infinite
        } else {
            Snr::Finite(10.0 * (signal / noise).log10())
        }
    }
}

impl PartialOrd for Snr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.db().partial_cmp(&other.db())
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Finite(v) => write!(f, "{v:.5}"),
            Snr::Infinite => f.write_str("inf"),
            Snr::ZeroSignal => f.write_str("-inf"),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Finite(v) => s.serialize_f64(*v),
            Snr::Infinite => s.serialize_str("inf"),
            Snr::ZeroSignal => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Snr::Finite(v)),
            Repr::Text(t) if t == "inf" => Ok(Snr::Infinite),
            Repr::Text(t) if t == "-inf" => Ok(Snr::ZeroSignal),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid SNR value `{t}`"))),
        }
    }
}

fn check_interval(interval: [f64; 2]) -> Result<()> {
    let [a, b] = interval;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
        return Err(Error::invalid(format!(
            "evaluation interval [{a}, {b}] must be an increasing subinterval of [0, 1]"
        )));
    }
    Ok(())
}

fn in_interval(x: f64, interval: [f64; 2]) -> bool {
    x >= interval[0] - GRID_TOL && x <= interval[1] + GRID_TOL
}

/// `(Sum a^2, Sum (a - b)^2)` over the common grid points inside `interval`.
fn powers(a: &SampledSignal, b: &SampledSignal, interval: [f64; 2]) -> Result<(f64, f64)> {
    check_interval(interval)?;
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "{} vs {} samples or differing abscissae",
            a.len(),
            b.len()
        )));
    }
    let mut count = 0;
    let (mut signal, mut noise) = (0.0, 0.0);
    for ((&x, &ya), &yb) in a.xs().iter().zip(a.ys()).zip(b.ys()) {
        if in_interval(x, interval) {
            count += 1;
            signal += ya * ya;
            noise += (yb - ya) * (yb - ya);
        }
    }
    if count < 2 {
        return Err(Error::invalid(format!(
            "evaluation interval [{}, {}] holds fewer than 2 grid points",
            interval[0], interval[1]
        )));
    }
    Ok((signal, noise))
}

/// `10 log10(Sum s^2 / Sum (f - s)^2)` for smoothed `s` and noisy `f`.
pub fn snr_db(smoothed: &SampledSignal, noisy: &SampledSignal, interval: [f64; 2]) -> Result<Snr> {
    let (signal, noise) = powers(smoothed, noisy, interval)?;
    Ok(Snr::from_powers(signal, noise))
}

/// `10 log10(Sum c^2 / Sum (c - s)^2)` against the clean signal `c`.
pub fn snr_db_clean(
    smoothed: &SampledSignal,
    clean: &SampledSignal,
    interval: [f64; 2],
) -> Result<Snr> {
    let (signal, noise) = powers(clean, smoothed, interval)?;
    Ok(Snr::from_powers(signal, noise))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRetention {
    /// `max smoothed / max clean` on the interval.
    pub peak_height_ratio: f64,
    /// `|argmax smoothed - argmax clean|`.
    pub peak_position_shift: f64,
}

fn peak(s: &SampledSignal, interval: [f64; 2]) -> Option<(f64, f64)> {
    s.xs()
        .iter()
        .zip(s.ys())
        .filter(|(&x, _)| in_interval(x, interval))
        .fold(None, |best: Option<(f64, f64)>, (&x, &y)| match best {
            Some((_, by)) if by >= y => best,
            _ => Some((x, y)),
        })
}

/// Compares the highest sample of `smoothed` with that of `clean` inside
/// `interval`. The two signals need not share a grid.
pub fn edge_retention(
    smoothed: &SampledSignal,
    clean: &SampledSignal,
    interval: [f64; 2],
) -> Result<EdgeRetention> {
    check_interval(interval)?;
    let (cx, cy) = peak(clean, interval)
        .ok_or_else(|| Error::invalid("clean signal has no samples in the interval"))?;
    let (sx, sy) = peak(smoothed, interval)
        .ok_or_else(|| Error::invalid("smoothed signal has no samples in the interval"))?;
    if cy == 0.0 {
        return Err(Error::invalid("clean signal has a zero peak"));
    }
    Ok(EdgeRetention {
        peak_height_ratio: sy / cy,
        peak_position_shift: (sx - cx).abs(),
    })
}

/// Metrics of one smoothed signal, as written to JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub interval: [f64; 2],
    pub snr_db: Snr,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_clean_db: Option<Snr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_retention: Option<EdgeRetention>,
}

/// SNR of `smoothed` against `noisy` (restricted to the smoothed grid) plus
/// the clean-referenced measures when `clean` is given.
pub fn report(
    smoothed: &SampledSignal,
    noisy: &SampledSignal,
    clean: Option<&SampledSignal>,
    interval: [f64; 2],
) -> Result<MetricReport> {
    let noisy = noisy.restrict_to(smoothed.xs())?;
    let (snr_clean_db, edge) = match clean {
        Some(c) => {
            let c_sub = c.restrict_to(smoothed.xs())?;
            (
                Some(snr_db_clean(smoothed, &c_sub, interval)?),
                Some(edge_retention(smoothed, c, interval)?),
            )
        }
        None => (None, None),
    };
    Ok(MetricReport {
        interval,
        snr_db: snr_db(smoothed, &noisy, interval)?,
        snr_clean_db,
        edge_retention: edge,
    })
}
