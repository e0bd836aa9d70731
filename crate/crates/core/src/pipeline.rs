//! End-to-end runs: generate a scenario's signals, smooth them by diffusion
//! or a baseline filter, and measure the results.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::{moving_average, savitzky_golay, SgFilterSpec};
use crate::datagen::{clean_signal, default_noise_amplitude, make_noise, NoiseSpec};
use crate::diffusion::DiffusionMode;
use crate::error::{Error, Result};
use crate::lssvr::{run_diffusion, DiffusionRun, RunOptions, SnrReference, StepDiagnostics};
use crate::metrics::{self, MetricReport, Snr};
use crate::scenario::{Scenario, SignalSource};
use crate::signal::{project, uniform_grid, SampledSignal, SpectralSignal};

#[derive(Debug, Clone)]
pub struct Generated {
    /// The input scenario with the noise amplitude filled in.
    pub scenario: Scenario,
    pub clean: SampledSignal,
    pub noisy: SampledSignal,
}

pub fn clean_of(scn: &Scenario) -> Result<SampledSignal> {
    match &scn.signal {
        SignalSource::Pearson { peaks, window } => clean_signal(peaks, scn.grid, *window),
        SignalSource::Sine => SampledSignal::from_fn(scn.grid, |x| (PI * x).sin()),
    }
}

pub fn generate(scn: &Scenario) -> Result<Generated> {
    scn.validate()?;
    let clean = clean_of(scn)?;
    let mut scenario = scn.clone();
    let amplitude = *scenario
        .noise
        .amplitude
        .get_or_insert_with(|| default_noise_amplitude(&clean));
    let spline = make_noise(&NoiseSpec {
        seed: scn.noise.seed,
        knot_count: scn.noise.knot_count,
        amplitude,
    })?;
    let mut ys = Vec::with_capacity(clean.len());
    for (&x, &y) in clean.xs().iter().zip(clean.ys()) {
        ys.push(y + spline.eval(x, 0)?);
    }
    let noisy = clean.with_values(ys)?;
    Ok(Generated {
        scenario,
        clean,
        noisy,
    })
}

/// One row of the SNR-over-time table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRow {
    pub time: f64,
    pub snr_db: Snr,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_clean_db: Option<Snr>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub interval: [f64; 2],
    pub initial: SnrRow,
    /// Requested snapshot times, or the final time when none were requested.
    pub snapshots: Vec<SnrRow>,
    pub steps: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_max_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Smoothed {
    pub initial: SpectralSignal,
    pub run: DiffusionRun,
    pub summary: RunSummary,
    snapshot_times: Vec<f64>,
}

impl Smoothed {
    /// `(time, u)` for every reported snapshot, rendered on `grid` points.
    pub fn render_snapshots(&self, grid: usize) -> Result<Vec<(f64, SampledSignal)>> {
        let xs = uniform_grid(grid);
        self.snapshot_times
            .iter()
            .map(|&t| Ok((t, self.state_at(t).render(&xs)?)))
            .collect()
    }

    pub fn final_signal(&self) -> &SpectralSignal {
        &self.run.final_state().u
    }

    fn state_at(&self, t: f64) -> &SpectralSignal {
        if t == 0.0 {
            return &self.initial;
        }
        self.run
            .snapshots
            .iter()
            .find(|s| (s.time - t).abs() < 1e-9)
            .map(|s| &s.u)
            .expect("snapshot times come from the run")
    }
}

fn snr_row(
    time: f64,
    u: &SpectralSignal,
    noisy: &SampledSignal,
    clean: Option<&SampledSignal>,
    interval: [f64; 2],
) -> Result<SnrRow> {
    let s = u.render(noisy.xs())?;
    Ok(SnrRow {
        time,
        snr_db: metrics::snr_db(&s, noisy, interval)?,
        snr_clean_db: clean
            .map(|c| metrics::snr_db_clean(&s, c, interval))
            .transpose()?,
    })
}

/// `max |u - exp(-k pi^2 t) sin(pi x)|` on `grid` points when the scenario
/// is the isotropic heat problem with a sine initial state.
pub fn analytic_error(scn: &Scenario, u: &SpectralSignal, time: f64, grid: usize) -> Option<f64> {
    let DiffusionMode::Isotropic { k } = scn.diffusion.mode else {
        return None;
    };
    if scn.signal != SignalSource::Sine {
        return None;
    }
    let decay = (-k * PI * PI * time).exp();
    Some(
        uniform_grid(grid)
            .into_iter()
            .map(|x| (u.eval_derivs(x)[0] - decay * (PI * x).sin()).abs())
            .fold(0.0, f64::max),
    )
}

/// Projects `noisy` onto the scenario basis and evolves it.
pub fn smooth(
    scn: &Scenario,
    noisy: &SampledSignal,
    clean: Option<&SampledSignal>,
) -> Result<Smoothed> {
    scn.validate()?;
    let clean = match clean {
        Some(c) => Some(c.restrict_to(noisy.xs())?),
        None => None,
    };
    let u0 = project(noisy, scn.solver.basis(), scn.projection_ridge)?;
    let options = RunOptions {
        reference: Some(SnrReference {
            noisy: noisy.clone(),
            clean: clean.clone(),
            interval: scn.interval,
        }),
        ..RunOptions::default()
    };
    let run = run_diffusion(&u0, &scn.diffusion, &scn.solver, &scn.snapshots, &options)?;
    let final_time = run.final_state().time;
    let mut times = scn.snapshots.clone();
    if times.is_empty() {
        times.push(final_time);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut smoothed = Smoothed {
        initial: u0.clone(),
        run,
        summary: RunSummary {
            scenario: scn.name.clone(),
            interval: scn.interval,
            initial: snr_row(0.0, &u0, noisy, clean.as_ref(), scn.interval)?,
            snapshots: Vec::new(),
            steps: Vec::new(),
            warnings: Vec::new(),
            analytic_max_error: None,
        },
        snapshot_times: times.clone(),
    };
    for &t in &times {
        let u = smoothed.state_at(t);
        let row = snr_row(t, u, noisy, clean.as_ref(), scn.interval)?;
        smoothed.summary.snapshots.push(row);
    }
    smoothed.summary.steps = smoothed.run.history.clone();
    smoothed.summary.warnings = smoothed.run.warnings.clone();
    smoothed.summary.analytic_max_error =
        analytic_error(scn, smoothed.final_signal(), final_time, scn.render_grid);
    Ok(smoothed)
}

/// A smoothing method that maps a noisy signal to a smoothed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Identity,
    Diffusion,
    SavitzkyGolay(SgFilterSpec),
    MovingAverage { half_width: usize },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Identity => f.write_str("identity"),
            Method::Diffusion => f.write_str("diffusion"),
            Method::SavitzkyGolay(s) => write!(f, "sg:{}:{}", s.window(), s.degree),
            Method::MovingAverage { half_width } => write!(f, "ma:{}", 2 * half_width + 1),
        }
    }
}

fn parse_width(text: &str) -> Result<usize> {
    let w: usize = text
        .parse()
        .map_err(|_| Error::invalid(format!("invalid window width `{text}`")))?;
    if w.is_multiple_of(2) {
        return Err(Error::invalid(format!("window width must be odd, got {w}")));
    }
    Ok(w / 2)
}

impl FromStr for Method {
    type Err = Error;

    /// `identity`, `diffusion`, `sg:<width>:<degree>` or `ma:<width>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["identity"] => Ok(Method::Identity),
            ["diffusion"] => Ok(Method::Diffusion),
            ["sg", w, d] => {
                let degree = d
                    .parse()
                    .map_err(|_| Error::invalid(format!("invalid degree `{d}`")))?;
                let spec = SgFilterSpec {
                    half_width: parse_width(w)?,
                    degree,
                };
                spec.validate()?;
                Ok(Method::SavitzkyGolay(spec))
            }
            ["ma", w] => Ok(Method::MovingAverage {
                half_width: parse_width(w)?,
            }),
            _ => Err(Error::invalid(format!(
                "unknown method `{s}` (expected identity, diffusion, sg:<width>:<degree> or ma:<width>)"
            ))),
        }
    }
}

/// Output of `method` on the grid of `noisy` (interior points only for the
/// convolution filters).
pub fn apply_method(
    method: Method,
    scn: &Scenario,
    noisy: &SampledSignal,
) -> Result<SampledSignal> {
    match method {
        Method::Identity => Ok(noisy.clone()),
        Method::Diffusion => smooth(scn, noisy, None)?.final_signal().render(noisy.xs()),
        Method::SavitzkyGolay(spec) => savitzky_golay(noisy, &spec),
        Method::MovingAverage { half_width } => moving_average(noisy, half_width),
    }
}

/// Brings a smoothed signal and a reference onto a common grid: the coarser
/// of the two grids, which must be contained in the finer one.
pub fn align(smoothed: &SampledSignal, reference: &SampledSignal) -> Result<SampledSignal> {
    if smoothed.same_grid(reference) {
        return Ok(smoothed.clone());
    }
    if let Ok(s) = smoothed.restrict_to(reference.xs()) {
        return Ok(s);
    }
    let r = reference
        .restrict_to(smoothed.xs())
        .map_err(|_| Error::GridMismatch("neither grid contains the other".into()))?;
    Ok(smoothed
        .restrict_to(r.xs())
        .unwrap_or_else(|_| smoothed.clone()))
}

/// Metric report of `smoothed`, aligned with the references first.
pub fn measure(
    smoothed: &SampledSignal,
    noisy: &SampledSignal,
    clean: Option<&SampledSignal>,
    interval: [f64; 2],
) -> Result<MetricReport> {
    let s = align(smoothed, noisy)?;
    metrics::report(&s, noisy, clean, interval)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    /// 1-based position among successful methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub interval: [f64; 2],
    /// Successful methods by decreasing SNR, then failures in input order.
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub outputs: Vec<(String, SampledSignal)>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "rank,method,snr_db,snr_clean_db,peak_height_ratio,peak_position_shift,error\n",
        );
        for r in &self.rows {
            let rank = r.rank.map(|v| v.to_string()).unwrap_or_default();
            let (snr, clean, ratio, shift) = match &r.metrics {
                Some(m) => (
                    m.snr_db.to_string(),
                    m.snr_clean_db.map(|v| v.to_string()).unwrap_or_default(),
                    m.edge_retention
                        .map(|e| e.peak_height_ratio.to_string())
                        .unwrap_or_default(),
                    m.edge_retention
                        .map(|e| e.peak_position_shift.to_string())
                        .unwrap_or_default(),
                ),
                None => Default::default(),
            };
            let err = r.error.as_deref().unwrap_or("").replace('"', "'");
            let err = if err.is_empty() {
                err
            } else {
                format!("\"{err}\"")
            };
            out.push_str(&format!(
                "{rank},{},{snr},{clean},{ratio},{shift},{err}\n",
                r.method
            ));
        }
        out
    }

    pub fn row(&self, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Runs every method on `noisy` concurrently and ranks them by SNR.
pub fn compare(
    scn: &Scenario,
    noisy: &SampledSignal,
    clean: Option<&SampledSignal>,
    methods: &[Method],
) -> Comparison {
    let results: Vec<Result<(SampledSignal, MetricReport)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| {
                scope.spawn(move || {
                    let s = apply_method(m, scn, noisy)?;
                    let report = measure(&s, noisy, clean, scn.interval)?;
                    Ok((s, report))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::invalid("method panicked")))
            })
            .collect()
    });

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut outputs = Vec::new();
    for (m, r) in methods.iter().zip(results) {
        match r {
            Ok((s, report)) => {
                outputs.push((m.to_string(), s));
                ok.push(ComparisonRow {
                    rank: None,
                    method: m.to_string(),
                    metrics: Some(report),
                    error: None,
                });
            }
            Err(e) => failed.push(ComparisonRow {
                rank: None,
                method: m.to_string(),
                metrics: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let snr = |r: &ComparisonRow| {
        r.metrics
            .as_ref()
            .map(|m| m.snr_db.db())
            .unwrap_or(f64::NEG_INFINITY)
    };
    ok.sort_by(|a, b| snr(b).total_cmp(&snr(a)));
    for (i, r) in ok.iter_mut().enumerate() {
        r.rank = Some(i + 1);
    }
    ok.extend(failed);
    Comparison {
        interval: scn.interval,
        rows: ok,
        outputs,
    }
}
