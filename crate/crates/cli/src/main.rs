use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anidiff::baselines::{moving_average, savitzky_golay, SgFilterSpec};
use anidiff::diffusion::DiffusionMode;
use anidiff::lssvr::Formulation;
use anidiff::pipeline::{self, Method};
use anidiff::scenario::{self, Scenario};
use anidiff::SampledSignal;

mod svg;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] anidiff::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(anidiff::Error::Io(_)) | CliError::File { .. } => EXIT_IO,
            _ => EXIT_INPUT,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "anidiff",
    version,
    about = "Edge-preserving signal smoothing by anisotropic diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the clean and noisy signals of a scenario.
    Generate(GenerateArgs),
    /// Smooth a noisy signal by diffusion and write snapshots plus a summary.
    Smooth(SmoothArgs),
    /// Apply a moving-average or Savitzky-Golay filter to a signal.
    Baseline(BaselineArgs),
    /// Run several methods on the same input and rank them by SNR.
    Compare(CompareArgs),
    /// Measure a smoothed signal against its noisy (and clean) reference.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, short, env = "ANIDIFF_OUT_DIR", default_value = "anidiff-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file, or the name of a bundled scenario
    /// (testcase1, testcase2, sine).
    #[arg(long, short)]
    scenario: String,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Noise knot standard deviation.
    #[arg(long)]
    noise_amplitude: Option<f64>,
    /// Number of samples on [0, 1].
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Isotropic,
    PmExponential,
    PmRational,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Collocation,
    Galerkin,
}

#[derive(Args)]
struct SolverArgs {
    /// Diffusion coefficient.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Edge constant K, or the diffusivity k in isotropic mode.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Implicit weight of the time scheme.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    formulation: Option<FormulationArg>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Highest basis degree N.
    #[arg(long)]
    order: Option<usize>,
    /// Number of collocation points.
    #[arg(long)]
    training: Option<usize>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    /// Evaluation interval as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    interval: Option<Vec<f64>>,
    /// Samples of the snapshot CSVs.
    #[arg(long)]
    render_grid: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Noisy CSV; generated from the scenario when absent.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Clean CSV for the ground-truth diagnostics.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Report the error against the analytic heat solution.
    #[arg(long)]
    analytic_check: bool,
    /// Also write plot.svg.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Sg,
    Ma,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "sg")]
    method: FilterArg,
    /// Window width in samples (odd).
    #[arg(long, default_value_t = 9)]
    width: usize,
    /// Polynomial degree of the Savitzky-Golay fit.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Methods: identity, diffusion, sg:<width>:<degree>, ma:<width>.
    #[arg(long, value_delimiter = ',', default_value = "diffusion,sg:9:2")]
    methods: Vec<String>,
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    smoothed: PathBuf,
    #[arg(long)]
    noisy: PathBuf,
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.2, 0.8])]
    interval: Vec<f64>,
}

fn load_scenario(args: &ScenarioArgs) -> CliResult<Scenario> {
    let path = Path::new(&args.scenario);
    let mut scn = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|source| CliError::File {
            path: path.into(),
            source,
        })?;
        Scenario::from_json(&text)?
    } else {
        scenario::bundled(&args.scenario).map_err(|_| {
            CliError::Usage(format!(
                "`{}` is neither a file nor a bundled scenario ({})",
                args.scenario,
                scenario::bundled_names().collect::<Vec<_>>().join(", ")
            ))
        })?
    };
    if let Some(seed) = args.seed {
        scn.noise.seed = seed;
    }
    if let Some(a) = args.noise_amplitude {
        scn.noise.amplitude = Some(a);
    }
    if let Some(g) = args.grid {
        scn.grid = g;
    }
    scn.validate()?;
    Ok(scn)
}

fn apply_solver_flags(scn: &mut Scenario, a: &SolverArgs) -> CliResult<()> {
    if let Some(mode) = a.mode {
        let current = match scn.diffusion.mode {
            DiffusionMode::Isotropic { k } => k,
            DiffusionMode::PmExponential { edge } | DiffusionMode::PmRational { edge } => edge,
        };
        scn.diffusion.mode = match mode {
            ModeArg::Isotropic => DiffusionMode::Isotropic { k: current },
            ModeArg::PmExponential => DiffusionMode::PmExponential { edge: current },
            ModeArg::PmRational => DiffusionMode::PmRational { edge: current },
        };
    }
    if let Some(k) = a.k {
        scn.set_edge_constant(k);
    }
    if let Some(dt) = a.dt {
        scn.diffusion.dt = dt;
    }
    if let Some(steps) = a.steps {
        scn.diffusion.steps = steps;
    }
    if let Some(theta) = a.theta {
        scn.diffusion.theta = theta;
    }
    if let Some(f) = a.formulation {
        scn.solver.formulation = match f {
            FormulationArg::Collocation => Formulation::Collocation,
            FormulationArg::Galerkin => Formulation::Galerkin,
        };
    }
    if let Some(g) = a.gamma {
        scn.solver.gamma = g;
    }
    if let Some(n) = a.order {
        scn.solver.order = n;
        if a.training.is_none() {
            scn.set_training_count(2 * (n + 1));
        }
    }
    if let Some(t) = a.training {
        scn.set_training_count(t);
    }
    if let Some(s) = &a.snapshots {
        scn.snapshots = s.clone();
    }
    if let Some(i) = &a.interval {
        scn.interval = [i[0], i[1]];
    }
    if let Some(r) = a.render_grid {
        scn.render_grid = r;
    }
    scn.validate()?;
    Ok(())
}

fn read_signal(path: &Path) -> CliResult<SampledSignal> {
    let file = fs::File::open(path).map_err(|source| CliError::File {
        path: path.into(),
        source,
    })?;
    SampledSignal::read_csv(BufReader::new(file)).map_err(|e| match e {
        anidiff::Error::Parse { line, message } => {
            CliError::Usage(format!("{}: line {line}: {message}", path.display()))
        }
        other => other.into(),
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::File {
        path: path.into(),
        source,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::File {
        path: dir.into(),
        source,
    })
}

/// Noisy and optional clean signals: from files when given, otherwise
/// generated from the scenario (which then gets its amplitude resolved).
fn inputs(
    scn: &mut Scenario,
    input: Option<&Path>,
    clean: Option<&Path>,
) -> CliResult<(SampledSignal, Option<SampledSignal>)> {
    match input {
        Some(path) => {
            let noisy = read_signal(path)?;
            let clean = clean.map(read_signal).transpose()?;
            Ok((noisy, clean))
        }
        None => {
            let g = pipeline::generate(scn)?;
            *scn = g.scenario;
            let clean = match clean {
                Some(p) => read_signal(p)?,
                None => g.clean,
            };
            Ok((g.noisy, Some(clean)))
        }
    }
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let scn = load_scenario(&args.scenario)?;
    let g = pipeline::generate(&scn)?;
    let dir = &args.out.out;
    create_dir(dir)?;
    write_file(&dir.join("clean.csv"), &g.clean.to_csv_string(("x", "y")))?;
    write_file(&dir.join("noisy.csv"), &g.noisy.to_csv_string(("x", "y")))?;
    write_file(&dir.join("scenario.json"), &g.scenario.to_json())?;
    println!(
        "wrote clean.csv, noisy.csv and scenario.json to {}",
        dir.display()
    );
    Ok(())
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

fn smooth(args: SmoothArgs) -> CliResult<()> {
    let mut scn = load_scenario(&args.scenario)?;
    apply_solver_flags(&mut scn, &args.solver)?;
    let (noisy, clean) = inputs(&mut scn, args.input.as_deref(), args.clean.as_deref())?;
    let result = pipeline::smooth(&scn, &noisy, clean.as_ref())?;
    let dir = &args.out.out;
    create_dir(dir)?;
    let snapshots = result.render_snapshots(scn.render_grid)?;
    for (t, s) in &snapshots {
        write_file(&dir.join(snapshot_name(*t)), &s.to_csv_string(("x", "u")))?;
    }
    let summary = serde_json::to_string_pretty(&result.summary).map_err(anidiff::Error::from)?;
    write_file(&dir.join("summary.json"), &summary)?;
    write_file(&dir.join("scenario.json"), &scn.to_json())?;
    if args.svg {
        let mut series = vec![("noisy".to_string(), &noisy)];
        for (t, s) in &snapshots {
            series.push((format!("t = {t}"), s));
        }
        write_file(&dir.join("plot.svg"), &svg::line_plot(&scn.name, &series))?;
    }

    let mut out = io::stdout().lock();
    let _ = writeln!(out, "time\tsnr_db\tsnr_clean_db");
    let s = &result.summary;
    for row in std::iter::once(&s.initial).chain(&s.snapshots) {
        let clean = row
            .snr_clean_db
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{}\t{}\t{}", row.time, row.snr_db, clean);
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    if args.analytic_check {
        match s.analytic_max_error {
            Some(e) => {
                let _ = writeln!(out, "analytic max error: {e:e}");
            }
            None => {
                return Err(CliError::Usage(
                    "--analytic-check needs isotropic mode on the sine scenario".into(),
                ))
            }
        }
    }
    Ok(())
}

fn baseline(args: BaselineArgs) -> CliResult<()> {
    if args.width.is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "window width must be odd, got {}",
            args.width
        )));
    }
    let signal = read_signal(&args.input)?;
    let half_width = args.width / 2;
    let out = match args.method {
        FilterArg::Sg => savitzky_golay(
            &signal,
            &SgFilterSpec {
                half_width,
                degree: args.degree,
            },
        )?,
        FilterArg::Ma => moving_average(&signal, half_width)?,
    };
    let csv = out.to_csv_string(("x", "y"));
    match args.output {
        Some(path) => write_file(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn file_stem(method: &str) -> String {
    method.replace(':', "_")
}

fn compare(args: CompareArgs) -> CliResult<()> {
    let mut scn = load_scenario(&args.scenario)?;
    apply_solver_flags(&mut scn, &args.solver)?;
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<_, _>>()?;
    let (noisy, clean) = inputs(&mut scn, args.input.as_deref(), args.clean.as_deref())?;
    let cmp = pipeline::compare(&scn, &noisy, clean.as_ref(), &methods);
    let dir = &args.out.out;
    create_dir(dir)?;
    for (name, s) in &cmp.outputs {
        write_file(
            &dir.join(format!("method_{}.csv", file_stem(name))),
            &s.to_csv_string(("x", "y")),
        )?;
    }
    let csv = cmp.to_csv();
    write_file(&dir.join("comparison.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&cmp).map_err(anidiff::Error::from)?;
    write_file(&dir.join("comparison.json"), &json)?;
    write_file(&dir.join("scenario.json"), &scn.to_json())?;
    if args.svg {
        let mut series = vec![("noisy".to_string(), &noisy)];
        series.extend(cmp.outputs.iter().map(|(n, s)| (n.clone(), s)));
        write_file(&dir.join("plot.svg"), &svg::line_plot(&scn.name, &series))?;
    }
    print!("{csv}");
    Ok(())
}

fn metrics(args: MetricsArgs) -> CliResult<()> {
    let smoothed = read_signal(&args.smoothed)?;
    let noisy = read_signal(&args.noisy)?;
    let clean = args.clean.as_deref().map(read_signal).transpose()?;
    let report = pipeline::measure(
        &smoothed,
        &noisy,
        clean.as_ref(),
        [args.interval[0], args.interval[1]],
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(anidiff::Error::from)?
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Smooth(a) => smooth(a),
        Command::Baseline(a) => baseline(a),
        Command::Compare(a) => compare(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
