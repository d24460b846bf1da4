use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use reflected_spectral::adaptive::{lepski_select, AdaptiveError};
use reflected_spectral::bound_check::run_bound_trials;
use reflected_spectral::estimators::{EstimatorError, Pipeline};
use reflected_spectral::harness::{misspecified_baseline, run_monte_carlo, ExperimentConfig, HarnessError, ModelSpec};
use reflected_spectral::io::{
    lepski_report_text, plot_file_name, read_observations, report_table, write_curve, write_lepski_csv,
    write_matrix, write_observations, write_path_grid, write_plot_data, write_report_csv, IoError,
};
use reflected_spectral::sde_sim::{draw_gaps, sample_observations, simulate_observations, simulate_path};
use reflected_spectral::{Observations, Scheme};

#[derive(Parser, Debug)]
#[command(name = "refspec", version, about = "Spectral volatility and drift estimation for reflected diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a path and write the sampled observations.
    Simulate(SimulateArgs),
    /// Estimate volatility (and optionally drift) at a fixed dimension.
    Estimate(EstimateArgs),
    /// Choose the dimension adaptively and write the selected curve and report.
    Adapt(AdaptArgs),
    /// Monte Carlo RMISE study.
    Benchmark(BenchmarkArgs),
    /// Randomized check of the residual and Weyl eigenvalue bounds.
    GsepCheck(GsepArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML experiment file supplying model, step and initial condition.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "deterministic")]
    scheme: String,
    #[arg(long)]
    mean_gap: Option<f64>,
    #[arg(long, short = 'n', default_value_t = 4000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the Euler grid as a binary column.
    #[arg(long)]
    path_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    drift_out: Option<PathBuf>,
    /// Directory receiving `gram.csv` and `transition.csv`.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AdaptArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Human-readable selection report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    report_csv: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV path.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// 1000 replications per cell.
    #[arg(long)]
    full: bool,
    /// Include the estimator that ignores random sampling.
    #[arg(long)]
    baseline: bool,
    /// Only the misspecified estimator.
    #[arg(long, conflicts_with = "baseline")]
    baseline_only: bool,
    /// Write `x,true,estimate` files for the first replications of each cell.
    #[arg(long)]
    emit_curves: Option<PathBuf>,
    #[arg(long, default_value_t = 3, requires = "emit_curves")]
    emit_count: usize,
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct GsepArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Fixed order; sizes 2..=8 when omitted.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => Self::Config(e.to_string()),
            HarnessError::Estimator(EstimatorError::InvalidConfig(_)) => Self::Config(e.to_string()),
            HarnessError::Adaptive(AdaptiveError::InvalidConfig(_)) => Self::Config(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<AdaptiveError> for Failure {
    fn from(e: AdaptiveError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
            Ok(ExperimentConfig::from_toml(&text)?)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn read_input(path: &Path) -> Result<Observations, Failure> {
    let file = File::open(path).map_err(|e| Failure::Runtime(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_observations(BufReader::new(file))?)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(p) = args.preset {
        cfg.model = ModelSpec::preset(&p);
    }
    if let Some(g) = args.mean_gap {
        cfg.mean_gap = g;
    }
    let model = cfg.model.build()?;
    let scheme = Scheme::from_name(&args.scheme, cfg.mean_gap)
        .ok_or_else(|| Failure::Config(format!("unknown sampling scheme `{}`", args.scheme)))?;
    let initial = cfg.initial_condition()?;
    let runtime = |e: reflected_spectral::sde_sim::SimError| Failure::Runtime(e.to_string());
    let obs = match &args.path_out {
        Some(path_out) => {
            let total: f64 = draw_gaps(&scheme, args.samples, args.seed).map_err(runtime)?.iter().sum();
            let path = simulate_path(&model, total + cfg.step, cfg.step, args.seed, initial).map_err(runtime)?;
            write_path_grid(create(path_out)?, &path)?;
            sample_observations(&path, &scheme, args.samples, args.seed).map_err(runtime)?
        }
        None => simulate_observations(&model, &scheme, args.samples, cfg.step, args.seed, initial).map_err(runtime)?,
    };
    write_observations(create(&args.out)?, &obs)?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    if args.dim == 0 {
        return Err(Failure::Config("--dim must be at least 1".into()));
    }
    let obs = read_input(&args.input)?;
    let pipeline = Pipeline::new(cfg.estimator_config(), args.dim)?;
    let prepared = pipeline.prepare(&obs, args.dim)?;
    if let Some(dir) = &args.dump_matrices {
        fs::create_dir_all(dir)?;
        write_matrix(create(&dir.join("gram.csv"))?, prepared.matrices.gram.matrix())?;
        write_matrix(create(&dir.join("transition.csv"))?, prepared.matrices.transition.matrix())?;
    }
    let pair = pipeline.principal_pair(&prepared, args.dim);
    if !pair.valid {
        eprintln!("warning: no admissible eigenpair; volatility falls back to the cap");
    }
    let triple = pipeline.triple(&prepared, pair, reflected_spectral::EigenvalueInversion::EmpiricalLaplace);
    let vol = pipeline.volatility(&triple);
    write_curve(create(&args.out)?, &vol, obs.num_gaps())?;
    if let Some(p) = &args.drift_out {
        let drift = pipeline.drift(&triple, &vol);
        write_curve(create(p)?, &drift, obs.num_gaps())?;
    }
    Ok(())
}

fn adapt(args: AdaptArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let obs = read_input(&args.input)?;
    let mut lc = cfg.lepski_config(obs.num_gaps())?;
    if let Some(l) = args.lambda {
        lc.lambda = l;
    }
    let result = lepski_select(&obs, &lc, &cfg.estimator_config())?;
    write_curve(create(&args.out)?, &result.curve, obs.num_gaps())?;
    let text = lepski_report_text(&result);
    match &args.report {
        Some(p) => create(p)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(p) = &args.report_csv {
        write_lepski_csv(create(p)?, &result)?;
    }
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(p) = args.preset {
        cfg.model = ModelSpec::preset(&p);
    }
    if let Some(n) = args.iters {
        cfg.mc_iterations = n;
    }
    if args.full {
        cfg.mc_iterations = 1000;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.sample_sizes {
        cfg.sample_sizes = n;
    }
    if let Some(s) = args.schemes {
        cfg.schemes = s;
    }
    cfg.baseline |= args.baseline;
    if args.emit_curves.is_some() {
        cfg.emit_curves = args.emit_count;
    }
    cfg.validate()?;
    let report = if args.baseline_only {
        misspecified_baseline(&cfg)?
    } else {
        run_monte_carlo(&cfg)?
    };
    write_report_csv(create(&args.out)?, &report)?;
    if let Some(dir) = &args.emit_curves {
        fs::create_dir_all(dir)?;
        for c in &report.curves {
            write_plot_data(create(&dir.join(plot_file_name(c)))?, c)?;
        }
    }
    print!("{}", report_table(&report));
    for cell in report.cells.iter().filter(|c| c.failures > 0) {
        for msg in &cell.failure_messages {
            eprintln!("{} N={}: {msg}", cell.scheme, cell.sample_size);
        }
    }
    Ok(())
}

fn gsep_check(args: GsepArgs) -> Result<(), Failure> {
    let sizes = match args.size {
        Some(0) | Some(1) => return Err(Failure::Config("--size must be at least 2".into())),
        Some(n) => n..=n,
        None => 2..=8,
    };
    let summary = run_bound_trials(args.trials, sizes, args.seed).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "trials: {}\nresidual bound violations: {}\nWeyl bound violations: {}\nexact-input max bound: {:e}\nworst error/bound ratio: {:.6}",
        summary.trials,
        summary.residual_violations,
        summary.weyl_violations,
        summary.exact_input_max_bound,
        summary.worst_ratio
    );
    if summary.passed() {
        println!("all bound checks passed");
        Ok(())
    } else {
        Err(Failure::Runtime("bound check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Adapt(a) => adapt(a),
        Command::Benchmark(a) => benchmark(a),
        Command::GsepCheck(a) => gsep_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}\n\n{}", Cli::command().render_usage()),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
