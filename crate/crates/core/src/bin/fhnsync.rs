use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fhnsync::config::RunConfig;
use fhnsync::io::RunManifest;
use fhnsync::lab::{self, FitModel, ThresholdResult, TopologyKind};
use fhnsync::network::{load_matrix, CouplingMatrix};
use fhnsync::simulator::run;
use fhnsync::sync_theory::{check_sync_condition, TieBreak};
use fhnsync::{Error, Result};

/// Synchronization experiments on networks of FitzHugh-Nagumo
/// reaction-diffusion systems.
#[derive(Parser)]
#[command(name = "fhnsync", version)]
struct Cli {
    /// Output directory for every produced file and the manifest.
    #[arg(long, global = true, default_value = "fhnsync-out")]
    out: PathBuf,

    /// Worker threads; 0 or unset uses every available core.
    #[arg(long, global = true, env = "FHNSYNC_WORKERS", default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one network and write its trace and snapshots.
    Simulate(ConfigArg),
    /// Search the minimal synchronizing coupling strength.
    Threshold(ThresholdArgs),
    /// Threshold against node count or against the random-start percentage.
    Sweep(SweepArgs),
    /// Per-edge path loads and the sufficient synchronization condition.
    Alpha(AlphaArgs),
    /// Fit a scaling law to a sweep table.
    Fit(FitArgs),
    /// Check a coupling matrix file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration; every key defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Non-synchronizing lower end; overrides `threshold.g_lo`.
    #[arg(long)]
    g_lo: Option<f64>,
    /// Synchronizing upper end; overrides `threshold.g_hi`.
    #[arg(long)]
    g_hi: Option<f64>,
    /// Final bracket width.
    #[arg(long)]
    resolution: Option<f64>,
    /// Exhaustive scan instead of bisection.
    #[arg(long)]
    scan: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// complete, ring or file; overrides `network.topology`.
    #[arg(long)]
    topology: Option<TopologyKind>,
    /// First node count (inclusive).
    #[arg(long, conflicts_with = "p_list")]
    n_from: Option<usize>,
    /// Last node count (inclusive).
    #[arg(long, conflicts_with = "p_list")]
    n_to: Option<usize>,
    /// Comma-separated percentages; sweeps p at the configured node count.
    #[arg(long, value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct AlphaArgs {
    /// Built-in topology: complete or ring.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    topology: Option<TopologyKind>,
    /// Node count of the built-in topology.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Coupling strength applied to a built-in topology.
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    /// Coupling matrix file instead of a built-in topology.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Minimal-path choice: lexicographic or ring_alternating.
    #[arg(long, default_value = "lexicographic")]
    tie_break: TieBreak,
    /// Node constant `a` of the condition `a α_kl / n < ε_kl`.
    #[arg(long, default_value_t = 40530.0)]
    a_const: f64,
}

#[derive(Args)]
struct FitArgs {
    /// inverse_n or quadratic.
    #[arg(long)]
    model: FitModel,
    /// Sweep table; its first column is the regressor.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Matrix file: one row per line, entries separated by spaces or commas.
    #[arg(long)]
    matrix: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: kind=config msg={e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = cli.out;
    match cli.command {
        Command::Simulate(a) => simulate(a, RunManifest::new("simulate", args, &out)),
        Command::Threshold(a) => threshold(a, RunManifest::new("threshold", args, &out)),
        Command::Sweep(a) => sweep(a, RunManifest::new("sweep", args, &out)),
        Command::Alpha(a) => alpha(a, RunManifest::new("alpha", args, &out)),
        Command::Fit(a) => fit(a, RunManifest::new("fit", args, &out)),
        Command::Validate(a) => validate(a, RunManifest::new("validate", args, &out)),
    }
}

/// The parsed config and the directory its relative paths resolve against.
fn load_config(arg: &ConfigArg) -> Result<(RunConfig, PathBuf)> {
    match &arg.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((RunConfig::parse(&text)?, dir))
        }
        None => Ok((RunConfig::default(), PathBuf::from("."))),
    }
}

fn echo_config(manifest: &mut RunManifest, cfg: &RunConfig) -> Result<()> {
    let text = cfg.to_toml();
    manifest.write("config.toml", "config", text.as_bytes())?;
    manifest.config = Some(text);
    manifest.seed = Some(cfg.seed);
    Ok(())
}

fn simulate(a: ConfigArg, mut manifest: RunManifest) -> Result<()> {
    let (cfg, dir) = load_config(&a)?;
    let sim = cfg.sim_config(&dir)?;
    echo_config(&mut manifest, &cfg)?;
    let criterion = cfg.criterion();
    let output = match run(&sim) {
        Ok(o) => o,
        Err(failure) => {
            manifest.write("trace.csv", "partial_trace", failure.partial.to_csv().as_bytes())?;
            manifest.finish()?;
            return Err(failure.error);
        }
    };
    manifest.write(
        "trace.csv",
        "trace",
        output.trace.to_csv_with_verdict(&criterion).as_bytes(),
    )?;
    manifest.write_snapshots(&output.snapshots)?;
    let synced = fhnsync::diagnostics::is_synchronized(&output.trace, criterion.tol_rel, criterion.window_frac);
    let final_error = output.trace.final_error();
    manifest.finish()?;
    match (synced, final_error) {
        (Ok(s), Some(e)) => println!("synchronized={s} final_error={e:e}"),
        _ => println!("synchronized=undetermined samples=0"),
    }
    Ok(())
}

fn evaluations_csv(r: &ThresholdResult<f64>) -> String {
    let mut out = String::from("g,synchronized,final_error\n");
    for e in &r.evaluations {
        out.push_str(&format!("{},{},{}\n", e.g, e.synchronized, e.final_error));
    }
    out
}

fn threshold(a: ThresholdArgs, mut manifest: RunManifest) -> Result<()> {
    let (mut cfg, dir) = load_config(&a.config)?;
    cfg.threshold.g_lo = a.g_lo.unwrap_or(cfg.threshold.g_lo);
    cfg.threshold.g_hi = a.g_hi.unwrap_or(cfg.threshold.g_hi);
    cfg.threshold.resolution = a.resolution.unwrap_or(cfg.threshold.resolution);
    let base = cfg.unit_sim_config(&dir)?;
    echo_config(&mut manifest, &cfg)?;
    let kind = cfg.network.topology.into();
    let search = cfg.search();
    let start = std::time::Instant::now();
    let result = if a.scan {
        lab::scan_threshold(&base, kind, &search)
    } else {
        lab::find_threshold_expanding(&base, kind, &search)
    }?;
    let entry = lab::SweepEntry {
        key: result.n as f64,
        wall_time: start.elapsed().as_secs_f64(),
        result: Ok(result.clone()),
    };
    manifest.write("threshold.csv", "sweep_table", lab::sweep_to_csv("n", &[entry]).as_bytes())?;
    manifest.write("evaluations.csv", "evaluations", evaluations_csv(&result).as_bytes())?;
    manifest.finish()?;
    println!(
        "g_star={} bracket_lo={} bracket_hi={} evaluations={} method={:?}",
        result.g_star,
        result.bracket.0,
        result.bracket.1,
        result.evaluations.len(),
        result.method
    );
    Ok(())
}

fn sweep(a: SweepArgs, mut manifest: RunManifest) -> Result<()> {
    let (mut cfg, dir) = load_config(&a.config)?;
    if let Some(t) = a.topology {
        cfg.network.topology = t.into();
    }
    cfg.sweep.n_from = a.n_from.unwrap_or(cfg.sweep.n_from);
    cfg.sweep.n_to = a.n_to.unwrap_or(cfg.sweep.n_to);
    if let Some(p) = a.p_list {
        cfg.sweep.p_list = p;
    }
    let base = cfg.unit_sim_config(&dir)?;
    echo_config(&mut manifest, &cfg)?;
    let search = cfg.search();
    let (key, entries) = if cfg.sweep.p_list.is_empty() {
        if cfg.sweep.n_from > cfg.sweep.n_to {
            return Err(Error::Config(format!(
                "empty node range {}..={}",
                cfg.sweep.n_from, cfg.sweep.n_to
            )));
        }
        let ns: Vec<usize> = (cfg.sweep.n_from..=cfg.sweep.n_to).collect();
        let topology = cfg.topology(&dir)?;
        ("n", lab::sweep_n(&topology, &ns, &base, &search)?)
    } else {
        let kind = cfg.network.topology.into();
        ("p", lab::sweep_p(kind, &cfg.sweep.p_list, &base, &search)?)
    };
    let table = lab::sweep_to_csv(key, &entries);
    manifest.write("sweep.csv", "sweep_table", table.as_bytes())?;
    manifest.finish()?;
    print!("{table}");
    Ok(())
}

fn alpha(a: AlphaArgs, mut manifest: RunManifest) -> Result<()> {
    let matrix = match (&a.matrix, a.topology) {
        (Some(path), _) => load_matrix::<f64>(&std::fs::read_to_string(path)?)?,
        (None, Some(TopologyKind::Complete)) => CouplingMatrix::complete(a.n, a.g)?,
        (None, Some(TopologyKind::Ring)) => CouplingMatrix::ring_unidirectional(a.n, a.g)?,
        (None, _) => return Err(Error::Config("topology `file` needs --matrix".into())),
    };
    let report = check_sync_condition(&matrix, a.a_const, a.tie_break)?;
    let mut csv = String::from("k,l,epsilon_kl,alpha_kl,required_epsilon,margin\n");
    for e in &report.edges {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.k + 1,
            e.l + 1,
            e.epsilon,
            e.alpha,
            e.required,
            e.margin
        ));
    }
    manifest.write("alpha.csv", "alpha_table", csv.as_bytes())?;
    manifest.finish()?;
    print!("{csv}");
    Ok(())
}

fn fit(a: FitArgs, mut manifest: RunManifest) -> Result<()> {
    let (_, rows) = lab::sweep_from_csv(&std::fs::read_to_string(&a.input)?)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.key, r.g_star)).collect();
    let result = match a.model {
        FitModel::InverseN => lab::fit_inverse_n(&points)?,
        FitModel::Quadratic => lab::fit_quadratic(&points)?,
    };
    let csv = result.to_csv();
    manifest.write("fit.csv", "fit", csv.as_bytes())?;
    manifest.finish()?;
    print!("{csv}");
    Ok(())
}

fn validate(a: ValidateArgs, mut manifest: RunManifest) -> Result<()> {
    let m = load_matrix::<f64>(&std::fs::read_to_string(&a.matrix)?)?;
    let symmetric = (0..m.n()).all(|i| (0..m.n()).all(|k| m.get(i, k) == m.get(k, i)));
    let line = format!("valid n={} edges={} symmetric={symmetric}\n", m.n(), m.edges().len());
    manifest.write("validation.txt", "report", line.as_bytes())?;
    manifest.finish()?;
    print!("{line}");
    Ok(())
}
