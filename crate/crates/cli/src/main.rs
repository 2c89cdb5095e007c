//! `mvnet`: simulate multiview graph data, fit the joint model by Gibbs
//! sampling, evaluate fits against truths or held-out data, aggregate
//! replication reports, and run sampler-correctness checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mvnet::dist::Rng;
use mvnet::io::{self, DatasetBundle, RunMeta, TruthFile};
use mvnet::metrics::{self, EvaluationReport, TruthRef};
use mvnet::sampler::{self, checks, geweke, ChainOutput, Fault};
use mvnet::simulate::{self, Scenario};
use mvnet::ModelConfig;

#[derive(Parser)]
#[command(name = "mvnet", version, about = "Bayesian joint learning of multiview graph responses")]
struct Cli {
    /// Worker pool size (overrides the MVNET_WORKERS environment variable).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress progress logging.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle (and truth file) from a scenario.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset bundle.
    Fit(FitArgs),
    /// Score a fit against a truth file and/or held-out data.
    Evaluate(EvaluateArgs),
    /// Aggregate replication reports into one mean/stderr report.
    Report(ReportArgs),
    /// Run a sampler-correctness harness; exits nonzero on failure.
    Check(CheckArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "scenario_json"]))]
struct SimulateArgs {
    /// Registered scenario name (see `--list`).
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario definition from a JSON file.
    #[arg(long)]
    scenario_json: Option<PathBuf>,
    /// Base seed; replication r uses generator stream r.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications (default: the scenario's).
    #[arg(long)]
    replications: Option<usize>,
    /// Hold out this many trailing subjects into a separate bundle.
    #[arg(long)]
    heldout: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Joint learning across all views.
    Jl,
    /// Independent learning: one single-view fit per view.
    Il,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    data: PathBuf,
    /// JSON model configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jl")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    a_eta: Option<f64>,
    #[arg(long)]
    b_eta: Option<f64>,
    #[arg(long)]
    a_sigma: Option<f64>,
    #[arg(long)]
    b_sigma: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    n_burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["fit", "reps"]))]
struct EvaluateArgs {
    /// One fit directory (as written by `fit`).
    #[arg(long)]
    fit: Option<PathBuf>,
    /// A directory of `rep_*` replication directories, each holding a
    /// dataset bundle, `truth.json` and a `fit/` subdirectory.
    #[arg(long)]
    reps: Option<PathBuf>,
    /// Truth file for coefficient and node-selection metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Held-out dataset bundle for predictive metrics.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory whose immediate subdirectories contain `report.csv` files.
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[command(subcommand)]
    kind: CheckKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    InterceptVariance,
    SlabVariance,
}

#[derive(Subcommand)]
enum CheckKind {
    /// Geweke joint-distribution test at desk scale (n=3, K=4, R=2, M=2).
    Geweke {
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inject a deliberate bug; the check then passes only if detected.
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
    /// Monte Carlo diagnostics of the rank-indicator prior.
    Prior {
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 2.0)]
        omega: f64,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Grid-oracle check of every scalar conditional.
    Conjugacy {
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 2001)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Off
        } else {
            log::LevelFilter::Info
        })
        .format_timestamp(None)
        .init();
    let workers = cli.workers.or_else(|| {
        std::env::var("MVNET_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut scenario: Scenario = if let Some(name) = &args.scenario {
        simulate::named_scenario(name).ok_or_else(|| {
            anyhow!(
                "unknown scenario {name:?}; registered: {}",
                simulate::scenario_names().join(", ")
            )
        })?
    } else {
        io::read_json(args.scenario_json.as_ref().unwrap())?
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(reps) = args.replications {
        scenario.replications = reps;
    }
    scenario.validate()?;
    if let Some(h) = args.heldout {
        if h == 0 || h >= scenario.n {
            bail!("--heldout must lie in 1..{}", scenario.n);
        }
    }
    let reps = scenario.replications;
    let meta = RunMeta {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: scenario.seed,
        dataset: None,
        mode: None,
        chains: None,
        scenario: Some(scenario.clone()),
        config: None,
        sources: BTreeMap::new(),
    };
    io::write_run_meta(&meta, &args.out)?;
    for rep in 0..reps {
        let dir = if reps == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("rep_{rep:03}"))
        };
        let mut rng = Rng::for_stream(scenario.seed, rep as u64);
        let truth = simulate::generate_truth(&scenario, &mut rng)?;
        let data = simulate::generate_dataset(&truth, &scenario, &mut rng)?;
        let (train, heldout) = match args.heldout {
            Some(h) => {
                let (a, b) = data.split(scenario.n - h)?;
                (a, Some(b))
            }
            None => (data, None),
        };
        io::write_dataset(&train, &DatasetBundle::new(&dir))?;
        io::write_json(
            &dir.join(io::TRUTH_FILE),
            &TruthFile::new(&truth, &scenario, scenario.seed, rep),
        )?;
        if let Some(held) = heldout {
            io::write_dataset(&held, &DatasetBundle::new(dir.join("heldout")))?;
        }
        log::info!("wrote replication {rep} under {}", dir.display());
    }
    Ok(())
}

/// Resolve the model configuration with precedence flag > file > default,
/// recording each field's source.
fn resolve_config(args: &FitArgs) -> Result<(ModelConfig, BTreeMap<String, String>)> {
    let mut sources = BTreeMap::new();
    let (mut cfg, from_file): (ModelConfig, bool) = match &args.config {
        Some(path) => (io::read_json(path)?, true),
        None => (ModelConfig::default(), false),
    };
    let base = if from_file { "file" } else { "default" };
    for key in [
        "r", "omega", "a_eta", "b_eta", "a_sigma", "b_sigma", "nu", "n_iter", "n_burnin", "thin",
        "seed",
    ] {
        sources.insert(key.to_string(), base.to_string());
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = args.$field {
                cfg.$field = v;
                sources.insert(stringify!($field).to_string(), "flag".to_string());
            }
        };
    }
    flag!(r);
    flag!(omega);
    flag!(a_eta);
    flag!(b_eta);
    flag!(a_sigma);
    flag!(b_sigma);
    flag!(seed);
    flag!(n_iter);
    flag!(n_burnin);
    flag!(thin);
    if let Some(nu) = args.nu {
        cfg.nu = Some(nu);
        sources.insert("nu".into(), "flag".into());
    }
    Ok((cfg, sources))
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Jl => "jl",
        Mode::Il => "il",
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (config, sources) = resolve_config(&args)?;
    if args.chains == 0 {
        bail!("--chains must be at least 1");
    }
    let data = io::read_dataset(&DatasetBundle::new(&args.data))?;
    config.validate(match args.mode {
        Mode::Jl => data.n_views(),
        Mode::Il => 1,
    })?;
    let meta = RunMeta {
        command: "fit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        dataset: Some(args.data.display().to_string()),
        mode: Some(mode_name(args.mode).into()),
        chains: Some(args.chains),
        scenario: None,
        config: Some(config.clone()),
        sources,
    };
    io::write_run_meta(&meta, &args.out)?;
    match args.mode {
        Mode::Jl => {
            let chains = sampler::run_chains(&data, &config, args.chains)?;
            for (c, chain) in chains.iter().enumerate() {
                io::write_chain_summary(chain, &args.out.join(format!("chain_{c}")))?;
            }
        }
        Mode::Il => {
            let per_view = sampler::run_independent(&data, &config, args.chains)?;
            for (m, chains) in per_view.iter().enumerate() {
                for (c, chain) in chains.iter().enumerate() {
                    io::write_chain_summary(
                        chain,
                        &args.out.join(format!("view_{}", m + 1)).join(format!("chain_{c}")),
                    )?;
                }
            }
        }
    }
    log::info!("fit written to {}", args.out.display());
    Ok(())
}

/// Re-run the chains recorded in a fit directory's metadata. Determinism of
/// the sampler makes this reproduce the retained draws exactly.
fn rerun_chains(meta: &RunMeta, fit_dir: &Path) -> Result<(Vec<ChainOutput>, Option<Vec<Vec<ChainOutput>>>)> {
    let config = meta
        .config
        .clone()
        .ok_or_else(|| anyhow!("run_meta.json lacks a model config"))?;
    let dataset_path = meta
        .dataset
        .as_ref()
        .ok_or_else(|| anyhow!("run_meta.json lacks a dataset path"))?;
    // Paths are stored as given on the original command line; try them
    // both verbatim and relative to the fit directory's parent.
    let candidates = [
        PathBuf::from(dataset_path),
        fit_dir.parent().unwrap_or(fit_dir).join(dataset_path),
    ];
    let bundle_dir = candidates
        .iter()
        .find(|p| p.join(io::MANIFEST_FILE).exists())
        .ok_or_else(|| anyhow!("dataset bundle {dataset_path} not found"))?;
    let data = io::read_dataset(&DatasetBundle::new(bundle_dir))?;
    let chains = meta.chains.unwrap_or(1);
    match meta.mode.as_deref() {
        Some("il") => {
            let per_view = sampler::run_independent(&data, &config, chains)?;
            Ok((Vec::new(), Some(per_view)))
        }
        _ => Ok((sampler::run_chains(&data, &config, chains)?, None)),
    }
}

/// Pool retained draws of several chains into one output.
fn pool_chains(mut chains: Vec<ChainOutput>) -> ChainOutput {
    let mut pooled = chains.remove(0);
    for chain in chains {
        pooled.mu.extend(chain.mu);
        pooled.sigma2.extend(chain.sigma2);
        pooled.alpha.extend(chain.alpha);
        pooled.eta.extend(chain.eta);
        pooled.lambda.extend(chain.lambda);
        pooled.xi.extend(chain.xi);
        pooled.gamma.extend(chain.gamma);
        pooled.log_likelihood.extend(chain.log_likelihood);
    }
    pooled
}

fn load_truth(path: &Path) -> Result<TruthFile> {
    let file: TruthFile = io::read_json(path)?;
    Ok(file)
}

fn evaluate_one_fit(
    fit_dir: &Path,
    truth: Option<&TruthFile>,
    heldout_dir: Option<&Path>,
) -> Result<EvaluationReport> {
    if truth.is_none() && heldout_dir.is_none() {
        bail!("evaluate needs --truth and/or --heldout");
    }
    let meta = io::read_run_meta(fit_dir)?;
    let is_il = meta.mode.as_deref() == Some("il");
    let heldout = heldout_dir
        .map(|d| io::read_dataset(&DatasetBundle::new(d)))
        .transpose()?;

    if heldout.is_none() {
        // Truth-only scoring works straight off the summary files.
        let truth = truth.unwrap();
        if !is_il {
            let n_chains = meta.chains.unwrap_or(1);
            let reports: Vec<EvaluationReport> = (0..n_chains)
                .map(|c| {
                    let summary = io::read_chain_summary(&fit_dir.join(format!("chain_{c}")))?;
                    metrics::evaluate_summary(
                        &summary,
                        TruthRef {
                            gamma0: &truth.gamma0,
                            xi0: &truth.xi0,
                        },
                    )
                })
                .collect::<mvnet::Result<_>>()?;
            return Ok(if reports.len() == 1 {
                reports.into_iter().next().unwrap()
            } else {
                metrics::aggregate_reports(&reports)
            });
        }
        // Independent fits: score each view's summary against its own slice,
        // then relabel the view column.
        let mut rows = Vec::new();
        for m in 0..truth.gamma0.len() {
            let n_chains = meta.chains.unwrap_or(1);
            let reports: Vec<EvaluationReport> = (0..n_chains)
                .map(|c| {
                    let dir = fit_dir.join(format!("view_{}", m + 1)).join(format!("chain_{c}"));
                    let summary = io::read_chain_summary(&dir)?;
                    metrics::evaluate_summary(
                        &summary,
                        TruthRef {
                            gamma0: std::slice::from_ref(&truth.gamma0[m]),
                            xi0: &truth.xi0,
                        },
                    )
                })
                .collect::<mvnet::Result<_>>()?;
            let view_report = if reports.len() == 1 {
                reports.into_iter().next().unwrap()
            } else {
                metrics::aggregate_reports(&reports)
            };
            for mut row in view_report.rows {
                if row.view.is_some() {
                    row.view = Some(m + 1);
                } else {
                    // Node-selection rows are per view under IL.
                    row.view = Some(m + 1);
                }
                rows.push(row);
            }
        }
        return Ok(EvaluationReport {
            rows,
            pips: Vec::new(),
        });
    }

    // Predictive metrics need per-draw states: re-run deterministically.
    let heldout = heldout.unwrap();
    log::info!("re-running {} chains from run_meta for predictive evaluation", meta.chains.unwrap_or(1));
    let (jl_chains, il_chains) = rerun_chains(&meta, fit_dir)?;
    if let Some(per_view) = il_chains {
        let mut rows = Vec::new();
        for (m, chains) in per_view.into_iter().enumerate() {
            let pooled = pool_chains(chains);
            let truth_ref = truth.map(|t| TruthRef {
                gamma0: std::slice::from_ref(&t.gamma0[m]),
                xi0: &t.xi0,
            });
            let single_held = heldout.single_view(m);
            let mut rng = Rng::for_stream(meta.seed ^ 0x9e3779b97f4a7c15, m as u64);
            let report = metrics::evaluate_chain(&pooled, truth_ref, Some(&single_held), &mut rng)?;
            for mut row in report.rows {
                row.view = Some(m + 1);
                rows.push(row);
            }
        }
        Ok(EvaluationReport {
            rows,
            pips: Vec::new(),
        })
    } else {
        let pooled = pool_chains(jl_chains);
        let truth_ref = truth.map(|t| TruthRef {
            gamma0: &t.gamma0,
            xi0: &t.xi0,
        });
        let mut rng = Rng::for_stream(meta.seed ^ 0x9e3779b97f4a7c15, 0);
        Ok(metrics::evaluate_chain(&pooled, truth_ref, Some(&heldout), &mut rng)?)
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    if let Some(fit_dir) = &args.fit {
        let truth = args.truth.as_deref().map(load_truth).transpose()?;
        let report = evaluate_one_fit(fit_dir, truth.as_ref(), args.heldout.as_deref())?;
        let path = args.out.join(io::REPORT_FILE);
        io::write_report(&report, &path)?;
        log::info!("report written to {}", path.display());
        return Ok(());
    }
    // Replication mode: each rep_* directory holds a bundle, truth.json,
    // optional heldout/ bundle, and a fit/ subdirectory.
    let reps_dir = args.reps.as_ref().unwrap();
    let mut rep_dirs: Vec<PathBuf> = std::fs::read_dir(reps_dir)
        .map_err(|e| anyhow!("reading {}: {e}", reps_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("rep_"))
        })
        .collect();
    rep_dirs.sort();
    if rep_dirs.is_empty() {
        bail!("no rep_* directories under {}", reps_dir.display());
    }
    let mut reports = Vec::new();
    for rep in &rep_dirs {
        let truth_path = rep.join(io::TRUTH_FILE);
        let truth = truth_path.exists().then(|| load_truth(&truth_path)).transpose()?;
        let heldout = rep.join("heldout");
        let heldout = heldout.join(io::MANIFEST_FILE).exists().then_some(heldout);
        let report = evaluate_one_fit(&rep.join("fit"), truth.as_ref(), heldout.as_deref())
            .with_context(|| format!("evaluating {}", rep.display()))?;
        io::write_report(&report, &rep.join(io::REPORT_FILE))?;
        reports.push(report);
    }
    let aggregate = metrics::aggregate_reports(&reports);
    let path = args.out.join(io::REPORT_FILE);
    io::write_report(&aggregate, &path)?;
    log::info!(
        "aggregated {} replications into {}",
        reports.len(),
        path.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut report_files: Vec<PathBuf> = std::fs::read_dir(&args.from)
        .map_err(|e| anyhow!("reading {}: {e}", args.from.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(io::REPORT_FILE).exists())
        .map(|p| p.join(io::REPORT_FILE))
        .collect();
    report_files.sort();
    if report_files.is_empty() {
        bail!(
            "no subdirectory of {} contains {}",
            args.from.display(),
            io::REPORT_FILE
        );
    }
    let reports: Vec<EvaluationReport> = report_files
        .iter()
        .map(|p| io::read_report(p))
        .collect::<mvnet::Result<_>>()?;
    let aggregate = metrics::aggregate_reports(&reports);
    io::write_report(&aggregate, &args.out)?;
    log::info!(
        "aggregated {} reports into {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    match args.kind {
        CheckKind::Geweke {
            samples,
            seed,
            fault,
        } => {
            let fault_kind = match fault {
                None => Fault::None,
                Some(FaultArg::InterceptVariance) => Fault::InterceptVarianceHalved,
                Some(FaultArg::SlabVariance) => Fault::SlabVarianceHalved,
            };
            let cfg = geweke::GewekeConfig::desk(samples, seed, fault_kind);
            let report = geweke::geweke_joint_test(&cfg)?;
            println!("geweke joint-distribution test ({samples} samples, fault {fault_kind:?})");
            for s in &report.statistics {
                println!(
                    "  {:16} z = {:7.2}  marginal {:9.4}  successive {:9.4}",
                    s.name, s.z, s.mean_marginal, s.mean_successive
                );
            }
            let max_z = report.max_abs_z();
            match fault_kind {
                Fault::None => {
                    println!("max |z| = {max_z:.2} (threshold 4)");
                    if max_z >= 4.0 {
                        bail!("geweke check failed: max |z| = {max_z:.2} >= 4");
                    }
                }
                _ => {
                    println!("max |z| = {max_z:.2} (fault should push some |z| above 6)");
                    if max_z <= 6.0 {
                        bail!("fault injection undetected: max |z| = {max_z:.2} <= 6");
                    }
                }
            }
        }
        CheckKind::Prior {
            r,
            omega,
            draws,
            seed,
        } => {
            let d = checks::prior_diagnostics(r, omega, draws, seed)?;
            println!("rank-indicator prior diagnostics (R={r}, omega={omega}, {draws} draws)");
            println!(
                "  P(all lambda = 1): estimate {} vs analytic {} (se {}, lower bound {})",
                d.all_ones_estimate, d.all_ones_analytic, d.all_ones_std_error, d.all_ones_lower_bound
            );
            for row in &d.abs_lambda {
                println!(
                    "  E|lambda^({})|: estimate {} vs analytic {} (se {})",
                    row.rank, row.estimate, row.analytic, row.std_error
                );
            }
            if !d.passes(3.0) {
                bail!("prior diagnostics outside 3 standard errors");
            }
            println!("all within 3 standard errors");
        }
        CheckKind::Conjugacy { draws, grid, seed } => {
            let report = checks::conjugacy_check(draws, grid, seed)?;
            println!(
                "conjugacy grid oracles ({} draws, {}-point grids)",
                report.n_draws, report.grid_points
            );
            for row in &report.rows {
                println!("  {:10} max CDF gap {:.5}", row.name, row.max_cdf_gap);
            }
            let max = report.max_gap();
            if max >= 0.01 {
                bail!("conjugacy check failed: max CDF gap {max:.5} >= 0.01");
            }
            println!("max gap {max:.5} < 0.01");
        }
    }
    Ok(())
}
