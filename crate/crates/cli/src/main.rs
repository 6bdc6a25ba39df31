use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coarsen::bounds::bounds_table;
use coarsen::clustering::{cluster_patients, compute_cluster_errors, Clustering, ClusteringMethod};
use coarsen::experiment::io::{read_csv, write_csv, write_json, RunRow};
use coarsen::experiment::{prepare_replications, run_scenario, simulate, summarize, InstanceSource, ScenarioConfig};
use coarsen::lp::{self, DispatchPlan};
use coarsen::metrics::psi;
use coarsen::par::Execution;
use coarsen::policies::PolicySpec;
use coarsen::synth::{generate_instance, ArrivalMode, GeneratorConfig};
use coarsen::{load_instance, BloodType, MatchingInstance};

#[derive(Parser)]
#[command(name = "coarsen", version, about = "Clustered online stochastic matching toolkit")]
struct Cli {
    /// Master seed for everything random.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance with planted clusters.
    Gen(GenArgs),
    /// Cluster the patients of an instance with a minimum cluster size.
    Cluster(ClusterArgs),
    /// Solve the dispatch LP, optionally over a clustering.
    Plan(PlanArgs),
    /// Run policies over Monte Carlo replications.
    Simulate(SimulateArgs),
    /// Tabulate the performance bounds over a grid of capacities.
    Bounds(BoundsArgs),
    /// Summarize run files and compare populations.
    Evaluate(EvaluateArgs),
    /// Run a full scenario from a JSON configuration.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator configuration (JSON); overrides the size flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    patients: usize,
    #[arg(long, default_value_t = 10)]
    groups: usize,
    #[arg(long, default_value_t = 20)]
    types: usize,
    #[arg(long, default_value_t = 100)]
    horizon: u32,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    bad_fraction: f64,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Minimum cluster size.
    #[arg(long)]
    b: usize,
    #[arg(long, default_value = "constrained-kmeans")]
    method: ClusteringMethod,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    clustering: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Dispatch plan; required by sampling policies.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Policy label, repeatable (e.g. sm-b, csm-uniform-resample, greedy).
    #[arg(long = "policy", required = true)]
    policies: Vec<PolicySpec>,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, value_enum, default_value_t = Arrivals::Poisson)]
    arrivals: Arrivals,
    /// Run replications on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arrivals {
    Poisson,
    IidRounds,
}

#[derive(Args)]
struct BoundsArgs {
    /// Comma-separated capacities.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,25,64,100")]
    b: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run index CSV as written by `simulate` or `scenario`.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Baseline policy for p-values; the same policy by default.
    #[arg(long)]
    baseline_policy: Option<PolicySpec>,
    #[arg(long)]
    baseline_b: Option<usize>,
    /// Reference population for PSI.
    #[arg(long, requires = "current")]
    baseline_instance: Option<PathBuf>,
    /// Population compared against the reference.
    #[arg(long, requires = "baseline_instance")]
    current: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Serialize)]
struct PsiRow {
    group: String,
    n_expected: usize,
    n_actual: usize,
    psi: Option<f64>,
    class: String,
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    format: Format,
}

impl Ctx {
    /// Writes a table as `<name>.csv` or `<name>.json`.
    fn table<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let path = match self.format {
            Format::Csv => {
                let p = self.out_dir.join(format!("{name}.csv"));
                write_csv(&p, rows)?;
                p
            }
            Format::Json => {
                let p = self.out_dir.join(format!("{name}.json"));
                write_json(&p, &rows)?;
                p
            }
        };
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn load(path: &Path) -> Result<MatchingInstance> {
    load_instance(path).with_context(|| format!("loading instance {}", path.display()))
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => {
            let mut c = GeneratorConfig::new(a.patients, a.groups, a.types, a.horizon);
            c.noise_delta = a.noise;
            c.eta = a.eta;
            c.bad_cluster_fraction = a.bad_fraction;
            c.seed = ctx.seed;
            c
        }
    };
    let (inst, truth) = generate_instance(&cfg)?;
    fs::create_dir_all(&ctx.out_dir)?;
    let path = ctx.file("instance.json");
    inst.save(&path)?;
    write_json(&ctx.file("truth.json"), &truth)?;
    println!("wrote {} ({} patients, {} donor types)", path.display(), inst.n_patients(), inst.n_donor_types());
    Ok(())
}

fn cluster(ctx: &Ctx, a: &ClusterArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let c = cluster_patients(&inst, a.b, a.method, ctx.seed)?;
    let report = compute_cluster_errors(&inst, &c)?;
    fs::create_dir_all(&ctx.out_dir)?;
    c.save(ctx.file("clustering.json"))?;
    let file = fs::File::create(ctx.file("cluster_errors.csv"))?;
    report.write_csv(&c, file)?;
    println!(
        "{} clusters (min size {}), delta_max {:.4}, nmae_max {:.4}",
        c.n_clusters(),
        c.sizes().into_iter().min().unwrap_or(0),
        report.delta_max,
        report.nmae_max
    );
    Ok(())
}

fn plan(ctx: &Ctx, a: &PlanArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let clustering = a
        .clustering
        .as_ref()
        .map(|p| Clustering::load(p).with_context(|| format!("loading clustering {}", p.display())))
        .transpose()?;
    if let Some(c) = &clustering {
        c.check_against(&inst)?;
    }
    let plan = lp::plan(&inst, clustering.as_ref())?;
    fs::create_dir_all(&ctx.out_dir)?;
    plan.save(ctx.file("plan.json"))?;
    println!(
        "objective {:.6}, {} flows, {} iterations, dual gap {:.2e}",
        plan.objective,
        plan.flows.len(),
        plan.iterations,
        plan.duals.gap
    );
    Ok(())
}

fn simulate_cmd(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let plan = a
        .plan
        .as_ref()
        .map(|p| DispatchPlan::load(p).with_context(|| format!("loading plan {}", p.display())))
        .transpose()?;
    if plan.is_none() {
        if let Some(p) = a.policies.iter().find(|p| p.needs_plan()) {
            bail!("policy {p} needs --plan");
        }
    }
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let mode = match a.arrivals {
        Arrivals::Poisson => ArrivalMode::Poisson,
        Arrivals::IidRounds => ArrivalMode::IidRounds,
    };
    let reps = prepare_replications(&inst, &inst.weights, a.replications, ctx.seed, mode, exec);
    let results = simulate(&inst, &inst.weights, plan.as_ref(), &a.policies, &reps, ctx.seed, exec)?;
    let runs: Vec<RunRow> = results.into_iter().map(|(r, _)| r).collect();
    let summary = summarize(&runs, None, None)?;
    ctx.table("runs", &runs)?;
    ctx.table("summary", &summary)?;
    for s in &summary {
        println!("{:<24} mean ratio {:.4} (sd {:.4}, n {})", s.policy, s.mean_ratio, s.std_ratio, s.n);
    }
    Ok(())
}

fn bounds_cmd(ctx: &Ctx, a: &BoundsArgs) -> Result<()> {
    let rows = bounds_table(&a.b, a.delta, a.eta, a.rho)?;
    ctx.table("bounds", &rows)?;
    Ok(())
}

fn psi_rows(base: &MatchingInstance, cur: &MatchingInstance) -> Result<Vec<PsiRow>> {
    let by_blood = |inst: &MatchingInstance, bt: Option<BloodType>| -> Vec<f64> {
        let mut out = Vec::new();
        for (u, p) in inst.patients.iter().enumerate() {
            if bt.is_some_and(|b| b != p.blood_type) {
                continue;
            }
            for v in 0..inst.n_donor_types() {
                if inst.is_edge(u, v) {
                    out.push(inst.weight(u, v));
                }
            }
        }
        out
    };
    let groups = [
        ("all", None),
        ("O", Some(BloodType::O)),
        ("A", Some(BloodType::A)),
        ("B", Some(BloodType::B)),
        ("AB", Some(BloodType::AB)),
    ];
    groups
        .into_iter()
        .map(|(name, bt)| {
            let e = by_blood(base, bt);
            let x = by_blood(cur, bt);
            let r = if e.is_empty() || x.is_empty() { None } else { Some(psi(&e, &x, 10)?) };
            Ok(PsiRow {
                group: name.into(),
                n_expected: e.len(),
                n_actual: x.len(),
                psi: r.as_ref().map(|r| r.value),
                class: r.map_or("undefined".into(), |r| format!("{:?}", r.class).to_lowercase()),
            })
        })
        .collect()
}

fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    if a.runs.is_none() && a.baseline_instance.is_none() {
        bail!("nothing to evaluate: pass --runs and/or --baseline-instance with --current");
    }
    if let Some(path) = &a.runs {
        let runs: Vec<RunRow> = read_csv(path).with_context(|| format!("reading runs {}", path.display()))?;
        let base = a.baseline_policy.map(|p| p.label());
        let summary = summarize(&runs, base.as_deref(), a.baseline_b)?;
        ctx.table("summary", &summary)?;
        for s in &summary {
            let p = s.p_value.map_or("-".to_string(), |p| format!("{p:.3e}"));
            println!("{:<24} b={:<4} mean ratio {:.4} p vs {} {}", s.policy, s.b, s.mean_ratio, s.baseline, p);
        }
    }
    if let (Some(b), Some(c)) = (&a.baseline_instance, &a.current) {
        let rows = psi_rows(&load(b)?, &load(c)?)?;
        ctx.table("psi", &rows)?;
    }
    Ok(())
}

fn scenario(ctx: &Ctx, a: &ScenarioArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(ctx.out_dir.clone());
    }
    if let InstanceSource::Path(p) = &cfg.instance {
        if p.is_relative() {
            let base = a.config.parent().unwrap_or(Path::new("."));
            cfg.instance = InstanceSource::Path(base.join(p));
        }
    }
    let art = run_scenario(&cfg)?;
    for f in &art.failures {
        eprintln!("cell b={} method={} failed at {}: {}", f.b, f.method, f.stage, f.error);
    }
    for s in &art.summaries {
        let p = s.p_value.map_or("-".to_string(), |p| format!("{p:.3e}"));
        println!("{:<24} b={:<4} {:<26} mean ratio {:.4} p {}", s.policy, s.b, s.method, s.mean_ratio, p);
    }
    println!("{} runs written to {}", art.runs.len(), cfg.output_dir.unwrap_or_default().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
        format: cli.format,
    };
    let (stage, res) = match &cli.command {
        Command::Gen(a) => ("gen", gen(&ctx, a)),
        Command::Cluster(a) => ("cluster", cluster(&ctx, a)),
        Command::Plan(a) => ("plan", plan(&ctx, a)),
        Command::Simulate(a) => ("simulate", simulate_cmd(&ctx, a)),
        Command::Bounds(a) => ("bounds", bounds_cmd(&ctx, a)),
        Command::Evaluate(a) => ("evaluate", evaluate(&ctx, a)),
        Command::Scenario(a) => ("scenario", scenario(&ctx, a)),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error in {stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}
