use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lossgraph::experiments::{
    run_kl_study, run_sim_study, simulate_data, KlStudySpec, NamedPrior, ScaleVariant, SimStudySpec,
};
use lossgraph::io::{data_to_csv, emit_results, fmt17, ingest_csv, write_file, EmitFlags, InputEcho, ResultBundle};
use lossgraph::prior::SizeWeighting;
use lossgraph::search::{enumerate_posterior, SearchConfig};
use lossgraph::{calibrate, run_fincs, Graph, LikelihoodConfig, PriorSpec, PriorVariant, Scorer};

/// Structure learning for Gaussian graphical models over decomposable graphs.
#[derive(Parser, Debug)]
#[command(name = "lossgraph", version, args_override_self = true)]
struct Cli {
    /// File of `key=value` lines supplying flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run FINCS on a CSV dataset and write results.
    Search(SearchArgs),
    /// Find (h, c) matching a target prior mean (and variance) of the edge count.
    Calibrate(CalibrateArgs),
    /// Write a synthetic dataset drawn from the noise-vertex ground truth.
    Simulate(SimulateArgs),
    /// Compare priors on replicated synthetic datasets.
    SimStudy(SimStudyArgs),
    /// Expected minimum KL divergence from the complete graph.
    KlStudy(KlStudyArgs),
    /// Log score of a single graph.
    Score(ScoreArgs),
    /// Exact posterior by enumerating all decomposable graphs (p <= 6).
    Enumerate(EnumerateArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PriorKind {
    LossBased,
    Uniform,
    CarvalhoScott,
    VillaLee,
    Mixture,
    Bernoulli,
    BetaBinomial,
}

#[derive(Args, Debug)]
struct PriorArgs {
    #[arg(long, value_enum, default_value = "loss-based")]
    prior: PriorKind,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
}

impl PriorArgs {
    fn variant(&self) -> PriorVariant {
        match self.prior {
            PriorKind::LossBased => PriorVariant::LossBased { h: self.h, c: self.c },
            PriorKind::Uniform => PriorVariant::Uniform,
            PriorKind::CarvalhoScott => PriorVariant::CarvalhoScott,
            PriorKind::VillaLee => PriorVariant::VillaLee { h: self.h },
            PriorKind::Mixture => PriorVariant::Mixture,
            PriorKind::Bernoulli => PriorVariant::Bernoulli { phi: self.phi },
            PriorKind::BetaBinomial => PriorVariant::BetaBinomial { a: self.a, b: self.b },
        }
    }

    fn spec(&self, p: usize) -> Result<PriorSpec> {
        Ok(PriorSpec::for_vertices(self.variant(), p)?)
    }
}

#[derive(Args, Debug)]
struct SearchParams {
    #[arg(long, default_value_t = lossgraph::search::DESK_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 50)]
    global_period: usize,
    #[arg(long, default_value_t = 10)]
    resample_period: usize,
    /// Number of best graphs kept.
    #[arg(long, default_value_t = 1000)]
    capacity: usize,
    #[arg(long, default_value_t = 0.01)]
    inclusion_clamp: f64,
    #[arg(long)]
    seed: u64,
    /// Progress line to stderr every N iterations (0 = off).
    #[arg(long, default_value_t = 0)]
    progress: usize,
    /// Disable the whole-graph score memo.
    #[arg(long)]
    no_memo: bool,
}

impl SearchParams {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            iterations: self.iterations,
            global_period: self.global_period,
            resample_period: self.resample_period,
            capacity: self.capacity,
            inclusion_clamp: self.inclusion_clamp,
            seed: self.seed,
            progress_period: self.progress,
            memoize: !self.no_memo,
        }
    }
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// The first row holds data, not column names.
    #[arg(long)]
    no_header: bool,
    /// Fraction of the fractional prior; defaults to 1/n.
    #[arg(long)]
    g: Option<f64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    input: DataArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    search: SearchParams,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_json: bool,
    #[arg(long)]
    no_dot: bool,
    #[arg(long)]
    no_csv: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    vertices: usize,
    #[arg(long)]
    mean: f64,
    #[arg(long)]
    variance: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 5)]
    noise: usize,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Edge-list file replacing the bundled 10-vertex base graph.
    #[arg(long)]
    base_graph: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the true graph as an edge list.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimStudyArgs {
    #[arg(long, default_value_t = 5)]
    noise: usize,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long)]
    base_graph: Option<PathBuf>,
    #[command(flatten)]
    search: SearchParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScaleArg {
    Identity,
    D,
    DInverse,
}

#[derive(Args, Debug)]
struct KlStudyArgs {
    #[arg(long, value_enum, default_value = "identity")]
    scale: ScaleArg,
    #[arg(long, value_delimiter = ',', default_value = "3,5,10")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 3.0)]
    delta: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    input: DataArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Edge-list file, 1-based "i j" per line.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[command(flatten)]
    input: DataArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Write enumerate.json here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows printed to stdout.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

/// Splices `key=value` lines from `--config FILE` into the argument list just
/// after the subcommand, so that later command-line flags override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    let prog = it.next().unwrap_or_else(|| "lossgraph".into());
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().context("--config needs a file")?);
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        let mut out = vec![prog];
        out.extend(rest);
        return Ok(out);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{path}:{}: expected key=value", lineno + 1);
        };
        let key = k.trim().replace('_', "-");
        match v.trim() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            v => injected.push(format!("--{key}={v}")),
        }
    }
    let mut out = vec![prog];
    let mut rest = rest.into_iter().peekable();
    if rest.peek().is_some_and(|a| !a.starts_with('-')) {
        out.push(rest.next().unwrap());
    }
    out.extend(injected);
    out.extend(rest);
    Ok(out)
}

fn load_data(args: &DataArgs) -> Result<(Arc<lossgraph::DataMatrix>, InputEcho)> {
    let (data, report) = ingest_csv(&args.data, !args.no_header)?;
    if report.rows_dropped > 0 {
        eprintln!("dropped {} rows with missing values", report.rows_dropped);
    }
    Ok((
        Arc::new(data),
        InputEcho {
            path: Some(args.data.display().to_string()),
            has_header: !args.no_header,
            report,
        },
    ))
}

fn load_base_graph(path: &Option<PathBuf>) -> Result<Graph> {
    Ok(match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Graph::parse_edge_list(&text, None)?
        }
        None => lossgraph::experiments::base_graph(),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, &s)?;
    Ok(())
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let (data, echo) = load_data(&a.input)?;
    let prior = a.prior.spec(data.p())?;
    let lik = LikelihoodConfig { g: a.input.g };
    let cfg = a.search.config();
    let n = data.n();
    let result = run_fincs(data, &prior, &lik, &cfg)?;
    let bundle = ResultBundle::from_search(&result, &prior, &lik, n, &cfg, Some(echo))?;
    let flags = EmitFlags {
        json: !a.no_json,
        dot: !a.no_dot,
        csv: !a.no_csv,
    };
    let written = emit_results(&bundle, &a.out, flags)?;
    println!("best log score: {}", fmt17(result.list.max_score().unwrap_or(f64::NEG_INFINITY)));
    println!("median graph: {} edges", result.median_graph.num_edges());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    if a.vertices < 2 {
        bail!("need at least 2 vertices");
    }
    let m = a.vertices * (a.vertices - 1) / 2;
    let spec = calibrate(m, a.mean, a.variance)?;
    let (h, c) = spec.loss_parameters().expect("calibration returns a loss-based prior");
    let dist = spec.size_distribution(SizeWeighting::PerSize);
    let (mean, var) = dist.moments();
    let mut s = String::new();
    let _ = writeln!(s, "# h={} c={} mean={} variance={}", fmt17(h), fmt17(c), fmt17(mean), fmt17(var));
    s.push_str("k,probability\n");
    for (k, pk) in dist.probabilities.iter().enumerate() {
        let _ = writeln!(s, "{k},{}", fmt17(*pk));
    }
    print!("{s}");
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = SimStudySpec::new(a.noise, 1, a.seed);
    spec.base_graph = load_base_graph(&a.base_graph)?;
    spec.n = a.n;
    let data = simulate_data(&spec, a.seed)?;
    write_file(&a.out, &data_to_csv(data.values()))?;
    if let Some(t) = &a.truth {
        write_file(t, &spec.true_graph().to_edge_list())?;
    }
    println!("wrote {} rows x {} columns to {}", a.n, spec.p(), a.out.display());
    Ok(())
}

fn cmd_sim_study(a: SimStudyArgs) -> Result<()> {
    let mut spec = SimStudySpec::new(a.noise, a.replicates, a.search.seed);
    spec.base_graph = load_base_graph(&a.base_graph)?;
    spec.n = a.n;
    spec.priors = NamedPrior::study_defaults();
    let report = run_sim_study(&spec, &a.search.config())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("sim_study.json"), &report)?;
    write_file(&a.out.join("sim_study.csv"), &report.to_csv())?;
    println!("replicate,{}", spec.priors.iter().map(|p| format!("FP {0},FN {0}", p.label)).collect::<Vec<_>>().join(","));
    for rep in &report.replicates {
        let cells: Vec<String> = rep
            .outcomes
            .iter()
            .map(|o| format!("{},{}", o.false_positives, o.false_negatives))
            .collect();
        println!("{},{}", rep.replicate, cells.join(","));
    }
    Ok(())
}

fn cmd_kl_study(a: KlStudyArgs) -> Result<()> {
    let scale = match a.scale {
        ScaleArg::Identity => ScaleVariant::Identity,
        ScaleArg::D => ScaleVariant::D,
        ScaleArg::DInverse => ScaleVariant::DInverse,
    };
    let spec = KlStudySpec {
        sizes: a.sizes,
        mc_samples: a.samples,
        scale,
        delta: a.delta,
        seed: a.seed,
    };
    let report = run_kl_study(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("kl_study.json"), &report)?;
    let csv = report.to_csv();
    write_file(&a.out.join("kl_study.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let (data, _) = load_data(&a.input)?;
    let text = fs::read_to_string(&a.graph).with_context(|| format!("reading {}", a.graph.display()))?;
    let g = Graph::parse_edge_list(&text, Some(data.p()))?;
    let prior = a.prior.spec(data.p())?;
    let scorer = Scorer::new(data, &LikelihoodConfig { g: a.input.g })?;
    let lm = scorer.log_marginal(&g)?;
    let lp = prior.log_prior(&g)?;
    println!("log_marginal_likelihood,{}", fmt17(lm));
    println!("log_prior,{}", fmt17(lp));
    println!("log_score,{}", fmt17(lm + lp));
    Ok(())
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<()> {
    let (data, echo) = load_data(&a.input)?;
    let prior = a.prior.spec(data.p())?;
    let lik = LikelihoodConfig { g: a.input.g };
    let post = enumerate_posterior(data, &prior, &lik)?;
    let total: f64 = post.graphs.iter().map(|g| g.2).sum();
    println!("# graphs={} total_probability={}", post.graphs.len(), fmt17(total));
    println!("rank,size,log_score,probability,edges");
    for (r, (g, s, pr)) in post.graphs.iter().take(a.top).enumerate() {
        println!(
            "{},{},{},{},{}",
            r + 1,
            g.num_edges(),
            fmt17(*s),
            fmt17(*pr),
            lossgraph::io::edge_string(g)
        );
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let value = json!({
            "format_version": lossgraph::io::RESULTS_FORMAT_VERSION,
            "input": echo,
            "prior": prior,
            "likelihood": lik,
            "posterior": post,
        });
        write_json(&out.join("enumerate.json"), &value)?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let args = expand_config(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Search(a) => cmd_search(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::SimStudy(a) => cmd_sim_study(a),
        Command::KlStudy(a) => cmd_kl_study(a),
        Command::Score(a) => cmd_score(a),
        Command::Enumerate(a) => cmd_enumerate(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
