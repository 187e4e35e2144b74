use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sigbench::embed::load_embedding_file;
use sigbench::graph::{cached_perturbation, load_edge_list, NodeIds, PerturbationSpec};
use sigbench::harness::{self, parse_seeds, report, ExperimentConfig, ReportKind, ResultStore, RunSummary, SyntheticSpec};

#[derive(Parser)]
#[command(name = "sigbench", version, about = "Graph-signal augmentation benchmark for tabular classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Store directory; defaults to `output` in the config, else `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let cfg = ExperimentConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the configured signals and write one file per signal.
    Signals {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
    },
    /// Remove a fraction of edges and cache the perturbed edge list.
    Perturb {
        /// Edge list to perturb.
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "graphs")]
        cache_dir: PathBuf,
    },
    /// Run only the hyperparameter searches (cached per cell).
    Hpo {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Multi-seed evaluation of every configured cell.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Override the evaluation seeds, e.g. `1..10` or `1,2,3`.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Evaluation across the configured edge-removal levels, plus the trend table.
    Robustness {
        #[command(flatten)]
        run: RunArgs,
        /// Override the perturbation levels, e.g. `0,0.25,0.5`.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
    /// Print the per-cell significance matrix of a store.
    Significance {
        #[arg(long)]
        store: PathBuf,
    },
    /// Write report tables from a store.
    Report {
        #[arg(long)]
        store: PathBuf,
        /// Report kind, or `all`.
        #[arg(long, default_value = "all")]
        kind: String,
        /// Output directory; defaults to `<store>/reports`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep Naive Bayes in aggregate tables.
        #[arg(long)]
        include_nb: bool,
    },
    /// Generate a planted-partition dataset in the Elliptic layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with generator parameters; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p_in: Option<f64>,
        #[arg(long)]
        p_out: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check an external embedding file against the node set.
    ValidateEmbeddings {
        #[arg(long)]
        embeddings: PathBuf,
        /// Node ids come from this feature file (first column)...
        #[arg(long, conflicts_with = "edges")]
        features: Option<PathBuf>,
        /// ...or from this edge list.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Required dimension.
        #[arg(long)]
        dim: Option<usize>,
    },
}

fn report_summary(s: &RunSummary) -> ExitCode {
    println!("records written: {}, failed: {}, already present: {}", s.written, s.failed, s.skipped);
    if s.failed > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn feature_ids(path: &Path) -> Result<NodeIds> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ids = text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.split(',').next().unwrap_or("").trim().to_string());
    Ok(NodeIds::from_ids(ids)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Signals { run, rho } => {
            let (cfg, out) = run.load()?;
            for p in harness::export_signals(&cfg, &out, rho)? {
                println!("{}", p.display());
            }
        }
        Command::Perturb { edges, rho, seed, cache_dir } => {
            let g = load_edge_list(&edges)?;
            let spec = PerturbationSpec::new(rho, seed)?;
            let name = edges.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
            let p = cached_perturbation(&g, spec, name, &cache_dir)?;
            println!(
                "{}: kept {} of {} edges",
                cache_dir.join(spec.cache_name(name)).display(),
                p.edge_count(),
                g.edge_count()
            );
        }
        Command::Hpo { run } => {
            let (cfg, out) = run.load()?;
            for (cell, loss) in harness::run_hpo(&cfg, &out)? {
                println!("{cell}\t{loss:.6}");
            }
        }
        Command::Evaluate { run, seeds } => {
            let (mut cfg, out) = run.load()?;
            if let Some(s) = seeds {
                cfg.eval_seeds = parse_seeds(&s)?;
                cfg.validate()?;
            }
            return Ok(report_summary(&harness::run_experiment(&cfg, &out)?));
        }
        Command::Robustness { run, rho } => {
            let (mut cfg, out) = run.load()?;
            if let Some(r) = rho {
                cfg.rho = r;
                cfg.validate()?;
            }
            let summary = harness::run_robustness(&cfg, &out)?;
            let code = report_summary(&summary);
            if summary.failed == 0 {
                let store = ResultStore::load(&out)?;
                println!("{}", harness::write_report(&store, ReportKind::RobustnessTrend, &store.report_dir())?.display());
            }
            return Ok(code);
        }
        Command::Significance { store } => {
            let store = ResultStore::load(&store)?;
            print!("{}", report::render(&store, ReportKind::SignificanceMatrix)?);
        }
        Command::Report { store, kind, out, include_nb } => {
            let mut store = ResultStore::load(&store)?;
            if include_nb {
                store.config.report.exclude_nb = false;
            }
            let dir = out.unwrap_or_else(|| store.report_dir());
            let kinds: Vec<ReportKind> =
                if kind == "all" { ReportKind::ALL.to_vec() } else { vec![kind.parse()?] };
            for k in kinds {
                println!("{}", harness::write_report(&store, k, &dir)?.display());
            }
        }
        Command::Synth { out, spec, n, k, p_in, p_out, noise, seed } => {
            let mut s: SyntheticSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    harness::config::synthetic_from_toml(&text)?
                }
                None => SyntheticSpec::default(),
            };
            s.n = n.unwrap_or(s.n);
            s.k = k.unwrap_or(s.k);
            s.p_in = p_in.unwrap_or(s.p_in);
            s.p_out = p_out.unwrap_or(s.p_out);
            s.noise = noise.unwrap_or(s.noise);
            s.seed = seed.unwrap_or(s.seed);
            let data = harness::generate(&s)?;
            data.write(&out)?;
            let check = harness::self_check(&data, 42)?;
            println!("{}", serde_json::to_string_pretty(&check)?);
        }
        Command::ValidateEmbeddings { embeddings, features, edges, dim } => {
            let ids = match (features, edges) {
                (Some(f), _) => feature_ids(&f)?,
                (None, Some(e)) => load_edge_list(&e)?.ids().clone(),
                (None, None) => bail!("give --features or --edges to define the node set"),
            };
            let e = load_embedding_file(&embeddings, &ids, "external")?;
            if let Some(d) = dim.filter(|&d| d != e.dim()) {
                bail!("{}: dimension {} but {d} required", embeddings.display(), e.dim());
            }
            println!("ok: {} rows x {} dims", e.rows(), e.dim());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
