use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dualseed::bench::{self, ExperimentConfig, Mode};
use dualseed::bmatching::{solve_mwbm, BInstance};
use dualseed::feasibility::{fast_approx_cover, project_b_duals, project_duals, violation_graph};
use dualseed::graph::{BipartiteInstance, DualVector};
use dualseed::hungarian::{cold_start_dual, solve_mwpm, SolveOptions};
use dualseed::instancegen::{
    cluster_model_instance, cluster_model_prepare, load_points, resolve_dataset_path,
    type_model_base, type_model_instance, ClusterModelConfig, LoadOptions, TypeModelConfig,
};
use dualseed::io;
use dualseed::learning::{erm_median, optimal_dual, DualSample};
use dualseed::oracle::{brute_mwbm, brute_mwpm, OracleBudget};
use dualseed::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Learned dual warm starts for exact bipartite matching.
#[derive(Parser)]
#[command(name = "dualseed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Learn a dual prediction from training instances.
    Learn {
        /// Training instance files.
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        /// Where to write the predicted dual.
        #[arg(long)]
        out: PathBuf,
    },
    /// Repair a predicted dual so it is feasible for an instance.
    Project {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        dual: PathBuf,
        /// Treat the instance as a b-matching instance.
        #[arg(long)]
        b: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a minimum-weight perfect matching instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Feasible starting dual; zero when absent.
        #[arg(long)]
        dual: Option<PathBuf>,
        /// Project the starting dual first instead of rejecting infeasible ones.
        #[arg(long)]
        project: bool,
        #[arg(long)]
        tighten: bool,
        /// Print solver statistics as one JSON line on stderr.
        #[arg(long)]
        stats_json: bool,
        /// Write the optimal dual here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a minimum-weight perfect b-matching instance.
    SolveB {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        dual: Option<PathBuf>,
        #[arg(long)]
        project: bool,
        #[arg(long)]
        stats_json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment from a TOML config.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Brute-force reference solution for a small instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        b: bool,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Group-structured costs with integral noise.
    TypeModel {
        /// TOML file with n, groups, variance and optionally mean_weight.
        #[arg(long, required_unless_present_all = ["n", "groups", "variance"])]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long)]
        variance: Option<u64>,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Instances sampled from k-means clusters of a point file.
    Cluster {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1000.0)]
        scale: f64,
        #[arg(long)]
        has_header: bool,
        #[arg(long)]
        subsample: Option<usize>,
        #[command(flatten)]
        common: GenCommon,
    },
}

#[derive(Args)]
struct GenCommon {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output directory; files are named instance-<index>.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    Batch(BenchArgs),
    Online(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; overrides the config output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible { .. } | Error::InfeasibleDual { .. }) => EXIT_INFEASIBLE,
        Some(Error::Config(_) | Error::Parse { .. } | Error::DimensionMismatch { .. }) => {
            EXIT_CONFIG
        }
        _ => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(gen) => run_gen(gen),
        Command::Learn { instances, out } => {
            let mut duals = Vec::with_capacity(instances.len());
            let mut max_cost = 0;
            for path in &instances {
                let inst = load_instance(path)?;
                max_cost = max_cost.max(inst.max_cost());
                duals.push(optimal_dual(&inst).with_context(|| path.display().to_string())?);
            }
            let predictor = erm_median(&DualSample::new(duals)?)?.clamp(max_cost);
            io::save_dual(&out, &predictor.duals)?;
            println!(
                "{}",
                json!({
                    "samples": instances.len(),
                    "training_loss": ratio_to_f64(predictor.training_loss),
                    "clamp": max_cost,
                })
            );
            Ok(())
        }
        Command::Project {
            instance,
            dual,
            b,
            out,
        } => {
            let y_hat = load_dual(&dual)?;
            let y = if b {
                project_b_duals(&load_binstance(&instance)?, &y_hat)?
            } else {
                let inst = load_instance(&instance)?;
                let vg = violation_graph(&inst, &y_hat)?;
                println!(
                    "{}",
                    json!({
                        "violated_edges": vg.edges().len(),
                        "perturbation": fast_approx_cover(&vg).total(),
                    })
                );
                project_duals(&inst, &y_hat)?
            };
            io::save_dual(&out, &y)?;
            Ok(())
        }
        Command::Solve {
            instance,
            dual,
            project,
            tighten,
            stats_json,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let y0 = start_dual(&inst, dual.as_deref(), project, project_duals)?;
            let sol = solve_mwpm(
                &inst,
                &y0,
                SolveOptions {
                    use_tighten: tighten,
                },
            )?;
            println!("cost {}", sol.matching.cost);
            for (i, j) in &sol.matching.pairs {
                println!("{i} {j}");
            }
            if stats_json {
                eprintln!("{}", serde_json::to_string(&sol.stats)?);
            }
            if let Some(out) = out {
                io::save_dual(&out, &sol.duals)?;
            }
            Ok(())
        }
        Command::SolveB {
            instance,
            dual,
            project,
            stats_json,
            out,
        } => {
            let binst = load_binstance(&instance)?;
            let y0 = start_dual(&binst, dual.as_deref(), project, project_b_duals)?;
            let sol = solve_mwbm(&binst, &y0)?;
            println!("cost {}", sol.matching.cost);
            let inst = binst.instance();
            for (e, &x) in sol.matching.x.iter().enumerate() {
                if x > 0 {
                    println!("{} {} {x}", inst.left(e), inst.right(e));
                }
            }
            if stats_json {
                eprintln!("{}", serde_json::to_string(&sol.stats)?);
            }
            if let Some(out) = out {
                io::save_dual(&out, &sol.duals)?;
            }
            Ok(())
        }
        Command::Bench(cmd) => {
            let (mode, args) = match cmd {
                BenchCommand::Batch(a) => (Mode::Batch, a),
                BenchCommand::Online(a) => (Mode::Online, a),
            };
            run_bench(mode, args)
        }
        Command::Oracle { instance, b } => {
            let budget = OracleBudget::default();
            if b {
                let sol = brute_mwbm(&load_binstance(&instance)?, &budget)?;
                println!("{}", json!({ "cost": sol.cost, "x": sol.x }));
            } else {
                let sol = brute_mwpm(&load_instance(&instance)?, &budget)?;
                println!("{}", json!({ "cost": sol.cost, "pairs": sol.pairs }));
            }
            Ok(())
        }
    }
}

trait HasInstance {
    fn base(&self) -> &BipartiteInstance;
}

impl HasInstance for BipartiteInstance {
    fn base(&self) -> &BipartiteInstance {
        self
    }
}

impl HasInstance for BInstance {
    fn base(&self) -> &BipartiteInstance {
        self.instance()
    }
}

fn start_dual<T: HasInstance>(
    inst: &T,
    path: Option<&Path>,
    project: bool,
    repair: fn(&T, &DualVector) -> dualseed::Result<DualVector>,
) -> anyhow::Result<DualVector> {
    let Some(path) = path else {
        return Ok(cold_start_dual(inst.base()));
    };
    let y = load_dual(path)?;
    if !y.fits(inst.base()) {
        return Err(Error::DimensionMismatch {
            expected: inst.base().n_left() + inst.base().n_right(),
            found: y.len(),
        }
        .into());
    }
    Ok(if project { repair(inst, &y)? } else { y })
}

fn run_gen(gen: GenCommand) -> anyhow::Result<()> {
    let (common, mut sample): (
        GenCommon,
        Box<dyn FnMut(u64) -> anyhow::Result<BipartiteInstance>>,
    ) = match gen {
        GenCommand::TypeModel {
            config,
            n,
            groups,
            variance,
            common,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str::<TypeModelConfig>(&text)
                        .map_err(|e| Error::Config(e.to_string()))?
                }
                None => TypeModelConfig::new(0, 0, 0, 0),
            };
            cfg.n = n.unwrap_or(cfg.n);
            cfg.groups = groups.unwrap_or(cfg.groups);
            cfg.variance = variance.unwrap_or(cfg.variance);
            cfg.seed = common.seed;
            cfg.validate()?;
            let base = type_model_base(&cfg)?;
            let f = move |k| {
                let noisy = type_model_instance(&base, &cfg, k)?;
                if noisy.clamped > 0 {
                    eprintln!("instance {k}: {} costs clamped to 1", noisy.clamped);
                }
                Ok(noisy.instance)
            };
            (common, Box::new(f))
        }
        GenCommand::Cluster {
            points,
            k,
            scale,
            has_header,
            subsample,
            common,
        } => {
            let opts = LoadOptions {
                has_header,
                subsample: subsample.map(|c| (c, common.seed)),
            };
            let pts = load_points(&resolve_dataset_path(&points), &opts)?;
            let cfg = ClusterModelConfig {
                scale,
                ..ClusterModelConfig::new(k, common.seed)
            };
            let prep = cluster_model_prepare(&pts, &cfg)?;
            let f = move |idx| Ok(cluster_model_instance(&prep, &cfg, idx)?);
            (common, Box::new(f))
        }
    };
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    for k in 0..common.count {
        let path = common.out.join(format!("instance-{k:04}.txt"));
        io::save_instance(&path, &sample(k)?)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run_bench(mode: Mode, args: BenchArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.mode != mode {
        return Err(Error::Config(format!(
            "config is for {} mode, invoked as bench {}",
            cfg.mode.as_str(),
            mode.as_str()
        ))
        .into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    let Some(out_path) = cfg.output.clone() else {
        bail!(Error::Config(
            "no output path: pass --out or set `output`".into()
        ));
    };
    let result = bench::run(&cfg)?;
    bench::emit_csv(&result.rows, &out_path)?;
    let summary = bench::summarize(&result.rows, mode == Mode::Online);
    println!(
        "{}",
        json!({
            "rows": result.rows.len(),
            "output": out_path,
            "instances": result.instances,
            "clamped_costs": result.clamped_costs,
            "ci": "normal approximation, mean +/- 1.96 * stderr",
            "summary": summary,
        })
    );
    Ok(())
}

fn load_instance(path: &Path) -> anyhow::Result<BipartiteInstance> {
    io::load_instance(path).with_context(|| format!("reading instance {}", path.display()))
}

fn load_binstance(path: &Path) -> anyhow::Result<BInstance> {
    io::load_binstance(path).with_context(|| format!("reading b-instance {}", path.display()))
}

fn load_dual(path: &Path) -> anyhow::Result<DualVector> {
    io::load_dual(path).with_context(|| format!("reading dual {}", path.display()))
}

fn ratio_to_f64(r: num_rational::Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
