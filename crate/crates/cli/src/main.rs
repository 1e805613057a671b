use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use atmplace::compact::{
    load_thermal_params, load_warpage_params, save_thermal_params, save_warpage_params, CompactThermalParams,
    CompactWarpageParams, FitConfig,
};
use atmplace::model::{load_design, load_placement, save_design, synthesize_benchmark, write_text, DesignInstance, InterfaceKind};
use atmplace::pipeline::{
    audit, fit_dataset, generate_dataset, load_dataset, measure_speedup, pareto_csv, pareto_svg, run_pareto,
    run_place, run_tune, save_json, save_place_outputs, DatasetConfig, Mode, OracleConfig, ParetoConfig,
    PlaceConfig, TuneConfig, SCHEMA_VERSION,
};
use atmplace::place::CompactModels;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

const THERMAL_PARAMS: &str = "thermal_params.json";
const WARPAGE_PARAMS: &str = "warpage_params.json";

#[derive(Parser)]
#[command(name = "atmplace", version, about = "Thermal- and warpage-aware chiplet placement")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON file with settings for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a benchmark design.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "x32")]
        iface: InterfaceKind,
        /// Target empty fraction of the interposer.
        #[arg(long, default_value_t = 0.4)]
        ws: f64,
    },
    /// Label random legal layouts with both oracles.
    Dataset {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fit the compact models to a dataset.
    Fit {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Training samples; the rest are held out. Defaults to half.
        #[arg(long)]
        n_train: Option<usize>,
        /// Compact evaluations timed for the speedup figure.
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Place a design.
    Place {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Sweep the physics weights and report the non-dominated runs.
    Pareto {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated temperature weights of the sweep.
        #[arg(long, value_delimiter = ',')]
        grid_t: Option<Vec<f64>>,
        /// Comma-separated warpage weights of the sweep.
        #[arg(long, value_delimiter = ',')]
        grid_w: Option<Vec<f64>>,
    },
    /// Random search over optimizer settings.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Check a placement and evaluate it with the oracles.
    Audit {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        /// Skip the oracle solves.
        #[arg(long)]
        no_physics: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    design: PathBuf,
    /// Directory holding fitted model parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Temperature penalty weight.
    #[arg(long)]
    lambda_t: Option<f64>,
    /// Warpage penalty weight.
    #[arg(long)]
    lambda_w: Option<f64>,
    /// Temperature threshold of the thermal penalty in C.
    #[arg(long)]
    t_th: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Wl,
    Tm,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Wl => Mode::WlDriven,
            ModeArg::Tm => Mode::TmAware,
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = serde_json::from_str(&text).map_err(|e| atmplace::Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(parsed)
}

fn load_models(dir: &Path) -> Result<(CompactThermalParams, CompactWarpageParams)> {
    Ok((
        load_thermal_params(&dir.join(THERMAL_PARAMS))?,
        load_warpage_params(&dir.join(WARPAGE_PARAMS))?,
    ))
}

fn summary_row(d: &DesignInstance, kind: InterfaceKind) -> String {
    format!(
        "{} | {} dies | {} nets | {:.1} x {:.1} mm | whitespace {:.0}%",
        kind.label(),
        d.num_chiplets(),
        d.nets.len(),
        d.interposer.width,
        d.interposer.height,
        100.0 * d.whitespace()
    )
}

impl RunArgs {
    fn apply(&self, cfg: &mut PlaceConfig) {
        let p = &mut cfg.cgd.penalty;
        p.lambda_t = self.lambda_t.unwrap_or(p.lambda_t);
        p.lambda_w = self.lambda_w.unwrap_or(p.lambda_w);
        p.t_th = self.t_th.unwrap_or(p.t_th);
    }

    fn models(&self) -> Result<Option<(CompactThermalParams, CompactWarpageParams)>> {
        self.params.as_deref().map(load_models).transpose()
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        atmplace::par::set_threads(t);
    }
    let out = &cli.out;
    let config = cli.config.as_deref();
    match cli.command {
        Command::Gen { n, iface, ws } => {
            let d = synthesize_benchmark(cli.seed, n, iface, ws)?;
            let path = out.join("design.json");
            save_design(&path, &d)?;
            println!("{}", summary_row(&d, iface));
            println!("wrote {}", path.display());
        }
        Command::Dataset { design, count } => {
            let d = load_design(&design)?;
            let mut cfg: DatasetConfig = read_config(config)?;
            cfg.seed = cli.seed;
            cfg.count = count.unwrap_or(cfg.count);
            let (m, _, secs) = generate_dataset(&d, &cfg, Some(out))?;
            println!(
                "{} samples, {:.2} s oracle time per sample, written to {}",
                m.count,
                secs.iter().sum::<f64>() / secs.len() as f64,
                out.display()
            );
        }
        Command::Fit {
            design,
            dataset,
            n_train,
            reps,
        } => {
            let d = load_design(&design)?;
            let cfg: FitConfig = read_config(config)?;
            let (manifest, samples) = load_dataset(&d, &dataset)?;
            let n_train = n_train.unwrap_or(samples.len() / 2);
            let fit = fit_dataset(&d, &samples, n_train, &cfg)?;
            save_thermal_params(&out.join(THERMAL_PARAMS), &fit.thermal)?;
            save_warpage_params(&out.join(WARPAGE_PARAMS), &fit.warpage)?;
            let speedup = measure_speedup(&d, &samples[n_train].0, &fit.thermal, &fit.warpage, &manifest.oracle, reps)?;
            save_json(&out.join("speedup.json"), &speedup)?;
            save_json(
                &out.join("fit_report.json"),
                &serde_json::json!({
                    "schema_version": SCHEMA_VERSION,
                    "n_train": fit.summary.n_train,
                    "n_test": fit.summary.n_test,
                    "thermal": fit.summary.thermal,
                    "warpage": fit.summary.warpage,
                    "speedup": speedup,
                }),
            )?;
            let (t, w) = (&fit.summary.thermal, &fit.summary.warpage);
            println!(
                "thermal test MAE {:.3} C, r {:.4}; warpage test MAE {:.3e}, r {:.4}; speedup {:.0}x",
                t.test_mae, t.test_pearson, w.test_mae, w.test_pearson, speedup.combined_speedup
            );
        }
        Command::Place { run, mode } => {
            let d = load_design(&run.design)?;
            let mut cfg: PlaceConfig = read_config(config)?;
            cfg.seed = cli.seed;
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            run.apply(&mut cfg);
            let models = run.models()?;
            let m = models.as_ref().map(|(t, w)| CompactModels { thermal: t, warpage: w });
            let outcome = run_place(&d, m, &cfg)?;
            save_place_outputs(out, &outcome)?;
            let r = &outcome.report;
            println!(
                "TWL {:.3} mm, peak {}, warpage {}, legal {}",
                r.twl,
                r.t_max.map_or("n/a".into(), |t| format!("{t:.2} C")),
                r.warpage.map_or("n/a".into(), |w| format!("{w:.4e}")),
                r.legal
            );
            if !r.legal {
                anyhow::bail!("final placement is not legal");
            }
        }
        Command::Pareto { run, grid_t, grid_w } => {
            let d = load_design(&run.design)?;
            let mut cfg: ParetoConfig = read_config(config)?;
            cfg.base.seed = cli.seed;
            run.apply(&mut cfg.base);
            cfg.lambda_t = grid_t.unwrap_or(cfg.lambda_t);
            cfg.lambda_w = grid_w.unwrap_or(cfg.lambda_w);
            let (t, w) = run
                .models()?
                .ok_or_else(|| atmplace::Error::Precondition("a sweep needs fitted models (--params)".into()))?;
            let r = run_pareto(&d, CompactModels { thermal: &t, warpage: &w }, &cfg)?;
            write_text(&out.join("pareto.csv"), &pareto_csv(&r))?;
            write_text(&out.join("pareto.svg"), &pareto_svg(&r))?;
            save_json(&out.join("pareto.json"), &r)?;
            let failed = r.points.iter().filter(|p| p.error.is_some()).count();
            println!("{} runs, {} failed, front {:?}", r.points.len(), failed, r.front);
        }
        Command::Tune { run, mode, budget } => {
            let d = load_design(&run.design)?;
            let mut cfg: TuneConfig = read_config(config)?;
            cfg.seed = cli.seed;
            cfg.base.seed = cli.seed;
            if let Some(m) = mode {
                cfg.base.mode = m.into();
            }
            cfg.budget = budget.unwrap_or(cfg.budget);
            run.apply(&mut cfg.base);
            let models = run.models()?;
            let m = models.as_ref().map(|(t, w)| CompactModels { thermal: t, warpage: w });
            let r = run_tune(&d, m, &cfg)?;
            save_json(&out.join("tune.json"), &r)?;
            save_json(&out.join("best_config.json"), &r.best_config)?;
            println!("best trial {} of {}, score {:.4}", r.best, r.trials.len(), r.best_score);
        }
        Command::Audit {
            design,
            placement,
            no_physics,
        } => {
            let d = load_design(&design)?;
            let p = load_placement(&placement)?;
            let oracle: OracleConfig = read_config(config)?;
            let r = audit(&d, &p, (!no_physics).then_some(&oracle))?;
            save_json(&out.join("audit.json"), &r)?;
            println!(
                "legal {}, TWL {:.3} mm, peak {}, warpage {}",
                r.legal,
                r.twl,
                r.t_max.map_or("n/a".into(), |t| format!("{t:.2} C")),
                r.warpage.map_or("n/a".into(), |w| format!("{w:.4e}"))
            );
            if !r.legal {
                anyhow::bail!("placement is not legal: {:?}", r.legality);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<atmplace::Error>().is_some_and(|e| e.is_usage());
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
