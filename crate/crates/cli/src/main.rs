//! `advtrain`: command-line front end for the experiment harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use advtrain_core::harness::experiment::{alpha_key, effective_alphas};
use advtrain_core::harness::{
    emit_bound_table, export_dataset, prepare_dataset, run_experiment, tune_step_size, Algorithm, DatasetConfig,
    ExperimentConfig,
};
use advtrain_core::metrics::{gd_step_cap, BoundInputs};

#[derive(Parser, Debug)]
#[command(name = "advtrain", version, about = "Adversarial training of linear classifiers")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed; overrides the config's seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured alpha sweep and write traces, charts and summary.json.
    Train {
        /// Also emit SVG charts.
        #[arg(long)]
        charts: bool,
    },
    /// Grid-search the step size for every configured alpha (agd, asgd).
    Tune,
    /// Play the ERM game on the two-point dataset.
    Game(GameArgs),
    /// Tabulate the closed-form bounds over a grid of iteration counts.
    Bounds(BoundArgs),
    /// Write the prepared dataset to dataset.csv and report its max-margin.
    Data,
}

#[derive(Args, Debug)]
struct GameArgs {
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Sample count; taken from the config's dataset when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Max-margin; taken from the config's dataset when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: f64,
    /// Step size; defaults to the α-GD cap.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Universal constant of the SGD iteration count.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Comma-separated iteration counts.
    #[arg(long, value_delimiter = ',', default_value = "2,10,100,1000,10000")]
    t: Vec<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_deref().context("this command needs --config <path>")?;
    let mut cfg = ExperimentConfig::load(path)?;
    apply_overrides(cli, &mut cfg);
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train { charts } => train(&cli, *charts),
        Command::Tune => tune(&cli),
        Command::Game(args) => game(&cli, args),
        Command::Bounds(args) => bounds(&cli, args),
        Command::Data => data(&cli),
    }
}

fn train(cli: &Cli, charts: bool) -> Result<()> {
    let mut cfg = load_config(cli)?;
    cfg.charts |= charts;
    let report = run_experiment(&cfg)?;
    let s = &report.summary;
    println!(
        "{} on {} (n={}, d={}, gamma={:.6}): {} files in {}",
        algorithm_name(cfg.algorithm),
        s.dataset,
        s.n,
        s.d,
        s.gamma,
        report.files.len(),
        cfg.output_dir.display()
    );
    for alpha in &s.alphas {
        let key = alpha_key(*alpha);
        let eta = s.step_sizes.get(&key).copied().flatten();
        let slope = s.rate_slopes.get(&key).copied().flatten();
        let attained = s.margin_attained_at.get(&key).cloned().unwrap_or_default();
        println!(
            "alpha={key} eta={} slope={} margin_attained_at={}",
            eta.map_or("-".into(), |v| v.to_string()),
            slope.map_or("-".into(), |v| format!("{v:.4}")),
            attained
                .iter()
                .map(|a| a.map_or("never".into(), |t| t.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    Ok(())
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Agd => "agd",
        Algorithm::Asgd => "asgd",
        Algorithm::Aperceptron => "aperceptron",
        Algorithm::SlowGd => "slow_gd",
        Algorithm::ErmGame => "erm_game",
    }
}

fn tune(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if !matches!(cfg.algorithm, Algorithm::Agd | Algorithm::Asgd) {
        bail!("tune applies to agd and asgd, not {}", algorithm_name(cfg.algorithm));
    }
    let data = prepare_dataset(&cfg)?;
    let mut results = Vec::new();
    println!("alpha,eta,mean_final_robust_risk,chosen");
    for alpha in effective_alphas(&cfg, data.gamma) {
        let r = tune_step_size(&cfg, alpha).with_context(|| format!("tuning alpha={alpha}"))?;
        for p in &r.grid {
            println!(
                "{alpha},{},{},{}",
                p.eta,
                p.loss.map_or("NaN".into(), |l| format!("{l:.16e}")),
                p.eta == r.chosen
            );
        }
        results.push(r);
    }
    let path = write_out(
        &cfg.output_dir,
        "tuning.json",
        &(serde_json::to_string_pretty(&results)? + "\n"),
    )?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn game(cli: &Cli, args: &GameArgs) -> Result<()> {
    let cfg = match &cli.config {
        Some(_) => {
            let cfg = load_config(cli)?;
            if cfg.algorithm != Algorithm::ErmGame {
                bail!("game needs a config with algorithm erm_game");
            }
            cfg
        }
        None => {
            let mut cfg = ExperimentConfig::new(
                DatasetConfig::TwoPoint {
                    gamma: args.gamma,
                    d: args.d,
                },
                Algorithm::ErmGame,
            );
            cfg.alphas = vec![args.alpha];
            cfg.epsilon = Some(args.epsilon);
            cfg.iterations = args.rounds;
            apply_overrides(cli, &mut cfg);
            cfg.validate()?;
            cfg
        }
    };
    let report = run_experiment(&cfg)?;
    for (key, g) in report.summary.game.iter().flatten() {
        println!(
            "alpha={key} rounds={}/{} admissible={} margin_on_s=[{:.12}, {:.12}] code_size={} draws={} theta={}",
            g.rounds,
            g.requested_rounds,
            g.admissible,
            g.min_margin_on_s,
            g.max_margin_on_s,
            g.code_size,
            g.code_attempts,
            g.threshold
        );
    }
    Ok(())
}

fn bounds(cli: &Cli, args: &BoundArgs) -> Result<()> {
    let (n, d, gamma) = match (&cli.config, args.n, args.gamma) {
        (_, Some(n), Some(gamma)) => (n, 0, gamma),
        (Some(_), n, gamma) => {
            let cfg = load_config(cli)?;
            let data = prepare_dataset(&cfg)?;
            (
                n.unwrap_or(data.dataset.len()),
                data.dataset.dim(),
                gamma.unwrap_or(data.gamma),
            )
        }
        (None, _, _) => bail!("bounds needs --n and --gamma, or --config to derive them"),
    };
    let eta = match args.eta {
        Some(eta) => eta,
        None => gd_step_cap(gamma, args.alpha)?,
    };
    let inputs = BoundInputs {
        n,
        d,
        gamma,
        alpha: args.alpha,
        eta,
        delta_conf: args.delta,
        q: args.q,
        c: args.c,
        c_init: 5.0,
    };
    let table = emit_bound_table(&inputs, &args.t)?;
    match &cli.out {
        Some(dir) => {
            let path = write_out(dir, "bounds.csv", &table)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn data(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let (data, path) = export_dataset(&cfg)?;
    println!(
        "{}: n={} d={} max_norm={} gamma={}{}",
        path.display(),
        data.dataset.len(),
        data.dataset.dim(),
        data.dataset.max_norm(),
        data.gamma,
        data.scale.map_or(String::new(), |k| format!(" scale={k}"))
    );
    Ok(())
}
