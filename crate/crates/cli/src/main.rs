use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bevinst::assoc::AssocMode;
use bevinst::sim::{EgoProfile, NoiseConfig};
use bevinst_cli::{
    cmd_associate, cmd_bench, cmd_eval, cmd_labels, cmd_predict, cmd_render, cmd_simulate,
    BenchConfig, ExperimentConfig, Preset,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bevinst",
    version,
    about = "Synthetic BEV instance prediction: labels, association, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SceneArgs {
    #[arg(long, default_value = "long")]
    preset: Preset,
    /// Observed frames including the present one.
    #[arg(long, default_value_t = 3)]
    tin: usize,
    /// Predicted frames.
    #[arg(long, default_value_t = 4)]
    tout: usize,
    #[arg(long, default_value_t = 10)]
    agents: usize,
    /// straight, turn or stop-and-go.
    #[arg(long, default_value = "straight")]
    ego: EgoProfile,
}

#[derive(Args, Clone)]
struct NoiseArgs {
    /// Std of additive flow noise, in cells.
    #[arg(long, default_value_t = 0.0)]
    flow_sigma: f64,
    /// Per-cell probability of flipping a boundary cell.
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    /// Per-instance, per-frame dropout probability.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Expected spurious blobs per frame.
    #[arg(long, default_value_t = 0.0)]
    fp_rate: f64,
}

impl NoiseArgs {
    fn config(&self, seed: u64) -> NoiseConfig {
        NoiseConfig {
            flow_sigma: self.flow_sigma,
            boundary_flip_prob: self.flip,
            instance_dropout_prob: self.dropout,
            false_positive_rate: self.fp_rate,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write it as text.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render ground-truth label modalities for a scenario.
    Labels {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt labels into predicted modalities.
    Predict {
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group predicted modalities into instance sequences.
    Associate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "warp")]
        mode: AssocMode,
        /// Defaults to the preset matching the stored grid.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score instances against labels.
    Eval {
        #[arg(long)]
        inst: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Prediction directory to score with the training loss.
        #[arg(long)]
        losses: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare both pipelines over seeds, horizons and noise.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Extra horizons besides --tout.
        #[arg(long, value_delimiter = ',')]
        also_tout: Vec<usize>,
        /// Restrict to one mode.
        #[arg(long)]
        mode: Option<AssocMode>,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Also write per-stage wall-clock to bench_timing.txt.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one PPM image per frame.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn experiment(scene: &SceneArgs) -> ExperimentConfig {
    ExperimentConfig {
        t_in: scene.tin,
        t_out: scene.tout,
        agents: scene.agents,
        ego_profile: scene.ego,
        ..ExperimentConfig::new(scene.preset)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, seed, out } => {
            let p = cmd_simulate(&experiment(&scene), seed, &out)?;
            println!("{}", p.display());
        }
        Command::Labels {
            scenario,
            scene,
            out,
        } => {
            let labels = cmd_labels(&scenario, &experiment(&scene), &out)?;
            println!("frames={}", labels.frames.len());
        }
        Command::Predict {
            labels,
            noise,
            seed,
            out,
        } => {
            let pred = cmd_predict(&labels, &noise.config(seed), &out)?;
            println!("frames={}", pred.len());
        }
        Command::Associate {
            pred,
            mode,
            preset,
            out,
        } => {
            let r = cmd_associate(&pred, mode, preset, &out)?;
            println!("frames={}", r.instances.len());
        }
        Command::Eval {
            inst,
            gt,
            losses,
            out,
        } => {
            print!(
                "{}",
                cmd_eval(&inst, &gt, losses.as_deref(), out.as_deref())?
            );
        }
        Command::Bench {
            scene,
            noise,
            also_tout,
            mode,
            seed,
            seeds,
            timing,
            out,
        } => {
            if seeds == 0 {
                anyhow::bail!("--seeds must be at least 1");
            }
            let mut base = experiment(&scene);
            base.noise = noise.config(0);
            base.seeds = (seed..seed + seeds).collect();
            let mut cfg = BenchConfig::new(base);
            cfg.timing = timing;
            for t in also_tout {
                if !cfg.horizons.contains(&t) {
                    cfg.horizons.push(t);
                }
            }
            if let Some(m) = mode {
                cfg.modes = vec![m];
            }
            cmd_bench(&cfg, &out)?;
            print!(
                "{}",
                std::fs::read_to_string(out.join(bevinst_cli::bench::TABLE_FILE))?
            );
        }
        Command::Render { input, out } => {
            for p in cmd_render(&input, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
