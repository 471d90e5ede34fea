use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use bevinst::assoc::{run_pipeline, AssocMode, Modalities, TimingReport};
use bevinst::labelgen::{generate_labels, LabelConfig};
use bevinst::metrics::MetricsReport;
use bevinst::sim::{perturb, simulate, NoiseConfig};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::store::create_dir;

pub const TABLE_FILE: &str = "bench.txt";
pub const TIMING_FILE: &str = "bench_timing.txt";

/// A grid of experiments: every mode at every horizon and noise level, each over
/// all seeds of `base`.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub base: ExperimentConfig,
    pub modes: Vec<AssocMode>,
    pub horizons: Vec<usize>,
    pub noise_levels: Vec<NoiseConfig>,
    /// Also write `bench_timing.txt`. Wall-clock values differ between runs.
    pub timing: bool,
}

impl BenchConfig {
    /// Both modes at the base horizon, with a clean row and the base noise row.
    pub fn new(base: ExperimentConfig) -> Self {
        let mut noise_levels = vec![NoiseConfig::none()];
        if base.noise != NoiseConfig::none() {
            noise_levels.push(base.noise);
        }
        Self {
            horizons: vec![base.t_out],
            modes: vec![AssocMode::Warp, AssocMode::Hm],
            noise_levels,
            timing: false,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.modes.is_empty() || self.horizons.is_empty() || self.noise_levels.is_empty() {
            bail!("bench matrix has an empty axis");
        }
        if self.base.seeds.is_empty() {
            bail!("bench needs at least one seed");
        }
        for h in &self.horizons {
            if *h < 1 {
                bail!("--tout must be at least 1");
            }
        }
        for n in &self.noise_levels {
            n.validate()?;
        }
        Ok(())
    }
}

/// One (mode, horizon, noise) cell over all seeds.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub mode: AssocMode,
    pub t_out: usize,
    pub noise: NoiseConfig,
    pub seeds: Vec<u64>,
    pub vpq: Vec<f64>,
    pub iou: Vec<f64>,
    /// Per-frame panoptic quality averaged over seeds.
    pub curve: Vec<f64>,
    /// Timing per seed, concatenated in seed order.
    pub timing: Vec<TimingReport>,
}

impl BenchRow {
    pub fn vpq_mean(&self) -> f64 {
        mean(&self.vpq)
    }

    pub fn iou_mean(&self) -> f64 {
        mean(&self.iou)
    }

    /// Post-processing wall-clock summed over seeds.
    pub fn total_time(&self) -> Duration {
        self.timing.iter().map(TimingReport::total).sum()
    }

    fn key(&self) -> String {
        format!(
            "{} {} {:.3} {:.3}",
            self.mode.name(),
            self.t_out,
            self.noise.flow_sigma,
            self.noise.boundary_flip_prob
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

struct Trial {
    report: MetricsReport,
    timing: TimingReport,
}

/// All (noise, mode) trials for one seed at one horizon, in matrix order.
fn run_seed(cfg: &BenchConfig, t_out: usize, seed: u64) -> Result<Vec<Trial>> {
    let exp = ExperimentConfig {
        t_out,
        ..cfg.base.clone()
    };
    let scenario =
        simulate(&exp.scenario(seed)).with_context(|| format!("seed {seed}: simulating"))?;
    let labels = generate_labels(
        &scenario,
        &exp.preset.grid(),
        exp.present(),
        t_out,
        &LabelConfig::default(),
    )?;
    let gt: Vec<_> = labels.future().iter().map(|f| f.inst.clone()).collect();
    let mut out = Vec::with_capacity(cfg.noise_levels.len() * cfg.modes.len());
    for noise in &cfg.noise_levels {
        let noise = NoiseConfig {
            seed: noise.seed.wrapping_add(seed),
            ..*noise
        };
        let pred = perturb(&labels, &noise)?;
        for &mode in &cfg.modes {
            let result = run_pipeline(Modalities::from(&pred), &exp.preset.assoc(mode))?;
            let report = MetricsReport::evaluate(&result.instances, &gt)?;
            out.push(Trial {
                report,
                timing: result.timing,
            });
        }
    }
    Ok(out)
}

/// Runs the matrix, parallel over seeds. Rows come back in (horizon, noise, mode)
/// order regardless of scheduling.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let seeds = &cfg.base.seeds;
    let mut rows = Vec::new();
    for &t_out in &cfg.horizons {
        let per_seed: Vec<Vec<Trial>> = seeds
            .par_iter()
            .map(|&s| run_seed(cfg, t_out, s))
            .collect::<Result<_>>()?;
        let mut cell = 0;
        for noise in &cfg.noise_levels {
            for &mode in &cfg.modes {
                let trials: Vec<&Trial> = per_seed.iter().map(|v| &v[cell]).collect();
                let mut curve = vec![0.0; t_out];
                for tr in &trials {
                    for (c, f) in curve.iter_mut().zip(&tr.report.per_frame) {
                        *c += f.quality() / trials.len() as f64;
                    }
                }
                rows.push(BenchRow {
                    mode,
                    t_out,
                    noise: *noise,
                    seeds: seeds.clone(),
                    vpq: trials.iter().map(|t| t.report.vpq).collect(),
                    iou: trials.iter().map(|t| t.report.iou).collect(),
                    curve,
                    timing: trials.iter().map(|t| t.timing.clone()).collect(),
                });
                cell += 1;
            }
        }
    }
    Ok(rows)
}

/// Comparison table and per-frame curves. Contains no timing, so it is
/// reproducible byte for byte.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out =
        String::from("# mode tout flow_sigma flip seeds vpq_mean vpq_std iou_mean iou_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{} {} {:.4} {:.4} {:.4} {:.4}",
            r.key(),
            r.seeds.len(),
            r.vpq_mean(),
            std_dev(&r.vpq),
            r.iou_mean(),
            std_dev(&r.iou)
        );
    }
    out.push_str("# curve mode tout flow_sigma flip frame pq_mean\n");
    for r in rows {
        for (t, q) in r.curve.iter().enumerate() {
            let _ = writeln!(out, "curve {} {t} {q:.4}", r.key());
        }
    }
    out
}

/// Mean microseconds per seed for each stage, plus the total.
pub fn format_timing(rows: &[BenchRow]) -> String {
    let mut out = String::from("# mode tout flow_sigma flip stage mean_us_per_seed\n");
    for r in rows {
        let n = r.timing.len().max(1) as f64;
        let mut stages: Vec<&'static str> = Vec::new();
        for t in &r.timing {
            for s in t.stages() {
                if !stages.contains(&s) {
                    stages.push(s);
                }
            }
        }
        for s in stages {
            let total: Duration = r.timing.iter().map(|t| t.stage_total(s)).sum();
            let _ = writeln!(out, "{} {s} {:.3}", r.key(), total.as_secs_f64() * 1e6 / n);
        }
        let _ = writeln!(
            out,
            "{} total {:.3}",
            r.key(),
            r.total_time().as_secs_f64() * 1e6 / n
        );
    }
    out
}

/// Runs the matrix and writes `bench.txt`, plus `bench_timing.txt` when timing is on.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path) -> Result<Vec<BenchRow>> {
    let rows = run_bench(cfg)?;
    create_dir(out)?;
    let mut files = vec![(TABLE_FILE, format_table(&rows))];
    if cfg.timing {
        files.push((TIMING_FILE, format_timing(&rows)));
    }
    for (name, text) in files {
        let p = out.join(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(rows)
}
