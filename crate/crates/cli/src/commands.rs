use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bevinst::assoc::{run_pipeline, AssocMode, Modalities, TimingReport};
use bevinst::labelgen::{generate_labels, LabelConfig, LabelSet};
use bevinst::losses::{smooth_l1, topk_ce, total_loss, LossConfig};
use bevinst::metrics::MetricsReport;
use bevinst::sim::{perturb, read_scenario, simulate, write_scenario, NoiseConfig, Prediction};
use bevinst::InstanceGrid;

use crate::config::{ExperimentConfig, Preset};
use crate::store::{
    create_dir, read_flow_seq, read_inst_seq, read_manifest, read_seg_seq, write_manifest,
    write_sequence, Manifest,
};

pub const SCENARIO_FILE: &str = "scenario.txt";
pub const TIMING_FILE: &str = "timing.txt";
pub const METRICS_FILE: &str = "metrics.txt";

const LABEL_MODALITIES: [&str; 6] = [
    "seg",
    "inst",
    "centerness",
    "offset",
    "fwd_flow",
    "back_flow",
];
const PRED_MODALITIES: [&str; 5] = ["seg", "centerness", "offset", "fwd_flow", "back_flow"];

/// Writes `<out>/scenario.txt` for the first seed of `cfg`.
pub fn cmd_simulate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let scenario = simulate(&cfg.scenario(seed))?;
    create_dir(out)?;
    let path = out.join(SCENARIO_FILE);
    write_scenario(&scenario, &path)?;
    Ok(path)
}

pub fn write_labels(labels: &LabelSet, out: &Path, present: usize) -> Result<()> {
    create_dir(out)?;
    let f = &labels.frames;
    write_sequence(
        out,
        "seg",
        &f.iter().map(|x| x.seg.clone()).collect::<Vec<_>>(),
    )?;
    write_sequence(
        out,
        "inst",
        &f.iter().map(|x| x.inst.clone()).collect::<Vec<_>>(),
    )?;
    write_sequence(
        out,
        "centerness",
        &f.iter().map(|x| x.centerness.clone()).collect::<Vec<_>>(),
    )?;
    write_sequence(
        out,
        "offset",
        &f.iter().map(|x| x.offset.clone()).collect::<Vec<_>>(),
    )?;
    write_sequence(
        out,
        "fwd_flow",
        &f.iter().map(|x| x.fwd_flow.clone()).collect::<Vec<_>>(),
    )?;
    write_sequence(
        out,
        "back_flow",
        &f.iter().map(|x| x.back_flow.clone()).collect::<Vec<_>>(),
    )?;
    let m = Manifest::new(
        "labels",
        f.len(),
        f.first().map_or(-1, |x| x.t),
        labels.spec,
        &LABEL_MODALITIES,
    )
    .with("present_frame", present)
    .with("centerness_sigma", labels.cfg.centerness_sigma)
    .with("flow_threshold", labels.cfg.flow_threshold);
    write_manifest(out, &m)
}

/// Renders labels for the present frame and `cfg.t_out` predicted frames.
pub fn cmd_labels(scenario: &Path, cfg: &ExperimentConfig, out: &Path) -> Result<LabelSet> {
    cfg.validate()?;
    let s = read_scenario(scenario)?;
    let labels = generate_labels(
        &s,
        &cfg.preset.grid(),
        cfg.present(),
        cfg.t_out,
        &LabelConfig::default(),
    )?;
    write_labels(&labels, out, cfg.present())?;
    Ok(labels)
}

/// Ground truth as stored by [`cmd_labels`].
pub struct StoredLabels {
    pub manifest: Manifest,
    pub inst: Vec<InstanceGrid>,
    pub prediction: Prediction,
    pub cfg: LabelConfig,
}

pub fn read_labels(dir: &Path) -> Result<StoredLabels> {
    let m = read_manifest(dir, "labels")?;
    let mpath = dir.join(crate::store::MANIFEST);
    let cfg = LabelConfig {
        centerness_sigma: m.extra_f64("centerness_sigma", &mpath)?,
        flow_threshold: m.extra_f64("flow_threshold", &mpath)?,
    };
    let prediction = read_prediction_dir(dir, &m)?;
    let inst = read_inst_seq(dir, &m)?;
    Ok(StoredLabels {
        manifest: m,
        inst,
        prediction,
        cfg,
    })
}

fn read_prediction_dir(dir: &Path, m: &Manifest) -> Result<Prediction> {
    Ok(Prediction {
        spec: m.spec,
        first_t: m.first_t,
        seg: read_seg_seq(dir, m, "seg")?,
        centerness: read_seg_seq(dir, m, "centerness")?,
        offset: read_flow_seq(dir, m, "offset")?,
        fwd_flow: read_flow_seq(dir, m, "fwd_flow")?,
        back_flow: read_flow_seq(dir, m, "back_flow")?,
    })
}

fn labels_from_store(stored: &StoredLabels) -> Result<LabelSet> {
    use bevinst::labelgen::{compute_centers, FrameLabels};
    let p = &stored.prediction;
    let frames = (0..stored.inst.len())
        .map(|k| FrameLabels {
            t: p.first_t + k as i32,
            seg: p.seg[k].clone(),
            inst: stored.inst[k].clone(),
            centers: compute_centers(&stored.inst[k]),
            centerness: p.centerness[k].clone(),
            offset: p.offset[k].clone(),
            fwd_flow: p.fwd_flow[k].clone(),
            back_flow: p.back_flow[k].clone(),
        })
        .collect();
    Ok(LabelSet {
        spec: p.spec,
        cfg: stored.cfg,
        frames,
    })
}

pub fn write_prediction(pred: &Prediction, out: &Path, noise: &NoiseConfig) -> Result<()> {
    create_dir(out)?;
    write_sequence(out, "seg", &pred.seg)?;
    write_sequence(out, "centerness", &pred.centerness)?;
    write_sequence(out, "offset", &pred.offset)?;
    write_sequence(out, "fwd_flow", &pred.fwd_flow)?;
    write_sequence(out, "back_flow", &pred.back_flow)?;
    let m = Manifest::new(
        "prediction",
        pred.len(),
        pred.first_t,
        pred.spec,
        &PRED_MODALITIES,
    )
    .with("flow_sigma", noise.flow_sigma)
    .with("boundary_flip_prob", noise.boundary_flip_prob)
    .with("instance_dropout_prob", noise.instance_dropout_prob)
    .with("false_positive_rate", noise.false_positive_rate)
    .with("seed", noise.seed);
    write_manifest(out, &m)
}

pub fn read_prediction(dir: &Path) -> Result<Prediction> {
    let m = read_manifest(dir, "prediction")?;
    read_prediction_dir(dir, &m)
}

/// Corrupts stored labels into predicted modalities.
pub fn cmd_predict(labels_dir: &Path, noise: &NoiseConfig, out: &Path) -> Result<Prediction> {
    let stored = read_labels(labels_dir)?;
    let pred = perturb(&labels_from_store(&stored)?, noise)?;
    write_prediction(&pred, out, noise)?;
    Ok(pred)
}

pub struct AssociateOutput {
    pub instances: Vec<InstanceGrid>,
    pub timing: TimingReport,
}

/// Runs association on a prediction directory, writing `inst_*.bgrd` for the
/// predicted frames plus `timing.txt`.
pub fn cmd_associate(
    pred_dir: &Path,
    mode: AssocMode,
    preset: Option<Preset>,
    out: &Path,
) -> Result<AssociateOutput> {
    let pred = read_prediction(pred_dir)?;
    let preset = match preset {
        Some(p) => p,
        None => Preset::from_grid(&pred.spec).with_context(|| {
            format!(
                "{}: grid matches no preset; pass --preset",
                pred_dir.display()
            )
        })?,
    };
    let result = run_pipeline(Modalities::from(&pred), &preset.assoc(mode))?;
    create_dir(out)?;
    write_sequence(out, "inst", &result.instances)?;
    let m = Manifest::new(
        "instances",
        result.instances.len(),
        pred.first_t + 1,
        pred.spec,
        &["inst"],
    )
    .with("mode", mode.name())
    .with("preset", preset.name());
    write_manifest(out, &m)?;
    let tpath = out.join(TIMING_FILE);
    std::fs::write(&tpath, result.timing.to_text())
        .with_context(|| format!("writing {}", tpath.display()))?;
    Ok(AssociateOutput {
        instances: result.instances,
        timing: result.timing,
    })
}

/// Per-frame and total training-loss components of a prediction against labels.
pub fn loss_report(pred: &Prediction, gt: &Prediction, cfg: &LossConfig) -> Result<String> {
    if pred.len() != gt.len() {
        bail!(
            "prediction has {} frames, labels have {}",
            pred.len(),
            gt.len()
        );
    }
    let mut seg = Vec::new();
    let mut flow = Vec::new();
    for k in 1..pred.len() {
        seg.push(topk_ce(&pred.seg[k], &gt.seg[k], cfg.top_k_fraction)?);
        flow.push(smooth_l1(&pred.back_flow[k], &gt.back_flow[k])?);
    }
    let total = total_loss(&seg, &flow, cfg)?;
    let mut out = String::new();
    for (t, (s, f)) in seg.iter().zip(&flow).enumerate() {
        let _ = writeln!(out, "loss.seg.{t}={s:.6}");
        let _ = writeln!(out, "loss.flow.{t}={f:.6}");
    }
    let _ = writeln!(out, "loss.lambda_seg={:.6}", total.lambda_seg);
    let _ = writeln!(out, "loss.lambda_flow={:.6}", total.lambda_flow);
    let _ = writeln!(out, "loss.total={:.6}", total.value);
    Ok(out)
}

/// Evaluates an association output against stored labels. With `losses`, the
/// prediction directory is also scored with the training objective.
pub fn cmd_eval(
    inst_dir: &Path,
    gt_dir: &Path,
    losses: Option<&Path>,
    out: Option<&Path>,
) -> Result<String> {
    let m = read_manifest(inst_dir, "instances")?;
    let pred = read_inst_seq(inst_dir, &m)?;
    let stored = read_labels(gt_dir)?;
    let offset = usize::try_from(m.first_t - stored.manifest.first_t).with_context(|| {
        format!(
            "{}: predicted frames start before the labels",
            inst_dir.display()
        )
    })?;
    let gt = stored
        .inst
        .get(offset..offset + pred.len())
        .with_context(|| {
            format!(
                "{}: labels do not cover the predicted frames",
                gt_dir.display()
            )
        })?;
    let mut report = MetricsReport::evaluate(&pred, gt)?;
    let tpath = inst_dir.join(TIMING_FILE);
    if tpath.exists() {
        report.runtime = Some(parse_timing(&tpath)?);
    }
    let mut text = report.to_text();
    if let Some(pdir) = losses {
        text.push_str(&loss_report(
            &read_prediction(pdir)?,
            &stored.prediction,
            &LossConfig::default(),
        )?);
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        let p = dir.join(METRICS_FILE);
        std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(text)
}

fn parse_timing(path: &Path) -> Result<TimingReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut report = TimingReport::default();
    for (no, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
    {
        let t: Vec<&str> = line.split_whitespace().collect();
        let parsed = (t.len() == 3)
            .then(|| Some((t[1].parse::<i32>().ok()?, t[2].parse::<f64>().ok()?)))
            .flatten();
        let Some((frame, us)) = parsed else {
            bail!(
                "{}: line {}: expected `stage frame microseconds`",
                path.display(),
                no + 1
            );
        };
        let stage = match t[0] {
            "centers" => "centers",
            "grouping" => "grouping",
            "matching" => "matching",
            "clustering" => "clustering",
            other => bail!(
                "{}: line {}: unknown stage `{other}`",
                path.display(),
                no + 1
            ),
        };
        report.entries.push(bevinst::assoc::StageTiming {
            stage,
            frame,
            elapsed: std::time::Duration::from_secs_f64(us.max(0.0) * 1e-6),
        });
    }
    Ok(report)
}
