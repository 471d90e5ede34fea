//! Segmentation IoU and video panoptic quality over a predicted horizon.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::assoc::TimingReport;
use crate::error::{Error, Result};
use crate::grid::{InstanceGrid, SegGrid};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::MissingInput("empty sequence".into()));
    }
    Ok(())
}

fn check_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            expected: b,
            actual: a,
        });
    }
    Ok(())
}

/// Jaccard index of two masks; two empty masks score 1.
pub fn mask_iou(pred: &[bool], gt: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean per-frame IoU of `pred` binarized at `threshold` against `gt` (binarized at 0.5).
pub fn iou_seq(pred: &[SegGrid], gt: &[SegGrid], threshold: f32) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        check_shape(p.shape(), g.shape())?;
        sum += mask_iou(&p.binarize(threshold), &g.binarize(0.5));
    }
    Ok(sum / pred.len() as f64)
}

/// Same as [`iou_seq`] on the foreground masks of instance maps.
pub fn iou_seq_instances(pred: &[InstanceGrid], gt: &[InstanceGrid]) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        check_shape(p.shape(), g.shape())?;
        let pm: Vec<bool> = p.ids().iter().map(|&v| v != 0).collect();
        let gm: Vec<bool> = g.ids().iter().map(|&v| v != 0).collect();
        sum += mask_iou(&pm, &gm);
    }
    Ok(sum / pred.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanopticMatch {
    /// `(pred_id, gt_id, iou)`, sorted by `gt_id`.
    pub tp: Vec<(u32, u32, f64)>,
    pub fp: Vec<u32>,
    pub fn_: Vec<u32>,
}

/// Matches instances whose mask IoU exceeds 0.5; at most one such partner exists
/// for each instance.
pub fn panoptic_match(pred: &InstanceGrid, gt: &InstanceGrid) -> Result<PanopticMatch> {
    check_shape(pred.shape(), gt.shape())?;
    let mut area_p: BTreeMap<u32, usize> = BTreeMap::new();
    let mut area_g: BTreeMap<u32, usize> = BTreeMap::new();
    let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
    for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
        if p != 0 {
            *area_p.entry(p).or_insert(0) += 1;
        }
        if g != 0 {
            *area_g.entry(g).or_insert(0) += 1;
        }
        if p != 0 && g != 0 {
            *inter.entry((p, g)).or_insert(0) += 1;
        }
    }
    let mut tp: Vec<(u32, u32, f64)> = inter
        .iter()
        .filter_map(|(&(p, g), &i)| {
            let iou = i as f64 / (area_p[&p] + area_g[&g] - i) as f64;
            (iou > 0.5).then_some((p, g, iou))
        })
        .collect();
    tp.sort_by_key(|&(_, g, _)| g);
    let fp = area_p
        .keys()
        .copied()
        .filter(|p| !tp.iter().any(|t| t.0 == *p))
        .collect();
    let fn_ = area_g
        .keys()
        .copied()
        .filter(|g| !tp.iter().any(|t| t.1 == *g))
        .collect();
    Ok(PanopticMatch { tp, fp, fn_ })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameStats {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub soft_iou_sum: f64,
}

impl FrameStats {
    /// Panoptic quality of the frame; a frame with nothing to match scores 1.
    pub fn quality(&self) -> f64 {
        let denom = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        if denom == 0.0 {
            1.0
        } else {
            self.soft_iou_sum / denom
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpqResult {
    pub vpq: f64,
    pub per_frame: Vec<FrameStats>,
}

/// Video panoptic quality: per-frame panoptic quality where a matched pair only
/// counts as a true positive if it agrees with the correspondence fixed when either
/// of its IDs was first matched. Disagreeing pairs count as one FP and one FN.
/// The result is the mean over frames.
pub fn vpq_seq(pred: &[InstanceGrid], gt: &[InstanceGrid]) -> Result<VpqResult> {
    check_lengths(pred.len(), gt.len())?;
    let mut gt_to_pred: HashMap<u32, u32> = HashMap::new();
    let mut pred_to_gt: HashMap<u32, u32> = HashMap::new();
    let mut per_frame = Vec::with_capacity(pred.len());
    for (p, g) in pred.iter().zip(gt) {
        let m = panoptic_match(p, g)?;
        let mut stats = FrameStats {
            fp: m.fp.len(),
            fn_: m.fn_.len(),
            ..FrameStats::default()
        };
        for (pid, gid, iou) in m.tp {
            let consistent = gt_to_pred.get(&gid).is_none_or(|&q| q == pid)
                && pred_to_gt.get(&pid).is_none_or(|&q| q == gid);
            if consistent {
                gt_to_pred.insert(gid, pid);
                pred_to_gt.insert(pid, gid);
                stats.tp += 1;
                stats.soft_iou_sum += iou;
            } else {
                stats.fp += 1;
                stats.fn_ += 1;
            }
        }
        per_frame.push(stats);
    }
    let vpq = per_frame.iter().map(FrameStats::quality).sum::<f64>() / per_frame.len() as f64;
    Ok(VpqResult { vpq, per_frame })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub iou: f64,
    pub vpq: f64,
    pub per_frame: Vec<FrameStats>,
    pub runtime: Option<TimingReport>,
}

impl MetricsReport {
    pub fn evaluate(pred: &[InstanceGrid], gt: &[InstanceGrid]) -> Result<Self> {
        let iou = iou_seq_instances(pred, gt)?;
        let VpqResult { vpq, per_frame } = vpq_seq(pred, gt)?;
        Ok(Self {
            iou,
            vpq,
            per_frame,
            runtime: None,
        })
    }

    /// `key=value` lines: totals to 4 decimals, then one line per frame and stage.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "iou={:.4}", self.iou);
        let _ = writeln!(out, "vpq={:.4}", self.vpq);
        let _ = writeln!(out, "frames={}", self.per_frame.len());
        for (t, f) in self.per_frame.iter().enumerate() {
            let _ = writeln!(
                out,
                "frame.{t}=tp:{} fp:{} fn:{} soft_iou:{:.6} pq:{:.4}",
                f.tp,
                f.fp,
                f.fn_,
                f.soft_iou_sum,
                f.quality()
            );
        }
        if let Some(timing) = &self.runtime {
            for stage in timing.stages() {
                let _ = writeln!(
                    out,
                    "runtime.{stage}_us={:.3}",
                    timing.stage_total(stage).as_secs_f64() * 1e6
                );
            }
        }
        out
    }
}
