//! Turns ground-truth labels into imperfect predictions.
//!
//! Corruptions are applied per frame in a fixed order, each frame drawing from its
//! own random stream (`PERTURB + frame index`):
//!
//! 1. instance dropout: every instance is removed from all modalities with
//!    `instance_dropout_prob`;
//! 2. boundary flips: every boundary cell of an instance (4-adjacent to a cell with a
//!    different value) is eroded with `boundary_flip_prob`, and every background cell
//!    4-adjacent to an instance is dilated into the smallest adjacent instance with the
//!    same probability; dilated cells receive that instance's label formulas;
//! 3. false positives: `false_positive_rate` spurious rectangular blobs per frame on
//!    background (the fractional part is a Bernoulli draw), rendered as static
//!    instances in every modality;
//! 4. flow noise: independent `N(0, flow_sigma^2)` on both channels of the offset,
//!    forward flow and backward flow at every foreground cell.
//!
//! Identity is never moved between instances: dilation only claims background.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{FlowGrid, GridSpec, InstanceGrid, SegGrid};
use crate::labelgen::{FrameLabels, LabelSet};

use super::rng::{streams, DetRng};

const FP_MIN_SIDE: u64 = 3;
const FP_MAX_SIDE: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation of additive flow noise, cells.
    pub flow_sigma: f64,
    pub boundary_flip_prob: f64,
    pub instance_dropout_prob: f64,
    /// Expected spurious blobs per frame.
    pub false_positive_rate: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            flow_sigma: 0.0,
            boundary_flip_prob: 0.0,
            instance_dropout_prob: 0.0,
            false_positive_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.flow_sigma >= 0.0 && self.flow_sigma.is_finite()) {
            return Err(Error::InvalidConfig(
                "flow_sigma must be non-negative".into(),
            ));
        }
        if !prob(self.boundary_flip_prob) || !prob(self.instance_dropout_prob) {
            return Err(Error::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "false_positive_rate must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// Predicted modalities frame by frame, aligned with the source [`LabelSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub spec: GridSpec,
    /// `t` of the first entry, -1 for a full label set.
    pub first_t: i32,
    pub seg: Vec<SegGrid>,
    pub centerness: Vec<SegGrid>,
    pub offset: Vec<FlowGrid>,
    pub fwd_flow: Vec<FlowGrid>,
    pub back_flow: Vec<FlowGrid>,
}

impl Prediction {
    /// Uncorrupted copy of the labels.
    pub fn from_labels(labels: &LabelSet) -> Self {
        Self {
            spec: labels.spec,
            first_t: labels.frames.first().map_or(-1, |f| f.t),
            seg: labels.frames.iter().map(|f| f.seg.clone()).collect(),
            centerness: labels.frames.iter().map(|f| f.centerness.clone()).collect(),
            offset: labels.frames.iter().map(|f| f.offset.clone()).collect(),
            fwd_flow: labels.frames.iter().map(|f| f.fwd_flow.clone()).collect(),
            back_flow: labels.frames.iter().map(|f| f.back_flow.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.seg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg.is_empty()
    }
}

/// Per-instance constants needed to extend label formulas to new cells.
struct InstanceModel {
    center: (f64, f64),
    /// Previous center minus current center.
    back_shift: (f64, f64),
    fwd: (f32, f32),
}

fn instance_models(frame: &FrameLabels) -> BTreeMap<u32, InstanceModel> {
    let mut best: BTreeMap<u32, (f32, (usize, usize))> = BTreeMap::new();
    let (h, w) = frame.inst.shape();
    for r in 0..h {
        for c in 0..w {
            let id = frame.inst.get(r, c);
            if id == 0 {
                continue;
            }
            let (by, bx) = frame.back_flow.get(r, c);
            let mag = by * by + bx * bx;
            let e = best.entry(id).or_insert((-1.0, (r, c)));
            if mag > e.0 {
                *e = (mag, (r, c));
            }
        }
    }
    best.into_iter()
        .filter_map(|(id, (mag, (r, c)))| {
            let center = frame.centers.get(id)?;
            let (by, bx) = frame.back_flow.get(r, c);
            let (oy, ox) = frame.offset.get(r, c);
            let back_shift = if mag > 0.0 {
                ((by - oy) as f64, (bx - ox) as f64)
            } else {
                (0.0, 0.0)
            };
            Some((
                id,
                InstanceModel {
                    center: (center.row, center.col),
                    back_shift,
                    fwd: frame.fwd_flow.get(r, c),
                },
            ))
        })
        .collect()
}

struct FrameOut {
    seg: SegGrid,
    centerness: SegGrid,
    offset: FlowGrid,
    fwd_flow: FlowGrid,
    back_flow: FlowGrid,
}

/// Cells that may be removed, and background cells that may join a neighbouring instance.
type Candidates = (Vec<(usize, usize)>, Vec<(usize, usize, u32)>);

fn boundary_candidates(inst: &InstanceGrid) -> Candidates {
    let (h, w) = inst.shape();
    let mut erode = Vec::new();
    let mut dilate = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let id = inst.get(r, c);
            let neighbours = [
                (r > 0).then(|| (r - 1, c)),
                (r + 1 < h).then(|| (r + 1, c)),
                (c > 0).then(|| (r, c - 1)),
                (c + 1 < w).then(|| (r, c + 1)),
            ];
            let values = neighbours
                .iter()
                .flatten()
                .map(|&(nr, nc)| inst.get(nr, nc));
            if id != 0 {
                if values.into_iter().any(|v| v != id) {
                    erode.push((r, c));
                }
            } else if let Some(owner) = values.filter(|&v| v != 0).min() {
                dilate.push((r, c, owner));
            }
        }
    }
    (erode, dilate)
}

fn perturb_frame(
    frame: &FrameLabels,
    noise: &NoiseConfig,
    sigma_centerness: f64,
    flow_threshold: f64,
    rng: &mut DetRng,
) -> FrameOut {
    let (h, w) = frame.inst.shape();
    let mut models = instance_models(frame);

    let mut inst = frame.inst.clone();
    if noise.instance_dropout_prob > 0.0 {
        let dropped: Vec<u32> = frame
            .inst
            .unique_ids()
            .into_iter()
            .filter(|_| rng.bernoulli(noise.instance_dropout_prob))
            .collect();
        if !dropped.is_empty() {
            inst = inst.relabel(|id| if dropped.contains(&id) { 0 } else { id });
        }
    }

    if noise.boundary_flip_prob > 0.0 {
        let (erode, dilate) = boundary_candidates(&inst);
        let eroded: Vec<(usize, usize)> = erode
            .into_iter()
            .filter(|_| rng.bernoulli(noise.boundary_flip_prob))
            .collect();
        let dilated: Vec<(usize, usize, u32)> = dilate
            .into_iter()
            .filter(|_| rng.bernoulli(noise.boundary_flip_prob))
            .collect();
        for (r, c) in eroded {
            inst.set(r, c, 0);
        }
        for (r, c, id) in dilated {
            inst.set(r, c, id);
        }
    }

    if noise.false_positive_rate > 0.0 {
        let whole = noise.false_positive_rate.floor() as u64;
        let extra = u64::from(rng.bernoulli(noise.false_positive_rate.fract()));
        let mut next_id = frame.inst.unique_ids().last().copied().unwrap_or(0) + 1;
        for _ in 0..whole + extra {
            let bh =
                (FP_MIN_SIDE + rng.below(FP_MAX_SIDE - FP_MIN_SIDE + 1)).min(h as u64) as usize;
            let bw =
                (FP_MIN_SIDE + rng.below(FP_MAX_SIDE - FP_MIN_SIDE + 1)).min(w as u64) as usize;
            let r0 = rng.below((h - bh + 1) as u64) as usize;
            let c0 = rng.below((w - bw + 1) as u64) as usize;
            let cells: Vec<(usize, usize)> = (r0..r0 + bh)
                .flat_map(|r| (c0..c0 + bw).map(move |c| (r, c)))
                .filter(|&(r, c)| inst.get(r, c) == 0)
                .collect();
            if cells.is_empty() {
                continue;
            }
            let n = cells.len() as f64;
            let center = (
                cells.iter().map(|p| p.0 as f64).sum::<f64>() / n,
                cells.iter().map(|p| p.1 as f64).sum::<f64>() / n,
            );
            for &(r, c) in &cells {
                inst.set(r, c, next_id);
            }
            models.insert(
                next_id,
                InstanceModel {
                    center,
                    back_shift: (0.0, 0.0),
                    fwd: (0.0, 0.0),
                },
            );
            next_id += 1;
        }
    }

    let mut out = FrameOut {
        seg: SegGrid::from_instances(&inst),
        centerness: SegGrid::zeros(h, w),
        offset: FlowGrid::zeros(h, w),
        fwd_flow: FlowGrid::zeros(h, w),
        back_flow: FlowGrid::zeros(h, w),
    };
    let denom = 2.0 * sigma_centerness * sigma_centerness;
    let eps2 = (flow_threshold * flow_threshold) as f32;
    for r in 0..h {
        for c in 0..w {
            let id = inst.get(r, c);
            if id == 0 {
                continue;
            }
            if frame.inst.get(r, c) == id {
                out.centerness.set(r, c, frame.centerness.get(r, c));
                out.offset.set(r, c, frame.offset.get(r, c));
                out.fwd_flow.set(r, c, frame.fwd_flow.get(r, c));
                out.back_flow.set(r, c, frame.back_flow.get(r, c));
                continue;
            }
            let m = &models[&id];
            let d2 =
                (r as f64 - m.center.0.round()).powi(2) + (c as f64 - m.center.1.round()).powi(2);
            out.centerness.set(r, c, (-d2 / denom).exp() as f32);
            let off = (
                (m.center.0 - r as f64) as f32,
                (m.center.1 - c as f64) as f32,
            );
            out.offset.set(r, c, off);
            let back = (
                (off.0 as f64 + m.back_shift.0) as f32,
                (off.1 as f64 + m.back_shift.1) as f32,
            );
            let keep = |v: (f32, f32)| {
                if v.0 * v.0 + v.1 * v.1 < eps2 {
                    (0.0, 0.0)
                } else {
                    v
                }
            };
            out.back_flow.set(r, c, keep(back));
            out.fwd_flow.set(r, c, keep(m.fwd));
        }
    }

    if noise.flow_sigma > 0.0 {
        let s = noise.flow_sigma;
        for r in 0..h {
            for c in 0..w {
                if inst.get(r, c) == 0 {
                    continue;
                }
                for field in [&mut out.offset, &mut out.fwd_flow, &mut out.back_flow] {
                    let (dy, dx) = field.get(r, c);
                    let ny = dy + (s * rng.gaussian()) as f32;
                    let nx = dx + (s * rng.gaussian()) as f32;
                    field.set(r, c, (ny, nx));
                }
            }
        }
    }
    out
}

/// Corrupts every frame of `labels` according to `noise`; deterministic in `noise.seed`.
pub fn perturb(labels: &LabelSet, noise: &NoiseConfig) -> Result<Prediction> {
    noise.validate()?;
    let mut pred = Prediction {
        spec: labels.spec,
        first_t: labels.frames.first().map_or(-1, |f| f.t),
        seg: Vec::new(),
        centerness: Vec::new(),
        offset: Vec::new(),
        fwd_flow: Vec::new(),
        back_flow: Vec::new(),
    };
    for (k, frame) in labels.frames.iter().enumerate() {
        let mut rng = DetRng::new(noise.seed, streams::PERTURB + k as u64);
        let out = perturb_frame(
            frame,
            noise,
            labels.cfg.centerness_sigma,
            labels.cfg.flow_threshold,
            &mut rng,
        );
        pred.seg.push(out.seg);
        pred.centerness.push(out.centerness);
        pred.offset.push(out.offset);
        pred.fwd_flow.push(out.fwd_flow);
        pred.back_flow.push(out.back_flow);
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelgen::{generate_labels, LabelConfig};
    use crate::sim::{simulate, ScenarioConfig};

    fn labels(seed: u64) -> LabelSet {
        let s = simulate(&ScenarioConfig::long_range(20, 10, seed)).unwrap();
        generate_labels(
            &s,
            &GridSpec::long_range(s.frames[0].ego),
            2,
            4,
            &LabelConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let l = labels(1);
        let p = perturb(
            &l,
            &NoiseConfig {
                seed: 99,
                ..NoiseConfig::none()
            },
        )
        .unwrap();
        assert_eq!(p, Prediction::from_labels(&l));
    }

    #[test]
    fn flow_noise_has_requested_spread() {
        let l = labels(2);
        let noise = NoiseConfig {
            flow_sigma: 1.0,
            seed: 5,
            ..NoiseConfig::none()
        };
        let p = perturb(&l, &noise).unwrap();
        let (mut n, mut s, mut s2) = (0usize, 0.0f64, 0.0f64);
        for (k, f) in l.frames.iter().enumerate() {
            let (h, w) = f.inst.shape();
            for r in 0..h {
                for c in 0..w {
                    if f.inst.get(r, c) == 0 {
                        continue;
                    }
                    for (clean, noisy) in [
                        (&f.back_flow, &p.back_flow[k]),
                        (&f.offset, &p.offset[k]),
                        (&f.fwd_flow, &p.fwd_flow[k]),
                    ] {
                        let (a, b) = (clean.get(r, c), noisy.get(r, c));
                        for d in [(b.0 - a.0) as f64, (b.1 - a.1) as f64] {
                            n += 1;
                            s += d;
                            s2 += d * d;
                        }
                    }
                }
            }
        }
        assert!(n >= 10_000, "only {n} samples");
        let mean = s / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!((std - 1.0).abs() < 0.05, "std {std}");
        // Background stays clean.
        assert_eq!(p.seg, Prediction::from_labels(&l).seg);
    }

    #[test]
    fn full_dropout_empties_every_frame() {
        let l = labels(3);
        let p = perturb(
            &l,
            &NoiseConfig {
                instance_dropout_prob: 1.0,
                flow_sigma: 2.0,
                ..NoiseConfig::none()
            },
        )
        .unwrap();
        for k in 0..p.len() {
            assert!(p.seg[k].values().iter().all(|&v| v == 0.0));
            assert!(p.centerness[k].values().iter().all(|&v| v == 0.0));
            assert_eq!(p.back_flow[k], FlowGrid::zeros(200, 200));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let l = labels(4);
        let noise = NoiseConfig {
            flow_sigma: 1.0,
            boundary_flip_prob: 0.1,
            instance_dropout_prob: 0.1,
            false_positive_rate: 1.5,
            seed: 11,
        };
        assert_eq!(perturb(&l, &noise).unwrap(), perturb(&l, &noise).unwrap());
        assert_ne!(
            perturb(&l, &noise).unwrap(),
            perturb(&l, &NoiseConfig { seed: 12, ..noise }).unwrap()
        );
    }

    #[test]
    fn boundary_flips_stay_near_own_instance() {
        let l = labels(5);
        let noise = NoiseConfig {
            boundary_flip_prob: 0.5,
            seed: 3,
            ..NoiseConfig::none()
        };
        let p = perturb(&l, &noise).unwrap();
        for (k, f) in l.frames.iter().enumerate() {
            let (h, w) = f.inst.shape();
            let mut changed = 0;
            for r in 0..h {
                for c in 0..w {
                    let was = f.inst.get(r, c) != 0;
                    let now = p.seg[k].get(r, c) == 1.0;
                    if was != now {
                        changed += 1;
                    }
                    if now && !was {
                        // Dilated cells point at a real instance center within a few cells.
                        let (oy, ox) = p.offset[k].get(r, c);
                        let (tr, tc) = (
                            (r as f32 + oy).round() as usize,
                            (c as f32 + ox).round() as usize,
                        );
                        assert_ne!(f.inst.get(tr, tc), 0);
                    }
                }
            }
            assert!(changed > 0 || f.inst.foreground_count() == 0);
        }
    }

    #[test]
    fn false_positives_add_blobs() {
        let l = labels(6);
        let p = perturb(
            &l,
            &NoiseConfig {
                false_positive_rate: 2.0,
                seed: 1,
                ..NoiseConfig::none()
            },
        )
        .unwrap();
        for (k, f) in l.frames.iter().enumerate() {
            let extra =
                p.seg[k].values().iter().filter(|&&v| v == 1.0).count() - f.inst.foreground_count();
            assert!(extra >= (FP_MIN_SIDE * FP_MIN_SIDE) as usize);
        }
    }

    #[test]
    fn invalid_noise_rejected() {
        let l = labels(7);
        assert!(perturb(
            &l,
            &NoiseConfig {
                boundary_flip_prob: 1.5,
                ..NoiseConfig::none()
            }
        )
        .is_err());
        assert!(perturb(
            &l,
            &NoiseConfig {
                flow_sigma: -1.0,
                ..NoiseConfig::none()
            }
        )
        .is_err());
    }
}
