use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{FlowGrid, InstanceGrid, SegGrid};
use crate::sim::Prediction;

use super::{
    assign_first_frame, extract_centers, hm::hm_run, warp_associate, AssocConfig, AssocMode,
    IdCounter,
};

/// Predicted modalities for one sample. Index 0 of every sequence is the present
/// frame; the rest are the predicted frames.
#[derive(Debug, Clone, Copy)]
pub struct Modalities<'a> {
    pub seg: &'a [SegGrid],
    pub back_flow: Option<&'a [FlowGrid]>,
    pub centerness: Option<&'a [SegGrid]>,
    pub offset: Option<&'a [FlowGrid]>,
    pub fwd_flow: Option<&'a [FlowGrid]>,
}

impl<'a> From<&'a Prediction> for Modalities<'a> {
    fn from(p: &'a Prediction) -> Self {
        Self {
            seg: &p.seg,
            back_flow: Some(&p.back_flow),
            centerness: Some(&p.centerness),
            offset: Some(&p.offset),
            fwd_flow: Some(&p.fwd_flow),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    /// Frame index relative to the first predicted frame (present frame is -1).
    pub frame: i32,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingReport {
    pub entries: Vec<StageTiming>,
}

impl TimingReport {
    fn record(&mut self, stage: &'static str, frame: i32, elapsed: Duration) {
        self.entries.push(StageTiming {
            stage,
            frame,
            elapsed,
        });
    }

    pub fn total(&self) -> Duration {
        self.entries.iter().map(|e| e.elapsed).sum()
    }

    pub fn stage_total(&self, stage: &str) -> Duration {
        self.entries
            .iter()
            .filter(|e| e.stage == stage)
            .map(|e| e.elapsed)
            .sum()
    }

    /// Stage names in first-seen order.
    pub fn stages(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.stage) {
                out.push(e.stage);
            }
        }
        out
    }

    /// One `stage frame microseconds` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# stage frame microseconds\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {:.3}",
                e.stage,
                e.frame,
                e.elapsed.as_secs_f64() * 1e6
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// One instance map per predicted frame.
    pub instances: Vec<InstanceGrid>,
    pub timing: TimingReport,
}

fn require<'a, T>(field: Option<&'a [T]>, name: &str, len: usize) -> Result<&'a [T]> {
    let seq = field.ok_or_else(|| Error::MissingInput(name.to_string()))?;
    if seq.len() != len {
        return Err(Error::LengthMismatch(seq.len(), len));
    }
    Ok(seq)
}

/// Runs the association selected by `cfg.mode` over all predicted frames.
///
/// Warp mode needs `seg` and `back_flow` and records a `centers` stage for the
/// present frame plus one `grouping` entry per predicted frame. Hm mode needs
/// `seg`, `centerness`, `offset` and `fwd_flow` and records `centers`, `matching`
/// and `clustering` for every predicted frame.
pub fn run_pipeline(input: Modalities<'_>, cfg: &AssocConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let n = input.seg.len();
    if n < 2 {
        return Err(Error::MissingInput(
            "need the present frame and at least one predicted frame".into(),
        ));
    }
    let shape = input.seg[0].shape();
    if let Some(bad) = input.seg.iter().find(|s| s.shape() != shape) {
        return Err(Error::Dimension {
            expected: shape,
            actual: bad.shape(),
        });
    }
    let mut timing = TimingReport::default();
    let instances = match cfg.mode {
        AssocMode::Warp => {
            let back = require(input.back_flow, "back_flow", n)?;
            let clock = Instant::now();
            let centers = extract_centers(&input.seg[0], cfg);
            timing.record("centers", -1, clock.elapsed());
            let mut ids = IdCounter::after(centers.len() as u32);
            let mut out: Vec<InstanceGrid> = Vec::with_capacity(n - 1);
            #[allow(clippy::needless_range_loop)]
            for k in 1..n {
                let clock = Instant::now();
                let inst = match out.last() {
                    None => assign_first_frame(&input.seg[k], &back[k], &centers, cfg, &mut ids),
                    Some(prev) => warp_associate(&input.seg[k], &back[k], prev, cfg, &mut ids),
                };
                timing.record("grouping", k as i32 - 1, clock.elapsed());
                out.push(inst);
            }
            out
        }
        AssocMode::Hm => {
            let centerness = require(input.centerness, "centerness", n)?;
            let offset = require(input.offset, "offset", n)?;
            let fwd = require(input.fwd_flow, "fwd_flow", n)?;
            hm_run(
                &input.seg[1..],
                &centerness[1..],
                &offset[1..],
                &fwd[1..],
                cfg,
                |stage, t, d| timing.record(stage, t as i32, d),
            )
        }
    };
    Ok(PipelineOutput { instances, timing })
}
