//! Forward evaluation of the training objective.

use crate::error::{Error, Result};
use crate::grid::{FlowGrid, SegGrid};

/// Probabilities are clamped to `[CE_EPS, 1 - CE_EPS]` before taking logs.
pub const CE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Fixed {
        lambda_seg: f64,
        lambda_flow: f64,
    },
    /// Frozen log-variances: each term becomes `exp(-s) * L + s`.
    Uncertainty {
        s_seg: f64,
        s_flow: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub top_k_fraction: f64,
    pub gamma: f64,
    pub weighting: Weighting,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            top_k_fraction: 0.25,
            gamma: 0.95,
            weighting: Weighting::Fixed {
                lambda_seg: 1.0,
                lambda_flow: 1.0,
            },
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_k_fraction > 0.0 && self.top_k_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "top_k_fraction {} not in (0, 1]",
                self.top_k_fraction
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        match self.weighting {
            Weighting::Fixed {
                lambda_seg,
                lambda_flow,
            } if !(lambda_seg >= 0.0 && lambda_flow >= 0.0) => Err(Error::InvalidConfig(
                "loss weights must be non-negative".into(),
            )),
            Weighting::Uncertainty { s_seg, s_flow }
                if !(s_seg.is_finite() && s_flow.is_finite()) =>
            {
                Err(Error::InvalidConfig("log-variances must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Per-cell binary cross-entropy of `pred` against the binary target `gt`.
pub fn cross_entropy_map(pred: &SegGrid, gt: &SegGrid) -> Result<Vec<f64>> {
    if pred.shape() != gt.shape() {
        return Err(Error::Dimension {
            expected: gt.shape(),
            actual: pred.shape(),
        });
    }
    Ok(pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &y)| {
            let p = (p as f64).clamp(CE_EPS, 1.0 - CE_EPS);
            let y = y as f64;
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .collect())
}

/// Mean of the `ceil(k * H * W)` largest per-cell cross-entropy values.
pub fn topk_ce(pred: &SegGrid, gt: &SegGrid, k_fraction: f64) -> Result<f64> {
    if !(k_fraction > 0.0 && k_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "k_fraction {k_fraction} not in (0, 1]"
        )));
    }
    let mut ce = cross_entropy_map(pred, gt)?;
    let k = ((k_fraction * ce.len() as f64).ceil() as usize).clamp(1, ce.len());
    ce.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(ce[..k].iter().sum::<f64>() / k as f64)
}

fn smooth_l1_scalar(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * a * a
    } else {
        a - 0.5
    }
}

/// Mean smooth-L1 residual over all cells and both channels.
pub fn smooth_l1(pred: &FlowGrid, gt: &FlowGrid) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::Dimension {
            expected: gt.shape(),
            actual: pred.shape(),
        });
    }
    let pairs = pred
        .dy()
        .as_slice()
        .iter()
        .zip(gt.dy().as_slice())
        .chain(pred.dx().as_slice().iter().zip(gt.dx().as_slice()));
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (&p, &g)| {
        (s + smooth_l1_scalar(p as f64 - g as f64), n + 1)
    });
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    /// Multipliers actually applied to the segmentation and flow terms.
    pub lambda_seg: f64,
    pub lambda_flow: f64,
}

/// `(1/T) * sum_t gamma^t (l1 * seg_t + l2 * flow_t)`; the uncertainty variant uses
/// `l_i = exp(-s_i)` and adds `s_seg + s_flow` once.
pub fn total_loss(seg: &[f64], flow: &[f64], cfg: &LossConfig) -> Result<TotalLoss> {
    cfg.validate()?;
    if seg.len() != flow.len() {
        return Err(Error::LengthMismatch(seg.len(), flow.len()));
    }
    if seg.is_empty() {
        return Err(Error::MissingInput("no per-frame losses".into()));
    }
    let (lambda_seg, lambda_flow, reg) = match cfg.weighting {
        Weighting::Fixed {
            lambda_seg,
            lambda_flow,
        } => (lambda_seg, lambda_flow, 0.0),
        Weighting::Uncertainty { s_seg, s_flow } => {
            ((-s_seg).exp(), (-s_flow).exp(), s_seg + s_flow)
        }
    };
    let mut discount = 1.0;
    let mut sum = 0.0;
    for (&ls, &lf) in seg.iter().zip(flow) {
        sum += discount * (lambda_seg * ls + lambda_flow * lf);
        discount *= cfg.gamma;
    }
    Ok(TotalLoss {
        value: sum / seg.len() as f64 + reg,
        lambda_seg,
        lambda_flow,
    })
}
