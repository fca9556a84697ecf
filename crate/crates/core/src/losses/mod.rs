//! Reference training-loss kernels with analytic gradients.
//!
//! Pixel losses are sums over the image unless [`Reduction::Mean`] is asked
//! for. The L1 subgradient at zero is zero.

pub mod check;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoolMask, Image, Rgb, RgbaMask};

pub use check::{
    finite_diff_check, loss_vectors, FiniteDiffOptions, GradCheck, LossVectors, LOSS_VECTOR_SEEDS,
};

/// Binary lip region, applied to all four channels.
pub type LipMask = BoolMask;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sum,
    /// Divided by the number of summed entries.
    Mean,
}

/// A loss value and its gradient with respect to the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: RgbaMask,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zeros_like(m: &RgbaMask) -> RgbaMask {
    Image::filled(m.width(), m.height(), [0.0; 4])
}

/// Alpha-gated L1 on the color channels: `sum gt_A * |pred_k - gt_k|`.
pub fn recon_alpha_weighted(pred: &RgbaMask, gt: &RgbaMask) -> Result<LossGrad> {
    recon_alpha_weighted_with(pred, gt, Reduction::Sum)
}

pub fn recon_alpha_weighted_with(
    pred: &RgbaMask,
    gt: &RgbaMask,
    reduction: Reduction,
) -> Result<LossGrad> {
    pred.check_same_dims(gt)?;
    let norm = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / (3 * pred.len()).max(1) as f64,
    };
    let mut value = 0.0;
    let mut grad = zeros_like(pred);
    for ((p, g), d) in pred.pixels().iter().zip(gt.pixels()).zip(grad.pixels_mut()) {
        let a = g[3];
        for k in 0..3 {
            let diff = p[k] - g[k];
            value += a * diff.abs();
            d[k] = a * sign(diff) * norm;
        }
    }
    Ok(LossGrad {
        value: value * norm,
        grad,
    })
}

/// L1 between the alpha channels.
pub fn alpha_l1(pred: &RgbaMask, gt: &RgbaMask) -> Result<LossGrad> {
    alpha_l1_with(pred, gt, Reduction::Sum)
}

pub fn alpha_l1_with(pred: &RgbaMask, gt: &RgbaMask, reduction: Reduction) -> Result<LossGrad> {
    pred.check_same_dims(gt)?;
    let norm = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / pred.len().max(1) as f64,
    };
    let mut value = 0.0;
    let mut grad = zeros_like(pred);
    for ((p, g), d) in pred.pixels().iter().zip(gt.pixels()).zip(grad.pixels_mut()) {
        let diff = p[3] - g[3];
        value += diff.abs();
        d[3] = sign(diff) * norm;
    }
    Ok(LossGrad {
        value: value * norm,
        grad,
    })
}

fn support_size(mask: &RgbaMask, m: &LipMask) -> Result<usize> {
    mask.check_same_dims(m)?;
    let n = m.pixels().iter().filter(|&&b| b).count();
    if n == 0 {
        return Err(Error::EmptyLipMask);
    }
    Ok(n)
}

/// Per-channel RGB mean over the support of `m`.
pub fn masked_mean_color(mask: &RgbaMask, m: &LipMask) -> Result<Rgb> {
    let e = MaskedMean::default().estimate(mask, m)?;
    Ok([e[0], e[1], e[2]])
}

/// Maps a masked RGBA prediction to a color descriptor.
///
/// Implementations are treated as frozen: gradients reach the mask only.
pub trait ColorEstimator {
    fn estimate(&self, mask: &RgbaMask, m: &LipMask) -> Result<Vec<f64>>;

    /// Vector-Jacobian product: gradient of `<upstream, estimate(mask)>`
    /// with respect to `mask`.
    fn vjp(&self, mask: &RgbaMask, m: &LipMask, upstream: &[f64]) -> Result<RgbaMask>;
}

/// The exact masked mean. With `include_alpha` the descriptor gains the mean
/// alpha as a fourth entry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedMean {
    pub include_alpha: bool,
}

impl MaskedMean {
    fn channels(&self) -> usize {
        if self.include_alpha {
            4
        } else {
            3
        }
    }
}

impl ColorEstimator for MaskedMean {
    fn estimate(&self, mask: &RgbaMask, m: &LipMask) -> Result<Vec<f64>> {
        let n = support_size(mask, m)?;
        let c = self.channels();
        let mut sum = vec![0.0; c];
        for (p, &inside) in mask.pixels().iter().zip(m.pixels()) {
            if inside {
                for k in 0..c {
                    sum[k] += p[k];
                }
            }
        }
        Ok(sum.into_iter().map(|s| s / n as f64).collect())
    }

    fn vjp(&self, mask: &RgbaMask, m: &LipMask, upstream: &[f64]) -> Result<RgbaMask> {
        let n = support_size(mask, m)? as f64;
        let c = self.channels();
        if upstream.len() != c {
            return Err(Error::InvalidParameter(format!(
                "upstream gradient has {} entries, estimator has {c}",
                upstream.len()
            )));
        }
        let mut g = [0.0; 4];
        for k in 0..c {
            g[k] = upstream[k] / n;
        }
        Ok(Image::from_fn(mask.width(), mask.height(), |x, y| {
            if *m.get(x, y) {
                g
            } else {
                [0.0; 4]
            }
        }))
    }
}

/// Euclidean distance between estimator outputs of `pred` and `gt`.
pub fn lip_color_loss(
    pred: &RgbaMask,
    gt: &RgbaMask,
    m: &LipMask,
    c: &dyn ColorEstimator,
) -> Result<LossGrad> {
    pred.check_same_dims(gt)?;
    let ep = c.estimate(pred, m)?;
    let eg = c.estimate(gt, m)?;
    let diff: Vec<f64> = ep.iter().zip(&eg).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let grad = if value > 0.0 {
        let unit: Vec<f64> = diff.iter().map(|d| d / value).collect();
        c.vjp(pred, m, &unit)?
    } else {
        zeros_like(pred)
    };
    Ok(LossGrad { value, grad })
}

/// Color loss against the plain RGB masked mean, with no learned estimator.
pub fn lip_color_loss_noreg(pred: &RgbaMask, gt: &RgbaMask, m: &LipMask) -> Result<LossGrad> {
    lip_color_loss(pred, gt, m, &MaskedMean::default())
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of `logits` against all-real or all-fake targets,
/// with its gradient per logit.
pub fn adversarial_bce(logits: &[f64], target_real: bool) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::InvalidParameter("no logits".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite logit".into()));
    }
    let n = logits.len() as f64;
    let t = if target_real { 1.0 } else { 0.0 };
    let value = logits
        .iter()
        .map(|&x| {
            if target_real {
                softplus(-x)
            } else {
                softplus(x)
            }
        })
        .sum::<f64>()
        / n;
    let grad = logits.iter().map(|&x| (sigmoid(x) - t) / n).collect();
    Ok((value, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Lip,
    Eye,
    Cheek,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Lip, Part::Eye, Part::Cheek];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartWeight {
    pub recon: f64,
    pub alpha: f64,
    pub adv: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartWeights {
    pub lip: PartWeight,
    pub eye: PartWeight,
    pub cheek: PartWeight,
    /// Color term, lip part only.
    pub color_lip: f64,
}

impl Default for PartWeights {
    fn default() -> Self {
        let w = PartWeight {
            recon: 100.0,
            alpha: 100.0,
            adv: 10.0,
        };
        PartWeights {
            lip: w,
            eye: w,
            cheek: w,
            color_lip: 50.0,
        }
    }
}

impl PartWeights {
    pub fn get(&self, part: Part) -> PartWeight {
        match part {
            Part::Lip => self.lip,
            Part::Eye => self.eye,
            Part::Cheek => self.cheek,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = Part::ALL
            .iter()
            .flat_map(|&p| {
                let w = self.get(p);
                [w.recon, w.alpha, w.adv]
            })
            .chain([self.color_lip]);
        for v in all {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative loss weight {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> PartWeights {
        let f = |w: PartWeight| PartWeight {
            recon: w.recon * s,
            alpha: w.alpha * s,
            adv: w.adv * s,
        };
        PartWeights {
            lip: f(self.lip),
            eye: f(self.eye),
            cheek: f(self.cheek),
            color_lip: self.color_lip * s,
        }
    }
}

/// Loss components of one part. `color` is ignored outside the lip part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartLosses {
    pub recon: f64,
    pub alpha: f64,
    pub color: f64,
    pub adv_g: f64,
    pub adv_d: f64,
}

/// Weighted sum of the per-part components.
pub fn total_loss(parts: &[(Part, PartLosses)], w: &PartWeights) -> Result<f64> {
    w.validate()?;
    let mut total = 0.0;
    for &(part, l) in parts {
        if [l.recon, l.alpha, l.color, l.adv_g, l.adv_d]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "negative {part:?} loss component"
            )));
        }
        let pw = w.get(part);
        total += pw.recon * l.recon + pw.alpha * l.alpha + pw.adv * (l.adv_g + l.adv_d);
        if part == Part::Lip {
            total += w.color_lip * l.color;
        }
    }
    Ok(total)
}
