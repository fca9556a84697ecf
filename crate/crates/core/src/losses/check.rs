//! Finite-difference gradient checks and the golden loss-vector record.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    adversarial_bce, alpha_l1_with, lip_color_loss, recon_alpha_weighted_with, LipMask, LossGrad,
    MaskedMean, Reduction,
};
use crate::error::Result;
use crate::image::{ContentHash, Image, RgbaMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffOptions {
    pub step: f64,
    /// Coordinates checked; all of them when `None`.
    pub samples: Option<usize>,
    pub seed: u64,
}

impl Default for FiniteDiffOptions {
    fn default() -> Self {
        FiniteDiffOptions {
            step: 1e-3,
            samples: None,
            seed: 0,
        }
    }
}

/// Central differences against an analytic gradient.
///
/// Returns the largest `|numeric - analytic| / max(|numeric|, |analytic|, 1e-2)`
/// over the checked coordinates.
pub fn finite_diff_check(
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    opts: &FiniteDiffOptions,
) -> f64 {
    let (_, analytic) = f(x);
    let coords: Vec<usize> = match opts.samples {
        Some(n) if n < x.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..n).map(|_| rng.random_range(0..x.len())).collect()
        }
        _ => (0..x.len()).collect(),
    };
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in coords {
        probe[i] = x[i] + opts.step;
        let up = f(&probe).0;
        probe[i] = x[i] - opts.step;
        let down = f(&probe).0;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * opts.step);
        let scale = numeric.abs().max(analytic[i].abs()).max(1e-2);
        worst = worst.max((numeric - analytic[i]).abs() / scale);
    }
    worst
}

pub(crate) fn flatten(m: &RgbaMask) -> Vec<f64> {
    m.pixels().iter().flatten().copied().collect()
}

pub(crate) fn unflatten(w: usize, h: usize, v: &[f64]) -> RgbaMask {
    Image::from_fn(w, h, |x, y| {
        let i = 4 * (y * w + x);
        [v[i], v[i + 1], v[i + 2], v[i + 3]]
    })
}

/// Wraps a mask loss as a flat-vector function for [`finite_diff_check`].
pub(crate) fn mask_fn<'a>(
    w: usize,
    h: usize,
    loss: impl Fn(&RgbaMask) -> Result<LossGrad> + 'a,
) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + 'a {
    move |v| {
        let l = loss(&unflatten(w, h, v)).expect("loss on valid input");
        (l.value, flatten(&l.grad))
    }
}

/// Random `pred` near `gt` whose entries keep at least `margin` from every L1 kink.
fn kink_free_pair(rng: &mut ChaCha8Rng, w: usize, h: usize, margin: f64) -> (RgbaMask, RgbaMask) {
    let gt: RgbaMask = Image::from_fn(w, h, |_, _| {
        std::array::from_fn(|_| rng.random_range(0.1..0.9))
    });
    let pred = gt.map(|p| {
        std::array::from_fn(|k| {
            let off = rng.random_range(margin..0.3) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            p[k] + off
        })
    });
    (pred, gt)
}

pub const LOSS_VECTOR_SEEDS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub loss: String,
    pub seed: u64,
    pub pred_sha256: String,
    pub gt_sha256: String,
    pub value: f64,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Loss values and gradient checks on seeded random 8x8 inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossVectors {
    pub normalized: bool,
    pub step: f64,
    pub checks: Vec<GradCheck>,
}

impl LossVectors {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every loss through [`finite_diff_check`] for `seeds` seeds.
pub fn loss_vectors(seeds: usize, normalized: bool) -> LossVectors {
    let (w, h) = (8, 8);
    let step = 1e-3;
    let reduction = if normalized {
        Reduction::Mean
    } else {
        Reduction::Sum
    };
    let opts = FiniteDiffOptions {
        step,
        ..Default::default()
    };
    let mut checks = Vec::new();
    for seed in 0..seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = kink_free_pair(&mut rng, w, h, 10.0 * step);
        let lip: LipMask = Image::from_fn(w, h, |_, _| rng.random::<f64>() < 0.5);
        let lip = if lip.pixels().iter().any(|&b| b) {
            lip
        } else {
            Image::filled(w, h, true)
        };
        let logits: Vec<f64> = (0..16).map(|_| rng.random_range(-6.0..6.0)).collect();
        let x = flatten(&pred);
        let mut push = |loss: &str, value: f64, err: f64, tol: f64, p: String, g: String| {
            checks.push(GradCheck {
                loss: loss.into(),
                seed,
                pred_sha256: p,
                gt_sha256: g,
                value,
                max_rel_error: err,
                tolerance: tol,
                passed: err < tol,
            })
        };
        let (ph, gh) = (pred.content_hash(), gt.content_hash());

        let f = mask_fn(w, h, |p| recon_alpha_weighted_with(p, &gt, reduction));
        push(
            "recon_alpha_weighted",
            f(&x).0,
            finite_diff_check(&f, &x, &opts),
            1e-4,
            ph.clone(),
            gh.clone(),
        );
        let f = mask_fn(w, h, |p| alpha_l1_with(p, &gt, reduction));
        push(
            "alpha_l1",
            f(&x).0,
            finite_diff_check(&f, &x, &opts),
            1e-4,
            ph.clone(),
            gh.clone(),
        );
        let f = mask_fn(w, h, |p| {
            lip_color_loss(p, &gt, &lip, &MaskedMean::default())
        });
        push(
            "lip_color_loss",
            f(&x).0,
            finite_diff_check(&f, &x, &opts),
            1e-4,
            ph.clone(),
            gh.clone(),
        );
        let f = mask_fn(w, h, |p| {
            lip_color_loss(
                p,
                &gt,
                &lip,
                &MaskedMean {
                    include_alpha: true,
                },
            )
        });
        push(
            "lip_color_loss_with_alpha",
            f(&x).0,
            finite_diff_check(&f, &x, &opts),
            1e-4,
            ph.clone(),
            gh.clone(),
        );
        for real in [true, false] {
            let f = |v: &[f64]| adversarial_bce(v, real).expect("finite logits");
            let name = if real {
                "adversarial_bce_real"
            } else {
                "adversarial_bce_fake"
            };
            let lh = crate::image::Image::new(logits.len(), 1, logits.clone())
                .expect("dims")
                .content_hash();
            push(
                name,
                f(&logits).0,
                finite_diff_check(f, &logits, &opts),
                1e-6,
                lh,
                String::new(),
            );
        }
    }
    LossVectors {
        normalized,
        step,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |v: &[f64]| {
            let val = v
                .iter()
                .enumerate()
                .map(|(i, x)| (i as f64 + 1.0) * x * x + 0.5 * x)
                .sum();
            let g = v
                .iter()
                .enumerate()
                .map(|(i, x)| 2.0 * (i as f64 + 1.0) * x + 0.5)
                .collect();
            (val, g)
        };
        let x = [0.3, -1.2, 2.5, 0.0, 7.0];
        assert!(finite_diff_check(f, &x, &FiniteDiffOptions::default()) < 1e-8);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let f = |v: &[f64]| (v[0] * v[0], vec![v[0]]);
        assert!(finite_diff_check(f, &[1.0], &FiniteDiffOptions::default()) > 0.4);
    }

    #[test]
    fn all_losses_pass_on_twenty_seeds() {
        for normalized in [false, true] {
            let v = loss_vectors(LOSS_VECTOR_SEEDS, normalized);
            assert_eq!(v.checks.len(), LOSS_VECTOR_SEEDS * 6);
            for c in &v.checks {
                assert!(c.passed, "{} seed {}: {}", c.loss, c.seed, c.max_rel_error);
            }
        }
    }
}
