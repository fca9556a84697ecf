//! Seeded k-means over LAB colors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::Lab;
use crate::error::{Error, Result};
use crate::image::{BoolMask, ImageLab};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub k: usize,
    /// Number of most frequent clusters averaged into the skin tone.
    pub s: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid move, in LAB units.
    pub tol: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k: 6,
            s: 2,
            seed: 0,
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if self.s < 1 || self.s > self.k {
            return Err(Error::InvalidParameter(format!(
                "s must lie in 1..={}, got {}",
                self.k, self.s
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Lab>,
    pub counts: Vec<usize>,
    pub iterations: usize,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
}

impl ClusterModel {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Clusters the LAB pixels selected by `roi`.
pub fn kmeans_lab(img: &ImageLab, roi: &BoolMask, params: &ClusterParams) -> Result<ClusterModel> {
    img.check_same_dims(roi)?;
    let points: Vec<Lab> = img
        .pixels()
        .iter()
        .zip(roi.pixels())
        .filter(|(_, &m)| m)
        .map(|(p, _)| *p)
        .collect();
    kmeans_points(&points, params)
}

#[inline]
fn nearest(p: Lab, centroids: &[Lab]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(*c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_seed(points: &[Lab], k: usize, rng: &mut ChaCha8Rng) -> Vec<Lab> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_sq(centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > r && d > 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance_sq(c));
        }
    }
    centroids
}

/// Lloyd iterations from k-means++ seeds.
///
/// A cluster that loses all its points is moved onto the point farthest from
/// its current centroid. Assignment ties go to the lower cluster index.
pub fn kmeans_points(points: &[Lab], params: &ClusterParams) -> Result<ClusterModel> {
    params.validate()?;
    let k = params.k;
    if points.len() < k {
        return Err(Error::TooFewPixels {
            have: points.len(),
            need: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = plus_plus_seed(points, k, &mut rng);
    let mut assign = vec![0usize; points.len()];
    let mut dist = vec![0.0f64; points.len()];
    let mut iterations = 0;

    for _ in 0..params.max_iters.max(1) {
        iterations += 1;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(*p, &centroids);
            assign[i] = c;
            dist[i] = d;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            sums[c][0] += p.l;
            sums[c][1] += p.a;
            sums[c][2] += p.b;
            counts[c] += 1;
        }
        let mut shift = 0.0f64;
        let mut reseeded = false;
        for c in 0..k {
            let next = if counts[c] > 0 {
                let n = counts[c] as f64;
                Lab::new(sums[c][0] / n, sums[c][1] / n, sums[c][2] / n)
            } else {
                // Farthest point from its own centroid; with no positive
                // distance left the cluster stays where it is.
                let (far, d) =
                    dist.iter().enumerate().fold(
                        (0, 0.0),
                        |best, (i, &d)| if d > best.1 { (i, d) } else { best },
                    );
                if d > 0.0 {
                    dist[far] = 0.0;
                    reseeded = true;
                    points[far]
                } else {
                    centroids[c]
                }
            };
            shift = shift.max(next.distance_sq(centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift <= params.tol && !reseeded {
            break;
        }
    }

    let mut counts = vec![0usize; k];
    let mut sse = 0.0;
    for p in points {
        let (c, d) = nearest(*p, &centroids);
        counts[c] += 1;
        sse += d;
    }
    Ok(ClusterModel {
        centroids,
        counts,
        iterations,
        sse,
    })
}
