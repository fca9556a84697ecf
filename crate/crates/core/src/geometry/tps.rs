//! Thin-plate spline warps with kernel `U(r) = r² log r²`.
//!
//! The linear system is solved in normalized coordinates (controls centered on
//! their centroid and scaled to unit RMS radius). TPS interpolants are
//! invariant under that similarity, so the solution is mapped back to pixel
//! coordinates exactly; only conditioning changes.

use nalgebra::{DMatrix, DVector};

use super::affine::{fit_similarity, AffineTransform};
use super::landmarks::Point;
use super::sampling::{bilinear, WarpPixel};
use crate::error::{Error, Result};
use crate::image::Image;

/// Maximum control-point residual accepted from an interpolating (`reg = 0`) fit.
pub const INTERPOLATION_TOL: f64 = 1e-6;

/// Default spacing (px) of exactly evaluated nodes when warping images.
pub const DEFAULT_GRID_STEP: usize = 4;
/// Max interpolation error (px) tolerated at a grid cell's center.
pub const REFINE_TOL: f64 = 0.01;

#[inline]
pub fn tps_kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

/// A fitted 2D thin-plate spline mapping `control_src[i]` to `control_dst[i]`.
#[derive(Clone, Debug)]
pub struct TpsWarp {
    control_src: Vec<Point>,
    control_dst: Vec<Point>,
    reg: f64,
    center: Point,
    scale: f64,
    /// Controls in normalized coordinates.
    nodes: Vec<Point>,
    /// Kernel weights per control in normalized coordinates.
    weights: Vec<[f64; 2]>,
    /// Affine coefficients in normalized coordinates, per output axis:
    /// `[c0, cx, cy]`.
    affine_norm: [[f64; 3]; 2],
}

impl TpsWarp {
    pub fn control_src(&self) -> &[Point] {
        &self.control_src
    }

    pub fn control_dst(&self) -> &[Point] {
        &self.control_dst
    }

    pub fn regularization(&self) -> f64 {
        self.reg
    }

    /// Kernel weights in pixel coordinates, such that
    /// `f(p) = A p + Σ w_i U(|p - src_i|)`.
    pub fn kernel_weights(&self) -> Vec<[f64; 2]> {
        let s2 = self.scale * self.scale;
        self.weights
            .iter()
            .map(|w| [w[0] / s2, w[1] / s2])
            .collect()
    }

    /// Affine part in pixel coordinates as a 2x3 row-major matrix.
    pub fn affine_part(&self) -> [[f64; 3]; 2] {
        let s = self.scale;
        let s2 = s * s;
        let log_s2 = s2.ln();
        let [cx, cy] = self.center;
        let mut out = [[0.0; 3]; 2];
        for d in 0..2 {
            let [c0, ax, ay] = self.affine_norm[d];
            // Σ w_i |p_i|² term from rescaling the kernel argument.
            let kappa: f64 = self
                .weights
                .iter()
                .zip(&self.control_src)
                .map(|(w, p)| w[d] * (p[0] * p[0] + p[1] * p[1]))
                .sum();
            out[d] = [
                ax / s,
                ay / s,
                c0 - (ax * cx + ay * cy) / s - log_s2 / s2 * kappa,
            ];
        }
        out
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        let q = [
            (p[0] - self.center[0]) / self.scale,
            (p[1] - self.center[1]) / self.scale,
        ];
        let mut out = [
            self.affine_norm[0][0] + self.affine_norm[0][1] * q[0] + self.affine_norm[0][2] * q[1],
            self.affine_norm[1][0] + self.affine_norm[1][1] * q[0] + self.affine_norm[1][2] * q[1],
        ];
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            let (dx, dy) = (q[0] - node[0], q[1] - node[1]);
            let u = tps_kernel(dx * dx + dy * dy);
            out[0] += w[0] * u;
            out[1] += w[1] * u;
        }
        out
    }

    /// Largest `|f(src_i) - dst_i|` over the controls.
    pub fn max_control_residual(&self) -> f64 {
        self.control_src
            .iter()
            .zip(&self.control_dst)
            .map(|(s, d)| {
                let f = self.apply(*s);
                ((f[0] - d[0]).powi(2) + (f[1] - d[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// The spline fitted in the opposite direction (`dst -> src`).
    pub fn inverse(&self) -> Result<TpsWarp> {
        tps_fit(&self.control_dst, &self.control_src, self.reg)
    }
}

/// Fits a thin-plate spline with `f(src_i) = dst_i` (exactly when `reg = 0`).
///
/// `reg` is added to the kernel diagonal in normalized coordinates, so its
/// effect does not depend on the pixel scale of the controls.
pub fn tps_fit(src: &[Point], dst: &[Point], reg: f64) -> Result<TpsWarp> {
    if src.len() != dst.len() {
        return Err(Error::Tps(format!(
            "control count mismatch: {} source vs {} destination",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::Tps(format!(
            "need at least 3 control points, got {n}"
        )));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization must be >= 0, got {reg}"
        )));
    }
    if src
        .iter()
        .chain(dst)
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::Tps("non-finite control point".into()));
    }

    let center = super::landmarks::centroid(src);
    let var = src
        .iter()
        .map(|p| (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2))
        .sum::<f64>()
        / n as f64;
    let scale = var.sqrt();
    if !(scale > 1e-12) {
        return Err(Error::Tps("coincident control points".into()));
    }
    let nodes: Vec<Point> = src
        .iter()
        .map(|p| [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale])
        .collect();

    // Spread of the normalized controls: collinear sets have a zero
    // eigenvalue, which leaves the affine block singular for any reg.
    let (sxx, syy, sxy) = nodes.iter().fold((0.0, 0.0, 0.0), |(a, b, c), q| {
        (a + q[0] * q[0], b + q[1] * q[1], c + q[0] * q[1])
    });
    let det = (sxx * syy - sxy * sxy) / (n * n) as f64;
    if det < 1e-10 {
        return Err(Error::Tps(
            "collinear control points make the system singular; fall back to an affine-only fit"
                .into(),
        ));
    }

    let size = n + 3;
    let mut a = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in (i + 1)..n {
            let (dx, dy) = (nodes[i][0] - nodes[j][0], nodes[i][1] - nodes[j][1]);
            let u = tps_kernel(dx * dx + dy * dy);
            a[(i, j)] = u;
            a[(j, i)] = u;
        }
        a[(i, i)] = reg;
        let row = [1.0, nodes[i][0], nodes[i][1]];
        for (k, v) in row.into_iter().enumerate() {
            a[(i, n + k)] = v;
            a[(n + k, i)] = v;
        }
    }
    let lu = a.lu();
    let mut weights = vec![[0.0; 2]; n];
    let mut affine_norm = [[0.0; 3]; 2];
    for d in 0..2 {
        let mut rhs = DVector::<f64>::zeros(size);
        for i in 0..n {
            rhs[i] = dst[i][d];
        }
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Tps("singular TPS system; retry with reg > 0".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Tps("singular TPS system; retry with reg > 0".into()));
        }
        for i in 0..n {
            weights[i][d] = sol[i];
        }
        affine_norm[d] = [sol[n], sol[n + 1], sol[n + 2]];
    }

    let warp = TpsWarp {
        control_src: src.to_vec(),
        control_dst: dst.to_vec(),
        reg,
        center,
        scale,
        nodes,
        weights,
        affine_norm,
    };
    if reg == 0.0 {
        let residual = warp.max_control_residual();
        if !(residual < INTERPOLATION_TOL) {
            return Err(Error::Tps(format!(
                "ill-conditioned TPS system (control residual {residual:e} px); retry with reg > 0"
            )));
        }
    }
    Ok(warp)
}

/// A spline, or the similarity used when the controls are collinear.
#[derive(Clone, Debug)]
pub enum FittedWarp {
    Tps(TpsWarp),
    Similarity(AffineTransform),
}

impl FittedWarp {
    pub fn apply(&self, p: Point) -> Point {
        match self {
            FittedWarp::Tps(w) => w.apply(p),
            FittedWarp::Similarity(t) => t.apply(p),
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, FittedWarp::Similarity(_))
    }
}

/// [`tps_fit`], falling back to a least-squares similarity when the spline
/// system is singular (collinear or ill-conditioned controls).
///
/// A general affine map is not determined by points on a line, so the
/// fallback keeps only rotation, uniform scale and translation.
pub fn tps_fit_or_similarity(src: &[Point], dst: &[Point], reg: f64) -> Result<FittedWarp> {
    match tps_fit(src, dst, reg) {
        Ok(w) => Ok(FittedWarp::Tps(w)),
        Err(Error::Tps(msg)) if src.len() == dst.len() && src.len() >= 2 => {
            let t = fit_similarity(src, dst).map_err(|_| Error::Tps(msg))?;
            Ok(FittedWarp::Similarity(t))
        }
        Err(e) => Err(e),
    }
}

/// Resamples `img` through a pull-back warp (output -> input coordinates).
pub fn warp_fitted_inverse<P: WarpPixel>(
    img: &Image<P>,
    inverse: &FittedWarp,
    width: usize,
    height: usize,
) -> Image<P> {
    match inverse {
        FittedWarp::Tps(w) => warp_with_inverse(img, w, width, height, DEFAULT_GRID_STEP),
        FittedWarp::Similarity(t) => Image::from_fn(width, height, |x, y| {
            let [sx, sy] = t.apply([x as f64, y as f64]);
            bilinear(img, sx, sy)
        }),
    }
}

/// Dense per-pixel source coordinates for an output frame.
pub struct CoordinateMap {
    width: usize,
    height: usize,
    coords: Vec<Point>,
}

impl CoordinateMap {
    /// Evaluates `f` exactly on nodes every `step` pixels (plus the last row
    /// and column) and bilinearly interpolates inside each cell. Cells near a
    /// control point, or whose interpolated center is off by more than
    /// [`REFINE_TOL`] px, are evaluated exactly instead. `step = 1` is exact everywhere.
    pub fn from_warp(f: &TpsWarp, width: usize, height: usize, step: usize) -> Self {
        Self::build(f, width, height, step, None)
    }

    /// Like [`from_warp`](Self::from_warp), but cells whose source footprint
    /// misses `support` are skipped: their pixels get a coordinate outside
    /// every image, which samples as transparent for masks.
    pub fn from_warp_within(
        f: &TpsWarp,
        width: usize,
        height: usize,
        step: usize,
        support: &AlphaSupport,
    ) -> Self {
        Self::build(f, width, height, step, Some(support))
    }

    fn build(
        f: &TpsWarp,
        width: usize,
        height: usize,
        step: usize,
        support: Option<&AlphaSupport>,
    ) -> Self {
        let step = step.max(1);
        let xs = grid_axis(width, step);
        let ys = grid_axis(height, step);
        let nx = xs.len();
        let nodes: Vec<Point> = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| f.apply([x as f64, y as f64]))
            .collect();
        let mut coords = vec![[0.0; 2]; width * height];
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a * (1.0 - t) + b * t };
        let cells_x = nx.saturating_sub(1).max(1);
        let cells_y = ys.len().saturating_sub(1).max(1);
        let pad = step as f64;
        for cy in 0..cells_y {
            let cy1 = (cy + 1).min(ys.len() - 1);
            let (y0, y1) = (ys[cy], ys[cy1]);
            let y_end = if cy + 1 >= cells_y { height } else { y1 };
            for cx in 0..cells_x {
                let cx1 = (cx + 1).min(nx - 1);
                let (x0, x1) = (xs[cx], xs[cx1]);
                let x_end = if cx + 1 >= cells_x { width } else { x1 };
                let n00 = nodes[cy * nx + cx];
                let n10 = nodes[cy * nx + cx1];
                let n01 = nodes[cy1 * nx + cx];
                let n11 = nodes[cy1 * nx + cx1];
                let interp = |x: usize, y: usize| -> Point {
                    let tx = if x1 > x0 {
                        (x - x0) as f64 / (x1 - x0) as f64
                    } else {
                        0.0
                    };
                    let ty = if y1 > y0 {
                        (y - y0) as f64 / (y1 - y0) as f64
                    } else {
                        0.0
                    };
                    [
                        lerp(lerp(n00[0], n10[0], tx), lerp(n01[0], n11[0], tx), ty),
                        lerp(lerp(n00[1], n10[1], tx), lerp(n01[1], n11[1], tx), ty),
                    ]
                };
                if let Some(sup) = support {
                    let xs4 = [n00[0], n10[0], n01[0], n11[0]];
                    let ys4 = [n00[1], n10[1], n01[1], n11[1]];
                    let lo = |v: [f64; 4]| v.into_iter().fold(f64::INFINITY, f64::min);
                    let hi = |v: [f64; 4]| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
                    let m = SUPPORT_MARGIN;
                    if !sup.touches(lo(xs4) - m, lo(ys4) - m, hi(xs4) + m, hi(ys4) + m) {
                        for y in y0..y_end {
                            coords[y * width + x0..y * width + x_end].fill([SKIPPED, SKIPPED]);
                        }
                        continue;
                    }
                }
                let near_control = f.control_src().iter().any(|p| {
                    p[0] > x0 as f64 - pad
                        && p[0] < x1 as f64 + pad
                        && p[1] > y0 as f64 - pad
                        && p[1] < y1 as f64 + pad
                });
                let exact = near_control
                    || if x1 - x0 > 1 || y1 - y0 > 1 {
                        let (mx, my) = ((x0 + x1) / 2, (y0 + y1) / 2);
                        let e = f.apply([mx as f64, my as f64]);
                        let i = interp(mx, my);
                        (e[0] - i[0]).abs().max((e[1] - i[1]).abs()) > REFINE_TOL
                    } else {
                        false
                    };
                for y in y0..y_end {
                    let row = y * width;
                    for x in x0..x_end {
                        coords[row + x] = if exact {
                            f.apply([x as f64, y as f64])
                        } else {
                            interp(x, y)
                        };
                    }
                }
            }
        }
        CoordinateMap {
            width,
            height,
            coords,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn sample<P: WarpPixel>(&self, img: &Image<P>) -> Image<P> {
        let data = self
            .coords
            .iter()
            .map(|&[x, y]| bilinear(img, x, y))
            .collect();
        Image::new(self.width, self.height, data).expect("coordinate map covers the frame")
    }
}

/// Slack, in source pixels, around a cell's node footprint when testing it
/// against an [`AlphaSupport`].
const SUPPORT_MARGIN: f64 = 4.0;
const SKIPPED: f64 = -1e9;

/// Block-level occupancy of a mask's nonzero alpha, for skipping empty areas.
#[derive(Clone, Debug)]
pub struct AlphaSupport {
    block: usize,
    bw: usize,
    bh: usize,
    /// Summed-area table of occupied blocks, `(bw + 1) x (bh + 1)`.
    sat: Vec<u32>,
}

impl AlphaSupport {
    pub fn from_mask(mask: &Image<[f64; 4]>, block: usize) -> Self {
        let block = block.max(1);
        let (w, h) = mask.dims();
        let (bw, bh) = (w.div_ceil(block).max(1), h.div_ceil(block).max(1));
        let mut occ = vec![false; bw * bh];
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y)[3] > 0.0 {
                    occ[(y / block) * bw + x / block] = true;
                }
            }
        }
        let mut sat = vec![0u32; (bw + 1) * (bh + 1)];
        for by in 0..bh {
            for bx in 0..bw {
                sat[(by + 1) * (bw + 1) + bx + 1] = occ[by * bw + bx] as u32
                    + sat[by * (bw + 1) + bx + 1]
                    + sat[(by + 1) * (bw + 1) + bx]
                    - sat[by * (bw + 1) + bx];
            }
        }
        AlphaSupport { block, bw, bh, sat }
    }

    pub fn is_empty(&self) -> bool {
        self.sat[self.sat.len() - 1] == 0
    }

    /// Whether any occupied block meets the rectangle `[x0, x1] x [y0, y1]`.
    pub fn touches(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
        if !(x0 <= x1 && y0 <= y1) {
            return !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite());
        }
        let b = self.block as f64;
        let clamp = |v: f64, n: usize| (v / b).floor().clamp(0.0, n as f64) as usize;
        if x1 < 0.0
            || y1 < 0.0
            || x0 >= (self.bw * self.block) as f64
            || y0 >= (self.bh * self.block) as f64
        {
            return false;
        }
        let (bx0, by0) = (clamp(x0, self.bw - 1), clamp(y0, self.bh - 1));
        let (bx1, by1) = (clamp(x1, self.bw - 1) + 1, clamp(y1, self.bh - 1) + 1);
        let s = |x: usize, y: usize| self.sat[y * (self.bw + 1) + x];
        s(bx1, by1) + s(bx0, by0) > s(bx0, by1) + s(bx1, by0)
    }
}

/// [`warp_with_inverse`] for masks, skipping output cells whose source area
/// holds no alpha. Alpha matches the unrestricted warp everywhere, and so
/// does RGB wherever alpha is nonzero; skipped pixels are `[0; 4]`.
pub fn warp_mask_with_inverse(
    mask: &Image<[f64; 4]>,
    inverse: &TpsWarp,
    width: usize,
    height: usize,
    grid_step: usize,
    support: &AlphaSupport,
) -> Image<[f64; 4]> {
    CoordinateMap::from_warp_within(inverse, width, height, grid_step, support).sample(mask)
}

fn grid_axis(len: usize, step: usize) -> Vec<usize> {
    if len == 0 {
        return vec![0];
    }
    let mut v: Vec<usize> = (0..len).step_by(step).collect();
    if *v.last().unwrap() != len - 1 {
        v.push(len - 1);
    }
    v
}

/// Warps `img` with a spline that maps *output* coordinates to *input*
/// coordinates (the inverse of the geometric warp).
pub fn warp_with_inverse<P: WarpPixel>(
    img: &Image<P>,
    inverse: &TpsWarp,
    width: usize,
    height: usize,
    grid_step: usize,
) -> Image<P> {
    CoordinateMap::from_warp(inverse, width, height, grid_step).sample(img)
}

/// Warps a mask forward through `warp` (input frame -> output frame).
///
/// Pixels are pulled through the spline fitted in the `dst -> src` direction;
/// samples outside the input are transparent.
pub fn tps_warp_image<P: WarpPixel>(
    img: &Image<P>,
    warp: &TpsWarp,
    width: usize,
    height: usize,
) -> Result<Image<P>> {
    let inverse = warp.inverse()?;
    Ok(warp_with_inverse(
        img,
        &inverse,
        width,
        height,
        DEFAULT_GRID_STEP,
    ))
}
