//! Small vector rasterizer: polygons and strokes to coverage maps.

use crate::geometry::Point;
use crate::image::{AlphaMap, BoolMask, Image};

/// Cubic Hermite step from 0 at `e0` to 1 at `e1`.
#[inline]
pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Even-odd rule.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[inline]
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

pub fn polyline_distance(p: Point, pts: &[Point], closed: bool) -> f64 {
    match pts.len() {
        0 => f64::INFINITY,
        1 => ((p[0] - pts[0][0]).powi(2) + (p[1] - pts[0][1]).powi(2)).sqrt(),
        n => {
            let mut d = f64::INFINITY;
            for i in 0..n - 1 {
                d = d.min(segment_distance(p, pts[i], pts[i + 1]));
            }
            if closed {
                d = d.min(segment_distance(p, pts[n - 1], pts[0]));
            }
            d
        }
    }
}

/// Distance to the boundary, negative inside.
pub fn signed_distance(p: Point, poly: &[Point]) -> f64 {
    let d = polyline_distance(p, poly, true);
    if point_in_polygon(p, poly) {
        -d
    } else {
        d
    }
}

/// Chaikin corner cutting, `iterations` rounds.
pub fn chaikin(pts: &[Point], iterations: usize, closed: bool) -> Vec<Point> {
    let mut cur = pts.to_vec();
    for _ in 0..iterations {
        let n = cur.len();
        if n < 3 {
            break;
        }
        let mut next = Vec::with_capacity(2 * n);
        if !closed {
            next.push(cur[0]);
        }
        let segs = if closed { n } else { n - 1 };
        for i in 0..segs {
            let (a, b) = (cur[i], cur[(i + 1) % n]);
            next.push([0.75 * a[0] + 0.25 * b[0], 0.75 * a[1] + 0.25 * b[1]]);
            next.push([0.25 * a[0] + 0.75 * b[0], 0.25 * a[1] + 0.75 * b[1]]);
        }
        if !closed {
            next.push(cur[n - 1]);
        }
        cur = next;
    }
    cur
}

fn bbox(
    pts: &[Point],
    pad: f64,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    if pts.is_empty() || width == 0 || height == 0 {
        return None;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (x0, y0) = ((x0 - pad).floor().max(0.0), (y0 - pad).floor().max(0.0));
    let (x1, y1) = ((x1 + pad).ceil(), (y1 + pad).ceil());
    if x1 < 0.0 || y1 < 0.0 || x0 >= width as f64 || y0 >= height as f64 {
        return None;
    }
    Some((
        x0 as usize,
        y0 as usize,
        (x1 as usize).min(width - 1),
        (y1 as usize).min(height - 1),
    ))
}

/// Pixels whose centers fall inside `poly`.
pub fn fill_polygon(width: usize, height: usize, poly: &[Point]) -> BoolMask {
    let mut out = Image::filled(width, height, false);
    if let Some((x0, y0, x1, y1)) = bbox(poly, 0.0, width, height) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if point_in_polygon([x as f64, y as f64], poly) {
                    out.set(x, y, true);
                }
            }
        }
    }
    out
}

/// Polygon coverage with a smooth edge `feather` px wide, centered on the
/// boundary. `feather = 0` gives a hard 0/1 fill.
pub fn polygon_coverage(width: usize, height: usize, poly: &[Point], feather: f64) -> AlphaMap {
    let mut out = Image::filled(width, height, 0.0);
    if feather <= 0.0 {
        for (o, &b) in out
            .pixels_mut()
            .iter_mut()
            .zip(fill_polygon(width, height, poly).pixels())
        {
            *o = if b { 1.0 } else { 0.0 };
        }
        return out;
    }
    let half = feather * 0.5;
    if let Some((x0, y0, x1, y1)) = bbox(poly, half, width, height) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let sd = signed_distance([x as f64, y as f64], poly);
                out.set(x, y, 1.0 - smoothstep(-half, half, sd));
            }
        }
    }
    out
}

/// Stroke of half-width `radius` along an open polyline, feathered like
/// [`polygon_coverage`].
pub fn stroke_coverage(
    width: usize,
    height: usize,
    line: &[Point],
    radius: f64,
    feather: f64,
) -> AlphaMap {
    let mut out = Image::filled(width, height, 0.0);
    let half = feather.max(0.0) * 0.5;
    if let Some((x0, y0, x1, y1)) = bbox(line, radius + half + 1.0, width, height) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let sd = polyline_distance([x as f64, y as f64], line, false) - radius;
                let c = if half > 0.0 {
                    1.0 - smoothstep(-half, half, sd)
                } else if sd <= 0.0 {
                    1.0
                } else {
                    0.0
                };
                out.set(x, y, c);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Point; 4] = [[2.0, 2.0], [8.0, 2.0], [8.0, 8.0], [2.0, 8.0]];

    #[test]
    fn inside_outside() {
        assert!(point_in_polygon([5.0, 5.0], &SQUARE));
        assert!(!point_in_polygon([9.0, 5.0], &SQUARE));
        assert_eq!(signed_distance([5.0, 5.0], &SQUARE), -3.0);
        assert_eq!(signed_distance([10.0, 5.0], &SQUARE), 2.0);
    }

    #[test]
    fn hard_fill_counts_centers() {
        let m = fill_polygon(12, 12, &[[1.5, 1.5], [5.5, 1.5], [5.5, 4.5], [1.5, 4.5]]);
        assert_eq!(m.pixels().iter().filter(|&&b| b).count(), 4 * 3);
    }

    #[test]
    fn feathered_edge_is_half_on_boundary() {
        let c = polygon_coverage(12, 12, &SQUARE, 2.0);
        assert_eq!(*c.get(5, 5), 1.0);
        assert_eq!(*c.get(11, 5), 0.0);
        assert!((c.get(8, 5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stroke_width() {
        let c = stroke_coverage(20, 9, &[[2.0, 4.0], [17.0, 4.0]], 2.0, 0.0);
        let col: Vec<f64> = (0..9).map(|y| *c.get(10, y)).collect();
        assert_eq!(col, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn chaikin_keeps_open_endpoints() {
        let pts = [[0.0, 0.0], [4.0, 4.0], [8.0, 0.0]];
        let s = chaikin(&pts, 2, false);
        assert_eq!(s.first(), Some(&[0.0, 0.0]));
        assert_eq!(s.last(), Some(&[8.0, 0.0]));
        assert!(s.len() > pts.len());
    }
}
