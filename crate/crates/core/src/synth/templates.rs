//! The shipped procedural shape templates.
//!
//! Every shape is drawn from the canonical landmarks, so the set adapts to
//! any canonical layout. Lengths are in units of `io / 320`, where `io` is
//! the inter-ocular distance (1 unit = 1 px in the 1024 px layout).

use super::library::ShapeTemplate;
use super::MakeupRegion;
use crate::geometry::{CanonicalLayout, Point};
use crate::image::{AlphaMap, Image};
use crate::raster::{
    chaikin, polygon_coverage, polyline_distance, signed_distance, smoothstep, stroke_coverage,
};

struct Frame<'a> {
    p: &'a [Point],
    w: usize,
    h: usize,
    u: f64,
}

impl Frame<'_> {
    fn new(canon: &CanonicalLayout) -> Frame<'_> {
        let p = &canon.reference.points;
        let s = canon.schema();
        let l = canon.reference.centroid_of(s.eye_left.clone());
        let r = canon.reference.centroid_of(s.eye_right.clone());
        let io = ((r[0] - l[0]).powi(2) + (r[1] - l[1]).powi(2)).sqrt();
        Frame {
            p,
            w: canon.width,
            h: canon.height,
            u: io / 320.0,
        }
    }

    fn blank(&self) -> AlphaMap {
        Image::filled(self.w, self.h, 0.0)
    }

    /// Upper lid from outer to inner corner, plus which way is "outward".
    fn upper_lid(&self, eye: usize) -> (Vec<Point>, f64) {
        let p = self.p;
        if eye == 0 {
            (vec![p[36], p[37], p[38], p[39]], -1.0)
        } else {
            (vec![p[45], p[44], p[43], p[42]], 1.0)
        }
    }

    fn lower_lid(&self, eye: usize) -> Vec<Point> {
        let p = self.p;
        if eye == 0 {
            vec![p[36], p[41], p[40], p[39]]
        } else {
            vec![p[45], p[46], p[47], p[42]]
        }
    }

    fn eye_polygon(&self, eye: usize) -> Vec<Point> {
        let r = if eye == 0 { 36..42 } else { 42..48 };
        chaikin(&self.p[r], 2, true)
    }
}

fn combine_max(a: &mut AlphaMap, b: &AlphaMap) {
    for (x, y) in a.pixels_mut().iter_mut().zip(b.pixels()) {
        *x = x.max(*y);
    }
}

fn cut_out(a: &mut AlphaMap, hole: &AlphaMap) {
    for (x, y) in a.pixels_mut().iter_mut().zip(hole.pixels()) {
        *x *= 1.0 - y;
    }
}

/// Samples a polyline at `n` points evenly spaced in arc length.
fn resample(line: &[Point], n: usize) -> Vec<Point> {
    let mut acc = vec![0.0];
    for w in line.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        acc.push(acc.last().unwrap() + d);
    }
    let total = *acc.last().unwrap();
    (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            let k = acc.partition_point(|&a| a <= s).clamp(1, line.len() - 1);
            let t = if acc[k] > acc[k - 1] {
                (s - acc[k - 1]) / (acc[k] - acc[k - 1])
            } else {
                0.0
            };
            let (a, b) = (line[k - 1], line[k]);
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

struct Shadow {
    /// Peak lift above the lid.
    height: f64,
    /// Lift at the corners.
    base: f64,
    /// How far the band runs past the outer corner.
    outer_ext: f64,
    /// Extra upward lift at the outer end.
    wing: f64,
    feather: f64,
}

/// Lid band polygon for one eye; `t = 0` at the outer corner.
fn shadow_polygon(f: &Frame, eye: usize, s: &Shadow) -> (Vec<Point>, Vec<Point>) {
    let (lid, out) = f.upper_lid(eye);
    let lid = resample(&chaikin(&lid, 2, false), 32);
    let gap = 2.0 * f.u;
    let lower: Vec<Point> = lid.iter().map(|q| [q[0], q[1] - gap]).collect();
    let mut upper = Vec::with_capacity(lid.len());
    for (i, q) in lid.iter().enumerate() {
        let t = i as f64 / (lid.len() - 1) as f64;
        let bump = (std::f64::consts::PI * t).sin().powf(0.7);
        let lift = s.base + s.height * bump + s.wing * (1.0 - t).powi(2);
        let dx = out * s.outer_ext * (1.0 - t).powi(3);
        upper.push([q[0] + dx, q[1] - gap - lift]);
    }
    let mut poly = lower.clone();
    poly.extend(upper.iter().rev());
    let ridge: Vec<Point> = lower
        .iter()
        .zip(&upper)
        .skip(6)
        .take(20)
        .map(|(a, b)| [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5])
        .collect();
    (poly, ridge)
}

fn eyeshadow(f: &Frame, s: Shadow, fade: Option<f64>, smudge: bool) -> (AlphaMap, Vec<Point>) {
    let mut cov = f.blank();
    let mut ridge = Vec::new();
    for eye in 0..2 {
        let (poly, r) = shadow_polygon(f, eye, &s);
        let mut c = polygon_coverage(f.w, f.h, &poly, s.feather * f.u);
        if let Some(floor) = fade {
            let (lid, _) = f.upper_lid(eye);
            let top = s.base + s.height;
            for y in 0..f.h {
                for x in 0..f.w {
                    let v = *c.get(x, y);
                    if v > 0.0 {
                        let d = polyline_distance([x as f64, y as f64], &lid, false);
                        let k = 1.0 - (1.0 - floor) * (d / top).clamp(0.0, 1.0);
                        c.set(x, y, v * k);
                    }
                }
            }
        }
        if smudge {
            let lower: Vec<Point> = f
                .lower_lid(eye)
                .iter()
                .map(|q| [q[0], q[1] + 3.5 * f.u])
                .collect();
            let line = chaikin(&lower, 2, false);
            combine_max(
                &mut c,
                &stroke_coverage(f.w, f.h, &line, 2.5 * f.u, 3.0 * f.u),
            );
        }
        combine_max(&mut cov, &c);
        ridge.extend(r);
    }
    for eye in 0..2 {
        cut_out(
            &mut cov,
            &polygon_coverage(f.w, f.h, &f.eye_polygon(eye), 1.0 * f.u),
        );
    }
    (cov, ridge)
}

fn liner_line(f: &Frame, eye: usize, radius: f64) -> Vec<Point> {
    let (lid, _) = f.upper_lid(eye);
    let lid = chaikin(&lid, 2, false);
    lid.iter()
        .map(|q| [q[0], q[1] - radius - 0.5 * f.u])
        .collect()
}

fn eyeliner(
    f: &Frame,
    radius: f64,
    wing: Option<(f64, f64)>,
    lower: Option<f64>,
) -> (AlphaMap, Vec<Point>) {
    let mut cov = f.blank();
    let mut ridge = Vec::new();
    for eye in 0..2 {
        let line = liner_line(f, eye, radius * f.u);
        combine_max(
            &mut cov,
            &stroke_coverage(f.w, f.h, &line, radius * f.u, 1.5 * f.u),
        );
        if let Some((dx, dy)) = wing {
            let (_, out) = f.upper_lid(eye);
            let start = line[0];
            let tip = [start[0] + out * dx * f.u, start[1] - dy * f.u];
            let w = resample(&[line[2], start, tip], 12);
            // Tapered: thinner toward the tip.
            for (i, seg) in w.windows(2).enumerate() {
                let r = radius * f.u * (1.0 - 0.7 * i as f64 / 11.0);
                combine_max(&mut cov, &stroke_coverage(f.w, f.h, seg, r, 1.5 * f.u));
            }
        }
        if let Some(r) = lower {
            let low: Vec<Point> = chaikin(&f.lower_lid(eye), 2, false)
                .iter()
                .map(|q| [q[0], q[1] + r * f.u + 0.5 * f.u])
                .collect();
            combine_max(
                &mut cov,
                &stroke_coverage(f.w, f.h, &low, r * f.u, 1.5 * f.u),
            );
        }
        ridge.extend(line);
    }
    for eye in 0..2 {
        cut_out(
            &mut cov,
            &polygon_coverage(f.w, f.h, &f.eye_polygon(eye), 1.0 * f.u),
        );
    }
    (cov, ridge)
}

enum BlushShape {
    /// Flat disc with a soft rim: radius, rim width.
    Round(f64, f64),
    /// Rotated ellipse: semi-axes, angle toward the temple (radians).
    Oval(f64, f64, f64),
    /// Gaussian falloff cut at 3 sigma.
    Soft(f64),
}

fn blush(f: &Frame, shape: BlushShape, lift: f64) -> (AlphaMap, Vec<Point>) {
    let p = f.p;
    let mut cov = f.blank();
    let mut ridge = Vec::new();
    for (eye, mouth, out) in [(36usize, 48usize, -1.0f64), (45, 54, 1.0)] {
        let a = [
            (p[eye][0] + p[mouth][0]) * 0.5,
            (p[eye][1] + p[mouth][1]) * 0.5,
        ];
        // Toward the outer eye corner and outward.
        let c = [
            a[0] + lift * (p[eye][0] - a[0]) + out * lift * 40.0 * f.u,
            a[1] + lift * (p[eye][1] - a[1]),
        ];
        let reach = match shape {
            BlushShape::Round(r, rim) => r + rim,
            BlushShape::Oval(ax, _, _) => ax,
            BlushShape::Soft(sigma) => 3.0 * sigma,
        } * f.u;
        let x0 = (c[0] - reach).floor().max(0.0) as usize;
        let x1 = ((c[0] + reach).ceil() as usize).min(f.w - 1);
        let y0 = (c[1] - reach).floor().max(0.0) as usize;
        let y1 = ((c[1] + reach).ceil() as usize).min(f.h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 - c[0], y as f64 - c[1]);
                let v = match shape {
                    BlushShape::Round(r, rim) => {
                        let d = (dx * dx + dy * dy).sqrt();
                        1.0 - smoothstep(r * f.u, (r + rim) * f.u, d)
                    }
                    BlushShape::Oval(ax, ay, ang) => {
                        let (cs, sn) = ((out * ang).cos(), (out * ang).sin());
                        let (u, v) = (dx * cs + dy * sn, -dx * sn + dy * cs);
                        let q = ((u / (ax * f.u)).powi(2) + (v / (ay * f.u)).powi(2)).sqrt();
                        1.0 - smoothstep(0.55, 1.0, q)
                    }
                    BlushShape::Soft(sigma) => {
                        let s = sigma * f.u;
                        let d2 = dx * dx + dy * dy;
                        if d2 >= 9.0 * s * s {
                            0.0
                        } else {
                            (-d2 / (2.0 * s * s)).exp()
                        }
                    }
                };
                let cur = *cov.get(x, y);
                cov.set(x, y, cur.max(v));
            }
        }
        ridge.push([c[0] - out * 20.0 * f.u, c[1] - 18.0 * f.u]);
        ridge.push([c[0] + out * 20.0 * f.u, c[1] - 30.0 * f.u]);
    }
    // The ridge is two disjoint segments; drawn as one polyline it would cross
    // the nose, so only the nearer segment matters per pixel anyway.
    (cov, ridge)
}

enum LipStyle {
    Full,
    Overlined(f64),
    /// Coverage fading toward the outer line, floor value.
    Ombre(f64),
    /// Coverage fading in from the outer line over this width.
    Blotted(f64),
}

fn lipstick(f: &Frame, style: LipStyle) -> (AlphaMap, Vec<Point>) {
    let p = f.p;
    let outer = chaikin(&p[48..60], 2, true);
    let inner = chaikin(&p[60..68], 1, true);
    let center = crate::geometry::landmarks::centroid(&p[48..60]);
    let outer = match style {
        LipStyle::Overlined(s) => outer
            .iter()
            .map(|q| {
                [
                    center[0] + s * (q[0] - center[0]),
                    center[1] + s * (q[1] - center[1]),
                ]
            })
            .collect(),
        _ => outer,
    };
    let mut cov = polygon_coverage(f.w, f.h, &outer, 2.0 * f.u);
    cut_out(&mut cov, &polygon_coverage(f.w, f.h, &inner, 1.5 * f.u));
    match style {
        LipStyle::Ombre(floor) | LipStyle::Blotted(floor) => {
            let width = match style {
                LipStyle::Blotted(w) => w,
                _ => 14.0,
            } * f.u;
            for y in 0..f.h {
                for x in 0..f.w {
                    let v = *cov.get(x, y);
                    if v > 0.0 {
                        let q = [x as f64, y as f64];
                        let k = match style {
                            LipStyle::Ombre(_) => {
                                let d = signed_distance(q, &inner).max(0.0);
                                1.0 - (1.0 - floor) * smoothstep(0.0, width, d)
                            }
                            _ => smoothstep(0.0, width, (-signed_distance(q, &outer)).max(0.0)),
                        };
                        cov.set(x, y, v * k);
                    }
                }
            }
        }
        _ => {}
    }
    let lower = [(59, 67), (58, 67), (57, 66), (56, 65), (55, 65)];
    let ridge = lower
        .iter()
        .map(|&(o, i)| [(p[o][0] + p[i][0]) * 0.5, (p[o][1] + p[i][1]) * 0.5])
        .collect();
    (cov, ridge)
}

pub(crate) fn builtin_templates(canon: &CanonicalLayout) -> Vec<ShapeTemplate> {
    let f = Frame::new(canon);
    let mut out = Vec::new();
    let mut push =
        |id: &str, region: MakeupRegion, (coverage, highlight): (AlphaMap, Vec<Point>)| {
            out.push(ShapeTemplate {
                id: id.to_string(),
                region,
                coverage: coverage.map(|v| v.clamp(0.0, 1.0)),
                highlight,
            });
        };

    use MakeupRegion::*;
    let shadow = |height, base, outer_ext, wing, feather| Shadow {
        height: height * f.u,
        base: base * f.u,
        outer_ext: outer_ext * f.u,
        wing: wing * f.u,
        feather,
    };
    push(
        "blush_round",
        Blush,
        blush(&f, BlushShape::Round(45.0, 30.0), 0.0),
    );
    push(
        "blush_oval",
        Blush,
        blush(&f, BlushShape::Oval(90.0, 50.0, 0.5), 0.15),
    );
    push(
        "blush_high",
        Blush,
        blush(&f, BlushShape::Round(35.0, 25.0), 0.35),
    );
    push("blush_soft", Blush, blush(&f, BlushShape::Soft(35.0), 0.1));

    push(
        "eyeshadow_lid",
        Eyeshadow,
        eyeshadow(&f, shadow(12.0, 3.0, 4.0, 0.0, 6.0), None, false),
    );
    push(
        "eyeshadow_smoky",
        Eyeshadow,
        eyeshadow(&f, shadow(14.0, 4.0, 10.0, 2.0, 8.0), None, true),
    );
    push(
        "eyeshadow_wing",
        Eyeshadow,
        eyeshadow(&f, shadow(10.0, 2.0, 22.0, 10.0, 5.0), None, false),
    );
    push(
        "eyeshadow_gradient",
        Eyeshadow,
        eyeshadow(&f, shadow(15.0, 3.0, 6.0, 0.0, 6.0), Some(0.25), false),
    );

    push("eyeliner_thin", Eyeliner, eyeliner(&f, 2.0, None, None));
    push("eyeliner_bold", Eyeliner, eyeliner(&f, 4.0, None, None));
    push(
        "eyeliner_winged",
        Eyeliner,
        eyeliner(&f, 3.0, Some((24.0, 12.0)), None),
    );
    push(
        "eyeliner_full",
        Eyeliner,
        eyeliner(&f, 2.5, None, Some(1.5)),
    );

    push("lipstick_full", Lipstick, lipstick(&f, LipStyle::Full));
    push(
        "lipstick_overlined",
        Lipstick,
        lipstick(&f, LipStyle::Overlined(1.06)),
    );
    push(
        "lipstick_ombre",
        Lipstick,
        lipstick(&f, LipStyle::Ombre(0.35)),
    );
    push(
        "lipstick_blotted",
        Lipstick,
        lipstick(&f, LipStyle::Blotted(8.0)),
    );
    out
}
