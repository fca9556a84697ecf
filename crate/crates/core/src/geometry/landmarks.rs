use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Index schema of a landmark layout.
#[derive(Debug)]
pub struct LayoutSchema {
    pub id: &'static str,
    pub count: usize,
    pub jaw: Range<usize>,
    /// Image-left brow (subject's right).
    pub brow_left: Range<usize>,
    pub brow_right: Range<usize>,
    pub nose: Range<usize>,
    /// Image-left eye (subject's right), ibug 36..41.
    pub eye_left: Range<usize>,
    pub eye_right: Range<usize>,
    pub lips_outer: Range<usize>,
    pub lips_inner: Range<usize>,
    /// Outer eye corners `(image-left, image-right)`.
    pub eye_outer_corners: (usize, usize),
    /// Mouth corners `(image-left, image-right)`.
    pub mouth_corners: (usize, usize),
    /// A mid-cheek jaw point on each side.
    pub cheek_jaw: (usize, usize),
}

pub const IBUG68: LayoutSchema = LayoutSchema {
    id: "ibug68",
    count: 68,
    jaw: 0..17,
    brow_left: 17..22,
    brow_right: 22..27,
    nose: 27..36,
    eye_left: 36..42,
    eye_right: 42..48,
    lips_outer: 48..60,
    lips_inner: 60..68,
    eye_outer_corners: (36, 45),
    mouth_corners: (48, 54),
    cheek_jaw: (2, 14),
};

pub const DEFAULT_LAYOUT: &str = "ibug68";

pub fn layout_schema(id: &str) -> Option<&'static LayoutSchema> {
    match id {
        "ibug68" => Some(&IBUG68),
        _ => None,
    }
}

/// Ordered 2D facial keypoints in pixel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub layout_id: String,
    pub points: Vec<Point>,
}

/// On-disk landmark / canonical-layout JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub layout_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(layout_id: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        let set = LandmarkSet {
            layout_id: layout_id.into(),
            points,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let schema = self.schema()?;
        if self.points.len() != schema.count {
            return Err(Error::InvalidLandmarks(format!(
                "layout `{}` expects {} points, got {}",
                schema.id,
                schema.count,
                self.points.len()
            )));
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidLandmarks(format!("point {i} is not finite")));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<&'static LayoutSchema> {
        layout_schema(&self.layout_id)
            .ok_or_else(|| Error::InvalidLandmarks(format!("unknown layout `{}`", self.layout_id)))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn group(&self, range: Range<usize>) -> &[Point] {
        &self.points[range]
    }

    pub fn centroid_of(&self, range: Range<usize>) -> Point {
        centroid(&self.points[range])
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> LandmarkSet {
        LandmarkSet {
            layout_id: self.layout_id.clone(),
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> LandmarkSet {
        self.map(|[x, y]| [x + dx, y + dy])
    }

    /// True when every point lies inside a `width x height` frame.
    pub fn within(&self, width: usize, height: usize) -> bool {
        self.points.iter().all(|&[x, y]| {
            x >= 0.0 && y >= 0.0 && x <= (width as f64 - 1.0) && y <= (height as f64 - 1.0)
        })
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let file: LandmarkFile = serde_json::from_str(text)?;
        Ok(LandmarkSet {
            layout_id: file.layout_id,
            points: file.points,
        })
    }

    pub fn to_json(&self) -> String {
        let file = LandmarkFile {
            layout_id: self.layout_id.clone(),
            version: None,
            width: None,
            height: None,
            points: self.points.clone(),
        };
        serde_json::to_string(&file).expect("landmarks serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set = Self::from_json(&text).map_err(|e| Error::json(path, e))?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

pub fn midpoint(a: Point, b: Point) -> Point {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

/// Facial regions used for cropping and region anchoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceRegion {
    EyeLeft,
    EyeRight,
    Lips,
    CheekLeft,
    CheekRight,
}

impl FaceRegion {
    pub const ALL: [FaceRegion; 5] = [
        FaceRegion::EyeLeft,
        FaceRegion::EyeRight,
        FaceRegion::Lips,
        FaceRegion::CheekLeft,
        FaceRegion::CheekRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaceRegion::EyeLeft => "eye_left",
            FaceRegion::EyeRight => "eye_right",
            FaceRegion::Lips => "lips",
            FaceRegion::CheekLeft => "cheek_left",
            FaceRegion::CheekRight => "cheek_right",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Points whose bounding box defines the region.
    ///
    /// Cheeks have no dedicated landmarks; each cheek is described by the outer
    /// eye corner, the mouth corner, a mid-jaw point and the derived cheek
    /// anchor (midpoint of eye corner and mouth corner).
    pub fn points(self, lm: &LandmarkSet) -> Result<Vec<Point>> {
        let s = lm.schema()?;
        let p = &lm.points;
        Ok(match self {
            FaceRegion::EyeLeft => p[s.eye_left.clone()].to_vec(),
            FaceRegion::EyeRight => p[s.eye_right.clone()].to_vec(),
            FaceRegion::Lips => p[s.lips_outer.clone()].to_vec(),
            FaceRegion::CheekLeft => {
                let (eye, mouth, jaw) = (s.eye_outer_corners.0, s.mouth_corners.0, s.cheek_jaw.0);
                vec![p[eye], p[mouth], p[jaw], midpoint(p[eye], p[mouth])]
            }
            FaceRegion::CheekRight => {
                let (eye, mouth, jaw) = (s.eye_outer_corners.1, s.mouth_corners.1, s.cheek_jaw.1);
                vec![p[eye], p[mouth], p[jaw], midpoint(p[eye], p[mouth])]
            }
        })
    }

    pub fn anchor(self, lm: &LandmarkSet) -> Result<Point> {
        let s = lm.schema()?;
        let p = &lm.points;
        Ok(match self {
            FaceRegion::EyeLeft => lm.centroid_of(s.eye_left.clone()),
            FaceRegion::EyeRight => lm.centroid_of(s.eye_right.clone()),
            FaceRegion::Lips => lm.centroid_of(s.lips_outer.clone()),
            FaceRegion::CheekLeft => midpoint(p[s.eye_outer_corners.0], p[s.mouth_corners.0]),
            FaceRegion::CheekRight => midpoint(p[s.eye_outer_corners.1], p[s.mouth_corners.1]),
        })
    }
}

const BUILTIN_CANONICAL: &str = include_str!("../../assets/canonical_ibug68.json");

/// Reference landmark configuration of the canonical face frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalLayout {
    pub width: usize,
    pub height: usize,
    pub reference: LandmarkSet,
    pub version: u32,
}

impl CanonicalLayout {
    pub fn new(width: usize, height: usize, reference: LandmarkSet) -> Result<Self> {
        reference.validate()?;
        if !reference.within(width, height) {
            return Err(Error::InvalidLandmarks(format!(
                "reference landmarks fall outside the {width}x{height} canonical frame"
            )));
        }
        Ok(CanonicalLayout {
            width,
            height,
            reference,
            version: 1,
        })
    }

    /// The shipped 1024x1024 ibug-68 layout (eyes level, 320 px apart).
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CANONICAL).expect("builtin canonical layout is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LandmarkFile =
            serde_json::from_str(text).map_err(|e| Error::json("<canonical layout>", e))?;
        Self::from_file(file)
    }

    fn from_file(file: LandmarkFile) -> Result<Self> {
        let (Some(w), Some(h)) = (file.width, file.height) else {
            return Err(Error::InvalidLandmarks(
                "canonical layout needs `width` and `height`".into(),
            ));
        };
        let mut layout = Self::new(w, h, LandmarkSet::new(file.layout_id, file.points)?)?;
        layout.version = file.version.unwrap_or(1);
        Ok(layout)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LandmarkFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LandmarkFile {
            layout_id: self.reference.layout_id.clone(),
            version: Some(self.version),
            width: Some(self.width),
            height: Some(self.height),
            points: self.reference.points.clone(),
        })
        .expect("layout serialize")
    }

    /// The same layout rescaled to a `width x height` frame.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let sx = (width as f64 - 1.0) / (self.width as f64 - 1.0);
        let sy = (height as f64 - 1.0) / (self.height as f64 - 1.0);
        CanonicalLayout {
            width,
            height,
            reference: self.reference.map(|[x, y]| [x * sx, y * sy]),
            version: self.version,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn schema(&self) -> &'static LayoutSchema {
        self.reference.schema().expect("validated at construction")
    }

    /// Named index groups of the reference landmarks.
    pub fn region_anchors(&self) -> Vec<(&'static str, Range<usize>)> {
        let s = self.schema();
        vec![
            ("left_eye", s.eye_left.clone()),
            ("right_eye", s.eye_right.clone()),
            ("lips", s.lips_outer.start..s.lips_inner.end),
            ("left_brow", s.brow_left.clone()),
            ("right_brow", s.brow_right.clone()),
            ("jaw", s.jaw.clone()),
        ]
    }

    pub fn anchor(&self, region: FaceRegion) -> Point {
        region
            .anchor(&self.reference)
            .expect("validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_layout_geometry() {
        let canon = CanonicalLayout::builtin();
        assert_eq!(canon.dims(), (1024, 1024));
        let l = canon.anchor(FaceRegion::EyeLeft);
        let r = canon.anchor(FaceRegion::EyeRight);
        assert!((l[1] - r[1]).abs() < 1e-9, "eyes level");
        assert!(((r[0] - l[0]) - 320.0).abs() < 1e-9, "inter-ocular 320 px");
    }

    #[test]
    fn validation() {
        assert!(LandmarkSet::new("ibug68", vec![[0.0, 0.0]; 67]).is_err());
        assert!(LandmarkSet::new("nope", vec![[0.0, 0.0]; 68]).is_err());
        let mut pts = vec![[1.0, 1.0]; 68];
        pts[5][1] = f64::NAN;
        assert!(LandmarkSet::new("ibug68", pts).is_err());
    }

    #[test]
    fn json_round_trip() {
        let lm = CanonicalLayout::builtin().reference;
        assert_eq!(LandmarkSet::from_json(&lm.to_json()).unwrap(), lm);
        let canon = CanonicalLayout::builtin();
        assert_eq!(CanonicalLayout::from_json(&canon.to_json()).unwrap(), canon);
    }

    #[test]
    fn resize_scales_reference() {
        let canon = CanonicalLayout::builtin();
        let small = canon.resized(256, 256);
        let s = 255.0 / 1023.0;
        for (a, b) in canon.reference.points.iter().zip(&small.reference.points) {
            assert!((a[0] * s - b[0]).abs() < 1e-12 && (a[1] * s - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn cheek_anchor_is_eye_mouth_midpoint() {
        let canon = CanonicalLayout::builtin();
        let p = &canon.reference.points;
        assert_eq!(canon.anchor(FaceRegion::CheekLeft), midpoint(p[36], p[48]));
        assert_eq!(canon.anchor(FaceRegion::CheekRight), midpoint(p[45], p[54]));
    }
}
