//! Axis-aligned boxes in continuous pixel coordinates.
//!
//! Areas are `(x_br - x_tl) * (y_br - y_tl)` with no +1 pixel convention.
//! Boxes are only clipped when decoding a refinement, never for IoU.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid box {0:?}: corners must be finite with x_br >= x_tl and y_br >= y_tl")]
    InvalidBox([f64; 4]),
    #[error("invalid image size {width}x{height}: both sides must be finite and positive")]
    InvalidImageSize { width: f64, height: f64 },
    #[error("proposal {0:?} has zero width or height")]
    DegenerateProposal([f64; 4]),
    #[error("regression offsets {0:?} are not finite")]
    NonFiniteOffsets([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_tl: f64,
    y_tl: f64,
    x_br: f64,
    y_br: f64,
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl BBox {
    pub fn new(x_tl: f64, y_tl: f64, x_br: f64, y_br: f64) -> Result<Self, GeometryError> {
        let c = [x_tl, y_tl, x_br, y_br];
        if c.iter().any(|v| !v.is_finite()) || x_br < x_tl || y_br < y_tl {
            return Err(GeometryError::InvalidBox(c));
        }
        Ok(Self {
            x_tl,
            y_tl,
            x_br,
            y_br,
        })
    }

    /// Box from center and size; negative sizes are rejected.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn x_tl(&self) -> f64 {
        self.x_tl
    }
    pub fn y_tl(&self) -> f64 {
        self.y_tl
    }
    pub fn x_br(&self) -> f64 {
        self.x_br
    }
    pub fn y_br(&self) -> f64 {
        self.y_br
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_tl, self.y_tl, self.x_br, self.y_br]
    }

    pub fn width(&self) -> f64 {
        self.x_br - self.x_tl
    }

    pub fn height(&self) -> f64 {
        self.y_br - self.y_tl
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_tl + self.x_br) / 2.0,
            (self.y_tl + self.y_br) / 2.0,
        )
    }

    pub fn clip(&self, img: ImageSize) -> BBox {
        let cx = |v: f64| v.clamp(0.0, img.width());
        let cy = |v: f64| v.clamp(0.0, img.height());
        BBox {
            x_tl: cx(self.x_tl),
            y_tl: cy(self.y_tl),
            x_br: cx(self.x_br),
            y_br: cy(self.y_br),
        }
    }

    /// Smallest box enclosing both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_tl: self.x_tl.min(other.x_tl),
            y_tl: self.y_tl.min(other.y_tl),
            x_br: self.x_br.max(other.x_br),
            y_br: self.y_br.max(other.y_br),
        }
    }

    pub fn is_inside(&self, img: ImageSize) -> bool {
        self.x_tl >= 0.0 && self.y_tl >= 0.0 && self.x_br <= img.width() && self.y_br <= img.height()
    }
}

/// Merges several ground-truth boxes into their enclosing box.
pub fn merge_boxes(boxes: &[BBox]) -> Option<BBox> {
    let (first, rest) = boxes.split_first()?;
    Some(rest.iter().fold(*first, |acc, b| acc.union(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    width: f64,
    height: f64,
}

impl ImageSize {
    pub fn new(width: f64, height: f64) -> Result<Self, GeometryError> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(GeometryError::InvalidImageSize { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn full_box(&self) -> BBox {
        BBox {
            x_tl: 0.0,
            y_tl: 0.0,
            x_br: self.width,
            y_br: self.height,
        }
    }
}

/// `[x_tl/W, y_tl/H, x_br/W, y_br/H, wh/WH]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFeature(pub [f64; 5]);

/// Center/log-size offsets of a target box relative to a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionTarget {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl RegressionTarget {
    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            tx: a[0],
            ty: a[1],
            tw: a[2],
            th: a[3],
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_br.min(b.x_br) - a.x_tl.max(b.x_tl)).max(0.0);
    let ih = (a.y_br.min(b.y_br) - a.y_tl.max(b.y_tl)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if inter <= 0.0 || union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn spatial_feature(b: &BBox, img: ImageSize) -> SpatialFeature {
    let (w, h) = (img.width(), img.height());
    SpatialFeature([
        b.x_tl / w,
        b.y_tl / h,
        b.x_br / w,
        b.y_br / h,
        b.area() / (w * h),
    ])
}

pub fn encode_regression(proposal: &BBox, target: &BBox) -> Result<RegressionTarget, GeometryError> {
    let (pw, ph) = (proposal.width(), proposal.height());
    if !(pw > 0.0 && ph > 0.0) {
        return Err(GeometryError::DegenerateProposal(proposal.to_array()));
    }
    let (pcx, pcy) = proposal.center();
    let (tcx, tcy) = target.center();
    let tw = target.width().max(1.0);
    let th = target.height().max(1.0);
    Ok(RegressionTarget {
        tx: (tcx - pcx) / pw,
        ty: (tcy - pcy) / ph,
        tw: (tw / pw).ln(),
        th: (th / ph).ln(),
    })
}

/// Inverse of [`encode_regression`] without clipping.
pub fn decode_unclipped(proposal: &BBox, t: &RegressionTarget) -> Result<BBox, GeometryError> {
    if t.to_array().iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteOffsets(t.to_array()));
    }
    let (pw, ph) = (proposal.width(), proposal.height());
    if !(pw > 0.0 && ph > 0.0) {
        return Err(GeometryError::DegenerateProposal(proposal.to_array()));
    }
    let (pcx, pcy) = proposal.center();
    let cx = pcx + t.tx * pw;
    let cy = pcy + t.ty * ph;
    let w = pw * t.tw.exp();
    let h = ph * t.th.exp();
    if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
        return Err(GeometryError::NonFiniteOffsets(t.to_array()));
    }
    BBox::from_center(cx, cy, w, h)
}

pub fn decode_regression(
    proposal: &BBox,
    t: &RegressionTarget,
    img: ImageSize,
) -> Result<BBox, GeometryError> {
    Ok(decode_unclipped(proposal, t)?.clip(img))
}
