use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scene::{Scene, SceneObject};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, ImageSize};
use crate::head::Proposal;

/// Appearance prototypes shared by every split of a dataset.
///
/// An object's prototype is its class block followed by its color block; the
/// class block takes the larger half when `d_v` is odd.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    classes: Vec<Vec<f64>>,
    colors: Vec<Vec<f64>>,
    background: Vec<f64>,
}

impl FeatureBank {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, num_classes: usize, num_colors: usize, d_v: usize) -> Self {
        let color_len = d_v / 2;
        let class_len = d_v - color_len;
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let classes = (0..num_classes).map(|_| draw(class_len)).collect();
        let colors = (0..num_colors).map(|_| draw(color_len)).collect();
        let background = draw(d_v);
        Self {
            classes,
            colors,
            background,
        }
    }

    pub fn d_v(&self) -> usize {
        self.background.len()
    }

    pub fn prototype(&self, class: usize, color: usize) -> Vec<f64> {
        let mut v = self.classes[class].clone();
        v.extend_from_slice(&self.colors[color]);
        v
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }
}

fn add_noise<R: Rng + ?Sized>(mut v: Vec<f64>, rng: &mut R, sigma: f64) -> Vec<f64> {
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        for x in &mut v {
            *x += noise.sample(rng);
        }
    }
    v
}

pub fn synthesize_feature<R: Rng + ?Sized>(bank: &FeatureBank, obj: &SceneObject, rng: &mut R, sigma: f64) -> Vec<f64> {
    add_noise(bank.prototype(obj.class, obj.color), rng, sigma)
}

pub fn synthesize_background<R: Rng + ?Sized>(bank: &FeatureBank, rng: &mut R, sigma: f64) -> Vec<f64> {
    add_noise(bank.background.clone(), rng, sigma)
}

/// Knobs of the emulated proposal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalQualityConfig {
    /// Chance that an object (the target included) gets no proposal.
    pub miss_prob: f64,
    /// Relative box noise: center shifts are `sigma * size`, sizes are
    /// scaled by `exp(sigma * z)`.
    pub jitter: f64,
    /// Fraction of the proposal slots reserved for background boxes.
    pub distractor_fraction: f64,
    pub feature_noise: f64,
    /// Proposals emitted per detected object.
    pub redundancy: usize,
    /// Multiplier applied to every object proposal's width and height.
    pub scale_bias: f64,
    /// Shift of every object proposal's center, as a fraction of its size.
    pub shift_bias: f64,
}

impl Default for ProposalQualityConfig {
    fn default() -> Self {
        QualityPreset::High.config()
    }
}

impl ProposalQualityConfig {
    /// Exact boxes, no misses, no noise.
    pub fn perfect() -> Self {
        Self {
            miss_prob: 0.0,
            jitter: 0.0,
            distractor_fraction: 0.0,
            feature_noise: 0.0,
            redundancy: 1,
            scale_bias: 1.0,
            shift_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("miss_prob", self.miss_prob)?;
        unit("distractor_fraction", self.distractor_fraction)?;
        for (name, v) in [("jitter", self.jitter), ("feature_noise", self.feature_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.scale_bias > 0.0 && self.scale_bias.is_finite()) || !self.shift_bias.is_finite() {
            return Err(Error::Config("bias knobs must be finite, scale_bias > 0".into()));
        }
        if self.redundancy == 0 {
            return Err(Error::Config("redundancy must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityPreset {
    Low,
    Mid,
    High,
}

impl QualityPreset {
    pub const ALL: [QualityPreset; 3] = [QualityPreset::Low, QualityPreset::Mid, QualityPreset::High];

    pub fn name(self) -> &'static str {
        match self {
            QualityPreset::Low => "low",
            QualityPreset::Mid => "mid",
            QualityPreset::High => "high",
        }
    }

    pub fn config(self) -> ProposalQualityConfig {
        match self {
            QualityPreset::Low => ProposalQualityConfig {
                miss_prob: 0.14,
                jitter: 0.15,
                distractor_fraction: 0.5,
                feature_noise: 0.7,
                redundancy: 1,
                scale_bias: 1.15,
                shift_bias: 0.08,
            },
            QualityPreset::Mid => ProposalQualityConfig {
                miss_prob: 0.12,
                jitter: 0.13,
                distractor_fraction: 0.375,
                feature_noise: 0.6,
                redundancy: 2,
                scale_bias: 1.15,
                shift_bias: 0.08,
            },
            QualityPreset::High => ProposalQualityConfig {
                miss_prob: 0.06,
                jitter: 0.08,
                distractor_fraction: 0.25,
                feature_noise: 0.5,
                redundancy: 2,
                scale_bias: 1.15,
                shift_bias: 0.08,
            },
        }
    }
}

impl std::str::FromStr for QualityPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(QualityPreset::Low),
            "mid" => Ok(QualityPreset::Mid),
            "high" => Ok(QualityPreset::High),
            other => Err(Error::Config(format!("unknown quality preset {other:?} (low, mid, high)"))),
        }
    }
}

fn jittered<R: Rng + ?Sized>(b: &BBox, q: &ProposalQualityConfig, img: ImageSize, rng: &mut R) -> BBox {
    if q.jitter == 0.0 && q.scale_bias == 1.0 && q.shift_bias == 0.0 {
        return *b;
    }
    let (cx, cy) = b.center();
    let (w, h) = (b.width(), b.height());
    for _ in 0..10 {
        let mut z = || -> f64 {
            if q.jitter > 0.0 {
                q.jitter * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        let (zx, zy, zw, zh) = (z(), z(), z(), z());
        let nx = cx + w * (q.shift_bias + zx);
        let ny = cy + h * (q.shift_bias + zy);
        let nw = w * q.scale_bias * zw.exp();
        let nh = h * q.scale_bias * zh.exp();
        if let Ok(c) = BBox::from_center(nx, ny, nw, nh) {
            let c = c.clip(img);
            if c.width() >= 2.0 && c.height() >= 2.0 {
                return c;
            }
        }
    }
    *b
}

fn background_box<R: Rng + ?Sized>(scene: &Scene, rng: &mut R, min_size: f64, max_size: f64) -> BBox {
    let (iw, ih) = (scene.image.width(), scene.image.height());
    let worst = |c: &BBox| scene.objects.iter().map(|o| iou(&o.bbox, c)).fold(0.0, f64::max);
    let mut best: Option<(f64, BBox)> = None;
    for _ in 0..20 {
        let w = rng.random_range(min_size..=max_size.min(iw));
        let h = rng.random_range(min_size..=max_size.min(ih));
        let x = rng.random_range(0.0..=iw - w);
        let y = rng.random_range(0.0..=ih - h);
        let c = BBox::new(x, y, x + w, y + h).expect("positive size");
        let overlap = worst(&c);
        if overlap <= 0.3 {
            return c;
        }
        if best.is_none_or(|(o, _)| overlap < o) {
            best = Some((overlap, c));
        }
    }
    best.expect("at least one draw").1
}

/// Exactly `n` proposals for a scene. Target copies are emitted first, then
/// the other objects in random order, truncated to the non-background slots;
/// background boxes fill the rest and the list is shuffled.
pub fn generate_proposals<R: Rng + ?Sized>(
    scene: &Scene,
    quality: &ProposalQualityConfig,
    bank: &FeatureBank,
    rng: &mut R,
    n: usize,
) -> Vec<Proposal> {
    let background_slots = (quality.distractor_fraction * n as f64).round() as usize;
    let object_slots = n.saturating_sub(background_slots);

    let mut order: Vec<usize> = (0..scene.objects.len()).filter(|&i| i != scene.target).collect();
    order.shuffle(rng);
    order.insert(0, scene.target);

    let mut out = Vec::with_capacity(n);
    for i in order {
        let obj = &scene.objects[i];
        if rng.random_bool(quality.miss_prob) {
            continue;
        }
        for _ in 0..quality.redundancy {
            let bbox = jittered(&obj.bbox, quality, scene.image, rng);
            let feature = synthesize_feature(bank, obj, rng, quality.feature_noise);
            out.push(Proposal { bbox, feature });
        }
    }
    out.truncate(object_slots);

    let sizes = scene.objects.iter().map(|o| o.bbox.width().min(o.bbox.height()));
    let min_size = sizes.clone().fold(f64::INFINITY, f64::min).max(4.0);
    let max_size = scene
        .objects
        .iter()
        .map(|o| o.bbox.width().max(o.bbox.height()))
        .fold(min_size, f64::max);
    while out.len() < n {
        let bbox = background_box(scene, rng, min_size, max_size);
        let feature = synthesize_background(bank, rng, quality.feature_noise);
        out.push(Proposal { bbox, feature });
    }
    out.shuffle(rng);
    out
}
