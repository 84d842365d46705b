use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, ImageSize};

const SHAPES: [&str; 8] = ["cube", "ball", "cone", "ring", "star", "disk", "block", "pyramid"];
const COLORS: [&str; 6] = ["red", "green", "blue", "yellow", "purple", "orange"];

pub fn shape_name(class: usize) -> String {
    SHAPES
        .get(class)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("shape{class}"))
}

pub fn color_name(color: usize) -> String {
    COLORS
        .get(color)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("color{color}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub image_width: u32,
    pub image_height: u32,
    pub min_objects: usize,
    pub max_objects: usize,
    pub num_classes: usize,
    pub num_colors: usize,
    pub min_size: f64,
    pub max_size: f64,
    /// Upper bound on IoU between any two placed objects.
    pub max_pair_iou: f64,
    /// Center separation (pixels) for a spatial relation to hold.
    pub relation_margin: f64,
    /// Chance that a new object reuses the class of an earlier one.
    pub shared_class_prob: f64,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_width: 100,
            image_height: 100,
            min_objects: 2,
            max_objects: 6,
            num_classes: 8,
            num_colors: 6,
            min_size: 14.0,
            max_size: 36.0,
            max_pair_iou: 0.3,
            relation_margin: 10.0,
            shared_class_prob: 0.35,
            max_attempts: 200,
        }
    }
}

impl SceneConfig {
    pub fn image(&self) -> Result<ImageSize> {
        Ok(ImageSize::new(self.image_width as f64, self.image_height as f64)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.min_objects == 0 || self.max_objects < self.min_objects {
            return bad(format!(
                "object count range {}..={} is empty",
                self.min_objects, self.max_objects
            ));
        }
        if self.num_classes == 0 || self.num_colors == 0 {
            return bad("need at least one class and one color".into());
        }
        if !(self.min_size > 0.0 && self.max_size >= self.min_size) {
            return bad(format!("object size range {}..{} invalid", self.min_size, self.max_size));
        }
        if self.max_size > self.image_width.min(self.image_height) as f64 {
            return bad("objects larger than the image".into());
        }
        if !(0.0..=1.0).contains(&self.shared_class_prob) || !(0.0..=1.0).contains(&self.max_pair_iou) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        self.image()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::LeftOf, Relation::RightOf, Relation::Above, Relation::Below];

    fn words(self) -> &'static [&'static str] {
        match self {
            Relation::LeftOf => &["left", "of"],
            Relation::RightOf => &["right", "of"],
            Relation::Above => &["above"],
            Relation::Below => &["below"],
        }
    }

    /// Whether `a` stands in this relation to `reference` with at least
    /// `margin` pixels between their centers.
    pub fn holds(self, a: &BBox, reference: &BBox, margin: f64) -> bool {
        let (ax, ay) = a.center();
        let (rx, ry) = reference.center();
        match self {
            Relation::LeftOf => ax + margin <= rx,
            Relation::RightOf => ax >= rx + margin,
            Relation::Above => ay + margin <= ry,
            Relation::Below => ay >= ry + margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: usize,
    pub color: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

impl SceneObject {
    fn same_look(&self, other: &SceneObject) -> bool {
        self.class == other.class && self.color == other.color
    }
}

/// How the target is referred to. The reference object, when present, is
/// the only object in the scene with its class and color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub class: usize,
    pub color: usize,
    pub relation: Option<(Relation, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub image: ImageSize,
    pub objects: Vec<SceneObject>,
    pub target: usize,
    pub description: Description,
}

/// Objects matching a description, where relations are tested with the
/// given margin.
pub fn resolve_description(objects: &[SceneObject], desc: &Description, margin: f64) -> Vec<usize> {
    objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.class == desc.class && o.color == desc.color)
        .filter(|(_, o)| match desc.relation {
            None => true,
            Some((rel, r)) => rel.holds(&o.bbox, &objects[r].bbox, margin),
        })
        .map(|(i, _)| i)
        .collect()
}

fn describe<R: Rng + ?Sized>(
    objects: &[SceneObject],
    target: usize,
    margin: f64,
    rng: &mut R,
) -> Option<Description> {
    let t = &objects[target];
    let shares_class = objects
        .iter()
        .enumerate()
        .any(|(i, o)| i != target && o.class == t.class);
    if !shares_class {
        return Some(Description {
            class: t.class,
            color: t.color,
            relation: None,
        });
    }

    let mut refs: Vec<usize> = (0..objects.len())
        .filter(|&r| r != target && objects.iter().filter(|o| o.same_look(&objects[r])).count() == 1)
        .collect();
    refs.shuffle(rng);
    let mut relations = Relation::ALL;
    relations.shuffle(rng);

    for &r in &refs {
        for &rel in &relations {
            let desc = Description {
                class: t.class,
                color: t.color,
                relation: Some((rel, r)),
            };
            // The target must satisfy the relation with the margin, and no
            // look-alike may satisfy it at all.
            if rel.holds(&t.bbox, &objects[r].bbox, margin)
                && resolve_description(objects, &desc, 0.0) == [target]
            {
                return Some(desc);
            }
        }
    }
    None
}

fn place_objects<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Option<Vec<SceneObject>> {
    let (w, h) = (cfg.image_width as f64, cfg.image_height as f64);
    let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..50 {
            let bw = rng.random_range(cfg.min_size..=cfg.max_size);
            let bh = rng.random_range(cfg.min_size..=cfg.max_size);
            let x = rng.random_range(0.0..=w - bw);
            let y = rng.random_range(0.0..=h - bh);
            let bbox = BBox::new(x, y, x + bw, y + bh).expect("positive size");
            if objects.iter().all(|o| iou(&o.bbox, &bbox) <= cfg.max_pair_iou) {
                placed = Some(bbox);
                break;
            }
        }
        let bbox = placed?;
        let class = if !objects.is_empty() && rng.random_bool(cfg.shared_class_prob) {
            objects[rng.random_range(0..objects.len())].class
        } else {
            rng.random_range(0..cfg.num_classes)
        };
        let color = rng.random_range(0..cfg.num_colors);
        objects.push(SceneObject { class, color, bbox });
    }
    Some(objects)
}

/// Places objects without heavy overlap and picks a target that has an
/// unambiguous description.
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig) -> Result<Scene> {
    let image = cfg.image()?;
    for _ in 0..cfg.max_attempts {
        let Some(objects) = place_objects(cfg, rng) else {
            continue;
        };
        let mut order: Vec<usize> = (0..objects.len()).collect();
        order.shuffle(rng);
        for target in order {
            if let Some(description) = describe(&objects, target, cfg.relation_margin, rng) {
                return Ok(Scene {
                    image,
                    objects,
                    target,
                    description,
                });
            }
        }
    }
    Err(Error::Generation {
        attempts: cfg.max_attempts,
        reason: format!(
            "could not place {}..={} objects of size {}..{} in {}x{} with an unambiguous target",
            cfg.min_objects, cfg.max_objects, cfg.min_size, cfg.max_size, cfg.image_width, cfg.image_height
        ),
    })
}

/// Lowercase template phrase for the scene's target.
pub fn generate_query(scene: &Scene) -> Vec<String> {
    let d = &scene.description;
    let mut words = vec!["the".to_string(), color_name(d.color), shape_name(d.class)];
    if let Some((rel, r)) = d.relation {
        let reference = &scene.objects[r];
        words.extend(rel.words().iter().map(|w| w.to_string()));
        words.push("the".to_string());
        words.push(color_name(reference.color));
        words.push(shape_name(reference.class));
    }
    words
}

/// Every token [`generate_query`] can emit for a configuration.
pub fn query_lexicon(cfg: &SceneConfig) -> Vec<String> {
    let mut words: Vec<String> = ["the", "left", "right", "of", "above", "below"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    words.extend((0..cfg.num_colors).map(color_name));
    words.extend((0..cfg.num_classes).map(shape_name));
    words
}
