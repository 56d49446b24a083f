//! Deterministic simulated tabletop.
//!
//! The table surface is the plane `z = 0`. Objects are axis-aligned boxes
//! resting on the table or on top of each other. The arm is abstract: it can
//! point at an object, lift a clear graspable object to the gripper height,
//! and put the held object down centered at a table coordinate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::perception::{extract_features, FeatureNoise, ObjectFeatures};

/// Tolerance used when comparing resting heights.
const CONTACT_EPS: f64 = 1e-9;

/// Current scene-spec file version.
pub const SCENE_SPEC_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("action unavailable: {0}")]
    ActionUnavailable(String),
    #[error("placement blocked at ({x:.3}, {y:.3})")]
    PlacementBlocked { x: f64, y: f64 },
    #[error("coordinates ({x:.3}, {y:.3}) outside the workspace")]
    OutOfBounds { x: f64, y: f64 },
    #[error("placement infeasible: {0}")]
    PlacementInfeasible(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

/// Opaque object identifier, rendered as `o<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

impl FromStr for ObjectId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('o')
            .and_then(|n| n.parse().ok())
            .map(ObjectId)
            .ok_or_else(|| format!("bad object id {s:?}"))
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationName {
    Stove,
    Dishwasher,
    Garbage,
    Pantry,
}

impl LocationName {
    pub const ALL: [LocationName; 4] = [
        LocationName::Stove,
        LocationName::Dishwasher,
        LocationName::Garbage,
        LocationName::Pantry,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LocationName::Stove => "stove",
            LocationName::Dishwasher => "dishwasher",
            LocationName::Garbage => "garbage",
            LocationName::Pantry => "pantry",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == word)
    }
}

impl fmt::Display for LocationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either a perceived object or a named table region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum EntityId {
    Object(ObjectId),
    Location(LocationName),
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Object(o) => o.fmt(f),
            EntityId::Location(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub w: f64,
    pub d: f64,
    pub h: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace { w: 1.0, d: 1.0, h: 0.5 }
    }
}

impl Workspace {
    pub fn extent(&self) -> [f64; 3] {
        [self.w, self.d, self.h]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (0.0..=self.w).contains(&x) && (0.0..=self.d).contains(&y)
    }
}

/// Axis-aligned rectangle on the table surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    fn overlaps(&self, other: &Region) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLocation {
    pub name: LocationName,
    pub region: Region,
}

/// Default layout: four square regions centered at the quarter points.
pub fn default_locations(ws: &Workspace) -> Vec<NamedLocation> {
    let half_w = 0.07 * ws.w;
    let half_d = 0.07 * ws.d;
    let place = |name, cx: f64, cy: f64| NamedLocation {
        name,
        region: Region {
            x0: cx * ws.w - half_w,
            y0: cy * ws.d - half_d,
            x1: cx * ws.w + half_w,
            y1: cy * ws.d + half_d,
        },
    };
    vec![
        place(LocationName::Stove, 0.75, 0.75),
        place(LocationName::Dishwasher, 0.25, 0.25),
        place(LocationName::Garbage, 0.75, 0.25),
        place(LocationName::Pantry, 0.25, 0.75),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: ObjectId,
    /// Box center.
    pub pose: [f64; 3],
    /// Width, depth, height.
    pub bbox: [f64; 3],
    pub color: [f64; 3],
    pub size_class: f64,
    pub shape_descriptor: [f64; 3],
    pub graspable: bool,
}

impl WorldObject {
    pub fn min(&self, axis: usize) -> f64 {
        self.pose[axis] - self.bbox[axis] / 2.0
    }

    pub fn max(&self, axis: usize) -> f64 {
        self.pose[axis] + self.bbox[axis] / 2.0
    }

    fn footprint_at(&self, x: f64, y: f64) -> Region {
        Region {
            x0: x - self.bbox[0] / 2.0,
            y0: y - self.bbox[1] / 2.0,
            x1: x + self.bbox[0] / 2.0,
            y1: y + self.bbox[1] / 2.0,
        }
    }

    pub fn footprint(&self) -> Region {
        self.footprint_at(self.pose[0], self.pose[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "state", content = "object", rename_all = "lowercase")]
pub enum ArmState {
    #[default]
    Empty,
    Holding(ObjectId),
}

impl ArmState {
    pub fn held(&self) -> Option<ObjectId> {
        match self {
            ArmState::Empty => None,
            ArmState::Holding(id) => Some(*id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum PrimitiveAction {
    PointTo { object: ObjectId },
    PickUp { object: ObjectId },
    PutDown { x: f64, y: f64 },
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimitiveAction::PointTo { object } => write!(f, "point-to({object})"),
            PrimitiveAction::PickUp { object } => write!(f, "pick-up({object})"),
            PrimitiveAction::PutDown { x, y } => write!(f, "put-down({x:.3}, {y:.3})"),
        }
    }
}

/// Generator labels kept for the scripted instructor; never shown to the agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabels {
    pub color: String,
    pub size: String,
    pub shape: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub workspace: Workspace,
    pub objects: Vec<WorldObject>,
    pub locations: Vec<NamedLocation>,
    pub arm: ArmState,
    pub tick: u64,
    /// Object pointed at and the tick at which the annotation was made.
    #[serde(default)]
    pub pointed_at: Option<(ObjectId, u64)>,
    #[serde(default)]
    pub truth: BTreeMap<ObjectId, TruthLabels>,
}

/// What segmentation yields for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPercept {
    pub id: ObjectId,
    pub pose: [f64; 3],
    pub bbox: [f64; 3],
    pub graspable: bool,
    pub features: ObjectFeatures,
}

impl Scene {
    pub fn empty(workspace: Workspace) -> Self {
        Scene {
            locations: default_locations(&workspace),
            workspace,
            objects: Vec::new(),
            arm: ArmState::Empty,
            tick: 0,
            pointed_at: None,
            truth: BTreeMap::new(),
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: ObjectId) -> Option<&mut WorldObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn location(&self, name: LocationName) -> Option<&NamedLocation> {
        self.locations.iter().find(|l| l.name == name)
    }

    /// The pointed-at annotation, if it is still live.
    pub fn pointed(&self) -> Option<ObjectId> {
        self.pointed_at
            .filter(|(_, t)| *t == self.tick)
            .map(|(id, _)| id)
    }

    /// Gripper height for a held object of the given height.
    fn gripper_z(&self, height: f64) -> f64 {
        self.workspace.h - height / 2.0
    }

    /// True when another resting object sits on top of `id`.
    pub fn supports_something(&self, id: ObjectId) -> bool {
        let Some(base) = self.object(id) else {
            return false;
        };
        let held = self.arm.held();
        self.objects.iter().any(|o| {
            o.id != id
                && Some(o.id) != held
                && (o.min(2) - base.max(2)).abs() < CONTACT_EPS
                && o.footprint().overlaps(&base.footprint())
        })
    }

    /// Resting height for `id` if it were put down centered at (x, y).
    pub fn resting_z(&self, id: ObjectId, x: f64, y: f64) -> Result<f64, WorldError> {
        let obj = self.object(id).ok_or(WorldError::UnknownObject(id))?;
        let fp = obj.footprint_at(x, y);
        let below: Vec<&WorldObject> = self
            .objects
            .iter()
            .filter(|o| o.id != id && o.footprint().overlaps(&fp))
            .collect();
        let h = obj.bbox[2];
        let z = match below.iter().max_by(|a, b| a.max(2).total_cmp(&b.max(2))) {
            None => h / 2.0,
            Some(top) => {
                if !top.footprint().contains(x, y) {
                    return Err(WorldError::PlacementBlocked { x, y });
                }
                top.max(2) + h / 2.0
            }
        };
        if z + h / 2.0 > self.workspace.h + CONTACT_EPS {
            return Err(WorldError::PlacementBlocked { x, y });
        }
        Ok(z)
    }

    /// Apply one primitive action, returning the successor scene.
    pub fn apply_action(&self, action: &PrimitiveAction) -> Result<Scene, WorldError> {
        let mut next = self.clone();
        match *action {
            PrimitiveAction::PointTo { object } => {
                self.object(object).ok_or(WorldError::UnknownObject(object))?;
                next.tick += 1;
                next.pointed_at = Some((object, next.tick));
                return Ok(next);
            }
            PrimitiveAction::PickUp { object } => {
                let obj = self.object(object).ok_or(WorldError::UnknownObject(object))?;
                if let ArmState::Holding(h) = self.arm {
                    return Err(WorldError::ActionUnavailable(format!(
                        "already holding {h}"
                    )));
                }
                if !obj.graspable {
                    return Err(WorldError::ActionUnavailable(format!(
                        "{object} is not graspable"
                    )));
                }
                if self.supports_something(object) {
                    return Err(WorldError::ActionUnavailable(format!(
                        "{object} has something on top of it"
                    )));
                }
                let z = self.gripper_z(obj.bbox[2]);
                next.object_mut(object).expect("exists").pose[2] = z;
                next.arm = ArmState::Holding(object);
            }
            PrimitiveAction::PutDown { x, y } => {
                let ArmState::Holding(held) = self.arm else {
                    return Err(WorldError::ActionUnavailable("arm is empty".into()));
                };
                if !self.workspace.contains_xy(x, y) {
                    return Err(WorldError::OutOfBounds { x, y });
                }
                let z = self.resting_z(held, x, y)?;
                next.object_mut(held).expect("held object exists").pose = [x, y, z];
                next.arm = ArmState::Empty;
            }
        }
        next.tick += 1;
        Ok(next)
    }

    /// Percepts for every object, with feature noise drawn from `seed`.
    pub fn observe(&self, noise: &FeatureNoise, seed: u64) -> Vec<ObjectPercept> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.objects
            .iter()
            .map(|o| ObjectPercept {
                id: o.id,
                pose: o.pose,
                bbox: o.bbox,
                graspable: o.graspable,
                features: extract_features(o, noise, &mut rng),
            })
            .collect()
    }

    /// Checks every scene invariant; used by tests and the harness.
    pub fn check_invariants(&self) -> Result<(), String> {
        let ws = &self.workspace;
        for o in &self.objects {
            if o.bbox.iter().any(|&b| b <= 0.0) {
                return Err(format!("{} has non-positive bbox", o.id));
            }
            let bounds = [ws.w, ws.d, ws.h];
            for (axis, bound) in bounds.iter().enumerate() {
                if o.pose[axis] < 0.0 || o.pose[axis] > *bound {
                    return Err(format!("{} outside workspace on axis {axis}", o.id));
                }
            }
        }
        let held = self.arm.held();
        if let Some(h) = held {
            let obj = self.object(h).ok_or_else(|| format!("held {h} missing"))?;
            if (obj.pose[2] - self.gripper_z(obj.bbox[2])).abs() > CONTACT_EPS {
                return Err(format!("held {h} not at gripper height"));
            }
        }
        let resting: Vec<&WorldObject> =
            self.objects.iter().filter(|o| Some(o.id) != held).collect();
        for (i, a) in resting.iter().enumerate() {
            for b in &resting[i + 1..] {
                let overlap = (0..3).all(|ax| a.min(ax) < b.max(ax) - CONTACT_EPS && b.min(ax) < a.max(ax) - CONTACT_EPS);
                if overlap {
                    return Err(format!("{} and {} interpenetrate", a.id, b.id));
                }
            }
        }
        for (i, a) in self.locations.iter().enumerate() {
            for b in &self.locations[i + 1..] {
                if a.name == b.name || a.region.overlaps(&b.region) {
                    return Err(format!("locations {} and {} conflict", a.name, b.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteColor {
    pub name: String,
    pub rgb: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteSize {
    pub name: String,
    /// Edge length of the object's bounding cube.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteShape {
    pub name: String,
    pub descriptor: [f64; 3],
    /// Half-width of the per-object variation around `descriptor`, per axis.
    /// Instances of one shape differ (a long rectangle and a nearly square one)
    /// even before observation noise.
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub spread: [f64; 3],
}

fn is_zero3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub colors: Vec<PaletteColor>,
    pub sizes: Vec<PaletteSize>,
    pub shapes: Vec<PaletteShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub color: String,
    pub size: String,
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<[f64; 2]>,
}

/// Versioned scene description, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub version: u32,
    pub workspace: Workspace,
    pub palette: Palette,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub seed: u64,
}

/// Clearance kept between randomly placed objects.
const PLACEMENT_CLEARANCE: f64 = 0.01;
const PLACEMENT_ATTEMPTS: usize = 2000;

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let spec: SceneSpec =
            serde_json::from_str(text).map_err(|e| WorldError::InvalidSpec(e.to_string()))?;
        if spec.version != SCENE_SPEC_VERSION {
            return Err(WorldError::InvalidSpec(format!(
                "unsupported version {}",
                spec.version
            )));
        }
        Ok(spec)
    }

    fn validate(&self) -> Result<(), WorldError> {
        let ws = &self.workspace;
        if !(ws.w > 0.0 && ws.d > 0.0 && ws.h > 0.0) {
            return Err(WorldError::InvalidSpec("workspace must be positive".into()));
        }
        let p = &self.palette;
        for o in &self.objects {
            if !p.colors.iter().any(|c| c.name == o.color) {
                return Err(WorldError::InvalidSpec(format!("unknown color {}", o.color)));
            }
            if !p.sizes.iter().any(|s| s.name == o.size && s.scale > 0.0) {
                return Err(WorldError::InvalidSpec(format!("unknown size {}", o.size)));
            }
            if !p.shapes.iter().any(|s| s.name == o.shape) {
                return Err(WorldError::InvalidSpec(format!("unknown shape {}", o.shape)));
            }
        }
        Ok(())
    }
}

/// Builds a deterministic scene for `(spec, seed)`.
///
/// Objects without an explicit pose are placed uniformly at random on free
/// table area outside the named locations.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene, WorldError> {
    spec.validate()?;
    let ws = spec.workspace;
    let mut scene = Scene::empty(ws);
    let palette = &spec.palette;

    let mut pending = Vec::with_capacity(spec.objects.len());
    let mut footprint_area = 0.0;
    // separate stream so zero-spread palettes place objects exactly as before
    let mut variation = ChaCha8Rng::seed_from_u64(seed ^ spec.seed.rotate_left(29) ^ 0x0053_4841_5045);
    for (i, os) in spec.objects.iter().enumerate() {
        let color = palette.colors.iter().find(|c| c.name == os.color).expect("validated");
        let size = palette.sizes.iter().find(|s| s.name == os.size).expect("validated");
        let shape = palette.shapes.iter().find(|s| s.name == os.shape).expect("validated");
        let s = size.scale;
        if s > ws.w || s > ws.d || s > ws.h {
            return Err(WorldError::PlacementInfeasible(format!(
                "object {i} larger than the workspace"
            )));
        }
        footprint_area += s * s;
        let obj = WorldObject {
            id: ObjectId(i as u32 + 1),
            pose: [0.0, 0.0, s / 2.0],
            bbox: [s, s, s],
            color: color.rgb,
            size_class: s,
            shape_descriptor: std::array::from_fn(|k| {
                let w = shape.spread[k];
                if w > 0.0 {
                    shape.descriptor[k] + variation.random_range(-w..=w)
                } else {
                    shape.descriptor[k]
                }
            }),
            graspable: true,
        };
        pending.push((obj, os.pose));
        scene.truth.insert(
            ObjectId(i as u32 + 1),
            TruthLabels {
                color: os.color.clone(),
                size: os.size.clone(),
                shape: os.shape.clone(),
            },
        );
    }
    if footprint_area > ws.w * ws.d {
        return Err(WorldError::PlacementInfeasible(format!(
            "total footprint {footprint_area:.3} exceeds table area {:.3}",
            ws.w * ws.d
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ spec.seed.rotate_left(17));
    // explicit poses first so random placement can avoid them
    for (mut obj, pose) in pending.iter().filter(|&(_, p)| p.is_some()).cloned() {
        let [x, y] = pose.expect("filtered");
        if !ws.contains_xy(x, y) {
            return Err(WorldError::PlacementInfeasible(format!(
                "{} pose outside workspace",
                obj.id
            )));
        }
        obj.pose = [x, y, obj.bbox[2] / 2.0];
        if scene
            .objects
            .iter()
            .any(|o| o.footprint().overlaps(&obj.footprint()))
        {
            return Err(WorldError::PlacementInfeasible(format!(
                "{} overlaps another object",
                obj.id
            )));
        }
        scene.objects.push(obj);
    }
    for (mut obj, _) in pending.into_iter().filter(|(_, p)| p.is_none()) {
        let half = obj.bbox[0] / 2.0 + PLACEMENT_CLEARANCE;
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let x = rng.random_range(half..=(ws.w - half).max(half));
            let y = rng.random_range(half..=(ws.d - half).max(half));
            let fp = obj.footprint_at(x, y);
            let padded = Region {
                x0: fp.x0 - PLACEMENT_CLEARANCE,
                y0: fp.y0 - PLACEMENT_CLEARANCE,
                x1: fp.x1 + PLACEMENT_CLEARANCE,
                y1: fp.y1 + PLACEMENT_CLEARANCE,
            };
            let clash = scene.objects.iter().any(|o| o.footprint().overlaps(&padded))
                || scene.locations.iter().any(|l| l.region.overlaps(&padded));
            if !clash {
                obj.pose = [x, y, obj.bbox[2] / 2.0];
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(WorldError::PlacementInfeasible(format!(
                "no free table area for {}",
                obj.id
            )));
        }
        scene.objects.push(obj);
    }
    scene.objects.sort_by_key(|o| o.id);
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn palette() -> Palette {
        Palette {
            colors: vec![
                PaletteColor { name: "red".into(), rgb: [1.0, 0.0, 0.0] },
                PaletteColor { name: "blue".into(), rgb: [0.0, 0.0, 1.0] },
            ],
            sizes: vec![PaletteSize { name: "small".into(), scale: 0.05 }],
            shapes: vec![PaletteShape { name: "square".into(), descriptor: [0.5, 0.5, 0.5], spread: [0.0; 3] }],
        }
    }

    fn spec(n: usize) -> SceneSpec {
        SceneSpec {
            version: 1,
            workspace: Workspace::default(),
            palette: palette(),
            objects: (0..n)
                .map(|i| ObjectSpec {
                    color: if i % 2 == 0 { "red" } else { "blue" }.into(),
                    size: "small".into(),
                    shape: "square".into(),
                    pose: None,
                })
                .collect(),
            seed: 0,
        }
    }

    /// Resting height from the box alone: center sits half a height above the table.
    fn table_resting_height(bbox: [f64; 3]) -> f64 {
        bbox[2] * 0.5
    }

    #[test]
    fn shape_spread_varies_instances_within_bounds() {
        let plain = generate_scene(&spec(6), 4).unwrap();
        assert!(plain.objects.iter().all(|o| o.shape_descriptor == [0.5; 3]));

        let mut s = spec(6);
        s.palette.shapes[0].spread = [0.3, 0.0, 0.1];
        let a = generate_scene(&s, 4).unwrap();
        let b = generate_scene(&s, 4).unwrap();
        assert_eq!(a, b);
        for o in &a.objects {
            let d = o.shape_descriptor;
            assert!((d[0] - 0.5).abs() <= 0.3 && d[1] == 0.5 && (d[2] - 0.5).abs() <= 0.1);
        }
        let first = a.objects[0].shape_descriptor;
        assert!(a.objects.iter().any(|o| o.shape_descriptor != first));
        // placement does not depend on the spread
        let poses = |sc: &Scene| sc.objects.iter().map(|o| o.pose).collect::<Vec<_>>();
        assert_eq!(poses(&plain), poses(&a));
    }

    #[test]
    fn pick_up_then_second_pick_up_unavailable() {
        let scene = generate_scene(&spec(2), 3).unwrap();
        let s1 = scene.apply_action(&PrimitiveAction::PickUp { object: ObjectId(1) }).unwrap();
        assert_eq!(s1.arm, ArmState::Holding(ObjectId(1)));
        assert_eq!(s1.tick, 1);
        let err = s1.apply_action(&PrimitiveAction::PickUp { object: ObjectId(2) });
        assert!(matches!(err, Err(WorldError::ActionUnavailable(_))));
    }

    #[test]
    fn put_down_on_empty_table_rests_at_half_height() {
        let mut scene = Scene::empty(Workspace::default());
        scene.objects.push(WorldObject {
            id: ObjectId(1),
            pose: [0.5, 0.5, 0.03],
            bbox: [0.06, 0.06, 0.06],
            color: [1.0, 0.0, 0.0],
            size_class: 0.06,
            shape_descriptor: [0.5; 3],
            graspable: true,
        });
        let held = scene.apply_action(&PrimitiveAction::PickUp { object: ObjectId(1) }).unwrap();
        let placed = held.apply_action(&PrimitiveAction::PutDown { x: 0.3, y: 0.4 }).unwrap();
        let o = placed.object(ObjectId(1)).unwrap();
        assert_eq!(o.pose, [0.3, 0.4, table_resting_height(o.bbox)]);
        assert_eq!(placed.arm, ArmState::Empty);
    }

    #[test]
    fn put_down_with_empty_arm_is_unavailable() {
        let scene = generate_scene(&spec(1), 1).unwrap();
        let err = scene.apply_action(&PrimitiveAction::PutDown { x: 0.5, y: 0.5 });
        assert!(matches!(err, Err(WorldError::ActionUnavailable(_))));
    }

    #[test]
    fn non_graspable_cannot_be_picked() {
        let mut scene = generate_scene(&spec(1), 1).unwrap();
        scene.objects[0].graspable = false;
        let err = scene.apply_action(&PrimitiveAction::PickUp { object: ObjectId(1) });
        assert!(matches!(err, Err(WorldError::ActionUnavailable(_))));
    }

    #[test]
    fn stacking_and_partial_overlap() {
        let mut scene = Scene::empty(Workspace::default());
        for (i, x) in [(1, 0.5), (2, 0.2)] {
            scene.objects.push(WorldObject {
                id: ObjectId(i),
                pose: [x, 0.5, 0.03],
                bbox: [0.06, 0.06, 0.06],
                color: [0.0; 3],
                size_class: 0.06,
                shape_descriptor: [0.5; 3],
                graspable: true,
            });
        }
        let held = scene.apply_action(&PrimitiveAction::PickUp { object: ObjectId(2) }).unwrap();
        let stacked = held.apply_action(&PrimitiveAction::PutDown { x: 0.51, y: 0.5 }).unwrap();
        assert!((stacked.object(ObjectId(2)).unwrap().pose[2] - 0.09).abs() < 1e-12);
        // the base now supports something
        let err = stacked.apply_action(&PrimitiveAction::PickUp { object: ObjectId(1) });
        assert!(matches!(err, Err(WorldError::ActionUnavailable(_))));
        // center still over the base: stacks
        assert!(held.apply_action(&PrimitiveAction::PutDown { x: 0.525, y: 0.5 }).is_ok());
        // footprint overlaps the base but the center is off it
        for (x, y) in [(0.54, 0.5), (0.45, 0.45)] {
            let r = held.apply_action(&PrimitiveAction::PutDown { x, y });
            assert!(matches!(r, Err(WorldError::PlacementBlocked { .. })), "{x},{y}");
        }
        let beside = held.apply_action(&PrimitiveAction::PutDown { x: 0.6, y: 0.5 }).unwrap();
        assert!((beside.object(ObjectId(2)).unwrap().pose[2] - 0.03).abs() < 1e-12);
        let out = held.apply_action(&PrimitiveAction::PutDown { x: 1.2, y: 0.5 });
        assert!(matches!(out, Err(WorldError::OutOfBounds { .. })));
    }

    #[test]
    fn point_annotation_lives_one_tick() {
        let scene = generate_scene(&spec(2), 5).unwrap();
        let s1 = scene.apply_action(&PrimitiveAction::PointTo { object: ObjectId(2) }).unwrap();
        assert_eq!(s1.pointed(), Some(ObjectId(2)));
        assert_eq!(s1.objects, scene.objects);
        let s2 = s1.apply_action(&PrimitiveAction::PickUp { object: ObjectId(1) }).unwrap();
        assert_eq!(s2.pointed(), None);
    }

    #[test]
    fn unknown_object_is_rejected() {
        let scene = generate_scene(&spec(1), 1).unwrap();
        let err = scene.apply_action(&PrimitiveAction::PickUp { object: ObjectId(9) });
        assert_eq!(err, Err(WorldError::UnknownObject(ObjectId(9))));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = generate_scene(&spec(12), 42).unwrap();
        let b = generate_scene(&spec(12), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.objects.len(), 12);
        a.check_invariants().unwrap();
        let c = generate_scene(&spec(12), 43).unwrap();
        assert_ne!(a.objects, c.objects);
    }

    #[test]
    fn oversubscribed_table_is_infeasible() {
        let mut s = spec(10_000);
        s.palette.sizes[0].scale = 1.0 / 2.0;
        s.workspace = Workspace { w: 1.0, d: 1.0, h: 1.0 };
        // 10,000 cubes of edge 0.5 cover 2,500 table areas
        assert!(matches!(
            generate_scene(&s, 0),
            Err(WorldError::PlacementInfeasible(_))
        ));
    }

    #[test]
    fn observe_without_noise_reports_generator_color() {
        let scene = generate_scene(&spec(3), 2).unwrap();
        let percepts = scene.observe(&FeatureNoise::none(), 9);
        assert_eq!(percepts.len(), 3);
        assert_eq!(percepts[0].features.color, [1.0, 0.0, 0.0]);
        assert!(Scene::empty(Workspace::default()).observe(&FeatureNoise::default(), 1).is_empty());
    }

    #[test]
    fn object_id_round_trips_as_string() {
        let id = ObjectId(17);
        let s = serde_json::to_string(&id).unwrap();
        assert_eq!(s, "\"o17\"");
        assert_eq!(serde_json::from_str::<ObjectId>(&s).unwrap(), id);
    }
}
