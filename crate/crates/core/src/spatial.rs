//! Qualitative spatial relations between boxes and learned preposition meanings.
//!
//! Relations are always expressed in the fixed camera frame: X grows to the
//! instructor's right, Y grows away from the camera, Z grows upwards.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{NamedLocation, Workspace, WorldObject};

/// Height given to named table regions when they act as reference boxes.
pub const REGION_THICKNESS: f64 = 0.001;
/// Fraction of the workspace extent above which a distance range is ignored.
pub const WINDOW_SPAN_LIMIT: f64 = 0.5;
pub const WINDOW_SLACK: f64 = 0.2;
pub const WINDOW_MIN_SLACK: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("composition has no training examples")]
    UntrainedComposition,
    #[error("relation {relation} is not allowed on axis {axis}")]
    RelationNotAllowed { axis: Axis, relation: Relation },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Aligned,
    GreaterThan,
    LessThan,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Aligned => "aligned",
            Relation::GreaterThan => "greater-than",
            Relation::LessThan => "less-than",
        })
    }
}

/// One value per axis, serialized as `{x, y, z}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerAxis<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> PerAxis<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        PerAxis { x, y, z }
    }

    pub fn get(&self, axis: Axis) -> &T {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn get_mut(&mut self, axis: Axis) -> &mut T {
        match axis {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
            Axis::Z => &mut self.z,
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn from_center(center: [f64; 3], extent: [f64; 3]) -> Self {
        Aabb {
            min: [0, 1, 2].map(|i| center[i] - extent[i] / 2.0),
            max: [0, 1, 2].map(|i| center[i] + extent[i] / 2.0),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| (self.min[i] + self.max[i]) / 2.0)
    }

    pub fn half_extent(&self, axis: Axis) -> f64 {
        (self.max[axis.index()] - self.min[axis.index()]) / 2.0
    }
}

/// A box taking part in a spatial relation. Named locations are regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub aabb: Aabb,
    pub region: bool,
}

impl Body {
    pub fn object(obj: &WorldObject) -> Self {
        Body { aabb: Aabb::from_center(obj.pose, obj.bbox), region: false }
    }

    pub fn location(loc: &NamedLocation) -> Self {
        let r = &loc.region;
        Body {
            aabb: Aabb { min: [r.x0, r.y0, 0.0], max: [r.x1, r.y1, REGION_THICKNESS] },
            region: true,
        }
    }

    pub fn from_pose(pose: [f64; 3], bbox: [f64; 3]) -> Self {
        Body { aabb: Aabb::from_center(pose, bbox), region: false }
    }
}

/// Directional relations and closest-surface gaps of `primary` w.r.t. `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitives {
    pub relations: PerAxis<Relation>,
    pub distances: PerAxis<f64>,
}

pub fn extract_primitives(primary: &Aabb, reference: &Aabb) -> Primitives {
    let mut relations = PerAxis::new(Relation::Aligned, Relation::Aligned, Relation::Aligned);
    let mut distances = PerAxis::new(0.0, 0.0, 0.0);
    for axis in Axis::ALL {
        let i = axis.index();
        let (rel, gap) = if primary.min[i] > reference.max[i] {
            (Relation::GreaterThan, primary.min[i] - reference.max[i])
        } else if primary.max[i] < reference.min[i] {
            (Relation::LessThan, reference.min[i] - primary.max[i])
        } else {
            (Relation::Aligned, 0.0)
        };
        *relations.get_mut(axis) = rel;
        *distances.get_mut(axis) = gap;
    }
    Primitives { relations, distances }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceStats {
    pub n: u32,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl DistanceStats {
    fn add(&mut self, d: f64) {
        if self.n == 0 {
            self.min = d;
            self.max = d;
            self.mean = d;
        } else {
            self.min = self.min.min(d);
            self.max = self.max.max(d);
            self.mean += (d - self.mean) / f64::from(self.n + 1);
        }
        self.n += 1;
    }

    /// Accepted distance interval, if this axis constrains distance at all.
    pub fn window(&self, extent: f64) -> Option<(f64, f64)> {
        if self.n < 2 {
            return None;
        }
        let span = self.max - self.min;
        if span >= WINDOW_SPAN_LIMIT * extent {
            return None;
        }
        let slack = (WINDOW_SLACK * span).max(WINDOW_MIN_SLACK);
        Some((self.min - slack, self.max + slack))
    }
}

/// Learned meaning of a preposition.
///
/// Distance statistics on an axis only accumulate from examples that are
/// separated on that axis; an aligned axis has no gap to learn from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialComposition {
    pub allowed: PerAxis<BTreeSet<Relation>>,
    pub dist: PerAxis<DistanceStats>,
    pub example_count: u32,
    pub ever_all_aligned: bool,
}

impl SpatialComposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn learn_example(&mut self, prims: &Primitives) {
        let mut all_aligned = true;
        for axis in Axis::ALL {
            let rel = *prims.relations.get(axis);
            self.allowed.get_mut(axis).insert(rel);
            if rel == Relation::Aligned {
                continue;
            }
            all_aligned = false;
            self.dist.get_mut(axis).add(*prims.distances.get(axis));
        }
        self.ever_all_aligned |= all_aligned;
        self.example_count += 1;
    }

    pub fn is_trained(&self) -> bool {
        self.example_count > 0
    }

    /// Direction test plus any active distance windows.
    pub fn evaluate(
        &self,
        primary: &Body,
        reference: &Body,
        ws: &Workspace,
    ) -> Result<bool, SpatialError> {
        if !self.is_trained() {
            return Err(SpatialError::UntrainedComposition);
        }
        let prims = extract_primitives(&primary.aabb, &reference.aabb);
        let extent = ws.extent();
        for axis in Axis::ALL {
            let rel = *prims.relations.get(axis);
            if !self.allowed.get(axis).contains(&rel) {
                return Ok(false);
            }
            if rel == Relation::Aligned {
                continue;
            }
            if let Some((lo, hi)) = self.dist.get(axis).window(extent[axis.index()]) {
                let d = *prims.distances.get(axis);
                if d < lo || d > hi {
                    return Ok(false);
                }
            }
        }
        if self.ever_all_aligned && reference.region {
            let c = primary.aabb.center();
            let r = &reference.aabb;
            if c[0] < r.min[0] || c[0] > r.max[0] || c[1] < r.min[1] || c[1] > r.max[1] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Placement point for a `primary`-sized box using the given relation per axis.
    pub fn project_with_choice(
        &self,
        choice: PerAxis<Relation>,
        primary_extent: [f64; 3],
        reference: &Body,
        ws: &Workspace,
    ) -> Result<[f64; 3], SpatialError> {
        if !self.is_trained() {
            return Err(SpatialError::UntrainedComposition);
        }
        let center = reference.aabb.center();
        let mut point = center;
        for axis in Axis::ALL {
            let rel = *choice.get(axis);
            if !self.allowed.get(axis).contains(&rel) {
                return Err(SpatialError::RelationNotAllowed { axis, relation: rel });
            }
            let i = axis.index();
            let offset = self.dist.get(axis).mean
                + reference.aabb.half_extent(axis)
                + primary_extent[i] / 2.0;
            point[i] = match rel {
                Relation::Aligned => center[i],
                Relation::GreaterThan => center[i] + offset,
                Relation::LessThan => center[i] - offset,
            };
        }
        let bounds = ws.extent();
        for i in 0..3 {
            point[i] = point[i].clamp(0.0, bounds[i]);
        }
        Ok(point)
    }

    /// Projection with one allowed relation per axis drawn from `rng`.
    pub fn project<R: Rng + ?Sized>(
        &self,
        primary_extent: [f64; 3],
        reference: &Body,
        ws: &Workspace,
        rng: &mut R,
    ) -> Result<[f64; 3], SpatialError> {
        if !self.is_trained() {
            return Err(SpatialError::UntrainedComposition);
        }
        let choice = self.draw_choice(rng);
        self.project_with_choice(choice, primary_extent, reference, ws)
    }

    pub fn draw_choice<R: Rng + ?Sized>(&self, rng: &mut R) -> PerAxis<Relation> {
        let mut pick = |axis: Axis| {
            let options: Vec<Relation> = self.allowed.get(axis).iter().copied().collect();
            *options.choose(rng).unwrap_or(&Relation::Aligned)
        };
        let x = pick(Axis::X);
        let y = pick(Axis::Y);
        let z = pick(Axis::Z);
        PerAxis::new(x, y, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(c: [f64; 3], e: f64) -> Aabb {
        Aabb::from_center(c, [e, e, e])
    }

    #[test]
    fn coincident_boxes_are_aligned_everywhere() {
        let a = cube([0.5, 0.5, 0.05], 0.1);
        let p = extract_primitives(&a, &a);
        assert_eq!(p.relations, PerAxis::new(Relation::Aligned, Relation::Aligned, Relation::Aligned));
        assert_eq!(p.distances, PerAxis::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn touching_intervals_are_aligned() {
        let a = Aabb { min: [0.0; 3], max: [1.0; 3] };
        let b = Aabb { min: [1.0, 0.0, 0.0], max: [2.0, 1.0, 1.0] };
        assert_eq!(extract_primitives(&a, &b).relations.x, Relation::Aligned);
    }

    #[test]
    fn same_example_twice_only_counts() {
        let p = extract_primitives(&cube([0.2, 0.5, 0.05], 0.1), &cube([0.6, 0.5, 0.05], 0.1));
        let mut c = SpatialComposition::new();
        c.learn_example(&p);
        let allowed = c.allowed.clone();
        c.learn_example(&p);
        assert_eq!(c.allowed, allowed);
        assert_eq!(c.example_count, 2);
        assert!((c.dist.x.mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn untrained_composition_errors() {
        let c = SpatialComposition::new();
        let b = Body::from_pose([0.5; 3], [0.1; 3]);
        assert_eq!(c.evaluate(&b, &b, &Workspace::default()), Err(SpatialError::UntrainedComposition));
    }

    #[test]
    fn all_aligned_projects_to_reference_center() {
        let reference = Body::from_pose([0.3, 0.7, 0.05], [0.1; 3]);
        let mut c = SpatialComposition::new();
        c.learn_example(&extract_primitives(&reference.aabb, &reference.aabb));
        let mut rng = rand::rng();
        let p = c.project([0.05; 3], &reference, &Workspace::default(), &mut rng).unwrap();
        assert_eq!(p, [0.3, 0.7, 0.05]);
    }

    #[test]
    fn window_needs_two_examples_and_narrow_span() {
        let mut s = DistanceStats::default();
        s.add(0.05);
        assert_eq!(s.window(1.0), None);
        s.add(0.07);
        let (lo, hi) = s.window(1.0).unwrap();
        assert!((lo - 0.03).abs() < 1e-12 && (hi - 0.09).abs() < 1e-12);
        s.add(0.9);
        assert_eq!(s.window(1.0), None);
    }

    #[test]
    fn region_containment_requires_center_inside() {
        let loc = Body {
            aabb: Aabb { min: [0.2, 0.2, 0.0], max: [0.3, 0.3, REGION_THICKNESS] },
            region: true,
        };
        let inside = Body::from_pose([0.25, 0.25, 0.03], [0.06; 3]);
        let straddling = Body::from_pose([0.31, 0.25, 0.03], [0.06; 3]);
        let mut c = SpatialComposition::new();
        c.learn_example(&extract_primitives(&inside.aabb, &loc.aabb));
        assert!(c.ever_all_aligned);
        let ws = Workspace::default();
        assert!(c.evaluate(&inside, &loc, &ws).unwrap());
        assert!(!c.evaluate(&straddling, &loc, &ws).unwrap());
    }
}
