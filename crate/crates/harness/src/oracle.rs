//! Ground-truth preposition predicates used by the scripted instructor.
//!
//! These work on raw poses and extents and share no code with the agent's
//! learned compositions.

use grounded_core::world::{EntityId, Scene};

/// Largest edge gap still called "near".
pub const NEAR_MAX: f64 = 0.1;
/// Smallest edge gap called "far from".
pub const FAR_MIN: f64 = 0.3;

/// The prepositions the instructor can judge.
pub const PREPOSITIONS: &[&str] =
    &["left of", "right of", "in front of", "behind", "near", "far from", "in"];

/// Axis-aligned box as (center, half extents).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub center: [f64; 3],
    pub half: [f64; 3],
}

impl Extent {
    fn lo(&self, i: usize) -> f64 {
        self.center[i] - self.half[i]
    }

    fn hi(&self, i: usize) -> f64 {
        self.center[i] + self.half[i]
    }

    /// Closed intervals share at least a point on axis `i`.
    fn overlaps(&self, other: &Extent, i: usize) -> bool {
        self.lo(i) <= other.hi(i) && other.lo(i) <= self.hi(i)
    }

    /// Free space between the boxes along axis `i`, zero when they overlap.
    fn gap(&self, other: &Extent, i: usize) -> f64 {
        (self.lo(i) - other.hi(i)).max(other.lo(i) - self.hi(i)).max(0.0)
    }
}

/// Box of an object or of a location (a thin slab on the table).
pub fn extent_of(scene: &Scene, entity: EntityId) -> Option<Extent> {
    match entity {
        EntityId::Object(id) => {
            let o = scene.object(id)?;
            Some(Extent { center: o.pose, half: o.bbox.map(|e| e / 2.0) })
        }
        EntityId::Location(name) => {
            let r = scene.location(name)?.region;
            let half = [(r.x1 - r.x0) / 2.0, (r.y1 - r.y0) / 2.0, 0.0005];
            Some(Extent { center: [(r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0, 0.0005], half })
        }
    }
}

/// Whether `primary PREP reference` is true; `None` for prepositions the
/// oracle does not know.
pub fn holds(prep: &str, primary: &Extent, reference: &Extent, reference_is_region: bool) -> Option<bool> {
    let (p, r) = (primary, reference);
    let level = p.overlaps(r, 2);
    let v = match prep {
        "left of" => p.hi(0) < r.lo(0) && p.overlaps(r, 1) && level,
        "right of" => p.lo(0) > r.hi(0) && p.overlaps(r, 1) && level,
        "in front of" => p.hi(1) < r.lo(1) && p.overlaps(r, 0) && level,
        "behind" => p.lo(1) > r.hi(1) && p.overlaps(r, 0) && level,
        "near" | "far from" => {
            let gap = p.gap(r, 0).max(p.gap(r, 1));
            if prep == "near" {
                gap > 0.0 && gap <= NEAR_MAX
            } else {
                gap >= FAR_MIN
            }
        }
        "in" => {
            reference_is_region
                && p.center[0] >= r.lo(0)
                && p.center[0] <= r.hi(0)
                && p.center[1] >= r.lo(1)
                && p.center[1] <= r.hi(1)
        }
        _ => return None,
    };
    Some(v)
}

/// `holds` for two entities of a scene.
pub fn holds_in(scene: &Scene, prep: &str, primary: EntityId, reference: EntityId) -> Option<bool> {
    if primary == reference {
        return Some(false);
    }
    let p = extent_of(scene, primary)?;
    let r = extent_of(scene, reference)?;
    holds(prep, &p, &r, matches!(reference, EntityId::Location(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use grounded_core::spatial::{extract_primitives, Aabb, Relation};

    fn ext(x: f64, y: f64) -> Extent {
        Extent { center: [x, y, 0.03], half: [0.03; 3] }
    }

    fn aabb(e: &Extent) -> Aabb {
        Aabb::from_center(e.center, e.half.map(|h| h * 2.0))
    }

    #[test]
    fn directions_agree_with_primitives_on_clear_cases() {
        let r = ext(0.5, 0.5);
        let cases = [
            ("left of", ext(0.3, 0.5), Relation::LessThan, Relation::Aligned),
            ("right of", ext(0.7, 0.51), Relation::GreaterThan, Relation::Aligned),
            ("in front of", ext(0.49, 0.3), Relation::Aligned, Relation::LessThan),
            ("behind", ext(0.5, 0.7), Relation::Aligned, Relation::GreaterThan),
        ];
        for (prep, p, rx, ry) in cases {
            assert_eq!(holds(prep, &p, &r, false), Some(true), "{prep}");
            let prims = extract_primitives(&aabb(&p), &aabb(&r));
            assert_eq!(*prims.relations.get(grounded_core::spatial::Axis::X), rx, "{prep}");
            assert_eq!(*prims.relations.get(grounded_core::spatial::Axis::Y), ry, "{prep}");
            for other in ["left of", "right of", "in front of", "behind"].iter().filter(|o| **o != prep) {
                assert_eq!(holds(other, &p, &r, false), Some(false), "{prep} vs {other}");
            }
        }
    }

    #[test]
    fn diagonal_is_no_direction() {
        let r = ext(0.5, 0.5);
        let p = ext(0.3, 0.3);
        for prep in ["left of", "right of", "in front of", "behind"] {
            assert_eq!(holds(prep, &p, &r, false), Some(false));
        }
    }

    #[test]
    fn near_and_far_are_exclusive() {
        let r = ext(0.5, 0.5);
        for x in [0.2, 0.35, 0.42, 0.8] {
            let p = ext(x, 0.5);
            let near = holds("near", &p, &r, false).unwrap();
            let far = holds("far from", &p, &r, false).unwrap();
            assert!(!(near && far));
        }
        assert_eq!(holds("near", &ext(0.42, 0.5), &r, false), Some(true));
        assert_eq!(holds("far from", &ext(0.12, 0.5), &r, false), Some(true));
        assert_eq!(holds("near", &ext(0.5, 0.5), &r, false), Some(false));
    }

    #[test]
    fn in_needs_a_region_and_the_center_inside() {
        let region = Extent { center: [0.25, 0.75, 0.0005], half: [0.07, 0.07, 0.0005] };
        assert_eq!(holds("in", &ext(0.3, 0.8), &region, true), Some(true));
        assert_eq!(holds("in", &ext(0.34, 0.8), &region, true), Some(false));
        assert_eq!(holds("in", &ext(0.3, 0.8), &region, false), Some(false));
        assert_eq!(holds("on top of", &ext(0.3, 0.8), &region, true), None);
    }
}
