//! Internal action model: the agent's own account of what each primitive
//! does, used to replay episodes and to search for placements without
//! touching the world.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::Snapshot;
use crate::world::{ArmState, ObjectId, PrimitiveAction, Scene, Workspace};

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no object {0}")]
    UnknownObject(ObjectId),
    #[error("precondition failed: {0}")]
    Precondition(&'static str),
    #[error("cannot rest an object at ({x:.3}, {y:.3})")]
    NoSupport { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub id: ObjectId,
    pub pose: [f64; 3],
    pub bbox: [f64; 3],
    pub graspable: bool,
}

impl SimObject {
    fn lo(&self, i: usize) -> f64 {
        self.pose[i] - self.bbox[i] / 2.0
    }

    fn hi(&self, i: usize) -> f64 {
        self.pose[i] + self.bbox[i] / 2.0
    }

    /// Strict footprint overlap with a box of size `bbox` centered at (x, y).
    fn footprint_overlaps(&self, x: f64, y: f64, bbox: [f64; 3]) -> bool {
        (self.pose[0] - x).abs() < (self.bbox[0] + bbox[0]) / 2.0
            && (self.pose[1] - y).abs() < (self.bbox[1] + bbox[1]) / 2.0
    }
}

/// Geometry and arm state only; no percepts, no tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub workspace: Workspace,
    pub objects: Vec<SimObject>,
    pub arm: ArmState,
}

impl SimState {
    pub fn from_scene(scene: &Scene) -> Self {
        SimState {
            workspace: scene.workspace,
            objects: scene
                .objects
                .iter()
                .map(|o| SimObject { id: o.id, pose: o.pose, bbox: o.bbox, graspable: o.graspable })
                .collect(),
            arm: scene.arm,
        }
    }

    pub fn from_snapshot(snapshot: &Snapshot, workspace: Workspace) -> Self {
        SimState {
            workspace,
            objects: snapshot
                .objects
                .iter()
                .map(|o| SimObject { id: o.id, pose: o.pose, bbox: o.bbox, graspable: o.graspable })
                .collect(),
            arm: snapshot.arm,
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// True when some other object rests directly on `id`.
    pub fn is_clear(&self, id: ObjectId) -> bool {
        let Some(base) = self.object(id) else {
            return false;
        };
        !self.objects.iter().any(|o| {
            o.id != base.id
                && Some(o.id) != self.arm.held()
                && (o.lo(2) - base.hi(2)).abs() < EPS
                && o.footprint_overlaps(base.pose[0], base.pose[1], base.bbox)
        })
    }

    /// Where `id` would come to rest if released above (x, y).
    pub fn landing_z(&self, id: ObjectId, x: f64, y: f64) -> Result<f64, ModelError> {
        let obj = self.object(id).ok_or(ModelError::UnknownObject(id))?;
        let mut support: Option<&SimObject> = None;
        for o in &self.objects {
            if o.id == id || !o.footprint_overlaps(x, y, obj.bbox) {
                continue;
            }
            if support.is_none_or(|s| o.hi(2) > s.hi(2)) {
                support = Some(o);
            }
        }
        let half = obj.bbox[2] / 2.0;
        let z = match support {
            None => half,
            Some(s) => {
                let inside = x >= s.lo(0) && x <= s.hi(0) && y >= s.lo(1) && y <= s.hi(1);
                if !inside {
                    return Err(ModelError::NoSupport { x, y });
                }
                s.hi(2) + half
            }
        };
        if z + half > self.workspace.h + EPS {
            return Err(ModelError::NoSupport { x, y });
        }
        Ok(z)
    }

    /// Whether every pose and the arm agree with `other` to within `tol`.
    pub fn approx_eq(&self, other: &SimState, tol: f64) -> bool {
        self.arm == other.arm
            && self.objects.len() == other.objects.len()
            && self.objects.iter().all(|o| {
                other.object(o.id).is_some_and(|p| {
                    (0..3).all(|i| (o.pose[i] - p.pose[i]).abs() <= tol)
                })
            })
    }
}

/// Preconditions and effects of the three primitives.
pub struct ActionModel;

impl ActionModel {
    pub fn check(state: &SimState, action: &PrimitiveAction) -> Result<(), ModelError> {
        match *action {
            PrimitiveAction::PointTo { object } => {
                state.object(object).ok_or(ModelError::UnknownObject(object))?;
            }
            PrimitiveAction::PickUp { object } => {
                let obj = state.object(object).ok_or(ModelError::UnknownObject(object))?;
                if state.arm != ArmState::Empty {
                    return Err(ModelError::Precondition("arm not empty"));
                }
                if !obj.graspable {
                    return Err(ModelError::Precondition("not graspable"));
                }
                if !state.is_clear(object) {
                    return Err(ModelError::Precondition("not clear"));
                }
            }
            PrimitiveAction::PutDown { x, y } => {
                let ArmState::Holding(held) = state.arm else {
                    return Err(ModelError::Precondition("arm empty"));
                };
                let ws = &state.workspace;
                if !(0.0..=ws.w).contains(&x) || !(0.0..=ws.d).contains(&y) {
                    return Err(ModelError::Precondition("out of bounds"));
                }
                state.landing_z(held, x, y)?;
            }
        }
        Ok(())
    }

    pub fn apply(state: &SimState, action: &PrimitiveAction) -> Result<SimState, ModelError> {
        Self::check(state, action)?;
        let mut next = state.clone();
        match *action {
            PrimitiveAction::PointTo { .. } => {}
            PrimitiveAction::PickUp { object } => {
                let h = state.workspace.h;
                let o = next.objects.iter_mut().find(|o| o.id == object).expect("checked");
                o.pose[2] = h - o.bbox[2] / 2.0;
                next.arm = ArmState::Holding(object);
            }
            PrimitiveAction::PutDown { x, y } => {
                let held = state.arm.held().expect("checked");
                let z = state.landing_z(held, x, y)?;
                let o = next.objects.iter_mut().find(|o| o.id == held).expect("checked");
                o.pose = [x, y, z];
                next.arm = ArmState::Empty;
            }
        }
        Ok(next)
    }

    /// Applies a sequence, stopping at the first failure.
    pub fn run(state: &SimState, actions: &[PrimitiveAction]) -> Result<SimState, ModelError> {
        actions.iter().try_fold(state.clone(), |s, a| Self::apply(&s, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldObject;

    fn obj(id: u32, pose: [f64; 3], s: f64) -> WorldObject {
        WorldObject {
            id: ObjectId(id),
            pose,
            bbox: [s, s, s],
            color: [0.5; 3],
            size_class: 1.0,
            shape_descriptor: [0.0; 3],
            graspable: true,
        }
    }

    #[test]
    fn pick_and_stack() {
        let mut scene = Scene::empty(Workspace::default());
        scene.objects.push(obj(1, [0.2, 0.2, 0.03], 0.06));
        scene.objects.push(obj(2, [0.5, 0.5, 0.03], 0.06));
        let s = SimState::from_scene(&scene);
        let s = ActionModel::apply(&s, &PrimitiveAction::PickUp { object: ObjectId(1) }).unwrap();
        assert_eq!(s.arm, ArmState::Holding(ObjectId(1)));
        let s = ActionModel::apply(&s, &PrimitiveAction::PutDown { x: 0.51, y: 0.5 }).unwrap();
        assert!((s.object(ObjectId(1)).unwrap().pose[2] - 0.09).abs() < 1e-12);
        assert!(!s.is_clear(ObjectId(2)));
        assert!(ActionModel::check(&s, &PrimitiveAction::PickUp { object: ObjectId(2) }).is_err());
    }
}
