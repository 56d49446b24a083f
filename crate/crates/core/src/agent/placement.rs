//! Choosing where to put the held object down.

use rand::Rng;

use super::ground::relation_holds;
use super::model::{ActionModel, SimState};
use crate::spatial::SpatialComposition;
use crate::world::{EntityId, NamedLocation, PrimitiveAction};

/// Projection draws tried before random sampling.
const PROJECTION_DRAWS: usize = 8;
/// Half-width of the box sampled around each projection.
const LOCAL_RADIUS: f64 = 0.1;
/// Minimum gap kept to other objects on the table.
const CLEARANCE: f64 = 0.005;

pub enum PlacementGoal<'a> {
    Relation { comp: &'a SpatialComposition, reference: EntityId },
    /// Anywhere on the table outside every named location.
    FreeSpot,
}

/// Table point where putting the held object down satisfies `goal`.
pub fn find_put_down<R: Rng + ?Sized>(
    state: &SimState,
    locations: &[NamedLocation],
    goal: &PlacementGoal<'_>,
    samples: usize,
    rng: &mut R,
) -> Option<(f64, f64)> {
    let held = state.arm.held()?;
    let obj = state.object(held)?;
    let ext = obj.bbox;
    let ws = state.workspace;
    let mut candidates = Vec::with_capacity(samples + PROJECTION_DRAWS);
    let mut anchors = Vec::new();
    if let PlacementGoal::Relation { comp, reference } = goal {
        if let Some(body) = super::ground::entity_body(state, locations, *reference) {
            for _ in 0..PROJECTION_DRAWS {
                if let Ok(p) = comp.project(ext, &body, &ws, rng) {
                    candidates.push((p[0], p[1]));
                    anchors.push((p[0], p[1]));
                }
            }
        }
    }
    let (lo_x, hi_x) = (ext[0] / 2.0, ws.w - ext[0] / 2.0);
    let (lo_y, hi_y) = (ext[1] / 2.0, ws.d - ext[1] / 2.0);
    for i in 0..samples {
        // half the samples jitter around a projection, the rest cover the table
        let (x, y) = match anchors.get(i % anchors.len().max(1)) {
            Some(&(ax, ay)) if i % 2 == 0 => (
                (ax + rng.random_range(-LOCAL_RADIUS..=LOCAL_RADIUS)).clamp(lo_x, hi_x),
                (ay + rng.random_range(-LOCAL_RADIUS..=LOCAL_RADIUS)).clamp(lo_y, hi_y),
            ),
            _ => (rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y)),
        };
        candidates.push((x, y));
    }
    candidates.into_iter().find(|&(x, y)| {
        if !on_table_clear(state, held, x, y) {
            return false;
        }
        let Ok(next) = ActionModel::apply(state, &PrimitiveAction::PutDown { x, y }) else {
            return false;
        };
        match goal {
            PlacementGoal::Relation { comp, reference } => {
                relation_holds(comp, &next, locations, EntityId::Object(held), *reference)
            }
            PlacementGoal::FreeSpot => {
                let (hx, hy) = (ext[0] / 2.0, ext[1] / 2.0);
                locations.iter().all(|l| {
                    let r = &l.region;
                    x + hx < r.x0 || x - hx > r.x1 || y + hy < r.y0 || y - hy > r.y1
                })
            }
        }
    })
}

/// The footprint at (x, y) stays inside the table and clear of other objects.
fn on_table_clear(state: &SimState, held: crate::world::ObjectId, x: f64, y: f64) -> bool {
    let Some(obj) = state.object(held) else {
        return false;
    };
    let (hx, hy) = (obj.bbox[0] / 2.0, obj.bbox[1] / 2.0);
    let ws = &state.workspace;
    if x - hx < 0.0 || x + hx > ws.w || y - hy < 0.0 || y + hy > ws.d {
        return false;
    }
    state.objects.iter().filter(|o| o.id != held).all(|o| {
        (o.pose[0] - x).abs() >= o.bbox[0] / 2.0 + hx + CLEARANCE
            || (o.pose[1] - y).abs() >= o.bbox[1] / 2.0 + hy + CLEARANCE
    })
}
