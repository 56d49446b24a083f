//! Learned operator rules and their compilation from an instructed episode.
//!
//! A rule names objects only through the argument slots of its operator, so
//! it applies to any instantiation of the verb.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ground::GoalInstance;
use super::model::{ActionModel, SimState};
use crate::memory::{Episode, GoalReference, InstructedAction};
use crate::spatial::SpatialComposition;
use crate::world::{ArmState, EntityId, NamedLocation, ObjectId, PrimitiveAction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("replay diverged from the recorded world at episode {0}")]
    ReplayDivergence(usize),
    #[error("instructed actions do not reach the goal")]
    GoalNotReached,
    #[error("no episodes to compile")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cond", content = "slot", rename_all = "kebab-case")]
pub enum Condition {
    GoalUnmet,
    ArmEmpty,
    Holding(usize),
    /// Holding something that is not the slot's object.
    HoldingOther(usize),
    Graspable(usize),
    Clear(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "kebab-case")]
pub enum ActionTemplate {
    PickUp { slot: usize },
    /// Put the held object where the goal relation holds.
    PutDownGoal,
    PutDownRelative { prep: String, reference: GoalReference },
    PutDownFreeSpot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedRule {
    pub id: String,
    pub operator_id: String,
    pub conditions: Vec<Condition>,
    pub action: ActionTemplate,
}

impl LearnedRule {
    pub fn same_as(&self, other: &LearnedRule) -> bool {
        self.operator_id == other.operator_id
            && self.conditions == other.conditions
            && self.action == other.action
    }
}

fn slot_object(bindings: &[EntityId], slot: usize) -> Option<ObjectId> {
    match bindings.get(slot)? {
        EntityId::Object(id) => Some(*id),
        EntityId::Location(_) => None,
    }
}

/// Whether every condition holds in `state`.
pub fn matches(rule: &LearnedRule, state: &SimState, bindings: &[EntityId], goal_met: bool) -> bool {
    rule.conditions.iter().all(|c| match *c {
        Condition::GoalUnmet => !goal_met,
        Condition::ArmEmpty => state.arm == ArmState::Empty,
        Condition::Holding(s) => {
            slot_object(bindings, s).is_some_and(|o| state.arm == ArmState::Holding(o))
        }
        Condition::HoldingOther(s) => match (state.arm, slot_object(bindings, s)) {
            (ArmState::Holding(h), Some(o)) => h != o,
            _ => false,
        },
        Condition::Graspable(s) => slot_object(bindings, s)
            .and_then(|o| state.object(o))
            .is_some_and(|o| o.graspable),
        Condition::Clear(s) => slot_object(bindings, s).is_some_and(|o| state.is_clear(o)),
    })
}

/// Conflict resolution: the most specific matching rule, earliest on ties.
pub fn select<'r>(
    rules: &'r [LearnedRule],
    operator_id: &str,
    state: &SimState,
    bindings: &[EntityId],
    goal_met: bool,
) -> Option<&'r LearnedRule> {
    let mut best: Option<&LearnedRule> = None;
    for r in rules.iter().filter(|r| r.operator_id == operator_id) {
        if matches(r, state, bindings, goal_met)
            && best.is_none_or(|b| r.conditions.len() > b.conditions.len())
        {
            best = Some(r);
        }
    }
    best
}

pub struct CompileInput<'a> {
    pub operator_id: &'a str,
    pub bindings: &'a [EntityId],
    pub primary_slot: usize,
    pub goal: &'a GoalInstance,
    pub comp: &'a SpatialComposition,
    pub locations: &'a [NamedLocation],
    pub workspace: crate::world::Workspace,
    /// From the command's receipt up to the episode where the goal held.
    pub episodes: &'a [Episode],
}

const REPLAY_TOL: f64 = 1e-9;

/// Replays the episode span, reduces it to a minimal plan and regresses
/// each remaining step into a rule. Returned rules have empty ids.
pub fn compile(input: &CompileInput<'_>) -> Result<Vec<LearnedRule>, CompileError> {
    let first = input.episodes.first().ok_or(CompileError::Empty)?;
    let start = SimState::from_snapshot(&first.snapshot, input.workspace);
    let mut state = start.clone();
    let mut steps: Vec<InstructedAction> = Vec::new();
    for ep in &input.episodes[1..] {
        if let Some(a) = &ep.snapshot.action {
            state = ActionModel::apply(&state, &a.action)
                .map_err(|_| CompileError::ReplayDivergence(ep.index))?;
            steps.push(a.clone());
        }
        let recorded = SimState::from_snapshot(&ep.snapshot, input.workspace);
        if !state.approx_eq(&recorded, REPLAY_TOL) {
            return Err(CompileError::ReplayDivergence(ep.index));
        }
    }
    let goal_at_end = |plan: &[&InstructedAction]| -> bool {
        let actions: Vec<PrimitiveAction> = plan.iter().map(|a| a.action).collect();
        ActionModel::run(&start, &actions)
            .is_ok_and(|s| input.goal.holds(input.comp, &s, input.locations))
    };
    let mut plan: Vec<&InstructedAction> = steps.iter().collect();
    if !goal_at_end(&plan) {
        return Err(CompileError::GoalNotReached);
    }
    plan = minimize(plan, &goal_at_end);

    let mut rules = Vec::new();
    let mut state = start;
    for step in plan {
        if let Some(rule) = regress(input, &state, step) {
            if !rules.iter().any(|r: &LearnedRule| r.same_as(&rule)) {
                rules.push(rule);
            }
        }
        state = ActionModel::apply(&state, &step.action).expect("plan was validated");
    }
    Ok(rules)
}

/// Greedily drops single steps, then pairs, while the goal is still reached.
fn minimize<'a>(
    mut plan: Vec<&'a InstructedAction>,
    valid: &dyn Fn(&[&InstructedAction]) -> bool,
) -> Vec<&'a InstructedAction> {
    loop {
        let mut changed = false;
        let mut i = plan.len();
        while i > 0 {
            i -= 1;
            let mut trial = plan.clone();
            trial.remove(i);
            if valid(&trial) {
                plan = trial;
                changed = true;
            }
        }
        'pairs: for i in 0..plan.len() {
            for j in i + 1..plan.len() {
                let trial: Vec<_> = plan
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, a)| *a)
                    .collect();
                if valid(&trial) {
                    plan = trial;
                    changed = true;
                    break 'pairs;
                }
            }
        }
        if !changed {
            return plan;
        }
    }
}

fn regress(input: &CompileInput<'_>, before: &SimState, step: &InstructedAction) -> Option<LearnedRule> {
    let p = input.primary_slot;
    let slot_of = |id: ObjectId| {
        input.bindings.iter().position(|b| *b == EntityId::Object(id))
    };
    let (conditions, action) = match step.action {
        PrimitiveAction::PointTo { .. } => return None,
        PrimitiveAction::PickUp { object } => {
            let s = slot_of(object)?;
            (
                vec![Condition::GoalUnmet, Condition::ArmEmpty, Condition::Graspable(s), Condition::Clear(s)],
                ActionTemplate::PickUp { slot: s },
            )
        }
        PrimitiveAction::PutDown { .. } => {
            let held = before.arm.held()?;
            if slot_of(held) == Some(p) {
                (vec![Condition::GoalUnmet, Condition::Holding(p)], ActionTemplate::PutDownGoal)
            } else {
                let action = match &step.target {
                    Some((prep, EntityId::Location(l))) => ActionTemplate::PutDownRelative {
                        prep: prep.clone(),
                        reference: GoalReference::Location(*l),
                    },
                    Some((prep, EntityId::Object(o))) => match slot_of(*o) {
                        Some(s) => ActionTemplate::PutDownRelative {
                            prep: prep.clone(),
                            reference: GoalReference::Slot(s),
                        },
                        None => ActionTemplate::PutDownFreeSpot,
                    },
                    None => ActionTemplate::PutDownFreeSpot,
                };
                (vec![Condition::GoalUnmet, Condition::HoldingOther(p)], action)
            }
        }
    };
    Some(LearnedRule {
        id: String::new(),
        operator_id: input.operator_id.to_string(),
        conditions,
        action,
    })
}
