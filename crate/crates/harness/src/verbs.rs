//! Verb protocol: five command templates taught by demonstration.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use grounded_core::agent::{Agent, Input};
use grounded_core::language::TemplateId;
use grounded_core::perception::PropertyKind;
use grounded_core::world::{EntityId, LocationName, ObjectId, PrimitiveAction, Scene};

use crate::config::HarnessConfig;
use crate::fixtures::{preposition_lesson_scene, standard_palette, verb_scene};
use crate::instructor::{Goal, Lesson, ScriptedInstructor};
use crate::report::{GroupRun, VerbChecks};
use crate::session::{actions_in, Latency, Session};

/// The object the arm may be holding when a command arrives.
pub const HELD: ObjectId = ObjectId(1);
/// Objects commands are about.
pub const PRIMARIES: [ObjectId; 4] = [ObjectId(2), ObjectId(3), ObjectId(4), ObjectId(5)];
/// Objects that may serve as references.
pub const REFERENCES: [ObjectId; 5] = [ObjectId(2), ObjectId(3), ObjectId(4), ObjectId(5), ObjectId(6)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerbTemplate {
    MoveIn,
    MoveLeftOf,
    MoveRightOf,
    Store,
    Discard,
}

impl VerbTemplate {
    pub const ALL: [VerbTemplate; 5] = [
        VerbTemplate::MoveIn,
        VerbTemplate::MoveLeftOf,
        VerbTemplate::MoveRightOf,
        VerbTemplate::Store,
        VerbTemplate::Discard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VerbTemplate::MoveIn => "move X in L",
            VerbTemplate::MoveLeftOf => "move X left of Y",
            VerbTemplate::MoveRightOf => "move X right of Y",
            VerbTemplate::Store => "store X",
            VerbTemplate::Discard => "discard X",
        }
    }

    fn prep(self) -> &'static str {
        match self {
            VerbTemplate::MoveLeftOf => "left of",
            VerbTemplate::MoveRightOf => "right of",
            _ => "in",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub template: VerbTemplate,
    pub primary: ObjectId,
    pub reference: EntityId,
    /// Whether the arm starts out holding [`HELD`].
    pub holding: bool,
}

impl Instance {
    pub fn random<R: Rng>(template: VerbTemplate, rng: &mut R) -> Self {
        let primary = *PRIMARIES.choose(rng).expect("non-empty");
        let location = EntityId::Location(*LocationName::ALL.choose(rng).expect("non-empty"));
        let reference = match template {
            VerbTemplate::Store => EntityId::Location(LocationName::Pantry),
            VerbTemplate::Discard => EntityId::Location(LocationName::Garbage),
            VerbTemplate::MoveIn => location,
            VerbTemplate::MoveLeftOf | VerbTemplate::MoveRightOf => {
                let mut options: Vec<EntityId> = REFERENCES
                    .iter()
                    .filter(|r| **r != primary)
                    .map(|r| EntityId::Object(*r))
                    .collect();
                options.extend(LocationName::ALL.map(EntityId::Location));
                *options.choose(rng).expect("non-empty")
            }
        };
        Instance { template, primary, reference, holding: rng.random_bool(0.5) }
    }

    pub fn goal(&self) -> Goal {
        Goal { primary: self.primary, prep: self.template.prep().into(), reference: self.reference }
    }

    pub fn scene(&self) -> Scene {
        let scene = verb_scene();
        if self.holding {
            scene.apply_action(&PrimitiveAction::PickUp { object: HELD }).expect("held object is graspable")
        } else {
            scene
        }
    }

    pub fn command(&self, instructor: &ScriptedInstructor, scene: &Scene) -> String {
        let x = instructor.describe(scene, self.primary);
        match self.template {
            VerbTemplate::Store => format!("Store {x}"),
            VerbTemplate::Discard => format!("Discard {x}"),
            t => format!("Move {x} {} {}", t.prep(), instructor.describe_entity(scene, self.reference)),
        }
    }
}

/// Every "move X right of Y" instantiation: four objects to move, eight
/// references (the four other blocks and the four locations), two arm states.
pub fn right_of_sweep() -> Vec<Instance> {
    let mut out = Vec::new();
    for primary in PRIMARIES {
        let refs = REFERENCES
            .iter()
            .filter(|r| **r != primary)
            .map(|r| EntityId::Object(*r))
            .chain(LocationName::ALL.map(EntityId::Location));
        for reference in refs {
            for holding in [false, true] {
                out.push(Instance { template: VerbTemplate::MoveRightOf, primary, reference, holding });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Arm {
    Empty,
    Other,
    Primary,
}

/// Fewest primitive actions that reach the goal, by breadth-first search
/// over (arm, goal satisfied) states.
pub fn minimal_plan_length(holding_other: bool, satisfied: bool) -> usize {
    let start = (if holding_other { Arm::Other } else { Arm::Empty }, satisfied);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([(start, 0)]);
    while let Some(((arm, sat), d)) = queue.pop_front() {
        if sat && arm != Arm::Primary {
            return d;
        }
        let next: Vec<(Arm, bool)> = match arm {
            Arm::Empty => vec![(Arm::Primary, false), (Arm::Other, sat)],
            Arm::Other => vec![(Arm::Empty, sat)],
            // put the primary at the goal, or anywhere else
            Arm::Primary => vec![(Arm::Empty, true), (Arm::Empty, false)],
        };
        for n in next {
            if seen.insert(n) {
                queue.push_back((n, d + 1));
            }
        }
    }
    unreachable!("the goal is always reachable in the abstract model")
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    /// Completed with no question and the goal true afterwards.
    pub correct: bool,
    /// The agent had to be taught goal or actions.
    pub taught: bool,
    pub actions: Vec<PrimitiveAction>,
    pub injected: u32,
}

pub fn attempt(s: &mut Session, instructor: &mut ScriptedInstructor, inst: &Instance) -> Attempt {
    s.world = inst.scene();
    let goal = inst.goal();
    let mut lesson = instructor.lesson(goal.clone());
    let command = inst.command(instructor, &s.world);
    let ex = s.converse(Input::say(&command), instructor, &mut lesson);
    Attempt {
        correct: ex.agent_questions == 0 && !ex.stalled && goal.holds(&s.world) && s.world.check_invariants().is_ok(),
        taught: ex.asked(&[TemplateId::AskGoal, TemplateId::AskNextAction]),
        actions: actions_in(&ex.outputs),
        injected: lesson.injected,
    }
}

/// Teaches the block words and the three prepositions before any verb.
pub fn pre_teach(s: &mut Session, instructor: &mut ScriptedInstructor) {
    s.world = verb_scene();
    let words = [
        ("red", ObjectId(2)),
        ("blue", ObjectId(3)),
        ("green", ObjectId(4)),
        ("yellow", ObjectId(1)),
        ("large", ObjectId(2)),
        ("small", ObjectId(3)),
    ];
    for (w, id) in words {
        s.converse(Input::with_click(&format!("This is {w}"), id), instructor, &mut Lesson::default());
    }
    s.world = preposition_lesson_scene();
    for prep in ["in", "left of", "right of"] {
        let example = instructor.prep_example(&s.world, prep).expect("lesson scene has every relation");
        s.converse(example, instructor, &mut Lesson::default());
    }
}

fn is_pointing(a: &PrimitiveAction) -> bool {
    matches!(a, PrimitiveAction::PointTo { .. })
}

pub struct VerbRun {
    pub group: GroupRun,
    pub checks: VerbChecks,
}

pub fn run(cfg: &HarnessConfig, seed: u64, latency: &mut Latency) -> VerbRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instructor = ScriptedInstructor::new(
        &standard_palette(),
        vec![PropertyKind::Size, PropertyKind::Color],
        cfg.injection_rate,
        seed,
    );
    let mut s = Session::new(Agent::new(cfg.agent.clone(), seed), verb_scene());
    pre_teach(&mut s, &mut instructor);

    let mut group = GroupRun::default();
    let mut checks = VerbChecks::default();
    let mut streak = 0;
    while group.trials < cfg.trial_cap {
        group.trials += 1;
        let mut order: Vec<Instance> = VerbTemplate::ALL
            .iter()
            .flat_map(|t| std::iter::repeat_n(*t, cfg.verb_instances_per_trial))
            .map(|t| Instance::random(t, &mut rng))
            .collect();
        order.shuffle(&mut rng);
        let mut perfect = true;
        for inst in order {
            let a = attempt(&mut s, &mut instructor, &inst);
            checks.injected_actions += a.injected;
            let stats = group.concept(inst.template.name());
            if a.correct {
                stats.passed += 1;
                if a.actions.iter().any(is_pointing) {
                    checks.superfluous_executed += 1;
                }
            } else {
                stats.failed += 1;
                perfect = false;
            }
            if a.taught {
                stats.examples += 1;
            }
        }
        streak = if perfect { streak + 1 } else { 0 };
        if streak == 2 {
            group.converged = true;
            break;
        }
    }
    checks.right_of_examples = group.examples_of(VerbTemplate::MoveRightOf.name());

    // fresh instantiations of every template
    for t in VerbTemplate::ALL {
        for _ in 0..cfg.verb_test_instances {
            let inst = Instance::random(t, &mut rng);
            let a = attempt(&mut s, &mut instructor, &inst);
            checks.test_total += 1;
            if a.correct && !a.actions.iter().any(is_pointing) {
                checks.test_passed += 1;
            }
        }
    }
    group.final_accuracy = f64::from(checks.test_passed) / f64::from(checks.test_total.max(1));

    for inst in right_of_sweep() {
        let before = inst.scene();
        let satisfied = inst.goal().holds(&before);
        let a = attempt(&mut s, &mut instructor, &inst);
        checks.sweep_total += 1;
        let minimal = minimal_plan_length(inst.holding, satisfied);
        if a.correct && a.actions.len() == minimal && !a.actions.iter().any(is_pointing) {
            checks.sweep_passed += 1;
        }
    }

    checks.rules_with_pointing = s
        .agent
        .knowledge
        .rules
        .iter()
        .filter(|r| serde_json::to_string(&r.action).is_ok_and(|j| j.contains("point")))
        .count() as u32;
    latency.merge(&s.latency);
    VerbRun { group, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use grounded_core::world::ArmState;

    #[test]
    fn sweep_has_sixty_four_distinct_cases() {
        let sweep = right_of_sweep();
        assert_eq!(sweep.len(), 64);
        for (i, a) in sweep.iter().enumerate() {
            assert!(sweep[i + 1..].iter().all(|b| b != a));
            assert_ne!(EntityId::Object(a.primary), a.reference);
        }
    }

    #[test]
    fn plan_lengths() {
        assert_eq!(minimal_plan_length(false, false), 2);
        assert_eq!(minimal_plan_length(true, false), 3);
        assert_eq!(minimal_plan_length(false, true), 0);
        assert_eq!(minimal_plan_length(true, true), 0);
    }

    #[test]
    fn instance_scenes_respect_the_arm_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in VerbTemplate::ALL {
            let i = Instance::random(t, &mut rng);
            let s = i.scene();
            assert_eq!(s.arm == ArmState::Holding(HELD), i.holding);
            assert!(!i.goal().holds(&s));
        }
    }
}
