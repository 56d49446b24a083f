//! Combined curve: a fresh agent receives commands over nine words, three
//! prepositions and three verbs, and learns whatever each one needs.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grounded_core::agent::{Agent, Input};
use grounded_core::perception::PropertyKind;
use grounded_core::world::{EntityId, LocationName, ObjectId, Scene};

use crate::config::HarnessConfig;
use crate::fixtures::{combined_palette, combined_scene};
use crate::instructor::ScriptedInstructor;
use crate::report::{CommandStats, GroupRun};
use crate::session::{Latency, Session};
use crate::verbs::VerbTemplate;

/// Commands in one combined run before it may stop.
pub const COMMANDS: usize = 20;
/// Trailing one-utterance commands that end a run.
const SETTLED: usize = 3;

fn settled(commands: &[CommandStats]) -> bool {
    commands.len() >= SETTLED && commands[commands.len() - SETTLED..].iter().all(|c| c.instructor_utterances == 1)
}

#[derive(Debug, Clone, PartialEq)]
struct Command {
    template: VerbTemplate,
    primary: ObjectId,
    reference: EntityId,
}

impl Command {
    fn prep(&self) -> &'static str {
        match self.template {
            VerbTemplate::MoveLeftOf => "left of",
            VerbTemplate::MoveRightOf => "right of",
            _ => "in",
        }
    }

    fn text(&self, instructor: &ScriptedInstructor, scene: &Scene) -> String {
        let x = instructor.describe(scene, self.primary);
        match self.template {
            VerbTemplate::Store => format!("Store {x}"),
            VerbTemplate::Discard => format!("Discard {x}"),
            _ => format!("Move {x} {} {}", self.prep(), instructor.describe_entity(scene, self.reference)),
        }
    }

    fn goal(&self) -> crate::instructor::Goal {
        crate::instructor::Goal { primary: self.primary, prep: self.prep().into(), reference: self.reference }
    }
}

fn random_command(scene: &Scene, rng: &mut ChaCha8Rng) -> Command {
    let ids: Vec<ObjectId> = scene.objects.iter().map(|o| o.id).collect();
    let template = *VerbTemplate::ALL.choose(rng).expect("non-empty");
    let primary = *ids.choose(rng).expect("objects");
    let reference = match template {
        VerbTemplate::Store => EntityId::Location(LocationName::Pantry),
        VerbTemplate::Discard => EntityId::Location(LocationName::Garbage),
        VerbTemplate::MoveIn => EntityId::Location(*LocationName::ALL.choose(rng).expect("non-empty")),
        _ => {
            let mut options: Vec<EntityId> =
                ids.iter().filter(|i| **i != primary).map(|i| EntityId::Object(*i)).collect();
            options.extend(LocationName::ALL.map(EntityId::Location));
            *options.choose(rng).expect("non-empty")
        }
    };
    Command { template, primary, reference }
}

pub struct CombinedRun {
    pub group: GroupRun,
    pub commands: Vec<CommandStats>,
    pub notes: Vec<String>,
}

/// Runs at least [`COMMANDS`] commands, then keeps going until the last three
/// each took a single instructor utterance or the command cap is reached.
///
/// The first command names two objects that share no word, so a fresh agent
/// meets six unknown words, an unknown verb and an untaught preposition at once.
pub fn run(cfg: &HarnessConfig, seed: u64, latency: &mut Latency) -> CombinedRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette = combined_palette();
    let mut instructor = ScriptedInstructor::new(
        &palette,
        vec![PropertyKind::Size, PropertyKind::Color, PropertyKind::Shape],
        cfg.injection_rate,
        seed,
    );
    let mut s = Session::new(Agent::new(cfg.agent.clone(), seed), combined_scene());
    let mut group = GroupRun::default();
    let mut commands = Vec::new();
    let mut notes = Vec::new();
    let mut reached = 0u32;
    for i in 0..cfg.combined_command_cap {
        if i >= COMMANDS && settled(&commands) {
            break;
        }
        s.world = combined_scene();
        let cmd = if i == 0 {
            Command {
                template: VerbTemplate::MoveRightOf,
                primary: ObjectId(1),
                reference: EntityId::Object(ObjectId(2)),
            }
        } else {
            random_command(&s.world, &mut rng)
        };
        let text = cmd.text(&instructor, &s.world);
        let goal = cmd.goal();
        let mut lesson = instructor.lesson(goal.clone());
        let ex = s.converse(Input::say(&text), &mut instructor, &mut lesson);
        if ex.stalled {
            notes.push(format!("command {i} ({text}) stalled"));
            if !s.abandon(ex.outputs.clone()) {
                notes.push(format!("agent kept asking after command {i}"));
            }
        }
        let ok = goal.holds(&s.world);
        reached += u32::from(ok);
        let stats = group.concept(cmd.template.name());
        if ok {
            stats.passed += 1;
        } else {
            stats.failed += 1;
        }
        if ex.agent_questions > 0 {
            stats.examples += 1;
        }
        commands.push(CommandStats {
            command: text,
            agent_initiated: ex.agent_questions,
            instructor_utterances: ex.instructor_utterances,
            goal_reached: ok,
        });
    }
    group.trials = 1;
    group.final_accuracy = f64::from(reached) / commands.len().max(1) as f64;
    group.converged = settled(&commands);
    latency.merge(&s.latency);
    CombinedRun { group, commands, notes }
}
