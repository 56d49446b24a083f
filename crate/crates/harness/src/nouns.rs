//! Noun and adjective protocol: one example space per property.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grounded_core::agent::{Agent, Input, Output};
use grounded_core::language::TemplateId;
use grounded_core::perception::PropertyKind;
use grounded_core::world::{ObjectId, WorldError};

use crate::config::HarnessConfig;
use crate::fixtures::random_scene;
use crate::instructor::{Lesson, ScriptedInstructor};
use crate::report::GroupRun;
use crate::session::Session;

/// The agent's answer to "What PROPERTY is this?", if it named a word.
fn answered_word(out: &[Output]) -> Option<&str> {
    out.iter().find_map(|o| match o {
        Output::Utterance { template: TemplateId::Answer, text, .. } => Some(text.as_str()),
        _ => None,
    })
}

fn question(kind: PropertyKind) -> String {
    format!("What {} is this?", kind.as_str())
}

/// Interleaved test-and-teach trials for one property, then an evaluation pass
/// that reports the share of objects the agent associates with the right word.
pub fn run_property(
    kind: PropertyKind,
    cfg: &HarnessConfig,
    seed: u64,
    session_latency: &mut crate::session::Latency,
) -> Result<GroupRun, WorldError> {
    let palette = &cfg.palette;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = random_scene(palette, cfg.noun_objects, &mut rng)?;
    let mut instructor = ScriptedInstructor::new(palette, vec![kind], 0.0, seed);
    let mut s = Session::new(Agent::new(cfg.agent.clone(), seed), scene);
    let ids: Vec<ObjectId> = s.world.objects.iter().map(|o| o.id).collect();
    let mut group = GroupRun::default();
    let mut perfect_streak = 0;
    while group.trials < cfg.trial_cap {
        group.trials += 1;
        let mut order = ids.clone();
        order.shuffle(&mut rng);
        let mut perfect = true;
        for id in order {
            let truth = instructor.label(&s.world, id, kind).expect("generated objects are labelled");
            let out = s.send(Input::with_click(&question(kind), id));
            let stats = group.concept(&truth);
            if answered_word(&out) == Some(truth.as_str()) {
                stats.passed += 1;
                continue;
            }
            stats.failed += 1;
            stats.examples += 1;
            perfect = false;
            let ex = s.converse(
                Input::with_click(&format!("This is {truth}"), id),
                &mut instructor,
                &mut Lesson::default(),
            );
            debug_assert!(!ex.stalled);
        }
        perfect_streak = if perfect { perfect_streak + 1 } else { 0 };
        if perfect_streak == 2 {
            group.converged = true;
            break;
        }
    }
    // an object counts as associated when most of its re-observations are named correctly
    let mut associated = 0usize;
    for &id in &ids {
        let truth = instructor.label(&s.world, id, kind).expect("labelled");
        let mut hits = 0u32;
        for _ in 0..cfg.noun_eval_repeats {
            let out = s.send(Input::with_click(&question(kind), id));
            hits += u32::from(answered_word(&out) == Some(truth.as_str()));
        }
        if 2 * hits > cfg.noun_eval_repeats {
            associated += 1;
        }
    }
    group.final_accuracy = if ids.is_empty() { 1.0 } else { associated as f64 / ids.len() as f64 };
    session_latency.merge(&s.latency);
    Ok(group)
}
