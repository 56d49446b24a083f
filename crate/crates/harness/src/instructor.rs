//! The scripted instructor: answers agent questions from ground truth.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use grounded_core::agent::Input;
use grounded_core::language::TemplateId;
use grounded_core::perception::PropertyKind;
use grounded_core::world::{ArmState, EntityId, LocationName, ObjectId, Palette, Scene};

use crate::fixtures::vocabulary;
use crate::oracle::holds_in;
use crate::session::Question;

/// Goal of the command currently being taught.
#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub primary: ObjectId,
    pub prep: String,
    pub reference: EntityId,
}

impl Goal {
    pub fn holds(&self, scene: &Scene) -> bool {
        scene.arm.held() != Some(self.primary)
            && holds_in(scene, &self.prep, EntityId::Object(self.primary), self.reference)
                .unwrap_or(false)
    }
}

/// Per-command teaching state.
#[derive(Debug, Clone, Default)]
pub struct Lesson {
    pub goal: Option<Goal>,
    /// Insert one superfluous pointing action when asked for the next step.
    pub inject: bool,
    pub injected: u32,
    /// Steps given in reply to "what action should I take next".
    pub steps_given: u32,
}

impl Lesson {
    pub fn for_goal(goal: Goal) -> Self {
        Lesson { goal: Some(goal), ..Lesson::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedInstructor {
    words: BTreeMap<String, PropertyKind>,
    /// Properties named when describing an object, in surface order.
    pub describe_with: Vec<PropertyKind>,
    /// Chance that a verb teaching script gets a superfluous action.
    pub injection_rate: f64,
    rng: ChaCha8Rng,
}

impl ScriptedInstructor {
    pub fn new(palette: &Palette, describe_with: Vec<PropertyKind>, injection_rate: f64, seed: u64) -> Self {
        ScriptedInstructor {
            words: vocabulary(palette).into_iter().collect(),
            describe_with,
            injection_rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn property_of(&self, word: &str) -> Option<PropertyKind> {
        self.words.get(word).copied()
    }

    /// Lesson for a verb command, deciding on superfluous-action injection.
    pub fn lesson(&mut self, goal: Goal) -> Lesson {
        let inject = self.rng.random_bool(self.injection_rate.clamp(0.0, 1.0));
        Lesson { inject, ..Lesson::for_goal(goal) }
    }

    /// Ground-truth word for one property of an object.
    pub fn label(&self, scene: &Scene, id: ObjectId, kind: PropertyKind) -> Option<String> {
        let t = scene.truth.get(&id)?;
        Some(match kind {
            PropertyKind::Color => t.color.clone(),
            PropertyKind::Size => t.size.clone(),
            PropertyKind::Shape => t.shape.clone(),
        })
    }

    /// "the large red block", or "the large red triangle" when shape is named.
    pub fn describe(&self, scene: &Scene, id: ObjectId) -> String {
        let mut words = Vec::new();
        let order = [PropertyKind::Size, PropertyKind::Color, PropertyKind::Shape];
        for kind in order.into_iter().filter(|k| self.describe_with.contains(k)) {
            if let Some(w) = self.label(scene, id, kind) {
                words.push(w);
            }
        }
        if !self.describe_with.contains(&PropertyKind::Shape) {
            words.push("block".into());
        }
        format!("the {}", words.join(" "))
    }

    pub fn describe_entity(&self, scene: &Scene, entity: EntityId) -> String {
        match entity {
            EntityId::Object(id) => self.describe(scene, id),
            EntityId::Location(l) => format!("the {l}"),
        }
    }

    /// Objects whose labels include every content word of `np`.
    fn matching(&self, scene: &Scene, np: &str) -> Vec<ObjectId> {
        let wanted: Vec<&str> = np.split_whitespace().filter(|w| self.words.contains_key(*w)).collect();
        scene
            .truth
            .iter()
            .filter(|(_, t)| wanted.iter().all(|w| [&t.color, &t.size, &t.shape].iter().any(|l| l == w)))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Next demonstration step towards the lesson goal.
    fn next_step(&mut self, scene: &Scene, lesson: &mut Lesson) -> Option<String> {
        let goal = lesson.goal.clone()?;
        if lesson.inject && lesson.injected == 0 {
            let others: Vec<ObjectId> = scene
                .objects
                .iter()
                .map(|o| o.id)
                .filter(|id| *id != goal.primary && scene.arm.held() != Some(*id))
                .collect();
            if let Some(&z) = others.choose(&mut self.rng) {
                lesson.injected += 1;
                return Some(format!("Point to {}", self.describe(scene, z)));
            }
        }
        let step = match scene.arm {
            ArmState::Holding(h) if h == goal.primary => format!(
                "Put {} {} {}",
                self.describe(scene, h),
                goal.prep,
                self.describe_entity(scene, goal.reference)
            ),
            ArmState::Holding(h) => format!("Put down {}", self.describe(scene, h)),
            ArmState::Empty => format!("Pick up {}", self.describe(scene, goal.primary)),
        };
        Some(step)
    }

    /// A true instance of `prep` in the scene, phrased as a teaching sentence.
    pub fn prep_example(&self, scene: &Scene, prep: &str) -> Option<Input> {
        let ids: Vec<ObjectId> = scene.objects.iter().map(|o| o.id).collect();
        if prep == "in" {
            for &id in &ids {
                for l in LocationName::ALL {
                    if holds_in(scene, prep, EntityId::Object(id), EntityId::Location(l)) == Some(true) {
                        return Some(Input::with_click(&format!("This is in the {l}"), id));
                    }
                }
            }
            return None;
        }
        for &a in &ids {
            for &b in &ids {
                if holds_in(scene, prep, EntityId::Object(a), EntityId::Object(b)) == Some(true) {
                    let text = format!("This is {prep} {}", self.describe(scene, b));
                    return Some(Input::with_click(&text, a));
                }
            }
        }
        None
    }

    /// Reply to an agent question, or `None` when the script has no answer.
    pub fn reply(&mut self, q: &Question, scene: &Scene, lesson: &mut Lesson) -> Option<Input> {
        let hole = |name: &str| q.holes.get(name).map(String::as_str).unwrap_or("");
        match q.template {
            TemplateId::AskProperty => {
                let kind = self.property_of(hole("word"))?;
                let mut s = kind.as_str().to_string();
                s[..1].make_ascii_uppercase();
                Some(Input::say(&s))
            }
            TemplateId::AskGoal => {
                let g = lesson.goal.clone()?;
                Some(Input::say(&format!(
                    "The goal is {} {} {}",
                    self.describe(scene, g.primary),
                    g.prep,
                    self.describe_entity(scene, g.reference)
                )))
            }
            TemplateId::AskNextAction => {
                let step = self.next_step(scene, lesson)?;
                lesson.steps_given += 1;
                Some(Input::say(&step))
            }
            TemplateId::AskPrepExample => self.prep_example(scene, hole("prep")),
            TemplateId::AskWordExample => {
                let word = hole("word");
                let kind = self.property_of(word)?;
                let id = scene
                    .objects
                    .iter()
                    .map(|o| o.id)
                    .find(|id| self.label(scene, *id, kind).as_deref() == Some(word))?;
                Some(Input::with_click(&format!("This is {word}"), id))
            }
            TemplateId::AskWhich | TemplateId::AskFind => {
                let candidates = self.matching(scene, hole("np"));
                let preferred = lesson.goal.as_ref().and_then(|g| {
                    let mut mentioned = vec![g.primary];
                    if let EntityId::Object(r) = g.reference {
                        mentioned.push(r);
                    }
                    mentioned.into_iter().find(|id| candidates.contains(id))
                });
                let id = preferred.or_else(|| candidates.first().copied())?;
                Some(Input::with_click("This one", id))
            }
            _ => None,
        }
    }
}
