//! Synchronous agent-plus-world session with response timing.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use grounded_core::agent::{Agent, Input, Output};
use grounded_core::language::{match_template, TemplateId};
use grounded_core::world::{PrimitiveAction, Scene};

use crate::instructor::{Lesson, ScriptedInstructor};

/// Replies allowed within one exchange before it is cut off.
const MAX_REPLIES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Latency {
    pub count: u64,
    pub max_ms: f64,
    pub total_ms: f64,
}

impl Latency {
    pub fn add(&mut self, ms: f64) {
        self.count += 1;
        self.total_ms += ms;
        self.max_ms = self.max_ms.max(ms);
    }

    pub fn merge(&mut self, other: &Latency) {
        self.count += other.count;
        self.total_ms += other.total_ms;
        self.max_ms = self.max_ms.max(other.max_ms);
    }

    pub fn mean_ms(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total_ms / self.count as f64
        }
    }
}

/// An agent question the instructor has to answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub segment: Option<String>,
    pub template: TemplateId,
    pub holes: BTreeMap<String, String>,
}

/// The question the agent is waiting on after `outputs`, if any.
pub fn pending_question(outputs: &[Output]) -> Option<Question> {
    outputs.iter().rev().find_map(|o| match o {
        Output::Utterance { segment, template, text } => Some((segment, template, text)),
        _ => None,
    })
    .filter(|(_, t, _)| t.expects_reply())
    .map(|(segment, template, text)| Question {
        segment: segment.clone(),
        template: *template,
        holes: match_template(*template, text).unwrap_or_default(),
    })
}

pub fn questions_in(outputs: &[Output]) -> u32 {
    outputs
        .iter()
        .filter(|o| matches!(o, Output::Utterance { template, .. } if template.expects_reply()))
        .count() as u32
}

pub fn actions_in(outputs: &[Output]) -> Vec<PrimitiveAction> {
    outputs
        .iter()
        .filter_map(|o| match o {
            Output::Action { action, .. } => Some(*action),
            _ => None,
        })
        .collect()
}

/// Result of one instructor turn and every reply it led to.
#[derive(Debug, Clone, Default)]
pub struct Exchange {
    pub outputs: Vec<Output>,
    pub instructor_utterances: u32,
    pub agent_questions: u32,
    /// The instructor had no answer, or the reply budget ran out.
    pub stalled: bool,
}

impl Exchange {
    /// Whether any of `templates` was asked.
    pub fn asked(&self, templates: &[TemplateId]) -> bool {
        self.outputs
            .iter()
            .any(|o| matches!(o, Output::Utterance { template, .. } if templates.contains(template)))
    }
}

pub struct Session {
    pub agent: Agent,
    pub world: Scene,
    pub latency: Latency,
}

impl Session {
    pub fn new(agent: Agent, world: Scene) -> Self {
        Session { agent, world, latency: Latency::default() }
    }

    /// One agent cycle, timed.
    pub fn send(&mut self, input: Input) -> Vec<Output> {
        let start = Instant::now();
        let out = self.agent.cycle(&mut self.world, input);
        self.latency.add(start.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Backs out of whatever the agent is still asking about, so the next
    /// command starts from an idle agent. Returns false if it would not let go.
    pub fn abandon(&mut self, mut last: Vec<Output>) -> bool {
        for _ in 0..MAX_REPLIES {
            if pending_question(&last).is_none() {
                return true;
            }
            last = self.send(Input::say("Never mind"));
        }
        false
    }

    /// Sends `first`, then lets the instructor answer questions until the
    /// agent stops asking.
    pub fn converse(
        &mut self,
        first: Input,
        instructor: &mut ScriptedInstructor,
        lesson: &mut Lesson,
    ) -> Exchange {
        let mut ex = Exchange::default();
        let mut out = self.send(first);
        ex.instructor_utterances += 1;
        for _ in 0..MAX_REPLIES {
            ex.agent_questions += questions_in(&out);
            let q = pending_question(&out);
            ex.outputs.append(&mut out);
            let Some(q) = q else {
                return ex;
            };
            let Some(reply) = instructor.reply(&q, &self.world, lesson) else {
                ex.stalled = true;
                return ex;
            };
            out = self.send(reply);
            ex.instructor_utterances += 1;
        }
        ex.agent_questions += questions_in(&out);
        ex.outputs.append(&mut out);
        ex.stalled = true;
        ex
    }
}
