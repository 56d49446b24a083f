//! The agent: one interaction cycle per instructor input.
//!
//! Each cycle perceives the scene, records an episode, attaches the input to
//! the interaction stack and then drives the focused segment until the agent
//! has to wait for the instructor.

mod assess;
pub mod ground;
pub mod model;
pub mod placement;
pub mod rules;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{
    categorize, next_move, AgentMove, Context, DialogEventClass, Event, EventKind,
    InteractionStack, LearningKind, Originator, Progress, Purpose, Reply, Speaker,
    TranscriptLine,
};
use crate::language::{generate, parse, Lexicon, Pos, TemplateId};
use crate::memory::{
    ArgSignature, ActionConceptNetwork, Episode, EpisodicMemory, InstructedAction, ObjectState,
    SegmentRef, SemanticMemory, Snapshot, WordCue,
};
use crate::perception::{Classifiers, FeatureNoise, ObjectFeatures, PerceptSymbol};
use crate::world::{ObjectId, PrimitiveAction, Scene};
use model::SimState;
use rules::LearnedRule;

/// Save-file format version.
pub const SAVE_VERSION: u32 = 1;

/// Moves allowed in one cycle before the agent gives up on the focused task.
const MAX_MOVES: usize = 200;

/// Verbs the agent can execute without being taught.
pub const PRIMITIVE_VERBS: &[&str] = &["pick up", "put down", "put", "point to"];

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("save file version {0} is not supported")]
    Version(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Everything the agent has learned.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Knowledge {
    pub lexicon: Lexicon,
    pub semantic: SemanticMemory,
    pub classifiers: Classifiers,
    pub rules: Vec<LearnedRule>,
    pub next_rule: u32,
}

/// Working-memory view of one object for the current cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub id: ObjectId,
    pub pose: [f64; 3],
    pub bbox: [f64; 3],
    pub graspable: bool,
    pub features: ObjectFeatures,
    pub symbols: [Option<PerceptSymbol>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub noise: FeatureNoise,
    /// Rule-selected actions per command before asking for help.
    pub max_autonomous_steps: u32,
    pub placement_samples: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { noise: FeatureNoise::default(), max_autonomous_steps: 8, placement_samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Input {
    pub text: String,
    #[serde(default)]
    pub selection: Option<ObjectId>,
}

impl Input {
    pub fn say(text: &str) -> Self {
        Input { text: text.to_string(), selection: None }
    }

    pub fn with_click(text: &str, object: ObjectId) -> Self {
        Input { text: text.to_string(), selection: Some(object) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Output {
    Utterance { segment: Option<String>, template: TemplateId, text: String },
    Action { segment: Option<String>, action: PrimitiveAction },
    Learning { segment: String, kind: LearningKind, detail: String },
}

/// Persisted agent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveFile {
    pub version: u32,
    pub lexicon: Lexicon,
    #[serde(flatten)]
    pub semantic: SemanticMemory,
    pub learned_rules: Vec<LearnedRule>,
    pub next_rule: u32,
    pub classifiers: Classifiers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_log: Option<Vec<Episode>>,
    pub rng_state: ChaCha8Rng,
    /// Open and closed segments, so a restored session continues mid-dialog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<InteractionStack>,
}

impl SaveFile {
    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let file: SaveFile = serde_json::from_str(text)?;
        if file.version != SAVE_VERSION {
            return Err(AgentError::Version(file.version));
        }
        Ok(file)
    }
}

pub struct Agent {
    pub knowledge: Knowledge,
    pub stack: InteractionStack,
    pub episodic: EpisodicMemory,
    pub transcript: Vec<TranscriptLine>,
    pub config: AgentConfig,
    rng: ChaCha8Rng,
    percepts: Vec<Percept>,
    outputs: Vec<Output>,
    pending_child: Option<Context>,
    pending_action: Option<InstructedAction>,
}

impl Agent {
    pub fn new(config: AgentConfig, seed: u64) -> Self {
        Agent {
            knowledge: Knowledge::default(),
            stack: InteractionStack::default(),
            episodic: EpisodicMemory::default(),
            transcript: Vec::new(),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            percepts: Vec::new(),
            outputs: Vec::new(),
            pending_child: None,
            pending_action: None,
        }
    }

    pub fn save(&self, with_episodes: bool) -> SaveFile {
        SaveFile {
            version: SAVE_VERSION,
            lexicon: self.knowledge.lexicon.clone(),
            semantic: self.knowledge.semantic.clone(),
            learned_rules: self.knowledge.rules.clone(),
            next_rule: self.knowledge.next_rule,
            classifiers: self.knowledge.classifiers.clone(),
            episode_log: with_episodes.then(|| self.episodic.episodes().to_vec()),
            rng_state: self.rng.clone(),
            stack: with_episodes.then(|| self.stack.clone()),
        }
    }

    pub fn from_save(file: SaveFile, config: AgentConfig) -> Self {
        let mut episodic = EpisodicMemory::default();
        for ep in file.episode_log.unwrap_or_default() {
            episodic.record(ep.snapshot);
        }
        Agent {
            knowledge: Knowledge {
                lexicon: file.lexicon,
                semantic: file.semantic,
                classifiers: file.classifiers,
                rules: file.learned_rules,
                next_rule: file.next_rule,
            },
            stack: file.stack.unwrap_or_default(),
            episodic,
            transcript: Vec::new(),
            config,
            rng: file.rng_state,
            percepts: Vec::new(),
            outputs: Vec::new(),
            pending_child: None,
            pending_action: None,
        }
    }

    pub fn percepts(&self) -> &[Percept] {
        &self.percepts
    }

    /// Drops the dialog state but keeps what has been learned.
    pub fn reset_dialog(&mut self) {
        self.stack.clear();
        self.pending_child = None;
        self.pending_action = None;
    }

    /// One interaction cycle. An empty utterance is perceived but gets no move.
    pub fn cycle(&mut self, world: &mut Scene, input: Input) -> Vec<Output> {
        self.outputs.clear();
        self.perceive(world);
        let text = input.text.trim().to_string();
        if text.is_empty() {
            return Vec::new();
        }
        let parsed = parse(&text, &self.knowledge.lexicon);
        self.record_episode(world, Some(&text), None);
        let reply = Reply { parse: parsed, selection: input.selection };
        let class = self.dispatch(reply);
        self.log_event(EventKind::Dialog {
            speaker: Speaker::Instructor,
            category: class.as_str().to_string(),
            text,
        });
        self.drive(world);
        std::mem::take(&mut self.outputs)
    }

    fn perceive(&mut self, world: &Scene) {
        let seed = self.rng.next_u64();
        self.percepts = world
            .observe(&self.config.noise, seed)
            .into_iter()
            .map(|p| Percept {
                id: p.id,
                pose: p.pose,
                bbox: p.bbox,
                graspable: p.graspable,
                symbols: Default::default(),
                features: p.features,
            })
            .collect();
        self.reclassify();
    }

    fn reclassify(&mut self) {
        for p in &mut self.percepts {
            let cls = self.knowledge.classifiers.classify_all(&p.features);
            p.symbols = cls.map(|c| c.symbol().cloned());
        }
    }

    /// Geometry changes after an action; the features are kept.
    fn refresh_geometry(&mut self, world: &Scene) {
        for p in &mut self.percepts {
            if let Some(o) = world.object(p.id) {
                p.pose = o.pose;
            }
        }
    }

    pub(crate) fn sim(&self, world: &Scene) -> SimState {
        SimState {
            workspace: world.workspace,
            objects: self
                .percepts
                .iter()
                .map(|p| model::SimObject { id: p.id, pose: p.pose, bbox: p.bbox, graspable: p.graspable })
                .collect(),
            arm: world.arm,
        }
    }

    fn record_episode(&mut self, world: &Scene, utterance: Option<&str>, action: Option<InstructedAction>) -> usize {
        let objects = self
            .percepts
            .iter()
            .map(|p| ObjectState {
                id: p.id,
                pose: p.pose,
                bbox: p.bbox,
                graspable: p.graspable,
                symbols: p.symbols.clone(),
            })
            .collect();
        let top_segment = self
            .stack
            .top()
            .map(|s| SegmentRef { id: s.id.clone(), purpose: s.purpose.to_string() });
        self.episodic.record(Snapshot {
            tick: world.tick,
            objects,
            arm: world.arm,
            top_segment,
            action,
            utterance: utterance.map(str::to_string),
        })
    }

    fn top_id(&self) -> Option<String> {
        self.stack.top().map(|s| s.id.clone())
    }

    fn log_event(&mut self, kind: EventKind) {
        let episode = self.episodic.len().saturating_sub(1);
        self.transcript.push(TranscriptLine {
            episode_index: episode,
            segment_id: self.top_id().unwrap_or_default(),
            event_variant: kind.variant().to_string(),
            payload: serde_json::to_value(&kind).unwrap_or_default(),
        });
        self.stack.record(Event { episode, kind });
    }

    fn say(&mut self, template: TemplateId, bindings: &BTreeMap<String, String>) {
        let text = generate(template, bindings).unwrap_or_else(|_| template.text().to_string());
        self.outputs.push(Output::Utterance { segment: self.top_id(), template, text: text.clone() });
        let category = serde_json::to_value(template)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        self.log_event(EventKind::Dialog { speaker: Speaker::Agent, category, text });
    }

    fn cannot(&mut self, reason: &str) {
        self.say(TemplateId::CannotDo, &BTreeMap::from([("reason".to_string(), reason.to_string())]));
    }

    pub(crate) fn learn(&mut self, kind: LearningKind, detail: String) {
        let segment = self.top_id().unwrap_or_default();
        debug_assert!(
            self.stack.top().is_some_and(|s| s.purpose.permits(kind)),
            "{kind:?} learned outside a permitting segment"
        );
        self.outputs.push(Output::Learning { segment, kind, detail: detail.clone() });
        self.log_event(EventKind::Learning { kind, detail });
    }

    /// Attaches the utterance to the stack; returns its dialog-event class.
    fn dispatch(&mut self, reply: Reply) -> DialogEventClass {
        use DialogEventClass as C;
        let class = categorize(&reply.parse, self.stack.top());
        let awaiting = self.stack.top().and_then(|s| s.context.asked);
        match class {
            C::Cancel => self.cancel(),
            C::GetNextTask | C::YesNo => {}
            C::Unparseable => self.say(TemplateId::DontUnderstand, &BTreeMap::new()),
            C::VerbCommand => {
                if awaiting == Some(TemplateId::AskNextAction) {
                    if let Some(top) = self.stack.top_mut() {
                        top.context.asked = None;
                    }
                }
                self.push_command(reply);
            }
            C::AttributeQuery | C::SpatialQuery => {
                let key = reply.parse.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
                let ctx = Context { utterance: Some(reply), ..Default::default() };
                self.stack.push(Purpose::AnswerQuery(key), Originator::Instructor, ctx);
            }
            C::DescriptiveSentence => self.push_description(reply),
            C::PropertyAnswer
                if !matches!(
                    self.stack.top().map(|s| (&s.purpose, s.context.asked)),
                    Some((Purpose::LearnWordProperty(_), Some(_)))
                ) =>
            {
                // "orange is a color" given unprompted
                match reply.parse.predicate.first().cloned() {
                    Some(word) => {
                        let ctx = Context { reply: Some(reply), ..Default::default() };
                        self.stack.push(Purpose::LearnWordProperty(word), Originator::Instructor, ctx);
                    }
                    None => self.say(TemplateId::DontUnderstand, &BTreeMap::new()),
                }
            }
            _ => match self.stack.top_mut() {
                Some(top) if top.context.asked.is_some() => {
                    top.context.asked = None;
                    top.context.reply = Some(reply);
                }
                _ => self.say(TemplateId::DontUnderstand, &BTreeMap::new()),
            },
        }
        class
    }

    fn push_command(&mut self, reply: Reply) {
        let parsed = &reply.parse;
        let Some(verb) = parsed.verb.clone() else {
            self.say(TemplateId::DontUnderstand, &BTreeMap::new());
            return;
        };
        let key = parsed.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        let start = self.episodic.len().saturating_sub(1);
        let mut ctx = Context { start_episode: Some(start), ..Default::default() };
        let purpose = if PRIMITIVE_VERBS.contains(&verb.as_str()) {
            Purpose::ExecuteCommand(key)
        } else {
            let sig = ArgSignature {
                has_direct_object: parsed.direct_object.is_some(),
                prep: parsed.preps.first().map(|p| p.prep.clone()),
            };
            let semantic = &mut self.knowledge.semantic;
            match semantic.retrieve_network(&verb, &sig) {
                Some(net) => {
                    ctx.operator_id = Some(net.operator_id.clone());
                    if net.goal.is_some() {
                        Purpose::ExecuteCommand(key)
                    } else {
                        Purpose::LearnVerb(verb)
                    }
                }
                None => {
                    let op = semantic.new_operator_id();
                    semantic.store_network(ActionConceptNetwork::new(&verb, sig, op.clone()));
                    let _ = self.knowledge.lexicon.register_word(&verb, Pos::Verb);
                    ctx.operator_id = Some(op);
                    Purpose::LearnVerb(verb)
                }
            }
        };
        ctx.utterance = Some(reply);
        self.stack.push(purpose, Originator::Instructor, ctx);
    }

    fn push_description(&mut self, reply: Reply) {
        let parsed = &reply.parse;
        let purpose = if let Some(pp) = parsed.preps.first() {
            Purpose::LearnPrep(pp.prep.clone())
        } else if parsed.predicate.len() == 1 && !self.has_word(&parsed.predicate[0]) {
            Purpose::LearnWordProperty(parsed.predicate[0].clone())
        } else if !parsed.predicate.is_empty() {
            Purpose::TeachWordExamples(parsed.predicate.join(" "))
        } else {
            self.say(TemplateId::DontUnderstand, &BTreeMap::new());
            return;
        };
        let ctx = Context { utterance: Some(reply), ..Default::default() };
        self.stack.push(purpose, Originator::Instructor, ctx);
    }

    pub(crate) fn has_word(&self, word: &str) -> bool {
        self.knowledge.semantic.peek_word(&WordCue { word: Some(word), ..Default::default() }).is_some()
    }

    /// "Never mind": drop the topmost agent-initiated segment and all above it.
    fn cancel(&mut self) {
        let keep = match self.stack.topmost_agent_segment() {
            Some(i) => i,
            None => self.stack.len().saturating_sub(1),
        };
        while self.stack.len() > keep {
            let _ = self.stack.abandon_top();
        }
    }

    fn drive(&mut self, world: &mut Scene) {
        for _ in 0..MAX_MOVES {
            let purpose = self.stack.top().map(|s| s.purpose.clone());
            let progress = match purpose {
                Some(_) => self.assess(world),
                None => Progress::Waiting,
            };
            match next_move(purpose.as_ref(), &progress) {
                AgentMove::Utterance { template, bindings } => {
                    if let Some(top) = self.stack.top_mut() {
                        top.context.asked = Some(template);
                    }
                    self.say(template, &bindings);
                    return;
                }
                AgentMove::InternalGoal { purpose } => {
                    let ctx = self.pending_child.take().unwrap_or_default();
                    self.stack.push(purpose, Originator::Agent, ctx);
                }
                AgentMove::ExternalAction { action } => {
                    if let Err(e) = self.execute(world, action) {
                        self.cannot(&e.to_string());
                        let _ = self.stack.abandon_top();
                    }
                }
                AgentMove::Answer { template, bindings } => {
                    self.say(template, &bindings);
                    self.complete();
                }
                AgentMove::Complete => self.complete(),
                AgentMove::Fail { reason } => {
                    self.cannot(&reason);
                    let _ = self.stack.abandon_top();
                }
                AgentMove::Abandon => {
                    let _ = self.stack.abandon_top();
                }
                AgentMove::Wait => return,
            }
            self.pending_child = None;
        }
        self.cannot("I am going in circles");
        self.stack.clear();
    }

    fn complete(&mut self) {
        let _ = self.stack.mark_achieved();
        let Ok(seg) = self.stack.pop_achieved() else {
            return;
        };
        if let (Purpose::ResolveReference(_), Some(result), Some(np)) =
            (&seg.purpose, seg.context.result, &seg.context.np)
        {
            if let Some(parent) = self.stack.top_mut() {
                parent.context.bindings.insert(np.render(), result);
            }
        }
    }

    fn execute(&mut self, world: &mut Scene, action: PrimitiveAction) -> Result<(), crate::world::WorldError> {
        let arm_before = world.arm;
        let info = self.pending_action.take();
        *world = world.apply_action(&action)?;
        self.refresh_geometry(world);
        let info = info.filter(|i| i.action == action).unwrap_or(InstructedAction {
            action,
            instructed: false,
            object: None,
            target: None,
            arm_before,
        });
        self.record_episode(world, None, Some(info));
        if let Some(top) = self.stack.top_mut() {
            top.context.steps += 1;
        }
        self.outputs.push(Output::Action { segment: self.top_id(), action });
        self.log_event(EventKind::Action { action });
        Ok(())
    }

    pub(crate) fn train(&mut self, object: ObjectId, symbol: &PerceptSymbol) -> bool {
        let Some(p) = self.percepts.iter().find(|p| p.id == object) else {
            return false;
        };
        let features = p.features.clone();
        if self.knowledge.classifiers.train(&features, symbol).is_err() {
            return false;
        }
        self.reclassify();
        true
    }

    /// Words that name the object's current percept symbols.
    pub fn describe(&self, object: ObjectId) -> Vec<String> {
        let Some(p) = self.percepts.iter().find(|p| p.id == object) else {
            return Vec::new();
        };
        p.symbols
            .iter()
            .flatten()
            .filter_map(|s| {
                self.knowledge
                    .semantic
                    .peek_word(&WordCue { symbol: Some(s), ..Default::default() })
                    .map(|m| m.word.clone())
            })
            .collect()
    }
}
