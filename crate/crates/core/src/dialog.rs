//! Events, purpose-bearing segments, the interaction stack and the policy
//! that maps the focused segment's progress to the agent's next move.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::language::{Category, NounPhrase, ParseResult, TemplateId};
use crate::world::{EntityId, ObjectId, PrimitiveAction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DialogError {
    #[error("segment {0} is not achieved")]
    PopUnachieved(String),
    #[error("interaction stack is empty")]
    EmptyStack,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "purpose", content = "key", rename_all = "kebab-case")]
pub enum Purpose {
    LearnVerb(String),
    LearnWordProperty(String),
    TeachWordExamples(String),
    LearnPrep(String),
    AcquireGoal(String),
    AcquireActions(String),
    ResolveReference(String),
    ExecuteCommand(String),
    AnswerQuery(String),
    Idle,
}

impl Purpose {
    /// Letter used in segment ids.
    pub fn prefix(&self) -> char {
        match self {
            Purpose::LearnVerb(_) | Purpose::AcquireActions(_) => 'A',
            Purpose::LearnWordProperty(_) | Purpose::TeachWordExamples(_) => 'O',
            Purpose::LearnPrep(_) => 'P',
            Purpose::AcquireGoal(_) => 'G',
            Purpose::ResolveReference(_) => 'R',
            Purpose::ExecuteCommand(_) => 'E',
            Purpose::AnswerQuery(_) => 'Q',
            Purpose::Idle => 'I',
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Purpose::LearnVerb(_) => "learn-verb",
            Purpose::LearnWordProperty(_) => "learn-word-property",
            Purpose::TeachWordExamples(_) => "teach-word-examples",
            Purpose::LearnPrep(_) => "learn-prep",
            Purpose::AcquireGoal(_) => "acquire-goal",
            Purpose::AcquireActions(_) => "acquire-actions",
            Purpose::ResolveReference(_) => "resolve-reference",
            Purpose::ExecuteCommand(_) => "execute-command",
            Purpose::AnswerQuery(_) => "answer-query",
            Purpose::Idle => "idle",
        }
    }

    pub fn key(&self) -> &str {
        match self {
            Purpose::LearnVerb(k)
            | Purpose::LearnWordProperty(k)
            | Purpose::TeachWordExamples(k)
            | Purpose::LearnPrep(k)
            | Purpose::AcquireGoal(k)
            | Purpose::AcquireActions(k)
            | Purpose::ResolveReference(k)
            | Purpose::ExecuteCommand(k)
            | Purpose::AnswerQuery(k) => k,
            Purpose::Idle => "",
        }
    }

    /// Learning kinds a segment with this purpose may produce.
    pub fn permits(&self, kind: LearningKind) -> bool {
        use LearningKind::*;
        match self {
            Purpose::LearnWordProperty(_) => matches!(kind, WordMap | PerceptTrain),
            Purpose::TeachWordExamples(_) | Purpose::ResolveReference(_) => kind == PerceptTrain,
            Purpose::LearnPrep(_) => kind == PrepLearn,
            Purpose::AcquireGoal(_) => kind == GoalLearn,
            Purpose::AcquireActions(_) => kind == RuleLearn,
            _ => false,
        }
    }

    /// Commands and the learning that serves them; "never mind" cascades
    /// through these.
    pub fn is_task(&self) -> bool {
        matches!(
            self,
            Purpose::LearnVerb(_)
                | Purpose::ExecuteCommand(_)
                | Purpose::AcquireGoal(_)
                | Purpose::AcquireActions(_)
        )
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Purpose::Idle => f.write_str("idle"),
            p => write!(f, "{}({})", p.name(), p.key()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Originator {
    Agent,
    Instructor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Achieved,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningKind {
    WordMap,
    PerceptTrain,
    PrepLearn,
    GoalLearn,
    RuleLearn,
}

impl LearningKind {
    pub const ALL: [LearningKind; 5] = [
        LearningKind::WordMap,
        LearningKind::PerceptTrain,
        LearningKind::PrepLearn,
        LearningKind::GoalLearn,
        LearningKind::RuleLearn,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Instructor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    Action { action: PrimitiveAction },
    Dialog { speaker: Speaker, category: String, text: String },
    Learning { kind: LearningKind, detail: String },
}

impl EventKind {
    pub fn variant(&self) -> &'static str {
        match self {
            EventKind::Action { .. } => "action",
            EventKind::Dialog { .. } => "dialog",
            EventKind::Learning { .. } => "learning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub episode: usize,
    pub kind: EventKind,
}

/// Instructor reply waiting to be consumed by a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub parse: ParseResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<ObjectId>,
}

/// Working bindings a segment keeps while pursuing its purpose.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Context {
    /// Utterance that opened the segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<Reply>,
    /// Reply received but not yet processed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<Reply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asked: Option<TemplateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_id: Option<String>,
    /// Rendered noun phrase to grounded entity.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub np: Option<NounPhrase>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<ObjectId>,
    /// Words already handled by a multi-word teaching segment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub done: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_episode: Option<usize>,
    #[serde(default)]
    pub steps: u32,
    #[serde(default)]
    pub child_abandoned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub uid: u64,
    pub id: String,
    pub purpose: Purpose,
    pub originator: Originator,
    pub context: Context,
    pub events: Vec<Event>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u64>,
    #[serde(default)]
    pub children: u32,
}

/// LIFO of open segments plus the record of closed ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionStack {
    open: Vec<Segment>,
    closed: Vec<Segment>,
    roots: BTreeMap<char, u32>,
    next_uid: u64,
}

impl InteractionStack {
    pub fn top(&self) -> Option<&Segment> {
        self.open.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut Segment> {
        self.open.last_mut()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn open(&self) -> &[Segment] {
        &self.open
    }

    pub fn closed(&self) -> &[Segment] {
        &self.closed
    }

    pub fn ids(&self) -> Vec<String> {
        self.open.iter().map(|s| s.id.clone()).collect()
    }

    pub fn get_mut(&mut self, uid: u64) -> Option<&mut Segment> {
        self.open.iter_mut().find(|s| s.uid == uid)
    }

    /// Pushes a new segment as a child of the current top and returns its id.
    pub fn push(&mut self, purpose: Purpose, originator: Originator, context: Context) -> String {
        let prefix = purpose.prefix();
        let (id, parent) = match self.open.last_mut() {
            Some(parent) => {
                parent.children += 1;
                let digits: String = parent.id.chars().skip(1).collect();
                (format!("{prefix}{digits}{}", parent.children), Some(parent.uid))
            }
            None => {
                let n = self.roots.entry(prefix).or_insert(0);
                *n += 1;
                (format!("{prefix}{n}"), None)
            }
        };
        self.next_uid += 1;
        self.open.push(Segment {
            uid: self.next_uid,
            id: id.clone(),
            purpose,
            originator,
            context,
            events: Vec::new(),
            status: Status::Open,
            parent,
            children: 0,
        });
        id
    }

    pub fn mark_achieved(&mut self) -> Result<(), DialogError> {
        self.open.last_mut().ok_or(DialogError::EmptyStack)?.status = Status::Achieved;
        Ok(())
    }

    pub fn pop_achieved(&mut self) -> Result<Segment, DialogError> {
        let top = self.open.last().ok_or(DialogError::EmptyStack)?;
        if top.status != Status::Achieved {
            return Err(DialogError::PopUnachieved(top.id.clone()));
        }
        let seg = self.open.pop().expect("checked");
        self.closed.push(seg.clone());
        Ok(seg)
    }

    /// Abandons the top segment regardless of progress.
    pub fn abandon_top(&mut self) -> Result<Segment, DialogError> {
        let mut seg = self.open.pop().ok_or(DialogError::EmptyStack)?;
        seg.status = Status::Abandoned;
        self.closed.push(seg.clone());
        if let Some(parent) = self.open.last_mut() {
            parent.context.child_abandoned = true;
        }
        Ok(seg)
    }

    /// Index of the topmost agent-initiated segment.
    pub fn topmost_agent_segment(&self) -> Option<usize> {
        self.open.iter().rposition(|s| s.originator == Originator::Agent)
    }

    pub fn record(&mut self, event: Event) {
        if let Some(top) = self.open.last_mut() {
            top.events.push(event);
        }
    }

    /// Drops all open segments, e.g. when a session resets.
    pub fn clear(&mut self) {
        while self.abandon_top().is_ok() {}
    }
}

/// What the focused segment still needs, as assessed by the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "progress", rename_all = "kebab-case")]
pub enum Progress {
    NeedProperty { word: String },
    NeedExample { word: String },
    NeedPrepExample { prep: String },
    NeedGoal { verb: String },
    NeedNextAction,
    NeedDisambiguation { np: String },
    NeedLocate { np: String },
    Subgoal { purpose: Purpose },
    ActionReady { action: PrimitiveAction },
    Reply { template: TemplateId, bindings: BTreeMap<String, String> },
    Satisfied,
    Failed { reason: String },
    /// A subgoal was dropped by the instructor; give up on this one too.
    Abandoned,
    Waiting,
}

impl Progress {
    /// One representative of every variant; used to check policy totality.
    pub fn samples() -> Vec<Progress> {
        vec![
            Progress::NeedProperty { word: "w".into() },
            Progress::NeedExample { word: "w".into() },
            Progress::NeedPrepExample { prep: "p".into() },
            Progress::NeedGoal { verb: "v".into() },
            Progress::NeedNextAction,
            Progress::NeedDisambiguation { np: "n".into() },
            Progress::NeedLocate { np: "n".into() },
            Progress::Subgoal { purpose: Purpose::Idle },
            Progress::ActionReady { action: PrimitiveAction::PointTo { object: ObjectId(1) } },
            Progress::Reply { template: TemplateId::AnswerYes, bindings: BTreeMap::new() },
            Progress::Satisfied,
            Progress::Failed { reason: "r".into() },
            Progress::Abandoned,
            Progress::Waiting,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "kebab-case")]
pub enum AgentMove {
    Utterance { template: TemplateId, bindings: BTreeMap<String, String> },
    /// Push a subgoal segment.
    InternalGoal { purpose: Purpose },
    ExternalAction { action: PrimitiveAction },
    /// Reply, then close the focused segment as achieved.
    Answer { template: TemplateId, bindings: BTreeMap<String, String> },
    Complete,
    /// Tell the instructor why, then abandon the focused segment.
    Fail { reason: String },
    Abandon,
    Wait,
}

fn one(key: &str, value: &str) -> BTreeMap<String, String> {
    BTreeMap::from([(key.to_string(), value.to_string())])
}

/// Policy table: the next move for the focused segment.
///
/// With no focused segment the agent asks for the next task.
pub fn next_move(purpose: Option<&Purpose>, progress: &Progress) -> AgentMove {
    let Some(purpose) = purpose else {
        return AgentMove::Utterance { template: TemplateId::AskNextTask, bindings: BTreeMap::new() };
    };
    let ask = |template, bindings| AgentMove::Utterance { template, bindings };
    match progress {
        Progress::NeedProperty { word } => ask(TemplateId::AskProperty, one("word", word)),
        Progress::NeedExample { word } => ask(TemplateId::AskWordExample, one("word", word)),
        Progress::NeedPrepExample { prep } => ask(TemplateId::AskPrepExample, one("prep", prep)),
        Progress::NeedGoal { verb } => ask(TemplateId::AskGoal, one("verb", verb)),
        Progress::NeedNextAction => ask(TemplateId::AskNextAction, BTreeMap::new()),
        Progress::NeedDisambiguation { np } => ask(TemplateId::AskWhich, one("np", np)),
        Progress::NeedLocate { np } => ask(TemplateId::AskFind, one("np", np)),
        Progress::Subgoal { purpose: child } => {
            if child == purpose {
                // a segment never re-opens itself
                AgentMove::Fail { reason: format!("cannot make progress on {purpose}") }
            } else {
                AgentMove::InternalGoal { purpose: child.clone() }
            }
        }
        Progress::ActionReady { action } => AgentMove::ExternalAction { action: *action },
        Progress::Reply { template, bindings } => {
            AgentMove::Answer { template: *template, bindings: bindings.clone() }
        }
        Progress::Satisfied => AgentMove::Complete,
        Progress::Failed { reason } => AgentMove::Fail { reason: reason.clone() },
        Progress::Abandoned => AgentMove::Abandon,
        Progress::Waiting => AgentMove::Wait,
    }
}

/// Class of an instructor utterance given the focused segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DialogEventClass {
    VerbCommand,
    GoalDescription,
    DescriptiveSentence,
    TeachingExample,
    PrepExample,
    PropertyAnswer,
    ReferenceAnswer,
    AttributeQuery,
    SpatialQuery,
    GetNextTask,
    Cancel,
    YesNo,
    Unparseable,
}

impl DialogEventClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DialogEventClass::VerbCommand => "verb-command",
            DialogEventClass::GoalDescription => "goal-description",
            DialogEventClass::DescriptiveSentence => "descriptive-sentence",
            DialogEventClass::TeachingExample => "teaching-example",
            DialogEventClass::PrepExample => "prep-example",
            DialogEventClass::PropertyAnswer => "property-answer",
            DialogEventClass::ReferenceAnswer => "reference-answer",
            DialogEventClass::AttributeQuery => "attribute-query",
            DialogEventClass::SpatialQuery => "spatial-query",
            DialogEventClass::GetNextTask => "get-next-task",
            DialogEventClass::Cancel => "cancel",
            DialogEventClass::YesNo => "yes-no",
            DialogEventClass::Unparseable => "unparseable",
        }
    }

    /// True when the event answers the focused segment's question.
    pub fn is_reply(&self) -> bool {
        matches!(
            self,
            DialogEventClass::GoalDescription
                | DialogEventClass::TeachingExample
                | DialogEventClass::PrepExample
                | DialogEventClass::PropertyAnswer
                | DialogEventClass::ReferenceAnswer
        )
    }
}

/// Assigns the dialog-event class, reinterpreting by the focused segment.
pub fn categorize(parse: &ParseResult, top: Option<&Segment>) -> DialogEventClass {
    use DialogEventClass as C;
    let awaiting = top.and_then(|s| s.context.asked.map(|t| (&s.purpose, t)));
    match parse.category {
        Category::Cancel => C::Cancel,
        Category::GetNextTask => C::GetNextTask,
        Category::YesNo => C::YesNo,
        Category::Unparseable => C::Unparseable,
        Category::AttributeQuery => C::AttributeQuery,
        Category::SpatialQuery => C::SpatialQuery,
        Category::PropertyAnswer => C::PropertyAnswer,
        Category::GoalDescription => C::GoalDescription,
        Category::VerbCommand => C::VerbCommand,
        Category::WhichAnswer | Category::NpFragment => match awaiting {
            Some((_, TemplateId::AskWhich | TemplateId::AskFind)) => C::ReferenceAnswer,
            _ => C::Unparseable,
        },
        Category::DescriptiveSentence => {
            let has_pp = !parse.preps.is_empty();
            match awaiting {
                Some((Purpose::AcquireGoal(_), _)) if has_pp => C::GoalDescription,
                Some((Purpose::LearnPrep(p), _)) if has_pp && &parse.preps[0].prep == p => {
                    C::PrepExample
                }
                Some((Purpose::TeachWordExamples(w), _)) if parse.predicate.contains(w) => {
                    C::TeachingExample
                }
                Some((_, TemplateId::AskWhich | TemplateId::AskFind)) if !has_pp => {
                    C::ReferenceAnswer
                }
                _ => C::DescriptiveSentence,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub episode_index: usize,
    pub segment_id: String,
    pub event_variant: String,
    pub payload: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::{parse, Lexicon};

    #[test]
    fn ids_follow_nesting() {
        let mut s = InteractionStack::default();
        assert_eq!(s.push(Purpose::LearnVerb("store".into()), Originator::Instructor, Context::default()), "A1");
        assert_eq!(s.push(Purpose::LearnWordProperty("orange".into()), Originator::Agent, Context::default()), "O11");
        s.mark_achieved().unwrap();
        s.pop_achieved().unwrap();
        assert_eq!(s.push(Purpose::AcquireGoal("store".into()), Originator::Agent, Context::default()), "G12");
        assert_eq!(s.push(Purpose::LearnPrep("in".into()), Originator::Agent, Context::default()), "P121");
        assert_eq!(s.ids(), vec!["A1", "G12", "P121"]);
    }

    #[test]
    fn pop_requires_achievement() {
        let mut s = InteractionStack::default();
        s.push(Purpose::LearnPrep("in".into()), Originator::Agent, Context::default());
        assert!(matches!(s.pop_achieved(), Err(DialogError::PopUnachieved(_))));
        s.mark_achieved().unwrap();
        assert_eq!(s.pop_achieved().unwrap().id, "P1");
        assert!(s.is_empty());
        assert_eq!(s.pop_achieved(), Err(DialogError::EmptyStack));
    }

    #[test]
    fn empty_stack_asks_for_next_task() {
        assert_eq!(
            next_move(None, &Progress::Waiting),
            AgentMove::Utterance { template: TemplateId::AskNextTask, bindings: BTreeMap::new() }
        );
    }

    #[test]
    fn descriptive_sentence_reinterpreted_in_goal_segment() {
        let lex = Lexicon::default();
        let p = parse("The orange object is in the garbage", &lex);
        assert_eq!(categorize(&p, None), DialogEventClass::DescriptiveSentence);
        let mut s = InteractionStack::default();
        s.push(Purpose::AcquireGoal("discard".into()), Originator::Agent, Context::default());
        s.top_mut().unwrap().context.asked = Some(TemplateId::AskGoal);
        assert_eq!(categorize(&p, s.top()), DialogEventClass::GoalDescription);
    }

    #[test]
    fn learning_permissions() {
        assert!(Purpose::ResolveReference("x".into()).permits(LearningKind::PerceptTrain));
        assert!(!Purpose::LearnVerb("x".into()).permits(LearningKind::RuleLearn));
        assert!(Purpose::AcquireActions("x".into()).permits(LearningKind::RuleLearn));
    }
}
