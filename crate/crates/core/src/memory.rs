//! Semantic memory (word, preposition and verb knowledge) and episodic memory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{PerceptSymbol, PropertyKind};
use crate::spatial::SpatialComposition;
use crate::world::{ArmState, EntityId, LocationName, ObjectId, PrimitiveAction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("{word:?} already maps to a different {property} symbol")]
    DuplicateKey { word: String, property: PropertyKind },
    #[error("episode {index} out of range (have {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown operator {0}")]
    UnknownOperator(String),
}

/// Retrieval bias: more frequently used entries win, then more recent ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Activation {
    pub frequency: u64,
    pub recency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordMap {
    pub word: String,
    pub symbol: PerceptSymbol,
    pub property: PropertyKind,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordCue<'a> {
    pub word: Option<&'a str>,
    pub symbol: Option<&'a PerceptSymbol>,
    pub property: Option<PropertyKind>,
}

impl WordCue<'_> {
    fn matches(&self, m: &WordMap) -> bool {
        self.word.is_none_or(|w| m.word == w)
            && self.symbol.is_none_or(|s| &m.symbol == s)
            && self.property.is_none_or(|p| m.property == p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepMap {
    pub word: String,
    pub composition: SpatialComposition,
    pub activation: Activation,
}

/// Argument structure a verb was taught with.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgSignature {
    pub has_direct_object: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotRole {
    DirectObject,
    PrepObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSlot {
    pub label: String,
    pub role: SlotRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum GoalRelation {
    /// A fixed preposition, e.g. "in" for store.
    Prep(String),
    /// Whatever preposition the command itself carries.
    FromCommand,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum GoalReference {
    Slot(usize),
    Location(LocationName),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalPattern {
    pub relation: GoalRelation,
    pub primary_slot: usize,
    pub reference: GoalReference,
}

/// Verb meaning: argument slots, the operator it proposes and its goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionConceptNetwork {
    pub verb: String,
    pub signature: ArgSignature,
    pub operator_id: String,
    pub slots: Vec<ArgSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalPattern>,
    pub activation: Activation,
}

impl ActionConceptNetwork {
    pub fn new(verb: &str, signature: ArgSignature, operator_id: String) -> Self {
        let mut slots = Vec::new();
        if signature.has_direct_object {
            slots.push(ArgSlot { label: "A11".into(), role: SlotRole::DirectObject });
        }
        if signature.prep.is_some() {
            let label = format!("A1{}", slots.len() + 1);
            slots.push(ArgSlot { label, role: SlotRole::PrepObject });
        }
        ActionConceptNetwork {
            verb: verb.to_string(),
            signature,
            operator_id,
            slots,
            goal: None,
            activation: Activation::default(),
        }
    }

    /// Node labels: mapping, lexical, argument and procedural nodes, then
    /// the goal and goal-predicate nodes once a goal is known.
    pub fn node_labels(&self) -> Vec<String> {
        let mut out = vec!["M1".to_string(), "L1".to_string()];
        out.extend(self.slots.iter().map(|s| s.label.clone()));
        out.push("P1".into());
        if self.goal.is_some() {
            out.push("G2".into());
            out.push("P2".into());
        }
        out
    }

    pub fn slot_of(&self, role: SlotRole) -> Option<usize> {
        self.slots.iter().position(|s| s.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SemanticMemory {
    clock: u64,
    pub word_maps: Vec<WordMap>,
    pub prep_maps: Vec<PrepMap>,
    pub networks: Vec<ActionConceptNetwork>,
    next_operator: u32,
}

fn best<T>(items: impl Iterator<Item = (usize, T)>, act: impl Fn(&T) -> Activation) -> Option<usize> {
    items
        .max_by(|(ia, a), (ib, b)| act(a).cmp(&act(b)).then(ib.cmp(ia)))
        .map(|(i, _)| i)
}

impl SemanticMemory {
    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn touch(act: &mut Activation, now: u64) {
        act.frequency += 1;
        act.recency = now;
    }

    pub fn store_word(&mut self, word: &str, symbol: &PerceptSymbol) -> Result<(), MemoryError> {
        let property = symbol.kind();
        let now = self.tick();
        if let Some(m) = self.word_maps.iter_mut().find(|m| m.word == word && m.property == property) {
            if &m.symbol != symbol {
                return Err(MemoryError::DuplicateKey { word: word.to_string(), property });
            }
            m.activation.recency = now;
            return Ok(());
        }
        self.word_maps.push(WordMap {
            word: word.to_string(),
            symbol: symbol.clone(),
            property,
            activation: Activation { frequency: 0, recency: now },
        });
        Ok(())
    }

    /// Best match without changing activation.
    pub fn peek_word(&self, cue: &WordCue<'_>) -> Option<&WordMap> {
        let idx = best(
            self.word_maps.iter().enumerate().filter(|(_, m)| cue.matches(m)),
            |m| m.activation,
        )?;
        Some(&self.word_maps[idx])
    }

    pub fn retrieve_word(&mut self, cue: &WordCue<'_>) -> Option<WordMap> {
        let idx = best(
            self.word_maps.iter().enumerate().filter(|(_, m)| cue.matches(m)),
            |m| m.activation,
        )?;
        let now = self.tick();
        Self::touch(&mut self.word_maps[idx].activation, now);
        Some(self.word_maps[idx].clone())
    }

    pub fn store_prep(&mut self, word: &str, composition: SpatialComposition) {
        let now = self.tick();
        match self.prep_maps.iter_mut().find(|p| p.word == word) {
            Some(p) => {
                p.composition = composition;
                p.activation.recency = now;
            }
            None => self.prep_maps.push(PrepMap {
                word: word.to_string(),
                composition,
                activation: Activation { frequency: 0, recency: now },
            }),
        }
    }

    pub fn peek_prep(&self, word: &str) -> Option<&PrepMap> {
        self.prep_maps.iter().find(|p| p.word == word)
    }

    pub fn retrieve_prep(&mut self, word: &str) -> Option<PrepMap> {
        let now = self.tick();
        let p = self.prep_maps.iter_mut().find(|p| p.word == word)?;
        Self::touch(&mut p.activation, now);
        Some(p.clone())
    }

    pub fn new_operator_id(&mut self) -> String {
        self.next_operator += 1;
        format!("op{}", self.next_operator)
    }

    pub fn store_network(&mut self, network: ActionConceptNetwork) {
        let now = self.tick();
        let mut network = network;
        network.activation.recency = now;
        match self.networks.iter_mut().find(|n| n.operator_id == network.operator_id) {
            Some(n) => *n = network,
            None => self.networks.push(network),
        }
    }

    pub fn peek_network(&self, verb: &str, signature: &ArgSignature) -> Option<&ActionConceptNetwork> {
        let idx = best(
            self.networks
                .iter()
                .enumerate()
                .filter(|(_, n)| n.verb == verb && &n.signature == signature),
            |n| n.activation,
        )?;
        Some(&self.networks[idx])
    }

    pub fn retrieve_network(&mut self, verb: &str, signature: &ArgSignature) -> Option<ActionConceptNetwork> {
        let op = self.peek_network(verb, signature)?.operator_id.clone();
        let now = self.tick();
        let n = self.networks.iter_mut().find(|n| n.operator_id == op).expect("found above");
        Self::touch(&mut n.activation, now);
        Some(n.clone())
    }

    pub fn network(&self, operator_id: &str) -> Option<&ActionConceptNetwork> {
        self.networks.iter().find(|n| n.operator_id == operator_id)
    }

    pub fn network_mut(&mut self, operator_id: &str) -> Result<&mut ActionConceptNetwork, MemoryError> {
        self.networks
            .iter_mut()
            .find(|n| n.operator_id == operator_id)
            .ok_or_else(|| MemoryError::UnknownOperator(operator_id.to_string()))
    }
}

/// Object as held in working memory: geometry plus classified symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: ObjectId,
    pub pose: [f64; 3],
    pub bbox: [f64; 3],
    pub graspable: bool,
    /// Classified symbol per property (color, size, shape); `None` is Unknown.
    pub symbols: [Option<PerceptSymbol>; 3],
}

/// Executed action together with what the command said, if it was instructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructedAction {
    pub action: PrimitiveAction,
    /// False when a learned rule chose the action.
    #[serde(default)]
    pub instructed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectId>,
    /// Preposition and grounded reference of a put command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<(String, EntityId)>,
    pub arm_before: ArmState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub id: String,
    pub purpose: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub objects: Vec<ObjectState>,
    pub arm: ArmState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_segment: Option<SegmentRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<InstructedAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub index: usize,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodicMemory {
    episodes: Vec<Episode>,
}

impl EpisodicMemory {
    pub fn record(&mut self, snapshot: Snapshot) -> usize {
        let index = self.episodes.len();
        self.episodes.push(Episode { index, snapshot });
        index
    }

    pub fn get(&self, index: usize) -> Result<&Episode, MemoryError> {
        self.episodes
            .get(index)
            .ok_or(MemoryError::IndexOutOfRange { index, len: self.episodes.len() })
    }

    /// Episodes `from..=to`.
    pub fn span(&self, from: usize, to: usize) -> Result<&[Episode], MemoryError> {
        if to >= self.episodes.len() || from > to {
            return Err(MemoryError::IndexOutOfRange { index: to.max(from), len: self.episodes.len() });
        }
        Ok(&self.episodes[from..=to])
    }

    pub fn most_recent_with_purpose(&self, purpose: &str) -> Option<&Episode> {
        self.episodes
            .iter()
            .rev()
            .find(|e| e.snapshot.top_segment.as_ref().is_some_and(|s| s.purpose == purpose))
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(kind: PropertyKind, n: u32) -> PerceptSymbol {
        PerceptSymbol::new(kind, n)
    }

    #[test]
    fn forward_and_reverse_cues() {
        let mut m = SemanticMemory::default();
        let c1 = sym(PropertyKind::Color, 1);
        m.store_word("red", &c1).unwrap();
        let by_word = m.retrieve_word(&WordCue { word: Some("red"), ..Default::default() }).unwrap();
        assert_eq!(by_word.symbol, c1);
        let by_symbol = m.retrieve_word(&WordCue { symbol: Some(&c1), ..Default::default() }).unwrap();
        assert_eq!(by_symbol.word, "red");
        assert!(m.peek_word(&WordCue { word: Some("blarg"), ..Default::default() }).is_none());
    }

    #[test]
    fn conflicting_symbol_is_duplicate() {
        let mut m = SemanticMemory::default();
        m.store_word("red", &sym(PropertyKind::Color, 1)).unwrap();
        m.store_word("red", &sym(PropertyKind::Color, 1)).unwrap();
        assert_eq!(m.word_maps.len(), 1);
        assert!(matches!(
            m.store_word("red", &sym(PropertyKind::Color, 2)),
            Err(MemoryError::DuplicateKey { .. })
        ));
        // the same word may name a symbol of another property
        m.store_word("red", &sym(PropertyKind::Shape, 3)).unwrap();
    }

    #[test]
    fn frequency_beats_recency() {
        let mut m = SemanticMemory::default();
        m.store_word("red", &sym(PropertyKind::Color, 1)).unwrap();
        m.store_word("blue", &sym(PropertyKind::Color, 2)).unwrap();
        let cue = WordCue { property: Some(PropertyKind::Color), ..Default::default() };
        // blue is more recent
        assert_eq!(m.peek_word(&cue).unwrap().word, "blue");
        for _ in 0..2 {
            m.retrieve_word(&WordCue { word: Some("red"), ..Default::default() });
        }
        m.retrieve_word(&WordCue { word: Some("blue"), ..Default::default() });
        assert_eq!(m.peek_word(&cue).unwrap().word, "red");
    }

    #[test]
    fn network_signature_match() {
        let mut m = SemanticMemory::default();
        for prep in ["in", "right of"] {
            let op = m.new_operator_id();
            let sig = ArgSignature { has_direct_object: true, prep: Some(prep.into()) };
            m.store_network(ActionConceptNetwork::new("move", sig, op));
        }
        let sig = ArgSignature { has_direct_object: true, prep: Some("right of".into()) };
        let n = m.retrieve_network("move", &sig).unwrap();
        assert_eq!(n.signature, sig);
        assert_eq!(n.operator_id, "op2");
        let none = ArgSignature { has_direct_object: true, prep: None };
        assert!(m.peek_network("move", &none).is_none());
    }

    #[test]
    fn store_network_labels() {
        let sig = ArgSignature { has_direct_object: true, prep: None };
        let mut n = ActionConceptNetwork::new("store", sig, "op1".into());
        assert_eq!(n.node_labels(), vec!["M1", "L1", "A11", "P1"]);
        n.goal = Some(GoalPattern {
            relation: GoalRelation::Prep("in".into()),
            primary_slot: 0,
            reference: GoalReference::Location(LocationName::Pantry),
        });
        assert_eq!(n.node_labels(), vec!["M1", "L1", "A11", "P1", "G2", "P2"]);
    }

    #[test]
    fn episodes_are_contiguous() {
        let mut e = EpisodicMemory::default();
        for t in 0..5 {
            let i = e.record(Snapshot {
                tick: t,
                objects: vec![],
                arm: ArmState::Empty,
                top_segment: (t == 2).then(|| SegmentRef { id: "A1".into(), purpose: "learn-verb".into() }),
                action: None,
                utterance: None,
            });
            assert_eq!(i as u64, t);
        }
        assert_eq!(e.span(1, 3).unwrap().len(), 3);
        assert!(matches!(e.get(5), Err(MemoryError::IndexOutOfRange { index: 5, len: 5 })));
        assert_eq!(e.most_recent_with_purpose("learn-verb").unwrap().index, 2);
    }
}
