//! Grounding noun phrases to perceived objects and named locations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::SimState;
use super::{Knowledge, Percept};
use crate::language::NounPhrase;
use crate::memory::WordCue;
use crate::perception::PerceptSymbol;
use crate::spatial::{Body, SpatialComposition};
use crate::world::{EntityId, NamedLocation, ObjectId};

/// Why a phrase could not be grounded yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Impasse {
    UnknownWord(String),
    UnknownPrep(String),
    NoExamples(String),
    Unresolved { np: NounPhrase, candidates: Vec<ObjectId> },
}

/// Body of an entity in a simulated state.
pub fn entity_body(state: &SimState, locations: &[NamedLocation], e: EntityId) -> Option<Body> {
    match e {
        EntityId::Object(id) => state.object(id).map(|o| Body::from_pose(o.pose, o.bbox)),
        EntityId::Location(name) => {
            locations.iter().find(|l| l.name == name).map(Body::location)
        }
    }
}

/// A goal bound to concrete entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalInstance {
    pub prep: String,
    pub primary: ObjectId,
    pub reference: EntityId,
}

impl GoalInstance {
    pub fn holds(&self, comp: &SpatialComposition, state: &SimState, locations: &[NamedLocation]) -> bool {
        relation_holds(comp, state, locations, EntityId::Object(self.primary), self.reference)
    }
}

pub fn relation_holds(
    comp: &SpatialComposition,
    state: &SimState,
    locations: &[NamedLocation],
    primary: EntityId,
    reference: EntityId,
) -> bool {
    if primary == reference {
        return false;
    }
    let (Some(a), Some(b)) =
        (entity_body(state, locations, primary), entity_body(state, locations, reference))
    else {
        return false;
    };
    comp.evaluate(&a, &b, &state.workspace).unwrap_or(false)
}

pub struct Grounder<'a> {
    pub knowledge: &'a Knowledge,
    pub percepts: &'a [Percept],
    pub state: &'a SimState,
    pub locations: &'a [NamedLocation],
}

impl Grounder<'_> {
    fn symbol(&self, word: &str) -> Result<PerceptSymbol, Impasse> {
        self.knowledge
            .semantic
            .peek_word(&WordCue { word: Some(word), ..Default::default() })
            .map(|m| m.symbol.clone())
            .ok_or_else(|| Impasse::UnknownWord(word.to_string()))
    }

    /// Every word and preposition in the phrase has a meaning.
    pub fn lexical_check(&self, np: &NounPhrase) -> Result<(), Impasse> {
        for w in &np.attributes {
            self.symbol(w)?;
        }
        if let Some(pp) = &np.pp {
            if self.knowledge.semantic.peek_prep(&pp.prep).is_none() {
                return Err(Impasse::UnknownPrep(pp.prep.clone()));
            }
            self.lexical_check(&pp.object)?;
        }
        Ok(())
    }

    /// Objects the phrase could denote.
    pub fn candidates(
        &self,
        np: &NounPhrase,
        selection: Option<ObjectId>,
        bindings: &BTreeMap<String, EntityId>,
    ) -> Result<Vec<ObjectId>, Impasse> {
        if np.gestural {
            return Ok(selection.into_iter().collect());
        }
        let mut wanted = Vec::new();
        for w in &np.attributes {
            let sym = self.symbol(w)?;
            if self.knowledge.classifiers.get(sym.kind()).example_count(&sym) == 0 {
                return Err(Impasse::NoExamples(w.clone()));
            }
            wanted.push(sym);
        }
        let mut out: Vec<ObjectId> = self
            .percepts
            .iter()
            .filter(|p| {
                wanted.iter().all(|s| p.symbols[s.kind().index()].as_ref() == Some(s))
            })
            .map(|p| p.id)
            .collect();
        if let Some(pp) = &np.pp {
            let comp = &self
                .knowledge
                .semantic
                .peek_prep(&pp.prep)
                .ok_or_else(|| Impasse::UnknownPrep(pp.prep.clone()))?
                .composition;
            let reference = self.ground(&pp.object, None, bindings)?;
            out.retain(|id| {
                relation_holds(comp, self.state, self.locations, EntityId::Object(*id), reference)
            });
        }
        Ok(out)
    }

    /// The single entity the phrase denotes.
    pub fn ground(
        &self,
        np: &NounPhrase,
        selection: Option<ObjectId>,
        bindings: &BTreeMap<String, EntityId>,
    ) -> Result<EntityId, Impasse> {
        if let Some(e) = bindings.get(&np.render()) {
            return Ok(*e);
        }
        if let Some(loc) = np.location() {
            return Ok(EntityId::Location(loc));
        }
        let cands = self.candidates(np, selection, bindings)?;
        match cands.as_slice() {
            [one] => Ok(EntityId::Object(*one)),
            _ => Err(Impasse::Unresolved { np: np.clone(), candidates: cands }),
        }
    }
}
