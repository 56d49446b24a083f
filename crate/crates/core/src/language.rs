//! Restricted pattern grammar for instructor utterances and templates for
//! agent utterances.
//!
//! The grammar is documented pattern by pattern in `docs/grammar.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::PropertyKind;
use crate::world::LocationName;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LanguageError {
    #[error("template {template:?} needs binding {hole:?}")]
    MissingBinding { template: TemplateId, hole: String },
    #[error("{0:?} is a closed-class word")]
    ClosedClassCollision(String),
}

/// Function words the parser knows natively. Open-class entries may never
/// shadow them.
pub const CLOSED_CLASS: &[&str] = &[
    "the", "a", "an", "this", "that", "it", "is", "are", "what", "which", "where", "yes",
    "no", "goal", "of", "to", "color", "size", "shape", "object", "block", "thing", "one",
    "never", "mind", "nevermind", "next", "task", "up", "down", "stove", "dishwasher",
    "garbage", "pantry", "please", "and",
];

/// Nouns that name "some object" without carrying a perceptual meaning.
const GENERIC_HEADS: &[&str] = &["object", "block", "thing", "one"];

const DETERMINERS: &[&str] = &["the", "a", "an"];

/// Fixed surface variants of prepositions, matched before lexicon entries.
const PREP_ALIASES: &[(&str, &str)] = &[
    ("to the left of", "left of"),
    ("to the right of", "right of"),
    ("on the left of", "left of"),
    ("on the right of", "right of"),
    ("into", "in"),
    ("inside", "in"),
    ("to", "in"),
];

pub const SEED_PREPOSITIONS: &[&str] = &[
    "in", "on", "near", "behind", "left of", "right of", "in front of", "next to", "far from",
];

pub const SEED_VERBS: &[&str] = &["pick up", "put down", "put", "point to"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pos {
    NounAdj,
    Preposition,
    Verb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Word (possibly several space-separated tokens) to part of speech.
    pub open_class: BTreeMap<String, Pos>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let mut open_class = BTreeMap::new();
        for p in SEED_PREPOSITIONS {
            open_class.insert(p.to_string(), Pos::Preposition);
        }
        for v in SEED_VERBS {
            open_class.insert(v.to_string(), Pos::Verb);
        }
        Lexicon { open_class }
    }
}

impl Lexicon {
    pub fn is_closed(word: &str) -> bool {
        CLOSED_CLASS.contains(&word)
    }

    pub fn pos(&self, word: &str) -> Option<Pos> {
        self.open_class.get(word).copied()
    }

    pub fn is_known(&self, word: &str) -> bool {
        Self::is_closed(word) || self.open_class.contains_key(word)
    }

    pub fn register_word(&mut self, word: &str, pos: Pos) -> Result<(), LanguageError> {
        let word = word.to_lowercase();
        if Self::is_closed(&word) {
            return Err(LanguageError::ClosedClassCollision(word));
        }
        self.open_class.insert(word, pos);
        Ok(())
    }

    /// Multi-token entries of one part of speech, longest first.
    fn phrases(&self, pos: Pos) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = self
            .open_class
            .iter()
            .filter(|(_, p)| **p == pos)
            .map(|(w, _)| w.split(' ').collect())
            .collect();
        out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        out
    }
}

/// Lowercases, drops punctuation, splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| c.is_alphanumeric() || *c == '-')
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    VerbCommand,
    GoalDescription,
    DescriptiveSentence,
    AttributeQuery,
    SpatialQuery,
    WhichAnswer,
    PropertyAnswer,
    NpFragment,
    YesNo,
    GetNextTask,
    Cancel,
    Unparseable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Verb,
    Determiner,
    Demonstrative,
    Attribute,
    Head,
    Location,
    Preposition,
    Property,
    Predicate,
    Function,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub role: Role,
    pub known: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NounPhrase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub determiner: Option<String>,
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp: Option<Box<PrepPhrase>>,
    pub gestural: bool,
}

impl NounPhrase {
    /// Named table region this phrase denotes, if any.
    pub fn location(&self) -> Option<LocationName> {
        self.head.as_deref().and_then(LocationName::from_word)
    }

    /// Surface form without determiner, e.g. "orange triangle".
    pub fn render(&self) -> String {
        let mut words: Vec<&str> = Vec::new();
        if self.gestural {
            words.push("this");
        }
        words.extend(self.attributes.iter().map(String::as_str));
        if let Some(h) = &self.head {
            words.push(h);
        }
        if words.is_empty() {
            words.push("object");
        }
        let mut s = words.join(" ");
        if let Some(pp) = &self.pp {
            s.push(' ');
            s.push_str(&pp.prep);
            s.push_str(" the ");
            s.push_str(&pp.object.render());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepPhrase {
    pub prep: String,
    pub object: NounPhrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<String>,
    /// Subject of descriptive sentences, queries, goal descriptions, fragments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<NounPhrase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_object: Option<NounPhrase>,
    pub preps: Vec<PrepPhrase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<PropertyKind>,
    /// Predicate words of "X is red", or the word named in "orange is a color".
    pub predicate: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<bool>,
    pub unknown_words: Vec<String>,
    pub tokens: Vec<Token>,
}

impl ParseResult {
    fn new(category: Category) -> Self {
        ParseResult {
            category,
            verb: None,
            subject: None,
            direct_object: None,
            preps: Vec::new(),
            property: None,
            predicate: Vec::new(),
            polarity: None,
            unknown_words: Vec::new(),
            tokens: Vec::new(),
        }
    }

    /// True when the utterance carries a "this" gesture anywhere.
    pub fn gestural(&self) -> bool {
        fn np_g(np: &NounPhrase) -> bool {
            np.gestural || np.pp.as_ref().is_some_and(|pp| np_g(&pp.object))
        }
        self.subject.as_ref().is_some_and(np_g)
            || self.direct_object.as_ref().is_some_and(np_g)
            || self.preps.iter().any(|pp| np_g(&pp.object))
    }
}

/// Parser state over one token list; `roles` collects the role of every token.
struct Parser<'a> {
    lex: &'a Lexicon,
    toks: &'a [String],
    roles: Vec<Option<Role>>,
    preps: Vec<(Vec<String>, String)>,
}

impl<'a> Parser<'a> {
    fn new(lex: &'a Lexicon, toks: &'a [String]) -> Self {
        let mut preps: Vec<(Vec<String>, String)> = PREP_ALIASES
            .iter()
            .map(|(s, c)| (s.split(' ').map(String::from).collect(), c.to_string()))
            .collect();
        for p in lex.phrases(Pos::Preposition) {
            preps.push((p.iter().map(|s| s.to_string()).collect(), p.join(" ")));
        }
        // longest first; aliases win ties because they were pushed first
        preps.sort_by_key(|p| std::cmp::Reverse(p.0.len()));
        Parser { lex, toks, roles: vec![None; toks.len()], preps }
    }

    fn set(&mut self, i: usize, role: Role) {
        self.roles[i] = Some(role);
    }

    fn tok(&self, i: usize) -> Option<&'a str> {
        self.toks.get(i).map(String::as_str)
    }

    fn prep_at(&self, i: usize, end: usize) -> Option<(String, usize)> {
        for (surface, canon) in &self.preps {
            let n = surface.len();
            if i + n <= end && self.toks[i..i + n].iter().zip(surface).all(|(a, b)| a == b) {
                return Some((canon.clone(), n));
            }
        }
        None
    }

    fn verb_at(&self, i: usize) -> Option<(String, usize)> {
        for v in self.lex.phrases(Pos::Verb) {
            let n = v.len();
            if i + n <= self.toks.len() && self.toks[i..i + n].iter().zip(&v).all(|(a, b)| a == b) {
                return Some((v.join(" "), n));
            }
        }
        None
    }

    /// First top-level preposition in `[i, end)`.
    fn find_prep(&self, i: usize, end: usize) -> Option<(usize, String, usize)> {
        (i..end).find_map(|j| self.prep_at(j, end).map(|(p, n)| (j, p, n)))
    }

    /// Noun phrase covering exactly `[i, end)`, optionally with one embedded PP.
    fn np(&mut self, i: usize, end: usize, allow_pp: bool) -> Option<NounPhrase> {
        if i >= end {
            return None;
        }
        let (core_end, pp) = match self.find_prep(i, end) {
            Some((j, prep, n)) if allow_pp && j > i => {
                let object = self.np(j + n, end, true)?;
                for k in j..j + n {
                    self.set(k, Role::Preposition);
                }
                (j, Some(Box::new(PrepPhrase { prep, object })))
            }
            Some(_) => return None,
            None => (end, None),
        };
        let mut np = NounPhrase { pp, ..Default::default() };
        let mut k = i;
        if let Some(t) = self.tok(k) {
            if DETERMINERS.contains(&t) {
                np.determiner = Some(t.to_string());
                self.set(k, Role::Determiner);
                k += 1;
            } else if t == "this" || t == "that" {
                np.gestural = true;
                self.set(k, Role::Demonstrative);
                k += 1;
            }
        }
        while k < core_end {
            let t = self.toks[k].clone();
            if GENERIC_HEADS.contains(&t.as_str()) || LocationName::from_word(&t).is_some() {
                // a head closes the phrase
                if k + 1 != core_end || np.head.is_some() {
                    return None;
                }
                let role = if LocationName::from_word(&t).is_some() {
                    Role::Location
                } else {
                    Role::Head
                };
                np.head = Some(t);
                self.set(k, role);
            } else if Lexicon::is_closed(&t) || matches!(self.lex.pos(&t), Some(Pos::Preposition | Pos::Verb)) {
                return None;
            } else {
                np.attributes.push(t);
                self.set(k, Role::Attribute);
            }
            k += 1;
        }
        if np.attributes.is_empty() && np.head.is_none() && !np.gestural {
            return None;
        }
        Some(np)
    }

    /// NP followed by zero or more top-level PPs, covering `[i, end)`.
    fn np_with_pps(&mut self, i: usize, end: usize) -> Option<(Option<NounPhrase>, Vec<PrepPhrase>)> {
        let mut bounds = Vec::new();
        let mut j = i;
        while j < end {
            match self.prep_at(j, end) {
                Some((p, n)) => {
                    bounds.push((j, p, n));
                    j += n;
                }
                None => j += 1,
            }
        }
        let np_end = bounds.first().map_or(end, |b| b.0);
        let np = if np_end > i { Some(self.np(i, np_end, false)?) } else { None };
        let mut pps = Vec::new();
        for (idx, (start, prep, n)) in bounds.iter().enumerate() {
            let obj_end = bounds.get(idx + 1).map_or(end, |b| b.0);
            let object = self.np(start + n, obj_end, false)?;
            for k in *start..start + n {
                self.set(k, Role::Preposition);
            }
            pps.push(PrepPhrase { prep: prep.clone(), object });
        }
        Some((np, pps))
    }

    fn property_word(&self, i: usize) -> Option<PropertyKind> {
        self.tok(i).and_then(PropertyKind::from_word)
    }

    fn finish(mut self, mut result: ParseResult) -> ParseResult {
        let mut unknown = Vec::new();
        result.tokens = self
            .toks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let role = self.roles[i].take().unwrap_or(Role::Function);
                let known = self.lex.is_known(t) || PREP_ALIASES.iter().any(|(s, _)| s.split(' ').any(|w| w == t));
                if !known && !unknown.contains(t) {
                    unknown.push(t.clone());
                }
                Token { text: t.clone(), role, known }
            })
            .collect();
        result.unknown_words = unknown;
        result
    }
}

/// Parses one instructor utterance. Never fails: unmatched input is `Unparseable`.
pub fn parse(text: &str, lex: &Lexicon) -> ParseResult {
    let toks = tokenize(text);
    let mut p = Parser::new(lex, &toks);
    let result = parse_tokens(&mut p).unwrap_or_else(|| {
        p.roles.iter_mut().for_each(|r| *r = None);
        ParseResult::new(Category::Unparseable)
    });
    p.finish(result)
}

fn parse_tokens(p: &mut Parser<'_>) -> Option<ParseResult> {
    let toks = p.toks;
    let n = toks.len();
    let words: Vec<&str> = toks.iter().map(String::as_str).collect();
    match words.as_slice() {
        [] => return None,
        ["never", "mind"] | ["nevermind"] => {
            p.set(0, Role::Function);
            return Some(ParseResult::new(Category::Cancel));
        }
        ["yes"] | ["no"] => {
            let mut r = ParseResult::new(Category::YesNo);
            r.polarity = Some(words[0] == "yes");
            return Some(r);
        }
        ["next", "task"] | ["what", "next"] | ["what", "is", "next"] => {
            return Some(ParseResult::new(Category::GetNextTask));
        }
        _ => {}
    }

    // property answers: "color", "a color", "it is a color", "orange is a color"
    let answer_at = |k: usize| -> Option<PropertyKind> {
        let mut k = k;
        if matches!(words.get(k), Some(&"a") | Some(&"an")) {
            k += 1;
        }
        if k + 1 == n {
            return PropertyKind::from_word(words[k]);
        }
        None
    };
    if let Some(kind) = answer_at(0) {
        let mut r = ParseResult::new(Category::PropertyAnswer);
        r.property = Some(kind);
        p.set(n - 1, Role::Property);
        return Some(r);
    }
    if n >= 3 && words[1] == "is" {
        if let Some(kind) = answer_at(2) {
            let mut r = ParseResult::new(Category::PropertyAnswer);
            r.property = Some(kind);
            p.set(n - 1, Role::Property);
            if words[0] != "it" && words[0] != "this" {
                r.predicate = vec![words[0].to_string()];
                p.set(0, Role::Predicate);
            }
            return Some(r);
        }
    }

    // "the goal is NP PREP NP"
    if words.starts_with(&["the", "goal", "is"]) {
        let (subject, preps) = p.np_with_pps(3, n)?;
        if subject.is_none() || preps.len() != 1 {
            return None;
        }
        let mut r = ParseResult::new(Category::GoalDescription);
        r.subject = subject;
        r.preps = preps;
        return Some(r);
    }

    // wh queries
    if words[0] == "what" {
        if let Some(kind) = p.property_word(1) {
            if words.get(2) == Some(&"is") {
                let subject = p.np(3, n, true)?;
                p.set(1, Role::Property);
                let mut r = ParseResult::new(Category::AttributeQuery);
                r.property = Some(kind);
                r.subject = Some(subject);
                return Some(r);
            }
            return None;
        }
        if words.get(1) == Some(&"is") || words.get(1) == Some(&"are") {
            if let Some((prep, len)) = p.prep_at(2, n) {
                let object = p.np(2 + len, n, true)?;
                for k in 2..2 + len {
                    p.set(k, Role::Preposition);
                }
                let mut r = ParseResult::new(Category::SpatialQuery);
                r.preps = vec![PrepPhrase { prep, object }];
                return Some(r);
            }
            let subject = p.np(2, n, true)?;
            let mut r = ParseResult::new(Category::AttributeQuery);
            r.subject = Some(subject);
            return Some(r);
        }
        return None;
    }

    // "is NP PREP NP" / "is NP WORD"
    if words[0] == "is" {
        if let Some((Some(subject), preps)) = p.np_with_pps(1, n) {
            if preps.len() == 1 {
                let mut r = ParseResult::new(Category::SpatialQuery);
                r.subject = Some(subject);
                r.preps = preps;
                return Some(r);
            }
        }
        p.roles.iter_mut().for_each(|r| *r = None);
        // the last word is the asked-about property word
        if n >= 3 {
            let subject = p.np(1, n - 1, true)?;
            let mut r = ParseResult::new(Category::AttributeQuery);
            r.subject = Some(subject);
            r.predicate = vec![words[n - 1].to_string()];
            p.set(n - 1, Role::Predicate);
            return Some(r);
        }
        return None;
    }

    // "NP is|are ..."
    if let Some(cop) = words.iter().position(|w| *w == "is" || *w == "are") {
        if cop == 0 {
            return None;
        }
        let subject = p.np(0, cop, true)?;
        let rest = cop + 1;
        if let Some((prep, len)) = p.prep_at(rest, n) {
            let object = p.np(rest + len, n, true)?;
            for k in rest..rest + len {
                p.set(k, Role::Preposition);
            }
            let mut r = ParseResult::new(Category::DescriptiveSentence);
            r.subject = Some(subject);
            r.preps = vec![PrepPhrase { prep, object }];
            return Some(r);
        }
        let mut k = rest;
        if matches!(words.get(k), Some(&"a") | Some(&"an")) {
            p.set(k, Role::Determiner);
            k += 1;
        }
        if k >= n {
            return None;
        }
        let mut predicate = Vec::new();
        for (j, w) in words.iter().enumerate().take(n).skip(k) {
            if Lexicon::is_closed(w) && !GENERIC_HEADS.contains(w) {
                return None;
            }
            if GENERIC_HEADS.contains(w) {
                p.set(j, Role::Head);
                continue;
            }
            if matches!(p.lex.pos(w), Some(Pos::Preposition | Pos::Verb)) {
                return None;
            }
            predicate.push(w.to_string());
            p.set(j, Role::Predicate);
        }
        if predicate.is_empty() {
            return None;
        }
        let mut r = ParseResult::new(Category::DescriptiveSentence);
        r.subject = Some(subject);
        r.predicate = predicate;
        return Some(r);
    }

    // imperative: VERB [NP] PP*
    let verb = match p.verb_at(0) {
        Some(v) => Some(v),
        None => {
            let w = words[0];
            let is_np_word = DETERMINERS.contains(&w)
                || w == "this"
                || w == "that"
                || p.lex.pos(w) == Some(Pos::NounAdj)
                || p.lex.pos(w) == Some(Pos::Preposition)
                || Lexicon::is_closed(w);
            if !is_np_word && n >= 2 {
                Some((w.to_string(), 1))
            } else {
                None
            }
        }
    };
    if let Some((verb, len)) = verb {
        let (dobj, preps) = if len < n { p.np_with_pps(len, n)? } else { (None, Vec::new()) };
        for k in 0..len {
            p.set(k, Role::Verb);
        }
        let mut r = ParseResult::new(Category::VerbCommand);
        r.verb = Some(verb);
        r.direct_object = dobj;
        r.preps = preps;
        return Some(r);
    }

    // bare noun phrases
    let np = p.np(0, n, true)?;
    let which = np.head.as_deref() == Some("one");
    let mut r = ParseResult::new(if which { Category::WhichAnswer } else { Category::NpFragment });
    r.subject = Some(np);
    Some(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    AskNextTask,
    AskProperty,
    AskGoal,
    AskNextAction,
    AskPrepExample,
    AskWordExample,
    AskWhich,
    AskFind,
    Answer,
    AnswerUnknown,
    AnswerYes,
    AnswerNo,
    CannotDo,
    DontUnderstand,
}

impl TemplateId {
    pub const ALL: [TemplateId; 14] = [
        TemplateId::AskNextTask,
        TemplateId::AskProperty,
        TemplateId::AskGoal,
        TemplateId::AskNextAction,
        TemplateId::AskPrepExample,
        TemplateId::AskWordExample,
        TemplateId::AskWhich,
        TemplateId::AskFind,
        TemplateId::Answer,
        TemplateId::AnswerUnknown,
        TemplateId::AnswerYes,
        TemplateId::AnswerNo,
        TemplateId::CannotDo,
        TemplateId::DontUnderstand,
    ];

    pub fn text(&self) -> &'static str {
        match self {
            TemplateId::AskNextTask => "Waiting for next task.",
            TemplateId::AskProperty => "Is {word} a color, size, or shape?",
            TemplateId::AskGoal => "What is the goal of {verb}?",
            TemplateId::AskNextAction => "What action should I take next?",
            TemplateId::AskPrepExample => {
                "I do not know the preposition {prep}. Please give me an example."
            }
            TemplateId::AskWordExample => "Please show me an example of {word}.",
            TemplateId::AskWhich => "Which {np}?",
            TemplateId::AskFind => "I cannot see the {np}. Which object is it?",
            TemplateId::Answer => "{answer}",
            TemplateId::AnswerUnknown => "I don't know.",
            TemplateId::AnswerYes => "Yes.",
            TemplateId::AnswerNo => "No.",
            TemplateId::CannotDo => "I cannot do that: {reason}.",
            TemplateId::DontUnderstand => "I do not understand.",
        }
    }

    /// True for agent utterances that wait for an instructor reply.
    pub fn expects_reply(&self) -> bool {
        matches!(
            self,
            TemplateId::AskProperty
                | TemplateId::AskGoal
                | TemplateId::AskNextAction
                | TemplateId::AskPrepExample
                | TemplateId::AskWordExample
                | TemplateId::AskWhich
                | TemplateId::AskFind
        )
    }
}

pub fn generate(template: TemplateId, bindings: &BTreeMap<String, String>) -> Result<String, LanguageError> {
    let text = template.text();
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').expect("templates are well formed") + open;
        let hole = &rest[open + 1..close];
        let value = bindings.get(hole).ok_or_else(|| LanguageError::MissingBinding {
            template,
            hole: hole.to_string(),
        })?;
        out.push_str(value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Inverse of [`generate`]: recovers the hole bindings from a rendered text.
pub fn match_template(template: TemplateId, text: &str) -> Option<BTreeMap<String, String>> {
    let pattern = template.text();
    let mut out = BTreeMap::new();
    let mut rest_pat = pattern;
    let mut rest = text;
    while let Some(open) = rest_pat.find('{') {
        rest = rest.strip_prefix(&rest_pat[..open])?;
        let close = rest_pat[open..].find('}')? + open;
        let hole = &rest_pat[open + 1..close];
        rest_pat = &rest_pat[close + 1..];
        // the literal after a hole decides where the value ends
        let lit_end = rest_pat.find('{').unwrap_or(rest_pat.len());
        let lit = &rest_pat[..lit_end];
        let end = if lit.is_empty() { rest.len() } else { rest.rfind(lit)? };
        out.insert(hole.to_string(), rest[..end].to_string());
        rest = &rest[end..];
    }
    (rest == rest_pat).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        let mut l = Lexicon::default();
        for w in ["red", "blue", "square", "circle", "triangle", "large"] {
            l.register_word(w, Pos::NounAdj).unwrap();
        }
        l
    }

    #[test]
    fn match_template_inverts_generate() {
        for t in TemplateId::ALL {
            let mut b = BTreeMap::new();
            for hole in ["word", "verb", "prep", "np", "answer", "reason"] {
                b.insert(hole.to_string(), format!("the {hole} of it"));
            }
            let text = generate(t, &b).unwrap();
            let back = match_template(t, &text).unwrap();
            assert_eq!(generate(t, &back).unwrap(), text);
            assert!(back.values().all(|v| v.starts_with("the ")));
        }
        assert!(match_template(TemplateId::AskGoal, "Which one?").is_none());
    }

    #[test]
    fn store_command_with_unknown_words() {
        let r = parse("Store the orange triangle", &lex());
        assert_eq!(r.category, Category::VerbCommand);
        assert_eq!(r.verb.as_deref(), Some("store"));
        let np = r.direct_object.unwrap();
        assert_eq!(np.attributes, vec!["orange", "triangle"]);
        assert_eq!(r.unknown_words, vec!["store", "orange"]);
    }

    #[test]
    fn descriptive_with_multiword_prep() {
        let r = parse("The square is left of the circle.", &lex());
        assert_eq!(r.category, Category::DescriptiveSentence);
        assert_eq!(r.subject.unwrap().attributes, vec!["square"]);
        assert_eq!(r.preps[0].prep, "left of");
        assert_eq!(r.preps[0].object.attributes, vec!["circle"]);
        let r = parse("The square is to the right of the circle", &lex());
        assert_eq!(r.preps[0].prep, "right of");
    }

    #[test]
    fn attribute_query_with_gesture() {
        let r = parse("What color is this?", &lex());
        assert_eq!(r.category, Category::AttributeQuery);
        assert_eq!(r.property, Some(PropertyKind::Color));
        assert!(r.subject.unwrap().gestural);
    }

    #[test]
    fn goal_description_splits_relation() {
        let r = parse("The goal is the orange triangle in the pantry", &lex());
        assert_eq!(r.category, Category::GoalDescription);
        assert_eq!(r.subject.unwrap().attributes, vec!["orange", "triangle"]);
        assert_eq!(r.preps.len(), 1);
        assert_eq!(r.preps[0].object.location(), Some(LocationName::Pantry));
    }

    #[test]
    fn property_answers() {
        for (text, word) in [("Color", None), ("a color", None), ("orange is a color", Some("orange"))] {
            let r = parse(text, &lex());
            assert_eq!(r.category, Category::PropertyAnswer, "{text}");
            assert_eq!(r.property, Some(PropertyKind::Color));
            assert_eq!(r.predicate.first().map(String::as_str), word);
        }
    }

    #[test]
    fn teaching_sentences() {
        let r = parse("This is orange", &lex());
        assert_eq!(r.category, Category::DescriptiveSentence);
        assert!(r.subject.as_ref().unwrap().gestural);
        assert_eq!(r.predicate, vec!["orange"]);
        let r = parse("This is in the garbage", &lex());
        assert_eq!(r.category, Category::DescriptiveSentence);
        assert_eq!(r.preps[0].prep, "in");
    }

    #[test]
    fn queries_and_answers() {
        let l = lex();
        let r = parse("Is the blue object to the right of the red object?", &l);
        assert_eq!(r.category, Category::SpatialQuery);
        assert_eq!(r.subject.unwrap().head.as_deref(), Some("object"));
        let r = parse("What is left of the square?", &l);
        assert_eq!(r.category, Category::SpatialQuery);
        assert!(r.subject.is_none());
        let r = parse("the one in the pantry", &l);
        assert_eq!(r.category, Category::WhichAnswer);
        assert_eq!(r.subject.unwrap().pp.unwrap().object.location(), Some(LocationName::Pantry));
        assert_eq!(parse("never mind", &l).category, Category::Cancel);
        assert_eq!(parse("yes", &l).polarity, Some(true));
        assert_eq!(parse("the red square", &l).category, Category::NpFragment);
    }

    #[test]
    fn seeded_verbs_and_pps() {
        let l = lex();
        let r = parse("Pick up the red triangle", &l);
        assert_eq!(r.verb.as_deref(), Some("pick up"));
        let r = parse("Put the red triangle in the pantry", &l);
        assert_eq!(r.verb.as_deref(), Some("put"));
        assert_eq!(r.preps[0].prep, "in");
        let r = parse("move the red block to the pantry", &l);
        assert_eq!(r.preps[0].prep, "in");
        assert_eq!(r.direct_object.unwrap().head.as_deref(), Some("block"));
    }

    #[test]
    fn every_token_keeps_a_slot() {
        let l = lex();
        for text in ["Store the orange triangle", "what is this", "blarg foo", "is this red"] {
            let r = parse(text, &l);
            let texts: Vec<&str> = r.tokens.iter().map(|t| t.text.as_str()).collect();
            assert_eq!(texts, tokenize(text));
        }
    }

    #[test]
    fn register_rules() {
        let mut l = Lexicon::default();
        assert_eq!(
            l.register_word("the", Pos::NounAdj),
            Err(LanguageError::ClosedClassCollision("the".into()))
        );
        l.register_word("orange", Pos::NounAdj).unwrap();
        let before = l.clone();
        l.register_word("orange", Pos::NounAdj).unwrap();
        assert_eq!(l, before);
        l.register_word("in", Pos::Preposition).unwrap();
    }

    #[test]
    fn templates() {
        let mut b = BTreeMap::new();
        b.insert("word".to_string(), "orange".to_string());
        assert_eq!(generate(TemplateId::AskProperty, &b).unwrap(), "Is orange a color, size, or shape?");
        assert!(matches!(
            generate(TemplateId::AskGoal, &b),
            Err(LanguageError::MissingBinding { .. })
        ));
        b.insert("verb".into(), "store".into());
        assert_eq!(generate(TemplateId::AskGoal, &b).unwrap(), "What is the goal of store?");
        assert_eq!(
            generate(TemplateId::AskNextAction, &BTreeMap::new()).unwrap(),
            "What action should I take next?"
        );
    }
}
