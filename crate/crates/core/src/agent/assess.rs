//! Progress assessment for each segment purpose.

use std::collections::BTreeMap;

use super::ground::{relation_holds, GoalInstance, Grounder, Impasse};
use super::placement::{find_put_down, PlacementGoal};
use super::rules::{compile, select, ActionTemplate, CompileInput, LearnedRule};
use super::{Agent, PRIMITIVE_VERBS};
use crate::dialog::{Context, LearningKind, Originator, Progress, Purpose, Reply, Segment};
use crate::language::{Category, NounPhrase, ParseResult, Pos, TemplateId};
use crate::memory::{GoalPattern, GoalReference, GoalRelation, InstructedAction, SlotRole, WordCue};
use crate::spatial::{extract_primitives, SpatialComposition};
use crate::world::{ArmState, EntityId, ObjectId, PrimitiveAction, Scene};

fn one(key: &str, value: &str) -> BTreeMap<String, String> {
    BTreeMap::from([(key.to_string(), value.to_string())])
}

fn failed(reason: impl Into<String>) -> Progress {
    Progress::Failed { reason: reason.into() }
}

impl Agent {
    pub(super) fn assess(&mut self, world: &Scene) -> Progress {
        let Some(seg) = self.stack.top().cloned() else {
            return Progress::Waiting;
        };
        if seg.context.child_abandoned {
            match seg.purpose {
                Purpose::AcquireActions(_) => self.ctx().child_abandoned = false,
                Purpose::AnswerQuery(_) => {
                    return Progress::Reply { template: TemplateId::AnswerUnknown, bindings: BTreeMap::new() }
                }
                _ => return Progress::Abandoned,
            }
        }
        match &seg.purpose {
            Purpose::LearnWordProperty(w) => self.assess_word_property(&seg, w),
            Purpose::TeachWordExamples(k) => self.assess_word_examples(world, &seg, k),
            Purpose::LearnPrep(p) => self.assess_prep(world, &seg, p),
            Purpose::AcquireGoal(v) => self.assess_goal(world, &seg, v),
            Purpose::AcquireActions(_) => self.assess_actions(world, &seg),
            Purpose::ResolveReference(_) => self.assess_resolve(world, &seg),
            Purpose::LearnVerb(_) | Purpose::ExecuteCommand(_) => self.assess_command(world, &seg),
            Purpose::AnswerQuery(_) => self.assess_query(world, &seg),
            Purpose::Idle => Progress::Waiting,
        }
    }

    fn ctx(&mut self) -> &mut Context {
        &mut self.stack.top_mut().expect("assessing a segment").context
    }

    fn grounder<'a>(&'a self, state: &'a crate::agent::model::SimState, world: &'a Scene) -> Grounder<'a> {
        Grounder { knowledge: &self.knowledge, percepts: &self.percepts, state, locations: &world.locations }
    }

    fn symbol_of(&self, word: &str) -> Option<crate::perception::PerceptSymbol> {
        self.knowledge
            .semantic
            .peek_word(&WordCue { word: Some(word), ..Default::default() })
            .map(|m| m.symbol.clone())
    }

    /// Turns an impasse into a subgoal for the focused segment.
    fn subgoal(&mut self, impasse: Impasse) -> Progress {
        let purpose = match impasse {
            Impasse::UnknownWord(w) => Purpose::LearnWordProperty(w),
            Impasse::UnknownPrep(p) => Purpose::LearnPrep(p),
            Impasse::NoExamples(w) => Purpose::TeachWordExamples(w),
            Impasse::Unresolved { np, candidates } => {
                let key = np.render();
                self.pending_child = Some(Context { np: Some(np), candidates, ..Default::default() });
                Purpose::ResolveReference(key)
            }
        };
        Progress::Subgoal { purpose }
    }

    fn train_word(&mut self, word: &str, object: ObjectId) {
        if let Some(sym) = self.symbol_of(word) {
            if self.train(object, &sym) {
                self.learn(LearningKind::PerceptTrain, format!("{word} ({sym}): {object}"));
            }
        }
    }

    fn assess_word_property(&mut self, seg: &Segment, word: &str) -> Progress {
        let example = seg.context.utterance.as_ref().and_then(|u| u.selection);
        if let Some(reply) = self.ctx().reply.take() {
            if let (Category::PropertyAnswer, Some(kind)) = (reply.parse.category, reply.parse.property) {
                let sym = self.knowledge.classifiers.new_symbol(kind);
                if self.knowledge.semantic.store_word(word, &sym).is_err() {
                    return failed(format!("cannot store {word}"));
                }
                let _ = self.knowledge.lexicon.register_word(word, Pos::NounAdj);
                self.learn(LearningKind::WordMap, format!("{word} -> {sym} ({kind})"));
                if let Some(obj) = example {
                    self.train_word(word, obj);
                }
                return Progress::Satisfied;
            }
        }
        if self.has_word(word) {
            if let Some(obj) = example {
                self.train_word(word, obj);
            }
            return Progress::Satisfied;
        }
        Progress::NeedProperty { word: word.to_string() }
    }

    /// Object a descriptive utterance is about: the click, or its grounded subject.
    fn subject_object(
        &mut self,
        world: &Scene,
        reply: &Reply,
        bindings: &BTreeMap<String, EntityId>,
    ) -> Result<Option<ObjectId>, Impasse> {
        let Some(subject) = &reply.parse.subject else {
            return Ok(reply.selection);
        };
        if subject.gestural {
            return Ok(reply.selection);
        }
        let state = self.sim(world);
        match self.grounder(&state, world).ground(subject, reply.selection, bindings)? {
            EntityId::Object(o) => Ok(Some(o)),
            EntityId::Location(_) => Ok(None),
        }
    }

    fn assess_word_examples(&mut self, world: &Scene, seg: &Segment, key: &str) -> Progress {
        let words: Vec<String> = key.split(' ').map(str::to_string).collect();
        if seg.originator == Originator::Agent {
            let word = &words[0];
            let Some(reply) = self.ctx().reply.take() else {
                return Progress::NeedExample { word: word.clone() };
            };
            let object = match self.subject_object(world, &reply, &seg.context.bindings) {
                Ok(Some(o)) => o,
                _ => return Progress::NeedExample { word: word.clone() },
            };
            for w in &words {
                self.train_word(w, object);
            }
            return Progress::Satisfied;
        }
        let Some(utterance) = seg.context.utterance.clone() else {
            return failed("nothing to learn from");
        };
        let object = match self.subject_object(world, &utterance, &seg.context.bindings) {
            Ok(Some(o)) => o,
            Ok(None) => return failed("I do not know which object you mean"),
            Err(imp) => return self.subgoal(imp),
        };
        for w in words.iter().filter(|w| !seg.context.done.contains(w)) {
            self.ctx().done.push(w.clone());
            if !self.has_word(w) {
                let child = Reply { parse: utterance.parse.clone(), selection: Some(object) };
                self.pending_child = Some(Context { utterance: Some(child), ..Default::default() });
                return Progress::Subgoal { purpose: Purpose::LearnWordProperty(w.clone()) };
            }
            self.train_word(w, object);
        }
        Progress::Satisfied
    }

    fn assess_prep(&mut self, world: &Scene, seg: &Segment, prep: &str) -> Progress {
        let source = if seg.originator == Originator::Agent {
            seg.context.reply.clone()
        } else {
            seg.context.utterance.clone()
        };
        let need = || Progress::NeedPrepExample { prep: prep.to_string() };
        let Some(source) = source else {
            return need();
        };
        let Some(pp) = source.parse.preps.first().filter(|pp| pp.prep == prep) else {
            self.ctx().reply = None;
            return need();
        };
        let primary = match self.subject_object(world, &source, &seg.context.bindings) {
            Ok(Some(o)) => o,
            Ok(None) => {
                self.ctx().reply = None;
                return need();
            }
            Err(imp) => return self.subgoal(imp),
        };
        let state = self.sim(world);
        let reference = {
            let g = self.grounder(&state, world);
            match g.ground(&pp.object, None, &seg.context.bindings) {
                Ok(e) => e,
                Err(imp) => return self.subgoal(imp),
            }
        };
        let bodies = (
            super::ground::entity_body(&state, &world.locations, EntityId::Object(primary)),
            super::ground::entity_body(&state, &world.locations, reference),
        );
        let (Some(a), Some(b)) = bodies else {
            return failed("I cannot see those objects");
        };
        let mut comp = self
            .knowledge
            .semantic
            .peek_prep(prep)
            .map(|m| m.composition.clone())
            .unwrap_or_default();
        comp.learn_example(&extract_primitives(&a.aabb, &b.aabb));
        let n = comp.example_count;
        self.knowledge.semantic.store_prep(prep, comp);
        let _ = self.knowledge.lexicon.register_word(prep, Pos::Preposition);
        self.ctx().reply = None;
        self.learn(LearningKind::PrepLearn, format!("{prep}: {primary} vs {reference}, example {n}"));
        Progress::Satisfied
    }

    /// First unknown word or preposition, in utterance order.
    fn lexical_gap(
        &self,
        world: &Scene,
        leading: Option<&NounPhrase>,
        pps: &[(Option<&str>, &NounPhrase)],
    ) -> Option<Impasse> {
        let state = self.sim(world);
        let g = self.grounder(&state, world);
        if let Some(Err(imp)) = leading.map(|np| g.lexical_check(np)) {
            return Some(imp);
        }
        for (prep, np) in pps {
            if let Some(p) = prep {
                if self.knowledge.semantic.peek_prep(p).is_none() {
                    return Some(Impasse::UnknownPrep(p.to_string()));
                }
            }
            if let Err(imp) = g.lexical_check(np) {
                return Some(imp);
            }
        }
        None
    }

    fn assess_goal(&mut self, world: &Scene, seg: &Segment, verb: &str) -> Progress {
        let need = || Progress::NeedGoal { verb: verb.to_string() };
        let Some(reply) = seg.context.reply.clone() else {
            return need();
        };
        let (Some(subject), Some(pp)) = (&reply.parse.subject, reply.parse.preps.first()) else {
            self.ctx().reply = None;
            return need();
        };
        if let Some(imp) = self.lexical_gap(world, Some(subject), &[(Some(&pp.prep), &pp.object)]) {
            return self.subgoal(imp);
        }
        let (Some(op), Some(command)) = (seg.context.operator_id.clone(), seg.context.utterance.clone()) else {
            return failed("no command to learn a goal for");
        };
        let Some(net) = self.knowledge.semantic.network(&op).cloned() else {
            return failed("unknown operator");
        };
        let Some(primary_slot) = net.slot_of(SlotRole::DirectObject) else {
            return failed(format!("{verb} has no object to act on"));
        };
        let cmd_pp = command.parse.preps.first();
        let pp_slot = net.slot_of(SlotRole::PrepObject);
        let reference = match (pp.object.location(), cmd_pp, pp_slot) {
            (Some(loc), Some(c), Some(s)) if c.object.location() == Some(loc) => GoalReference::Slot(s),
            (Some(loc), _, _) => GoalReference::Location(loc),
            (None, Some(c), Some(s)) if c.object.render() == pp.object.render() || pp.object.gestural => {
                GoalReference::Slot(s)
            }
            _ => return failed("the goal must mention the objects of the command"),
        };
        let relation = match cmd_pp {
            Some(c) if c.prep == pp.prep => GoalRelation::FromCommand,
            _ => GoalRelation::Prep(pp.prep.clone()),
        };
        let pattern = GoalPattern { relation, primary_slot, reference };
        let detail = format!("{verb}: {}", serde_json::to_string(&pattern).unwrap_or_default());
        match self.knowledge.semantic.network_mut(&op) {
            Ok(n) => n.goal = Some(pattern),
            Err(e) => return failed(e.to_string()),
        }
        self.ctx().reply = None;
        self.learn(LearningKind::GoalLearn, detail);
        Progress::Satisfied
    }

    /// Grounds every argument slot of a learned verb and caches the result.
    fn ground_slots(&mut self, world: &Scene, seg: &Segment, command: &Reply) -> Result<Vec<EntityId>, Impasse> {
        let mut nps: Vec<&NounPhrase> = Vec::new();
        nps.extend(command.parse.direct_object.as_ref());
        nps.extend(command.parse.preps.first().map(|pp| &pp.object));
        let state = self.sim(world);
        let mut out = Vec::new();
        let mut found = Vec::new();
        {
            let g = self.grounder(&state, world);
            for np in nps {
                let e = g.ground(np, command.selection, &seg.context.bindings)?;
                found.push((np.render(), e));
                out.push(e);
            }
        }
        let ctx = self.ctx();
        for (k, e) in found {
            ctx.bindings.insert(k, e);
        }
        Ok(out)
    }

    fn goal_instance(&self, op: &str, slots: &[EntityId], command: &ParseResult) -> Result<GoalInstance, String> {
        let net = self.knowledge.semantic.network(op).ok_or("unknown operator")?;
        let goal = net.goal.as_ref().ok_or("no goal")?;
        let prep = match &goal.relation {
            GoalRelation::Prep(p) => p.clone(),
            GoalRelation::FromCommand => command.preps.first().ok_or("missing preposition")?.prep.clone(),
        };
        let primary = match slots.get(goal.primary_slot) {
            Some(EntityId::Object(o)) => *o,
            _ => return Err("the object to move is not an object".into()),
        };
        let reference = match goal.reference {
            GoalReference::Slot(s) => *slots.get(s).ok_or("missing argument")?,
            GoalReference::Location(l) => EntityId::Location(l),
        };
        Ok(GoalInstance { prep, primary, reference })
    }

    fn instantiate(&mut self, world: &Scene, rule: &LearnedRule, slots: &[EntityId], goal: &GoalInstance) -> Option<PrimitiveAction> {
        let state = self.sim(world);
        let samples = self.config.placement_samples;
        let place = |agent: &mut Agent, goal: PlacementGoal<'_>| {
            find_put_down(&state, &world.locations, &goal, samples, &mut agent.rng)
                .map(|(x, y)| PrimitiveAction::PutDown { x, y })
        };
        match &rule.action {
            ActionTemplate::PickUp { slot } => match slots.get(*slot)? {
                EntityId::Object(o) => Some(PrimitiveAction::PickUp { object: *o }),
                EntityId::Location(_) => None,
            },
            ActionTemplate::PutDownGoal => {
                let comp = self.knowledge.semantic.peek_prep(&goal.prep)?.composition.clone();
                place(self, PlacementGoal::Relation { comp: &comp, reference: goal.reference })
            }
            ActionTemplate::PutDownRelative { prep, reference } => {
                let comp = self.knowledge.semantic.peek_prep(prep)?.composition.clone();
                let reference = match reference {
                    GoalReference::Slot(s) => *slots.get(*s)?,
                    GoalReference::Location(l) => EntityId::Location(*l),
                };
                place(self, PlacementGoal::Relation { comp: &comp, reference })
            }
            ActionTemplate::PutDownFreeSpot => place(self, PlacementGoal::FreeSpot),
        }
    }

    /// Goal state of a learned command, or the rule-selected next action.
    fn learned_step(&mut self, world: &Scene, op: &str, slots: &[EntityId], goal: &GoalInstance) -> Step {
        let Some(comp) = self.knowledge.semantic.peek_prep(&goal.prep).map(|m| m.composition.clone()) else {
            return Step::Stuck;
        };
        let state = self.sim(world);
        let met = goal.holds(&comp, &state, &world.locations);
        if met {
            return Step::Done;
        }
        let Some(rule) = select(&self.knowledge.rules, op, &state, slots, met).cloned() else {
            return Step::Stuck;
        };
        match self.instantiate(world, &rule, slots, goal) {
            Some(action) => {
                self.pending_action = Some(InstructedAction {
                    action,
                    instructed: false,
                    object: state.arm.held().or(match action {
                        PrimitiveAction::PickUp { object } | PrimitiveAction::PointTo { object } => Some(object),
                        PrimitiveAction::PutDown { .. } => None,
                    }),
                    target: None,
                    arm_before: state.arm,
                });
                Step::Act(action)
            }
            None => Step::Stuck,
        }
    }

    fn assess_command(&mut self, world: &Scene, seg: &Segment) -> Progress {
        let Some(command) = seg.context.utterance.clone() else {
            return failed("no command");
        };
        let Some(verb) = command.parse.verb.clone() else {
            return failed("no verb");
        };
        let pps: Vec<(Option<&str>, &NounPhrase)> =
            command.parse.preps.iter().map(|pp| (Some(pp.prep.as_str()), &pp.object)).collect();
        if let Some(imp) = self.lexical_gap(world, command.parse.direct_object.as_ref(), &pps) {
            return self.subgoal(imp);
        }
        if PRIMITIVE_VERBS.contains(&verb.as_str()) {
            return self.assess_primitive(world, seg, &command, &verb);
        }
        let Some(op) = seg.context.operator_id.clone() else {
            return failed(format!("I do not know how to {verb}"));
        };
        let has_goal = self.knowledge.semantic.network(&op).is_some_and(|n| n.goal.is_some());
        if !has_goal {
            self.pending_child = Some(Context {
                operator_id: Some(op),
                utterance: Some(command),
                ..Default::default()
            });
            return Progress::Subgoal { purpose: Purpose::AcquireGoal(verb) };
        }
        let slots = match self.ground_slots(world, seg, &command) {
            Ok(s) => s,
            Err(imp) => return self.subgoal(imp),
        };
        let goal = match self.goal_instance(&op, &slots, &command.parse) {
            Ok(g) => g,
            Err(e) => return failed(e),
        };
        let step = match self.learned_step(world, &op, &slots, &goal) {
            Step::Act(_) if seg.context.steps >= self.config.max_autonomous_steps => Step::Stuck,
            s => s,
        };
        match step {
            Step::Done => Progress::Satisfied,
            Step::Act(action) => Progress::ActionReady { action },
            Step::Stuck => {
                let bindings = self.ctx().bindings.clone();
                self.pending_child = Some(Context {
                    operator_id: Some(op),
                    utterance: Some(command),
                    bindings,
                    start_episode: seg.context.start_episode,
                    ..Default::default()
                });
                Progress::Subgoal { purpose: Purpose::AcquireActions(verb) }
            }
        }
    }

    fn assess_primitive(&mut self, world: &Scene, seg: &Segment, command: &Reply, verb: &str) -> Progress {
        if seg.context.steps > 0 {
            return Progress::Satisfied;
        }
        let state = self.sim(world);
        let instructed = seg.originator == Originator::Instructor;
        let ground = |agent: &mut Agent, np: &NounPhrase| -> Result<EntityId, Impasse> {
            let g = agent.grounder(&state, world);
            g.ground(np, command.selection, &seg.context.bindings)
        };
        let dobj = match &command.parse.direct_object {
            Some(np) => match ground(self, np) {
                Ok(EntityId::Object(o)) => Some((o, np.render())),
                Ok(EntityId::Location(l)) => return failed(format!("the {l} cannot be moved")),
                Err(imp) => return self.subgoal(imp),
            },
            None => None,
        };
        let (action, target) = match verb {
            "pick up" | "point to" => {
                let Some((o, _)) = dobj else {
                    return failed(format!("{verb} what?"));
                };
                if verb == "point to" {
                    (PrimitiveAction::PointTo { object: o }, None)
                } else {
                    if state.arm == ArmState::Holding(o) {
                        return Progress::Satisfied;
                    }
                    (PrimitiveAction::PickUp { object: o }, None)
                }
            }
            "put down" | "put" => {
                let Some(held) = state.arm.held() else {
                    return failed("I am not holding anything");
                };
                if let Some((o, name)) = &dobj {
                    if *o != held {
                        return failed(format!("I am not holding the {name}"));
                    }
                }
                let pp = command.parse.preps.first();
                let (goal, target) = match (verb, pp) {
                    ("put", Some(pp)) => {
                        let reference = match ground(self, &pp.object) {
                            Ok(e) => e,
                            Err(imp) => return self.subgoal(imp),
                        };
                        let Some(m) = self.knowledge.semantic.peek_prep(&pp.prep) else {
                            return self.subgoal(Impasse::UnknownPrep(pp.prep.clone()));
                        };
                        (Some((m.composition.clone(), reference)), Some((pp.prep.clone(), reference)))
                    }
                    ("put", None) => return failed("put it where?"),
                    _ => (None, None),
                };
                let samples = self.config.placement_samples;
                let spot = match &goal {
                    Some((comp, reference)) => find_put_down(
                        &state,
                        &world.locations,
                        &PlacementGoal::Relation { comp, reference: *reference },
                        samples,
                        &mut self.rng,
                    ),
                    None => find_put_down(&state, &world.locations, &PlacementGoal::FreeSpot, samples, &mut self.rng),
                };
                let Some((x, y)) = spot else {
                    return failed("there is no room for it");
                };
                (PrimitiveAction::PutDown { x, y }, target)
            }
            _ => return failed(format!("I do not know how to {verb}")),
        };
        if let Err(e) = super::model::ActionModel::check(&state, &action) {
            return failed(e.to_string());
        }
        self.pending_action = Some(InstructedAction {
            action,
            instructed,
            object: dobj.map(|(o, _)| o),
            target,
            arm_before: state.arm,
        });
        Progress::ActionReady { action }
    }

    fn assess_actions(&mut self, world: &Scene, seg: &Segment) -> Progress {
        let ctx = &seg.context;
        let (Some(op), Some(command)) = (ctx.operator_id.clone(), ctx.utterance.clone()) else {
            return failed("no command to learn actions for");
        };
        let slots = match self.ground_slots(world, seg, &command) {
            Ok(s) => s,
            Err(imp) => return self.subgoal(imp),
        };
        let goal = match self.goal_instance(&op, &slots, &command.parse) {
            Ok(g) => g,
            Err(e) => return failed(e),
        };
        let Some(comp) = self.knowledge.semantic.peek_prep(&goal.prep).map(|m| m.composition.clone()) else {
            return failed(format!("I do not know {}", goal.prep));
        };
        let state = self.sim(world);
        if goal.holds(&comp, &state, &world.locations) {
            self.compile_rules(world, &op, &slots, &goal, &comp, ctx.start_episode.unwrap_or(0));
            return Progress::Satisfied;
        }
        if ctx.steps < self.config.max_autonomous_steps {
            if let Step::Act(action) = self.learned_step(world, &op, &slots, &goal) {
                return Progress::ActionReady { action };
            }
        }
        Progress::NeedNextAction
    }

    fn compile_rules(
        &mut self,
        world: &Scene,
        op: &str,
        slots: &[EntityId],
        goal: &GoalInstance,
        comp: &SpatialComposition,
        start: usize,
    ) {
        let end = self.episodic.len().saturating_sub(1);
        let Ok(episodes) = self.episodic.span(start, end) else {
            return;
        };
        let primary_slot = self
            .knowledge
            .semantic
            .network(op)
            .and_then(|n| n.goal.as_ref())
            .map_or(0, |g| g.primary_slot);
        let input = CompileInput {
            operator_id: op,
            bindings: slots,
            primary_slot,
            goal,
            comp,
            locations: &world.locations,
            workspace: world.workspace,
            episodes,
        };
        let compiled = match compile(&input) {
            Ok(r) => r,
            Err(e) => {
                self.log_event(crate::dialog::EventKind::Dialog {
                    speaker: crate::dialog::Speaker::Agent,
                    category: "internal".into(),
                    text: e.to_string(),
                });
                return;
            }
        };
        for mut rule in compiled {
            if self.knowledge.rules.iter().any(|r| r.same_as(&rule)) {
                continue;
            }
            self.knowledge.next_rule += 1;
            rule.id = format!("r{}", self.knowledge.next_rule);
            let detail = serde_json::to_string(&rule).unwrap_or_default();
            self.knowledge.rules.push(rule);
            self.learn(LearningKind::RuleLearn, detail);
        }
    }

    fn assess_resolve(&mut self, world: &Scene, seg: &Segment) -> Progress {
        let ctx = &seg.context;
        let Some(np) = ctx.np.clone() else {
            return failed("nothing to resolve");
        };
        if let Some(reply) = self.ctx().reply.take() {
            let chosen = match (&reply.parse.subject, reply.selection) {
                (Some(s), Some(sel)) if s.gestural => Some(sel),
                (None, Some(sel)) => Some(sel),
                (Some(s), sel) => {
                    let state = self.sim(world);
                    let g = self.grounder(&state, world);
                    match g.candidates(s, sel, &ctx.bindings) {
                        Ok(c) => {
                            let c: Vec<ObjectId> = if ctx.candidates.is_empty() {
                                c
                            } else {
                                c.into_iter().filter(|o| ctx.candidates.contains(o)).collect()
                            };
                            match c.as_slice() {
                                [one] => Some(*one),
                                _ => None,
                            }
                        }
                        Err(_) => None,
                    }
                }
                (None, None) => None,
            };
            if let Some(object) = chosen {
                for w in &np.attributes {
                    let Some(sym) = self.symbol_of(w) else { continue };
                    let seen = self.percepts.iter().find(|p| p.id == object).map(|p| p.symbols[sym.kind().index()].clone());
                    if seen.flatten().as_ref() != Some(&sym) {
                        self.train_word(w, object);
                    }
                }
                self.ctx().result = Some(EntityId::Object(object));
                return Progress::Satisfied;
            }
        }
        let name = np.render();
        if ctx.candidates.is_empty() {
            Progress::NeedLocate { np: name }
        } else {
            Progress::NeedDisambiguation { np: name }
        }
    }

    fn assess_query(&mut self, world: &Scene, seg: &Segment) -> Progress {
        let Some(q) = seg.context.utterance.clone() else {
            return failed("no question");
        };
        let state = self.sim(world);
        let answer = |text: String| Progress::Reply { template: TemplateId::Answer, bindings: one("answer", &text) };
        let unknown = Progress::Reply { template: TemplateId::AnswerUnknown, bindings: BTreeMap::new() };
        let yes_no = |b: bool| Progress::Reply {
            template: if b { TemplateId::AnswerYes } else { TemplateId::AnswerNo },
            bindings: BTreeMap::new(),
        };
        match q.parse.category {
            Category::AttributeQuery => {
                let Some(subject) = &q.parse.subject else {
                    return unknown;
                };
                let object = match self.grounder(&state, world).ground(subject, q.selection, &seg.context.bindings) {
                    Ok(EntityId::Object(o)) => o,
                    Ok(EntityId::Location(l)) => return answer(l.to_string()),
                    Err(Impasse::UnknownWord(_) | Impasse::NoExamples(_)) => return unknown,
                    Err(imp) => return self.subgoal(imp),
                };
                let Some(p) = self.percepts.iter().find(|p| p.id == object) else {
                    return unknown;
                };
                if let Some(kind) = q.parse.property {
                    let word = p.symbols[kind.index()].as_ref().and_then(|s| {
                        self.knowledge
                            .semantic
                            .peek_word(&WordCue { symbol: Some(s), ..Default::default() })
                            .map(|m| m.word.clone())
                    });
                    return word.map_or(unknown, answer);
                }
                if let Some(word) = q.parse.predicate.first() {
                    let Some(sym) = self.symbol_of(word) else {
                        return unknown;
                    };
                    return match &p.symbols[sym.kind().index()] {
                        Some(s) => yes_no(*s == sym),
                        None => unknown,
                    };
                }
                let words = self.describe(object);
                if words.is_empty() {
                    unknown
                } else {
                    answer(words.join(" "))
                }
            }
            Category::SpatialQuery => {
                let Some(pp) = q.parse.preps.first() else {
                    return unknown;
                };
                let subject_np = q.parse.subject.as_ref();
                if let Some(imp) = self.lexical_gap(world, subject_np, &[(None, &pp.object)]) {
                    return match imp {
                        Impasse::UnknownWord(_) => unknown,
                        other => self.subgoal(other),
                    };
                }
                let Some(comp) = self.knowledge.semantic.peek_prep(&pp.prep).map(|m| m.composition.clone()) else {
                    return self.subgoal(Impasse::UnknownPrep(pp.prep.clone()));
                };
                let g = self.grounder(&state, world);
                let reference = match g.ground(&pp.object, q.selection, &seg.context.bindings) {
                    Ok(e) => e,
                    Err(imp) => return self.subgoal(imp),
                };
                match subject_np {
                    Some(np) => {
                        let g = self.grounder(&state, world);
                        match g.ground(np, q.selection, &seg.context.bindings) {
                            Ok(a) => yes_no(relation_holds(&comp, &state, &world.locations, a, reference)),
                            Err(imp) => self.subgoal(imp),
                        }
                    }
                    None => {
                        let names: Vec<String> = self
                            .percepts
                            .iter()
                            .filter(|p| {
                                relation_holds(&comp, &state, &world.locations, EntityId::Object(p.id), reference)
                            })
                            .map(|p| {
                                let w = self.describe(p.id);
                                if w.is_empty() { p.id.to_string() } else { format!("the {}", w.join(" ")) }
                            })
                            .collect();
                        if names.is_empty() {
                            answer("nothing".into())
                        } else {
                            answer(names.join(" and "))
                        }
                    }
                }
            }
            _ => unknown,
        }
    }
}

enum Step {
    Done,
    Act(PrimitiveAction),
    Stuck,
}
