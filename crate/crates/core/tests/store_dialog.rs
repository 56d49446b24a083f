//! Teaching "store" from scratch and reusing it on another object.

use grounded_core::agent::{Agent, AgentConfig, Input, Output};
use grounded_core::dialog::LearningKind;
use grounded_core::language::TemplateId;
use grounded_core::world::{ObjectId, Scene, Workspace, WorldObject};

fn object(id: u32, pose: [f64; 2], color: [f64; 3], shape: [f64; 3]) -> WorldObject {
    WorldObject {
        id: ObjectId(id),
        pose: [pose[0], pose[1], 0.03],
        bbox: [0.06, 0.06, 0.06],
        color,
        size_class: 0.36,
        shape_descriptor: shape,
        graspable: true,
    }
}

fn scene() -> Scene {
    let mut s = Scene::empty(Workspace::default());
    s.objects.push(object(1, [0.5, 0.5], [1.0, 0.55, 0.0], [0.9, 0.1, 0.1]));
    // sits in the garbage
    s.objects.push(object(2, [0.75, 0.25], [0.9, 0.1, 0.1], [0.1, 0.9, 0.1]));
    s
}

struct Session {
    agent: Agent,
    world: Scene,
    log: Vec<Output>,
}

impl Session {
    fn new() -> Self {
        Session { agent: Agent::new(AgentConfig::default(), 7), world: scene(), log: Vec::new() }
    }

    fn say(&mut self, text: &str) -> Vec<Output> {
        self.send(Input::say(text))
    }

    fn click(&mut self, text: &str, id: u32) -> Vec<Output> {
        self.send(Input::with_click(text, ObjectId(id)))
    }

    fn send(&mut self, input: Input) -> Vec<Output> {
        let out = self.agent.cycle(&mut self.world, input);
        self.log.extend(out.clone());
        out
    }
}

fn last_ask(out: &[Output]) -> (Option<String>, TemplateId) {
    out.iter()
        .rev()
        .find_map(|o| match o {
            Output::Utterance { segment, template, .. } => Some((segment.clone(), *template)),
            _ => None,
        })
        .expect("agent said something")
}

fn teach_basics(s: &mut Session) {
    assert_eq!(last_ask(&s.click("This is a triangle", 1)).1, TemplateId::AskProperty);
    assert_eq!(last_ask(&s.say("Shape")).1, TemplateId::AskNextTask);
    s.click("This is a square", 2);
    s.say("Shape");
    s.click("This is red", 2);
    assert_eq!(last_ask(&s.say("Color")).1, TemplateId::AskNextTask);
}

#[test]
fn store_is_learned_through_nested_segments() {
    let mut s = Session::new();
    teach_basics(&mut s);

    let out = s.say("Store the orange triangle");
    assert_eq!(last_ask(&out), (Some("O11".into()), TemplateId::AskProperty));
    let out = s.say("Color");
    assert_eq!(last_ask(&out), (Some("G12".into()), TemplateId::AskGoal));
    let out = s.say("The goal is the orange triangle in the pantry");
    assert_eq!(last_ask(&out), (Some("P121".into()), TemplateId::AskPrepExample));
    assert_eq!(s.agent.stack.ids(), ["A1", "G12", "P121"]);
    let out = s.click("This is in the garbage", 2);
    assert_eq!(last_ask(&out), (Some("O13".into()), TemplateId::AskWordExample));
    let out = s.click("This is orange", 1);
    assert_eq!(last_ask(&out), (Some("A14".into()), TemplateId::AskNextAction));
    let out = s.say("Pick up the orange triangle");
    assert!(out.iter().any(|o| matches!(o, Output::Action { segment: Some(id), .. } if id == "E141")));
    assert_eq!(last_ask(&out), (Some("A14".into()), TemplateId::AskNextAction));
    let out = s.say("Put the orange triangle in the pantry");
    assert!(out.iter().any(|o| matches!(o, Output::Action { segment: Some(id), .. } if id == "E142")));
    let rules = out
        .iter()
        .filter(|o| matches!(o, Output::Learning { kind: LearningKind::RuleLearn, .. }))
        .count();
    assert_eq!(rules, 2);
    assert_eq!(last_ask(&out).1, TemplateId::AskNextTask);
    assert!(s.agent.stack.is_empty());
    let pantry = s.world.location(grounded_core::world::LocationName::Pantry).unwrap().region;
    let o1 = s.world.object(ObjectId(1)).unwrap();
    assert!(pantry.contains(o1.pose[0], o1.pose[1]));

    // the span the rules were compiled from holds just the two instructed actions
    let a14 = s.agent.stack.closed().iter().find(|seg| seg.id == "A14").unwrap();
    let start = a14.context.start_episode.unwrap();
    let span = s.agent.episodic.span(start, s.agent.episodic.len() - 1).unwrap();
    let acted: Vec<_> = span.iter().filter_map(|e| e.snapshot.action.as_ref()).collect();
    assert_eq!(acted.len(), 2);
    assert!(acted.iter().all(|a| a.instructed));
}

#[test]
fn learned_verb_generalizes_without_questions() {
    let mut s = Session::new();
    teach_basics(&mut s);
    s.say("Store the orange triangle");
    s.say("Color");
    s.say("The goal is the orange triangle in the pantry");
    s.click("This is in the garbage", 2);
    s.click("This is orange", 1);
    s.say("Pick up the orange triangle");
    s.say("Put the orange triangle in the pantry");

    let out = s.say("Store the red square");
    let actions = out.iter().filter(|o| matches!(o, Output::Action { .. })).count();
    assert_eq!(actions, 2, "{out:?}");
    assert_eq!(last_ask(&out).1, TemplateId::AskNextTask);
    let pantry = s.world.location(grounded_core::world::LocationName::Pantry).unwrap().region;
    let o2 = s.world.object(ObjectId(2)).unwrap();
    assert!(pantry.contains(o2.pose[0], o2.pose[1]));
    s.world.check_invariants().unwrap();
}
