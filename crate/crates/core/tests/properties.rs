//! Property suites checked against independent oracles.

use std::collections::BTreeMap;

use proptest::prelude::*;

use grounded_core::agent::model::{ActionModel, SimState};
use grounded_core::dialog::{next_move, Progress, Purpose};
use grounded_core::language::{parse, tokenize, Lexicon};
use grounded_core::perception::{Classification, PerceptSymbol, PropertyClassifier, PropertyKind};
use grounded_core::spatial::{extract_primitives, Aabb, Axis, Body, Relation, SpatialComposition};
use grounded_core::world::{ArmState, ObjectId, PrimitiveAction, Scene, Workspace, WorldObject};

fn aabb() -> impl Strategy<Value = Aabb> {
    (
        prop::array::uniform3(0.0..1.0f64),
        prop::array::uniform3(0.01..0.3f64),
    )
        .prop_map(|(c, e)| Aabb::from_center(c, e))
}

/// Interval oracle: overlap of closed intervals, otherwise the side and gap.
fn interval_oracle(p: (f64, f64), r: (f64, f64)) -> (Relation, f64) {
    if p.0 <= r.1 && r.0 <= p.1 {
        (Relation::Aligned, 0.0)
    } else if p.0 > r.1 {
        (Relation::GreaterThan, p.0 - r.1)
    } else {
        (Relation::LessThan, r.0 - p.1)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn primitives_match_interval_oracle(p in aabb(), r in aabb()) {
        let prims = extract_primitives(&p, &r);
        for axis in Axis::ALL {
            let i = axis.index();
            let (rel, gap) = interval_oracle((p.min[i], p.max[i]), (r.min[i], r.max[i]));
            prop_assert_eq!(*prims.relations.get(axis), rel);
            prop_assert!((prims.distances.get(axis) - gap).abs() < 1e-12);
            prop_assert!(*prims.distances.get(axis) >= 0.0);
        }
    }

    #[test]
    fn strict_relations_are_antisymmetric(p in aabb(), r in aabb()) {
        let pr = extract_primitives(&p, &r);
        let rp = extract_primitives(&r, &p);
        for axis in Axis::ALL {
            let flipped = match pr.relations.get(axis) {
                Relation::GreaterThan => Relation::LessThan,
                Relation::LessThan => Relation::GreaterThan,
                Relation::Aligned => Relation::Aligned,
            };
            prop_assert_eq!(*rp.relations.get(axis), flipped);
        }
    }

    #[test]
    fn one_example_round_trips(p in aabb(), r in aabb()) {
        let ws = Workspace { w: 2.0, d: 2.0, h: 2.0 };
        let mut comp = SpatialComposition::new();
        comp.learn_example(&extract_primitives(&p, &r));
        let (pb, rb) = (Body { aabb: p, region: false }, Body { aabb: r, region: false });
        prop_assert!(comp.evaluate(&pb, &rb, &ws).unwrap());
    }

    #[test]
    fn more_examples_never_narrow_directions(ps in prop::collection::vec((aabb(), aabb()), 1..6), q in (aabb(), aabb())) {
        let ws = Workspace { w: 2.0, d: 2.0, h: 2.0 };
        let mut comp = SpatialComposition::new();
        let mut before: Option<[bool; 3]> = None;
        let qp = extract_primitives(&q.0, &q.1);
        for (p, r) in ps {
            comp.learn_example(&extract_primitives(&p, &r));
            let now = Axis::ALL.map(|a| comp.allowed.get(a).contains(qp.relations.get(a)));
            if let Some(b) = before {
                for i in 0..3 {
                    prop_assert!(!b[i] || now[i]);
                }
            }
            before = Some(now);
        }
        let _ = comp.evaluate(&Body { aabb: q.0, region: false }, &Body { aabb: q.1, region: false }, &ws);
    }

    #[test]
    fn projection_uses_allowed_relations(p in aabb(), r in aabb(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut comp = SpatialComposition::new();
        comp.learn_example(&extract_primitives(&p, &r));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let choice = comp.draw_choice(&mut rng);
        for axis in Axis::ALL {
            prop_assert!(comp.allowed.get(axis).contains(choice.get(axis)));
        }
    }
}

/// Brute-force weighted vote over the k nearest examples.
fn vote_oracle(
    examples: &[(Vec<f64>, usize)],
    query: &[f64],
    k: usize,
    sigma: f64,
    threshold: f64,
) -> Option<usize> {
    if examples.is_empty() {
        return None;
    }
    let dist = |a: &[f64]| a.iter().zip(query).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut taken = vec![false; examples.len()];
    let mut tally: BTreeMap<usize, f64> = BTreeMap::new();
    let mut first_seen: Vec<usize> = Vec::new();
    for (_, s) in examples {
        if !first_seen.contains(s) {
            first_seen.push(*s);
        }
    }
    for _ in 0..k.min(examples.len()) {
        // nearest untaken example, earliest on ties
        let mut best: Option<usize> = None;
        for (i, (f, _)) in examples.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| dist(f) < dist(&examples[b].0)) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        let d = dist(&examples[b].0);
        *tally.entry(examples[b].1).or_default() += (-(d * d) / (2.0 * sigma * sigma)).exp();
    }
    let total: f64 = tally.values().sum();
    if total <= 0.0 {
        return None;
    }
    let mut winner = None;
    let mut best_w = f64::NEG_INFINITY;
    for s in &first_seen {
        let w = tally.get(s).copied().unwrap_or(0.0);
        if w > best_w {
            best_w = w;
            winner = Some(*s);
        }
    }
    (best_w / total >= threshold).then_some(winner).flatten()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn classifier_matches_vote_oracle(
        examples in prop::collection::vec((prop::array::uniform3(0.0..1.0f64), 0usize..4), 0..20),
        query in prop::array::uniform3(0.0..1.0f64),
    ) {
        let mut c = PropertyClassifier::new(PropertyKind::Color);
        let syms: Vec<PerceptSymbol> = (1..=4).map(|n| PerceptSymbol::new(PropertyKind::Color, n)).collect();
        let ex: Vec<(Vec<f64>, usize)> = examples.iter().map(|(f, s)| (f.to_vec(), *s)).collect();
        for (f, s) in &ex {
            c.train(f, &syms[*s]).unwrap();
        }
        let expected = vote_oracle(&ex, &query, c.k, c.sigma, c.threshold);
        let got = c.classify(&query).unwrap();
        match (expected, got) {
            (None, Classification::Unknown) => {}
            (Some(s), Classification::Known { symbol, .. }) => prop_assert_eq!(symbol, syms[s].clone()),
            (e, g) => prop_assert!(false, "oracle {:?} vs classifier {:?}", e, g),
        }
    }
}

fn cube(id: u32, x: f64, y: f64, s: f64) -> WorldObject {
    WorldObject {
        id: ObjectId(id),
        pose: [x, y, s / 2.0],
        bbox: [s, s, s],
        color: [0.5; 3],
        size_class: s * s / 0.01,
        shape_descriptor: [0.5; 3],
        graspable: true,
    }
}

#[derive(Debug, Clone)]
enum Op {
    Point(u32),
    Pick(u32),
    Put(f64, f64),
    /// Put down on top of an object, possibly off-center.
    PutOn(u32, f64, f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u32..6).prop_map(Op::Point),
        (0u32..6).prop_map(Op::Pick),
        (-0.1..1.1f64, -0.1..1.1f64).prop_map(|(x, y)| Op::Put(x, y)),
        (1u32..5, -0.05..0.05f64, -0.05..0.05f64).prop_map(|(o, dx, dy)| Op::PutOn(o, dx, dy)),
    ]
}

fn to_action(scene: &Scene, op: &Op) -> PrimitiveAction {
    match *op {
        Op::Point(o) => PrimitiveAction::PointTo { object: ObjectId(o) },
        Op::Pick(o) => PrimitiveAction::PickUp { object: ObjectId(o) },
        Op::Put(x, y) => PrimitiveAction::PutDown { x, y },
        Op::PutOn(o, dx, dy) => {
            let p = scene.object(ObjectId(o)).map_or([0.5, 0.5, 0.0], |o| o.pose);
            PrimitiveAction::PutDown { x: p[0] + dx, y: p[1] + dy }
        }
    }
}

fn base_scene(sizes: &[f64]) -> Scene {
    let mut s = Scene::empty(Workspace::default());
    for (i, size) in sizes.iter().enumerate() {
        s.objects.push(cube(i as u32 + 1, 0.15 + 0.17 * i as f64, 0.5, *size));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// The agent's action model and the world agree on every fuzzed pair.
    #[test]
    fn action_model_matches_world(
        sizes in prop::collection::vec(0.04..0.12f64, 1..5),
        prefix in prop::collection::vec(op(), 0..8),
        last in op(),
    ) {
        let mut scene = base_scene(&sizes);
        for o in &prefix {
            if let Ok(next) = scene.apply_action(&to_action(&scene, o)) {
                scene = next;
            }
        }
        let action = to_action(&scene, &last);
        let state = SimState::from_scene(&scene);
        let world = scene.apply_action(&action);
        let model = ActionModel::apply(&state, &action);
        match (world, model) {
            (Ok(w), Ok(m)) => prop_assert!(SimState::from_scene(&w).approx_eq(&m, 1e-12), "{:?}", action),
            (Err(_), Err(_)) => {}
            (w, m) => prop_assert!(false, "{:?}: world {:?} model {:?}", action, w.map(|_| ()), m.map(|_| ())),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reachable_scenes_keep_invariants(
        sizes in prop::collection::vec(0.04..0.12f64, 1..5),
        ops in prop::collection::vec(op(), 0..30),
    ) {
        let mut scene = base_scene(&sizes);
        let n = scene.objects.len();
        for o in &ops {
            let tick = scene.tick;
            if let Ok(next) = scene.apply_action(&to_action(&scene, o)) {
                prop_assert!(next.tick > tick);
                scene = next;
            }
            prop_assert_eq!(scene.objects.len(), n);
            prop_assert!(scene.check_invariants().is_ok(), "{:?}", scene.check_invariants());
        }
    }

    #[test]
    fn pick_then_put_back_restores_pose(sizes in prop::collection::vec(0.04..0.12f64, 1..5), pick in 1u32..5) {
        let scene = base_scene(&sizes);
        let Some(obj) = scene.object(ObjectId(pick)).cloned() else { return Ok(()); };
        let held = scene.apply_action(&PrimitiveAction::PickUp { object: obj.id }).unwrap();
        prop_assert_eq!(held.arm, ArmState::Holding(obj.id));
        let back = held.apply_action(&PrimitiveAction::PutDown { x: obj.pose[0], y: obj.pose[1] }).unwrap();
        prop_assert_eq!(back.object(obj.id).unwrap().pose, obj.pose);
    }
}

fn utterance() -> impl Strategy<Value = String> {
    let words = prop::sample::select(vec![
        "the", "red", "blue", "orange", "block", "triangle", "is", "this", "in", "pantry",
        "left", "of", "pick", "up", "put", "store", "what", "color", "never", "mind", "goal",
        "a", "one", "near", "zorp", "wug", "to", "right", "garbage", "shape", "yes",
    ]);
    prop::collection::vec(words, 1..9).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn every_token_is_kept_once(text in utterance()) {
        let lex = Lexicon::default();
        let r = parse(&text, &lex);
        let toks = tokenize(&text);
        prop_assert_eq!(r.tokens.len(), toks.len());
        for (t, w) in r.tokens.iter().zip(&toks) {
            prop_assert_eq!(&t.text, w);
        }
        prop_assert_eq!(parse(&text, &lex), r);
    }
}

#[test]
fn policy_is_total() {
    let purposes = [
        Purpose::LearnVerb("v".into()),
        Purpose::LearnWordProperty("w".into()),
        Purpose::TeachWordExamples("w".into()),
        Purpose::LearnPrep("p".into()),
        Purpose::AcquireGoal("v".into()),
        Purpose::AcquireActions("v".into()),
        Purpose::ResolveReference("n".into()),
        Purpose::ExecuteCommand("c".into()),
        Purpose::AnswerQuery("q".into()),
        Purpose::Idle,
    ];
    for p in &purposes {
        for progress in Progress::samples() {
            let _ = next_move(Some(p), &progress);
        }
    }
    for progress in Progress::samples() {
        let _ = next_move(None, &progress);
    }
}
