//! Fixed instances with hand-checked or frozen expectations.

use std::fs;
use std::path::PathBuf;

use modsynth::bench::{dining_philosophers, example3, transfer_line};
use modsynth::engine::{comp_synthesis, local_alphabet, monolithic_synthesis, partial_synthesis, EngineOptions, FirstTwo, PartialOutcome, SynthesisTuple};
use modsynth::export::to_dot;
use modsynth::format::{parse_problem, print_problem};
use modsynth::goal::{goal_alphabet, project, wrap_mu, EventExpr, Gr1Goal, Literal};
use modsynth::lts::{compose_all, isomorphic, EventSet};
use modsynth::problem::ControlProblem;
use modsynth::soe::{self_loop_property, verify_soe};
use modsynth::verify::check_solution;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn ids(p: &ControlProblem, names: &[&str]) -> EventSet {
    names.iter().map(|n| p.events.lookup(n).unwrap()).collect()
}

#[test]
fn projection_without_cg1_keeps_cg2() {
    let p = example3().unwrap();
    let e = |n| p.events.lookup(n).unwrap();
    let mut target: EventSet = p.events.ids().collect();
    target.remove(&e("cG1"));
    let projected = project(&p.goal, &target);
    assert_eq!(
        projected,
        Gr1Goal::new(vec![EventExpr::event(e("uA1"))], vec![EventExpr::event(e("cG2"))])
    );
    assert_eq!(projected.display(&p.events), "goal assume uA1 guarantee cG2");
}

#[test]
fn mu_adds_one_joint_assumption() {
    let p = example3().unwrap();
    let mu = ids(&p, &["u2", "uA1", "c2"]);
    let flat = wrap_mu(&p.goal, &mu).flatten();
    let expected = EventExpr::from_clauses(
        mu.iter()
            .map(|&event| vec![Literal { event, positive: false }])
            .collect(),
    );
    assert_eq!(flat.assumptions.len(), 2);
    assert!(flat.assumptions.contains(&expected));
    assert_eq!(flat.guarantees, p.goal.guarantees);
}

#[test]
fn first_step_prunes_shared_u3_into_bottom() {
    let p = example3().unwrap();
    let opts = EngineOptions {
        record: true,
        ..Default::default()
    };
    let (mut stats, mut records) = (Vec::new(), Vec::new());
    let PartialOutcome::Next(t) = partial_synthesis(&SynthesisTuple::initial(&p), &[0, 1], &p, &opts, &mut stats, &mut records).unwrap() else {
        panic!("first step must succeed");
    };
    let rec = &records[0];
    let cont = &rec.controlled_subplant;
    let sink = cont.deadlock_sink().expect("u3 is pruned somewhere");
    let u3 = p.events.lookup("u3").unwrap();
    let into_sink: Vec<_> = cont.edges().filter(|&(_, _, d)| d == sink).collect();
    assert!(!into_sink.is_empty());
    assert!(into_sink.iter().all(|&(_, e, _)| e == u3));
    assert!(cont.out(sink).is_empty());
    // M1 is at s2 in the states that lost u3: uA1 leaves only s2 once err is gone
    let ua1 = p.events.lookup("uA1").unwrap();
    let c1 = p.events.lookup("c1").unwrap();
    for &(s, _, _) in &into_sink {
        assert!(cont.is_enabled(s, ua1) && !cont.is_enabled(s, c1), "{}", cont.state_name(s));
    }
    assert_eq!(into_sink.len(), 3);

    // tuple after one step: M3 and the quotient, one safe controller
    assert_eq!(t.plants.len(), 2);
    assert_eq!(t.plants[0].name(), "M3");
    assert_eq!(t.safe_controllers.len(), 1);
    assert!(t.mu.is_subset(&rec.upsilon));
    assert!(verify_soe(cont, &rec.partition, &rec.upsilon));
    assert!(self_loop_property(&rec.quotient, &rec.upsilon));
    assert!(rec.quotient.state_count() < cont.state_count());
}

#[test]
fn example3_locals() {
    let p = example3().unwrap();
    let (sp, rest) = (&p.parts[..2], &p.parts[2..]);
    let ups = local_alphabet(sp, rest, &p.goal, &EventSet::new());
    assert_eq!(ups, ids(&p, &["u2", "u4"]));
    // the plain set difference, computed directly
    let sigma_sp: EventSet = sp.iter().flat_map(|l| l.alphabet().iter().copied()).collect();
    let sigma_rest: EventSet = rest.iter().flat_map(|l| l.alphabet().iter().copied()).collect();
    let g = goal_alphabet(&p.goal);
    let plain: EventSet = sigma_sp.iter().copied().filter(|e| !sigma_rest.contains(e) && !g.contains(e)).collect();
    assert_eq!(plain, ids(&p, &["c1", "c2", "u2", "u4"]));
    assert!(ups.is_subset(&plain));
}

#[test]
fn example3_is_a_two_controller_solution() {
    let p = example3().unwrap();
    let r = comp_synthesis(&p, &FirstTwo, &EngineOptions::default()).unwrap();
    let b = r.bundle.as_ref().unwrap();
    assert_eq!(b.controllers.len(), 2);
    assert_eq!(b.controllers[0].name(), "safe0");
    assert_eq!(b.controllers[1].name(), "live");
    assert!(check_solution(&p, &b.controllers).unwrap().ok());
    let mono = monolithic_synthesis(&p, usize::MAX).unwrap();
    assert!(r.max_subplant() < mono.plant_states);
    // frozen from the first run of this encoding
    assert_eq!(mono.plant_states, 30);
    assert_eq!(r.max_subplant(), 19);
}

#[test]
fn dp2_small_and_realizable() {
    let p = dining_philosophers(2).unwrap();
    assert_eq!(p.parts.len(), 4);
    let plant = compose_all(&p.parts).unwrap();
    assert!(plant.state_count() <= 64);
    let mono = monolithic_synthesis(&p, usize::MAX).unwrap();
    assert!(check_solution(&p, std::slice::from_ref(mono.verdict.controller().unwrap())).unwrap().ok());
    let comp = comp_synthesis(&p, &FirstTwo, &EngineOptions::default()).unwrap();
    assert_eq!(comp.bundle.as_ref().unwrap().controllers.len(), comp.stats.len());
}

#[test]
fn dp_grows_exponentially() {
    let size = |n| compose_all(&dining_philosophers(n).unwrap().parts).unwrap().state_count();
    let (s3, s4) = (size(3), size(4));
    assert!(s4 > 2 * s3, "{s3} -> {s4}");
}

#[test]
fn tl_overflow_is_avoided() {
    let p = transfer_line(2, 1).unwrap();
    let r = comp_synthesis(&p, &FirstTwo, &EngineOptions::default()).unwrap();
    assert!(check_solution(&p, &r.bundle.unwrap().controllers).unwrap().ok());
}

#[test]
fn golden_corpus_round_trips() {
    let mut seen = 0;
    for entry in fs::read_dir(golden("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "mds") {
            continue;
        }
        seen += 1;
        let text = fs::read_to_string(&path).unwrap();
        let a = parse_problem(&text).unwrap();
        let printed = print_problem(&a);
        let b = parse_problem(&printed).unwrap();
        assert_eq!(*a.events, *b.events, "{}", path.display());
        assert_eq!(a.goal, b.goal);
        assert_eq!(a.parts.len(), b.parts.len());
        for (x, y) in a.parts.iter().zip(&b.parts) {
            assert_eq!(x.name(), y.name());
            assert_eq!(x.alphabet(), y.alphabet());
            assert!(isomorphic(x, y), "{}: {}", path.display(), x.name());
        }
        assert_eq!(print_problem(&b), printed);
    }
    assert!(seen >= 5);
}

#[test]
fn dot_goldens() {
    for name in ["example3", "handwritten"] {
        let p = parse_problem(&fs::read_to_string(golden(&format!("{name}.mds"))).unwrap()).unwrap();
        let dot: Vec<String> = p.parts.iter().map(to_dot).collect();
        let want = fs::read_to_string(golden(&format!("{name}.dot"))).unwrap();
        assert_eq!(dot.join("\n"), want);
    }
}
