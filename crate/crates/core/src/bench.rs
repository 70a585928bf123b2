//! Benchmark problem families. Encodings are described in docs/benchmarks.md.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::goal::{EventExpr, Gr1Goal, Literal};
use crate::lts::EventId;
use crate::problem::{ControlProblem, ProblemBuilder};

/// Local thinking steps per philosopher.
pub const DP_THINK_STEPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchSpec {
    Dp { n: usize },
    Tl { n: usize, k: usize },
    Random { n: usize, seed: u64 },
    Example3,
}

impl fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchSpec::Dp { n } => write!(f, "dp:{n}"),
            BenchSpec::Tl { n, k } => write!(f, "tl:{n}:{k}"),
            BenchSpec::Random { n, seed } => write!(f, "random:{n}:{seed}"),
            BenchSpec::Example3 => write!(f, "example3"),
        }
    }
}

impl FromStr for BenchSpec {
    type Err = Error;

    /// `dp:N`, `tl:N:K`, `random:N:SEED` or `example3`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<u64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Usage(format!("`{s}`: missing parameter")))?
                .parse::<u64>()
                .map_err(|_| Error::Usage(format!("`{s}`: bad number")))
        };
        let spec = match parts[0].to_ascii_lowercase().as_str() {
            "dp" if parts.len() == 2 => BenchSpec::Dp { n: num(1)? as usize },
            "tl" if parts.len() == 3 => BenchSpec::Tl {
                n: num(1)? as usize,
                k: num(2)? as usize,
            },
            "random" if parts.len() == 3 => BenchSpec::Random {
                n: num(1)? as usize,
                seed: num(2)?,
            },
            "example3" if parts.len() == 1 => BenchSpec::Example3,
            _ => return Err(Error::Usage(format!("unknown benchmark `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BenchSpec::Dp { n } if n < 2 => Err(Error::Usage("DP needs at least 2 philosophers".into())),
            BenchSpec::Tl { n, k } if n < 1 || k < 1 => Err(Error::Usage("TL needs n >= 1 and k >= 1".into())),
            BenchSpec::Random { n, .. } if n < 1 => Err(Error::Usage("RANDOM needs at least one part".into())),
            _ => Ok(()),
        }
    }
}

pub fn generate(spec: BenchSpec) -> Result<ControlProblem> {
    spec.validate()?;
    match spec {
        BenchSpec::Dp { n } => dining_philosophers(n),
        BenchSpec::Tl { n, k } => transfer_line(n, k),
        BenchSpec::Random { n, seed } => random_problem(n, seed),
        BenchSpec::Example3 => example3(),
    }
}

pub fn dining_philosophers(n: usize) -> Result<ControlProblem> {
    let mut b = ProblemBuilder::new();
    let mut goals = Vec::new();
    for i in 0..n {
        for k in 0..DP_THINK_STEPS {
            b.event(&format!("think{i}_{k}"), false);
        }
        b.event(&format!("takeL{i}"), true);
        b.event(&format!("takeR{i}"), true);
        goals.push(EventExpr::event(b.event(&format!("eat{i}"), false)));
        b.event(&format!("rel{i}"), false);
    }
    for i in 0..n {
        let names: Vec<String> = (0..=DP_THINK_STEPS).map(|k| format!("t{k}")).collect();
        let labels: Vec<String> = (0..DP_THINK_STEPS).map(|k| format!("think{i}_{k}")).collect();
        let (tl, tr, eat, rel) = (format!("takeL{i}"), format!("takeR{i}"), format!("eat{i}"), format!("rel{i}"));
        let mut edges: Vec<(&str, &str, &str)> = (0..DP_THINK_STEPS)
            .map(|k| (names[k].as_str(), labels[k].as_str(), names[k + 1].as_str()))
            .collect();
        edges.push((names[DP_THINK_STEPS].as_str(), tl.as_str(), "hasL"));
        edges.push(("hasL", tr.as_str(), "both"));
        edges.push(("both", eat.as_str(), "done"));
        edges.push(("done", rel.as_str(), "t0"));
        b.lts(&format!("Phil{i}"), "t0", &edges, &[])?;

        let right = (i + n - 1) % n;
        let (lt, lr) = (format!("takeL{i}"), format!("rel{i}"));
        let (rt, rr) = (format!("takeR{right}"), format!("rel{right}"));
        b.lts(
            &format!("Fork{i}"),
            "free",
            &[
                ("free", &lt, "byL"),
                ("byL", &lr, "free"),
                ("free", &rt, "byR"),
                ("byR", &rr, "free"),
            ],
            &[],
        )?;
    }
    b.build(Gr1Goal::new(vec![], goals))
}

pub fn transfer_line(n: usize, k: usize) -> Result<ControlProblem> {
    let mut b = ProblemBuilder::new();
    for i in 0..n {
        b.event(&format!("start{i}"), true);
        b.event(&format!("proc{i}"), false);
        b.event(&format!("finish{i}"), false);
    }
    b.event("test", true);
    let accept = b.event("accept", false);
    for i in 0..n {
        let (s, p, f) = (format!("start{i}"), format!("proc{i}"), format!("finish{i}"));
        b.lts(
            &format!("Machine{i}"),
            "idle",
            &[("idle", &s, "busy"), ("busy", &p, "done"), ("done", &f, "idle")],
            &[],
        )?;
        let take = if i + 1 < n { format!("start{}", i + 1) } else { "test".to_string() };
        let cells: Vec<String> = (0..=k).map(|c| format!("b{c}")).collect();
        let mut edges: Vec<(&str, &str, &str)> = Vec::new();
        for c in 0..k {
            edges.push((&cells[c], &f, &cells[c + 1]));
            edges.push((&cells[c + 1], &take, &cells[c]));
        }
        edges.push((&cells[k], &f, "overflow"));
        b.lts(&format!("Buffer{i}"), "b0", &edges, &[])?;
    }
    b.lts(
        "TestUnit",
        "idle",
        &[("idle", "test", "testing"), ("testing", "accept", "idle")],
        &[],
    )?;
    b.build(Gr1Goal::new(vec![], vec![EventExpr::event(accept)]))
}

/// Three components shaped like a small manufacturing cell: a machine with
/// a local two-step phase and a failure, triggered by the shared `u3`,
/// after which it raises `uA1` forever without finishing; a
/// second machine with a local step, and a third component that can issue
/// `u3` and may only start while the second machine is idle.
pub fn example3() -> Result<ControlProblem> {
    let mut b = ProblemBuilder::new();
    for c in ["c1", "c2", "c3", "cG1", "cG2"] {
        b.event(c, true);
    }
    for u in ["u2", "uA1", "u3", "u4"] {
        b.event(u, false);
    }
    b.lts(
        "M1",
        "s0",
        &[
            ("s0", "c1", "s1"),
            ("s1", "u2", "s2"),
            ("s2", "uA1", "s3"),
            ("s3", "cG1", "s0"),
            ("s0", "u3", "s0"),
            ("s2", "u3", "err"),
            ("err", "uA1", "err"),
        ],
        &[],
    )?;
    b.lts(
        "M2",
        "t0",
        &[("t0", "c2", "t1"), ("t1", "u4", "t2"), ("t2", "cG2", "t0"), ("t0", "c3", "t0")],
        &[],
    )?;
    b.lts("M3", "r0", &[("r0", "c3", "r1"), ("r1", "u3", "r0")], &[])?;
    let id = |n: &str| b.lookup(n).unwrap();
    let goal = Gr1Goal::new(
        vec![EventExpr::event(id("uA1"))],
        vec![EventExpr::event(id("cG1")), EventExpr::event(id("cG2"))],
    );
    b.build(goal)
}

/// `n` components of at most six states over at most eight events, with
/// overlapping alphabets and a goal of at most two assumptions and two
/// guarantees.
pub fn random_problem(n: usize, seed: u64) -> Result<ControlProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne: usize = rng.gen_range(3..=8);
    let mut b = ProblemBuilder::new();
    let mut events: Vec<(String, bool)> = Vec::new();
    for i in 0..ne {
        // keep both kinds present
        let ctrl = match i {
            0 => true,
            1 => false,
            _ => rng.gen_bool(0.5),
        };
        let name = format!("{}{i}", if ctrl { "c" } else { "u" });
        b.event(&name, ctrl);
        events.push((name, ctrl));
    }
    let mut used: Vec<usize> = Vec::new();
    for p in 0..n {
        let size = rng.gen_range(2..=ne.min(4));
        let mut idx: Vec<usize> = (0..ne).collect();
        idx.shuffle(&mut rng);
        let mut alpha: Vec<usize> = idx[..size].to_vec();
        if p > 0 && !alpha.iter().any(|e| used.contains(e)) {
            alpha[0] = *used.choose(&mut rng).unwrap();
            alpha.sort_unstable();
            alpha.dedup();
        }
        used.extend(alpha.iter().copied());
        let states: usize = rng.gen_range(2..=6);
        let names: Vec<String> = (0..states).map(|s| format!("s{s}")).collect();
        let mut edges: Vec<(String, String, String)> = Vec::new();
        for s in 0..states {
            let mut any = false;
            for &e in &alpha {
                if rng.gen_bool(0.45) {
                    let t = rng.gen_range(0..states);
                    edges.push((names[s].clone(), events[e].0.clone(), names[t].clone()));
                    any = true;
                }
            }
            if !any && rng.gen_bool(0.8) {
                let e = *alpha.choose(&mut rng).unwrap();
                let t = rng.gen_range(0..states);
                edges.push((names[s].clone(), events[e].0.clone(), names[t].clone()));
            }
        }
        let extra: Vec<&str> = alpha.iter().map(|&e| events[e].0.as_str()).collect();
        let edge_refs: Vec<(&str, &str, &str)> = edges.iter().map(|(a, e, c)| (a.as_str(), e.as_str(), c.as_str())).collect();
        b.lts(&format!("P{p}"), "s0", &edge_refs, &extra)?;
    }
    used.sort_unstable();
    used.dedup();
    let literal = |rng: &mut ChaCha8Rng| Literal {
        event: EventId(*used.choose(rng).unwrap() as u32),
        positive: !rng.gen_bool(0.15),
    };
    let expr = |rng: &mut ChaCha8Rng| {
        let mut clause = vec![literal(rng)];
        if rng.gen_bool(0.25) {
            clause.push(literal(rng));
        }
        EventExpr::from_clauses(vec![clause])
    };
    let na = rng.gen_range(0..=2);
    let ng = rng.gen_range(1..=2);
    let assumptions = (0..na).map(|_| expr(&mut rng)).collect();
    let guarantees = (0..ng).map(|_| expr(&mut rng)).collect();
    let problem = b.build(Gr1Goal::new(assumptions, guarantees))?;
    let parts = problem.parts.iter().map(|p| p.trim()).collect();
    ControlProblem::new(problem.events.clone(), parts, problem.goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::compose_all;

    #[test]
    fn spec_round_trip() {
        for s in ["dp:3", "tl:2:2", "random:3:7", "example3"] {
            assert_eq!(s.parse::<BenchSpec>().unwrap().to_string(), s);
        }
        assert!("dp:1".parse::<BenchSpec>().is_err());
        assert!("tl:2".parse::<BenchSpec>().is_err());
        assert!("nope".parse::<BenchSpec>().is_err());
    }

    #[test]
    fn dp_shapes() {
        let p = dining_philosophers(2).unwrap();
        assert_eq!(p.parts.len(), 4);
        assert!(compose_all(&p.parts).unwrap().state_count() <= 64);
        let s3 = compose_all(&dining_philosophers(3).unwrap().parts).unwrap().state_count();
        let s4 = compose_all(&dining_philosophers(4).unwrap().parts).unwrap().state_count();
        assert!(s4 > 2 * s3);
    }

    #[test]
    fn random_is_deterministic_and_bounded() {
        for seed in 0..50 {
            let a = random_problem(3, seed).unwrap();
            let b = random_problem(3, seed).unwrap();
            assert_eq!(a.goal, b.goal);
            assert!(a.events.len() <= 8);
            assert!(a.goal.assumptions.len() <= 2 && a.goal.guarantees.len() <= 2);
            for (x, y) in a.parts.iter().zip(&b.parts) {
                assert!(x.state_count() <= 6);
                assert!(crate::lts::isomorphic(x, y));
            }
        }
    }
}
