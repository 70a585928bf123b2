//! Monolithic and compositional synthesis.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goal::{goal_alphabet, project_observable, wrap_mu, EffectiveGoal, EventExpr, Gr1Goal};
use crate::lts::{compose_all_bounded, EventSet, Lts, StateId};
use crate::problem::ControlProblem;
use crate::soe::{quotient_deterministic, HidingContext, Partition};
use crate::solver::{extract_live_controller, extract_safe_controller, solve_gr1, SolveOptions, Verdict};

pub use crate::verify::DEFAULT_BUDGET;

/// Chooses which plant components to compose next.
pub trait Heuristic {
    /// Indices into `plants`; at least two unless `plants` has fewer.
    fn pick(&self, plants: &[Lts]) -> Vec<usize>;
}

/// Always the first two components.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstTwo;

impl Heuristic for FirstTwo {
    fn pick(&self, plants: &[Lts]) -> Vec<usize> {
        (0..plants.len().min(2)).collect()
    }
}

pub fn heuristic_first_two() -> FirstTwo {
    FirstTwo
}

#[derive(Clone, Copy, Debug)]
pub struct EngineOptions {
    /// Upper bound on the states of any composed LTS.
    pub budget: usize,
    /// Adds every hidden event to μ, not just those on collapsed loops.
    pub strict_mu: bool,
    /// Keeps controlled subplants and partitions for inspection.
    pub record: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            strict_mu: false,
            record: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterStats {
    pub iter: usize,
    pub subplant_states: usize,
    pub winning_states: usize,
    /// `None` for the final live step.
    pub quotient_states: Option<usize>,
    pub mu: usize,
    pub millis: u64,
}

/// One minimization step, kept when [`EngineOptions::record`] is set.
#[derive(Clone, Debug)]
pub struct MinimizationRecord {
    pub controlled_subplant: Lts,
    pub partition: Partition,
    pub upsilon: EventSet,
    pub quotient: Lts,
    pub mu_prime: EventSet,
}

/// The remaining plant, the safe controllers so far, and μ.
#[derive(Clone, Debug)]
pub struct SynthesisTuple {
    pub plants: Vec<Lts>,
    pub safe_controllers: Vec<Lts>,
    pub mu: EventSet,
}

impl SynthesisTuple {
    pub fn initial(problem: &ControlProblem) -> Self {
        Self {
            plants: problem.parts.clone(),
            safe_controllers: Vec::new(),
            mu: EventSet::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolutionBundle {
    pub controllers: Vec<Lts>,
    pub stats: Vec<IterStats>,
}

#[derive(Clone, Debug)]
pub struct CompResult {
    pub bundle: Option<SolutionBundle>,
    pub stats: Vec<IterStats>,
    pub records: Vec<MinimizationRecord>,
}

impl CompResult {
    pub fn is_realizable(&self) -> bool {
        self.bundle.is_some()
    }

    /// States of the largest LTS a game was solved on.
    pub fn max_subplant(&self) -> usize {
        self.stats.iter().map(|s| s.subplant_states).max().unwrap_or(0)
    }
}

pub enum PartialOutcome {
    Next(SynthesisTuple),
    Unrealizable,
}

/// Adds `(s, l, ⊥)` for every shared uncontrollable `l` that `subplant`
/// enables at `s` but `safe` does not.
pub fn controlled_subplant(
    safe: &Lts,
    safe_to_subplant: &[StateId],
    subplant: &Lts,
    omega_u: &EventSet,
) -> Result<Lts> {
    if safe_to_subplant.len() != safe.state_count() {
        return Err(Error::Internal("safe controller does not match its subplant".into()));
    }
    let mut out = safe.clone();
    let sink = out.add_state();
    for (s, &orig) in safe_to_subplant.iter().enumerate() {
        if orig >= subplant.state_count() {
            return Err(Error::Internal("safe controller state outside subplant".into()));
        }
        for l in omega_u {
            if subplant.is_enabled(orig, *l) && !safe.is_enabled(s, *l) {
                out.add_transition(s, *l, sink)?;
            }
        }
    }
    out.set_deadlock_sink(Some(sink));
    let mut out = out.trim();
    if out.find_deadlocks().is_empty() {
        out.set_deadlock_sink(None);
    }
    Ok(out)
}

/// Events of `sp` that no other component and no part of the goal mention,
/// outside μ, uncontrollable, and satisfying no assumption or guarantee.
pub fn local_alphabet(sp: &[Lts], rest: &[Lts], goal: &Gr1Goal, mu: &EventSet) -> EventSet {
    let sigma_sp: EventSet = sp.iter().flat_map(|l| l.alphabet().iter().copied()).collect();
    let sigma_rest: EventSet = rest.iter().flat_map(|l| l.alphabet().iter().copied()).collect();
    let g_alpha = goal_alphabet(goal);
    let Some(table) = sp.first().map(|l| l.events().clone()) else {
        return EventSet::new();
    };
    sigma_sp
        .into_iter()
        .filter(|e| !sigma_rest.contains(e) && !g_alpha.contains(e) && !mu.contains(e))
        .filter(|&e| !table.is_controllable(e))
        .filter(|&e| {
            goal.vacuous
                || (!goal.assumptions.iter().any(|a| a.eval(e)) && !goal.guarantees.iter().any(|g| g.eval(e)))
        })
        .collect()
}

/// Whether a run in which `sp` stops while the rest keeps going could
/// satisfy the goal. Decides if the safe-controller game may idle.
fn idle_may_win(outside: &EventSet, goal: &Gr1Goal, mu: &EventSet) -> bool {
    if outside.is_empty() {
        return false;
    }
    if goal.vacuous || goal.guarantees.is_empty() {
        return true;
    }
    let mu_term = EventExpr::none_of(mu);
    let assumptions_forced = outside
        .iter()
        .all(|&e| goal.assumptions.iter().all(|a| a.eval(e)) && mu_term.eval(e));
    let some_guarantee_dead = goal.guarantees.iter().any(|g| outside.iter().all(|&e| !g.eval(e)));
    !(assumptions_forced && some_guarantee_dead)
}

pub fn partial_synthesis(
    t: &SynthesisTuple,
    idx: &[usize],
    problem: &ControlProblem,
    opts: &EngineOptions,
    stats: &mut Vec<IterStats>,
    records: &mut Vec<MinimizationRecord>,
) -> Result<PartialOutcome> {
    let started = Instant::now();
    let selected: Vec<Lts> = idx.iter().map(|&i| t.plants[i].clone()).collect();
    let rest: Vec<Lts> = (0..t.plants.len())
        .filter(|i| !idx.contains(i))
        .map(|i| t.plants[i].clone())
        .collect();
    let m = compose_all_bounded(&selected, opts.budget)?;
    let sigma_m = m.alphabet().clone();
    let sigma_rest: EventSet = rest.iter().flat_map(|l| l.alphabet().iter().copied()).collect();
    let universe: EventSet = sigma_m.union(&sigma_rest).copied().collect();
    let outside: EventSet = sigma_rest.difference(&sigma_m).copied().collect();
    let table = problem.events.clone();

    let phi = &problem.goal;
    let upsilon = local_alphabet(&selected, &rest, phi, &t.mu);
    let mut phi_p = project_observable(phi, &sigma_m, &universe);
    let upsilon: EventSet = upsilon
        .into_iter()
        .filter(|&e| !phi_p.guarantees.iter().any(|g| g.eval(e)))
        .collect();
    if !phi.vacuous && phi.assumptions.is_empty() && !phi.guarantees.is_empty() && !upsilon.is_empty() {
        phi_p.guarantees.push(EventExpr::none_of(&upsilon));
    }
    let mu_m: EventSet = t.mu.intersection(&sigma_m).copied().collect();
    let goal = wrap_mu(&phi_p, &mu_m);

    let omega_u: EventSet = sigma_m
        .intersection(&sigma_rest)
        .copied()
        .filter(|&e| !table.is_controllable(e))
        .collect();
    let ext_ctrl: EventSet = table.controllable_set().union(&omega_u).copied().collect();
    let idle = idle_may_win(&outside, phi, &t.mu);
    let (verdict, region) = extract_safe_controller(&m, &ext_ctrl, &goal, SolveOptions { idle });
    let winning = region.states.count();
    let Verdict::Realizable(_) = verdict else {
        stats.push(IterStats {
            iter: stats.len(),
            subplant_states: m.state_count(),
            winning_states: winning,
            quotient_states: None,
            mu: t.mu.len(),
            millis: started.elapsed().as_millis() as u64,
        });
        return Ok(PartialOutcome::Unrealizable);
    };
    let sub = m.induced_subgraph(&region.states)?;
    let mut safe = sub.lts;
    safe.set_name(format!("safe{}", t.safe_controllers.len()));
    let cont = controlled_subplant(&safe, &sub.new_to_old, &m, &omega_u)?;

    let unshared: EventSet = sigma_m.difference(&sigma_rest).copied().collect();
    let ctx = HidingContext::new(&cont, &upsilon).with_unblockable(&cont, &unshared);
    let min = quotient_deterministic(&cont, &ctx);
    let mut q = min.lts.clone();
    q.set_name(format!("q{}", t.safe_controllers.len()));
    let mut mu = t.mu.clone();
    mu.extend(min.mu_prime.iter().copied());
    if opts.strict_mu {
        mu.extend(min.upsilon.iter().copied());
    }
    stats.push(IterStats {
        iter: stats.len(),
        subplant_states: m.state_count(),
        winning_states: winning,
        quotient_states: Some(q.state_count()),
        mu: mu.len(),
        millis: started.elapsed().as_millis() as u64,
    });
    if opts.record {
        records.push(MinimizationRecord {
            controlled_subplant: cont,
            partition: min.partition,
            upsilon: min.upsilon,
            quotient: q.clone(),
            mu_prime: min.mu_prime,
        });
    }
    let mut plants = rest;
    plants.push(q);
    let mut safe_controllers = t.safe_controllers.clone();
    safe_controllers.push(safe);
    Ok(PartialOutcome::Next(SynthesisTuple {
        plants,
        safe_controllers,
        mu,
    }))
}

/// Solves the live problem on everything left in `t`.
pub fn finish(t: &SynthesisTuple, problem: &ControlProblem, opts: &EngineOptions, stats: &mut Vec<IterStats>) -> Result<Option<Vec<Lts>>> {
    let started = Instant::now();
    let sp = compose_all_bounded(&t.plants, opts.budget)?;
    let goal = wrap_mu(&problem.goal, &t.mu);
    let region = solve_gr1(&sp, &problem.controllable(), &goal);
    let verdict = extract_live_controller(&region, &sp)?;
    stats.push(IterStats {
        iter: stats.len(),
        subplant_states: sp.state_count(),
        winning_states: region.states.count(),
        quotient_states: None,
        mu: t.mu.len(),
        millis: started.elapsed().as_millis() as u64,
    });
    Ok(match verdict {
        Verdict::Realizable(mut live) => {
            live.set_name("live");
            let mut controllers = t.safe_controllers.clone();
            controllers.push(live);
            Some(controllers)
        }
        Verdict::Unrealizable => None,
    })
}

pub fn comp_synthesis(problem: &ControlProblem, h: &dyn Heuristic, opts: &EngineOptions) -> Result<CompResult> {
    problem.validate()?;
    let mut t = SynthesisTuple::initial(problem);
    let mut stats = Vec::new();
    let mut records = Vec::new();
    loop {
        let mut idx = h.pick(&t.plants);
        idx.sort_unstable();
        idx.dedup();
        if idx.iter().any(|&i| i >= t.plants.len()) {
            return Err(Error::Usage("heuristic picked a missing component".into()));
        }
        if idx.len() < 2 && t.plants.len() > 1 {
            return Err(Error::Usage("heuristic must pick at least two components".into()));
        }
        if idx.len() == t.plants.len() {
            let controllers = finish(&t, problem, opts, &mut stats)?;
            return Ok(CompResult {
                bundle: controllers.map(|controllers| SolutionBundle {
                    controllers,
                    stats: stats.clone(),
                }),
                stats,
                records,
            });
        }
        match partial_synthesis(&t, &idx, problem, opts, &mut stats, &mut records)? {
            PartialOutcome::Next(next) => t = next,
            PartialOutcome::Unrealizable => {
                return Ok(CompResult {
                    bundle: None,
                    stats,
                    records,
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MonoResult {
    pub verdict: Verdict,
    pub plant_states: usize,
    pub winning_states: usize,
    pub millis: u64,
}

pub fn monolithic_synthesis(problem: &ControlProblem, budget: usize) -> Result<MonoResult> {
    problem.validate()?;
    let started = Instant::now();
    let plant = compose_all_bounded(&problem.parts, budget)?;
    let region = solve_gr1(&plant, &problem.controllable(), &EffectiveGoal::plain(problem.goal.clone()));
    let mut verdict = extract_live_controller(&region, &plant)?;
    if let Verdict::Realizable(c) = &mut verdict {
        c.set_name("mono");
    }
    Ok(MonoResult {
        verdict,
        plant_states: plant.state_count(),
        winning_states: region.states.count(),
        millis: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::lts::EventTable;
    use crate::verify::check_solution;

    fn cycle(t: &Arc<EventTable>, name: &str, labels: &[&str]) -> Lts {
        let alphabet = labels.iter().map(|n| t.lookup(n).unwrap()).collect();
        let mut l = Lts::new(name, t.clone(), alphabet, labels.len(), 0).unwrap();
        for (i, n) in labels.iter().enumerate() {
            l.add_transition(i, t.lookup(n).unwrap(), (i + 1) % labels.len()).unwrap();
        }
        l
    }

    #[test]
    fn first_two() {
        let mut t = EventTable::new();
        t.add("a", true);
        let t = Arc::new(t);
        let l = cycle(&t, "x", &["a"]);
        assert_eq!(FirstTwo.pick(&vec![l.clone(); 5]), vec![0, 1]);
        assert_eq!(FirstTwo.pick(&vec![l.clone(); 2]), vec![0, 1]);
        assert_eq!(FirstTwo.pick(&[l]), vec![0]);
    }

    #[test]
    fn controlled_subplant_adds_bottom_edges() {
        let mut t = EventTable::new();
        let u3 = t.add("u3", false);
        let g = t.add("g", true);
        let t = Arc::new(t);
        let mut m = Lts::new("m", t.clone(), [u3, g].into(), 2, 0).unwrap();
        m.add_transition(0, g, 0).unwrap();
        m.add_transition(0, u3, 1).unwrap();
        let keep = crate::lts::StateSet::from_iter_with_len(2, [0]);
        let sub = m.induced_subgraph(&keep).unwrap();
        let c = controlled_subplant(&sub.lts, &sub.new_to_old, &m, &EventSet::from([u3])).unwrap();
        assert_eq!(c.state_count(), 2);
        let sink = c.deadlock_sink().unwrap();
        assert!(c.has_transition(0, u3, sink));
        // not shared: no bottom edge
        let c = controlled_subplant(&sub.lts, &sub.new_to_old, &m, &EventSet::new()).unwrap();
        assert_eq!(c.state_count(), 1);
        assert!(c.deadlock_sink().is_none());
    }

    #[test]
    fn local_alphabet_excludes_shared_goal_and_mu() {
        let mut t = EventTable::new();
        let a = t.add("a", false);
        t.add("b", false);
        let c = t.add("c", false);
        let g = t.add("g", true);
        let t = Arc::new(t);
        let sp = cycle(&t, "sp", &["a", "b", "c", "g"]);
        let rest = cycle(&t, "r", &["b"]);
        let goal = Gr1Goal::new(vec![], vec![EventExpr::event(g)]);
        assert_eq!(local_alphabet(&[sp.clone()], &[rest.clone()], &goal, &EventSet::new()), EventSet::from([a, c]));
        assert_eq!(local_alphabet(&[sp.clone()], &[rest], &goal, &EventSet::from([a])), EventSet::from([c]));
        assert!(local_alphabet(&[sp.clone()], &[sp], &goal, &EventSet::new()).is_empty());
    }

    #[test]
    fn single_part_matches_monolithic() {
        let mut t = EventTable::new();
        t.add("g", true);
        t.add("u", false);
        let t = Arc::new(t);
        let p = cycle(&t, "p", &["u", "g"]);
        let goal = Gr1Goal::new(vec![], vec![EventExpr::event(t.lookup("g").unwrap())]);
        let problem = ControlProblem::new(t.clone(), vec![p], goal).unwrap();
        let comp = comp_synthesis(&problem, &FirstTwo, &EngineOptions::default()).unwrap();
        let mono = monolithic_synthesis(&problem, DEFAULT_BUDGET).unwrap();
        assert!(comp.is_realizable() && mono.verdict.is_realizable());
        let bundle = comp.bundle.unwrap();
        assert_eq!(bundle.controllers.len(), 1);
        assert!(check_solution(&problem, &bundle.controllers).unwrap().ok());
    }

    #[test]
    fn budget_is_a_distinct_error() {
        let mut t = EventTable::new();
        t.add("a", true);
        t.add("b", true);
        let t = Arc::new(t);
        let problem = ControlProblem::new(
            t.clone(),
            vec![cycle(&t, "x", &["a", "a"]), cycle(&t, "y", &["b", "b"])],
            Gr1Goal::top(),
        )
        .unwrap();
        assert!(matches!(monolithic_synthesis(&problem, 3), Err(Error::Budget { .. })));
    }
}
