//! Closed-loop certification and a brute-force realizability oracle.
//!
//! Nothing here looks at solver state: products are rebuilt from the
//! serialized-equivalent LTSs and the goal is evaluated on edge labels.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goal::{EffectiveGoal, Gr1Goal};
use crate::lts::{compose_all_bounded, EventId, EventSet, Lts, StateId};
use crate::problem::ControlProblem;

pub const DEFAULT_BUDGET: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoWitness {
    pub prefix: Vec<EventId>,
    pub cycle: Vec<EventId>,
    pub violated_guarantee: usize,
}

/// What went wrong first, as a replayable event sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The controller blocks `event` after `trace`.
    Illegal { trace: Vec<EventId>, event: EventId },
    Deadlock { trace: Vec<EventId> },
    Lasso(LassoWitness),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub legal: bool,
    pub deadlock_free: bool,
    pub goal_holds: bool,
    pub witness: Option<Witness>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.legal && self.deadlock_free && self.goal_holds
    }
}

fn trace_to(parent: &[Option<(StateId, EventId)>], mut s: StateId) -> Vec<EventId> {
    let mut out = Vec::new();
    while let Some((p, e)) = parent[s] {
        out.push(e);
        s = p;
    }
    out.reverse();
    out
}

fn bfs_tree(l: &Lts) -> (Vec<bool>, Vec<Option<(StateId, EventId)>>) {
    let n = l.state_count();
    let mut seen = vec![false; n];
    let mut parent = vec![None; n];
    let mut q = VecDeque::from([l.initial()]);
    seen[l.initial()] = true;
    while let Some(s) = q.pop_front() {
        for &(e, t) in l.out(s) {
            if !seen[t] {
                seen[t] = true;
                parent[t] = Some((s, e));
                q.push_back(t);
            }
        }
    }
    (seen, parent)
}

/// Checks that `controller` never blocks an uncontrollable event `plant`
/// offers, along every joint run. Returns the first blocking trace.
pub fn check_legal(plant: &Lts, controller: &Lts, uncontrollable: &EventSet) -> Option<(Vec<EventId>, EventId)> {
    let shared: EventSet = plant.alphabet().intersection(controller.alphabet()).copied().collect();
    let mut index: HashMap<(StateId, StateId), usize> = HashMap::new();
    let mut states = vec![(plant.initial(), controller.initial())];
    let mut parent: Vec<Option<(usize, EventId)>> = vec![None];
    index.insert(states[0], 0);
    let mut i = 0;
    while i < states.len() {
        let (p, c) = states[i];
        for &(e, pt) in plant.out(p) {
            let ct = if shared.contains(&e) {
                match controller.step(c, e) {
                    Some(ct) => ct,
                    None => {
                        if uncontrollable.contains(&e) {
                            let mut tr = Vec::new();
                            let mut k = i;
                            while let Some((pk, ek)) = parent[k] {
                                tr.push(ek);
                                k = pk;
                            }
                            tr.reverse();
                            return Some((tr, e));
                        }
                        continue;
                    }
                }
            } else {
                c
            };
            let next = (pt, ct);
            if let Entry::Vacant(slot) = index.entry(next) {
                slot.insert(states.len());
                states.push(next);
                parent.push(Some((i, e)));
            }
        }
        // controller-only events move the controller alone
        for &(e, ct) in controller.out(c) {
            if plant.alphabet().contains(&e) {
                continue;
            }
            let next = (p, ct);
            if let Entry::Vacant(slot) = index.entry(next) {
                slot.insert(states.len());
                states.push(next);
                parent.push(Some((i, e)));
            }
        }
        i += 1;
    }
    None
}

/// Finds a reachable lasso whose cycle satisfies every assumption but never
/// some guarantee. `None` means every infinite run satisfies the goal.
pub fn check_gr1(product: &Lts, goal: &EffectiveGoal) -> Option<LassoWitness> {
    let g = goal.flatten();
    if g.vacuous || g.guarantees.is_empty() {
        return None;
    }
    let n = product.state_count();
    let (reach, parent) = bfs_tree(product);
    for (j, gj) in g.guarantees.iter().enumerate() {
        let keep = |e: EventId| !gj.eval(e);
        let comp = sccs(product, &reach, &keep);
        let mut members: HashMap<usize, Vec<StateId>> = HashMap::new();
        for s in 0..n {
            if let Some(c) = comp[s] {
                members.entry(c).or_default().push(s);
            }
        }
        let mut ids: Vec<usize> = members.keys().copied().collect();
        ids.sort_unstable();
        for c in ids {
            let inner = |s: StateId, e: EventId, t: StateId| comp[s] == Some(c) && comp[t] == Some(c) && keep(e);
            let states = &members[&c];
            let mut required: Vec<(StateId, EventId, StateId)> = Vec::new();
            let mut any_edge = None;
            for &s in states {
                for &(e, t) in product.out(s) {
                    if inner(s, e, t) {
                        any_edge.get_or_insert((s, e, t));
                    }
                }
            }
            let Some(first) = any_edge else { continue };
            let mut ok = true;
            for a in &g.assumptions {
                let hit = states.iter().find_map(|&s| {
                    product
                        .out(s)
                        .iter()
                        .find(|&&(e, t)| inner(s, e, t) && a.eval(e))
                        .map(|&(e, t)| (s, e, t))
                });
                match hit {
                    Some(h) => required.push(h),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            if required.is_empty() {
                required.push(first);
            }
            let anchor = required[0].0;
            let mut cycle = Vec::new();
            let mut at = anchor;
            for &(s, e, t) in &required {
                cycle.extend(path_within(product, at, s, &inner));
                cycle.push(e);
                at = t;
            }
            cycle.extend(path_within(product, at, anchor, &inner));
            return Some(LassoWitness {
                prefix: trace_to(&parent, anchor),
                cycle,
                violated_guarantee: j,
            });
        }
    }
    None
}

fn path_within(
    l: &Lts,
    from: StateId,
    to: StateId,
    inner: &impl Fn(StateId, EventId, StateId) -> bool,
) -> Vec<EventId> {
    if from == to {
        return Vec::new();
    }
    let mut parent: HashMap<StateId, (StateId, EventId)> = HashMap::new();
    let mut q = VecDeque::from([from]);
    parent.insert(from, (from, EventId(u32::MAX)));
    while let Some(s) = q.pop_front() {
        for &(e, t) in l.out(s) {
            if inner(s, e, t) && !parent.contains_key(&t) {
                parent.insert(t, (s, e));
                if t == to {
                    let mut out = Vec::new();
                    let mut k = to;
                    while k != from {
                        let (p, e) = parent[&k];
                        out.push(e);
                        k = p;
                    }
                    out.reverse();
                    return out;
                }
                q.push_back(t);
            }
        }
    }
    unreachable!("states of one SCC are mutually reachable")
}

/// Tarjan over reachable states, keeping only edges whose label passes
/// `keep`. Returns the component of every state lying on some cycle.
fn sccs(l: &Lts, reach: &[bool], keep: &impl Fn(EventId) -> bool) -> Vec<Option<usize>> {
    let n = l.state_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![None; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if !reach[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(StateId, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (s, ref mut pos)) = call.last_mut() {
            let out = l.out(s);
            if *pos < out.len() {
                let (e, t) = out[*pos];
                *pos += 1;
                if !keep(e) {
                    continue;
                }
                if index[t] == usize::MAX {
                    index[t] = next_index;
                    low[t] = next_index;
                    next_index += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    call.push((t, 0));
                } else if on_stack[t] {
                    low[s] = low[s].min(index[t]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[s]);
                }
                if low[s] == index[s] {
                    let mut group = Vec::new();
                    loop {
                        let x = stack.pop().unwrap();
                        on_stack[x] = false;
                        group.push(x);
                        if x == s {
                            break;
                        }
                    }
                    let cyclic = group.len() > 1 || l.out(s).iter().any(|&(e, t)| t == s && keep(e));
                    if cyclic {
                        for x in group {
                            comp[x] = Some(next_comp);
                        }
                        next_comp += 1;
                    }
                }
            }
        }
    }
    comp
}

/// Composes plant and controllers from scratch and checks legality,
/// deadlock-freedom and the original goal.
pub fn check_solution(problem: &ControlProblem, controllers: &[Lts]) -> Result<VerificationReport> {
    check_solution_bounded(problem, controllers, DEFAULT_BUDGET)
}

pub fn check_solution_bounded(
    problem: &ControlProblem,
    controllers: &[Lts],
    budget: usize,
) -> Result<VerificationReport> {
    check_closed_loop(&problem.parts, controllers, &problem.uncontrollable(), &EffectiveGoal::plain(problem.goal.clone()), budget)
}

pub fn check_closed_loop(
    parts: &[Lts],
    controllers: &[Lts],
    uncontrollable: &EventSet,
    goal: &EffectiveGoal,
    budget: usize,
) -> Result<VerificationReport> {
    let plant = compose_all_bounded(parts, budget)?;
    let mut report = VerificationReport {
        legal: true,
        deadlock_free: true,
        goal_holds: true,
        witness: None,
    };
    if controllers.is_empty() {
        return Err(Error::Usage("no controllers to verify".into()));
    }
    let ctrl = compose_all_bounded(controllers, budget)?;
    if let Some((trace, event)) = check_legal(&plant, &ctrl, uncontrollable) {
        report.legal = false;
        report.witness = Some(Witness::Illegal { trace, event });
        return Ok(report);
    }
    let mut all = parts.to_vec();
    all.extend(controllers.iter().cloned());
    let closed = compose_all_bounded(&all, budget)?;
    let (_, parent) = bfs_tree(&closed);
    if let Some(d) = closed.find_deadlocks().iter().next() {
        report.deadlock_free = false;
        report.witness = Some(Witness::Deadlock { trace: trace_to(&parent, d) });
        return Ok(report);
    }
    if let Some(w) = check_gr1(&closed, goal) {
        report.goal_holds = false;
        report.witness = Some(Witness::Lasso(w));
    }
    Ok(report)
}

/// Replays a witness against `parts ‖ controllers`: the trace must be
/// executable and, for lassos, the cycle must return to its start state and
/// violate the stated guarantee.
pub fn replay_witness(parts: &[Lts], controllers: &[Lts], goal: &Gr1Goal, w: &Witness) -> Result<bool> {
    let mut all = parts.to_vec();
    all.extend(controllers.iter().cloned());
    let closed = compose_all_bounded(&all, DEFAULT_BUDGET)?;
    let run = |from: StateId, tr: &[EventId]| -> Option<StateId> {
        tr.iter().try_fold(from, |s, &e| closed.step(s, e))
    };
    Ok(match w {
        Witness::Deadlock { trace } => run(closed.initial(), trace).is_some_and(|s| closed.out(s).is_empty()),
        Witness::Illegal { trace, event } => {
            let plant = compose_all_bounded(parts, DEFAULT_BUDGET)?;
            let ctrl = compose_all_bounded(controllers, DEFAULT_BUDGET)?;
            let p = trace.iter().try_fold(plant.initial(), |s, &e| plant.step(s, e));
            let c = trace
                .iter()
                .try_fold(ctrl.initial(), |s, &e| if ctrl.alphabet().contains(&e) { ctrl.step(s, e) } else { Some(s) });
            match (p, c) {
                (Some(p), Some(c)) => plant.is_enabled(p, *event) && !ctrl.is_enabled(c, *event),
                _ => false,
            }
        }
        Witness::Lasso(l) => {
            let Some(s) = run(closed.initial(), &l.prefix) else { return Ok(false) };
            run(s, &l.cycle) == Some(s) && goal.violated_guarantee(&l.cycle) == Some(l.violated_guarantee)
        }
    })
}

/// Exhaustive search for a guarantee-counter controller: a map from
/// (plant state, memory j) to the enabled controllable events, with j
/// advancing on every γ_j edge. Pairs are assigned lazily as they become
/// reachable. Each complete candidate is checked with [`check_gr1`].
///
/// `memory_bound` caps the number of (state, memory) pairs; the search also
/// gives up after `max_candidates` closed loops. Both yield
/// [`Error::Inconclusive`], never a verdict.
pub fn brute_force_realizability(
    plant: &Lts,
    controllable: &EventSet,
    goal: &Gr1Goal,
    memory_bound: usize,
    max_candidates: usize,
) -> Result<bool> {
    let g = goal.clone();
    let m = if g.is_trivial() { 1 } else { g.guarantees.len() };
    let n = plant.state_count();
    if n * m > memory_bound {
        return Err(Error::Inconclusive(format!("{} memory pairs exceed bound {memory_bound}", n * m)));
    }
    let advance = |j: usize, e: EventId| -> usize {
        if g.is_trivial() || g.guarantees[j].eval(e) {
            (j + 1) % m
        } else {
            j
        }
    };
    let mut search = Search {
        plant,
        controllable,
        goal: &g,
        m,
        choice: vec![None; n * m],
        checked: 0,
        max_candidates,
        advance: &advance,
    };
    search.run()
}

struct Search<'a> {
    plant: &'a Lts,
    controllable: &'a EventSet,
    goal: &'a Gr1Goal,
    m: usize,
    choice: Vec<Option<u32>>,
    checked: usize,
    max_candidates: usize,
    advance: &'a dyn Fn(usize, EventId) -> usize,
}

impl Search<'_> {
    fn allowed(&self, s: StateId, mask: u32) -> Vec<(EventId, StateId)> {
        let mut k = 0;
        let mut out = Vec::new();
        for &(e, t) in self.plant.out(s) {
            if self.controllable.contains(&e) {
                if mask & (1 << k) != 0 {
                    out.push((e, t));
                }
                k += 1;
            } else {
                out.push((e, t));
            }
        }
        out
    }

    /// Reachable pairs under the current partial assignment; returns the
    /// first unassigned one, if any.
    fn frontier(&self) -> (Vec<usize>, Option<usize>) {
        let m = self.m;
        let start = self.plant.initial() * m;
        let mut seen = vec![false; self.choice.len()];
        let mut order = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < order.len() {
            let key = order[i];
            i += 1;
            let Some(mask) = self.choice[key] else {
                return (order, Some(key));
            };
            let (s, j) = (key / m, key % m);
            for (e, t) in self.allowed(s, mask) {
                let nk = t * m + (self.advance)(j, e);
                if !seen[nk] {
                    seen[nk] = true;
                    order.push(nk);
                }
            }
        }
        (order, None)
    }

    fn run(&mut self) -> Result<bool> {
        let (order, open) = self.frontier();
        match open {
            Some(key) => {
                let s = key / self.m;
                let ctrl = self.plant.out(s).iter().filter(|(e, _)| self.controllable.contains(e)).count();
                let has_unc = self.plant.out(s).len() > ctrl;
                for mask in 0..(1u32 << ctrl) {
                    if mask == 0 && !has_unc {
                        continue;
                    }
                    self.choice[key] = Some(mask);
                    if self.run()? {
                        self.choice[key] = None;
                        return Ok(true);
                    }
                }
                self.choice[key] = None;
                Ok(false)
            }
            None => {
                self.checked += 1;
                if self.checked > self.max_candidates {
                    return Err(Error::Inconclusive("candidate budget exhausted".into()));
                }
                Ok(self.check(&order))
            }
        }
    }

    fn check(&self, order: &[usize]) -> bool {
        let m = self.m;
        let mut dense = HashMap::new();
        for (i, &k) in order.iter().enumerate() {
            dense.insert(k, i);
        }
        let mut trans = vec![Vec::new(); order.len()];
        for (i, &key) in order.iter().enumerate() {
            let (s, j) = (key / m, key % m);
            let edges = self.allowed(s, self.choice[key].unwrap());
            if edges.is_empty() {
                return false;
            }
            for (e, t) in edges {
                trans[i].push((e, dense[&(t * m + (self.advance)(j, e))]));
            }
        }
        let closed = Lts::from_raw(
            "closed".into(),
            self.plant.events().clone(),
            self.plant.alphabet().clone(),
            trans,
            0,
            None,
        );
        check_gr1(&closed, &EffectiveGoal::plain(self.goal.clone())).is_none()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::goal::EventExpr;
    use crate::lts::EventTable;

    fn setup() -> (Arc<EventTable>, EventId, EventId) {
        let mut t = EventTable::new();
        let g = t.add("g", true);
        let u = t.add("u", false);
        (Arc::new(t), g, u)
    }

    fn one_state(t: &Arc<EventTable>, loops: &[EventId]) -> Lts {
        let mut l = Lts::new("p", t.clone(), loops.iter().copied().collect(), 1, 0).unwrap();
        for &e in loops {
            l.add_transition(0, e, 0).unwrap();
        }
        l
    }

    #[test]
    fn lasso_on_uncontrollable_loop() {
        let (t, g, u) = setup();
        let p = one_state(&t, &[u]);
        let goal = EffectiveGoal::plain(Gr1Goal::new(vec![], vec![EventExpr::event(g)]));
        let w = check_gr1(&p, &goal).unwrap();
        assert_eq!(w.cycle, vec![u]);
        assert!(check_gr1(&p, &EffectiveGoal::default()).is_none());
    }

    #[test]
    fn brute_force_basics() {
        let (t, g, u) = setup();
        let goal = Gr1Goal::new(vec![], vec![EventExpr::event(g)]);
        let ctrl = t.controllable_set();
        assert!(brute_force_realizability(&one_state(&t, &[g]), &ctrl, &goal, 64, 1000).unwrap());
        assert!(!brute_force_realizability(&one_state(&t, &[u]), &ctrl, &goal, 64, 1000).unwrap());
        // both loops: the controller cannot stop u from repeating forever
        assert!(!brute_force_realizability(&one_state(&t, &[g, u]), &ctrl, &goal, 64, 1000).unwrap());
        assert!(matches!(
            brute_force_realizability(&one_state(&t, &[g]), &ctrl, &goal, 0, 1000),
            Err(Error::Inconclusive(_))
        ));
    }

    #[test]
    fn legality_witness() {
        let (t, g, u) = setup();
        let plant = one_state(&t, &[g, u]);
        let mut ctrl = Lts::new("c", t.clone(), [g, u].into(), 1, 0).unwrap();
        ctrl.add_transition(0, g, 0).unwrap();
        let w = check_legal(&plant, &ctrl, &t.uncontrollable_set()).unwrap();
        assert_eq!(w, (vec![], u));
        assert!(check_legal(&plant, &plant, &t.uncontrollable_set()).is_none());
    }

    #[test]
    fn deadlock_injection_is_reported() {
        let (t, g, _) = setup();
        let plant = one_state(&t, &[g]);
        let problem = ControlProblem::new(t.clone(), vec![plant.clone()], Gr1Goal::top()).unwrap();
        assert!(check_solution(&problem, &[plant]).unwrap().ok());
        let blocked = Lts::new("c", t.clone(), [g].into(), 1, 0).unwrap();
        let r = check_solution(&problem, &[blocked.clone()]).unwrap();
        assert!(r.legal && !r.deadlock_free);
        let w = r.witness.unwrap();
        assert!(replay_witness(&problem.parts, &[blocked], &problem.goal, &w).unwrap());
    }
}
