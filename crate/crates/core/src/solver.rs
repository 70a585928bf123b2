//! GR(1) games on a plant LTS with discrete-event legality.
//!
//! The controller may disable controllable events only, and must leave at
//! least one event enabled. Goal literals are read on transition labels.

use std::sync::Arc;

use crate::error::Result;
use crate::goal::{EffectiveGoal, EventExpr};
use crate::lts::{EventId, EventSet, Lts, StateId, StateSet};

const NO_RANK: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Adds a controllable idle self-loop (ε) at every non-sink state. ε
    /// satisfies every guarantee and no assumption.
    pub idle: bool,
}

/// The game graph: plant edges in CSR form plus per-formula label masks.
///
/// Labels are event indices. The virtual label `events.len()` marks the
/// idle option and the stutter option: a controllable self-loop that
/// satisfies every guarantee and no assumption. Stutter edges sit at states
/// that lost an uncontrollable μ self-loop, where the environment may
/// repeat that loop forever.
#[derive(Clone, Debug)]
pub struct GameArena {
    n: usize,
    initial: StateId,
    out_start: Vec<usize>,
    label: Vec<usize>,
    target: Vec<StateId>,
    source: Vec<StateId>,
    in_edges: Vec<Vec<usize>>,
    controllable: Vec<bool>,
    assumptions: Vec<Vec<bool>>,
    guarantees: Vec<Vec<bool>>,
    idle: Option<usize>,
    idle_everywhere: bool,
}

fn mask(expr: &EventExpr, events: usize, idle_value: bool) -> Vec<bool> {
    let mut m: Vec<bool> = (0..events).map(|e| expr.eval(EventId(e as u32))).collect();
    m.push(idle_value);
    m
}

impl GameArena {
    /// Builds the arena for `goal.base` on `plant`; μ is not handled here.
    pub fn new(plant: &Lts, controllable: &EventSet, goal: &EffectiveGoal, opts: SolveOptions) -> Self {
        Self::with_stutter(plant, controllable, goal, opts, &[])
    }

    /// Like [`GameArena::new`], with a stutter edge at each of `stutter`.
    pub fn with_stutter(
        plant: &Lts,
        controllable: &EventSet,
        goal: &EffectiveGoal,
        opts: SolveOptions,
        stutter: &[StateId],
    ) -> Self {
        let table = plant.events();
        let ne = table.len();
        let idle = (opts.idle || !stutter.is_empty()).then_some(ne);
        let mut virtual_at = vec![false; plant.state_count()];
        for &s in stutter {
            virtual_at[s] = true;
        }
        if opts.idle {
            for (s, v) in virtual_at.iter_mut().enumerate() {
                *v |= !plant.is_sink(s);
            }
        }
        let mut ctrl = vec![false; ne + 1];
        for e in controllable {
            ctrl[e.index()] = true;
        }
        ctrl[ne] = true;

        let base = &goal.base;
        let assumptions = if base.vacuous {
            Vec::new()
        } else {
            base.assumptions.iter().map(|a| mask(a, ne, false)).collect()
        };
        let guarantees = if base.is_trivial() {
            vec![vec![true; ne + 1]]
        } else {
            base.guarantees.iter().map(|g| mask(g, ne, true)).collect()
        };

        let n = plant.state_count();
        let mut out_start = Vec::with_capacity(n + 1);
        let mut label = Vec::new();
        let mut target = Vec::new();
        let mut source = Vec::new();
        for s in 0..n {
            out_start.push(label.len());
            for &(e, t) in plant.out(s) {
                label.push(e.index());
                target.push(t);
                source.push(s);
            }
            if let Some(eps) = idle.filter(|_| virtual_at[s]) {
                label.push(eps);
                target.push(s);
                source.push(s);
            }
        }
        out_start.push(label.len());
        let mut in_edges = vec![Vec::new(); n];
        for (i, &t) in target.iter().enumerate() {
            in_edges[t].push(i);
        }
        Self {
            n,
            initial: plant.initial(),
            out_start,
            label,
            target,
            source,
            in_edges,
            controllable: ctrl,
            assumptions,
            guarantees,
            idle,
            idle_everywhere: opts.idle,
        }
    }

    pub fn state_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.label.len()
    }

    pub fn guarantee_count(&self) -> usize {
        self.guarantees.len()
    }

    pub fn idle_label(&self) -> Option<usize> {
        self.idle
    }

    fn edges_of(&self, s: StateId) -> std::ops::Range<usize> {
        self.out_start[s]..self.out_start[s + 1]
    }

    fn is_ctrl(&self, e: usize) -> bool {
        self.controllable[self.label[e]]
    }

    /// States where the controller can force the next step onto a good edge.
    pub fn cpre(&self, good: impl Fn(StateId, usize, StateId) -> bool) -> StateSet {
        let mut out = StateSet::empty(self.n);
        for s in 0..self.n {
            let mut has_unc = false;
            let mut ok = true;
            let mut ctrl_good = false;
            for e in self.edges_of(s) {
                let g = good(s, self.label[e], self.target[e]);
                if self.is_ctrl(e) {
                    ctrl_good |= g;
                } else {
                    has_unc = true;
                    ok &= g;
                }
            }
            if ok && (has_unc || ctrl_good) {
                out.insert(s);
            }
        }
        out
    }

    /// `νX. cpre(start ∨ (stay ∧ target ∈ X))` by worklist removal.
    fn nu_cpre(&self, start: &[bool], stay: &[bool]) -> Vec<bool> {
        let mut in_x = vec![true; self.n];
        let mut bad_unc = vec![0u32; self.n];
        let mut good_ctrl = vec![0u32; self.n];
        let mut has_unc = vec![false; self.n];
        for s in 0..self.n {
            for e in self.edges_of(s) {
                let g = start[e] || stay[e];
                if self.is_ctrl(e) {
                    good_ctrl[s] += g as u32;
                } else {
                    has_unc[s] = true;
                    bad_unc[s] += (!g) as u32;
                }
            }
        }
        let failing = |s: usize, bad: &[u32], good: &[u32]| bad[s] > 0 || (!has_unc[s] && good[s] == 0);
        let mut queue: Vec<StateId> = (0..self.n).filter(|&s| failing(s, &bad_unc, &good_ctrl)).collect();
        for &s in &queue {
            in_x[s] = false;
        }
        while let Some(t) = queue.pop() {
            for &e in &self.in_edges[t] {
                if start[e] || !stay[e] {
                    continue;
                }
                let s = self.source[e];
                if !in_x[s] {
                    continue;
                }
                if self.is_ctrl(e) {
                    good_ctrl[s] -= 1;
                } else {
                    bad_unc[s] += 1;
                }
                if failing(s, &bad_unc, &good_ctrl) {
                    in_x[s] = false;
                    queue.push(s);
                }
            }
        }
        in_x
    }
}

/// Winning states plus the ranking data a strategy is read from.
#[derive(Clone, Debug)]
pub struct WinningRegion {
    pub states: StateSet,
    arena: Arc<GameArena>,
    /// Per guarantee `j` and state: attractor layer towards a γ_j edge.
    rank: Vec<Vec<u32>>,
    /// Assumption index whose ν-layer produced the rank.
    layer: Vec<Vec<u32>>,
    /// μ self-loops removed before solving.
    pub removed_loops: Vec<(StateId, EventId)>,
    pub iterations: usize,
}

impl WinningRegion {
    pub fn arena(&self) -> &GameArena {
        &self.arena
    }

    pub fn is_winning(&self, s: StateId) -> bool {
        self.states.contains(s)
    }

    pub fn initial_winning(&self) -> bool {
        self.states.contains(self.arena.initial)
    }

    /// The controllable edge the strategy enables at `(s, j)`, if any.
    pub fn choice(&self, s: StateId, j: usize) -> Option<usize> {
        let a = &self.arena;
        let k = self.rank[j][s];
        if k == NO_RANK {
            return None;
        }
        let i = self.layer[j][s] as usize;
        let mut best: Option<(u8, u32, usize, usize)> = None;
        for e in a.edges_of(s) {
            if !a.is_ctrl(e) {
                continue;
            }
            let (l, t) = (a.label[e], a.target[e]);
            let tr = self.rank[j][t];
            let class = if a.guarantees[j][l] && self.states.contains(t) {
                Some((0, 0))
            } else if tr < k {
                Some((1, tr))
            } else if tr == k && self.stay_ok(i, l, t, j) {
                Some((2, 0))
            } else {
                None
            };
            if let Some((c, r)) = class {
                let key = (c, r, l, e);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|b| b.3)
    }

    fn stay_ok(&self, i: usize, label: usize, t: StateId, j: usize) -> bool {
        match self.arena.assumptions.get(i) {
            Some(m) => !m[label] && self.layer[j][t] as usize == i,
            None => false,
        }
    }

    fn next_memory(&self, j: usize, label: usize) -> usize {
        if self.arena.guarantees[j][label] {
            (j + 1) % self.arena.guarantees.len()
        } else {
            j
        }
    }
}

/// Solves the GR(1) game for `goal` on `plant`.
///
/// Self-loops labelled by `goal.mu` are removed first and
/// `goal.base` is solved on the result; [`extract_live_controller`] puts the
/// uncontrollable ones back.
pub fn solve_gr1(plant: &Lts, controllable: &EventSet, goal: &EffectiveGoal) -> WinningRegion {
    solve_gr1_with(plant, controllable, goal, SolveOptions::default())
}

pub fn solve_gr1_with(
    plant: &Lts,
    controllable: &EventSet,
    goal: &EffectiveGoal,
    opts: SolveOptions,
) -> WinningRegion {
    let (stripped, removed) = plant.remove_self_loops(&goal.mu);
    let table = plant.events();
    let mut stutter: Vec<StateId> = removed
        .iter()
        .filter(|&&(_, l)| !table.is_controllable(l))
        .map(|&(s, _)| s)
        .collect();
    stutter.dedup();
    let arena = GameArena::with_stutter(&stripped, controllable, goal, opts, &stutter);
    let mut region = fixpoint(arena);
    region.removed_loops = removed;
    region
}

fn fixpoint(arena: GameArena) -> WinningRegion {
    let n = arena.n;
    let m_edges = arena.edge_count();
    let m = arena.guarantees.len();
    // Assumption ⊤ when none are given: the stay-layer is then never usable.
    let stay_masks: Vec<Vec<bool>> = if arena.assumptions.is_empty() {
        vec![vec![false; m_edges]]
    } else {
        arena
            .assumptions
            .iter()
            .map(|a| (0..m_edges).map(|e| !a[arena.label[e]]).collect())
            .collect()
    };

    let mut z = vec![true; n];
    let mut rank = vec![vec![NO_RANK; n]; m];
    let mut layer = vec![vec![0u32; n]; m];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next_z = vec![true; n];
        for j in 0..m {
            let progress: Vec<bool> = (0..m_edges)
                .map(|e| arena.guarantees[j][arena.label[e]] && z[arena.target[e]])
                .collect();
            let mut y = vec![false; n];
            let r = &mut rank[j];
            let lay = &mut layer[j];
            r.iter_mut().for_each(|x| *x = NO_RANK);
            let mut k = 0u32;
            loop {
                let mut grew = false;
                for (i, stay) in stay_masks.iter().enumerate() {
                    let start: Vec<bool> = (0..m_edges).map(|e| progress[e] || y[arena.target[e]]).collect();
                    let x = arena.nu_cpre(&start, stay);
                    let mut added = false;
                    for s in 0..n {
                        if x[s] && !y[s] {
                            r[s] = k;
                            lay[s] = i as u32;
                            added = true;
                        }
                    }
                    if added {
                        for s in 0..n {
                            y[s] |= x[s];
                        }
                        k += 1;
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
            }
            for s in 0..n {
                next_z[s] &= y[s];
            }
        }
        if next_z == z {
            break;
        }
        z = next_z;
    }
    WinningRegion {
        states: StateSet::from_iter_with_len(n, (0..n).filter(|&s| z[s])),
        arena: Arc::new(arena),
        rank,
        layer,
        removed_loops: Vec::new(),
        iterations,
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Realizable(Lts),
    Unrealizable,
}

impl Verdict {
    pub fn is_realizable(&self) -> bool {
        matches!(self, Verdict::Realizable(_))
    }

    pub fn controller(&self) -> Option<&Lts> {
        match self {
            Verdict::Realizable(c) => Some(c),
            Verdict::Unrealizable => None,
        }
    }
}

/// Reads the guarantee-counter strategy off `region` as a controller LTS.
///
/// States are reachable pairs (plant state, memory). Uncontrollable μ
/// self-loops removed by the solver are restored at every controller state
/// whose plant state had them.
pub fn extract_live_controller(region: &WinningRegion, plant: &Lts) -> Result<Verdict> {
    if !region.initial_winning() {
        return Ok(Verdict::Unrealizable);
    }
    let a = region.arena();
    if a.idle_everywhere {
        return Err(crate::Error::Internal("live controller requested on an idle arena".into()));
    }
    let m = a.guarantees.len();
    let mut index = vec![usize::MAX; a.n * m];
    let mut pairs: Vec<(StateId, usize)> = Vec::new();
    let mut trans: Vec<Vec<(EventId, StateId)>> = Vec::new();
    let intern = |s: StateId, j: usize, index: &mut Vec<usize>, pairs: &mut Vec<(StateId, usize)>, trans: &mut Vec<Vec<(EventId, StateId)>>| {
        let key = s * m + j;
        if index[key] == usize::MAX {
            index[key] = pairs.len();
            pairs.push((s, j));
            trans.push(Vec::new());
        }
        index[key]
    };
    intern(a.initial, 0, &mut index, &mut pairs, &mut trans);
    let mut next = 0;
    while next < pairs.len() {
        let (s, j) = pairs[next];
        let chosen = region.choice(s, j);
        for e in a.edges_of(s) {
            if a.is_ctrl(e) && Some(e) != chosen {
                continue;
            }
            let (l, t) = (a.label[e], a.target[e]);
            if Some(l) == a.idle {
                // stutter: the restored μ loop stands in for it
                continue;
            }
            debug_assert!(region.states.contains(t));
            let jt = region.next_memory(j, l);
            let id = intern(t, jt, &mut index, &mut pairs, &mut trans);
            trans[next].push((EventId(l as u32), id));
        }
        next += 1;
    }
    let table = plant.events();
    let mut loops_at: Vec<Vec<EventId>> = vec![Vec::new(); a.n];
    for &(s, l) in &region.removed_loops {
        if !table.is_controllable(l) {
            loops_at[s].push(l);
        }
    }
    for (q, &(s, _)) in pairs.iter().enumerate() {
        for &l in &loops_at[s] {
            trans[q].push((l, q));
        }
    }
    let mut c = Lts::from_raw(
        format!("{}_live", plant.name()),
        table.clone(),
        plant.alphabet().clone(),
        trans,
        0,
        None,
    );
    c.set_state_names(
        pairs
            .iter()
            .map(|&(s, j)| format!("{}_m{}", plant.state_name(s), j))
            .collect(),
    );
    Ok(Verdict::Realizable(c))
}

/// Maximally permissive safety controller: the plant restricted to its
/// winning states for `goal` under `controllable`.
pub fn extract_safe_controller(
    plant: &Lts,
    controllable: &EventSet,
    goal: &EffectiveGoal,
    opts: SolveOptions,
) -> (Verdict, WinningRegion) {
    let region = solve_gr1_with(plant, controllable, goal, opts);
    let verdict = match plant.induced_subgraph(&region.states) {
        Ok(sub) => Verdict::Realizable(sub.lts),
        Err(_) => Verdict::Unrealizable,
    };
    (verdict, region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal::Gr1Goal;
    use crate::lts::EventTable;

    fn table(spec: &[(&str, bool)]) -> Arc<EventTable> {
        let mut t = EventTable::new();
        for &(n, c) in spec {
            t.add(n, c);
        }
        Arc::new(t)
    }

    fn lts(t: &Arc<EventTable>, n: usize, edges: &[(usize, &str, usize)]) -> Lts {
        let alphabet = edges.iter().map(|e| t.lookup(e.1).unwrap()).collect();
        let mut l = Lts::new("p", t.clone(), alphabet, n, 0).unwrap();
        for &(s, e, d) in edges {
            l.add_transition(s, t.lookup(e).unwrap(), d).unwrap();
        }
        l
    }

    fn live(t: &Arc<EventTable>, g: &[&str]) -> EffectiveGoal {
        EffectiveGoal::plain(Gr1Goal::new(
            vec![],
            g.iter().map(|n| EventExpr::event(t.lookup(n).unwrap())).collect(),
        ))
    }

    #[test]
    fn controllable_loop_is_winning() {
        let t = table(&[("g", true)]);
        let p = lts(&t, 1, &[(0, "g", 0)]);
        let r = solve_gr1(&p, &t.controllable_set(), &live(&t, &["g"]));
        assert_eq!(r.states.count(), 1);
        let c = extract_live_controller(&r, &p).unwrap();
        assert!(c.is_realizable());
    }

    #[test]
    fn uncontrollable_loop_without_guarantee_loses() {
        let t = table(&[("g", true), ("u", false)]);
        let p = lts(&t, 1, &[(0, "u", 0)]);
        let r = solve_gr1(&p, &t.controllable_set(), &live(&t, &["g"]));
        assert!(!r.initial_winning());
        assert!(!extract_live_controller(&r, &p).unwrap().is_realizable());
    }

    #[test]
    fn two_state_cycle_flips_with_controllability() {
        let t = table(&[("u", false), ("g", true), ("d", false)]);
        let u = t.lookup("u").unwrap();
        let goal = EffectiveGoal::plain(Gr1Goal::new(
            vec![EventExpr::event(u)],
            vec![EventExpr::event(t.lookup("g").unwrap())],
        ));
        let p = lts(&t, 2, &[(0, "u", 1), (1, "g", 0)]);
        let r = solve_gr1(&p, &t.controllable_set(), &goal);
        assert_eq!(r.states.count(), 2);
        // g replaced by an uncontrollable dead end
        let q = lts(&t, 3, &[(0, "u", 1), (1, "d", 2)]);
        let r = solve_gr1(&q, &t.controllable_set(), &goal);
        assert!(!r.initial_winning());
    }

    #[test]
    fn cpre_cases() {
        let t = table(&[("u", false), ("a", true), ("b", true)]);
        let p = lts(&t, 3, &[(0, "u", 1), (1, "a", 0), (1, "b", 2), (2, "b", 2)]);
        let arena = GameArena::new(&p, &t.controllable_set(), &live(&t, &[]), SolveOptions::default());
        let good_not_2 = arena.cpre(|_, _, d| d != 2);
        assert!(good_not_2.contains(0));
        assert!(good_not_2.contains(1), "bad controllable edge can be disabled");
        assert!(!good_not_2.contains(2));
        let good_not_1 = arena.cpre(|_, _, d| d != 1);
        assert!(!good_not_1.contains(0), "uncontrollable edge cannot be disabled");
    }

    #[test]
    fn trivial_goal_avoids_deadlock() {
        let t = table(&[("a", true), ("b", true), ("u", false)]);
        // 0 -a-> 1 (dead), 0 -b-> 0; 2 -u-> 1
        let p = lts(&t, 3, &[(0, "a", 1), (0, "b", 0), (2, "u", 1)]);
        let r = solve_gr1(&p, &t.controllable_set(), &EffectiveGoal::default());
        assert_eq!(r.states.iter().collect::<Vec<_>>(), vec![0]);
        let c = extract_live_controller(&r, &p).unwrap();
        let c = c.controller().unwrap();
        assert_eq!(c.state_count(), 1);
        assert!(c.find_deadlocks().is_empty());
    }

    #[test]
    fn assumption_violation_is_winning() {
        // 0 -u-> 0 forever avoids the assumption a
        let t = table(&[("u", false), ("a", false), ("g", true)]);
        let p = lts(&t, 1, &[(0, "u", 0)]);
        let goal = EffectiveGoal::plain(Gr1Goal::new(
            vec![EventExpr::event(t.lookup("a").unwrap())],
            vec![EventExpr::event(t.lookup("g").unwrap())],
        ));
        let r = solve_gr1(&p, &t.controllable_set(), &goal);
        assert!(r.initial_winning());
    }

    #[test]
    fn mu_loops_are_restored() {
        let t = table(&[("u", false), ("g", true)]);
        let u = t.lookup("u").unwrap();
        let p = lts(&t, 1, &[(0, "u", 0), (0, "g", 0)]);
        let goal = EffectiveGoal {
            base: live(&t, &["g"]).base,
            mu: EventSet::from([u]),
        };
        let r = solve_gr1(&p, &t.controllable_set(), &goal);
        assert_eq!(r.removed_loops, vec![(0, u)]);
        let c = extract_live_controller(&r, &p).unwrap();
        let c = c.controller().unwrap();
        assert!(c.is_enabled(0, u));
        assert!(c.is_deterministic());
    }

    #[test]
    fn idle_keeps_stuck_states() {
        let t = table(&[("a", true)]);
        let p = lts(&t, 2, &[(0, "a", 1)]);
        let goal = EffectiveGoal::default();
        let r = solve_gr1(&p, &t.controllable_set(), &goal);
        assert!(!r.initial_winning());
        let (v, r) = extract_safe_controller(&p, &t.controllable_set(), &goal, SolveOptions { idle: true });
        assert_eq!(r.states.count(), 2);
        assert_eq!(v.controller().unwrap().state_count(), 2);
    }

    #[test]
    fn safe_controller_prunes_losing_uncontrollable_edges() {
        let t = table(&[("u3", false), ("g", true)]);
        // 0 -g-> 0, 0 -u3-> 1 (dead)
        let p = lts(&t, 2, &[(0, "g", 0), (0, "u3", 1)]);
        let goal = live(&t, &["g"]);
        let ext: EventSet = t.ids().collect();
        let (v, _) = extract_safe_controller(&p, &ext, &goal, SolveOptions::default());
        let s = v.controller().unwrap();
        assert_eq!(s.state_count(), 1);
        assert!(!s.edges().any(|(_, e, _)| t.name(e) == "u3"));
        let (v, _) = extract_safe_controller(&p, &t.controllable_set(), &goal, SolveOptions::default());
        assert!(!v.is_realizable());
    }
}
