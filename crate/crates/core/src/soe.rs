//! Minimization by synthesis observational equivalence.
//!
//! Local events Υ may be hidden; the quotient keeps every non-local event
//! observable. Only uncontrollable events are ever treated as local here.

use std::collections::{HashMap, VecDeque};

use crate::lts::{EventId, EventSet, Lts, StateId};

const EPS: u32 = u32::MAX;

/// Blocks over the reachable states; unreachable states map to `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub block_of: Vec<Option<usize>>,
    pub blocks: Vec<Vec<StateId>>,
}

impl Partition {
    fn from_ids(ids: &[Option<usize>]) -> Self {
        let mut remap = HashMap::new();
        let mut block_of = vec![None; ids.len()];
        let mut blocks: Vec<Vec<StateId>> = Vec::new();
        for (s, id) in ids.iter().enumerate() {
            if let Some(id) = id {
                let b = *remap.entry(*id).or_insert_with(|| {
                    blocks.push(Vec::new());
                    blocks.len() - 1
                });
                block_of[s] = Some(b);
                blocks[b].push(s);
            }
        }
        Self { block_of, blocks }
    }

    pub fn identity(l: &Lts) -> Self {
        let reach = l.reachable();
        Self::from_ids(&(0..l.state_count()).map(|s| reach.contains(s).then_some(s)).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn same(&self, a: StateId, b: StateId) -> bool {
        self.block_of[a].is_some() && self.block_of[a] == self.block_of[b]
    }
}

/// The local events Υ. Controllable events are never hidden.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HidingContext {
    pub upsilon: EventSet,
    /// Uncontrollable events no other component can block. Always
    /// includes Υ.
    pub unblockable: EventSet,
}

impl HidingContext {
    pub fn new(l: &Lts, upsilon: &EventSet) -> Self {
        let t = l.events();
        let upsilon: EventSet = upsilon
            .iter()
            .copied()
            .filter(|e| !t.is_controllable(*e) && l.alphabet().contains(e))
            .collect();
        Self {
            unblockable: upsilon.clone(),
            upsilon,
        }
    }

    /// Adds the uncontrollable events of `unshared` to the unblockable set.
    pub fn with_unblockable(mut self, l: &Lts, unshared: &EventSet) -> Self {
        let t = l.events();
        self.unblockable
            .extend(unshared.iter().filter(|e| !t.is_controllable(**e) && l.alphabet().contains(e)));
        self
    }

    pub fn none() -> Self {
        Self {
            upsilon: EventSet::new(),
            unblockable: EventSet::new(),
        }
    }

    fn hidden(&self, e: EventId) -> bool {
        self.upsilon.contains(&e)
    }
}

/// Υ-closure of every reachable state (including itself).
fn closures(l: &Lts, ctx: &HidingContext, reach: &[bool]) -> Vec<Vec<StateId>> {
    let n = l.state_count();
    let mut out = vec![Vec::new(); n];
    let mut mark = vec![usize::MAX; n];
    for x in 0..n {
        if !reach[x] {
            continue;
        }
        let mut stack = vec![x];
        mark[x] = x;
        let mut w = Vec::new();
        while let Some(s) = stack.pop() {
            w.push(s);
            for &(e, t) in l.out(s) {
                if ctx.hidden(e) && mark[t] != x {
                    mark[t] = x;
                    stack.push(t);
                }
            }
        }
        w.sort_unstable();
        out[x] = w;
    }
    out
}

fn reach_mask(l: &Lts) -> Vec<bool> {
    let r = l.reachable();
    (0..l.state_count()).map(|s| r.contains(s)).collect()
}

/// The sink alone, then states with and without an outgoing unblockable
/// step. Keeping the last two apart means every state of a block that
/// carries a collapsed local loop can move on its own.
fn initial_ids(l: &Lts, ctx: Option<&HidingContext>, reach: &[bool]) -> Vec<Option<usize>> {
    (0..l.state_count())
        .map(|s| {
            let local = ctx.is_some_and(|c| l.out(s).iter().any(|&(e, _)| c.hidden(e) || c.unblockable.contains(&e)));
            reach[s].then_some(if l.is_sink(s) { 0 } else { 1 + usize::from(local) })
        })
        .collect()
}

/// Splits blocks until every two states of a block have the same saturated
/// signature: Υ-reachable blocks, and blocks reached by an observable event
/// surrounded by uncontrollable Υ steps (before only, for controllables).
fn refine(l: &Lts, ctx: &HidingContext, w: &[Vec<StateId>], mut ids: Vec<Option<usize>>) -> Partition {
    let n = l.state_count();
    let mut count = ids.iter().flatten().collect::<std::collections::HashSet<_>>().len();
    let table = l.events();
    loop {
        let mut keys: HashMap<(usize, Vec<(u32, usize)>), usize> = HashMap::new();
        let mut next = vec![None; n];
        for x in 0..n {
            let Some(b) = ids[x] else { continue };
            let mut sig = Vec::new();
            for &y in &w[x] {
                sig.push((EPS, ids[y].unwrap()));
                for &(a, z) in l.out(y) {
                    if ctx.hidden(a) {
                        continue;
                    }
                    if table.is_controllable(a) {
                        sig.push((a.0, ids[z].unwrap()));
                    } else {
                        for &z2 in &w[z] {
                            sig.push((a.0, ids[z2].unwrap()));
                        }
                    }
                }
            }
            sig.sort_unstable();
            sig.dedup();
            let k = keys.len();
            next[x] = Some(*keys.entry((b, sig)).or_insert(k));
        }
        let new_count = keys.len();
        ids = next;
        if new_count == count {
            return Partition::from_ids(&ids);
        }
        count = new_count;
    }
}

/// A synthesis observational equivalence for `ctx`: the greatest partition,
/// with the deadlock sink isolated, that is stable under saturated
/// signatures.
pub fn compute_soe(l: &Lts, ctx: &HidingContext) -> Partition {
    let reach = reach_mask(l);
    let w = closures(l, ctx, &reach);
    refine(l, ctx, &w, initial_ids(l, None, &reach))
}

/// Checks both conditions of the equivalence for every same-block pair.
/// Works for any Υ, including controllable local events.
pub fn verify_soe(l: &Lts, p: &Partition, upsilon: &EventSet) -> bool {
    let table = l.events();
    let hidden_u = |e: EventId| upsilon.contains(&e) && !table.is_controllable(e);
    let closure = |from: &[StateId]| -> Vec<StateId> {
        let mut seen: Vec<bool> = vec![false; l.state_count()];
        let mut q: VecDeque<StateId> = from.iter().copied().collect();
        for &s in from {
            seen[s] = true;
        }
        let mut out = Vec::new();
        while let Some(s) = q.pop_front() {
            out.push(s);
            for &(e, t) in l.out(s) {
                if hidden_u(e) && !seen[t] {
                    seen[t] = true;
                    q.push_back(t);
                }
            }
        }
        out
    };
    for block in &p.blocks {
        for &x1 in block {
            for &x2 in block {
                for &(ev, y1) in l.out(x1) {
                    let Some(target) = p.block_of[y1] else { return false };
                    let found = if !table.is_controllable(ev) {
                        let a = closure(&[x2]);
                        let b: Vec<StateId> = if upsilon.contains(&ev) {
                            a
                        } else {
                            a.iter().flat_map(|&s| l.successors(s, ev)).collect()
                        };
                        closure(&b).iter().any(|&y2| p.block_of[y2] == Some(target))
                    } else {
                        // Υ-paths from x2 whose controllable steps stay ∼ x1
                        let mut seen = vec![false; l.state_count()];
                        let mut q = VecDeque::from([x2]);
                        seen[x2] = true;
                        let mut d = Vec::new();
                        while let Some(s) = q.pop_front() {
                            d.push(s);
                            for &(e, t) in l.out(s) {
                                if !upsilon.contains(&e) || seen[t] {
                                    continue;
                                }
                                if table.is_controllable(e) && !p.same(t, x1) {
                                    continue;
                                }
                                seen[t] = true;
                                q.push_back(t);
                            }
                        }
                        if upsilon.contains(&ev) {
                            d.iter().any(|&y2| p.block_of[y2] == Some(target))
                        } else {
                            d.iter()
                                .flat_map(|&s| l.successors(s, ev))
                                .any(|y2| p.block_of[y2] == Some(target))
                        }
                    };
                    if !found {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// The quotient over `p` and the labels of transitions it turns into new
/// self-loops.
pub fn quotient(l: &Lts, p: &Partition) -> (Lts, EventSet) {
    let mut trans = vec![Vec::new(); p.len()];
    let mut mu = EventSet::new();
    for (s, e, t) in l.edges() {
        let (Some(bs), Some(bt)) = (p.block_of[s], p.block_of[t]) else { continue };
        if bs == bt && s != t {
            mu.insert(e);
        }
        trans[bs].push((e, bt));
    }
    let sink = l.deadlock_sink().and_then(|s| p.block_of[s]);
    let q = Lts::from_raw(
        format!("{}_min", l.name()),
        l.events().clone(),
        l.alphabet().clone(),
        trans,
        p.block_of[l.initial()].expect("initial state is reachable"),
        sink.filter(|&b| p.blocks[b].len() == 1),
    );
    (q, mu)
}

#[derive(Clone, Debug)]
pub struct Minimized {
    pub lts: Lts,
    pub mu_prime: EventSet,
    pub partition: Partition,
    /// Υ actually hidden, after any shrinking.
    pub upsilon: EventSet,
    pub splits: usize,
}

/// Quotient by an equivalence chosen so that the result is deterministic,
/// collapses only local transitions, and has no local cycles other than
/// self-loops.
///
/// Conflicts are repaired by splitting blocks along Υ-strongly-connected
/// atoms and re-refining; when a conflict lies inside an atom, the atom's
/// labels are removed from Υ and the computation restarts.
pub fn quotient_deterministic(l: &Lts, ctx: &HidingContext) -> Minimized {
    let reach = reach_mask(l);
    let mut ctx = ctx.clone();
    let mut splits = 0;
    'restart: loop {
        let w = closures(l, &ctx, &reach);
        let atom = atoms(l, &ctx, &reach);
        let mut ids = initial_ids(l, Some(&ctx), &reach);
        loop {
            let p = refine(l, &ctx, &w, ids);
            match find_conflict(l, &ctx, &p, &atom) {
                Conflict::None => {
                    let (q, mu) = quotient(l, &p);
                    if let Some(labels) = local_cycle_labels(&q, &ctx) {
                        ctx.upsilon.retain(|e| !labels.contains(e));
                        continue 'restart;
                    }
                    return Minimized {
                        lts: q,
                        mu_prime: mu,
                        partition: p,
                        upsilon: ctx.upsilon,
                        splits,
                    };
                }
                Conflict::Split(groups) => {
                    splits += 1;
                    let mut next: Vec<Option<usize>> = p.block_of.clone();
                    let base = p.len();
                    for (g, states) in groups.iter().enumerate().skip(1) {
                        for &s in states {
                            next[s] = Some(base + g);
                        }
                    }
                    ids = next;
                }
                Conflict::Atom(a) => {
                    let labels = atom_labels(l, &ctx, &atom, a);
                    ctx.upsilon.retain(|e| !labels.contains(e));
                    continue 'restart;
                }
            }
        }
    }
}

enum Conflict {
    None,
    /// New groups for one block; group 0 keeps the old id.
    Split(Vec<Vec<StateId>>),
    /// A conflict between states of one atom.
    Atom(usize),
}

fn find_conflict(l: &Lts, ctx: &HidingContext, p: &Partition, atom: &[usize]) -> Conflict {
    for block in &p.blocks {
        // an observable edge inside the block
        for &x in block {
            for &(e, y) in l.out(x) {
                if x != y && !ctx.hidden(e) && p.same(x, y) {
                    if atom[x] == atom[y] {
                        return Conflict::Atom(atom[x]);
                    }
                    let (a, b): (Vec<_>, Vec<_>) = block.iter().partition(|&&s| atom[s] != atom[y]);
                    return Conflict::Split(vec![a, b]);
                }
            }
        }
        // one label leading to two blocks
        let mut by_label: HashMap<EventId, usize> = HashMap::new();
        let mut bad = None;
        'scan: for &x in block {
            for &(e, y) in l.out(x) {
                let by = p.block_of[y].unwrap();
                match by_label.get(&e) {
                    Some(&b) if b != by => {
                        bad = Some(e);
                        break 'scan;
                    }
                    _ => {
                        by_label.insert(e, by);
                    }
                }
            }
        }
        let Some(e) = bad else { continue };
        let mut atom_target: HashMap<usize, usize> = HashMap::new();
        for &x in block {
            if let Some(y) = l.step(x, e) {
                let by = p.block_of[y].unwrap();
                if let Some(&prev) = atom_target.get(&atom[x]) {
                    if prev != by {
                        return Conflict::Atom(atom[x]);
                    }
                }
                atom_target.insert(atom[x], by);
            }
        }
        let mut order: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<StateId>> = vec![Vec::new()];
        for &x in block {
            let g = match atom_target.get(&atom[x]) {
                None => 0,
                Some(&t) => match order.iter().position(|&o| o == t) {
                    Some(i) => i,
                    None => {
                        order.push(t);
                        order.len() - 1
                    }
                },
            };
            if groups.len() <= g {
                groups.resize(g + 1, Vec::new());
            }
            groups[g].push(x);
        }
        return Conflict::Split(groups);
    }
    Conflict::None
}

/// Strongly connected components of the Υ-edge graph.
fn atoms(l: &Lts, ctx: &HidingContext, reach: &[bool]) -> Vec<usize> {
    let n = l.state_count();
    // Kosaraju: forward finish order, then reverse sweep
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for r in 0..n {
        if seen[r] || !reach[r] {
            continue;
        }
        seen[r] = true;
        let mut stack = vec![(r, 0usize)];
        while let Some(&mut (s, ref mut i)) = stack.last_mut() {
            let out = l.out(s);
            if *i < out.len() {
                let (e, t) = out[*i];
                *i += 1;
                if ctx.hidden(e) && !seen[t] {
                    seen[t] = true;
                    stack.push((t, 0));
                }
            } else {
                order.push(s);
                stack.pop();
            }
        }
    }
    let mut rev = vec![Vec::new(); n];
    for (s, e, t) in l.edges() {
        if ctx.hidden(e) && reach[s] {
            rev[t].push(s);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut c = 0;
    for &r in order.iter().rev() {
        if comp[r] != usize::MAX {
            continue;
        }
        let mut stack = vec![r];
        comp[r] = c;
        while let Some(s) = stack.pop() {
            for &p in &rev[s] {
                if comp[p] == usize::MAX {
                    comp[p] = c;
                    stack.push(p);
                }
            }
        }
        c += 1;
    }
    comp
}

fn atom_labels(l: &Lts, ctx: &HidingContext, atom: &[usize], a: usize) -> EventSet {
    let mut labels: EventSet = l
        .edges()
        .filter(|&(s, e, t)| atom[s] == a && atom[t] == a && ctx.hidden(e))
        .map(|(_, e, _)| e)
        .collect();
    if labels.is_empty() {
        // a single-state atom: hiding is not the culprit, but shrinking
        // must still make progress
        labels = l
            .edges()
            .filter(|&(s, e, _)| atom[s] == a && ctx.hidden(e))
            .map(|(_, e, _)| e)
            .collect();
    }
    if labels.is_empty() {
        labels = ctx.upsilon.clone();
    }
    labels
}

/// Labels on a cycle of local transitions through two or more states.
pub fn local_cycle_labels(q: &Lts, ctx: &HidingContext) -> Option<EventSet> {
    let n = q.state_count();
    let reach = vec![true; n];
    let stripped = Lts::from_raw(
        String::new(),
        q.events().clone(),
        q.alphabet().clone(),
        (0..n)
            .map(|s| q.out(s).iter().copied().filter(|&(e, t)| t != s && ctx.hidden(e)).collect())
            .collect(),
        q.initial(),
        None,
    );
    let comp = atoms(&stripped, ctx, &reach);
    let labels: EventSet = stripped
        .edges()
        .filter(|&(s, _, t)| comp[s] == comp[t])
        .map(|(_, e, _)| e)
        .collect();
    (!labels.is_empty()).then_some(labels)
}

/// Every cycle of `upsilon` transitions in `q` consists of self-loops only.
pub fn self_loop_property(q: &Lts, upsilon: &EventSet) -> bool {
    local_cycle_labels(
        q,
        &HidingContext {
            upsilon: upsilon.clone(),
            unblockable: upsilon.clone(),
        },
    )
    .is_none()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::lts::EventTable;

    fn build(spec: &[(&str, bool)], n: usize, edges: &[(usize, &str, usize)]) -> Lts {
        let mut t = EventTable::new();
        for &(name, c) in spec {
            t.add(name, c);
        }
        let t = Arc::new(t);
        let alphabet = t.ids().collect();
        let mut l = Lts::new("m", t.clone(), alphabet, n, 0).unwrap();
        for &(s, e, d) in edges {
            l.add_transition(s, t.lookup(e).unwrap(), d).unwrap();
        }
        l
    }

    fn ev(l: &Lts, n: &str) -> EventId {
        l.events().lookup(n).unwrap()
    }

    #[test]
    fn empty_upsilon_is_bisimulation() {
        // 0 -a-> 1 -a-> 1 and 2 unreachable: 0 ~ 1
        let l = build(&[("a", true)], 3, &[(0, "a", 1), (1, "a", 1), (2, "a", 2)]);
        let p = compute_soe(&l, &HidingContext::none());
        assert_eq!(p.len(), 1);
        assert!(verify_soe(&l, &p, &EventSet::new()));
        // 0 -a-> 1 -b-> 0 vs distinct behaviour
        let l = build(&[("a", true), ("b", true)], 2, &[(0, "a", 1), (1, "b", 0)]);
        assert_eq!(compute_soe(&l, &HidingContext::none()).len(), 2);
    }

    #[test]
    fn local_step_collapses() {
        // 0 -t-> 1, both then do c to 2; 2 loops on d
        let l = build(
            &[("t", false), ("c", true), ("d", true)],
            3,
            &[(0, "t", 1), (0, "c", 2), (1, "c", 2), (2, "d", 2)],
        );
        let ctx = HidingContext::new(&l, &EventSet::from([ev(&l, "t")]));
        let p = compute_soe(&l, &ctx);
        assert!(p.same(0, 1));
        assert!(verify_soe(&l, &p, &ctx.upsilon));
        let (q, mu) = quotient(&l, &p);
        assert_eq!(mu, EventSet::from([ev(&l, "t")]));
        assert!(q.has_transition(0, ev(&l, "t"), 0));
    }

    #[test]
    fn identity_partition_always_verifies() {
        let l = build(
            &[("t", false), ("c", true), ("u", false)],
            4,
            &[(0, "t", 1), (1, "c", 2), (2, "u", 3), (3, "t", 0), (0, "u", 2)],
        );
        let p = Partition::identity(&l);
        assert!(verify_soe(&l, &p, &EventSet::from([ev(&l, "t")])));
        let (q, mu) = quotient(&l, &p);
        assert!(mu.is_empty());
        assert!(crate::lts::isomorphic(&q, &l));
    }

    #[test]
    fn merging_different_uncontrollable_successors_fails() {
        // 0 -u-> 1, 1 -u-> 2, 2 stuck: merging 0 and 1 breaks condition 1
        let l = build(&[("u", false), ("c", true)], 3, &[(0, "u", 1), (1, "u", 2), (2, "c", 2)]);
        let bad = Partition {
            block_of: vec![Some(0), Some(0), Some(1)],
            blocks: vec![vec![0, 1], vec![2]],
        };
        assert!(!verify_soe(&l, &bad, &EventSet::new()));
    }

    #[test]
    fn nondeterministic_quotient_is_split() {
        // 0 ~ 1 via the local t, but their a-successors 2 and 3 differ
        let l = build(
            &[("t", false), ("a", false), ("b", true), ("d", true)],
            4,
            &[(0, "t", 1), (1, "t", 1), (0, "a", 2), (1, "a", 3), (3, "t", 2), (2, "b", 2), (3, "d", 3)],
        );
        let ctx = HidingContext::new(&l, &EventSet::from([ev(&l, "t")]));
        let p = compute_soe(&l, &ctx);
        assert!(p.same(0, 1));
        assert!(verify_soe(&l, &p, &ctx.upsilon));
        assert!(!quotient(&l, &p).0.is_deterministic());
        let r = quotient_deterministic(&l, &ctx);
        assert!(r.splits >= 1);
        assert!(r.lts.is_deterministic());
        assert!(verify_soe(&l, &r.partition, &r.upsilon));
        assert!(self_loop_property(&r.lts, &r.upsilon));
    }

    #[test]
    fn sink_is_never_merged() {
        let l = build(&[("u", false), ("x", false)], 3, &[(0, "u", 1), (0, "x", 2)]);
        let mut l = l;
        l.set_deadlock_sink(Some(2));
        let ctx = HidingContext::new(&l, &EventSet::new());
        let p = compute_soe(&l, &ctx);
        assert!(!p.same(1, 2) || p.blocks[p.block_of[2].unwrap()].len() == 1);
        assert_eq!(p.blocks[p.block_of[2].unwrap()], vec![2]);
    }

    #[test]
    fn controllables_are_never_hidden() {
        let l = build(&[("c", true)], 1, &[(0, "c", 0)]);
        let ctx = HidingContext::new(&l, &EventSet::from([ev(&l, "c")]));
        assert!(ctx.upsilon.is_empty());
    }
}
