//! Finite labelled transition systems and their algebra.
//!
//! Every plant component, controller, controlled subplant and quotient in
//! this crate is an [`Lts`]. States are dense indices; events are indices
//! into one problem-wide [`EventTable`] shared through an `Arc`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type StateId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl EventId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub type EventSet = BTreeSet<EventId>;

/// Names and controllability flags of every event of one problem.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventTable {
    names: Vec<String>,
    controllable: Vec<bool>,
    index: HashMap<String, EventId>,
}

impl EventTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name`. Re-adding an existing name returns the old id and
    /// leaves its controllability untouched.
    pub fn add(&mut self, name: &str, controllable: bool) -> EventId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = EventId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.controllable.push(controllable);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn set_controllable(&mut self, id: EventId, controllable: bool) {
        self.controllable[id.index()] = controllable;
    }

    pub fn lookup(&self, name: &str) -> Option<EventId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: EventId) -> &str {
        &self.names[id.index()]
    }

    pub fn is_controllable(&self, id: EventId) -> bool {
        self.controllable[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> {
        (0..self.names.len() as u32).map(EventId)
    }

    pub fn controllable_set(&self) -> EventSet {
        self.ids().filter(|&e| self.is_controllable(e)).collect()
    }

    pub fn uncontrollable_set(&self) -> EventSet {
        self.ids().filter(|&e| !self.is_controllable(e)).collect()
    }

    pub fn controllable_mask(&self) -> Vec<bool> {
        self.controllable.clone()
    }

    pub fn format_set(&self, set: &EventSet) -> String {
        let names: Vec<&str> = set.iter().map(|&e| self.name(e)).collect();
        format!("{{{}}}", names.join(", "))
    }
}

/// Dense bit set over the states of one LTS.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    words: Vec<u64>,
    len: usize,
}

impl StateSet {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn from_iter_with_len(len: usize, items: impl IntoIterator<Item = StateId>) -> Self {
        let mut s = Self::empty(len);
        for i in items {
            s.insert(i);
        }
        s
    }

    /// Capacity (the state count of the LTS this set ranges over).
    pub fn universe(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: StateId) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    #[inline]
    pub fn insert(&mut self, i: StateId) -> bool {
        assert!(i < self.len, "state {i} outside set universe {}", self.len);
        let had = self.contains(i);
        self.words[i / 64] |= 1 << (i % 64);
        !had
    }

    #[inline]
    pub fn remove(&mut self, i: StateId) {
        if i < self.len {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersect_with(&mut self, other: &StateSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &StateSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finite labelled transition system over a shared [`EventTable`].
///
/// `deadlock_sink` marks the distinguished deadlock state of a controlled
/// subplant. It has no outgoing transitions. Composition collapses every
/// product state that has a sink component into a single product sink, so
/// reaching it always means a global deadlock.
#[derive(Clone)]
pub struct Lts {
    name: String,
    events: Arc<EventTable>,
    alphabet: EventSet,
    transitions: Vec<Vec<(EventId, StateId)>>,
    initial: StateId,
    deadlock_sink: Option<StateId>,
    state_names: Option<Vec<String>>,
}

impl fmt::Debug for Lts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "lts {} ({} states, init {}, alphabet {})",
            self.name,
            self.state_count(),
            self.initial,
            self.events.format_set(&self.alphabet)
        )?;
        for (s, e, t) in self.edges() {
            writeln!(f, "  {s} -{}-> {t}", self.events.name(e))?;
        }
        Ok(())
    }
}

impl Lts {
    pub fn new(
        name: impl Into<String>,
        events: Arc<EventTable>,
        alphabet: EventSet,
        state_count: usize,
        initial: StateId,
    ) -> Result<Self> {
        let name = name.into();
        if initial >= state_count {
            return Err(Error::InvalidState {
                lts: name,
                state: initial,
                count: state_count,
            });
        }
        if let Some(e) = alphabet.iter().find(|e| e.index() >= events.len()) {
            return Err(Error::Usage(format!("event id {} outside event table", e.0)));
        }
        Ok(Self {
            name,
            events,
            alphabet,
            transitions: vec![Vec::new(); state_count],
            initial,
            deadlock_sink: None,
            state_names: None,
        })
    }

    pub fn add_transition(&mut self, from: StateId, event: EventId, to: StateId) -> Result<()> {
        for s in [from, to] {
            if s >= self.state_count() {
                return Err(Error::InvalidState {
                    lts: self.name.clone(),
                    state: s,
                    count: self.state_count(),
                });
            }
        }
        if !self.alphabet.contains(&event) {
            return Err(Error::EventNotInAlphabet {
                lts: self.name.clone(),
                event: self.events.name(event).to_string(),
            });
        }
        self.insert_edge(from, event, to);
        Ok(())
    }

    #[inline]
    fn insert_edge(&mut self, from: StateId, event: EventId, to: StateId) {
        let out = &mut self.transitions[from];
        if let Err(pos) = out.binary_search(&(event, to)) {
            out.insert(pos, (event, to));
        }
    }

    /// Adds a fresh state with no transitions and returns its id.
    pub fn add_state(&mut self) -> StateId {
        self.transitions.push(Vec::new());
        if let Some(names) = &mut self.state_names {
            names.push(format!("s{}", names.len()));
        }
        self.transitions.len() - 1
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn events(&self) -> &Arc<EventTable> {
        &self.events
    }

    pub fn alphabet(&self) -> &EventSet {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn deadlock_sink(&self) -> Option<StateId> {
        self.deadlock_sink
    }

    pub fn set_deadlock_sink(&mut self, sink: Option<StateId>) {
        if let Some(s) = sink {
            assert!(s < self.state_count() && self.transitions[s].is_empty());
        }
        self.deadlock_sink = sink;
    }

    pub fn is_sink(&self, s: StateId) -> bool {
        self.deadlock_sink == Some(s)
    }

    pub fn set_state_names(&mut self, names: Vec<String>) {
        assert_eq!(names.len(), self.state_count());
        self.state_names = Some(names);
    }

    pub fn state_name(&self, s: StateId) -> String {
        match &self.state_names {
            Some(names) => names[s].clone(),
            None if self.is_sink(s) => "bottom".to_string(),
            None => format!("s{s}"),
        }
    }

    /// Outgoing transitions of `s`, sorted by (event, target).
    pub fn out(&self, s: StateId) -> &[(EventId, StateId)] {
        &self.transitions[s]
    }

    /// Targets of `event` from `s`.
    pub fn successors(&self, s: StateId, event: EventId) -> impl Iterator<Item = StateId> + '_ {
        let out = &self.transitions[s];
        let start = out.partition_point(|&(e, _)| e < event);
        out[start..]
            .iter()
            .take_while(move |&&(e, _)| e == event)
            .map(|&(_, t)| t)
    }

    /// The unique target of `event` from `s` in a deterministic LTS.
    pub fn step(&self, s: StateId, event: EventId) -> Option<StateId> {
        self.successors(s, event).next()
    }

    pub fn has_transition(&self, s: StateId, event: EventId, t: StateId) -> bool {
        self.transitions[s].binary_search(&(event, t)).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, EventId, StateId)> + '_ {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(s, out)| out.iter().map(move |&(e, t)| (s, e, t)))
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// The set of events with an outgoing transition at `s`.
    pub fn enabled(&self, s: StateId) -> EventSet {
        self.transitions[s].iter().map(|&(e, _)| e).collect()
    }

    pub fn is_enabled(&self, s: StateId, event: EventId) -> bool {
        self.successors(s, event).next().is_some()
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .iter()
            .all(|out| out.windows(2).all(|w| w[0].0 != w[1].0))
    }

    pub fn reachable(&self) -> StateSet {
        let mut seen = StateSet::empty(self.state_count());
        let mut queue = VecDeque::from([self.initial]);
        seen.insert(self.initial);
        while let Some(s) = queue.pop_front() {
            for &(_, t) in &self.transitions[s] {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Reachable states without outgoing transitions.
    pub fn find_deadlocks(&self) -> StateSet {
        let mut dead = self.reachable();
        for s in 0..self.state_count() {
            if !self.transitions[s].is_empty() {
                dead.remove(s);
            }
        }
        dead
    }

    /// Restricts to `keep` (transitions in `keep × Σ × keep`), renumbering
    /// states densely in increasing order of old index.
    pub fn induced_subgraph(&self, keep: &StateSet) -> Result<Subgraph> {
        if !keep.contains(self.initial) {
            return Err(Error::InitialExcluded(self.name.clone()));
        }
        let mut old_to_new = vec![None; self.state_count()];
        let mut new_to_old = Vec::new();
        for s in keep.iter() {
            old_to_new[s] = Some(new_to_old.len());
            new_to_old.push(s);
        }
        let mut lts = Lts {
            name: self.name.clone(),
            events: self.events.clone(),
            alphabet: self.alphabet.clone(),
            transitions: vec![Vec::new(); new_to_old.len()],
            initial: old_to_new[self.initial].unwrap(),
            deadlock_sink: self.deadlock_sink.and_then(|s| old_to_new[s]),
            state_names: self
                .state_names
                .as_ref()
                .map(|n| new_to_old.iter().map(|&s| n[s].clone()).collect()),
        };
        for (new, &old) in new_to_old.iter().enumerate() {
            lts.transitions[new] = self.transitions[old]
                .iter()
                .filter_map(|&(e, t)| old_to_new[t].map(|t| (e, t)))
                .collect();
        }
        Ok(Subgraph {
            lts,
            old_to_new,
            new_to_old,
        })
    }

    /// The reachable part, renumbered.
    pub fn trim(&self) -> Lts {
        self.induced_subgraph(&self.reachable())
            .expect("initial state is always reachable")
            .lts
    }

    /// Drops every self-loop `(s, l, s)` with `l ∈ labels` and returns the
    /// removed loops so that [`Lts::add_self_loops`] can restore them.
    pub fn remove_self_loops(&self, labels: &EventSet) -> (Lts, Vec<(StateId, EventId)>) {
        let mut out = self.clone();
        let mut removed = Vec::new();
        for (s, edges) in out.transitions.iter_mut().enumerate() {
            edges.retain(|&(e, t)| {
                let drop = t == s && labels.contains(&e);
                if drop {
                    removed.push((s, e));
                }
                !drop
            });
        }
        (out, removed)
    }

    pub fn add_self_loops(&self, loops: &[(StateId, EventId)]) -> Lts {
        let mut out = self.clone();
        for &(s, e) in loops {
            out.alphabet.insert(e);
            out.insert_edge(s, e, s);
        }
        out
    }

    pub(crate) fn from_raw(
        name: String,
        events: Arc<EventTable>,
        alphabet: EventSet,
        transitions: Vec<Vec<(EventId, StateId)>>,
        initial: StateId,
        deadlock_sink: Option<StateId>,
    ) -> Lts {
        let mut transitions = transitions;
        for out in &mut transitions {
            out.sort_unstable();
            out.dedup();
        }
        Lts {
            name,
            events,
            alphabet,
            transitions,
            initial,
            deadlock_sink,
            state_names: None,
        }
    }
}

/// Result of [`Lts::induced_subgraph`], with the renumbering both ways.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub lts: Lts,
    pub old_to_new: Vec<Option<StateId>>,
    pub new_to_old: Vec<StateId>,
}

fn check_tables(a: &Lts, b: &Lts) -> Result<()> {
    if Arc::ptr_eq(&a.events, &b.events) || a.events == b.events {
        Ok(())
    } else {
        Err(Error::TableMismatch(a.name.clone(), b.name.clone()))
    }
}

/// Synchronous product restricted to its reachable part.
pub fn compose(a: &Lts, b: &Lts) -> Result<Lts> {
    compose_mapped(a, b, usize::MAX).map(|(l, _)| l)
}

/// Like [`compose`] but also returns, for each product state, the pair of
/// component states it came from, and fails once more than `budget` states
/// have been created.
pub fn compose_mapped(a: &Lts, b: &Lts, budget: usize) -> Result<(Lts, Vec<(StateId, StateId)>)> {
    check_tables(a, b)?;
    let n_events = a.events.len();
    let mut in_a = vec![false; n_events];
    let mut in_b = vec![false; n_events];
    for e in &a.alphabet {
        in_a[e.index()] = true;
    }
    for e in &b.alphabet {
        in_b[e.index()] = true;
    }

    let mut index: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut pairs: Vec<(StateId, StateId)> = Vec::new();
    let mut transitions: Vec<Vec<(EventId, StateId)>> = Vec::new();
    let mut sink: Option<StateId> = None;
    let mut queue = VecDeque::new();
    let name = format!("{}||{}", a.name, b.name);

    let mut intern = |pair: (StateId, StateId),
                      pairs: &mut Vec<(StateId, StateId)>,
                      transitions: &mut Vec<Vec<(EventId, StateId)>>,
                      queue: &mut VecDeque<StateId>|
     -> Result<StateId> {
        let is_sink = a.is_sink(pair.0) || b.is_sink(pair.1);
        if is_sink {
            if let Some(s) = sink {
                return Ok(s);
            }
        } else if let Some(&s) = index.get(&pair) {
            return Ok(s);
        }
        let id = pairs.len();
        if id >= budget {
            return Err(Error::Budget {
                budget,
                what: name.clone(),
            });
        }
        pairs.push(pair);
        transitions.push(Vec::new());
        if is_sink {
            sink = Some(id);
        } else {
            index.insert(pair, id);
            queue.push_back(id);
        }
        Ok(id)
    };

    let init = intern(
        (a.initial, b.initial),
        &mut pairs,
        &mut transitions,
        &mut queue,
    )?;
    while let Some(p) = queue.pop_front() {
        let (sa, sb) = pairs[p];
        let mut out = Vec::new();
        for &(e, ta) in &a.transitions[sa] {
            if !in_b[e.index()] {
                out.push((e, (ta, sb)));
            } else {
                for tb in b.successors(sb, e) {
                    out.push((e, (ta, tb)));
                }
            }
        }
        for &(e, tb) in &b.transitions[sb] {
            if !in_a[e.index()] {
                out.push((e, (sa, tb)));
            }
        }
        let mut edges = Vec::with_capacity(out.len());
        for (e, pair) in out {
            let t = intern(pair, &mut pairs, &mut transitions, &mut queue)?;
            edges.push((e, t));
        }
        transitions[p] = edges;
    }

    let alphabet: EventSet = a.alphabet.union(&b.alphabet).copied().collect();
    let lts = Lts::from_raw(name, a.events.clone(), alphabet, transitions, init, sink);
    Ok((lts, pairs))
}

/// Left fold of [`compose`] over `parts`.
pub fn compose_all(parts: &[Lts]) -> Result<Lts> {
    compose_all_bounded(parts, usize::MAX)
}

pub fn compose_all_bounded(parts: &[Lts], budget: usize) -> Result<Lts> {
    let (first, rest) = parts.split_first().ok_or(Error::EmptyComposition)?;
    let mut acc = first.clone();
    for p in rest {
        acc = compose_mapped(&acc, p, budget)?.0;
    }
    Ok(acc)
}

/// A relabelling-invariant description of a deterministic LTS's reachable
/// part: states are numbered in BFS order from the initial state, exploring
/// outgoing transitions by increasing event id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    pub alphabet: Vec<EventId>,
    pub edges: Vec<(usize, EventId, usize)>,
    pub sink: Option<usize>,
    pub states: usize,
}

pub fn canonical_form(l: &Lts) -> CanonicalForm {
    let mut number = vec![usize::MAX; l.state_count()];
    let mut order = Vec::new();
    number[l.initial] = 0;
    order.push(l.initial);
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        for &(_, t) in l.out(s) {
            if number[t] == usize::MAX {
                number[t] = order.len();
                order.push(t);
            }
        }
        i += 1;
    }
    let mut edges: Vec<(usize, EventId, usize)> = order
        .iter()
        .flat_map(|&s| l.out(s).iter().map(move |&(e, t)| (s, e, t)))
        .map(|(s, e, t)| (number[s], e, number[t]))
        .collect();
    edges.sort_unstable();
    CanonicalForm {
        alphabet: l.alphabet.iter().copied().collect(),
        edges,
        sink: l
            .deadlock_sink
            .filter(|&s| number[s] != usize::MAX)
            .map(|s| number[s]),
        states: order.len(),
    }
}

/// Isomorphism of the reachable parts of two deterministic LTSs.
pub fn isomorphic(a: &Lts, b: &Lts) -> bool {
    canonical_form(a) == canonical_form(b)
}
