use std::sync::Arc;

use crate::error::{Error, Result};
use crate::goal::{goal_alphabet, Gr1Goal};
use crate::lts::{EventId, EventSet, EventTable, Lts};

/// Plant components, the event table fixing Σ_c, and the goal.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub events: Arc<EventTable>,
    pub parts: Vec<Lts>,
    pub goal: Gr1Goal,
}

impl ControlProblem {
    pub fn new(events: Arc<EventTable>, parts: Vec<Lts>, goal: Gr1Goal) -> Result<Self> {
        let p = Self { events, parts, goal };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Usage("a problem needs at least one LTS".into()));
        }
        for part in &self.parts {
            if !Arc::ptr_eq(part.events(), &self.events) && **part.events() != *self.events {
                return Err(Error::TableMismatch(part.name().into(), "problem".into()));
            }
            if !part.is_deterministic() {
                return Err(Error::Usage(format!("LTS `{}` is nondeterministic", part.name())));
            }
        }
        if goal_alphabet(&self.goal).iter().any(|e| e.index() >= self.events.len()) {
            return Err(Error::Usage("goal mentions an unknown event".into()));
        }
        Ok(())
    }

    pub fn controllable(&self) -> EventSet {
        self.events.controllable_set()
    }

    pub fn uncontrollable(&self) -> EventSet {
        self.events.uncontrollable_set()
    }

    pub fn alphabet(&self) -> EventSet {
        self.parts.iter().flat_map(|p| p.alphabet().iter().copied()).collect()
    }
}

/// Builds a problem from named events and string-labelled LTSs.
#[derive(Clone, Debug, Default)]
pub struct ProblemBuilder {
    table: EventTable,
    parts: Vec<PartSpec>,
}

#[derive(Clone, Debug)]
struct PartSpec {
    name: String,
    states: Vec<String>,
    init: usize,
    edges: Vec<(usize, EventId, usize)>,
    alphabet: EventSet,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn event(&mut self, name: &str, controllable: bool) -> EventId {
        self.table.add(name, controllable)
    }

    pub fn lookup(&self, name: &str) -> Option<EventId> {
        self.table.lookup(name)
    }

    pub fn table(&self) -> &EventTable {
        &self.table
    }

    /// Adds an LTS whose alphabet is the events on `edges` plus `extra`.
    pub fn lts(&mut self, name: &str, init: &str, edges: &[(&str, &str, &str)], extra: &[&str]) -> Result<()> {
        let mut states: Vec<String> = vec![init.to_string()];
        let intern = |s: &str, states: &mut Vec<String>| match states.iter().position(|x| x == s) {
            Some(i) => i,
            None => {
                states.push(s.to_string());
                states.len() - 1
            }
        };
        let mut out = Vec::new();
        let mut alphabet = EventSet::new();
        for &(from, ev, to) in edges {
            let e = self
                .table
                .lookup(ev)
                .ok_or_else(|| Error::Usage(format!("undeclared event `{ev}` in `{name}`")))?;
            let f = intern(from, &mut states);
            let t = intern(to, &mut states);
            out.push((f, e, t));
            alphabet.insert(e);
        }
        for ev in extra {
            let e = self
                .table
                .lookup(ev)
                .ok_or_else(|| Error::Usage(format!("undeclared event `{ev}` in `{name}`")))?;
            alphabet.insert(e);
        }
        self.parts.push(PartSpec {
            name: name.to_string(),
            states,
            init: 0,
            edges: out,
            alphabet,
        });
        Ok(())
    }

    pub fn build(self, goal: Gr1Goal) -> Result<ControlProblem> {
        let table = Arc::new(self.table);
        let mut parts = Vec::new();
        for p in self.parts {
            let mut l = Lts::new(p.name, table.clone(), p.alphabet, p.states.len(), p.init)?;
            for (f, e, t) in p.edges {
                l.add_transition(f, e, t)?;
            }
            l.set_state_names(p.states);
            parts.push(l);
        }
        ControlProblem::new(table, parts, goal)
    }
}
