//! GR(1) goals over events.
//!
//! A trace position carries exactly one event, and a literal `e` is true
//! there iff the occurring event is `e`. Assumptions and guarantees are
//! boolean combinations of such literals kept in conjunctive normal form.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::lts::{EventId, EventSet, EventTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub event: EventId,
    pub positive: bool,
}

impl Literal {
    pub fn pos(event: EventId) -> Self {
        Self {
            event,
            positive: true,
        }
    }

    pub fn neg(event: EventId) -> Self {
        Self {
            event,
            positive: false,
        }
    }

    #[inline]
    pub fn holds(self, label: EventId) -> bool {
        (self.event == label) == self.positive
    }
}

/// Expression tree as written by users; converted to [`EventExpr`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    True,
    False,
    Event(EventId),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

/// A boolean combination of event literals in CNF.
///
/// The empty clause list is ⊤; a list holding one empty clause is ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EventExpr {
    clauses: Vec<Vec<Literal>>,
}

impl EventExpr {
    pub fn top() -> Self {
        Self {
            clauses: Vec::new(),
        }
    }

    pub fn bottom() -> Self {
        Self {
            clauses: vec![Vec::new()],
        }
    }

    pub fn event(e: EventId) -> Self {
        Self::from_clauses(vec![vec![Literal::pos(e)]])
    }

    pub fn not_event(e: EventId) -> Self {
        Self::from_clauses(vec![vec![Literal::neg(e)]])
    }

    /// `⋀_{l ∈ events} ¬l`, the per-position body of the μ assumption.
    pub fn none_of(events: &EventSet) -> Self {
        Self::from_clauses(events.iter().map(|&e| vec![Literal::neg(e)]).collect())
    }

    pub fn from_clauses(clauses: Vec<Vec<Literal>>) -> Self {
        let mut out: Vec<Vec<Literal>> = Vec::with_capacity(clauses.len());
        for mut c in clauses {
            c.sort_unstable();
            c.dedup();
            let tautology = c
                .windows(2)
                .any(|w| w[0].event == w[1].event && w[0].positive != w[1].positive);
            if tautology {
                continue;
            }
            if c.is_empty() {
                return Self::bottom();
            }
            out.push(c);
        }
        out.sort();
        out.dedup();
        Self { clauses: out }
    }

    pub fn from_tree(tree: &Expr) -> Self {
        Self::from_clauses(cnf(tree, true))
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn is_top(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_bottom(&self) -> bool {
        self.clauses.len() == 1 && self.clauses[0].is_empty()
    }

    pub fn and(&self, other: &EventExpr) -> EventExpr {
        let mut c = self.clauses.clone();
        c.extend(other.clauses.iter().cloned());
        Self::from_clauses(c)
    }

    pub fn events(&self) -> EventSet {
        self.clauses
            .iter()
            .flat_map(|c| c.iter().map(|l| l.event))
            .collect()
    }

    pub fn has_negative_literal(&self) -> bool {
        self.clauses.iter().flatten().any(|l| !l.positive)
    }

    /// Evaluates under the assignment where only `label` is true.
    pub fn eval(&self, label: EventId) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| l.holds(label)))
    }

    /// Replaces every literal over an event outside `keep` by `value` and
    /// simplifies.
    pub fn substitute_outside(&self, keep: &EventSet, value: bool) -> EventExpr {
        let mut out = Vec::new();
        for c in &self.clauses {
            let mut clause = Vec::new();
            let mut satisfied = false;
            for &l in c {
                if keep.contains(&l.event) {
                    clause.push(l);
                } else if value {
                    satisfied = true;
                    break;
                }
            }
            if !satisfied {
                out.push(clause);
            }
        }
        Self::from_clauses(out)
    }

    pub fn display(&self, table: &EventTable) -> String {
        if self.is_top() {
            return "true".into();
        }
        if self.is_bottom() {
            return "false".into();
        }
        let mut s = String::new();
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                s.push_str(" & ");
            }
            let wrap = c.len() > 1 && self.clauses.len() > 1;
            if wrap {
                s.push('(');
            }
            for (k, l) in c.iter().enumerate() {
                if k > 0 {
                    s.push_str(" | ");
                }
                if !l.positive {
                    s.push('!');
                }
                s.push_str(table.name(l.event));
            }
            if wrap {
                s.push(')');
            }
        }
        s
    }
}

fn cnf(tree: &Expr, polarity: bool) -> Vec<Vec<Literal>> {
    match (tree, polarity) {
        (Expr::True, true) | (Expr::False, false) => Vec::new(),
        (Expr::True, false) | (Expr::False, true) => vec![Vec::new()],
        (Expr::Event(e), p) => vec![vec![Literal {
            event: *e,
            positive: p,
        }]],
        (Expr::Not(inner), p) => cnf(inner, !p),
        (Expr::And(a, b), true) | (Expr::Or(a, b), false) => {
            let mut c = cnf(a, polarity);
            c.extend(cnf(b, polarity));
            c
        }
        (Expr::Or(a, b), true) | (Expr::And(a, b), false) => {
            let left = cnf(a, polarity);
            let right = cnf(b, polarity);
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut c = l.clone();
                    c.extend(r.iter().copied());
                    out.push(c);
                }
            }
            out
        }
    }
}

/// `⋀_i □◇assumptions[i] ⟹ ⋀_j □◇guarantees[j]`.
///
/// `vacuous` marks a goal whose antecedent collapsed to false during
/// projection: every trace satisfies it, but solvers still enforce legality
/// and deadlock-freedom.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Gr1Goal {
    pub assumptions: Vec<EventExpr>,
    pub guarantees: Vec<EventExpr>,
    pub vacuous: bool,
}

impl Gr1Goal {
    pub fn new(assumptions: Vec<EventExpr>, guarantees: Vec<EventExpr>) -> Self {
        Self {
            assumptions,
            guarantees,
            vacuous: false,
        }
        .simplified()
    }

    pub fn top() -> Self {
        Self::default()
    }

    /// Drops ⊤ assumptions and ⊤ guarantees; an assumption ≡ ⊥ makes the
    /// whole goal vacuous.
    pub fn simplified(mut self) -> Self {
        if self.vacuous || self.assumptions.iter().any(EventExpr::is_bottom) {
            return Self {
                assumptions: Vec::new(),
                guarantees: Vec::new(),
                vacuous: true,
            };
        }
        self.assumptions.retain(|a| !a.is_top());
        self.guarantees.retain(|g| !g.is_top());
        self
    }

    pub fn is_trivial(&self) -> bool {
        self.vacuous || self.guarantees.is_empty()
    }

    /// Holds on the lasso `prefix · cycle^ω`; only the cycle matters.
    pub fn holds_on_cycle(&self, cycle: &[EventId]) -> bool {
        self.violated_guarantee(cycle).is_none()
    }

    /// The first guarantee failing on `cycle^ω` while every assumption holds.
    pub fn violated_guarantee(&self, cycle: &[EventId]) -> Option<usize> {
        if self.vacuous || cycle.is_empty() {
            return None;
        }
        let assumed = self
            .assumptions
            .iter()
            .all(|a| cycle.iter().any(|&e| a.eval(e)));
        if !assumed {
            return None;
        }
        self.guarantees
            .iter()
            .position(|g| !cycle.iter().any(|&e| g.eval(e)))
    }

    pub fn display(&self, table: &EventTable) -> String {
        let mut s = String::from("goal");
        if self.vacuous {
            s.push_str(" assume false");
            return s;
        }
        if !self.assumptions.is_empty() {
            s.push_str(" assume ");
            let parts: Vec<String> = self.assumptions.iter().map(|a| a.display(table)).collect();
            s.push_str(&parts.join(", "));
        }
        s.push_str(" guarantee ");
        if self.guarantees.is_empty() {
            s.push_str("true");
        } else {
            let parts: Vec<String> = self.guarantees.iter().map(|g| g.display(table)).collect();
            s.push_str(&parts.join(", "));
        }
        s
    }

    pub fn describe(&self, table: &EventTable) -> String {
        let mut s = String::new();
        let ants: Vec<String> = self
            .assumptions
            .iter()
            .map(|a| format!("GF({})", a.display(table)))
            .collect();
        let cons: Vec<String> = self
            .guarantees
            .iter()
            .map(|g| format!("GF({})", g.display(table)))
            .collect();
        let _ = write!(
            s,
            "{} -> {}",
            if self.vacuous {
                "false".to_string()
            } else if ants.is_empty() {
                "true".to_string()
            } else {
                ants.join(" & ")
            },
            if cons.is_empty() {
                "true".to_string()
            } else {
                cons.join(" & ")
            }
        );
        s
    }
}

/// Events mentioned by `g` after simplification.
pub fn goal_alphabet(g: &Gr1Goal) -> EventSet {
    g.assumptions
        .iter()
        .chain(&g.guarantees)
        .flat_map(EventExpr::events)
        .collect()
}

/// Weakens `g` to a goal over `target` only: outside literals become ⊥ in
/// assumptions and ⊤ in guarantees.
pub fn project(g: &Gr1Goal, target: &EventSet) -> Gr1Goal {
    if g.vacuous {
        return g.clone();
    }
    Gr1Goal {
        assumptions: g
            .assumptions
            .iter()
            .map(|a| a.substitute_outside(target, false))
            .collect(),
        guarantees: g
            .guarantees
            .iter()
            .map(|c| c.substitute_outside(target, true))
            .collect(),
        vacuous: false,
    }
    .simplified()
}

/// [`project`] for a component that runs interleaved with other events.
///
/// A negative literal over a target event is also satisfied by every event
/// outside `target`, which the component never observes. When such events
/// exist, guarantee clauses containing a negative literal are dropped too,
/// so that the result only counts positions the component itself takes.
pub fn project_observable(g: &Gr1Goal, target: &EventSet, universe: &EventSet) -> Gr1Goal {
    let p = project(g, target);
    if universe.is_subset(target) || p.vacuous {
        return p;
    }
    Gr1Goal {
        assumptions: p.assumptions,
        guarantees: p
            .guarantees
            .iter()
            .map(|c| {
                EventExpr::from_clauses(
                    c.clauses()
                        .iter()
                        .filter(|cl| cl.iter().all(|l| l.positive))
                        .cloned()
                        .collect(),
                )
            })
            .collect(),
        vacuous: false,
    }
    .simplified()
}

/// `□◇⋀_{l∈mu} ¬l ⟹ base`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EffectiveGoal {
    pub base: Gr1Goal,
    pub mu: EventSet,
}

pub fn wrap_mu(g: &Gr1Goal, mu: &EventSet) -> EffectiveGoal {
    EffectiveGoal {
        base: g.clone(),
        mu: mu.clone(),
    }
}

impl EffectiveGoal {
    pub fn plain(base: Gr1Goal) -> Self {
        Self {
            base,
            mu: BTreeSet::new(),
        }
    }

    /// The equivalent GR(1) goal with the μ term folded into the assumptions.
    pub fn flatten(&self) -> Gr1Goal {
        if self.mu.is_empty() || self.base.vacuous {
            return self.base.clone();
        }
        let mut assumptions = self.base.assumptions.clone();
        assumptions.push(EventExpr::none_of(&self.mu));
        Gr1Goal {
            assumptions,
            guarantees: self.base.guarantees.clone(),
            vacuous: false,
        }
        .simplified()
    }

    pub fn violated_guarantee(&self, cycle: &[EventId]) -> Option<usize> {
        self.flatten().violated_guarantee(cycle)
    }

    pub fn holds_on_cycle(&self, cycle: &[EventId]) -> bool {
        self.violated_guarantee(cycle).is_none()
    }
}

pub fn edge_satisfies(e: &EventExpr, label: EventId) -> bool {
    e.eval(label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u32) -> Vec<EventId> {
        (0..n).map(EventId).collect()
    }

    #[test]
    fn edge_semantics() {
        let e = ids(5);
        let (u2, ua1, c2, u3) = (e[0], e[1], e[2], e[3]);
        assert!(edge_satisfies(&EventExpr::event(ua1), ua1));
        let none = EventExpr::none_of(&EventSet::from([u2, ua1, c2]));
        assert!(!edge_satisfies(&none, c2));
        assert!(edge_satisfies(&none, u3));
        assert!(edge_satisfies(&EventExpr::top(), u3));
        assert!(!edge_satisfies(&EventExpr::bottom(), u3));
    }

    #[test]
    fn cnf_conversion() {
        let e = ids(3);
        // !(a & b) | c  ==  (!a | !b | c)
        let tree = Expr::Or(
            Box::new(Expr::Not(Box::new(Expr::And(
                Box::new(Expr::Event(e[0])),
                Box::new(Expr::Event(e[1])),
            )))),
            Box::new(Expr::Event(e[2])),
        );
        let x = EventExpr::from_tree(&tree);
        assert_eq!(x.clauses().len(), 1);
        assert_eq!(x.clauses()[0].len(), 3);
        for &label in &e {
            assert_eq!(x.eval(label), !(label == e[0] && label == e[1]) || label == e[2]);
        }
        let taut = EventExpr::from_tree(&Expr::Or(
            Box::new(Expr::Event(e[0])),
            Box::new(Expr::Not(Box::new(Expr::Event(e[0])))),
        ));
        assert!(taut.is_top());
    }

    #[test]
    fn projection_drops_outside_guarantee() {
        // GF uA1 -> GF cG1 & GF cG2, without cG1
        let e = ids(3);
        let (ua1, cg1, cg2) = (e[0], e[1], e[2]);
        let g = Gr1Goal::new(
            vec![EventExpr::event(ua1)],
            vec![EventExpr::event(cg1), EventExpr::event(cg2)],
        );
        let p = project(&g, &EventSet::from([ua1, cg2]));
        assert_eq!(
            p,
            Gr1Goal::new(vec![EventExpr::event(ua1)], vec![EventExpr::event(cg2)])
        );
        assert_eq!(project(&g, &EventSet::from([ua1, cg1, cg2])), g);
    }

    #[test]
    fn projection_of_outside_assumption_is_vacuous() {
        let e = ids(2);
        let g = Gr1Goal::new(vec![EventExpr::event(e[0])], vec![EventExpr::event(e[1])]);
        let p = project(&g, &EventSet::from([e[1]]));
        assert!(p.vacuous);
        assert!(p.guarantees.is_empty());
        assert!(goal_alphabet(&p).is_empty());
    }

    #[test]
    fn observable_projection_drops_negative_guarantee_clauses() {
        let e = ids(3);
        let g = Gr1Goal::new(
            vec![],
            vec![EventExpr::not_event(e[0]), EventExpr::event(e[1])],
        );
        let target = EventSet::from([e[0], e[1]]);
        let universe = EventSet::from([e[0], e[1], e[2]]);
        let p = project_observable(&g, &target, &universe);
        assert_eq!(p.guarantees, vec![EventExpr::event(e[1])]);
        assert_eq!(project_observable(&g, &universe, &universe), g);
    }

    #[test]
    fn mu_wrapper() {
        let e = ids(3);
        let g = Gr1Goal::new(vec![], vec![EventExpr::event(e[2])]);
        assert_eq!(wrap_mu(&g, &EventSet::new()).flatten(), g);
        let w = wrap_mu(&g, &EventSet::from([e[0]]));
        // e0 forever: the μ assumption fails, so the goal holds
        assert!(w.holds_on_cycle(&[e[0]]));
        assert!(!w.holds_on_cycle(&[e[1]]));
        assert!(!g.holds_on_cycle(&[e[0]]));
        let nested = wrap_mu(&w.flatten(), &EventSet::from([e[1]]));
        let direct = wrap_mu(&g, &EventSet::from([e[0], e[1]]));
        // separate □◇¬l terms are weaker assumptions than one joint term
        for cycle in [&[e[0]][..], &[e[1]], &[e[0], e[1]], &[e[2]], &[e[0], e[2]]] {
            assert!(!nested.holds_on_cycle(cycle) || direct.holds_on_cycle(cycle));
        }
        assert!(direct.holds_on_cycle(&[e[0], e[1]]));
        assert!(!nested.holds_on_cycle(&[e[0], e[1]]));
        let merged = wrap_mu(&g, &EventSet::from([e[0]]));
        assert_eq!(merged.flatten(), wrap_mu(&g, &EventSet::from([e[0]])).flatten());
    }

    #[test]
    fn lasso_evaluation() {
        let e = ids(3);
        let g = Gr1Goal::new(vec![EventExpr::event(e[0])], vec![EventExpr::event(e[1])]);
        assert!(g.holds_on_cycle(&[e[2]]), "assumption fails");
        assert_eq!(g.violated_guarantee(&[e[0], e[2]]), Some(0));
        assert!(g.holds_on_cycle(&[e[0], e[1]]));
        assert!(Gr1Goal::top().holds_on_cycle(&[e[2]]));
    }
}
