//! Graphviz and JSON renderings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::lts::Lts;
use crate::problem::ControlProblem;

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// States as nodes, the deadlock sink double-circled, controllable edges
/// solid and uncontrollable edges dashed.
pub fn to_dot(l: &Lts) -> String {
    let table = l.events();
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(l.name()));
    out.push_str("  rankdir=LR;\n  node [shape=circle];\n  __start [shape=point];\n");
    for s in 0..l.state_count() {
        let shape = if l.is_sink(s) { " shape=doublecircle" } else { "" };
        let _ = writeln!(out, "  n{s} [label=\"{}\"{shape}];", dot_escape(&l.state_name(s)));
    }
    let _ = writeln!(out, "  __start -> n{};", l.initial());
    for (f, e, t) in l.edges() {
        let style = if table.is_controllable(e) { "solid" } else { "dashed" };
        let _ = writeln!(out, "  n{f} -> n{t} [label=\"{}\" style={style}];", dot_escape(table.name(e)));
    }
    out.push_str("}\n");
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct JsonEdge {
    pub from: usize,
    pub event: String,
    pub to: usize,
    pub controllable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JsonLts {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub sink: Option<usize>,
    pub alphabet: Vec<String>,
    pub transitions: Vec<JsonEdge>,
}

impl From<&Lts> for JsonLts {
    fn from(l: &Lts) -> Self {
        let t = l.events();
        Self {
            name: l.name().to_string(),
            states: (0..l.state_count()).map(|s| l.state_name(s)).collect(),
            initial: l.initial(),
            sink: l.deadlock_sink(),
            alphabet: l.alphabet().iter().map(|&e| t.name(e).to_string()).collect(),
            transitions: l
                .edges()
                .map(|(from, e, to)| JsonEdge {
                    from,
                    event: t.name(e).to_string(),
                    to,
                    controllable: t.is_controllable(e),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JsonEvent {
    pub name: String,
    pub controllable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JsonProblem {
    pub events: Vec<JsonEvent>,
    pub ltss: Vec<JsonLts>,
    pub assumptions: Vec<String>,
    pub guarantees: Vec<String>,
}

impl From<&ControlProblem> for JsonProblem {
    fn from(p: &ControlProblem) -> Self {
        let t = &p.events;
        Self {
            events: t
                .ids()
                .map(|e| JsonEvent {
                    name: t.name(e).to_string(),
                    controllable: t.is_controllable(e),
                })
                .collect(),
            ltss: p.parts.iter().map(JsonLts::from).collect(),
            assumptions: p.goal.assumptions.iter().map(|a| a.display(t)).collect(),
            guarantees: p.goal.guarantees.iter().map(|g| g.display(t)).collect(),
        }
    }
}

pub fn problem_to_json(p: &ControlProblem) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&JsonProblem::from(p))
}

pub fn lts_to_json(l: &Lts) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&JsonLts::from(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_problem;

    #[test]
    fn dot_styles() {
        let p = parse_problem("events u\ncontrollable c\nlts A {\n init a; sink b;\n a -c-> a; a -u-> b;\n}").unwrap();
        let d = to_dot(&p.parts[0]);
        assert!(d.starts_with("digraph \"A\" {"));
        assert!(d.contains("n1 [label=\"b\" shape=doublecircle];"));
        assert!(d.contains("n0 -> n0 [label=\"c\" style=solid];"));
        assert!(d.contains("n0 -> n1 [label=\"u\" style=dashed];"));
        assert!(d.trim_end().ends_with('}'));
    }

    #[test]
    fn json_shape() {
        let p = parse_problem("events u\nlts A { init a; a -u-> a; }\ngoal guarantee u").unwrap();
        let v: serde_json::Value = serde_json::from_str(&problem_to_json(&p).unwrap()).unwrap();
        assert_eq!(v["ltss"][0]["transitions"][0]["event"], "u");
        assert_eq!(v["guarantees"][0], "u");
    }
}
