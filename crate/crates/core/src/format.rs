//! Text format for problems and controllers.
//!
//! ```text
//! # comment
//! events u1 u2
//! controllable c1
//! lts Machine { init idle; idle -c1-> busy; busy -u1-> idle; alphabet u2; }
//! goal assume u2 guarantee u1 | c1, !u2
//! ```
//!
//! Top-level statements end at a newline or `;`. Inside an `lts` block
//! statements end at `;`. Names that are not plain identifiers are written
//! in double quotes. `sink s;` marks the deadlock sink of a block.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::goal::{EventExpr, Expr, Gr1Goal};
use crate::lts::{EventId, EventSet, EventTable, Lts};
use crate::problem::ControlProblem;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Newline,
    Semi,
    Comma,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Minus,
    Arrow,
    Not,
    And,
    Or,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, col, msg: msg.into() })
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\''
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let (l0, c0) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        let tok = match c {
            '\n' => {
                bump(&mut chars);
                Tok::Newline
            }
            c if c.is_whitespace() => {
                bump(&mut chars);
                continue;
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump(&mut chars);
                }
                continue;
            }
            ';' | ',' | '{' | '}' | '(' | ')' | '!' | '&' | '|' => {
                bump(&mut chars);
                match c {
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '!' => Tok::Not,
                    '&' => Tok::And,
                    _ => Tok::Or,
                }
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        Some('"') => break,
                        Some('\\') => match bump(&mut chars) {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            _ => return err(l0, c0, "bad escape in quoted name"),
                        },
                        Some('\n') | None => return err(l0, c0, "unterminated quoted name"),
                        Some(c) => s.push(c),
                    }
                }
                if s.is_empty() {
                    return err(l0, c0, "empty name");
                }
                Tok::Ident(s)
            }
            c if is_ident_char(c) => {
                let mut s = String::new();
                while chars.peek().is_some_and(|&c| is_ident_char(c)) {
                    s.push(bump(&mut chars).unwrap());
                }
                Tok::Ident(s)
            }
            other => return err(l0, c0, format!("unexpected character `{other}`")),
        };
        out.push(Token { tok, line: l0, col: c0 });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Parsed file contents before they are assembled into a problem.
#[derive(Clone, Debug)]
pub struct Document {
    pub events: Arc<EventTable>,
    pub ltss: Vec<Lts>,
    pub goal: Option<Gr1Goal>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    table: EventTable,
    /// Events that must already exist when a base table was supplied.
    fixed: bool,
    declared: HashMap<String, (usize, usize)>,
}

struct RawLts {
    name: String,
    states: Vec<String>,
    init: usize,
    sink: Option<usize>,
    edges: Vec<(usize, EventId, usize)>,
    alphabet: EventSet,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            err(t.line, t.col, format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.col)),
            _ => err(t.line, t.col, format!("expected {what}")),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().tok, Tok::Newline | Tok::Semi) {
            self.pos += 1;
        }
    }

    fn skip_layout(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.pos += 1;
        }
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.peek().tok, Tok::Newline | Tok::Semi | Tok::Eof)
    }

    fn event(&self, name: &str, line: usize, col: usize) -> Result<EventId> {
        match self.table.lookup(name) {
            Some(e) => Ok(e),
            None => err(line, col, format!("undeclared event `{name}`")),
        }
    }

    fn declare(&mut self, controllable: bool) -> Result<()> {
        while !self.at_stmt_end() {
            let (name, line, col) = self.ident("event name")?;
            if name == "true" || name == "false" {
                return err(line, col, format!("`{name}` is reserved"));
            }
            if let Some(&(l, c)) = self.declared.get(&name) {
                return err(line, col, format!("event `{name}` already declared at {l}:{c}"));
            }
            self.declared.insert(name.clone(), (line, col));
            match self.table.lookup(&name) {
                Some(e) if self.table.is_controllable(e) != controllable => {
                    return err(line, col, format!("event `{name}` declared with the wrong controllability"));
                }
                Some(_) => {}
                None if self.fixed => return err(line, col, format!("event `{name}` is not in the problem")),
                None => {
                    self.table.add(&name, controllable);
                }
            }
        }
        Ok(())
    }

    fn lts(&mut self) -> Result<(RawLts, usize, usize)> {
        let (name, line, col) = self.ident("LTS name")?;
        self.skip_layout();
        self.expect(Tok::LBrace, "`{`")?;
        let mut states: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |s: String| {
            *index.entry(s.clone()).or_insert_with(|| {
                states.push(s);
                states.len() - 1
            })
        };
        let mut init: Option<usize> = None;
        let mut sink: Option<usize> = None;
        let mut edges = Vec::new();
        let mut alphabet = EventSet::new();
        let mut seen: HashMap<(usize, EventId), usize> = HashMap::new();
        loop {
            self.skip_newlines();
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    self.pos += 1;
                    break;
                }
                Tok::Ident(kw) if kw == "init" && self.toks[self.pos + 1].tok != Tok::Minus => {
                    self.pos += 1;
                    let (s, _, _) = self.ident("state name")?;
                    if init.is_some() {
                        return err(t.line, t.col, "duplicate `init`");
                    }
                    init = Some(intern(s));
                }
                Tok::Ident(kw) if kw == "sink" && self.toks[self.pos + 1].tok != Tok::Minus => {
                    self.pos += 1;
                    let (s, _, _) = self.ident("state name")?;
                    if sink.is_some() {
                        return err(t.line, t.col, "duplicate `sink`");
                    }
                    sink = Some(intern(s));
                }
                Tok::Ident(kw) if kw == "alphabet" && self.toks[self.pos + 1].tok != Tok::Minus => {
                    self.pos += 1;
                    while !matches!(self.peek().tok, Tok::Semi | Tok::RBrace) {
                        self.skip_layout();
                        let (e, l, c) = self.ident("event name")?;
                        alphabet.insert(self.event(&e, l, c)?);
                        self.skip_layout();
                    }
                }
                Tok::Ident(_) => {
                    let (from, _, _) = self.ident("state name")?;
                    self.expect(Tok::Minus, "`-`")?;
                    let (ev, el, ec) = self.ident("event name")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let (to, _, _) = self.ident("state name")?;
                    let e = self.event(&ev, el, ec)?;
                    let f = intern(from);
                    let to = intern(to);
                    if let Some(&prev) = seen.get(&(f, e)) {
                        if prev != to {
                            return err(t.line, t.col, format!("nondeterministic `{ev}` in `{name}`"));
                        }
                        continue;
                    }
                    seen.insert((f, e), to);
                    edges.push((f, e, to));
                    alphabet.insert(e);
                }
                Tok::Eof => return err(t.line, t.col, format!("unterminated LTS `{name}`")),
                _ => return err(t.line, t.col, "expected a statement or `}`"),
            }
            let t = self.peek().clone();
            match t.tok {
                Tok::Semi => self.pos += 1,
                Tok::RBrace | Tok::Newline => {}
                _ => return err(t.line, t.col, "expected `;`"),
            }
        }
        let init = match init {
            Some(i) => i,
            None => return err(line, col, format!("LTS `{name}` has no `init`")),
        };
        Ok((
            RawLts {
                name,
                states,
                init,
                sink,
                edges,
                alphabet,
            },
            line,
            col,
        ))
    }

    fn expr_list(&mut self) -> Result<Vec<EventExpr>> {
        let mut out = vec![EventExpr::from_tree(&self.or_expr()?)];
        while self.peek().tok == Tok::Comma {
            self.pos += 1;
            out.push(EventExpr::from_tree(&self.or_expr()?));
        }
        Ok(out)
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut e = self.and_expr()?;
        while self.peek().tok == Tok::Or {
            self.pos += 1;
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.peek().tok == Tok::And {
            self.pos += 1;
            e = Expr::And(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Not => Ok(Expr::Not(Box::new(self.unary()?))),
            Tok::LParen => {
                let e = self.or_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" => Ok(Expr::True),
            Tok::Ident(s) if s == "false" => Ok(Expr::False),
            Tok::Ident(s) => Ok(Expr::Event(self.event(&s, t.line, t.col)?)),
            _ => err(t.line, t.col, "expected an expression"),
        }
    }

    fn goal(&mut self) -> Result<Gr1Goal> {
        let mut assumptions = Vec::new();
        let mut guarantees = Vec::new();
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "assume") {
            self.pos += 1;
            assumptions = self.expr_list()?;
        }
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "guarantee") {
            self.pos += 1;
            guarantees = self.expr_list()?;
        }
        if !self.at_stmt_end() {
            let t = self.peek();
            return err(t.line, t.col, "expected `assume`, `guarantee` or end of goal");
        }
        Ok(Gr1Goal::new(assumptions, guarantees))
    }
}

/// Parses a file. With `base`, events must already exist in that table and
/// declarations are only checked for agreement.
pub fn parse_document(text: &str, base: Option<Arc<EventTable>>) -> Result<Document> {
    let fixed = base.is_some();
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        table: base.as_deref().cloned().unwrap_or_default(),
        fixed,
        declared: HashMap::new(),
    };
    let mut raws: Vec<(RawLts, usize, usize)> = Vec::new();
    let mut goal: Option<(Gr1Goal, usize, usize)> = None;
    loop {
        p.skip_newlines();
        let t = p.next();
        match &t.tok {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "events" => p.declare(false)?,
            Tok::Ident(kw) if kw == "controllable" => p.declare(true)?,
            Tok::Ident(kw) if kw == "lts" => {
                let r = p.lts()?;
                if let Some((o, l, c)) = raws.iter().find(|(o, _, _)| o.name == r.0.name) {
                    return err(r.1, r.2, format!("LTS `{}` already defined at {l}:{c}", o.name));
                }
                raws.push(r);
            }
            Tok::Ident(kw) if kw == "goal" => {
                if let Some((_, l, c)) = goal {
                    return err(t.line, t.col, format!("goal already given at {l}:{c}"));
                }
                goal = Some((p.goal()?, t.line, t.col));
            }
            _ => return err(t.line, t.col, "expected `events`, `controllable`, `lts` or `goal`"),
        }
        if !p.at_stmt_end() && p.toks[p.pos - 1].tok != Tok::RBrace {
            let t = p.peek();
            return err(t.line, t.col, "expected end of statement");
        }
    }
    let table = match base {
        Some(b) => b,
        None => Arc::new(p.table),
    };
    let mut ltss = Vec::new();
    for (r, line, col) in raws {
        let mut l = Lts::new(r.name, table.clone(), r.alphabet, r.states.len(), r.init)
            .or_else(|e| err(line, col, e.to_string()))?;
        for (f, e, t) in r.edges {
            l.add_transition(f, e, t).or_else(|e| err(line, col, e.to_string()))?;
        }
        l.set_deadlock_sink(r.sink);
        l.set_state_names(r.states);
        ltss.push(l);
    }
    Ok(Document {
        events: table,
        ltss,
        goal: goal.map(|g| g.0),
    })
}

/// A missing goal stands for `guarantee true`.
pub fn parse_problem(text: &str) -> Result<ControlProblem> {
    let doc = parse_document(text, None)?;
    if doc.ltss.is_empty() {
        return err(1, 1, "a problem needs at least one `lts`");
    }
    ControlProblem::new(doc.events, doc.ltss, doc.goal.unwrap_or_else(Gr1Goal::top))
}

/// Parses controller blocks against the problem's event table.
pub fn parse_controllers(text: &str, events: &Arc<EventTable>) -> Result<Vec<Lts>> {
    let doc = parse_document(text, Some(events.clone()))?;
    if doc.goal.is_some() {
        return err(1, 1, "controller files carry no goal");
    }
    Ok(doc.ltss)
}

fn is_plain(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(is_ident_char)
        && !matches!(
            name,
            "init" | "sink" | "alphabet" | "events" | "controllable" | "lts" | "goal" | "assume" | "guarantee" | "true" | "false"
        )
}

pub fn quote(name: &str) -> String {
    if is_plain(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// Declarations in id order, grouped into runs of equal controllability.
pub fn print_events(table: &EventTable) -> String {
    let mut out = String::new();
    let ids: Vec<EventId> = table.ids().collect();
    for run in ids.chunk_by(|a, b| table.is_controllable(*a) == table.is_controllable(*b)) {
        let kw = if table.is_controllable(run[0]) { "controllable" } else { "events" };
        let names: Vec<String> = run.iter().map(|&e| quote(table.name(e))).collect();
        let _ = writeln!(out, "{kw} {}", names.join(" "));
    }
    out
}

pub fn print_lts(l: &Lts) -> String {
    let names: Vec<String> = (0..l.state_count()).map(|s| l.state_name(s)).collect();
    let distinct = names.iter().collect::<BTreeSet<_>>().len() == names.len();
    let name = |s: usize| if distinct { quote(&names[s]) } else { format!("s{s}") };
    let table = l.events();
    let mut out = format!("lts {} {{\n  init {};\n", quote(l.name()), name(l.initial()));
    if let Some(s) = l.deadlock_sink() {
        let _ = writeln!(out, "  sink {};", name(s));
    }
    let mut used = EventSet::new();
    for (f, e, t) in l.edges() {
        used.insert(e);
        let _ = writeln!(out, "  {} -{}-> {};", name(f), quote(table.name(e)), name(t));
    }
    let silent: Vec<String> = l
        .alphabet()
        .iter()
        .filter(|e| !used.contains(e))
        .map(|&e| quote(table.name(e)))
        .collect();
    if !silent.is_empty() {
        let _ = writeln!(out, "  alphabet {};", silent.join(" "));
    }
    out.push_str("}\n");
    out
}

pub fn print_goal(g: &Gr1Goal, table: &EventTable) -> String {
    g.display(table)
}

pub fn print_problem(p: &ControlProblem) -> String {
    let mut out = print_events(&p.events);
    for l in &p.parts {
        out.push('\n');
        out.push_str(&print_lts(l));
    }
    out.push('\n');
    out.push_str(&print_goal(&p.goal, &p.events));
    out.push('\n');
    out
}

pub fn print_controllers(ctrls: &[Lts]) -> String {
    ctrls.iter().map(print_lts).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::isomorphic;

    #[test]
    fn minimal_file() {
        let p = parse_problem("events a\nlts A { init s; }\n").unwrap();
        assert_eq!(p.parts.len(), 1);
        assert_eq!(p.parts[0].state_count(), 1);
        assert!(p.goal.guarantees.is_empty() && p.goal.assumptions.is_empty());
    }

    #[test]
    fn undeclared_event_location() {
        let e = parse_problem("events a\nlts A {\n  init s;\n  s -b-> s;\n}\n").unwrap_err();
        match e {
            Error::Parse { line, col, .. } => assert_eq!((line, col), (4, 6)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn semantic_errors() {
        for bad in [
            "events a a\nlts A { init s; }",
            "events a\ncontrollable a\nlts A { init s; }",
            "events a\nlts A { init s; s -a-> s; s -a-> t; }",
            "events a\nlts A { s -a-> s; }",
            "events a\nlts A { init s; }\nlts A { init t; }",
            "events a\nlts A { init s; init t; }",
            "events a\nlts A { init s; }\ngoal guarantee b",
            "events a\nlts A { init s; }\ngoal guarantee a\ngoal guarantee a",
            "events a\nlts A { init s; } x",
            "events a\nlts A { init s;",
            "events a $",
            "events true",
            "events a\nlts A { init s; }\ngoal guarantee (a",
        ] {
            assert!(matches!(parse_problem(bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn goal_expressions() {
        let p = parse_problem("events a b\ncontrollable c\nlts A { init s; s -a-> s; s -b-> s; s -c-> s; }\ngoal assume !a | b guarantee a & (b | c), true").unwrap();
        assert_eq!(p.goal.assumptions.len(), 1);
        // `true` guarantees are dropped by simplification
        assert_eq!(p.goal.guarantees.len(), 1);
        assert_eq!(p.goal.guarantees[0].clauses().len(), 2);
    }

    #[test]
    fn quoted_names_and_sink() {
        let src = "events a\nlts \"A||B\" {\n  init \"(0,1)\";\n  sink bottom;\n  \"(0,1)\" -a-> bottom;\n}\n";
        let d = parse_document(src, None).unwrap();
        assert_eq!(d.ltss[0].name(), "A||B");
        assert_eq!(d.ltss[0].deadlock_sink(), Some(1));
        let again = parse_document(&print_lts(&d.ltss[0]), Some(d.events.clone())).unwrap();
        assert!(isomorphic(&d.ltss[0], &again.ltss[0]));
        assert_eq!(again.ltss[0].deadlock_sink(), Some(1));
    }

    #[test]
    fn blocked_events_survive_round_trip() {
        let p = parse_problem("events a b\nlts A { init s; s -a-> s; alphabet b; }").unwrap();
        let q = parse_problem(&print_problem(&p)).unwrap();
        assert!(q.parts[0].alphabet().contains(&q.events.lookup("b").unwrap()));
    }

    #[test]
    fn interleaved_declarations_keep_ids() {
        let p = parse_problem("events u1\ncontrollable c1\nevents u2\nlts A { init s; s -u2-> s; s -c1-> s; }").unwrap();
        let text = print_problem(&p);
        let q = parse_problem(&text).unwrap();
        assert_eq!(*p.events, *q.events);
    }

    #[test]
    fn controllers_checked_against_table() {
        let p = parse_problem("events a\ncontrollable c\nlts A { init s; s -c-> s; }").unwrap();
        assert!(parse_controllers("lts K { init k; k -c-> k; }", &p.events).is_ok());
        assert!(parse_controllers("lts K { init k; k -z-> k; }", &p.events).is_err());
        assert!(parse_controllers("events z\nlts K { init k; }", &p.events).is_err());
        assert!(parse_controllers("events c\nlts K { init k; }", &p.events).is_err());
    }
}
