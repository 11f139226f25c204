//! Boolean predicates over state variables and atomic propositions.
//!
//! Atoms are either comparisons `var CMP constant` with exact rational
//! comparison, or bare proposition names evaluated against a state's label
//! set. Atomic propositions thereby act as 0/1 variables, so contingency
//! sets and effect predicates share one evaluation mechanism.

use crate::model::State;
use crate::rational::{format_rat, parse_rat, Rat};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn apply(&self, lhs: &Rat, rhs: &Rat) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// Empty conjunction; evaluates to 1 on every state.
    True,
    False,
    Cmp { var: String, op: CmpOp, value: Rat },
    Label(String),
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum PredicateError {
    #[error("predicate parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },
    #[error("unbound variable `{0}` in predicate")]
    UnboundVariable(String),
}

impl Predicate {
    /// Parses the grammar `atoms {var CMP const | name}`, connectives
    /// `&& || !`, parentheses, and the literals `true` / `false`.
    pub fn parse(text: &str) -> Result<Predicate, PredicateError> {
        Parser::new(text).parse_top()
    }

    /// Parses a `;`-separated list of predicates, skipping empty entries.
    pub fn parse_list(text: &str) -> Result<Vec<Predicate>, PredicateError> {
        text.split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Predicate::parse)
            .collect()
    }

    /// Evaluates to `true`/`false` on a state; exact on rationals.
    ///
    /// `vars` is the model's variable declaration, aligned with the state's
    /// valuation vector.
    pub fn eval(&self, vars: &[String], state: &State) -> Result<bool, PredicateError> {
        match self {
            Predicate::True => Ok(true),
            Predicate::False => Ok(false),
            Predicate::Cmp { var, op, value } => {
                let idx = vars
                    .iter()
                    .position(|v| v == var)
                    .ok_or_else(|| PredicateError::UnboundVariable(var.clone()))?;
                Ok(op.apply(&state.values[idx], value))
            }
            Predicate::Label(name) => Ok(state.labels.contains(name)),
            Predicate::Not(inner) => Ok(!inner.eval(vars, state)?),
            Predicate::And(parts) => {
                for p in parts {
                    if !p.eval(vars, state)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Predicate::Or(parts) => {
                for p in parts {
                    if p.eval(vars, state)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Variables referenced by comparison atoms.
    pub fn referenced_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Predicate::Cmp { var, .. } => {
                out.insert(var.clone());
            }
            Predicate::Not(inner) => inner.collect_vars(out),
            Predicate::And(parts) | Predicate::Or(parts) => {
                for p in parts {
                    p.collect_vars(out);
                }
            }
            Predicate::True | Predicate::False | Predicate::Label(_) => {}
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => write!(f, "true"),
            Predicate::False => write!(f, "false"),
            Predicate::Cmp { var, op, value } => {
                write!(f, "{var} {} {}", op.symbol(), format_rat(value))
            }
            Predicate::Label(name) => write!(f, "{name}"),
            Predicate::Not(inner) => match inner.as_ref() {
                Predicate::Cmp { .. } | Predicate::Label(_) | Predicate::True | Predicate::False => {
                    write!(f, "!{inner}")
                }
                _ => write!(f, "!({inner})"),
            },
            Predicate::And(parts) => {
                if parts.is_empty() {
                    return write!(f, "true");
                }
                let rendered: Vec<String> = parts
                    .iter()
                    .map(|p| match p {
                        Predicate::Or(_) => format!("({p})"),
                        _ => p.to_string(),
                    })
                    .collect();
                write!(f, "{}", rendered.join(" && "))
            }
            Predicate::Or(parts) => {
                if parts.is_empty() {
                    return write!(f, "false");
                }
                let rendered: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", rendered.join(" || "))
            }
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, bytes: text.as_bytes(), pos: 0 }
    }

    fn parse_top(&mut self) -> Result<Predicate, PredicateError> {
        let p = self.parse_or()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err("trailing input"));
        }
        Ok(p)
    }

    fn parse_or(&mut self) -> Result<Predicate, PredicateError> {
        let mut parts = vec![self.parse_and()?];
        loop {
            self.skip_ws();
            if self.eat("||") {
                parts.push(self.parse_and()?);
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::Or(parts) })
    }

    fn parse_and(&mut self) -> Result<Predicate, PredicateError> {
        let mut parts = vec![self.parse_unary()?];
        loop {
            self.skip_ws();
            if self.eat("&&") {
                parts.push(self.parse_unary()?);
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::And(parts) })
    }

    fn parse_unary(&mut self) -> Result<Predicate, PredicateError> {
        self.skip_ws();
        if self.eat("!") {
            return Ok(Predicate::Not(Box::new(self.parse_unary()?)));
        }
        if self.eat("(") {
            let inner = self.parse_or()?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Predicate, PredicateError> {
        self.skip_ws();
        let ident = self.take_ident().ok_or_else(|| self.err("expected identifier"))?;
        if ident == "true" {
            return Ok(Predicate::True);
        }
        if ident == "false" {
            return Ok(Predicate::False);
        }
        self.skip_ws();
        let op = if self.eat("<=") {
            Some(CmpOp::Le)
        } else if self.eat(">=") {
            Some(CmpOp::Ge)
        } else if self.eat("<") {
            Some(CmpOp::Lt)
        } else if self.eat(">") {
            Some(CmpOp::Gt)
        } else if self.eat("==") || self.eat("=") {
            Some(CmpOp::Eq)
        } else {
            None
        };
        match op {
            None => Ok(Predicate::Label(ident)),
            Some(op) => {
                self.skip_ws();
                let num = self.take_number().ok_or_else(|| self.err("expected rational constant"))?;
                let value =
                    parse_rat(&num).map_err(|e| self.err(&format!("bad constant: {e}")))?;
                Ok(Predicate::Cmp { var: ident, op, value })
            }
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.text[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn take_ident(&mut self) -> Option<String> {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start || self.bytes[start].is_ascii_digit() {
            self.pos = start;
            None
        } else {
            Some(self.text[start..self.pos].to_string())
        }
    }

    fn take_number(&mut self) -> Option<String> {
        let start = self.pos;
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'-' {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_digit() || b == b'.' || b == b'/' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == digits_start {
            self.pos = start;
            None
        } else {
            Some(self.text[start..self.pos].to_string())
        }
    }

    fn err(&self, msg: &str) -> PredicateError {
        PredicateError::Parse { col: self.pos + 1, msg: msg.to_string() }
    }
}
