//! The clause language: predicate schemas, weighted clauses, and their
//! vectorial `(p, s)` form over a column layout.
//!
//! Clause files hold one clause per line:
//!
//! ```text
//! # weight : literal, literal, ...
//! _:nSmoker(x),Cancer(x)
//! _(1.5):nSmoker(x),nFriends(x,y),Smoker(y)
//! 10.0:nRide(x,y),On(x,y)
//! ```
//!
//! `_` is a learnable weight starting at [`DEFAULT_LEARNABLE_WEIGHT`], `_(v)` a
//! learnable weight starting at `v`, and a bare number a fixed weight. A leading
//! `n` negates a literal. Schema files have two lines, `unary: A,B` and
//! `binary: R`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, ParseErrorKind, Result};

/// Initial value of a learnable clause weight written as a bare `_`.
pub const DEFAULT_LEARNABLE_WEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arity {
    Unary,
    Binary,
}

/// Ordered unary and binary predicate names. The order fixes the columns of
/// every preactivation matrix built from this schema.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PredicateSchema {
    unary: Vec<String>,
    binary: Vec<String>,
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PredicateSchema {
    pub fn new<S: Into<String>>(
        unary: impl IntoIterator<Item = S>,
        binary: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let unary: Vec<String> = unary.into_iter().map(Into::into).collect();
        let binary: Vec<String> = binary.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for name in unary.iter().chain(&binary) {
            if !is_name(name) {
                return Err(Error::Schema(format!(
                    "`{name}` is not a valid predicate name"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("predicate `{name}` declared twice")));
            }
        }
        // `nFoo` must not be readable both as a predicate and as the negation of `Foo`.
        for name in &seen {
            if let Some(rest) = name.strip_prefix('n') {
                if seen.contains(rest) {
                    return Err(Error::Schema(format!(
                        "`{name}` is ambiguous with the negation of `{rest}`"
                    )));
                }
            }
        }
        Ok(PredicateSchema { unary, binary })
    }

    /// Reads the two-line `unary: ...` / `binary: ...` schema format.
    /// Either line may be omitted or left empty.
    pub fn parse(text: &str) -> Result<Self> {
        let mut unary = None;
        let mut binary = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: &str| Error::Parse {
                line: lineno + 1,
                column: 1,
                kind: ParseErrorKind::Syntax(msg.to_owned()),
            };
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| syntax("expected `unary:` or `binary:`"))?;
            let names: Vec<String> = rest
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(ToOwned::to_owned)
                .collect();
            let slot = match key.trim() {
                "unary" => &mut unary,
                "binary" => &mut binary,
                _ => return Err(syntax("expected `unary:` or `binary:`")),
            };
            if slot.replace(names).is_some() {
                return Err(syntax("section given twice"));
            }
        }
        PredicateSchema::new(unary.unwrap_or_default(), binary.unwrap_or_default())
    }

    pub fn unary_names(&self) -> &[String] {
        &self.unary
    }

    pub fn binary_names(&self) -> &[String] {
        &self.binary
    }

    pub fn unary_index(&self, name: &str) -> Option<usize> {
        self.unary.iter().position(|n| n == name)
    }

    pub fn binary_index(&self, name: &str) -> Option<usize> {
        self.binary.iter().position(|n| n == name)
    }

    pub fn arity(&self, name: &str) -> Option<Arity> {
        if self.unary_index(name).is_some() {
            Some(Arity::Unary)
        } else if self.binary_index(name).is_some() {
            Some(Arity::Binary)
        } else {
            None
        }
    }
}

impl fmt::Display for PredicateSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "unary: {}", self.unary.join(","))?;
        writeln!(f, "binary: {}", self.binary.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

/// Which variable(s) an atom is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarSlot {
    X,
    Y,
    XY,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: String,
    pub sign: Sign,
    pub slot: VarSlot,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, sign: Sign, slot: VarSlot) -> Self {
        Literal {
            predicate: predicate.into(),
            sign,
            slot,
        }
    }

    pub fn pos(predicate: impl Into<String>, slot: VarSlot) -> Self {
        Literal::new(predicate, Sign::Pos, slot)
    }

    pub fn neg(predicate: impl Into<String>, slot: VarSlot) -> Self {
        Literal::new(predicate, Sign::Neg, slot)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Neg {
            f.write_str("n")?;
        }
        let vars = match self.slot {
            VarSlot::X => "x",
            VarSlot::Y => "y",
            VarSlot::XY => "x,y",
        };
        write!(f, "{}({})", self.predicate, vars)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClauseWeight {
    /// Constant weight, never trained.
    Fixed(f64),
    /// Trainable weight with its initial value.
    Learnable(f64),
}

impl ClauseWeight {
    pub fn value(self) -> f64 {
        match self {
            ClauseWeight::Fixed(v) | ClauseWeight::Learnable(v) => v,
        }
    }

    pub fn is_learnable(self) -> bool {
        matches!(self, ClauseWeight::Learnable(_))
    }
}

impl fmt::Display for ClauseWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClauseWeight::Fixed(v) => write!(f, "{v:?}"),
            ClauseWeight::Learnable(v) if v == DEFAULT_LEARNABLE_WEIGHT => f.write_str("_"),
            ClauseWeight::Learnable(v) => write!(f, "_({v:?})"),
        }
    }
}

/// A weighted disjunction of literals.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    literals: Vec<Literal>,
    weight: ClauseWeight,
}

impl Clause {
    pub fn new(literals: Vec<Literal>, weight: ClauseWeight) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::Clause(
                "a clause needs at least one literal".to_string(),
            ));
        }
        let w = weight.value();
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Clause(format!(
                "weight must be finite and nonnegative, got {w}"
            )));
        }
        let mut seen = BTreeSet::new();
        for l in &literals {
            if !seen.insert(l) {
                return Err(Error::Clause(format!("repeated literal `{l}`")));
            }
        }
        Ok(Clause { literals, weight })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn weight(&self) -> ClauseWeight {
        self.weight
    }

    pub fn with_weight(mut self, weight: ClauseWeight) -> Result<Self> {
        let w = weight.value();
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Clause(format!(
                "weight must be finite and nonnegative, got {w}"
            )));
        }
        self.weight = weight;
        Ok(self)
    }

    /// Unary clauses mention only the `x` variable.
    pub fn is_unary(&self) -> bool {
        self.literals.iter().all(|l| l.slot == VarSlot::X)
    }

    /// The literals without the weight, e.g. `nS(x),C(x)`.
    pub fn body(&self) -> String {
        let parts: Vec<String> = self.literals.iter().map(ToString::to_string).collect();
        parts.join(",")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.weight, self.body())
    }
}

/// A validated clause set, split into unary and binary clauses.
#[derive(Clone, Debug, PartialEq)]
pub struct Knowledge {
    schema: PredicateSchema,
    unary: Vec<Clause>,
    binary: Vec<Clause>,
}

impl Knowledge {
    pub fn new(schema: PredicateSchema, clauses: impl IntoIterator<Item = Clause>) -> Result<Self> {
        let mut unary = Vec::new();
        let mut binary = Vec::new();
        for clause in clauses {
            for l in clause.literals() {
                check_literal(&schema, l).map_err(|kind| match kind {
                    ParseErrorKind::UnknownPredicate(p) => {
                        Error::Clause(format!("unknown predicate `{p}`"))
                    }
                    other => Error::Clause(other.to_string()),
                })?;
            }
            if clause.is_unary() {
                unary.push(clause);
            } else {
                binary.push(clause);
            }
        }
        Ok(Knowledge {
            schema,
            unary,
            binary,
        })
    }

    pub fn empty(schema: PredicateSchema) -> Self {
        Knowledge {
            schema,
            unary: Vec::new(),
            binary: Vec::new(),
        }
    }

    /// Parses a clause file against `schema`.
    pub fn parse(text: &str, schema: PredicateSchema) -> Result<Self> {
        let mut clauses = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.trim().is_empty() {
                continue;
            }
            let clause =
                parse_clause_line(line, &schema).map_err(|(column, kind)| Error::Parse {
                    line: lineno + 1,
                    column,
                    kind,
                })?;
            clauses.push(clause);
        }
        Knowledge::new(schema, clauses)
    }

    pub fn schema(&self) -> &PredicateSchema {
        &self.schema
    }

    pub fn unary(&self) -> &[Clause] {
        &self.unary
    }

    pub fn binary(&self) -> &[Clause] {
        &self.binary
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty() && self.binary.is_empty()
    }

    pub fn len(&self) -> usize {
        self.unary.len() + self.binary.len()
    }

    /// Unary clauses followed by binary clauses.
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.unary.iter().chain(&self.binary)
    }

    /// Same clauses, new weights (in [`Knowledge::clauses`] order).
    pub fn with_weights(&self, weights: &[ClauseWeight]) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::Clause(format!(
                "expected {} weights, got {}",
                self.len(),
                weights.len()
            )));
        }
        let clauses = self
            .clauses()
            .zip(weights)
            .map(|(c, &w)| c.clone().with_weight(w))
            .collect::<Result<Vec<_>>>()?;
        Knowledge::new(self.schema.clone(), clauses)
    }
}

impl fmt::Display for Knowledge {
    /// The clause-file serialization, one clause per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.clauses() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}

fn check_literal(
    schema: &PredicateSchema,
    l: &Literal,
) -> core::result::Result<(), ParseErrorKind> {
    match (schema.arity(&l.predicate), l.slot) {
        (None, _) => Err(ParseErrorKind::UnknownPredicate(l.predicate.clone())),
        (Some(Arity::Unary), VarSlot::X | VarSlot::Y) | (Some(Arity::Binary), VarSlot::XY) => {
            Ok(())
        }
        _ => Err(ParseErrorKind::ArityMismatch(l.predicate.clone())),
    }
}

type ParseFailure = (usize, ParseErrorKind);

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> core::result::Result<(), ParseFailure> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.fail(format!("expected `{c}`")))
        }
    }

    fn fail(&self, msg: String) -> ParseFailure {
        (self.column(), ParseErrorKind::Syntax(msg))
    }

    /// Consumes characters while `pred` holds and returns them.
    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest.find(|c| !pred(c)).unwrap_or(rest.len());
        self.pos += len;
        &self.text[start..start + len]
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }
}

fn parse_number(cur: &mut Cursor<'_>) -> core::result::Result<f64, ParseFailure> {
    let col = {
        cur.skip_ws();
        cur.column()
    };
    let tok = cur.take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+'));
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or((
        col,
        ParseErrorKind::Syntax(format!("invalid number `{tok}`")),
    ))
}

fn parse_clause_line(
    line: &str,
    schema: &PredicateSchema,
) -> core::result::Result<Clause, ParseFailure> {
    let mut cur = Cursor { text: line, pos: 0 };
    cur.skip_ws();
    let weight_col = cur.column();
    let weight = if cur.eat('_') {
        let init = if cur.eat('(') {
            let v = parse_number(&mut cur)?;
            cur.expect(')')?;
            v
        } else {
            DEFAULT_LEARNABLE_WEIGHT
        };
        ClauseWeight::Learnable(init)
    } else {
        ClauseWeight::Fixed(parse_number(&mut cur)?)
    };
    if weight.value() < 0.0 {
        return Err((weight_col, ParseErrorKind::NegativeWeight(weight.value())));
    }
    cur.expect(':')?;

    let mut literals: Vec<Literal> = Vec::new();
    loop {
        cur.skip_ws();
        let col = cur.column();
        let name = cur.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        if name.is_empty() {
            return Err(cur.fail("expected a literal".to_string()));
        }
        let (predicate, sign) = if schema.arity(name).is_some() {
            (name, Sign::Pos)
        } else if let Some(rest) = name.strip_prefix('n').filter(|r| schema.arity(r).is_some()) {
            (rest, Sign::Neg)
        } else {
            let bare = name
                .strip_prefix('n')
                .filter(|r| !r.is_empty())
                .unwrap_or(name);
            return Err((col, ParseErrorKind::UnknownPredicate(bare.to_owned())));
        };
        cur.expect('(')?;
        let first = cur.take_while(|c| c.is_ascii_alphanumeric());
        let slot = match first {
            "x" if cur.eat(',') => {
                let second = cur.take_while(|c| c.is_ascii_alphanumeric());
                if second != "y" {
                    return Err(cur.fail("expected `y`".to_string()));
                }
                VarSlot::XY
            }
            "x" => VarSlot::X,
            "y" => VarSlot::Y,
            _ => return Err(cur.fail("expected variable `x` or `y`".to_string())),
        };
        cur.expect(')')?;
        let literal = Literal::new(predicate, sign, slot);
        check_literal(schema, &literal).map_err(|k| (col, k))?;
        if literals.contains(&literal) {
            return Err((col, ParseErrorKind::RepeatedLiteral(literal.to_string())));
        }
        literals.push(literal);
        if cur.at_end() {
            break;
        }
        cur.expect(',')?;
    }
    Clause::new(literals, weight).map_err(|e| (1, ParseErrorKind::Syntax(e.to_string())))
}

/// Ordered column map of a preactivation matrix: column `i` holds the atom
/// `columns[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    columns: Vec<(String, VarSlot)>,
}

impl Layout {
    pub fn new(columns: Vec<(String, VarSlot)>) -> Self {
        Layout { columns }
    }

    /// One column per unary predicate, all on `x`.
    pub fn unary<S: AsRef<str>>(names: &[S]) -> Self {
        Layout {
            columns: names
                .iter()
                .map(|n| (n.as_ref().to_owned(), VarSlot::X))
                .collect(),
        }
    }

    /// The joined pair-matrix layout `[U^x block | U^y block | B block]`,
    /// each block in schema order.
    pub fn joined(schema: &PredicateSchema) -> Self {
        let u = schema.unary_names();
        let columns = u
            .iter()
            .map(|n| (n.clone(), VarSlot::X))
            .chain(u.iter().map(|n| (n.clone(), VarSlot::Y)))
            .chain(
                schema
                    .binary_names()
                    .iter()
                    .map(|n| (n.clone(), VarSlot::XY)),
            )
            .collect();
        Layout { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[(String, VarSlot)] {
        &self.columns
    }

    pub fn position(&self, predicate: &str, slot: VarSlot) -> Option<usize> {
        self.columns
            .iter()
            .position(|(n, s)| n == predicate && *s == slot)
    }
}

/// Column indices (0-based) and signs of a clause's literals.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorClause {
    pub cols: Vec<usize>,
    pub signs: Vec<f64>,
}

impl VectorClause {
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }
}

pub fn to_vector_clause(clause: &Clause, layout: &Layout) -> Result<VectorClause> {
    let mut cols = Vec::with_capacity(clause.literals().len());
    let mut signs = Vec::with_capacity(clause.literals().len());
    for l in clause.literals() {
        let col = layout
            .position(&l.predicate, l.slot)
            .ok_or_else(|| Error::Unresolvable(l.to_string()))?;
        cols.push(col);
        signs.push(l.sign.value());
    }
    Ok(VectorClause { cols, signs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sc_schema() -> PredicateSchema {
        PredicateSchema::new(["S", "C"], ["F"]).unwrap()
    }

    #[test]
    fn parses_learnable_unary_clause() {
        let schema = PredicateSchema::new(["S", "C"], []).unwrap();
        let k = Knowledge::parse("_:nS(x),C(x)", schema).unwrap();
        assert_eq!(k.unary().len(), 1);
        assert!(k.binary().is_empty());
        let c = &k.unary()[0];
        assert_eq!(
            c.literals(),
            &[Literal::neg("S", VarSlot::X), Literal::pos("C", VarSlot::X)]
        );
        assert_eq!(
            c.weight(),
            ClauseWeight::Learnable(DEFAULT_LEARNABLE_WEIGHT)
        );
    }

    #[test]
    fn parses_fixed_binary_clause() {
        let schema =
            PredicateSchema::new(Vec::<String>::new(), vec!["Ride".into(), "On".into()]).unwrap();
        let k = Knowledge::parse("10.0:nRide(x,y),On(x,y)", schema).unwrap();
        assert_eq!(k.binary().len(), 1);
        let c = &k.binary()[0];
        assert_eq!(c.weight(), ClauseWeight::Fixed(10.0));
        assert_eq!(c.literals()[0], Literal::neg("Ride", VarSlot::XY));
        assert_eq!(c.literals()[1], Literal::pos("On", VarSlot::XY));
    }

    #[test]
    fn parses_smoker_friends_clause() {
        let k = Knowledge::parse("_:nS(x),nF(x,y),S(y)", sc_schema()).unwrap();
        let slots: Vec<VarSlot> = k.binary()[0].literals().iter().map(|l| l.slot).collect();
        assert_eq!(slots, vec![VarSlot::X, VarSlot::XY, VarSlot::Y]);
        assert!(k.unary().is_empty());
    }

    #[test]
    fn learnable_with_explicit_init_and_comments() {
        let text = "# header\n\n_(1.25):C(x) # trailing\n";
        let k = Knowledge::parse(text, sc_schema()).unwrap();
        assert_eq!(k.unary()[0].weight(), ClauseWeight::Learnable(1.25));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Knowledge::parse("_:S(x)\n_:S(x),Q(x)", sc_schema()).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                column: 8,
                kind: ParseErrorKind::UnknownPredicate("Q".into())
            }
        );
        let err = Knowledge::parse("_:S(x),S(x)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                kind: ParseErrorKind::RepeatedLiteral(_),
                ..
            }
        ));
        let err = Knowledge::parse("_:F(x)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                kind: ParseErrorKind::ArityMismatch(_),
                ..
            }
        ));
        let err = Knowledge::parse("_:S(x,y)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                kind: ParseErrorKind::ArityMismatch(_),
                ..
            }
        ));
        let err = Knowledge::parse("-1:S(x)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                kind: ParseErrorKind::NegativeWeight(_),
                ..
            }
        ));
        let err = Knowledge::parse("_ S(x)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                line: 1,
                kind: ParseErrorKind::Syntax(_),
                ..
            }
        ));
        let err = Knowledge::parse("_:S(z)", sc_schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                kind: ParseErrorKind::Syntax(_),
                ..
            }
        ));
    }

    #[test]
    fn same_atom_with_both_signs_is_not_a_repeat() {
        let k = Knowledge::parse("_:S(x),nS(x)", sc_schema()).unwrap();
        assert_eq!(k.unary()[0].literals().len(), 2);
    }

    #[test]
    fn schema_rejects_duplicates_and_ambiguity() {
        assert!(PredicateSchema::new(["A", "A"], []).is_err());
        assert!(PredicateSchema::new(["A"], ["A"]).is_err());
        assert!(PredicateSchema::new(["S", "nS"], []).is_err());
        assert!(PredicateSchema::new(["1x"], []).is_err());
    }

    #[test]
    fn schema_file_round_trip() {
        let s = PredicateSchema::parse("unary: S, C\nbinary: F\n").unwrap();
        assert_eq!(s, sc_schema());
        assert_eq!(PredicateSchema::parse(&s.to_string()).unwrap(), s);
        let only_unary = PredicateSchema::parse("unary: A,B").unwrap();
        assert!(only_unary.binary_names().is_empty());
        assert!(PredicateSchema::parse("ternary: T").is_err());
    }

    #[test]
    fn vector_clause_is_zero_based() {
        let schema = PredicateSchema::new(["A1", "A2", "A3"], []).unwrap();
        let k = Knowledge::parse("_:A1(x),nA3(x)", schema.clone()).unwrap();
        let v = to_vector_clause(&k.unary()[0], &Layout::unary(schema.unary_names())).unwrap();
        assert_eq!(v.cols, vec![0, 2]);
        assert_eq!(v.signs, vec![1.0, -1.0]);

        let k = Knowledge::parse("_:S(x),C(x)", sc_schema()).unwrap();
        let v = to_vector_clause(&k.unary()[0], &Layout::unary(&["S", "C"])).unwrap();
        assert_eq!(v.cols, vec![0, 1]);
        assert_eq!(v.signs, vec![1.0, 1.0]);
    }

    #[test]
    fn binary_clause_over_joined_layout() {
        let schema = sc_schema();
        let k = Knowledge::parse("_:nS(x),nF(x,y),S(y)", schema.clone()).unwrap();
        let layout = Layout::joined(&schema);
        assert_eq!(layout.width(), 5);
        let v = to_vector_clause(&k.binary()[0], &layout).unwrap();
        assert_eq!(v.cols, vec![0, 4, 2]);
        assert_eq!(v.signs, vec![-1.0, -1.0, 1.0]);
        // binary clause cannot be placed on a unary layout
        assert!(matches!(
            to_vector_clause(&k.binary()[0], &Layout::unary(schema.unary_names())),
            Err(Error::Unresolvable(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let text = "_:nS(x),C(x)\n_(0.25):S(x)\n3.0:nS(x),nF(x,y),S(y)\n0.0:C(y),nC(x)\n";
        let k = Knowledge::parse(text, sc_schema()).unwrap();
        let again = Knowledge::parse(&k.to_string(), sc_schema()).unwrap();
        assert_eq!(k, again);
        assert_eq!(k.to_string(), text);
    }
}
