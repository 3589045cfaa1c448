//! Apriori mining of signed label itemsets and conversion of the mined
//! implications into clauses.
//!
//! Every label appears in every transaction, either as a positive or a
//! negative item, so supports are counted over signed itemsets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::logic::{Clause, ClauseWeight, Literal, Sign, VarSlot, DEFAULT_LEARNABLE_WEIGHT};
use crate::matrix::Matrix;

/// Longest itemset considered unless configured otherwise.
pub const DEFAULT_MAX_LEN: usize = 4;

/// Largest label count accepted by [`brute_force_frequent`].
pub const BRUTE_FORCE_MAX_LABELS: usize = 12;

/// `label` or its negation, ordered by label first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedItem {
    pub label: usize,
    pub positive: bool,
}

impl SignedItem {
    pub fn pos(label: usize) -> Self {
        SignedItem {
            label,
            positive: true,
        }
    }

    pub fn neg(label: usize) -> Self {
        SignedItem {
            label,
            positive: false,
        }
    }
}

/// One example: exactly one signed item per label, indexed by label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    bits: Vec<bool>,
}

impl Transaction {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Transaction { bits }
    }

    pub fn n_labels(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn items(&self) -> impl Iterator<Item = SignedItem> + '_ {
        self.bits
            .iter()
            .enumerate()
            .map(|(label, &positive)| SignedItem { label, positive })
    }

    pub fn contains(&self, item: SignedItem) -> bool {
        self.bits.get(item.label) == Some(&item.positive)
    }

    pub fn contains_all(&self, items: &[SignedItem]) -> bool {
        items.iter().all(|&i| self.contains(i))
    }
}

/// One transaction per row of a 0/1 label matrix.
pub fn transactions_from_labels(y: &Matrix) -> Result<Vec<Transaction>> {
    if let Some(v) = y.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(invalid!("label matrix entry {v} is not 0 or 1"));
    }
    Ok((0..y.rows())
        .map(|r| Transaction::from_bits(y.row(r).iter().map(|&v| v == 1.0).collect()))
        .collect())
}

/// Inverse of [`transactions_from_labels`].
pub fn labels_from_transactions(tx: &[Transaction]) -> Result<Matrix> {
    let width = tx.first().map_or(0, Transaction::n_labels);
    if tx.iter().any(|t| t.n_labels() != width) {
        return Err(invalid!("transactions have different label counts"));
    }
    let data = tx
        .iter()
        .flat_map(|t| t.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }))
        .collect();
    Matrix::from_vec(tx.len(), width, data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequentItemset {
    /// Sorted, at most one item per label.
    pub items: Vec<SignedItem>,
    pub count: usize,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinedRule {
    pub antecedent: Vec<SignedItem>,
    pub consequent: SignedItem,
    pub support: f64,
    pub confidence: f64,
}

impl MinedRule {
    /// `A & nB -> C` using the given label names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        RuleDisplay { rule: self, names }
    }
}

struct RuleDisplay<'a> {
    rule: &'a MinedRule,
    names: &'a [String],
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let item = |f: &mut fmt::Formatter<'_>, i: SignedItem| {
            let sign = if i.positive { "" } else { "n" };
            match self.names.get(i.label) {
                Some(n) => write!(f, "{sign}{n}"),
                None => write!(f, "{sign}#{}", i.label),
            }
        };
        for (k, &a) in self.rule.antecedent.iter().enumerate() {
            if k > 0 {
                f.write_str(" & ")?;
            }
            item(f, a)?;
        }
        f.write_str(" -> ")?;
        item(f, self.rule.consequent)
    }
}

/// Support and confidence thresholds of a mining run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinerConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_len: usize,
}

impl MinerConfig {
    pub const YEAST: MinerConfig = MinerConfig {
        min_support: 0.2,
        min_confidence: 0.99,
        max_len: DEFAULT_MAX_LEN,
    };

    pub const EMOTIONS: MinerConfig = MinerConfig {
        min_support: 0.2,
        min_confidence: 0.7,
        max_len: DEFAULT_MAX_LEN,
    };

    pub fn validate(&self) -> Result<()> {
        check_support(self.min_support)?;
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(invalid!(
                "confidence must be in (0, 1], got {}",
                self.min_confidence
            ));
        }
        if self.max_len < 2 {
            return Err(invalid!(
                "maximum itemset length must be at least 2, got {}",
                self.max_len
            ));
        }
        Ok(())
    }
}

fn check_support(min_support: f64) -> Result<()> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(invalid!("support must be in (0, 1], got {min_support}"));
    }
    Ok(())
}

fn check_transactions(tx: &[Transaction]) -> Result<usize> {
    let width = tx.first().map_or(0, Transaction::n_labels);
    if tx.iter().any(|t| t.n_labels() != width) {
        return Err(invalid!("transactions have different label counts"));
    }
    Ok(width)
}

fn count(tx: &[Transaction], items: &[SignedItem]) -> usize {
    tx.iter().filter(|t| t.contains_all(items)).count()
}

// Exact integer threshold: count / n >= min_support.
fn is_frequent(count: usize, n: usize, min_support: f64) -> bool {
    count > 0 && count as f64 >= min_support * n as f64
}

fn itemset(items: Vec<SignedItem>, count: usize, n: usize) -> FrequentItemset {
    FrequentItemset {
        items,
        count,
        support: count as f64 / n as f64,
    }
}

fn sort_output(mut out: Vec<FrequentItemset>) -> Vec<FrequentItemset> {
    out.sort_by(|a, b| {
        a.items
            .len()
            .cmp(&b.items.len())
            .then_with(|| a.items.cmp(&b.items))
    });
    out
}

/// Level-wise Apriori: frequent `k`-itemsets are joined on their common
/// `k - 1` prefix and candidates with an infrequent subset are pruned before
/// counting. Output is sorted by length, then items.
pub fn apriori_frequent(
    tx: &[Transaction],
    min_support: f64,
    max_len: usize,
) -> Result<Vec<FrequentItemset>> {
    check_support(min_support)?;
    let width = check_transactions(tx)?;
    let n = tx.len();
    let mut out = Vec::new();
    if n == 0 || max_len == 0 {
        return Ok(out);
    }
    let mut level: Vec<Vec<SignedItem>> = Vec::new();
    for label in 0..width {
        for item in [SignedItem::neg(label), SignedItem::pos(label)] {
            let c = count(tx, &[item]);
            if is_frequent(c, n, min_support) {
                level.push(alloc::vec![item]);
                out.push(itemset(alloc::vec![item], c, n));
            }
        }
    }
    let mut k = 1;
    while !level.is_empty() && k < max_len {
        let known: BTreeSet<&[SignedItem]> = level.iter().map(Vec::as_slice).collect();
        let mut next = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a[..k - 1] != b[..k - 1] {
                    // level is sorted, so no later b shares the prefix either
                    break;
                }
                let (x, y) = (a[k - 1], b[k - 1]);
                if x.label == y.label {
                    continue;
                }
                let mut cand = a.clone();
                cand.push(y);
                let closed = (0..cand.len()).all(|drop| {
                    let sub: Vec<SignedItem> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != drop)
                        .map(|(_, &s)| s)
                        .collect();
                    known.contains(sub.as_slice())
                });
                if !closed {
                    continue;
                }
                let c = count(tx, &cand);
                if is_frequent(c, n, min_support) {
                    out.push(itemset(cand.clone(), c, n));
                    next.push(cand);
                }
            }
        }
        level = next;
        k += 1;
    }
    Ok(sort_output(out))
}

/// Counts every signed itemset (each label absent, positive or negative) up
/// to `max_len` items. Refuses more than [`BRUTE_FORCE_MAX_LABELS`] labels.
pub fn brute_force_frequent(
    tx: &[Transaction],
    min_support: f64,
    max_len: usize,
) -> Result<Vec<FrequentItemset>> {
    check_support(min_support)?;
    let width = check_transactions(tx)?;
    if width > BRUTE_FORCE_MAX_LABELS {
        return Err(Error::TooLarge(format!(
            "brute-force mining over {width} labels (limit {BRUTE_FORCE_MAX_LABELS})"
        )));
    }
    let n = tx.len();
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    let total = 3usize.pow(width as u32);
    for code in 1..total {
        let mut rest = code;
        let mut items = Vec::new();
        for label in 0..width {
            match rest % 3 {
                1 => items.push(SignedItem::neg(label)),
                2 => items.push(SignedItem::pos(label)),
                _ => {}
            }
            rest /= 3;
        }
        if items.len() > max_len {
            continue;
        }
        let c = count(tx, &items);
        if is_frequent(c, n, min_support) {
            out.push(itemset(items, c, n));
        }
    }
    Ok(sort_output(out))
}

/// Single-consequent rules `I \ {x} -> x` with confidence at least
/// `min_confidence`. Rules with an empty antecedent are not produced.
pub fn rules_from_frequent(
    frequent: &[FrequentItemset],
    min_confidence: f64,
) -> Result<Vec<MinedRule>> {
    if !(min_confidence > 0.0 && min_confidence <= 1.0) {
        return Err(invalid!(
            "confidence must be in (0, 1], got {min_confidence}"
        ));
    }
    let counts: BTreeMap<&[SignedItem], usize> = frequent
        .iter()
        .map(|f| (f.items.as_slice(), f.count))
        .collect();
    let mut rules = Vec::new();
    for f in frequent.iter().filter(|f| f.items.len() >= 2) {
        for (j, &consequent) in f.items.iter().enumerate() {
            let antecedent: Vec<SignedItem> = f
                .items
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &s)| s)
                .collect();
            let base = *counts
                .get(antecedent.as_slice())
                .ok_or_else(|| invalid!("frequent itemsets are not downward closed"))?;
            // Compare counts to keep confidence 1.0 exact.
            if f.count as f64 >= min_confidence * base as f64 {
                rules.push(MinedRule {
                    antecedent,
                    consequent,
                    support: f.support,
                    confidence: f.count as f64 / base as f64,
                });
            }
        }
    }
    Ok(rules)
}

/// `a1 & ... & an -> c` becomes `na1 v ... v nan v c`, literals ordered by
/// label. Rules that give the same clause yield it once, in first-seen order.
pub fn rules_to_clauses(rules: &[MinedRule], names: &[String]) -> Result<Vec<Clause>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rule in rules {
        let mut items: Vec<SignedItem> = rule
            .antecedent
            .iter()
            .map(|a| SignedItem {
                label: a.label,
                positive: !a.positive,
            })
            .chain([rule.consequent])
            .collect();
        items.sort();
        if !seen.insert(items.clone()) {
            continue;
        }
        let literals = items
            .iter()
            .map(|i| {
                let name = names.get(i.label).ok_or(Error::IndexOutOfRange {
                    index: i.label,
                    len: names.len(),
                })?;
                let sign = if i.positive { Sign::Pos } else { Sign::Neg };
                Ok(Literal::new(name.clone(), sign, VarSlot::X))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Clause::new(
            literals,
            ClauseWeight::Learnable(DEFAULT_LEARNABLE_WEIGHT),
        )?);
    }
    Ok(out)
}

/// Full pipeline from a label matrix to learnable clauses.
pub fn mine_clauses(
    y: &Matrix,
    names: &[String],
    cfg: &MinerConfig,
) -> Result<(Vec<MinedRule>, Vec<Clause>)> {
    cfg.validate()?;
    if names.len() != y.cols() {
        return Err(invalid!(
            "{} label names for {} label columns",
            names.len(),
            y.cols()
        ));
    }
    let tx = transactions_from_labels(y)?;
    let frequent = apriori_frequent(&tx, cfg.min_support, cfg.max_len)?;
    let rules = rules_from_frequent(&frequent, cfg.min_confidence)?;
    let clauses = rules_to_clauses(&rules, names)?;
    Ok((rules, clauses))
}
