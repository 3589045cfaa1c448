//! Seeded self-checks shared by the command line and the test suites:
//! random instances plus the comparisons run on them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_diff_check, Tape};
use crate::error::Result;
use crate::logic::{Clause, ClauseWeight, Knowledge, Literal, PredicateSchema, Sign, VarSlot};
use crate::matrix::Matrix;
use crate::miner::{apriori_frequent, brute_force_frequent, transactions_from_labels};
use crate::model::{
    xor_model, xor_points, Head, KennModel, MlpConfig, RelationalKenn, DEFAULT_EPSILON,
};
use crate::relational::{naive_grounding_oracle, relational_ke_forward, BinaryTable, UnaryTable};
use crate::train::{label_accuracy, train_end_to_end, TrainConfig};

/// Step for the central differences of the gradient checks.
pub const GRADCHECK_STEP: f64 = 1e-5;

fn normal(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
    z * scale
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| normal(rng, scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn sign(rng: &mut ChaCha8Rng) -> Sign {
    if rng.random_bool(0.5) {
        Sign::Pos
    } else {
        Sign::Neg
    }
}

/// Schema with unary predicates `P0..` and binary predicates `R0..`.
pub fn numbered_schema(n_unary: usize, n_binary: usize) -> PredicateSchema {
    PredicateSchema::new(
        (0..n_unary).map(|i| format!("P{i}")),
        (0..n_binary).map(|i| format!("R{i}")),
    )
    .unwrap()
}

fn random_clause(
    rng: &mut ChaCha8Rng,
    schema: &PredicateSchema,
    binary: bool,
    weight: ClauseWeight,
) -> Clause {
    let mut slots: Vec<(String, VarSlot)> = Vec::new();
    for n in schema.unary_names() {
        slots.push((n.clone(), VarSlot::X));
        if binary {
            slots.push((n.clone(), VarSlot::Y));
        }
    }
    if binary {
        slots.extend(
            schema
                .binary_names()
                .iter()
                .map(|n| (n.clone(), VarSlot::XY)),
        );
    }
    loop {
        let len = rng.random_range(1..=3.min(slots.len()));
        let mut picked = BTreeSet::new();
        while picked.len() < len {
            picked.insert(rng.random_range(0..slots.len()));
        }
        // a binary clause must mention y or a binary predicate
        if binary && picked.iter().all(|&i| slots[i].1 == VarSlot::X) {
            continue;
        }
        let literals = picked
            .into_iter()
            .map(|i| Literal::new(slots[i].0.clone(), sign(rng), slots[i].1))
            .collect();
        return Clause::new(literals, weight).unwrap();
    }
}

/// A random knowledge base with `n_unary` unary and `n_binary` binary
/// clauses of one to three literals.
pub fn random_knowledge(
    rng: &mut ChaCha8Rng,
    schema: &PredicateSchema,
    n_unary: usize,
    n_binary: usize,
    learnable: bool,
) -> Knowledge {
    let mut clauses = Vec::new();
    for k in 0..n_unary + n_binary {
        let w = rng.random_range(0.2..3.0);
        let w = if learnable {
            ClauseWeight::Learnable(w)
        } else {
            ClauseWeight::Fixed(w)
        };
        clauses.push(random_clause(rng, schema, k >= n_unary, w));
    }
    Knowledge::new(schema.clone(), clauses).unwrap()
}

/// Distinct directed pairs over `n` objects, self-loops included.
pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<(usize, usize)> {
    let count = count.min(n * n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = (rng.random_range(0..n), rng.random_range(0..n));
        if seen.insert(p) {
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationalInstance {
    pub knowledge: Knowledge,
    pub unary: UnaryTable,
    pub binary: BinaryTable,
}

/// Up to 8 objects, 20 pairs and 4 clauses (at least one binary), random
/// preactivations and random given flags.
pub fn random_relational_instance(seed: u64) -> RelationalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = numbered_schema(rng.random_range(1..=3), rng.random_range(1..=2));
    let n_binary_clauses = rng.random_range(1..=2);
    let n_unary_clauses = rng.random_range(0..=4 - n_binary_clauses);
    let knowledge = random_knowledge(&mut rng, &schema, n_unary_clauses, n_binary_clauses, false);
    let n_obj = rng.random_range(1..=8);
    let n_pairs = rng.random_range(0..=20);
    let pairs = random_pairs(&mut rng, n_obj, n_pairs);
    let nu = schema.unary_names().len();
    let nb = schema.binary_names().len();
    let unary = UnaryTable::sequential(random_matrix(&mut rng, n_obj, nu, 2.0));
    let z = random_matrix(&mut rng, pairs.len(), nb, 2.0);
    let given = (0..nb).map(|_| rng.random_bool(0.3)).collect();
    let binary = BinaryTable::new(
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
        z,
    )
    .unwrap()
    .with_given(given)
    .unwrap();
    RelationalInstance {
        knowledge,
        unary,
        binary,
    }
}

/// Largest absolute difference between the batched relational enhancer and
/// the per-grounding oracle.
pub fn oracle_difference(inst: &RelationalInstance) -> Result<f64> {
    let (ub, bb) = relational_ke_forward(&inst.unary, &inst.binary, &inst.knowledge)?;
    let (uo, bo) = naive_grounding_oracle(&inst.unary, &inst.binary, &inst.knowledge)?;
    Ok(ub.max_abs_diff(&uo).max(bb.max_abs_diff(&bo)))
}

/// Finite-difference check of a full relational model on an 8-node random
/// graph: a one-hidden-layer base, two unary clauses and one binary clause,
/// softmax head and cross-entropy against random classes. Every base
/// parameter and clause weight is checked.
pub fn relational_gradcheck(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_obj, n_feat, n_class) = (8, 3, 3);
    let schema = numbered_schema(n_class, 1);
    let knowledge = random_knowledge(&mut rng, &schema, 2, 1, true);
    let cfg = MlpConfig::new(vec![n_feat, 5, n_class], Head::Softmax, seed)?;
    let model = RelationalKenn::new(cfg, knowledge)?;
    let features = random_matrix(&mut rng, n_obj, n_feat, 1.0);
    let pairs = random_pairs(&mut rng, n_obj, 14);
    let table = BinaryTable::new(
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
        random_matrix(&mut rng, pairs.len(), 1, 2.0),
    )?;
    let mut target = Matrix::zeros(n_obj, n_class);
    for r in 0..n_obj {
        target[(r, rng.random_range(0..n_class))] = 1.0;
    }
    let inputs: Vec<Matrix> = model.params().iter().map(|p| p.value.clone()).collect();
    finite_diff_check(
        |tape: &mut Tape, ids| {
            let p = model.forward(tape, ids, &features, &table)?;
            tape.ce_mean(p, target.clone())
        },
        &inputs,
        GRADCHECK_STEP,
    )
}

/// Whether Apriori and brute force agree exactly on a random label matrix
/// with at most 8 labels and 30 rows.
pub fn apriori_agrees(seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = rng.random_range(1..=8);
    let rows = rng.random_range(1..=30);
    let density = rng.random_range(0.1..0.9);
    let data = (0..labels * rows)
        .map(|_| rng.random_bool(density) as u8 as f64)
        .collect();
    let y = Matrix::from_vec(rows, labels, data)?;
    let support = rng.random_range(0.05..0.6);
    let tx = transactions_from_labels(&y)?;
    Ok(apriori_frequent(&tx, support, labels)? == brute_force_frequent(&tx, support, labels)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct XorOutcome {
    /// Enhanced outputs of the fixed construction on the four points.
    pub kenn: Vec<f64>,
    /// Outputs of a plain logistic regression after training.
    pub plain: Vec<f64>,
    pub labels: Vec<f64>,
}

impl XorOutcome {
    pub fn kenn_solved(&self, tolerance: f64) -> bool {
        self.kenn
            .iter()
            .zip(&self.labels)
            .all(|(o, l)| (o - l).abs() < tolerance)
    }

    pub fn plain_correct(&self) -> usize {
        self.plain
            .iter()
            .zip(&self.labels)
            .filter(|(o, l)| (**o >= 0.5) == (**l >= 0.5))
            .count()
    }
}

/// Evaluates the fixed XOR construction (clause weight 10) and trains a
/// logistic regression on the same four points for `epochs` epochs.
pub fn xor_check(epochs: usize, seed: u64) -> Result<XorOutcome> {
    let (x, y) = xor_points();
    let kenn = xor_model(10.0, DEFAULT_EPSILON)?.predict(&x)?;
    let schema = PredicateSchema::new(["y"], [])?;
    let base = MlpConfig::logistic(2, 1, Head::Sigmoid, seed)?;
    let mut plain = KennModel::new(base, Knowledge::empty(schema))?;
    let cfg = TrainConfig {
        lr: 0.01,
        epochs,
        seed,
        ..TrainConfig::default()
    };
    train_end_to_end(&mut plain, &x, &y, &[0, 1, 2, 3], &cfg)?;
    let plain = plain.predict(&x)?;
    debug_assert!(label_accuracy(&plain, &y)? <= 0.75);
    Ok(XorOutcome {
        kenn: kenn.into_vec(),
        plain: plain.into_vec(),
        labels: y.into_vec(),
    })
}
