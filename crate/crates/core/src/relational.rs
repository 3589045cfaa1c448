//! Knowledge enhancement on relational data.
//!
//! Objects live in a unary table `U` (one row per object, one column per
//! unary predicate) and pairs of objects in a binary table `B` whose rows are
//! keyed by the foreign keys `sx`, `sy`. Binary clauses are evaluated on the
//! joined matrix
//!
//! ```text
//! M = [ U[sx] | U[sy] | B ]
//! ```
//!
//! where the first two blocks are the binary extensions `P^x`, `P^y` of every
//! unary predicate. The deltas of `M` are folded back per object by summing
//! the `U^x` block grouped by `sx` and the `U^y` block grouped by `sy`:
//!
//! ```text
//! U' = U + dU_unary + dU_x + dU_y
//! B' = B + dB
//! ```

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape};
use crate::enhancer::KnowledgeEnhancer;
use crate::error::{Error, Result};
use crate::logic::{Clause, Knowledge, Layout, PredicateSchema, VarSlot};
use crate::matrix::Matrix;

/// Preactivation stored for a relation that is known to hold (`σ(25) ≈ 1`).
pub const KNOWN_TRUE_PREACTIVATION: f64 = 25.0;

/// Largest number of grounded clauses [`naive_grounding_oracle`] accepts.
pub const MAX_ORACLE_GROUNDINGS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct UnaryTable {
    /// Object id held by each row.
    pub index: Vec<usize>,
    /// `objects × unary predicates`, columns in schema order.
    pub z: Matrix,
}

impl UnaryTable {
    pub fn new(index: Vec<usize>, z: Matrix) -> Result<Self> {
        if index.len() != z.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} rows",
                index.len(),
                z.rows()
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = index.iter().find(|i| !seen.insert(**i)) {
            return Err(Error::InvalidArgument(format!(
                "object id {dup} appears twice"
            )));
        }
        Ok(UnaryTable { index, z })
    }

    /// Rows hold objects `0..n` in order.
    pub fn sequential(z: Matrix) -> Self {
        UnaryTable {
            index: (0..z.rows()).collect(),
            z,
        }
    }

    pub fn n_objects(&self) -> usize {
        self.z.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryTable {
    /// Row position in the unary table of each pair's first object.
    pub sx: Vec<usize>,
    /// Row position of each pair's second object.
    pub sy: Vec<usize>,
    /// `pairs × binary predicates`, columns in schema order.
    pub z: Matrix,
    /// Binary predicates whose values are observed rather than predicted;
    /// their deltas are discarded.
    pub given: Vec<bool>,
}

impl BinaryTable {
    pub fn new(sx: Vec<usize>, sy: Vec<usize>, z: Matrix) -> Result<Self> {
        if sx.len() != sy.len() || sx.len() != z.rows() {
            return Err(Error::InvalidArgument(format!(
                "binary table with {} sx, {} sy and {} rows",
                sx.len(),
                sy.len(),
                z.rows()
            )));
        }
        let given = vec![false; z.cols()];
        Ok(BinaryTable { sx, sy, z, given })
    }

    /// Directed pairs whose binary predicates are all known to be true.
    pub fn known_true(pairs: &[(usize, usize)], n_binary: usize) -> Self {
        BinaryTable {
            sx: pairs.iter().map(|p| p.0).collect(),
            sy: pairs.iter().map(|p| p.1).collect(),
            z: Matrix::filled(pairs.len(), n_binary, KNOWN_TRUE_PREACTIVATION),
            given: vec![true; n_binary],
        }
    }

    pub fn empty(n_binary: usize) -> Self {
        BinaryTable {
            sx: Vec::new(),
            sy: Vec::new(),
            z: Matrix::zeros(0, n_binary),
            given: vec![false; n_binary],
        }
    }

    pub fn with_given(mut self, given: Vec<bool>) -> Result<Self> {
        if given.len() != self.z.cols() {
            return Err(Error::InvalidArgument(format!(
                "{} given flags for {} binary predicates",
                given.len(),
                self.z.cols()
            )));
        }
        self.given = given;
        Ok(self)
    }

    pub fn n_pairs(&self) -> usize {
        self.sx.len()
    }

    pub fn check_objects(&self, n_objects: usize) -> Result<()> {
        match self.sx.iter().chain(&self.sy).find(|&&i| i >= n_objects) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                len: n_objects,
            }),
            None => Ok(()),
        }
    }
}

/// The joined pair matrix and its column layout.
#[derive(Clone, Debug)]
pub struct JoinedMatrix {
    pub m: NodeId,
    pub layout: Layout,
}

/// `M = [U[sx] | U[sy] | B]`, differentiable in both `u` and `b`.
pub fn join(tape: &mut Tape, u: NodeId, b: NodeId, sx: &[usize], sy: &[usize]) -> Result<NodeId> {
    if tape.value(b).rows() != sx.len() || sx.len() != sy.len() {
        return Err(Error::Shape {
            op: "join",
            left: tape.value(b).shape(),
            right: (sx.len(), sy.len()),
        });
    }
    let ux = tape.gather_rows(u, sx)?;
    let uy = tape.gather_rows(u, sy)?;
    let unary = tape.concat_cols(ux, uy)?;
    tape.concat_cols(unary, b)
}

/// Join over the schema's layout.
pub fn join_tables(
    tape: &mut Tape,
    schema: &PredicateSchema,
    u: NodeId,
    b: NodeId,
    table: &BinaryTable,
) -> Result<JoinedMatrix> {
    let m = join(tape, u, b, &table.sx, &table.sy)?;
    Ok(JoinedMatrix {
        m,
        layout: Layout::joined(schema),
    })
}

/// Per-object and per-pair deltas from the joined-matrix deltas `dm`.
///
/// Returns `(dU_x, dU_y, dB)`; objects without pairs get zero rows, and
/// columns of given binary predicates in `dB` are zero.
pub fn split_deltas(
    tape: &mut Tape,
    dm: NodeId,
    table: &BinaryTable,
    n_objects: usize,
    n_unary: usize,
) -> Result<(NodeId, NodeId, NodeId)> {
    let n_binary = table.given.len();
    let (rows, cols) = tape.value(dm).shape();
    if cols != 2 * n_unary + n_binary || rows != table.n_pairs() {
        return Err(Error::Shape {
            op: "split_deltas",
            left: (rows, cols),
            right: (table.n_pairs(), 2 * n_unary + n_binary),
        });
    }
    table.check_objects(n_objects)?;
    let x_cols: Vec<usize> = (0..n_unary).collect();
    let y_cols: Vec<usize> = (n_unary..2 * n_unary).collect();
    let dx = tape.select_cols(dm, &x_cols)?;
    let dy = tape.select_cols(dm, &y_cols)?;
    let dux = tape.segment_sum_rows(dx, &table.sx, n_objects)?;
    let duy = tape.segment_sum_rows(dy, &table.sy, n_objects)?;

    let predicted: Vec<usize> = (0..n_binary).filter(|&j| !table.given[j]).collect();
    let src: Vec<usize> = predicted.iter().map(|j| 2 * n_unary + j).collect();
    let signs = vec![1.0; predicted.len()];
    let kept = tape.gather_cols_signed(dm, &src, &signs)?;
    let db = tape.scatter_cols_signed(kept, &predicted, &signs, n_binary)?;
    Ok((dux, duy, db))
}

/// Unary and binary Knowledge Enhancers for one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationalEnhancer {
    n_unary: usize,
    n_binary: usize,
    unary: KnowledgeEnhancer,
    binary: KnowledgeEnhancer,
}

impl RelationalEnhancer {
    pub fn new(knowledge: &Knowledge) -> Result<Self> {
        let schema = knowledge.schema();
        Ok(RelationalEnhancer {
            n_unary: schema.unary_names().len(),
            n_binary: schema.binary_names().len(),
            unary: KnowledgeEnhancer::new(knowledge.unary(), &Layout::unary(schema.unary_names()))?,
            binary: KnowledgeEnhancer::new(knowledge.binary(), &Layout::joined(schema))?,
        })
    }

    pub fn unary(&self) -> &KnowledgeEnhancer {
        &self.unary
    }

    pub fn binary(&self) -> &KnowledgeEnhancer {
        &self.binary
    }

    /// Enhanced preactivations `(U', B')`.
    ///
    /// `u` is `objects × unary`, `b` is `pairs × binary`; only the keys and
    /// `given` flags of `table` are read, its `z` is not.
    pub fn forward(
        &self,
        tape: &mut Tape,
        u: NodeId,
        b: NodeId,
        table: &BinaryTable,
        unary_weights: &[NodeId],
        binary_weights: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let (n_objects, uc) = tape.value(u).shape();
        let bshape = tape.value(b).shape();
        if uc != self.n_unary || bshape.1 != self.n_binary || table.given.len() != self.n_binary {
            return Err(Error::Shape {
                op: "relational enhancer",
                left: (uc, bshape.1),
                right: (self.n_unary, self.n_binary),
            });
        }
        table.check_objects(n_objects)?;
        let mut u_parts = vec![u];
        if let Some(du) = self.unary.delta(tape, u, unary_weights)? {
            u_parts.push(du);
        }
        let mut b_parts = vec![b];
        if !self.binary.is_empty() {
            let m = join(tape, u, b, &table.sx, &table.sy)?;
            if let Some(dm) = self.binary.delta(tape, m, binary_weights)? {
                let (dux, duy, db) = split_deltas(tape, dm, table, n_objects, self.n_unary)?;
                u_parts.extend([dux, duy]);
                b_parts.push(db);
            }
        }
        let u_out = tape.sum_nodes(&u_parts)?;
        let b_out = tape.sum_nodes(&b_parts)?;
        Ok((u_out, b_out))
    }
}

/// Batched relational enhancement with the clause weights declared in
/// `knowledge`.
pub fn relational_ke_forward(
    u: &UnaryTable,
    b: &BinaryTable,
    knowledge: &Knowledge,
) -> Result<(Matrix, Matrix)> {
    let ke = RelationalEnhancer::new(knowledge)?;
    let mut tape = Tape::new();
    let un = tape.constant(u.z.clone());
    let bn = tape.constant(b.z.clone());
    let uw = ke
        .unary
        .bind_weights(&mut tape, &ke.unary.initial_weights())?;
    let bw = ke
        .binary
        .bind_weights(&mut tape, &ke.binary.initial_weights())?;
    let (uo, bo) = ke.forward(&mut tape, un, bn, b, &uw, &bw)?;
    Ok((tape.value(uo).clone(), tape.value(bo).clone()))
}

/// Reference semantics: every grounded atom in one flat vector, one clause
/// instance per grounding (per object for unary clauses, per pair for binary
/// clauses), deltas summed into the flat vector. Evaluated with plain scalar
/// arithmetic, independently of the tape.
pub fn naive_grounding_oracle(
    u: &UnaryTable,
    b: &BinaryTable,
    knowledge: &Knowledge,
) -> Result<(Matrix, Matrix)> {
    let schema = knowledge.schema();
    let (n_obj, n_u) = u.z.shape();
    let n_b = schema.binary_names().len();
    if n_u != schema.unary_names().len() || b.z.cols() != n_b || b.given.len() != n_b {
        return Err(Error::Shape {
            op: "naive_grounding_oracle",
            left: (n_u, b.z.cols()),
            right: (schema.unary_names().len(), n_b),
        });
    }
    b.check_objects(n_obj)?;
    let groundings = knowledge.unary().len() * n_obj + knowledge.binary().len() * b.n_pairs();
    if groundings > MAX_ORACLE_GROUNDINGS {
        return Err(Error::TooLarge(format!(
            "{groundings} groundings (limit {MAX_ORACLE_GROUNDINGS})"
        )));
    }

    let unary_atom = |obj: usize, pred: usize| obj * n_u + pred;
    let binary_atom = |pair: usize, pred: usize| n_obj * n_u + pair * n_b + pred;
    let mut flat: Vec<f64> = u.z.as_slice().to_vec();
    flat.extend_from_slice(b.z.as_slice());
    let mut delta = vec![0.0; flat.len()];

    let mut apply = |atoms: &[(usize, f64)], w: f64| {
        let lits: Vec<f64> = atoms.iter().map(|&(p, s)| s * flat[p]).collect();
        let top = lits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = lits.iter().map(|&z| libm::exp(z - top)).collect();
        let total: f64 = exps.iter().sum();
        for (&(p, s), e) in atoms.iter().zip(exps) {
            delta[p] += s * w * e / total;
        }
    };
    let weight = |c: &Clause| c.weight().value().max(0.0);

    for c in knowledge.unary() {
        for obj in 0..n_obj {
            let atoms: Vec<(usize, f64)> = c
                .literals()
                .iter()
                .map(|l| {
                    (
                        unary_atom(obj, schema.unary_index(&l.predicate).unwrap()),
                        l.sign.value(),
                    )
                })
                .collect();
            apply(&atoms, weight(c));
        }
    }
    for c in knowledge.binary() {
        for pair in 0..b.n_pairs() {
            let atoms: Vec<(usize, f64)> = c
                .literals()
                .iter()
                .map(|l| {
                    let atom = match l.slot {
                        VarSlot::X => {
                            unary_atom(b.sx[pair], schema.unary_index(&l.predicate).unwrap())
                        }
                        VarSlot::Y => {
                            unary_atom(b.sy[pair], schema.unary_index(&l.predicate).unwrap())
                        }
                        VarSlot::XY => {
                            binary_atom(pair, schema.binary_index(&l.predicate).unwrap())
                        }
                    };
                    (atom, l.sign.value())
                })
                .collect();
            apply(&atoms, weight(c));
        }
    }

    for pair in 0..b.n_pairs() {
        for (j, &given) in b.given.iter().enumerate() {
            if given {
                delta[binary_atom(pair, j)] = 0.0;
            }
        }
    }
    let out: Vec<f64> = flat.iter().zip(&delta).map(|(z, d)| z + d).collect();
    let split = n_obj * n_u;
    Ok((
        Matrix::from_vec(n_obj, n_u, out[..split].to_vec())?,
        Matrix::from_vec(b.n_pairs(), n_b, out[split..].to_vec())?,
    ))
}
