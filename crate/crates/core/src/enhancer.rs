//! Clause Enhancers and the Knowledge Enhancer.
//!
//! Each clause gets one enhancer that works on a whole preactivation matrix at
//! once (rows are groundings, columns are atoms of the layout). For a clause
//! `(p, s)` with weight `w` and preactivations `Z`:
//!
//! ```text
//! delta_c(Z) = scatter(w * softmax_rows(gather(Z, p, s)), p, s)
//! Z'         = Z + sum_c delta_c(Z)
//! ```
//!
//! Negated literals are handled by the signs `s`, since `1 - σ(z) = σ(-z)`.

use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::logic::{to_vector_clause, Clause, ClauseWeight, Layout, VectorClause};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct ClauseEnhancer {
    clause: VectorClause,
    weight: ClauseWeight,
}

impl ClauseEnhancer {
    pub fn new(clause: &Clause, layout: &Layout) -> Result<Self> {
        Ok(ClauseEnhancer {
            clause: to_vector_clause(clause, layout)?,
            weight: clause.weight(),
        })
    }

    pub fn vector_clause(&self) -> &VectorClause {
        &self.clause
    }

    pub fn weight(&self) -> ClauseWeight {
        self.weight
    }

    /// Changes proposed by this clause for every row of `z`.
    ///
    /// `weight` is a 1×1 node holding the raw parameter; the effective weight
    /// is `max(weight, 0)`.
    pub fn delta(&self, tape: &mut Tape, z: NodeId, weight: NodeId) -> Result<NodeId> {
        let width = tape.value(z).cols();
        let literals = tape.gather_cols_signed(z, &self.clause.cols, &self.clause.signs)?;
        let soft = tape.softmax_rows(literals);
        let w = tape.relu(weight);
        let scaled = tape.scale(soft, w)?;
        tape.scatter_cols_signed(scaled, &self.clause.cols, &self.clause.signs, width)
    }
}

/// All clause enhancers over one layout.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeEnhancer {
    width: usize,
    enhancers: Vec<ClauseEnhancer>,
}

impl KnowledgeEnhancer {
    pub fn new<'a>(clauses: impl IntoIterator<Item = &'a Clause>, layout: &Layout) -> Result<Self> {
        let enhancers = clauses
            .into_iter()
            .map(|c| ClauseEnhancer::new(c, layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(KnowledgeEnhancer {
            width: layout.width(),
            enhancers,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn enhancers(&self) -> &[ClauseEnhancer] {
        &self.enhancers
    }

    pub fn len(&self) -> usize {
        self.enhancers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enhancers.is_empty()
    }

    /// Raw weight values as declared by the clauses.
    pub fn initial_weights(&self) -> Vec<f64> {
        self.enhancers.iter().map(|e| e.weight.value()).collect()
    }

    /// Puts one 1×1 weight node per clause on the tape: learnable clauses
    /// become parameters, fixed clauses constants.
    pub fn bind_weights(&self, tape: &mut Tape, values: &[f64]) -> Result<Vec<NodeId>> {
        if values.len() != self.enhancers.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} weights for {} clauses",
                values.len(),
                self.enhancers.len()
            )));
        }
        Ok(self
            .enhancers
            .iter()
            .zip(values)
            .map(|(e, &v)| {
                if e.weight.is_learnable() {
                    tape.param(Matrix::scalar(v))
                } else {
                    tape.constant(Matrix::scalar(v))
                }
            })
            .collect())
    }

    fn check(&self, tape: &Tape, z: NodeId, weights: &[NodeId]) -> Result<()> {
        let shape = tape.value(z).shape();
        if shape.1 != self.width {
            return Err(Error::Shape {
                op: "knowledge enhancer",
                left: shape,
                right: (shape.0, self.width),
            });
        }
        if weights.len() != self.enhancers.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} weight nodes for {} clauses",
                weights.len(),
                self.enhancers.len()
            )));
        }
        Ok(())
    }

    /// Sum of all clause deltas, or `None` without clauses.
    pub fn delta(&self, tape: &mut Tape, z: NodeId, weights: &[NodeId]) -> Result<Option<NodeId>> {
        self.check(tape, z, weights)?;
        let deltas = self
            .enhancers
            .iter()
            .zip(weights)
            .map(|(e, &w)| e.delta(tape, z, w))
            .collect::<Result<Vec<_>>>()?;
        if deltas.is_empty() {
            Ok(None)
        } else {
            tape.sum_nodes(&deltas).map(Some)
        }
    }

    /// Enhanced preactivations `Z' = Z + sum_c delta_c(Z)`.
    pub fn enhance(&self, tape: &mut Tape, z: NodeId, weights: &[NodeId]) -> Result<NodeId> {
        match self.delta(tape, z, weights)? {
            Some(d) => tape.add(z, d),
            None => Ok(z),
        }
    }

    /// `(Z', σ(Z'))`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        z: NodeId,
        weights: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let zp = self.enhance(tape, z, weights)?;
        let y = tape.sigmoid(zp);
        Ok((zp, y))
    }

    /// `(Z', softmax_rows(Z'))`, for mutually exclusive classes.
    pub fn forward_softmax_head(
        &self,
        tape: &mut Tape,
        z: NodeId,
        weights: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let zp = self.enhance(tape, z, weights)?;
        let y = tape.softmax_rows(zp);
        Ok((zp, y))
    }

    /// Non-differentiable convenience: enhanced preactivations with the
    /// declared clause weights.
    pub fn apply(&self, z: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let zn = tape.constant(z.clone());
        let w = self.bind_weights(&mut tape, &self.initial_weights())?;
        let out = self.enhance(&mut tape, zn, &w)?;
        Ok(tape.value(out).clone())
    }
}
