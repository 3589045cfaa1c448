//! Base networks and their composition with Knowledge Enhancers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, Tape};
use crate::enhancer::KnowledgeEnhancer;
use crate::error::{invalid, Error, Result};
use crate::fuzzy::logit;
use crate::logic::{Clause, ClauseWeight, Knowledge, Layout, Literal, PredicateSchema, VarSlot};
use crate::matrix::Matrix;
use crate::relational::{BinaryTable, RelationalEnhancer};

/// Default clamp for input atoms given as exact 0/1 truth values.
pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Independent labels, elementwise logistic.
    Sigmoid,
    /// Mutually exclusive classes, row softmax.
    Softmax,
}

impl Head {
    pub fn apply(self, tape: &mut Tape, z: NodeId) -> NodeId {
        match self {
            Head::Sigmoid => tape.sigmoid(z),
            Head::Softmax => tape.softmax_rows(z),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::Sigmoid => "sigmoid",
            Head::Softmax => "softmax",
        }
    }
}

/// Dense ReLU network: `widths[0]` inputs, `widths.last()` raw outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpConfig {
    pub widths: Vec<usize>,
    pub head: Head,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(widths: Vec<usize>, head: Head, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid!(
                "an MLP needs at least one layer of nonzero width, got {widths:?}"
            ));
        }
        Ok(MlpConfig { widths, head, seed })
    }

    /// Logistic regression: a single affine layer.
    pub fn logistic(inputs: usize, outputs: usize, head: Head, seed: u64) -> Result<Self> {
        MlpConfig::new(vec![inputs, outputs], head, seed)
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Glorot-uniform weights (from `seed`), zero biases.
    pub fn init(&self) -> Vec<Param> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(2 * self.layers());
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            out.push(Param {
                name: format!("layer{l}.weight"),
                kind: ParamKind::Base,
                value: Matrix::from_vec(fan_in, fan_out, data).unwrap(),
            });
            out.push(Param {
                name: format!("layer{l}.bias"),
                kind: ParamKind::Base,
                value: Matrix::zeros(1, fan_out),
            });
        }
        out
    }
}

/// Raw preactivations of the network; `layers` holds weight/bias node pairs.
pub fn base_forward(
    tape: &mut Tape,
    cfg: &MlpConfig,
    layers: &[NodeId],
    x: NodeId,
) -> Result<NodeId> {
    if layers.len() != 2 * cfg.layers() {
        return Err(invalid!(
            "{} parameter nodes for {} layers",
            layers.len(),
            cfg.layers()
        ));
    }
    if tape.value(x).cols() != cfg.inputs() {
        return Err(Error::Shape {
            op: "base_forward",
            left: tape.value(x).shape(),
            right: (tape.value(x).rows(), cfg.inputs()),
        });
    }
    let mut h = x;
    for (l, wb) in layers.chunks(2).enumerate() {
        let lin = tape.matmul(h, wb[0])?;
        h = tape.add_row_broadcast(lin, wb[1])?;
        if l + 1 < cfg.layers() {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// `logit(clamp(x, eps, 1 - eps))`, so exact 0/1 inputs become large finite
/// preactivations.
pub fn inject_input_atoms(atoms: &Matrix, epsilon: f64) -> Result<Matrix> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(invalid!("epsilon must be in (0, 0.5), got {epsilon}"));
    }
    if let Some(v) = atoms.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid!("input atom value {v} outside [0, 1]"));
    }
    Ok(atoms.map(|v| logit(v.clamp(epsilon, 1.0 - epsilon))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Base,
    ClauseWeight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Matrix,
}

/// Ordered, named parameter matrices of a model.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Params {
    entries: Vec<Param>,
}

impl Params {
    pub fn new(entries: Vec<Param>) -> Self {
        Params { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> core::slice::IterMut<'_, Param> {
        self.entries.iter_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.iter_mut().find(|p| p.name == name)
    }

    /// Copies values by name from `other`; every parameter must be present
    /// with the same shape.
    pub fn load(&mut self, other: &Params) -> Result<()> {
        for p in &mut self.entries {
            let src = other
                .get(&p.name)
                .ok_or_else(|| invalid!("missing parameter `{}`", p.name))?;
            if src.value.shape() != p.value.shape() {
                return Err(Error::Shape {
                    op: "load parameter",
                    left: p.value.shape(),
                    right: src.value.shape(),
                });
            }
            p.value = src.value.clone();
        }
        Ok(())
    }

    /// Puts every parameter on the tape, as a gradient-tracking leaf when
    /// `trainable(kind)` holds and as a constant otherwise.
    pub fn bind(&self, tape: &mut Tape, trainable: impl Fn(ParamKind) -> bool) -> Vec<NodeId> {
        self.entries
            .iter()
            .map(|p| {
                if trainable(p.kind) {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }
}

/// Clause weights of a knowledge base: learnable ones map to parameters,
/// fixed ones stay constants outside the parameter store.
#[derive(Clone, Debug, PartialEq)]
struct ClauseWeights {
    /// Per clause (in `Knowledge::clauses` order): parameter slot or fixed value.
    slots: Vec<core::result::Result<usize, f64>>,
}

impl ClauseWeights {
    fn register(knowledge: &Knowledge, params: &mut Vec<Param>) -> Self {
        let slots = knowledge
            .clauses()
            .enumerate()
            .map(|(i, c)| match c.weight() {
                ClauseWeight::Learnable(init) => {
                    params.push(Param {
                        name: format!("clause{i}.weight"),
                        kind: ParamKind::ClauseWeight,
                        value: Matrix::scalar(init),
                    });
                    Ok(params.len() - 1)
                }
                ClauseWeight::Fixed(v) => Err(v),
            })
            .collect();
        ClauseWeights { slots }
    }

    fn nodes(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        range: core::ops::Range<usize>,
    ) -> Vec<NodeId> {
        self.slots[range]
            .iter()
            .map(|s| match *s {
                Ok(idx) => bound[idx],
                Err(v) => tape.constant(Matrix::scalar(v)),
            })
            .collect()
    }

    /// Effective (clipped) weight of every clause.
    fn effective(&self, params: &Params) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                Ok(idx) => params.entries[idx].value.item().max(0.0),
                Err(v) => v,
            })
            .collect()
    }
}

fn learned_knowledge(
    knowledge: &Knowledge,
    weights: &ClauseWeights,
    params: &Params,
) -> Result<Knowledge> {
    let new: Vec<ClauseWeight> = knowledge
        .clauses()
        .zip(&weights.slots)
        .zip(weights.effective(params))
        .map(|((c, slot), v)| match (c.weight(), slot) {
            (ClauseWeight::Learnable(_), Ok(_)) => ClauseWeight::Learnable(v),
            (w, _) => w,
        })
        .collect();
    knowledge.with_weights(&new)
}

/// A unary predicate whose truth value is read from a feature column instead
/// of being predicted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputAtom {
    pub predicate: String,
    pub feature: usize,
}

/// A base network followed by a Knowledge Enhancer over unary predicates,
/// optionally with input atoms concatenated in front of the predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct KennModel {
    base: MlpConfig,
    knowledge: Knowledge,
    input_atoms: Vec<InputAtom>,
    epsilon: f64,
    predicted: Vec<String>,
    enhancer: KnowledgeEnhancer,
    weights: ClauseWeights,
    params: Params,
}

impl KennModel {
    pub fn new(base: MlpConfig, knowledge: Knowledge) -> Result<Self> {
        KennModel::with_input_atoms(base, knowledge, Vec::new(), DEFAULT_EPSILON)
    }

    pub fn with_input_atoms(
        base: MlpConfig,
        knowledge: Knowledge,
        input_atoms: Vec<InputAtom>,
        epsilon: f64,
    ) -> Result<Self> {
        if !knowledge.binary().is_empty() {
            return Err(Error::Schema(
                "binary clauses need a relational model".to_string(),
            ));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(invalid!("epsilon must be in (0, 0.5), got {epsilon}"));
        }
        let schema = knowledge.schema();
        for (i, a) in input_atoms.iter().enumerate() {
            if schema.unary_index(&a.predicate).is_none() {
                return Err(Error::Schema(format!(
                    "input atom `{}` is not a unary predicate",
                    a.predicate
                )));
            }
            if input_atoms[..i].iter().any(|b| b.predicate == a.predicate) {
                return Err(Error::Schema(format!(
                    "input atom `{}` listed twice",
                    a.predicate
                )));
            }
            if a.feature >= base.inputs() {
                return Err(Error::IndexOutOfRange {
                    index: a.feature,
                    len: base.inputs(),
                });
            }
        }
        let predicted: Vec<String> = schema
            .unary_names()
            .iter()
            .filter(|n| !input_atoms.iter().any(|a| &a.predicate == *n))
            .cloned()
            .collect();
        if predicted.len() != base.outputs() {
            return Err(Error::Schema(format!(
                "base network has {} outputs but {} predicates are predicted",
                base.outputs(),
                predicted.len()
            )));
        }
        let layout_names: Vec<&str> = input_atoms
            .iter()
            .map(|a| a.predicate.as_str())
            .chain(predicted.iter().map(String::as_str))
            .collect();
        let enhancer = KnowledgeEnhancer::new(knowledge.unary(), &Layout::unary(&layout_names))?;
        let mut params = base.init();
        let weights = ClauseWeights::register(&knowledge, &mut params);
        Ok(KennModel {
            base,
            knowledge,
            input_atoms,
            epsilon,
            predicted,
            enhancer,
            weights,
            params: Params::new(params),
        })
    }

    pub fn base(&self) -> &MlpConfig {
        &self.base
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn input_atoms(&self) -> &[InputAtom] {
        &self.input_atoms
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Names of the output columns, in order.
    pub fn predicted(&self) -> &[String] {
        &self.predicted
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Knowledge with learnable weights replaced by their current
    /// (clipped) values.
    pub fn learned_knowledge(&self) -> Result<Knowledge> {
        learned_knowledge(&self.knowledge, &self.weights, &self.params)
    }

    /// Effective weight of every clause, in `Knowledge::clauses` order.
    pub fn clause_weights(&self) -> Vec<f64> {
        self.weights.effective(&self.params)
    }

    /// Base preactivations for the predicted columns.
    pub fn forward_base_preactivations(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        x: &Matrix,
    ) -> Result<NodeId> {
        let layers = 2 * self.base.layers();
        let xn = tape.constant(x.clone());
        base_forward(tape, &self.base, &bound[..layers], xn)
    }

    /// Head applied to the base network alone.
    pub fn forward_base(&self, tape: &mut Tape, bound: &[NodeId], x: &Matrix) -> Result<NodeId> {
        let z = self.forward_base_preactivations(tape, bound, x)?;
        Ok(self.base.head.apply(tape, z))
    }

    /// Predictions for the predicted columns; input atoms are enhanced
    /// together with the predictions and then dropped.
    pub fn forward(&self, tape: &mut Tape, bound: &[NodeId], x: &Matrix) -> Result<NodeId> {
        let zy = self.forward_base_preactivations(tape, bound, x)?;
        let n_inputs = self.input_atoms.len();
        let z = if n_inputs == 0 {
            zy
        } else {
            let cols: Vec<usize> = self.input_atoms.iter().map(|a| a.feature).collect();
            let zx = tape.constant(inject_input_atoms(&x.select_cols(&cols), self.epsilon)?);
            tape.concat_cols(zx, zy)?
        };
        let w = self.weights.nodes(tape, bound, 0..self.enhancer.len());
        let zp = self.enhancer.enhance(tape, z, &w)?;
        let zp = if n_inputs == 0 {
            zp
        } else {
            let keep: Vec<usize> = (n_inputs..n_inputs + self.predicted.len()).collect();
            tape.select_cols(zp, &keep)?
        };
        Ok(self.base.head.apply(tape, zp))
    }

    /// Predictions with the current parameters.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |_| false);
        let y = self.forward(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }

    pub fn predict_base(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |_| false);
        let y = self.forward_base(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }
}

/// A base network over node features followed by the relational Knowledge
/// Enhancer; the binary predicates come from a [`BinaryTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct RelationalKenn {
    base: MlpConfig,
    knowledge: Knowledge,
    enhancer: RelationalEnhancer,
    weights: ClauseWeights,
    params: Params,
}

/// Base MLP from node features to unary preactivations, then the relational
/// enhancer.
pub fn build_relational_kenn(cfg: MlpConfig, knowledge: Knowledge) -> Result<RelationalKenn> {
    RelationalKenn::new(cfg, knowledge)
}

impl RelationalKenn {
    pub fn new(base: MlpConfig, knowledge: Knowledge) -> Result<Self> {
        let n_unary = knowledge.schema().unary_names().len();
        if base.outputs() != n_unary {
            return Err(Error::Schema(format!(
                "base network has {} outputs but the schema has {} unary predicates",
                base.outputs(),
                n_unary
            )));
        }
        let enhancer = RelationalEnhancer::new(&knowledge)?;
        let mut params = base.init();
        let weights = ClauseWeights::register(&knowledge, &mut params);
        Ok(RelationalKenn {
            base,
            knowledge,
            enhancer,
            weights,
            params: Params::new(params),
        })
    }

    pub fn base(&self) -> &MlpConfig {
        &self.base
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn learned_knowledge(&self) -> Result<Knowledge> {
        learned_knowledge(&self.knowledge, &self.weights, &self.params)
    }

    pub fn clause_weights(&self) -> Vec<f64> {
        self.weights.effective(&self.params)
    }

    pub fn forward_base(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        features: &Matrix,
    ) -> Result<NodeId> {
        let xn = tape.constant(features.clone());
        let z = base_forward(tape, &self.base, &bound[..2 * self.base.layers()], xn)?;
        Ok(self.base.head.apply(tape, z))
    }

    /// Node predictions after relational enhancement.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[NodeId],
        features: &Matrix,
        table: &BinaryTable,
    ) -> Result<NodeId> {
        let xn = tape.constant(features.clone());
        let u = base_forward(tape, &self.base, &bound[..2 * self.base.layers()], xn)?;
        let b = tape.constant(table.z.clone());
        let n_u = self.enhancer.unary().len();
        let n_b = self.enhancer.binary().len();
        let uw = self.weights.nodes(tape, bound, 0..n_u);
        let bw = self.weights.nodes(tape, bound, n_u..n_u + n_b);
        let (up, _) = self.enhancer.forward(tape, u, b, table, &uw, &bw)?;
        Ok(self.base.head.apply(tape, up))
    }

    pub fn predict(&self, features: &Matrix, table: &BinaryTable) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |_| false);
        let y = self.forward(&mut tape, &bound, features, table)?;
        Ok(tape.value(y).clone())
    }

    pub fn predict_base(&self, features: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |_| false);
        let y = self.forward_base(&mut tape, &bound, features)?;
        Ok(tape.value(y).clone())
    }
}

/// The XOR construction: logistic regression on two Boolean inputs, with the
/// inputs injected as atoms `x1`, `x2` and four fixed-weight clauses forcing
/// `y = x1 xor x2`. The regression starts from zero weights.
pub fn xor_model(weight: f64, epsilon: f64) -> Result<KennModel> {
    let schema = PredicateSchema::new(["x1", "x2", "y"], [])?;
    let x = VarSlot::X;
    let fixed = ClauseWeight::Fixed(weight);
    let lit = |name: &str, positive: bool| {
        if positive {
            Literal::pos(name, x)
        } else {
            Literal::neg(name, x)
        }
    };
    let clauses = [
        [false, false, false],
        [false, true, true],
        [true, false, true],
        [true, true, false],
    ]
    .iter()
    .map(|&[a, b, c]| Clause::new(vec![lit("x1", a), lit("x2", b), lit("y", c)], fixed))
    .collect::<Result<Vec<_>>>()?;
    let knowledge = Knowledge::new(schema, clauses)?;
    let base = MlpConfig::logistic(2, 1, Head::Sigmoid, 0)?;
    let atoms = vec![
        InputAtom {
            predicate: "x1".into(),
            feature: 0,
        },
        InputAtom {
            predicate: "x2".into(),
            feature: 1,
        },
    ];
    let mut model = KennModel::with_input_atoms(base, knowledge, atoms, epsilon)?;
    for p in model.params_mut().iter_mut() {
        p.value = p.value.map(|_| 0.0);
    }
    Ok(model)
}

/// The four Boolean input points and their XOR labels.
pub fn xor_points() -> (Matrix, Matrix) {
    (
        Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]),
        Matrix::from_rows(&[[0.0], [1.0], [1.0], [0.0]]),
    )
}
