//! Model checkpoints: versioned JSON holding the task, the network shape, the
//! schema and clause texts, and every named parameter matrix.

use std::path::Path;

use kenn_core::logic::{Knowledge, PredicateSchema};
use kenn_core::model::{Head, KennModel, MlpConfig, Param, ParamKind, Params, RelationalKenn};
use kenn_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_text, write_text};

pub const FORMAT: &str = "kenn-ckpt";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultiLabel,
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Inductive,
    Transductive,
}

/// Enough to redo the train/test split of the run that produced the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub paradigm: Option<Paradigm>,
    pub train_frac: f64,
    pub seed: u64,
    pub features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub task: TaskSpec,
    pub widths: Vec<usize>,
    pub head: String,
    pub schema: String,
    pub clauses: String,
    pub params: Vec<StoredParam>,
}

fn head_from(name: &str) -> Result<Head> {
    match name {
        "sigmoid" => Ok(Head::Sigmoid),
        "softmax" => Ok(Head::Softmax),
        other => Err(CliError::Data(format!(
            "unknown head `{other}` in checkpoint"
        ))),
    }
}

fn kind_name(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::Base => "base",
        ParamKind::ClauseWeight => "clause_weight",
    }
}

/// A trained model of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Unary(KennModel),
    Relational(RelationalKenn),
}

impl AnyModel {
    pub fn base(&self) -> &MlpConfig {
        match self {
            AnyModel::Unary(m) => m.base(),
            AnyModel::Relational(m) => m.base(),
        }
    }

    pub fn knowledge(&self) -> &Knowledge {
        match self {
            AnyModel::Unary(m) => m.knowledge(),
            AnyModel::Relational(m) => m.knowledge(),
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            AnyModel::Unary(m) => m.params(),
            AnyModel::Relational(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut Params {
        match self {
            AnyModel::Unary(m) => m.params_mut(),
            AnyModel::Relational(m) => m.params_mut(),
        }
    }
}

impl Checkpoint {
    pub fn new(task: TaskSpec, model: &AnyModel) -> Self {
        let base = model.base();
        let knowledge = model.knowledge();
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            task,
            widths: base.widths.clone(),
            head: base.head.name().to_string(),
            schema: knowledge.schema().to_string(),
            clauses: knowledge.to_string(),
            params: model
                .params()
                .iter()
                .map(|p| StoredParam {
                    name: p.name.clone(),
                    kind: kind_name(p.kind).to_string(),
                    rows: p.value.rows(),
                    cols: p.value.cols(),
                    data: p.value.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)
            .map_err(|e| CliError::Data(format!("malformed checkpoint: {e}")))?;
        if c.format != FORMAT {
            return Err(CliError::Data(format!(
                "not a checkpoint (format `{}`)",
                c.format
            )));
        }
        if c.version != VERSION {
            return Err(CliError::Data(format!(
                "unsupported checkpoint version {}",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&read_text(path)?)
    }

    /// Rebuilds the model (seeded with the task seed, as in training) and
    /// loads the stored parameters.
    pub fn model(&self) -> Result<AnyModel> {
        let schema = PredicateSchema::parse(&self.schema)?;
        let knowledge = Knowledge::parse(&self.clauses, schema)?;
        let cfg = MlpConfig::new(self.widths.clone(), head_from(&self.head)?, self.task.seed)?;
        let mut model = match self.task.kind {
            TaskKind::MultiLabel => AnyModel::Unary(KennModel::new(cfg, knowledge)?),
            TaskKind::Graph => AnyModel::Relational(RelationalKenn::new(cfg, knowledge)?),
        };
        let stored = Params::new(
            self.params
                .iter()
                .map(|p| {
                    Ok(Param {
                        name: p.name.clone(),
                        kind: ParamKind::Base,
                        value: Matrix::from_vec(p.rows, p.cols, p.data.clone())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        );
        if stored.len() != model.params().len() {
            return Err(CliError::Data(format!(
                "checkpoint holds {} parameters, the model has {}",
                stored.len(),
                model.params().len()
            )));
        }
        model.params_mut().load(&stored)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (TaskSpec, AnyModel) {
        let schema = PredicateSchema::parse("unary: A, B").unwrap();
        let k = Knowledge::parse("_:nA(x),B(x)\n2.0:A(x)", schema).unwrap();
        let cfg = MlpConfig::new(vec![3, 4, 2], Head::Sigmoid, 3).unwrap();
        let mut m = KennModel::new(cfg, k).unwrap();
        m.params_mut().get_mut("clause0.weight").unwrap().value = Matrix::scalar(1.25);
        let task = TaskSpec {
            kind: TaskKind::MultiLabel,
            paradigm: None,
            train_frac: 0.5,
            seed: 3,
            features: vec!["f1".into(), "f2".into(), "f3".into()],
        };
        (task, AnyModel::Unary(m))
    }

    #[test]
    fn round_trip() {
        let (task, m) = sample();
        let c = Checkpoint::new(task, &m);
        let text = c.to_json();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.model().unwrap(), m);
    }

    #[test]
    fn rejects_foreign_files() {
        let (task, m) = sample();
        let mut c = Checkpoint::new(task, &m);
        c.version = 9;
        assert!(Checkpoint::from_json(&c.to_json()).is_err());
        assert!(Checkpoint::from_json("{}").is_err());
        let mut c = Checkpoint::new(sample().0, &sample().1);
        c.params.pop();
        assert!(c.model().is_err());
    }
}
