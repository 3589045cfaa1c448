//! The work behind each subcommand, independent of argument parsing.
//!
//! Machine-readable reports are line-delimited JSON; human-readable tables
//! are returned separately so the caller can send them to stderr.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kenn_core::checks::{relational_gradcheck, xor_check};
use kenn_core::fuzzy::{
    collision_table, minimality_sweep, CollisionRow, MinimalitySummary, COLLISION_PAIRS,
};
use kenn_core::logic::{Knowledge, PredicateSchema};
use kenn_core::miner::{mine_clauses, MinedRule, MinerConfig};
use kenn_core::model::{Head, KennModel, MlpConfig, RelationalKenn};
use kenn_core::train::{
    graph_accuracy, hamming_loss, label_accuracy, split_inductive, split_rows, split_transductive,
    subset_accuracy, train, train_graph, GraphDataset, Strategy, TrainConfig, TrainReport,
};
use kenn_core::Matrix;
use serde_json::{json, Value};

use crate::checkpoint::{AnyModel, Checkpoint, Paradigm, TaskKind, TaskSpec};
use crate::error::{CliError, Result};
use crate::io::{read_edges, read_knowledge, read_multilabel, read_nodes, read_schema};

/// Published three-decimal collision probabilities for [`COLLISION_PAIRS`].
pub const REFERENCE_COLLISIONS: [f64; 5] = [0.167, 0.083, 0.033, 0.017, 0.007];

/// Allowed distance between a collision estimate and its reference value.
pub const COLLISION_TOLERANCE: f64 = 0.005;

pub type Metrics = BTreeMap<String, f64>;

fn json_line(v: Value) -> String {
    let mut s = v.to_string();
    s.push('\n');
    s
}

/// Output of a command: the report for stdout or a file, and text for
/// stderr.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Output {
    pub report: String,
    pub human: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MineOptions {
    pub labels: PathBuf,
    pub config: MinerConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mined {
    pub rules: Vec<MinedRule>,
    pub schema: PredicateSchema,
    pub knowledge: Knowledge,
    pub output: Output,
}

fn histogram(values: impl Iterator<Item = f64>) -> [usize; 10] {
    let mut bins = [0; 10];
    for v in values {
        bins[((v * 10.0).floor() as usize).min(9)] += 1;
    }
    bins
}

pub fn mine(opts: &MineOptions) -> Result<Mined> {
    opts.config.validate()?;
    let data = read_multilabel(&opts.labels, true)?;
    let schema = PredicateSchema::new(data.label_names.clone(), Vec::<String>::new())
        .map_err(|e| CliError::in_file(&opts.labels, e))?;
    let (rules, clauses) = mine_clauses(&data.y, &data.label_names, &opts.config)?;
    if clauses.is_empty() {
        return Err(CliError::Data(format!(
            "no rules reach support {} and confidence {}",
            opts.config.min_support, opts.config.min_confidence
        )));
    }
    let knowledge = Knowledge::new(schema.clone(), clauses)?;
    let support = histogram(rules.iter().map(|r| r.support));
    let confidence = histogram(rules.iter().map(|r| r.confidence));
    let report = json_line(json!({
        "type": "mine",
        "transactions": data.y.rows(),
        "labels": data.label_names,
        "min_support": opts.config.min_support,
        "min_confidence": opts.config.min_confidence,
        "max_len": opts.config.max_len,
        "rules": rules.len(),
        "clauses": knowledge.len(),
        "support_histogram": support,
        "confidence_histogram": confidence,
    }));
    let mut human = format!("{} rules, {} clauses\n", rules.len(), knowledge.len());
    let _ = writeln!(human, "{:<10} {:>8} {:>10}", "bin", "support", "confidence");
    for b in 0..10 {
        let _ = writeln!(
            human,
            "[{:.1},{:.1}{} {:>8} {:>10}",
            b as f64 / 10.0,
            (b + 1) as f64 / 10.0,
            if b == 9 { "]" } else { ")" },
            support[b],
            confidence[b]
        );
    }
    Ok(Mined {
        rules,
        schema,
        knowledge,
        output: Output { report, human },
    })
}

/// Inputs of a training or evaluation run, after loading.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    MultiLabel {
        feature_names: Vec<String>,
        x: Matrix,
        y: Matrix,
    },
    Graph {
        feature_names: Vec<String>,
        data: GraphDataset,
    },
}

impl Dataset {
    pub fn kind(&self) -> TaskKind {
        match self {
            Dataset::MultiLabel { .. } => TaskKind::MultiLabel,
            Dataset::Graph { .. } => TaskKind::Graph,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Dataset::MultiLabel { feature_names, .. } | Dataset::Graph { feature_names, .. } => {
                feature_names
            }
        }
    }
}

/// Reads a multi-label CSV, or a node CSV when `edges` is given. Labels are
/// matched to the unary predicates of `schema`.
pub fn load_dataset(
    data: &Path,
    edges: Option<&Path>,
    schema: &PredicateSchema,
) -> Result<Dataset> {
    match edges {
        None => {
            let d = read_multilabel(data, false)?;
            let y = d.labels_in_order(schema.unary_names())?;
            Ok(Dataset::MultiLabel {
                feature_names: d.feature_names,
                x: d.x,
                y,
            })
        }
        Some(e) => {
            let nodes = read_nodes(data)?;
            let classes = schema.unary_names();
            let labels = nodes.class_indices(classes)?;
            let table = read_edges(e, &nodes, schema)?;
            let n = labels.len();
            let data = GraphDataset::new(
                nodes.features.clone(),
                labels,
                classes.len(),
                table,
                vec![true; n],
            )?;
            Ok(Dataset::Graph {
                feature_names: nodes.feature_names,
                data,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub data: PathBuf,
    pub edges: Option<PathBuf>,
    pub schema: PathBuf,
    pub clauses: Option<PathBuf>,
    pub paradigm: Paradigm,
    pub train_frac: f64,
    pub hidden: Vec<usize>,
    pub repeat: usize,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    /// Model of the first run.
    pub checkpoint: Checkpoint,
    /// Test metrics per run, in seed order.
    pub metrics: Vec<(u64, Metrics)>,
    pub output: Output,
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::EndToEnd => "end_to_end",
        Strategy::Greedy => "greedy",
    }
}

fn paradigm_name(p: Paradigm) -> &'static str {
    match p {
        Paradigm::Inductive => "inductive",
        Paradigm::Transductive => "transductive",
    }
}

fn build_model(
    kind: TaskKind,
    widths: Vec<usize>,
    seed: u64,
    knowledge: Knowledge,
) -> Result<AnyModel> {
    Ok(match kind {
        TaskKind::MultiLabel => AnyModel::Unary(KennModel::new(
            MlpConfig::new(widths, Head::Sigmoid, seed)?,
            knowledge,
        )?),
        TaskKind::Graph => AnyModel::Relational(RelationalKenn::new(
            MlpConfig::new(widths, Head::Softmax, seed)?,
            knowledge,
        )?),
    })
}

fn multilabel_metrics(pred: &Matrix, target: &Matrix) -> Result<Metrics> {
    Ok(Metrics::from([
        ("hamming_loss".to_string(), hamming_loss(pred, target)?),
        ("label_accuracy".to_string(), label_accuracy(pred, target)?),
        (
            "subset_accuracy".to_string(),
            subset_accuracy(pred, target)?,
        ),
    ]))
}

/// Test metrics of `model` under the split described by `task`, or over all
/// rows (for graphs: the full graph) with `all`.
pub fn evaluate(model: &AnyModel, task: &TaskSpec, data: &Dataset, all: bool) -> Result<Metrics> {
    match (model, data) {
        (AnyModel::Unary(m), Dataset::MultiLabel { x, y, .. }) => {
            let rows: Vec<usize> = if all {
                (0..x.rows()).collect()
            } else {
                split_rows(x.rows(), task.train_frac, task.seed)?.1
            };
            let pred = m.predict(&x.select_rows(&rows))?;
            multilabel_metrics(&pred, &y.select_rows(&rows))
        }
        (AnyModel::Relational(m), Dataset::Graph { data, .. }) => {
            let acc = if all {
                let nodes: Vec<usize> = (0..data.n_nodes()).collect();
                graph_accuracy(m, data, &nodes)?
            } else {
                match task.paradigm.unwrap_or(Paradigm::Transductive) {
                    Paradigm::Transductive => {
                        let t = split_transductive(data, task.train_frac, task.seed)?;
                        graph_accuracy(m, &t, &t.test_nodes())?
                    }
                    Paradigm::Inductive => {
                        let s = split_inductive(data, task.train_frac, task.seed)?;
                        let nodes: Vec<usize> = (0..s.test.n_nodes()).collect();
                        graph_accuracy(m, &s.test, &nodes)?
                    }
                }
            };
            Ok(Metrics::from([("accuracy".to_string(), acc)]))
        }
        _ => Err(CliError::Usage(
            "the data does not match the model's task (graph models need --edges)".to_string(),
        )),
    }
}

fn fit(
    model: &mut AnyModel,
    task: &TaskSpec,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    Ok(match (model, data) {
        (AnyModel::Unary(m), Dataset::MultiLabel { x, y, .. }) => {
            let (rows, _) = split_rows(x.rows(), task.train_frac, task.seed)?;
            train(m, x, y, &rows, cfg)?
        }
        (AnyModel::Relational(m), Dataset::Graph { data, .. }) => match task.paradigm {
            Some(Paradigm::Inductive) => train_graph(
                m,
                &split_inductive(data, task.train_frac, task.seed)?.train,
                cfg,
            )?,
            _ => train_graph(
                m,
                &split_transductive(data, task.train_frac, task.seed)?,
                cfg,
            )?,
        },
        _ => unreachable!("model built for the data kind"),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn train_command(opts: &TrainOptions) -> Result<Trained> {
    opts.config.validate()?;
    if opts.repeat == 0 {
        return Err(CliError::Usage("--repeat must be at least 1".to_string()));
    }
    if !(opts.train_frac > 0.0 && opts.train_frac < 1.0) {
        return Err(CliError::Usage(format!(
            "--train-frac must be in (0, 1), got {}",
            opts.train_frac
        )));
    }
    let schema = read_schema(&opts.schema)?;
    let knowledge = match &opts.clauses {
        Some(p) => read_knowledge(p, schema.clone())?,
        None => Knowledge::empty(schema.clone()),
    };
    let data = load_dataset(&opts.data, opts.edges.as_deref(), &schema)?;
    let kind = data.kind();
    if kind == TaskKind::MultiLabel && !knowledge.binary().is_empty() {
        return Err(CliError::Data(
            "binary clauses need a graph (--edges)".to_string(),
        ));
    }
    let mut widths = vec![data.feature_names().len()];
    widths.extend(&opts.hidden);
    widths.push(schema.unary_names().len());
    let paradigm = (kind == TaskKind::Graph).then_some(opts.paradigm);

    let cfg = &opts.config;
    let mut report = json_line(json!({
        "type": "config",
        "task": match kind { TaskKind::MultiLabel => "multi_label", TaskKind::Graph => "graph" },
        "strategy": strategy_name(cfg.strategy),
        "paradigm": paradigm.map(paradigm_name),
        "train_frac": opts.train_frac,
        "seed": cfg.seed,
        "repeat": opts.repeat,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "rho": cfg.rho,
        "opt_epsilon": cfg.opt_epsilon,
        "batch_size": cfg.batch_size,
        "widths": widths,
        "clauses": knowledge.len(),
    }));
    let mut human = String::new();
    let mut metrics = Vec::new();
    let mut first = None;
    for run in 0..opts.repeat as u64 {
        let seed = cfg.seed.wrapping_add(run);
        let task = TaskSpec {
            kind,
            paradigm,
            train_frac: opts.train_frac,
            seed,
            features: data.feature_names().to_vec(),
        };
        let mut model = build_model(kind, widths.clone(), seed, knowledge.clone())?;
        let run_cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let tr = fit(&mut model, &task, &data, &run_cfg)?;
        for (epoch, loss) in tr.losses.iter().enumerate() {
            let phase = match cfg.strategy {
                Strategy::EndToEnd => "joint",
                Strategy::Greedy if epoch < tr.base_epochs => "base",
                Strategy::Greedy => "clauses",
            };
            report.push_str(&json_line(json!({
                "type": "epoch", "seed": seed, "epoch": epoch, "phase": phase, "loss": loss,
            })));
        }
        let m = evaluate(&model, &task, &data, false)?;
        let weights = match &model {
            AnyModel::Unary(k) => k.clause_weights(),
            AnyModel::Relational(k) => k.clause_weights(),
        };
        let clause_weights: Vec<Value> = knowledge
            .clauses()
            .zip(&weights)
            .map(|(c, w)| json!({ "clause": c.body(), "weight": w }))
            .collect();
        report.push_str(&json_line(json!({
            "type": "result", "seed": seed, "metrics": m, "clause_weights": clause_weights,
        })));
        let cells: Vec<String> = m.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
        let _ = writeln!(human, "seed {seed}: {}", cells.join("  "));
        metrics.push((seed, m));
        if first.is_none() {
            first = Some(Checkpoint::new(task, &model));
        }
    }
    if opts.repeat > 1 {
        let mut mean = Metrics::new();
        let mut std = Metrics::new();
        for key in metrics[0].1.keys() {
            let vals: Vec<f64> = metrics.iter().map(|(_, m)| m[key]).collect();
            let (mu, sd) = mean_std(&vals);
            mean.insert(key.clone(), mu);
            std.insert(key.clone(), sd);
        }
        report.push_str(&json_line(json!({
            "type": "summary", "runs": opts.repeat, "mean": mean, "std": std,
        })));
        let cells: Vec<String> = mean
            .iter()
            .map(|(k, v)| format!("{k} {v:.4} ± {:.4}", std[k]))
            .collect();
        let _ = writeln!(
            human,
            "mean over {} runs: {}",
            opts.repeat,
            cells.join("  ")
        );
    }
    Ok(Trained {
        checkpoint: first.expect("at least one run"),
        metrics,
        output: Output { report, human },
    })
}

pub fn eval_command(
    checkpoint: &Path,
    data: &Path,
    edges: Option<&Path>,
    all: bool,
) -> Result<(Metrics, Output)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    match (ckpt.task.kind, edges) {
        (TaskKind::Graph, None) => {
            return Err(CliError::Usage("graph models need --edges".to_string()))
        }
        (TaskKind::MultiLabel, Some(_)) => {
            return Err(CliError::Usage(
                "--edges only applies to graph models".to_string(),
            ))
        }
        _ => {}
    }
    let model = ckpt.model()?;
    let schema = model.knowledge().schema().clone();
    let dataset = load_dataset(data, edges, &schema)?;
    if dataset.feature_names() != ckpt.task.features.as_slice() {
        return Err(CliError::Data(
            "feature columns differ from the training data".to_string(),
        ));
    }
    let m = evaluate(&model, &ckpt.task, &dataset, all)?;
    let report = json_line(
        json!({ "type": "eval", "split": if all { "all" } else { "test" }, "metrics": m }),
    );
    let human = m.iter().map(|(k, v)| format!("{k}: {v:.4}\n")).collect();
    Ok((m, Output { report, human }))
}

/// Outcome of a demo: its printed table and whether it met its thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub text: String,
    pub passed: bool,
}

fn verdict(text: &mut String, name: &str, passed: bool, detail: &str) {
    let _ = writeln!(
        text,
        "{} {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}

pub fn demo_xor(epochs: usize, seed: u64) -> Result<Check> {
    let o = xor_check(epochs, seed)?;
    let mut text = format!(
        "{:>3} {:>3} {:>6} {:>10} {:>8} {:>10}\n",
        "x1", "x2", "label", "kenn", "margin", "plain"
    );
    for (i, ((k, p), l)) in o.kenn.iter().zip(&o.plain).zip(&o.labels).enumerate() {
        let _ = writeln!(
            text,
            "{:>3} {:>3} {:>6} {:>10.6} {:>8.4} {:>10.6}",
            i / 2,
            i % 2,
            l,
            k,
            (k - 0.5).abs(),
            p
        );
    }
    let solved = o.kenn_solved(0.1);
    let correct = o.plain_correct();
    let passed = solved && correct <= 3;
    verdict(
        &mut text,
        "demo-xor",
        passed,
        &format!(
            "enhanced outputs {} within 0.1 of the labels; plain regression {correct}/4 correct after {epochs} epochs",
            if solved { "all" } else { "not all" }
        ),
    );
    Ok(Check { text, passed })
}

pub fn collision_rows(samples: usize, seed: u64) -> Result<Vec<CollisionRow>> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".to_string()));
    }
    Ok(collision_table(samples, seed)?)
}

pub fn demo_collisions(samples: usize, seed: u64) -> Result<Check> {
    let rows = collision_rows(samples, seed)?;
    let mut text = format!(
        "{:>2} {:>2} {:>9} {:>9} {:>9} {:>9}\n",
        "n", "m", "estimate", "std_err", "exact", "reference"
    );
    let mut passed = true;
    for (r, reference) in rows.iter().zip(REFERENCE_COLLISIONS) {
        passed &= (r.estimate - reference).abs() <= COLLISION_TOLERANCE;
        let _ = writeln!(
            text,
            "{:>2} {:>2} {:>9.5} {:>9.5} {:>9.5} {:>9.3}",
            r.n, r.m, r.estimate, r.std_err, r.exact, reference
        );
    }
    debug_assert_eq!(rows.len(), COLLISION_PAIRS.len());
    verdict(
        &mut text,
        "demo-collisions",
        passed,
        &format!("{samples} samples per pair, tolerance {COLLISION_TOLERANCE}"),
    );
    Ok(Check { text, passed })
}

pub fn minimality(
    instances: usize,
    trials: usize,
    seed: u64,
) -> Result<(MinimalitySummary, Check)> {
    if instances == 0 || trials == 0 {
        return Err(CliError::Usage(
            "--instances and --trials must be at least 1".to_string(),
        ));
    }
    let s = minimality_sweep(instances, trials, seed)?;
    let passed = s.hard_counterexamples == 0 && s.spread_counterexamples >= 1;
    let mut text = format!(
        "instances {}\ntrials per instance {trials}\nhard boost counterexamples {}\nspread boost counterexamples {}\n",
        s.instances, s.hard_counterexamples, s.spread_counterexamples
    );
    verdict(
        &mut text,
        "check-minimality",
        passed,
        "the hard boost must have no smaller competitor and the spread boost at least one",
    );
    Ok((s, Check { text, passed }))
}

pub fn gradcheck(seeds: usize, seed: u64, tolerance: f64) -> Result<Check> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".to_string()));
    }
    let mut text = String::new();
    let mut worst: f64 = 0.0;
    for s in 0..seeds as u64 {
        let e = relational_gradcheck(seed.wrapping_add(s))?;
        worst = worst.max(e);
        let _ = writeln!(
            text,
            "seed {:>4}: max relative error {e:.3e}",
            seed.wrapping_add(s)
        );
    }
    let passed = worst < tolerance;
    verdict(
        &mut text,
        "gradcheck",
        passed,
        &format!("worst {worst:.3e} over {seeds} seeds, tolerance {tolerance:e}"),
    );
    Ok(Check { text, passed })
}
