use kenn_core::autodiff::{finite_diff_check, NodeId, Tape};
use kenn_core::checks::GRADCHECK_STEP;
use kenn_core::{Matrix, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOLERANCE: f64 = 1e-5;

/// Entries bounded away from zero so that relu kinks stay out of reach of
/// the finite differences.
fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let m: f64 = rng.random_range(0.05..2.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn indices(rng: &mut ChaCha8Rng, len: usize, bound: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..bound)).collect()
}

fn signs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect()
}

/// Gradient check of `op` followed by a random weighted sum.
fn check<F>(inputs: Vec<Matrix>, out_shape: (usize, usize), rng: &mut ChaCha8Rng, op: F) -> f64
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let w = random(rng, out_shape.0, out_shape.1);
    finite_diff_check(
        |t: &mut Tape, ids: &[NodeId]| {
            let out = op(t, ids)?;
            t.weighted_sum(out, w.clone())
        },
        &inputs,
        GRADCHECK_STEP,
    )
    .unwrap()
}

fn all_ops(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(1..5);
    let c = rng.random_range(1..5);
    let k = rng.random_range(1..5);
    let mut out = Vec::new();
    let (a, b) = (random(&mut rng, r, k), random(&mut rng, k, c));
    out.push((
        "matmul",
        check(vec![a, b], (r, c), &mut rng, |t, x| t.matmul(x[0], x[1])),
    ));
    let (a, b) = (random(&mut rng, r, c), random(&mut rng, r, c));
    out.push((
        "add",
        check(vec![a, b], (r, c), &mut rng, |t, x| t.add(x[0], x[1])),
    ));
    let (a, b) = (random(&mut rng, r, c), random(&mut rng, 1, c));
    out.push((
        "add_row_broadcast",
        check(vec![a, b], (r, c), &mut rng, |t, x| {
            t.add_row_broadcast(x[0], x[1])
        }),
    ));
    let (a, s) = (random(&mut rng, r, c), random(&mut rng, 1, 1));
    out.push((
        "scale",
        check(vec![a, s], (r, c), &mut rng, |t, x| t.scale(x[0], x[1])),
    ));
    let a = random(&mut rng, r, c);
    out.push((
        "relu",
        check(vec![a], (r, c), &mut rng, |t, x| Ok(t.relu(x[0]))),
    ));
    let a = random(&mut rng, r, c);
    out.push((
        "sigmoid",
        check(vec![a], (r, c), &mut rng, |t, x| Ok(t.sigmoid(x[0]))),
    ));
    let a = random(&mut rng, r, c);
    out.push((
        "softmax_rows",
        check(vec![a], (r, c), &mut rng, |t, x| Ok(t.softmax_rows(x[0]))),
    ));
    let (a, b) = (random(&mut rng, r, c), random(&mut rng, r, k));
    out.push((
        "concat_cols",
        check(vec![a, b], (r, c + k), &mut rng, |t, x| {
            t.concat_cols(x[0], x[1])
        }),
    ));
    let (a, b, d) = (
        random(&mut rng, r, c),
        random(&mut rng, r, c),
        random(&mut rng, r, c),
    );
    out.push((
        "sum_nodes",
        check(vec![a, b, d], (r, c), &mut rng, |t, x| t.sum_nodes(x)),
    ));

    let (cols, sg) = (indices(&mut rng, k, c), signs(&mut rng, k));
    let a = random(&mut rng, r, c);
    out.push((
        "gather_cols_signed",
        check(vec![a], (r, k), &mut rng, |t, x| {
            t.gather_cols_signed(x[0], &cols, &sg)
        }),
    ));
    let a = random(&mut rng, r, k);
    out.push((
        "scatter_cols_signed",
        check(vec![a], (r, c), &mut rng, |t, x| {
            t.scatter_cols_signed(x[0], &cols, &sg, c)
        }),
    ));
    let segs = indices(&mut rng, r, k);
    let a = random(&mut rng, r, c);
    out.push((
        "segment_sum_rows",
        check(vec![a], (k, c), &mut rng, |t, x| {
            t.segment_sum_rows(x[0], &segs, k)
        }),
    ));
    let rows = indices(&mut rng, k, r);
    let a = random(&mut rng, r, c);
    out.push((
        "gather_rows",
        check(vec![a], (k, c), &mut rng, |t, x| t.gather_rows(x[0], &rows)),
    ));
    let a = random(&mut rng, r, c);
    out.push((
        "select_cols",
        check(vec![a], (r, k), &mut rng, |t, x| t.select_cols(x[0], &cols)),
    ));

    let a = random(&mut rng, r, c);
    let target = Matrix::from_vec(
        r,
        c,
        (0..r * c).map(|_| rng.random_range(0..2) as f64).collect(),
    )
    .unwrap();
    let bce = finite_diff_check(
        |t: &mut Tape, x: &[NodeId]| {
            let p = t.sigmoid(x[0]);
            t.bce_mean(p, target.clone())
        },
        &[a],
        GRADCHECK_STEP,
    )
    .unwrap();
    out.push(("bce_mean", bce));
    let a = random(&mut rng, r, c);
    let mut one_hot = Matrix::zeros(r, c);
    for i in 0..r {
        one_hot[(i, rng.random_range(0..c))] = 1.0;
    }
    let ce = finite_diff_check(
        |t: &mut Tape, x: &[NodeId]| {
            let p = t.softmax_rows(x[0]);
            t.ce_mean(p, one_hot.clone())
        },
        &[a],
        GRADCHECK_STEP,
    )
    .unwrap();
    out.push(("ce_mean", ce));
    out
}

#[test]
fn every_op_passes_gradcheck_over_twenty_seeds() {
    for seed in 0..20 {
        for (name, err) in all_ops(seed) {
            assert!(
                err < TOLERANCE,
                "{name} seed {seed}: relative error {err:e}"
            );
        }
    }
}

#[test]
fn backward_is_bit_reproducible() {
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tape::new();
        let a = t.param(random(&mut rng, 4, 3));
        let b = t.param(random(&mut rng, 3, 5));
        let m = t.matmul(a, b).unwrap();
        let s = t.softmax_rows(m);
        let w = random(&mut rng, 4, 5);
        let l = t.weighted_sum(s, w).unwrap();
        let g = t.backward(l).unwrap();
        (g.get(a).unwrap().clone(), g.get(b).unwrap().clone())
    };
    for seed in 0..5 {
        let (x, y) = (run(seed), run(seed));
        assert!(x
            .0
            .as_slice()
            .iter()
            .zip(y.0.as_slice())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(x
            .1
            .as_slice()
            .iter()
            .zip(y.1.as_slice())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

proptest! {
    #[test]
    fn scatter_undoes_gather_for_distinct_columns(
        seed in any::<u64>(), rows in 1usize..5, width in 1usize..7, take in 1usize..7,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<usize> = (0..width).collect();
        for i in (1..cols.len()).rev() {
            cols.swap(i, rng.random_range(0..=i));
        }
        cols.truncate(take.min(width));
        let sg = signs(&mut rng, cols.len());
        let a = random(&mut rng, rows, width);
        let mut t = Tape::new();
        let an = t.constant(a.clone());
        let g = t.gather_cols_signed(an, &cols, &sg).unwrap();
        let s = t.scatter_cols_signed(g, &cols, &sg, width).unwrap();
        let back = t.value(s);
        for r in 0..rows {
            for c in 0..width {
                let expected = if cols.contains(&c) { a[(r, c)] } else { 0.0 };
                prop_assert_eq!(back[(r, c)], expected);
            }
        }
    }

    #[test]
    fn segment_sum_preserves_column_totals(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..4, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, rows, cols);
        let segs = indices(&mut rng, rows, k);
        let mut t = Tape::new();
        let an = t.constant(a.clone());
        let s = t.segment_sum_rows(an, &segs, k).unwrap();
        let out = t.value(s);
        for c in 0..cols {
            let before: f64 = a.column(c).iter().sum();
            let after: f64 = out.column(c).iter().sum();
            prop_assert!((before - after).abs() < 1e-12);
        }
    }
}
