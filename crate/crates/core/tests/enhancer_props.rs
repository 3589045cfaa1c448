use kenn_core::autodiff::{finite_diff_check, NodeId, Tape};
use kenn_core::checks::{numbered_schema, random_knowledge, GRADCHECK_STEP};
use kenn_core::enhancer::{ClauseEnhancer, KnowledgeEnhancer};
use kenn_core::fuzzy::sigmoid;
use kenn_core::logic::{Clause, Layout};
use kenn_core::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    clauses: Vec<Clause>,
    layout: Layout,
    z: Matrix,
}

fn case(seed: u64, n_clauses: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = rng.random_range(1..6);
    let schema = numbered_schema(nu, 0);
    let k = random_knowledge(&mut rng, &schema, n_clauses, 0, true);
    let rows = rng.random_range(1..5);
    let z = Matrix::from_vec(
        rows,
        nu,
        (0..rows * nu)
            .map(|_| rng.random_range(-6.0..6.0))
            .collect(),
    )
    .unwrap();
    Case {
        clauses: k.clauses().cloned().collect(),
        layout: Layout::unary(schema.unary_names()),
        z,
    }
}

fn delta(e: &ClauseEnhancer, z: &Matrix, w: f64) -> Matrix {
    let mut t = Tape::new();
    let zn = t.constant(z.clone());
    let wn = t.constant(Matrix::scalar(w));
    let d = e.delta(&mut t, zn, wn).unwrap();
    t.value(d).clone()
}

/// A clause holding some atom with both signs is a tautology; its two
/// literals pull the shared column in opposite directions.
fn tautology(c: &Clause) -> bool {
    c.literals().iter().any(|a| {
        c.literals()
            .iter()
            .any(|b| a.predicate == b.predicate && a.sign != b.sign)
    })
}

fn literal_truths(e: &ClauseEnhancer, z: &Matrix, r: usize) -> Vec<f64> {
    let v = e.vector_clause();
    v.cols
        .iter()
        .zip(&v.signs)
        .map(|(&c, &s)| sigmoid(s * z[(r, c)]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn a_clause_never_lowers_its_literals(seed in any::<u64>(), w in 0.01f64..20.0) {
        let c = case(seed, 1);
        let e = ClauseEnhancer::new(&c.clauses[0], &c.layout).unwrap();
        let d = delta(&e, &c.z, w);
        let mut boosted = c.z.clone();
        boosted.add_assign(&d);
        for r in 0..c.z.rows() {
            let before = literal_truths(&e, &c.z, r);
            let after = literal_truths(&e, &boosted, r);
            if !tautology(&c.clauses[0]) {
                for (a, b) in after.iter().zip(&before) {
                    prop_assert!(a >= b);
                }
            }
            let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(max(&after) >= max(&before) - 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn deltas_stay_on_the_clause_atoms(seed in any::<u64>(), w in 0.0f64..10.0) {
        let c = case(seed, 1);
        let e = ClauseEnhancer::new(&c.clauses[0], &c.layout).unwrap();
        let d = delta(&e, &c.z, w);
        for col in 0..c.z.cols() {
            if !e.vector_clause().cols.contains(&col) {
                prop_assert!(d.column(col).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn knowledge_delta_is_the_sum_of_clause_deltas(seed in any::<u64>()) {
        let c = case(seed, 2);
        let ke = KnowledgeEnhancer::new(&c.clauses, &c.layout).unwrap();
        let mut expected = c.z.clone();
        for cl in &c.clauses {
            let e = ClauseEnhancer::new(cl, &c.layout).unwrap();
            expected.add_assign(&delta(&e, &c.z, cl.weight().value()));
        }
        prop_assert!(ke.apply(&c.z).unwrap().max_abs_diff(&expected) < 1e-12);
        let swapped = KnowledgeEnhancer::new(c.clauses.iter().rev(), &c.layout).unwrap();
        prop_assert!(swapped.apply(&c.z).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn large_weight_saturates_the_leading_literal(seed in any::<u64>()) {
        let c = case(seed, 1);
        let e = ClauseEnhancer::new(&c.clauses[0], &c.layout).unwrap();
        prop_assume!(!tautology(&c.clauses[0]));
        let d = delta(&e, &c.z, 50.0);
        let mut boosted = c.z.clone();
        boosted.add_assign(&d);
        for r in 0..c.z.rows() {
            let v = e.vector_clause();
            let mut signed: Vec<(f64, usize)> = v.cols.iter().zip(&v.signs).enumerate()
                .map(|(i, (&col, &s))| (s * c.z[(r, col)], i)).collect();
            signed.sort_by(|a, b| b.0.total_cmp(&a.0));
            if signed.len() == 1 || signed[0].0 - signed[1].0 >= 2.0 {
                let i = signed[0].1;
                prop_assert!(sigmoid(v.signs[i] * boosted[(r, v.cols[i])]) > 0.999);
            }
        }
    }
}

#[test]
fn clause_weight_gradients_match_finite_differences() {
    for seed in 0..20 {
        let c = case(seed, 3);
        let ke = KnowledgeEnhancer::new(&c.clauses, &c.layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = Matrix::from_vec(
            c.z.rows(),
            c.z.cols(),
            (0..c.z.rows() * c.z.cols())
                .map(|_| rng.random_range(0..2) as f64)
                .collect(),
        )
        .unwrap();
        let mut inputs = vec![c.z.clone()];
        inputs.extend(ke.initial_weights().into_iter().map(Matrix::scalar));
        let err = finite_diff_check(
            |t: &mut Tape, ids: &[NodeId]| {
                let (_, y) = ke.forward(t, ids[0], &ids[1..])?;
                t.bce_mean(y, target.clone())
            },
            &inputs,
            GRADCHECK_STEP,
        )
        .unwrap();
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}
