use kenn_core::autodiff::Tape;
use kenn_core::checks::{numbered_schema, random_knowledge};
use kenn_core::enhancer::ClauseEnhancer;
use kenn_core::logic::{to_vector_clause, Knowledge, Layout, VarSlot};
use kenn_core::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn knowledge(seed: u64, nu: usize, nb: usize, learnable: bool) -> Knowledge {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = numbered_schema(nu, nb);
    random_knowledge(&mut rng, &schema, 3, if nb > 0 { 3 } else { 0 }, learnable)
}

proptest! {
    #[test]
    fn serialization_round_trips(seed in any::<u64>(), nu in 1usize..5, nb in 0usize..3, learnable in any::<bool>()) {
        let k = knowledge(seed, nu, nb, learnable);
        let text = k.to_string();
        let back = Knowledge::parse(&text, k.schema().clone()).unwrap();
        prop_assert_eq!(&back, &k);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn unary_partition(seed in any::<u64>(), nu in 1usize..5, nb in 0usize..3) {
        let k = knowledge(seed, nu, nb, false);
        for c in k.unary() {
            prop_assert!(c.literals().iter().all(|l| l.slot == VarSlot::X));
        }
        for c in k.binary() {
            prop_assert!(c.literals().iter().any(|l| l.slot != VarSlot::X));
        }
    }

    #[test]
    fn vector_clauses_match_literals_and_zero_weight_is_inert(
        seed in any::<u64>(), nu in 1usize..5, nb in 0usize..3, rows in 1usize..5,
    ) {
        let k = knowledge(seed, nu, nb, false);
        let layout = Layout::joined(k.schema());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let z = Matrix::from_vec(
            rows,
            layout.width(),
            (0..rows * layout.width()).map(|_| rand::Rng::random_range(&mut rng, -4.0..4.0)).collect(),
        ).unwrap();
        for c in k.clauses() {
            let v = to_vector_clause(c, &layout).unwrap();
            prop_assert_eq!(v.len(), c.literals().len());
            prop_assert_eq!(v.cols.len(), v.signs.len());
            let e = ClauseEnhancer::new(c, &layout).unwrap();
            let mut tape = Tape::new();
            let zn = tape.constant(z.clone());
            let w = tape.constant(Matrix::scalar(0.0));
            let d = e.delta(&mut tape, zn, w).unwrap();
            prop_assert!(tape.value(d).as_slice().iter().all(|&x| x == 0.0));
        }
    }
}
