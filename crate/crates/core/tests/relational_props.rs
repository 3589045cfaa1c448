use kenn_core::autodiff::Tape;
use kenn_core::checks::{oracle_difference, random_relational_instance, relational_gradcheck};
use kenn_core::enhancer::KnowledgeEnhancer;
use kenn_core::logic::Layout;
use kenn_core::relational::{join, relational_ke_forward, split_deltas, BinaryTable};
use kenn_core::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn batched_enhancer_equals_per_grounding_oracle(seed in any::<u64>()) {
        prop_assert!(oracle_difference(&random_relational_instance(seed)).unwrap() < 1e-12);
    }

    #[test]
    fn isolated_objects_only_see_unary_knowledge(seed in any::<u64>()) {
        let inst = random_relational_instance(seed);
        let (u, _) = relational_ke_forward(&inst.unary, &inst.binary, &inst.knowledge).unwrap();
        let schema = inst.knowledge.schema();
        let unary = KnowledgeEnhancer::new(inst.knowledge.unary(), &Layout::unary(schema.unary_names())).unwrap();
        let expected = unary.apply(&inst.unary.z).unwrap();
        for obj in 0..inst.unary.n_objects() {
            if !inst.binary.sx.contains(&obj) && !inst.binary.sy.contains(&obj) {
                prop_assert_eq!(u.row(obj), expected.row(obj));
            }
        }
    }

    #[test]
    fn split_deltas_conserve_mass(seed in any::<u64>()) {
        let inst = random_relational_instance(seed);
        let n_u = inst.knowledge.schema().unary_names().len();
        let n_b = inst.knowledge.schema().binary_names().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = inst.binary.n_pairs();
        let width = 2 * n_u + n_b;
        let dm = Matrix::from_vec(pairs, width, (0..pairs * width).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut t = Tape::new();
        let dmn = t.constant(dm.clone());
        let (dux, duy, _) = split_deltas(&mut t, dmn, &inst.binary, inst.unary.n_objects(), n_u).unwrap();
        for j in 0..n_u {
            let edges_x: f64 = dm.column(j).iter().sum();
            let edges_y: f64 = dm.column(n_u + j).iter().sum();
            prop_assert!((t.value(dux).column(j).iter().sum::<f64>() - edges_x).abs() < 1e-12);
            prop_assert!((t.value(duy).column(j).iter().sum::<f64>() - edges_y).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbing_an_object_moves_exactly_its_pairs(seed in any::<u64>()) {
        let inst = random_relational_instance(seed);
        let table: &BinaryTable = &inst.binary;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obj = rng.random_range(0..inst.unary.n_objects());
        let col = rng.random_range(0..inst.unary.z.cols());
        let joined = |u: &Matrix| {
            let mut t = Tape::new();
            let un = t.constant(u.clone());
            let bn = t.constant(table.z.clone());
            let m = join(&mut t, un, bn, &table.sx, &table.sy).unwrap();
            t.value(m).clone()
        };
        let before = joined(&inst.unary.z);
        let mut moved = inst.unary.z.clone();
        moved[(obj, col)] += 0.5;
        let after = joined(&moved);
        for p in 0..table.n_pairs() {
            let touches = table.sx[p] == obj || table.sy[p] == obj;
            prop_assert_eq!(before.row(p) != after.row(p), touches);
        }
    }
}

#[test]
fn relational_model_gradients_over_twenty_seeds() {
    for seed in 0..20 {
        let err = relational_gradcheck(seed).unwrap();
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}
