use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treeflow::flow::{apply_a, flow_heat_kernel, poisson_kernel, KernelQuery};
use treeflow::hardy::{label_vertex, random_atom, vertex_label, AtomRanges};
use treeflow::{FinSuppFn, Tree, Vertex};

fn vertex(tree: &Tree, up: u64, path: &[u32]) -> Vertex {
    let letters: Vec<u32> = path.iter().map(|l| l % tree.q()).collect();
    tree.descend(&Vertex::ray(up), &letters)
}

fn point() -> impl Strategy<Value = (u64, Vec<u32>)> {
    (0u64..6, prop::collection::vec(0u32..4, 0..6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_a_metric(q in 2u32..5, a in point(), b in point(), c in point()) {
        let tree = Tree::new(q).unwrap();
        let (x, y, z) = (vertex(&tree, a.0, &a.1), vertex(&tree, b.0, &b.1), vertex(&tree, c.0, &c.1));
        prop_assert_eq!(x.distance(&y), y.distance(&x));
        prop_assert!(x.distance(&z) <= x.distance(&y) + y.distance(&z));
        prop_assert_eq!(x.distance(&x), 0);
        let w = x.confluent(&y);
        prop_assert!(x.is_below(&w) && y.is_below(&w));
        prop_assert_eq!(x.distance(&y) as i64, 2 * w.level() - x.level() - y.level());
    }

    #[test]
    fn text_form_round_trips(q in 2u32..5, a in point()) {
        let tree = Tree::new(q).unwrap();
        let x = vertex(&tree, a.0, &a.1);
        prop_assert_eq!(tree.parse_vertex(&x.to_string()).unwrap(), x);
    }

    #[test]
    fn heat_kernel_is_symmetric_and_positive(q in 2u32..4, a in point(), b in point(), t in 0.01f64..50.0) {
        let tree = Tree::new(q).unwrap();
        let (x, y) = (vertex(&tree, a.0, &a.1), vertex(&tree, b.0, &b.1));
        let h = flow_heat_kernel(&tree, &KernelQuery::from_vertices(&x, &y, t).unwrap()).unwrap();
        let g = flow_heat_kernel(&tree, &KernelQuery::from_vertices(&y, &x, t).unwrap()).unwrap();
        prop_assert!(h > 0.0);
        prop_assert_eq!(h, g);
    }

    #[test]
    fn poisson_kernel_is_symmetric(a in point(), b in point(), t in 0.1f64..10.0) {
        let tree = Tree::new(2).unwrap();
        let (x, y) = (vertex(&tree, a.0, &a.1), vertex(&tree, b.0, &b.1));
        let p = poisson_kernel(&tree, &KernelQuery::from_vertices(&x, &y, t).unwrap(), 1e-10).unwrap();
        let r = poisson_kernel(&tree, &KernelQuery::from_vertices(&y, &x, t).unwrap(), 1e-10).unwrap();
        prop_assert!(p > 0.0);
        prop_assert!((p - r).abs() <= 1e-14 * p);
    }

    #[test]
    fn transition_operator_is_stochastic(q in 2u32..5, a in point()) {
        let tree = Tree::new(q).unwrap();
        let x = vertex(&tree, a.0, &a.1);
        let ones = FinSuppFn::from_entries(&tree, tree.neighbours(&x).into_iter().map(|v| (v, 1.0)));
        prop_assert_eq!(apply_a(&tree, &ones, &x), 1.0);
    }

    #[test]
    fn labels_are_a_bijection_onto_level_zero(q in 2u32..5, i in 0u64..4096) {
        let tree = Tree::new(q).unwrap();
        let v = label_vertex(&tree, i);
        prop_assert_eq!(v.level(), 0);
        prop_assert_eq!(vertex_label(&tree, &v), Some(i));
    }

    #[test]
    fn random_atoms_satisfy_the_axioms(seed in any::<u64>(), cap in 4u32..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atom = random_atom(&mut rng, &AtomRanges { root_heights: (0, 8), h_lo: (1, cap / 2), h_hi_cap: cap }).unwrap();
        prop_assert!(atom.check().is_ok());
        let r = atom.support.depths();
        prop_assert!(r.end <= cap && r.end >= 2 * r.start && r.end <= 12 * r.start && r.len() >= 2);
        prop_assert!(atom.values.iter().any(|v| (v.abs() - 1.0).abs() < 1e-12));
    }
}
