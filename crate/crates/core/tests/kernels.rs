//! Kernel identities checked by explicit sums over finite balls.

use treeflow::flow::{flow_heat_kernel, KernelQuery};
use treeflow::oracles::{uniformization_heat_ball, Ball};
use treeflow::sum::NeumaierSum;
use treeflow::{Tree, TreeError, Vertex};

fn heat(tree: &Tree, x: &Vertex, y: &Vertex, t: f64) -> f64 {
    flow_heat_kernel(tree, &KernelQuery::from_vertices(x, y, t).unwrap()).unwrap()
}

#[test]
fn semigroup_by_explicit_ball_sum() {
    // at t + s = 1/2 the walk leaves radius 14 with probability below 1e-15
    let tree = Tree::new(2).unwrap();
    let x = Vertex::origin();
    let z = tree.parse_vertex("1:1").unwrap();
    let ball = Ball::new(&tree, &x, 14);
    let (t, s) = (0.25, 0.25);
    let mut acc = NeumaierSum::new();
    for y in &ball.vertices {
        acc.add(heat(&tree, &x, y, t) * heat(&tree, y, &z, s) * tree.flow_measure(y).value(&tree));
    }
    let rhs = heat(&tree, &x, &z, t + s);
    assert!((acc.value() - rhs).abs() <= 1e-12 * rhs, "{} {rhs}", acc.value());
}

#[test]
fn explicit_ball_sum_is_a_probability() {
    let tree = Tree::new(3).unwrap();
    let x = tree.parse_vertex("2:1").unwrap();
    let ball = Ball::new(&tree, &x, 12);
    let mut acc = NeumaierSum::new();
    for y in &ball.vertices {
        acc.add(heat(&tree, &x, y, 0.5) * tree.flow_measure(y).value(&tree));
    }
    assert!((acc.value() - 1.0).abs() < 1e-12, "{}", acc.value());
}

#[test]
fn ball_uniformization_matches_the_kernel() {
    let tree = Tree::new(2).unwrap();
    let x = Vertex::origin();
    let y = x.predecessor();
    let ball = Ball::new(&tree, &x, 13);
    let r = uniformization_heat_ball(&tree, &ball, 0.25, &x, &y, 12).unwrap();
    let h = heat(&tree, &x, &y, 0.25);
    assert!((r.value - h).abs() <= r.error_bound + 1e-14, "{} {h} {}", r.value, r.error_bound);
}

#[test]
fn small_ball_is_rejected() {
    let tree = Tree::new(2).unwrap();
    let x = Vertex::origin();
    let ball = Ball::new(&tree, &x, 5);
    let err = uniformization_heat_ball(&tree, &ball, 1.0, &x, &x, 20).unwrap_err();
    assert!(matches!(err, TreeError::InsufficientRadius { .. }));
}

#[test]
fn powers_satisfy_detailed_balance_exactly() {
    use treeflow::oracles::transition_powers;
    use treeflow::radial::q_power_exact;
    for q in [2, 3] {
        let tree = Tree::new(q).unwrap();
        let x = tree.parse_vertex("2:1").unwrap();
        for y in ["0:", "1:", "3:1.0.1", "2:1.0"] {
            let y = tree.parse_vertex(y).unwrap();
            let xy = transition_powers(&tree, &x, &y, 10);
            let yx = transition_powers(&tree, &y, &x, 10);
            for (a, b) in xy.iter().zip(&yx) {
                assert_eq!(q_power_exact(q, x.level()) * a, q_power_exact(q, y.level()) * b);
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_in_almost_all_trials() {
    use treeflow::oracles::{mc_heat, uniformization_heat};
    let tree = Tree::new(2).unwrap();
    let o = Vertex::origin();
    let exact = uniformization_heat(&tree, 1.0, &o, &o, 80).unwrap().value;
    let within = (0..100u64)
        .filter(|&seed| {
            let mc = mc_heat(&tree, 1.0, &o, &o, 10_000, seed).unwrap();
            // error_bound is three standard errors
            (mc.value - exact).abs() <= 4.0 * mc.error_bound / 3.0
        })
        .count();
    assert!(within >= 99, "{within}");
}
