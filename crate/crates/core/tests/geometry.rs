//! Class and cell decompositions against brute-force enumeration of explicit balls.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeflow::hardy::label_vertex;
use treeflow::oracles::Ball;
use treeflow::radial::{cone_classes, sphere_partition, two_point_cells};
use treeflow::verify::random_vertex;
use treeflow::{Tree, Vertex};

type Census = BTreeMap<(u64, u64, i64), BigUint>;

fn add(c: &mut Census, key: (u64, u64, i64), n: BigUint) {
    *c.entry(key).or_default() += n;
}

#[test]
fn ball_distances_match_the_confluent_formula() {
    let tree = Tree::new(3).unwrap();
    let x = tree.parse_vertex("1:2.0").unwrap();
    let ball = Ball::new(&tree, &x, 5);
    for i in [0, 7, ball.len() / 2, ball.len() - 1] {
        let bfs = ball.bfs_from(&tree, i);
        // balls in a tree are geodesically convex, so BFS inside the ball is exact
        for (j, v) in ball.vertices.iter().enumerate() {
            assert_eq!(bfs[j], Some(ball.vertices[i].distance(v)), "{} {}", ball.vertices[i], v);
        }
    }
}

#[test]
fn sphere_classes_count_the_sphere() {
    for q in [2, 3, 4] {
        let tree = Tree::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(q));
        for _ in 0..3 {
            let x = random_vertex(&tree, &mut rng, 3);
            let ball = Ball::new(&tree, &x, 6);
            for m in 0..=6 {
                let mut brute: BTreeMap<i64, BigUint> = BTreeMap::new();
                for (v, &d) in ball.vertices.iter().zip(&ball.dist) {
                    if d == m {
                        *brute.entry(v.level()).or_default() += 1u32;
                    }
                }
                let mut classes: BTreeMap<i64, BigUint> = BTreeMap::new();
                for c in sphere_partition(&tree, &x, m) {
                    assert_eq!(c.dist, m);
                    *classes.entry(c.level).or_default() += c.count;
                }
                assert_eq!(brute, classes, "q={q} x={x} m={m}");
            }
        }
    }
}

#[test]
fn two_point_cells_partition_the_ball() {
    for q in [2, 3] {
        let tree = Tree::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10 + u64::from(q));
        for _ in 0..6 {
            let a = random_vertex(&tree, &mut rng, 2);
            let b = random_vertex(&tree, &mut rng, 2);
            let radius = 6;
            let ball = Ball::new(&tree, &a, radius);
            let mut brute = Census::new();
            for v in &ball.vertices {
                add(&mut brute, (v.distance(&a), v.distance(&b), v.level()), BigUint::from(1u32));
            }
            let mut cells = Census::new();
            for c in two_point_cells(&tree, &a, &b, radius) {
                assert!(c.d_to_a <= radius);
                add(&mut cells, (c.d_to_a, c.d_to_b, c.level), c.count);
            }
            assert_eq!(brute, cells, "q={q} a={a} b={b}");
        }
    }
}

#[test]
fn cone_cells_count_the_cone() {
    for (q, m) in [(2u32, 2u64), (2, 3), (3, 2)] {
        let tree = Tree::new(q).unwrap();
        let xn = label_vertex(&tree, u64::from(q).pow(m as u32) - 1);
        let o = Vertex::origin();
        let top = o.ancestor(m);
        assert_eq!(xn.distance(&o), 2 * m);
        let max_branch = 3;
        let mut brute = Census::new();
        for depth in 0..=(m + max_branch) as u32 {
            for v in tree.descendants_at(&top, depth) {
                let (da, db) = (v.distance(&xn), v.distance(&o));
                // distance to the geodesic from x_n to o
                if (da + db - 2 * m) / 2 <= max_branch {
                    add(&mut brute, (da, db, v.level()), BigUint::from(1u32));
                }
            }
        }
        let mut cells = Census::new();
        for r in 0..=max_branch {
            for c in cone_classes(&tree, m, r) {
                add(&mut cells, (c.d_to_a, c.d_to_b, c.level), c.count);
            }
        }
        assert_eq!(brute, cells, "q={q} m={m}");
    }
}

#[test]
fn random_vertices_stay_canonical() {
    let tree = Tree::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let v = random_vertex(&tree, &mut rng, 4);
        let back = tree.parse_vertex(&v.to_string()).unwrap();
        assert_eq!(back, v);
    }
}
