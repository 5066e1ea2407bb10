//! Independent ground truth for the heat kernel: truncated uniformisation
//! `e^{-t(I-A)} = e^{-t} sum_k t^k A^k / k!` and a Monte Carlo random walk.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::ln_factorial;
use crate::error::{Result, TreeError};
use crate::sum::NeumaierSum;
use crate::tree::{Tree, Vertex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    /// Rigorous for uniformisation, three standard errors for Monte Carlo.
    pub error_bound: f64,
    /// Truncation order or sample count.
    pub effort: u64,
}

/// `e^{-t} sum_{k > big_k} t^k / k!`, summed directly in the log domain.
pub fn poisson_tail(t: f64, big_k: u64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut s = NeumaierSum::new();
    let mut k = big_k + 1;
    loop {
        let term = (-t + k as f64 * t.ln() - ln_factorial(k)).exp();
        s.add(term);
        // once terms decrease geometrically with ratio t/k < 1/2 the rest is below the last term
        if k as f64 > 2.0 * t && term <= 1e-30 * s.value().max(1e-300) {
            break;
        }
        if term == 0.0 && k as f64 > t {
            break;
        }
        k += 1;
    }
    s.value()
}

/// Weighted walk counts on the lumped chain.
///
/// With target `y`, the pair `(l(z), d(z, y))` determines every transition of `A`:
/// `y <= z` iff `l(z) - l(y) = d(z, y)`. Weights are integers: the predecessor gets
/// `q`, each son `1`, so `A^k(x, y) = N_k / (2q)^k` exactly.
fn lumped_counts(q: u32, lx: i64, ly: i64, d0: u64, big_k: u64) -> Vec<BigUint> {
    let mut state: HashMap<(i64, u64), BigUint> = HashMap::new();
    state.insert((lx, d0), BigUint::from(1u32));
    let mut out = Vec::with_capacity(big_k as usize + 1);
    let hit = |s: &HashMap<(i64, u64), BigUint>| s.get(&(ly, 0)).cloned().unwrap_or_default();
    out.push(hit(&state));
    let qb = BigUint::from(q);
    for _ in 0..big_k {
        let mut next: HashMap<(i64, u64), BigUint> = HashMap::with_capacity(state.len() * 3);
        for ((l, d), n) in state {
            let above_y = l - ly == d as i64;
            // predecessor
            let up_d = if above_y { d + 1 } else { d - 1 };
            *next.entry((l + 1, up_d)).or_default() += &n * &qb;
            // sons
            if above_y && d > 0 {
                *next.entry((l - 1, d - 1)).or_default() += &n;
                *next.entry((l - 1, d + 1)).or_default() += &n * BigUint::from(q - 1);
            } else {
                *next.entry((l - 1, d + 1)).or_default() += &n * &qb;
            }
        }
        state = next;
        out.push(hit(&state));
    }
    out
}

/// `A^k(x, y)` for `k = 0..=big_k`, exact.
pub fn transition_powers(tree: &Tree, x: &Vertex, y: &Vertex, big_k: u64) -> Vec<BigRational> {
    let q = tree.q();
    let counts = lumped_counts(q, x.level(), y.level(), x.distance(y), big_k);
    let denom = BigUint::from(2 * q);
    let mut pow = BigUint::from(1u32);
    counts
        .into_iter()
        .map(|n| {
            let r = BigRational::new(n.into(), pow.clone().into());
            pow *= &denom;
            r
        })
        .collect()
}

fn uniformise(tree: &Tree, t: f64, y: &Vertex, powers: &[BigRational]) -> Result<OracleResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    let mu_y = tree.flow_measure(y).value(tree);
    let big_k = powers.len() as u64 - 1;
    let mut s = NeumaierSum::new();
    for (k, p) in powers.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let w = if t == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (-t + k as f64 * t.ln() - ln_factorial(k as u64)).exp()
        };
        s.add(w * p.to_f64().unwrap_or(0.0));
    }
    Ok(OracleResult {
        value: s.value() / mu_y,
        error_bound: poisson_tail(t, big_k) / mu_y,
        effort: big_k,
    })
}

/// `e^{-t} sum_{k <= K} t^k A^k(x, y) / k! / mu(y)` with exact `A^k` from the lumped chain.
pub fn uniformization_heat(tree: &Tree, t: f64, x: &Vertex, y: &Vertex, big_k: u64) -> Result<OracleResult> {
    uniformise(tree, t, y, &transition_powers(tree, x, y, big_k))
}

/// Explicit ball around a centre, built breadth first.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vertex,
    pub radius: u64,
    pub vertices: Vec<Vertex>,
    pub index: HashMap<Vertex, usize>,
    /// Distance from the centre, per vertex.
    pub dist: Vec<u64>,
}

impl Ball {
    pub fn new(tree: &Tree, center: &Vertex, radius: u64) -> Self {
        let mut vertices = vec![center.clone()];
        let mut index = HashMap::new();
        index.insert(center.clone(), 0);
        let mut dist = vec![0];
        let mut frontier = vec![0usize];
        for r in 1..=radius {
            let mut next = Vec::new();
            for &i in &frontier {
                for nb in tree.neighbours(&vertices[i]) {
                    if !index.contains_key(&nb) {
                        index.insert(nb.clone(), vertices.len());
                        next.push(vertices.len());
                        vertices.push(nb);
                        dist.push(r);
                    }
                }
            }
            frontier = next;
        }
        Self { center: center.clone(), radius, vertices, index, dist }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// BFS distances from vertex `i` inside the ball.
    pub fn bfs_from(&self, tree: &Tree, i: usize) -> Vec<Option<u64>> {
        let mut out = vec![None; self.len()];
        out[i] = Some(0);
        let mut frontier = vec![i];
        let mut r = 0;
        while !frontier.is_empty() {
            r += 1;
            let mut next = Vec::new();
            for &j in &frontier {
                for nb in tree.neighbours(&self.vertices[j]) {
                    if let Some(&k) = self.index.get(&nb) {
                        if out[k].is_none() {
                            out[k] = Some(r);
                            next.push(k);
                        }
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Rows `A^k(x, .)` for `k = 0..=big_k` as exact rationals, by sparse propagation.
    /// Every walk of length `k < radius - d(center, x)` stays strictly inside the ball.
    pub fn transition_rows(&self, tree: &Tree, x: &Vertex, big_k: u64) -> Result<Vec<HashMap<usize, BigRational>>> {
        let &start = self.index.get(x).ok_or_else(|| TreeError::InvalidQuery(format!("{x} is outside the ball")))?;
        let required = self.dist[start] + big_k + 1;
        if self.radius < required {
            return Err(TreeError::InsufficientRadius { radius: self.radius, required });
        }
        let q = tree.q();
        let half = BigRational::new(1.into(), 2.into());
        let son = BigRational::new(1.into(), (2 * q).into());
        let mut row: HashMap<usize, BigRational> = HashMap::new();
        row.insert(start, BigRational::from_integer(1.into()));
        let mut rows = vec![row.clone()];
        for _ in 0..big_k {
            let mut next: HashMap<usize, BigRational> = HashMap::new();
            for (i, p) in &row {
                let v = &self.vertices[*i];
                let up = self.index[&v.predecessor()];
                *next.entry(up).or_insert_with(BigRational::zero) += p * &half;
                for s in tree.sons(v) {
                    *next.entry(self.index[&s]).or_insert_with(BigRational::zero) += p * &son;
                }
            }
            row = next;
            rows.push(row.clone());
        }
        Ok(rows)
    }
}

/// Uniformisation on an explicitly built ball; the ball radius must reach `d(x, y) + K`.
pub fn uniformization_heat_ball(tree: &Tree, ball: &Ball, t: f64, x: &Vertex, y: &Vertex, big_k: u64) -> Result<OracleResult> {
    let required = x.distance(&ball.center) + x.distance(y) + big_k;
    if ball.radius < required {
        return Err(TreeError::InsufficientRadius { radius: ball.radius, required });
    }
    let rows = ball.transition_rows(tree, x, big_k)?;
    let yi = ball.index[y];
    let powers: Vec<BigRational> = rows.iter().map(|r| r.get(&yi).cloned().unwrap_or_else(BigRational::zero)).collect();
    uniformise(tree, t, y, &powers)
}

/// Monte Carlo estimate of `P_x(X_t = y) / mu(y)`: a Poisson(`t`) number of `A`-jumps,
/// each to the predecessor with probability 1/2 and otherwise to a uniform son.
pub fn mc_heat(tree: &Tree, t: f64, x: &Vertex, y: &Vertex, samples: u64, seed: u64) -> Result<OracleResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    if samples < 1000 {
        return Err(TreeError::Config(format!("need at least 1000 samples, got {samples}")));
    }
    let hits = mc_walks(tree, t, x, samples, seed, |end| u64::from(end == y)).into_iter().sum::<u64>();
    let mu_y = tree.flow_measure(y).value(tree);
    let p = hits as f64 / samples as f64;
    Ok(OracleResult {
        value: p / mu_y,
        error_bound: 3.0 * (p * (1.0 - p) / samples as f64).sqrt() / mu_y,
        effort: samples,
    })
}

const MC_CHUNKS: u64 = 64;

/// Runs `samples` walks in a fixed number of chunks, each with its own seeded stream,
/// and returns per-chunk sums of `score(end)`.
pub fn mc_walks<F>(tree: &Tree, t: f64, x: &Vertex, samples: u64, seed: u64, score: F) -> Vec<u64>
where
    F: Fn(&Vertex) -> u64 + Sync,
{
    (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = samples / MC_CHUNKS + u64::from(c < samples % MC_CHUNKS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut acc = 0;
            for _ in 0..n {
                let jumps = if t > 0.0 {
                    Poisson::new(t).expect("positive rate").sample(&mut rng) as u64
                } else {
                    0
                };
                let mut v = x.clone();
                for _ in 0..jumps {
                    v = if rng.gen_bool(0.5) {
                        v.predecessor()
                    } else {
                        tree.son(&v, rng.gen_range(0..tree.q()))
                    };
                }
                acc += score(&v);
            }
            acc
        })
        .collect()
}

/// Mean level change and mean distance from the start after time `t`.
///
/// Each jump moves up or down with probability 1/2, so the level change has mean
/// zero and variance `t`; the distance grows because downward moves branch.
pub fn mc_level_drift(tree: &Tree, t: f64, x: &Vertex, samples: u64, seed: u64) -> (f64, f64) {
    // the three passes replay the same walks
    let up = mc_walks(tree, t, x, samples, seed, |v| (v.level() - x.level()).max(0) as u64);
    let down = mc_walks(tree, t, x, samples, seed, |v| (x.level() - v.level()).max(0) as u64);
    let dists = mc_walks(tree, t, x, samples, seed, |v| v.distance(x));
    let n = samples as f64;
    let total = |v: &[u64]| v.iter().sum::<u64>() as f64;
    ((total(&up) - total(&down)) / n, total(&dists) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_has_no_drift() {
        let t = Tree::new(2).unwrap();
        let (samples, time) = (100_000u64, 20.0);
        let (level, dist) = mc_level_drift(&t, time, &Vertex::origin(), samples, 3);
        let sigma = (time / samples as f64).sqrt();
        assert!(level.abs() <= 4.0 * sigma, "{level} {sigma}");
        assert!(dist > 1.0, "{dist}");
    }

    #[test]
    fn time_zero_is_indicator() {
        let t = Tree::new(2).unwrap();
        let o = Vertex::origin();
        let r = uniformization_heat(&t, 0.0, &o, &o, 10).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.error_bound, 0.0);
        let y = t.parse_vertex("0:1").unwrap();
        assert_eq!(uniformization_heat(&t, 0.0, &o, &y, 10).unwrap().value, 0.0);
    }

    #[test]
    fn lumped_and_explicit_powers_agree() {
        let t = Tree::new(2).unwrap();
        let x = t.parse_vertex("1:1").unwrap();
        let y = t.parse_vertex("2:1.0.1").unwrap();
        let ball = Ball::new(&t, &x, 12);
        let rows = ball.transition_rows(&t, &x, 8).unwrap();
        let lumped = transition_powers(&t, &x, &y, 8);
        let yi = ball.index[&y];
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row.get(&yi).cloned().unwrap_or_else(BigRational::zero), lumped[k], "k={k}");
        }
    }

    #[test]
    fn ball_radius_is_checked() {
        let t = Tree::new(2).unwrap();
        let o = Vertex::origin();
        let ball = Ball::new(&t, &o, 4);
        let r = uniformization_heat_ball(&t, &ball, 1.0, &o, &o, 10);
        assert!(matches!(r, Err(TreeError::InsufficientRadius { .. })));
    }

    #[test]
    fn poisson_tail_is_tiny_for_large_order() {
        assert!(poisson_tail(1.0, 80) < 1e-50);
        assert!((poisson_tail(1.0, 0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }
}
