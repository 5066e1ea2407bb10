//! Summation over spheres and cones by multiplicity classes instead of vertices.
//!
//! A sphere `S_m(x)` splits into `m + 1` classes on which both the level and the
//! distance to `x` are constant. Sums over pairs of centres use cells indexed by the
//! projection onto the geodesic between them and the depth of the hanging branch.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sum::NeumaierSum;
use crate::tree::{Tree, Vertex};

/// Vertices of a sphere sharing level and distance to the centre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereClass {
    pub level: i64,
    pub dist: u64,
    pub count: BigUint,
}

/// The classes `E_m^j` (`j = 1..=m`, through the ancestor `p^j(x)`) followed by `F_m` (below `x`).
pub fn sphere_partition(tree: &Tree, x: &Vertex, m: u64) -> Vec<SphereClass> {
    let q = BigUint::from(tree.q());
    let lx = x.level();
    let mut out = Vec::with_capacity(m as usize + 2);
    if m == 0 {
        out.push(SphereClass { level: lx, dist: 0, count: BigUint::one() });
        return out;
    }
    for j in 1..=m {
        let count = if j < m {
            (&q - 1u32) * q.pow((m - j - 1) as u32)
        } else {
            BigUint::one()
        };
        out.push(SphereClass { level: lx + 2 * j as i64 - m as i64, dist: m, count });
    }
    out.push(SphereClass { level: lx - m as i64, dist: m, count: q.pow(m as u32) });
    out
}

/// `sum_{y in S_m(x)} g(level(y), d(x, y))`.
pub fn radial_sphere_sum<G: Fn(i64, u64) -> f64>(tree: &Tree, x: &Vertex, m: u64, g: G) -> f64 {
    let mut s = NeumaierSum::new();
    for c in sphere_partition(tree, x, m) {
        s.add(biguint_to_f64(&c.count) * g(c.level, c.dist));
    }
    s.value()
}

/// Exact rational counterpart of [`radial_sphere_sum`].
pub fn radial_sphere_sum_exact<G: Fn(i64, u64) -> BigRational>(tree: &Tree, x: &Vertex, m: u64, g: G) -> BigRational {
    let mut s = BigRational::zero();
    for c in sphere_partition(tree, x, m) {
        s += BigRational::from_integer(c.count.into()) * g(c.level, c.dist);
    }
    s
}

/// `q^e` as an exact rational.
pub fn q_power_exact(q: u32, e: i64) -> BigRational {
    let base = BigRational::from_integer(BigUint::from(q).pow(e.unsigned_abs() as u32).into());
    if e >= 0 {
        base
    } else {
        base.recip()
    }
}

/// Closed form `(2 + (m-1)(q-1)/q) / (m+n)^2` of the sphere sum of `q^{l(y)/2} f_{x,n}(y)`.
pub fn sphere_closed_form(q: u32, m: u64, n: u64) -> BigRational {
    let q = BigRational::from_integer(q.into());
    let m_r = BigRational::from_integer(m.into());
    let bracket = BigRational::from_integer(2.into()) + (&m_r - BigRational::one()) * (&q - BigRational::one()) / &q;
    let denom = BigRational::from_integer(((m + n) * (m + n)).into());
    bracket / denom
}

/// `q^{l(y)/2} f_{x,n}(y) = q^{(l(y) - l(x) - d)/2} / (d + n)^2`, exact.
pub fn sphere_test_profile(q: u32, lx: i64, ly: i64, d: u64, n: u64) -> BigRational {
    let e = ly - lx - d as i64;
    debug_assert!(e % 2 == 0);
    q_power_exact(q, e / 2) / BigRational::from_integer(((d + n) * (d + n)).into())
}

pub(crate) fn biguint_to_f64(n: &BigUint) -> f64 {
    n.to_f64().unwrap_or(f64::INFINITY)
}

/// A cell of vertices relative to two centres `a`, `b`.
///
/// Every vertex projects to a point of the geodesic `[a, b]` (index `projection`
/// counted from `a`) or to an ancestor `p^ascent(a ^ b)` of the confluent, and hangs
/// `depth` steps below it on a branch avoiding the geodesic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeClass {
    pub projection: u64,
    pub ascent: u64,
    pub depth: u64,
    pub d_to_a: u64,
    pub d_to_b: u64,
    pub level: i64,
    #[serde(with = "biguint_string")]
    pub count: BigUint,
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ConeClass {
    /// `count * mu` as a float.
    pub fn mass(&self, tree: &Tree) -> f64 {
        biguint_to_f64(&self.count) * tree.qf().powi(self.level as i32)
    }
}

/// Geometry of the geodesic between two vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geodesic {
    pub length: u64,
    /// Index of the confluent `a ^ b` counted from `a`.
    pub top: u64,
    pub top_level: i64,
}

impl Geodesic {
    pub fn new(a: &Vertex, b: &Vertex) -> Self {
        let c = a.confluent(b);
        Self {
            length: a.distance(b),
            top: c.level().abs_diff(a.level()),
            top_level: c.level(),
        }
    }

    pub fn level_at(&self, i: u64) -> i64 {
        if i <= self.top {
            self.top_level - (self.top - i) as i64
        } else {
            self.top_level - (i - self.top) as i64
        }
    }

    /// Number of downward branches at geodesic point `i` that avoid the geodesic.
    pub fn branches(&self, q: u32, i: u64) -> u32 {
        // geodesic neighbours of point i that are sons of it
        let below_prev = i > 0 && i <= self.top;
        let below_next = i < self.length && i >= self.top;
        q - u32::from(below_prev) - u32::from(below_next)
    }
}

/// Cells at branch depth `depth` hanging from the geodesic `[a, b]` (no ascent part).
pub fn geodesic_cells(tree: &Tree, g: &Geodesic, depth: u64) -> Vec<ConeClass> {
    let q = tree.q();
    let mut out = Vec::with_capacity(g.length as usize + 1);
    for i in 0..=g.length {
        let count = if depth == 0 {
            BigUint::one()
        } else {
            let br = g.branches(q, i);
            if br == 0 {
                continue;
            }
            BigUint::from(br) * BigUint::from(q).pow((depth - 1) as u32)
        };
        out.push(ConeClass {
            projection: i,
            ascent: 0,
            depth,
            d_to_a: i + depth,
            d_to_b: g.length - i + depth,
            level: g.level_at(i) - depth as i64,
            count,
        });
    }
    out
}

/// Cells above the confluent: `p^ascent(a ^ b)` itself (`depth = 0`) or its `q - 1` side branches.
pub fn ascent_cells(tree: &Tree, g: &Geodesic, ascent: u64, depth: u64) -> Option<ConeClass> {
    if ascent == 0 {
        return None;
    }
    let q = tree.q();
    let count = if depth == 0 {
        BigUint::one()
    } else {
        BigUint::from(q - 1) * BigUint::from(q).pow((depth - 1) as u32)
    };
    Some(ConeClass {
        projection: g.top,
        ascent,
        depth,
        d_to_a: g.top + ascent + depth,
        d_to_b: g.length - g.top + ascent + depth,
        level: g.top_level + ascent as i64 - depth as i64,
        count,
    })
}

/// All cells whose distance to `a` is at most `radius`.
pub fn two_point_cells(tree: &Tree, a: &Vertex, b: &Vertex, radius: u64) -> Vec<ConeClass> {
    let g = Geodesic::new(a, b);
    let mut out = Vec::new();
    for depth in 0..=radius {
        out.extend(geodesic_cells(tree, &g, depth).into_iter().filter(|c| c.d_to_a <= radius));
    }
    for ascent in 1..=radius.saturating_sub(g.top) {
        for depth in 0..=radius - g.top - ascent {
            out.extend(ascent_cells(tree, &g, ascent, depth));
        }
    }
    out
}

/// The vertex `x_n` of the level-0 labelling with `n = q^m - 1`, and `o`.
fn cone_geodesic(m: u64) -> Geodesic {
    Geodesic { length: 2 * m, top: m, top_level: m as i64 }
}

/// Cells of the cone `{x <= p^m(o)}` at branch depth `depth`, classified by the
/// distances to `x_n` (a) and to `o` (b), where `|x_n| = 2m`.
pub fn cone_classes(tree: &Tree, m: u64, depth: u64) -> Vec<ConeClass> {
    geodesic_cells(tree, &cone_geodesic(m), depth)
}

/// Stopping rule for infinite radial sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub eps: f64,
    pub max_radius: u64,
    pub stall_window: u32,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { eps: 1e-6, max_radius: 4096, stall_window: 4 }
    }
}

/// Result of a truncated radial sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSum {
    pub value: f64,
    pub converged: bool,
    /// Last radius included.
    pub radius: u64,
    /// Heuristic remainder assuming shell increments decay like `1/r^2`.
    pub tail_estimate: f64,
    pub evaluations: u64,
}

/// Sums `eval` over cells shell by shell (`shell(r)` for `r = 0, 1, ...`).
///
/// Stops once `stall_window` consecutive shells each add at most `eps` times the
/// running total. Cells within a shell are evaluated in parallel and accumulated in
/// the order `shell` returns them.
pub fn l1_norm_radial<C, S, F>(shell: S, eval: F, policy: &TruncationPolicy) -> TruncatedSum
where
    C: Sync,
    S: Fn(u64) -> Vec<C>,
    F: Fn(&C) -> f64 + Sync,
{
    let mut total = NeumaierSum::new();
    let mut stall = 0u32;
    let mut evaluations = 0u64;
    let mut last_inc = 0.0;
    let mut radius = 0;
    for r in 0..=policy.max_radius {
        radius = r;
        let cells = shell(r);
        evaluations += cells.len() as u64;
        let values: Vec<f64> = cells.par_iter().map(|c| eval(c).abs()).collect();
        let mut inc = NeumaierSum::new();
        for v in values {
            inc.add(v);
        }
        let inc = inc.value();
        total.add(inc);
        last_inc = inc;
        if inc <= policy.eps * total.value() {
            stall += 1;
            if stall >= policy.stall_window {
                return TruncatedSum {
                    value: total.value(),
                    converged: true,
                    radius: r,
                    tail_estimate: tail(inc, r),
                    evaluations,
                };
            }
        } else {
            stall = 0;
        }
    }
    TruncatedSum {
        value: total.value(),
        converged: false,
        radius,
        tail_estimate: tail(last_inc, radius),
        evaluations,
    }
}

fn tail(inc: f64, r: u64) -> f64 {
    let r = r as f64;
    if r == 0.0 {
        return 0.0;
    }
    inc * r * r / (r + 0.5)
}

/// `sum_y H_t(x, y) mu(y)` by spheres around `x`: sphere `m` contributes
/// `J_t(m) (2 + (m-1)(q-1)/q)` for `m >= 1`. Summed until the sphere term drops below
/// `1e-18` of the total.
pub fn heat_mass(tree: &Tree, x: &Vertex, t: f64) -> TruncatedSum {
    let ln_q = tree.ln_q();
    let mut big_m = (t + 40.0 * t.sqrt() + 60.0) as u32;
    loop {
        let col = crate::flow::j_column(tree, t, big_m);
        let mut total = NeumaierSum::new();
        let mut last = 0.0;
        let mut evaluations = 0;
        for m in 0..=u64::from(big_m) {
            let mut sphere = NeumaierSum::new();
            for c in sphere_partition(tree, x, m) {
                // q^{l(y)} Q(x, y) = q^{(l(y) - l(x) - m)/2}
                let w = ((c.level - x.level() - m as i64) as f64 / 2.0 * ln_q).exp();
                sphere.add(biguint_to_f64(&c.count) * w * col[m as usize]);
                evaluations += 1;
            }
            last = sphere.value();
            total.add(last);
            if m > 0 && last <= 1e-18 * total.value() {
                return TruncatedSum { value: total.value(), converged: true, radius: m, tail_estimate: last, evaluations };
            }
        }
        if big_m > 1 << 20 {
            return TruncatedSum { value: total.value(), converged: false, radius: u64::from(big_m), tail_estimate: last, evaluations };
        }
        big_m *= 2;
    }
}

/// `sum_y H_t(x, y) H_s(y, z) mu(y)` over all cells within `radius` of `x`.
pub fn semigroup_sum(tree: &Tree, x: &Vertex, z: &Vertex, t: f64, s: f64, radius: u64) -> f64 {
    let ln_q = tree.ln_q();
    let cells = two_point_cells(tree, x, z, radius);
    let dmax = cells.iter().map(|c| c.d_to_a.max(c.d_to_b)).max().unwrap_or(0) as u32;
    let jt = crate::flow::j_column(tree, t, dmax);
    let js = crate::flow::j_column(tree, s, dmax);
    let mut acc = NeumaierSum::new();
    for c in &cells {
        // Q(x, y) Q(y, z) mu(y) = q^{-(l(x) + l(z) + d(x,y) + d(y,z))/2}
        let e = -((x.level() + z.level()) as f64 + (c.d_to_a + c.d_to_b) as f64) / 2.0;
        acc.add(biguint_to_f64(&c.count) * (e * ln_q).exp() * jt[c.d_to_a as usize] * js[c.d_to_b as usize]);
    }
    acc.value()
}
