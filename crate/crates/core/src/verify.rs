//! Invariant checks with pinned thresholds, shared by `treeflow verify` and the test suites.

use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{apply_a, flow_heat_kernel, j_column, subordination_mass, KernelQuery, Kernels};
use crate::hardy::{make_gn, random_atom, AtomRanges};
use crate::oracles::{mc_heat, uniformization_heat, Ball};
use crate::radial::{heat_mass, radial_sphere_sum_exact, semigroup_sum, sphere_closed_form, sphere_test_profile};
use crate::scalar::{heat_kernel_z, heat_kernel_z_approx, s_profile};
use crate::tree::{Tree, Vertex};

/// Outcome of one check: the worst observed value against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, observed: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: observed <= threshold, observed, threshold, detail }
    }
}

/// Vertices near `o` used as sample centres and targets.
pub fn sample_vertices(tree: &Tree) -> Vec<Vertex> {
    let o = Vertex::origin();
    let mut v = vec![o.clone(), o.predecessor(), o.ancestor(3)];
    let s = tree.son(&o, tree.q() - 1);
    v.push(tree.son(&s, 0));
    v.push(tree.son(&o.ancestor(2), 1));
    v
}

/// Max relative defect of `h(j) - h(j+2) = 2(j+1)/t h(j+1)` for the heat kernel on `Z`.
pub fn bessel_recurrence(ts: &[f64], jmax: u32) -> Result<Check> {
    let mut worst = 0.0f64;
    for &t in ts {
        for j in 0..=jmax {
            let lhs = heat_kernel_z(t, j)? - heat_kernel_z(t, j + 2)?;
            let rhs = 2.0 * f64::from(j + 1) / t * heat_kernel_z(t, j + 1)?;
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    Ok(Check::at_most("bessel_recurrence", worst, 1e-10, format!("t in {ts:?}, j <= {jmax}")))
}

/// `|sum_y H_t(x, y) mu(y) - 1|` by sphere classes.
pub fn normalization(tree: &Tree, ts: &[f64], centers: &[Vertex]) -> Check {
    let mut worst = 0.0f64;
    let mut converged = true;
    for &t in ts {
        for x in centers {
            let s = heat_mass(tree, x, t);
            converged &= s.converged;
            worst = worst.max((s.value - 1.0).abs());
        }
    }
    if !converged {
        worst = f64::INFINITY;
    }
    Check::at_most("normalization", worst, 1e-8, format!("q={}, t in {ts:?}, {} centres", tree.q(), centers.len()))
}

/// Excess of `|H - uniformization|` over the certified truncation bound.
pub fn oracle_uniformization(tree: &Tree, ts: &[f64], max_d: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut count = 0;
    let vs = sample_vertices(tree);
    for &t in ts {
        for x in &vs {
            for y in &vs {
                if x.distance(y) > max_d {
                    continue;
                }
                let h = flow_heat_kernel(tree, &KernelQuery::from_vertices(x, y, t)?)?;
                let o = uniformization_heat(tree, t, x, y, 80)?;
                worst = worst.max((h - o.value).abs() - o.error_bound);
                count += 1;
            }
        }
    }
    Ok(Check::at_most("oracle_uniformization", worst, 1e-10, format!("q={}, {count} pairs, K=80", tree.q())))
}

/// Monte Carlo against uniformization, in units of one standard error.
pub fn oracle_monte_carlo(tree: &Tree, samples: u64, seed: u64) -> Result<Check> {
    let o = Vertex::origin();
    let spots = [(1.0, o.clone(), o.clone()), (0.5, o.clone(), o.predecessor()), (2.0, o.clone(), tree.son(&o, 0))];
    let mut worst = 0.0f64;
    for (i, (t, x, y)) in spots.iter().enumerate() {
        let mc = mc_heat(tree, *t, x, y, samples, seed.wrapping_add(i as u64))?;
        let exact = uniformization_heat(tree, *t, x, y, 80)?;
        // error_bound is three standard errors
        let sigma = mc.error_bound / 3.0;
        worst = worst.max((mc.value - exact.value).abs() / sigma);
    }
    Ok(Check::at_most("oracle_monte_carlo", worst, 4.0, format!("q={}, 3 spots, {samples} samples, sigmas", tree.q())))
}

/// Relative defect of `sum_y H_t(x,y) H_s(y,z) mu(y) = H_{t+s}(x,z)` on `pairs` sampled pairs.
pub fn semigroup(tree: &Tree, t: f64, s: f64, pairs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let radius = 60 + (4.0 * (t + s)) as u64;
    for _ in 0..pairs {
        let x = random_vertex(tree, &mut rng, 3);
        let z = random_vertex(tree, &mut rng, 3);
        let lhs = semigroup_sum(tree, &x, &z, t, s, radius + x.distance(&z));
        let rhs = flow_heat_kernel(tree, &KernelQuery::from_vertices(&x, &z, t + s)?)?;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    Ok(Check::at_most("semigroup", worst, 1e-6, format!("q={}, t={t}, s={s}, {pairs} pairs", tree.q())))
}

/// A vertex within `spread` steps up and down of `o`.
pub fn random_vertex<R: Rng>(tree: &Tree, rng: &mut R, spread: u64) -> Vertex {
    let up = rng.gen_range(0..=spread);
    let mut v = Vertex::origin().ancestor(up);
    for _ in 0..rng.gen_range(0..=spread) {
        v = tree.son(&v, rng.gen_range(0..tree.q()));
    }
    v
}

/// Sphere sums of `q^{l(y)/2} / (d(x,y) + n)^2 * Q(x,y)`: closed form, class sum and
/// enumeration must agree exactly. Observed value is the number of mismatches.
pub fn sphere_closed_form_exact(qs: &[u32], max_m: u64, max_n: u64) -> Result<Check> {
    let mut mismatches = 0u32;
    let mut cases = 0u32;
    for &q in qs {
        let tree = Tree::new(q)?;
        let x = Vertex::origin();
        let ball = Ball::new(&tree, &x, max_m);
        for n in 1..=max_n {
            for m in 1..=max_m {
                let closed = sphere_closed_form(q, m, n);
                let classes = radial_sphere_sum_exact(&tree, &x, m, |l, d| sphere_test_profile(q, x.level(), l, d, n));
                let mut brute = BigRational::zero();
                for (v, &d) in ball.vertices.iter().zip(&ball.dist) {
                    if d == m {
                        brute += sphere_test_profile(q, x.level(), v.level(), d, n);
                    }
                }
                cases += 1;
                if closed != classes || classes != brute {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(Check::at_most("sphere_closed_form", f64::from(mismatches), 0.0, format!("{cases} cases, q in {qs:?}")))
}

/// Scaled sups of `J_t(d)`, `(d/t) J_t(d)` and `|J_t(d) - J_t(d-1)|` over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub plain: f64,
    pub weighted: f64,
    pub gradient: f64,
}

/// Largest of `(d+1)^2 sup J`, `(d+1)^3 sup (d/t) J`, `(d+1)^3 sup |grad|` for `d <= dmax`.
pub fn kernel_constants(kernels: &Kernels, dmax: u32) -> Result<KernelConstants> {
    let mut c = KernelConstants { plain: 0.0, weighted: 0.0, gradient: 0.0 };
    let o = Vertex::origin();
    for d in 0..=dmax {
        let s = f64::from(d) + 1.0;
        let l = -i64::from(d);
        c.plain = c.plain.max(s * s * kernels.heat_sup(0, l, d, false)?.sup);
        c.weighted = c.weighted.max(s.powi(3) * kernels.heat_sup(0, l, d, true)?.sup);
        if d >= 1 {
            // p^d(o) is not below o
            let y = o.ancestor(u64::from(d));
            let g = kernels.grad_sup(&y, &o)?;
            let q = crate::flow::q_factor(kernels.tree(), y.level(), o.level(), d);
            c.gradient = c.gradient.max(s.powi(3) * g.sup / q);
        }
    }
    Ok(c)
}

pub fn kernel_bounds(kernels: &Kernels, dmax: u32, constant: f64) -> Result<Check> {
    let c = kernel_constants(kernels, dmax)?;
    let worst = c.plain.max(c.weighted).max(c.gradient);
    Ok(Check::at_most(
        "kernel_bounds",
        worst,
        constant,
        format!("q={}, d <= {dmax}: plain {:.4}, weighted {:.4}, gradient {:.4}", kernels.tree().q(), c.plain, c.weighted, c.gradient),
    ))
}

/// `c2 / c1` for `J_t(d) / s_d(t)` over the given times and `d <= dmax`.
pub fn comparability(tree: &Tree, ts: &[f64], dmax: u32) -> Result<Check> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in ts {
        let col = j_column(tree, t, dmax);
        for d in 0..=dmax {
            let r = col[d as usize] / s_profile(d, t)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(Check::at_most("comparability", hi / lo, 20.0, format!("q={}, ratio in [{lo:.4}, {hi:.4}]", tree.q())))
}

/// `c2 / c1` for the heat kernel on `Z` against its closed-form approximation.
pub fn comparability_z(ts: &[f64], jmax: u32) -> Result<Check> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in ts {
        for j in 0..=jmax {
            let r = heat_kernel_z(t, j)? / heat_kernel_z_approx(t, j);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(Check::at_most("comparability_z", hi / lo, 20.0, format!("ratio in [{lo:.4}, {hi:.4}]")))
}

/// Row sums of `A` and `mu(x) A(x, y) = mu(y) A(y, x)` on sample vertices.
pub fn transition_operator(tree: &Tree) -> Check {
    let mut worst = 0.0f64;
    for x in sample_vertices(tree) {
        let one = crate::flow::FinSuppFn::from_entries(tree, tree.neighbours(&x).into_iter().map(|v| (v, 1.0)));
        worst = worst.max((apply_a(tree, &one, &x) - 1.0).abs());
        for y in tree.neighbours(&x) {
            let a_xy = apply_a(tree, &crate::flow::FinSuppFn::from_entries(tree, [(y.clone(), 1.0)]), &x);
            let a_yx = apply_a(tree, &crate::flow::FinSuppFn::from_entries(tree, [(x.clone(), 1.0)]), &y);
            let mx = tree.flow_measure(&x).value(tree);
            let my = tree.flow_measure(&y).value(tree);
            worst = worst.max((mx * a_xy - my * a_yx).abs() / (mx * a_xy));
        }
    }
    Check::at_most("transition_operator", worst, 1e-15, format!("q={}", tree.q()))
}

/// Mass of the subordination weight for several `t`.
pub fn subordination(ts: &[f64]) -> Result<Check> {
    let mut worst = 0.0f64;
    for &t in ts {
        worst = worst.max((subordination_mass(t)? - 1.0).abs());
    }
    Ok(Check::at_most("subordination_mass", worst, 1e-8, format!("t in {ts:?}")))
}

/// `M_P f <= M_h f` at `evaluations` points for `delta_o`, `g_5` and a random atom.
/// Observed value is the largest relative excess.
pub fn poisson_domination(kernels: &Kernels, evaluations: usize, seed: u64) -> Result<Check> {
    let tree = *kernels.tree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atom = random_atom(&mut rng, &AtomRanges { root_heights: (0, 2), h_lo: (1, 2), h_hi_cap: 4 })?;
    let fs = [
        crate::flow::FinSuppFn::delta(&tree, Vertex::origin()),
        make_gn(&tree, 5)?,
        atom.to_fin_supp(&tree),
    ];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..evaluations {
        let f = &fs[i % fs.len()];
        let x = random_vertex(&tree, &mut rng, 6);
        let mp = kernels.maximal_poisson(f, &x);
        let mh = kernels.maximal_heat(f, &x);
        worst = worst.max((mp - mh) / mh);
    }
    Ok(Check::at_most("poisson_domination", worst, 1e-9, format!("q={}, {evaluations} evaluations", tree.q())))
}

/// Axioms for `count` seeded atoms. Observed value is the number of failures.
pub fn atom_axioms(count: u64, seed: u64) -> Check {
    let ranges = AtomRanges { root_heights: (0, 8), h_lo: (1, 32), h_hi_cap: 64 };
    let mut failures = 0u32;
    for s in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s));
        if random_atom(&mut rng, &ranges).and_then(|a| a.check()).is_err() {
            failures += 1;
        }
    }
    Check::at_most("atom_axioms", f64::from(failures), 0.0, format!("{count} atoms"))
}

/// The quick suite run by `treeflow verify`.
pub fn run_suite(q: u32, seed: u64) -> Result<Vec<Check>> {
    let tree = Tree::new(q)?;
    let kernels = Kernels::new(tree);
    let ts = [0.5, 1.0, 5.0, 20.0];
    Ok(vec![
        bessel_recurrence(&[0.1, 1.0, 10.0, 100.0], 50)?,
        normalization(&tree, &ts, &sample_vertices(&tree)),
        oracle_uniformization(&tree, &[0.5, 1.0, 2.0, 5.0], 6)?,
        oracle_monte_carlo(&tree, 100_000, seed)?,
        semigroup(&tree, 1.0, 1.0, 10, seed)?,
        sphere_closed_form_exact(&[q], 6, 4)?,
        kernel_bounds(&kernels, 100, 10.0)?,
        comparability(&tree, &[0.5, 1.0, 5.0, 20.0, 100.0], 60)?,
        comparability_z(&[0.5, 1.0, 5.0, 20.0, 100.0], 60)?,
        transition_operator(&tree),
        subordination(&[0.1, 1.0, 10.0, 100.0])?,
        poisson_domination(&kernels, 90, seed)?,
        atom_axioms(200, seed),
    ])
}
