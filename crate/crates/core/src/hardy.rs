//! Hardy-space objects on the tree: the level-0 labelling, the test functions `g_n`
//! and `g`, the BMO witness, atoms, and the scaling experiments comparing the
//! maximal, Riesz and atomic norms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};
use crate::flow::{FinSuppFn, Kernels, TimeRange, TimeWeight};
use crate::radial::{cone_classes, l1_norm_radial, ConeClass, TruncatedSum, TruncationPolicy};
use crate::sum::NeumaierSum;
use crate::tree::{Trapezoid, Tree, Vertex};

/// Level-0 vertex with label `i`: `o` for `i = 0`, otherwise the base-`q` digits of `i`
/// read as a word under `p^m(o)`, where `m` is the number of digits.
pub fn label_vertex(tree: &Tree, i: u64) -> Vertex {
    if i == 0 {
        return Vertex::origin();
    }
    let q = u64::from(tree.q());
    let mut digits = Vec::new();
    let mut n = i;
    while n > 0 {
        digits.push((n % q) as u32);
        n /= q;
    }
    digits.reverse();
    let m = digits.len() as u64;
    tree.vertex(m, digits).expect("leading digit is nonzero")
}

/// Inverse of [`label_vertex`]; `None` off level 0 or if the label overflows.
pub fn vertex_label(tree: &Tree, v: &Vertex) -> Option<u64> {
    if v.level() != 0 {
        return None;
    }
    let q = u64::from(tree.q());
    v.word().iter().try_fold(0u64, |acc, &d| acc.checked_mul(q)?.checked_add(u64::from(d)))
}

/// `m` with `n` in `[q^{m-1}, q^m - 1]` (so `|x_n| = 2m`); `0` for `n = 0`.
pub fn block_height(q: u32, n: u64) -> u64 {
    let q = u64::from(q);
    let mut m = 0;
    let mut n = n;
    while n > 0 {
        n /= q;
        m += 1;
    }
    m
}

/// `g_n = delta_{x_n} - delta_o`.
pub fn make_gn(tree: &Tree, n: u64) -> Result<FinSuppFn> {
    if n < 2 {
        return Err(TreeError::Config(format!("g_n needs n >= 2, got {n}")));
    }
    Ok(FinSuppFn::from_entries(tree, [(label_vertex(tree, n), 1.0), (Vertex::origin(), -1.0)]))
}

/// Value of `g` at `x_n` for `n >= q`: `1 / (n (ln n)^{3/2})`.
pub fn g_coefficient(n: u64) -> f64 {
    let nf = n as f64;
    1.0 / (nf * nf.ln().powf(1.5))
}

/// The function `g` truncated to labels `q <= n <= cutoff`, with `g(o) = c_0` making the mean zero.
pub fn make_g(tree: &Tree, cutoff: u64) -> Result<(FinSuppFn, f64)> {
    let q = u64::from(tree.q());
    if cutoff < q {
        return Err(TreeError::Config(format!("cutoff {cutoff} is below q = {q}")));
    }
    let mut c0 = NeumaierSum::new();
    let mut entries = Vec::with_capacity((cutoff - q + 2) as usize);
    for n in q..=cutoff {
        let c = g_coefficient(n);
        c0.add(-c);
        entries.push((label_vertex(tree, n), c));
    }
    let c0 = c0.value();
    entries.push((Vertex::origin(), c0));
    Ok((FinSuppFn::from_entries(tree, entries), c0))
}

/// The BMO witness: `h ln q` on `{x <= p^h(o), x not <= p^{h-1}(o)}` for `h >= 2`, `ln q` below `p(o)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmoWitness {
    pub tree: Tree,
}

impl BmoWitness {
    pub fn new(tree: Tree) -> Self {
        Self { tree }
    }

    fn at_height(&self, h: u64) -> f64 {
        h.max(1) as f64 * self.tree.ln_q()
    }

    pub fn value(&self, v: &Vertex) -> f64 {
        self.at_height(v.height())
    }

    /// The witness in units of `ln q`.
    pub fn units(&self, v: &Vertex) -> u64 {
        v.height().max(1)
    }

    /// `sum f g mu`, accumulated in units of `ln q` so integer cases come out exact.
    pub fn pairing(&self, g: &FinSuppFn) -> f64 {
        pairing(&self.tree, |v| self.units(v) as f64, g) * self.tree.ln_q()
    }

    /// `(1/mu(R)) sum_R |f - f_R| mu`, summed exactly by height classes.
    pub fn oscillation(&self, r: &Trapezoid) -> f64 {
        let (root, lo, hi) = match r {
            Trapezoid::Singleton(_) => return 0.0,
            Trapezoid::Band { root, h_lo, h_hi } => (root, *h_lo, *h_hi),
        };
        // every descendant of an off-ray vertex shares its height
        if !root.is_on_ray() {
            return 0.0;
        }
        let classes = self.height_classes(root.height(), lo, hi);
        let total: f64 = classes.iter().map(|&(_, w)| w).sum();
        let mut mean = NeumaierSum::new();
        for &(h, w) in &classes {
            mean.add(w * self.at_height(h));
        }
        let mean = mean.value() / total;
        let mut osc = NeumaierSum::new();
        for &(h, w) in &classes {
            osc.add(w * (self.at_height(h) - mean).abs());
        }
        osc.value() / total
    }

    /// `(height, mu-mass / q^k)` classes of `R_lo^hi(p^k(o))`.
    fn height_classes(&self, k: u64, lo: u32, hi: u32) -> Vec<(u64, f64)> {
        let q = self.tree.qf();
        let mut out = Vec::new();
        for delta in u64::from(lo)..u64::from(hi) {
            // leave the ray after j steps: (q-1) q^{delta-j-1} vertices of mass q^{k-delta}
            for j in 0..delta.min(k) {
                out.push((k - j, (q - 1.0) * q.powi(-(j as i32) - 1)));
            }
            if delta <= k {
                out.push((k - delta, q.powi(-(delta as i32))));
            } else {
                // all q^{delta-k} descendants of o at that depth
                out.push((0, q.powi(-(k as i32))));
            }
        }
        out
    }

    /// Largest oscillation over roots `p^k(o)`, `k <= max_root_height`, and admissible
    /// `h' < h'' <= max_h_hi`. A lower bound for the BMO norm.
    pub fn norm_estimate(&self, max_root_height: u64, max_h_hi: u32) -> f64 {
        let mut best = 0.0f64;
        for k in 0..=max_root_height {
            let root = Vertex::ray(k);
            for lo in 1..=max_h_hi / 2 {
                for hi in 2 * lo..=(12 * lo).min(max_h_hi) {
                    let r = Trapezoid::Band { root: root.clone(), h_lo: lo, h_hi: hi };
                    best = best.max(self.oscillation(&r));
                }
            }
        }
        best
    }
}

/// `sum f g mu`.
pub fn pairing<F: Fn(&Vertex) -> f64>(tree: &Tree, f: F, g: &FinSuppFn) -> f64 {
    let mut s = NeumaierSum::new();
    for (v, x) in g.iter() {
        s.add(f(v) * x * tree.flow_measure(v).value(tree));
    }
    s.value()
}

/// A `(1, inf)`-atom whose value depends only on the depth below the root.
///
/// `values[k]` is `a * mu(R)` on the level at depth `h' + k`; each such level has
/// mass `q^{l(root)}`, so the cancellation condition is `sum values = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub support: Trapezoid,
    pub values: Vec<f64>,
}

impl Atom {
    pub fn value_at(&self, tree: &Tree, v: &Vertex) -> f64 {
        if !self.support.contains(v) {
            return 0.0;
        }
        let depth = v.distance(self.support.root()) as u32;
        let k = (depth - self.support.depths().start) as usize;
        self.values[k] / tree.trapezoid_measure(&self.support).value(tree)
    }

    /// Checks support, size and cancellation.
    pub fn check(&self) -> Result<()> {
        let n = self.support.depths().len();
        if self.values.len() != n {
            return Err(TreeError::Hypothesis(format!("{} values for {n} levels", self.values.len())));
        }
        if let Some(v) = self.values.iter().find(|v| v.abs() > 1.0 + 1e-15) {
            return Err(TreeError::Hypothesis(format!("size bound violated: |a| mu(R) = {}", v.abs())));
        }
        let mean: f64 = crate::sum::compensated_sum(self.values.iter().copied());
        if mean.abs() > 1e-14 {
            return Err(TreeError::Hypothesis(format!("mean {mean:e} is not zero")));
        }
        Ok(())
    }

    /// Explicit vertex values; only sensible for small trapezoids.
    pub fn to_fin_supp(&self, tree: &Tree) -> FinSuppFn {
        let mut entries = Vec::new();
        for (_, level) in self.support.levels(tree) {
            for v in level {
                let a = self.value_at(tree, &v);
                entries.push((v, a));
            }
        }
        FinSuppFn::from_entries(tree, entries)
    }
}

/// Ranges for [`random_atom`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomRanges {
    pub root_heights: (u64, u64),
    pub h_lo: (u32, u32),
    pub h_hi_cap: u32,
}

/// Random radial atom: trapezoid sampled uniformly from the ranges, values uniform in
/// `[-1, 1]` per level, recentred to mean zero and rescaled so `max |a| = 1/mu(R)`.
pub fn random_atom<R: Rng>(rng: &mut R, ranges: &AtomRanges) -> Result<Atom> {
    let (k_lo, k_hi) = ranges.root_heights;
    let (a, b) = ranges.h_lo;
    if k_lo > k_hi || a == 0 || a > b || (2 * a).max(a + 2) > ranges.h_hi_cap {
        return Err(TreeError::Config(format!("infeasible atom ranges {ranges:?}")));
    }
    let k = rng.gen_range(k_lo..=k_hi);
    let lo = rng.gen_range(a..=b.min(ranges.h_hi_cap / 2).min(ranges.h_hi_cap - 2));
    // at least two levels, a one-level radial atom with zero mean vanishes
    let hi = rng.gen_range((2 * lo).max(lo + 2)..=(12 * lo).min(ranges.h_hi_cap));
    let support = Trapezoid::new(Vertex::ray(k), lo, hi)?;
    let mut values: Vec<f64> = (lo..hi).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mean = crate::sum::compensated_sum(values.iter().copied()) / values.len() as f64;
    for v in values.iter_mut() {
        *v -= mean;
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for v in values.iter_mut() {
            *v /= max;
        }
    }
    // recentre once more so rounding in the rescale does not leave a residual mean
    let residual = crate::sum::compensated_sum(values.iter().copied()) / values.len() as f64;
    for v in values.iter_mut() {
        *v -= residual;
    }
    let atom = Atom { support, values };
    atom.check()?;
    Ok(atom)
}

/// `||M_h a||_1` for a radial atom, by depth classes inside the root's subtree and
/// sphere classes outside it. Independent of the root by level homogeneity.
pub fn atom_maximal_norm(kernels: &Kernels, atom: &Atom, policy: &TruncationPolicy) -> (TruncatedSum, TruncatedSum) {
    let q = kernels.tree().qf();
    let lo = atom.support.depths().start as u64;
    let width = atom.values.len() as f64;
    let u = &atom.values;
    // x at depth s inside: y at depth delta with confluent at depth j; d = s + delta - 2j
    let inside = l1_norm_radial(
        |s| vec![s],
        |&s| {
            let mut coeff: std::collections::BTreeMap<u32, f64> = Default::default();
            for (k, &uk) in u.iter().enumerate() {
                let delta = lo + k as u64;
                for j in 0..=delta.min(s) {
                    let w = if j < delta.min(s) { (q - 1.0) / q } else { 1.0 };
                    *coeff.entry((s + delta - 2 * j) as u32).or_insert(0.0) += w * uk;
                }
            }
            let terms: Vec<(u32, f64)> = coeff.into_iter().collect();
            kernels.sup_combination(&terms, TimeWeight::One, TimeRange::All).sup / width
        },
        policy,
    );
    // x at distance big_d from the root, outside its subtree
    let outside = l1_norm_radial(
        |big_d| if big_d == 0 { vec![] } else { vec![big_d] },
        |&big_d| {
            let terms: Vec<(u32, f64)> = u.iter().enumerate().map(|(k, &uk)| ((big_d + lo + k as u64) as u32, uk)).collect();
            let mult = 1.0 + (big_d as f64 - 1.0) * (q - 1.0) / q;
            mult * kernels.sup_combination(&terms, TimeWeight::One, TimeRange::All).sup / width
        },
        policy,
    );
    (inside, outside)
}

/// `sup_t |H_t g_n(x)| * mu(x) * count` for a cone cell, with `x_n` as centre `a` and `o` as `b`.
fn gn_cell_value(kernels: &Kernels, c: &ConeClass) -> f64 {
    if c.d_to_a == c.d_to_b {
        // equal distances and levels: the two heat kernels cancel exactly
        return 0.0;
    }
    let tree = kernels.tree();
    let ln_q = tree.ln_q();
    // H_t g_n(x) = q^{-(lx + da)/2} (J(da) - q^{(da - db)/2} J(db))
    let rel = ((c.d_to_a as f64 - c.d_to_b as f64) / 2.0 * ln_q).exp();
    let terms = [(c.d_to_a as u32, 1.0), (c.d_to_b as u32, -rel)];
    let s = kernels.sup_combination(&terms, TimeWeight::One, TimeRange::All).sup;
    let ln_scale = ln_count(c) + c.level as f64 * ln_q - (c.level as f64 + c.d_to_a as f64) / 2.0 * ln_q;
    ln_scale.exp() * s
}

fn ln_count(c: &ConeClass) -> f64 {
    let bits = c.count.bits();
    if bits < 1000 {
        crate::radial::biguint_to_f64(&c.count).ln()
    } else {
        let shift = bits - 60;
        crate::radial::biguint_to_f64(&(&c.count >> shift)).ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// `||M_h g_n||_1` with `n = q^m - 1`; `M_h g_n` vanishes outside the cone `{x <= p^m(o)}`.
///
/// Cells at projections `i` and `2m - i` carry equal mass-weighted values (swap the
/// roles of `x_n` and `o`), and the middle projection is identically zero, so only
/// `i < m` is evaluated and doubled.
pub fn gn_maximal_norm(kernels: &Kernels, m: u64, policy: &TruncationPolicy) -> TruncatedSum {
    let tree = *kernels.tree();
    let half = l1_norm_radial(
        |r| cone_classes(&tree, m, r).into_iter().filter(|c| c.projection < m).collect(),
        |c| gn_cell_value(kernels, c),
        policy,
    );
    TruncatedSum { value: 2.0 * half.value, tail_estimate: 2.0 * half.tail_estimate, ..half }
}

/// Mass-weighted `M_h g_n` on one cone cell.
pub fn gn_maximal_cell(kernels: &Kernels, c: &ConeClass) -> f64 {
    gn_cell_value(kernels, c)
}

/// `|R g_n(x)| mu(x) count` for a cone cell; `R g_n(x) = R(x, x_n) - R(x, o)`.
fn gn_riesz_cell_value(kernels: &Kernels, m: u64, c: &ConeClass) -> Result<f64> {
    let tree = kernels.tree();
    let ln_q = tree.ln_q();
    let below_a = c.depth == 0 && c.projection <= m;
    let below_b = c.depth == 0 && c.projection >= m;
    let ra = kernels.riesz_profile(c.d_to_a as u32, below_a)?.value;
    let rb = kernels.riesz_profile(c.d_to_b as u32, below_b)?.value;
    // Q(x, x_n) = q^{-(lx + da)/2}, Q(x, o) = q^{-(lx + db)/2}
    let rel = ((c.d_to_a as f64 - c.d_to_b as f64) / 2.0 * ln_q).exp();
    let diff = (ra - rel * rb).abs();
    let ln_scale = ln_count(c) + c.level as f64 * ln_q - (c.level as f64 + c.d_to_a as f64) / 2.0 * ln_q;
    Ok(ln_scale.exp() * diff)
}

/// `||R g_n||_1` with `n = q^m - 1`.
pub fn gn_riesz_norm(kernels: &Kernels, m: u64, policy: &TruncationPolicy) -> Result<TruncatedSum> {
    let tree = *kernels.tree();
    // fill the profile cache up front so errors surface before the parallel sum
    let failure = std::sync::Mutex::new(None);
    let r = l1_norm_radial(
        |r| cone_classes(&tree, m, r),
        |c| match gn_riesz_cell_value(kernels, m, c) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().expect("error slot").get_or_insert(e);
                0.0
            }
        },
        policy,
    );
    match failure.into_inner().expect("error slot") {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// One row of the `g_n` scaling experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnRow {
    pub n: u64,
    pub m: u64,
    pub pairing: f64,
    pub norm: f64,
    pub ratio_loglog: f64,
    pub ratio_log: f64,
    pub converged: bool,
    pub radius: u64,
    pub tail_estimate: f64,
    pub eps: f64,
}

fn gn_row(tree: &Tree, m: u64, sum: &TruncatedSum, eps: f64) -> Result<GnRow> {
    let n = u64::from(tree.q()).checked_pow(m as u32).ok_or_else(|| TreeError::Config(format!("q^{m} overflows")))? - 1;
    let g = make_gn(tree, n)?;
    let f = BmoWitness::new(*tree);
    let pairing = f.pairing(&g);
    let nf = n as f64;
    Ok(GnRow {
        n,
        m,
        pairing,
        norm: sum.value,
        ratio_loglog: sum.value / nf.ln().ln(),
        ratio_log: sum.value / nf.ln(),
        converged: sum.converged,
        radius: sum.radius,
        tail_estimate: sum.tail_estimate,
        eps,
    })
}

/// Pairing with the BMO witness and `||M_h g_n||_1` for each `m` (`n = q^m - 1`).
pub fn exp_gn_scaling(kernels: &Kernels, m_list: &[u64], policy: &TruncationPolicy) -> Result<Vec<GnRow>> {
    m_list
        .iter()
        .map(|&m| gn_row(kernels.tree(), m, &gn_maximal_norm(kernels, m, policy), policy.eps))
        .collect()
}

/// Same as [`exp_gn_scaling`] for the Riesz transform.
pub fn exp_riesz_scaling(kernels: &Kernels, m_list: &[u64], policy: &TruncationPolicy) -> Result<Vec<GnRow>> {
    m_list
        .iter()
        .map(|&m| gn_row(kernels.tree(), m, &gn_riesz_norm(kernels, m, policy)?, policy.eps))
        .collect()
}

/// Summary of a batch of atoms with a common cap on `h''`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRow {
    pub h_hi_cap: u32,
    pub batch: u32,
    pub max_norm: f64,
    pub mean_norm: f64,
    pub argmax_seed: u64,
    pub all_converged: bool,
    pub max_tail_estimate: f64,
}

/// `max ||M_h a||_1` over seeded random atoms, one row per cap.
pub fn exp_atom_bound(kernels: &Kernels, batch: u32, caps: &[u32], seed: u64, policy: &TruncationPolicy) -> Result<Vec<AtomRow>> {
    let mut rows = Vec::new();
    for &cap in caps {
        let ranges = AtomRanges { root_heights: (0, 8), h_lo: (1, cap / 2), h_hi_cap: cap };
        let mut best = (0.0f64, 0u64);
        let mut mean = NeumaierSum::new();
        let mut all_converged = true;
        let mut max_tail = 0.0f64;
        for b in 0..u64::from(batch) {
            let s = seed.wrapping_add(b);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let atom = random_atom(&mut rng, &ranges)?;
            let (inside, outside) = atom_maximal_norm(kernels, &atom, policy);
            let v = inside.value + outside.value;
            all_converged &= inside.converged && outside.converged;
            max_tail = max_tail.max(inside.tail_estimate + outside.tail_estimate);
            mean.add(v);
            if v > best.0 {
                best = (v, s);
            }
        }
        rows.push(AtomRow {
            h_hi_cap: cap,
            batch,
            max_norm: best.0,
            mean_norm: mean.value() / f64::from(batch),
            argmax_seed: best.1,
            all_converged,
            max_tail_estimate: max_tail,
        });
    }
    Ok(rows)
}

/// `lambda mu{M_h g_n > lambda} / ||g_n||_1` at one `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeRow {
    pub n: u64,
    pub lambda: f64,
    pub level_set_mass: f64,
    pub statistic: f64,
}

/// Level sets of `M_h g_n` by cone cells; for each projection the branch depth is
/// scanned until the maximal function stays below the smallest `lambda` for
/// `stall` consecutive depths.
pub fn exp_weak_type(kernels: &Kernels, n_list: &[u64], lambdas: &[f64]) -> Result<Vec<WeakTypeRow>> {
    const STALL: u64 = 16;
    const MAX_DEPTH: u64 = 1 << 14;
    let tree = *kernels.tree();
    let ln_q = tree.ln_q();
    let lam_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lam_min > 0.0) {
        return Err(TreeError::Config("lambda grid must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let g = make_gn(&tree, n)?;
        let norm = g.l1_norm(&tree);
        let m = block_height(tree.q(), n);
        // masses of cells where M_h g_n exceeds each lambda
        let mut mass = vec![NeumaierSum::new(); lambdas.len()];
        for i in 0..=2 * m {
            let mut below = 0;
            for depth in 0..MAX_DEPTH {
                let cells = cone_classes(&tree, m, depth);
                let Some(c) = cells.iter().find(|c| c.projection == i) else { break };
                let (da, db) = (c.d_to_a as u32, c.d_to_b as u32);
                let value = if da == db {
                    0.0
                } else {
                    let rel = ((f64::from(da) - f64::from(db)) / 2.0 * ln_q).exp();
                    let s = kernels.sup_combination(&[(da, 1.0), (db, -rel)], TimeWeight::One, TimeRange::All).sup;
                    (-(c.level as f64 + f64::from(da)) / 2.0 * ln_q).exp() * s
                };
                let cell_mass = (ln_count(c) + c.level as f64 * ln_q).exp();
                for (acc, &lam) in mass.iter_mut().zip(lambdas) {
                    if value > lam {
                        acc.add(cell_mass);
                    }
                }
                if value <= lam_min {
                    below += 1;
                    if below >= STALL {
                        break;
                    }
                } else {
                    below = 0;
                }
            }
        }
        for (acc, &lam) in mass.iter().zip(lambdas) {
            rows.push(WeakTypeRow {
                n,
                lambda: lam,
                level_set_mass: acc.value(),
                statistic: lam * acc.value() / norm,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_base_q_digits() {
        let t = Tree::new(2).unwrap();
        assert_eq!(label_vertex(&t, 0), Vertex::origin());
        assert_eq!(label_vertex(&t, 5).to_string(), "3:1.0.1");
        for i in 0..300 {
            let v = label_vertex(&t, i);
            assert_eq!(v.level(), 0);
            assert_eq!(vertex_label(&t, &v), Some(i));
        }
    }

    #[test]
    fn gn_has_zero_mean_and_norm_two() {
        let t = Tree::new(3).unwrap();
        let g = make_gn(&t, 17).unwrap();
        assert_eq!(g.mass(), 0.0);
        assert_eq!(g.l1_norm(&t), 2.0);
    }

    #[test]
    fn witness_pairing_is_exact() {
        let t = Tree::new(2).unwrap();
        let f = BmoWitness::new(t);
        for m in 2..10u64 {
            let n = (1u64 << m) - 1;
            let p = f.pairing(&make_gn(&t, n).unwrap());
            assert_eq!(p, (m - 1) as f64 * 2f64.ln());
        }
    }

    #[test]
    fn off_ray_trapezoid_has_no_oscillation() {
        let t = Tree::new(2).unwrap();
        let f = BmoWitness::new(t);
        let r = Trapezoid::new(t.parse_vertex("4:1.1").unwrap(), 2, 4).unwrap();
        assert_eq!(f.oscillation(&r), 0.0);
        let on = Trapezoid::new(Vertex::ray(8), 2, 4).unwrap();
        assert!(f.oscillation(&on) > 0.0);
    }

    #[test]
    fn cone_cells_are_symmetric() {
        let t = Tree::new(2).unwrap();
        let k = Kernels::new(t);
        let m = 3;
        for depth in 0..4 {
            let cells = cone_classes(&t, m, depth);
            for c in &cells {
                let mirror = cells.iter().find(|o| o.projection == 2 * m - c.projection).unwrap();
                let (a, b) = (gn_maximal_cell(&k, c), gn_maximal_cell(&k, mirror));
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{c:?}");
                if c.projection == m {
                    assert_eq!(a, 0.0);
                }
            }
        }
    }

    #[test]
    fn random_atoms_satisfy_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ranges = AtomRanges { root_heights: (0, 5), h_lo: (1, 8), h_hi_cap: 16 };
        for _ in 0..50 {
            let a = random_atom(&mut rng, &ranges).unwrap();
            a.check().unwrap();
        }
    }
}
