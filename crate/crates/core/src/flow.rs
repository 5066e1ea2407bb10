//! Heat, Poisson and Riesz kernels for the flow Laplacian, and the maximal operators built on them.
//!
//! Every kernel here is radial: `H_t(x, y) = Q(x, y) J_t(d)` with
//! `Q = q^{-(l(x)+l(y)+d)/2}` and
//! `J_t(d) = (2/t) sum_k q^{-k} (d+2k+1) h^Z_t(d+2k+1)`.
//! The engine caches `J` on a global log-spaced time grid, one column per grid
//! time holding all distances computed so far.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::bessel::{miller_range, scaled_bessel_i, series, HANKEL_MIN_T, SERIES_MAX_T};
use crate::error::{Result, TreeError};
use crate::optim::golden_section_max;
use crate::quad::{integrate, QuadOptions};
use crate::scalar::SupResult;
use crate::sum::NeumaierSum;
use crate::tree::{Tree, Vertex};

/// Above this time a Miller sweep needs too many steps and orders are evaluated one by one.
const MILLER_MAX_T: f64 = 1e5;

/// Level and distance data that determine every radial kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub lx: i64,
    pub ly: i64,
    pub d: u32,
    pub t: f64,
}

impl KernelQuery {
    pub fn new(lx: i64, ly: i64, d: u32, t: f64) -> Result<Self> {
        let q = Self { lx, ly, d, t };
        q.validate()?;
        Ok(q)
    }

    pub fn from_vertices(x: &Vertex, y: &Vertex, t: f64) -> Result<Self> {
        Self::new(x.level(), y.level(), x.distance(y) as u32, t)
    }

    pub fn validate(&self) -> Result<()> {
        let diff = (self.lx - self.ly).unsigned_abs();
        if diff > u64::from(self.d) {
            return Err(TreeError::InvalidQuery(format!(
                "|lx - ly| = {diff} exceeds d = {}",
                self.d
            )));
        }
        if (diff + u64::from(self.d)) % 2 != 0 {
            return Err(TreeError::InvalidQuery(format!(
                "parity: lx - ly = {} and d = {} differ mod 2",
                self.lx - self.ly,
                self.d
            )));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(TreeError::InvalidTime(self.t));
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Self { lx: self.ly, ly: self.lx, ..*self }
    }
}

/// `Q = q^{-(lx+ly+d)/2}`; the exponent is an integer for any valid query.
pub fn q_factor(tree: &Tree, lx: i64, ly: i64, d: u32) -> f64 {
    q_power(tree, -(lx + ly + i64::from(d)) / 2)
}

pub(crate) fn q_power(tree: &Tree, e: i64) -> f64 {
    tree.qf().powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Number of `k` terms kept in the `J` series: the neglected tail is below `1e-17` of the first term.
pub fn series_terms(q: u32) -> u32 {
    let qf = f64::from(q);
    let mut k = 1u32;
    while qf.powi(-(k as i32)) * f64::from(2 * k + 3) * qf / (qf - 1.0) >= 1e-17 {
        k += 1;
    }
    k
}

/// `e^{-t} I_j(t)` for `j = 0..=top`.
pub fn scaled_bessel_range(top: u32, t: f64) -> Vec<f64> {
    if t == 0.0 {
        let mut v = vec![0.0; top as usize + 1];
        v[0] = 1.0;
        return v;
    }
    if t <= SERIES_MAX_T {
        let mut out = Vec::with_capacity(top as usize + 1);
        for j in 0..=top {
            let v = series(j, t);
            out.push(v);
            if v == 0.0 {
                out.resize(top as usize + 1, 0.0);
                break;
            }
        }
        out
    } else if t <= MILLER_MAX_T {
        miller_range(top, t)
    } else {
        (0..=top).map(|j| scaled_bessel_i(j, t)).collect()
    }
}

/// `J_t(d)` for `d = 0..=dmax`.
pub fn j_column(tree: &Tree, t: f64, dmax: u32) -> Vec<f64> {
    let n = dmax as usize + 1;
    if t == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    let kmax = series_terms(tree.q());
    let bess = scaled_bessel_range(dmax + 2 * kmax + 1, t);
    let inv_q = 1.0 / tree.qf();
    let weights: Vec<f64> = (0..=kmax).map(|k| inv_q.powi(k as i32)).collect();
    (0..n)
        .map(|d| {
            let mut s = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let j = d + 2 * k + 1;
                s += w * j as f64 * bess[j];
            }
            2.0 * s / t
        })
        .collect()
}

/// `e^{-t} I_j(t)` for `j = lo..=hi`.
///
/// Up to `t = 2000` a downward recurrence from above `hi` supplies the ratios and a
/// single direct evaluation at `lo` fixes the scale; beyond that each order is
/// evaluated directly.
pub fn scaled_bessel_window(lo: u32, hi: u32, t: f64) -> Vec<f64> {
    let n = (hi - lo) as usize + 1;
    if t == 0.0 {
        let mut v = vec![0.0; n];
        if lo == 0 {
            v[0] = 1.0;
        }
        return v;
    }
    if t <= SERIES_MAX_T || t > HANKEL_MIN_T {
        return (lo..=hi).map(|j| scaled_bessel_i(j, t)).collect();
    }
    let anchor = scaled_bessel_i(lo, t);
    let start = hi + 20 + (9.0 * t.sqrt()).ceil() as u32;
    let mut out = vec![0.0; n];
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    let two_over_t = 2.0 / t;
    let mut k = start;
    loop {
        if k <= hi {
            out[(k - lo) as usize] = cur;
        }
        if k == lo {
            break;
        }
        let prev = next + f64::from(k) * two_over_t * cur;
        next = cur;
        cur = prev;
        k -= 1;
        if cur > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = anchor / out[0];
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// `J_t(d)` for each `d` in `ds`, touching only the Bessel orders those distances need.
pub fn j_at(tree: &Tree, t: f64, ds: &[u32]) -> Vec<f64> {
    if t == 0.0 {
        return ds.iter().map(|&d| if d == 0 { 1.0 } else { 0.0 }).collect();
    }
    let (Some(&dmin), Some(&dmax)) = (ds.iter().min(), ds.iter().max()) else {
        return Vec::new();
    };
    let kmax = series_terms(tree.q());
    let lo = dmin + 1;
    let bess = scaled_bessel_window(lo, dmax + 2 * kmax + 1, t);
    let inv_q = 1.0 / tree.qf();
    ds.iter()
        .map(|&d| {
            let mut s = 0.0;
            let mut w = 1.0;
            for k in 0..=kmax {
                let j = d + 2 * k + 1;
                s += w * f64::from(j) * bess[(j - lo) as usize];
                w *= inv_q;
            }
            2.0 * s / t
        })
        .collect()
}

/// `J_t(d)` at a single point.
pub fn profile_j(tree: &Tree, t: f64, d: u32) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    Ok(j_at(tree, t, &[d])[0])
}

/// Tree heat kernel `h_t(d) = e^{-bt} q^{-d/2} J_{t(1-b)}(d)` (counting measure).
pub fn tree_heat_kernel(tree: &Tree, t: f64, d: u32) -> Result<f64> {
    let b = tree.b();
    let j = profile_j(tree, t * (1.0 - b), d)?;
    Ok((-b * t).exp() * tree.qf().powf(-0.5 * f64::from(d)) * j)
}

/// Flow heat kernel `H_t(x, y) = Q(x, y) J_t(d)`.
pub fn flow_heat_kernel(tree: &Tree, query: &KernelQuery) -> Result<f64> {
    query.validate()?;
    Ok(q_factor(tree, query.lx, query.ly, query.d) * profile_j(tree, query.t, query.d)?)
}

/// Subordination weight in `u = ln z`: `t (4 pi)^{-1/2} e^{-u/2} exp(-t^2 e^{-u} / 4)`.
pub fn subordination_weight(t: f64, u: f64) -> f64 {
    let ln = t.ln() - 0.5 * (4.0 * PI).ln() - 0.5 * u - 0.25 * t * t * (-u).exp();
    ln.exp()
}

/// Integration window in `u` outside which the subordinated integrand is negligible.
fn subordination_window(t: f64, d: u32) -> (f64, f64) {
    let lo = (t * t / 3200.0).ln();
    let scale = (t * t).max((f64::from(d) + 1.0).powi(2));
    (lo, scale.ln() + 20.0)
}

/// `int w_t(u) du`; equals 1 analytically.
pub fn subordination_mass(t: f64) -> Result<f64> {
    // without the decay of J the weight alone falls off like e^{-u/2}
    let (lo, _) = subordination_window(t, 0);
    let hi = (t * t).ln() + 90.0;
    let opts = QuadOptions { rel_tol: 1e-13, initial_panels: 32, ..Default::default() };
    Ok(integrate(|u| subordination_weight(t, u), lo, hi, opts)?.value)
}

/// Poisson kernel by subordination of the heat kernel, adaptive in `u = ln z`.
pub fn poisson_kernel(tree: &Tree, query: &KernelQuery, rel_tol: f64) -> Result<f64> {
    query.validate()?;
    if query.t == 0.0 {
        return Ok(if query.d == 0 { q_factor(tree, query.lx, query.ly, 0) } else { 0.0 });
    }
    let j = poisson_profile(tree, query.t, &[(query.d, 1.0)], rel_tol, 16)?;
    Ok(q_factor(tree, query.lx, query.ly, query.d) * j)
}

/// `int w_t(u) sum_i c_i J_{e^u}(d_i) du`.
pub fn poisson_profile(tree: &Tree, t: f64, terms: &[(u32, f64)], rel_tol: f64, panels: usize) -> Result<f64> {
    let dmax = terms.iter().map(|&(d, _)| d).max().unwrap_or(0);
    let ds: Vec<u32> = terms.iter().map(|&(d, _)| d).collect();
    let (lo, hi) = subordination_window(t, dmax);
    let opts = QuadOptions { rel_tol, abs_tol: 1e-300, initial_panels: panels, max_panels: 20_000 };
    let r = integrate(
        |u| {
            let js = j_at(tree, u.exp(), &ds);
            let s: f64 = terms.iter().zip(&js).map(|(&(_, c), j)| c * j).sum();
            subordination_weight(t, u) * s
        },
        lo,
        hi,
        opts,
    )?;
    Ok(r.value)
}

/// Discretisation of `sup_{t > 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGridPolicy {
    pub t_min: f64,
    /// Upper end of the window for distance 0; distance `d` uses `t_max (d+1)^2`.
    pub t_max: f64,
    pub points_per_decade: u32,
    /// Golden-section tolerance in `ln t`; `None` keeps the raw grid maximum.
    pub refine_tol: Option<f64>,
}

impl Default for TGridPolicy {
    fn default() -> Self {
        Self { t_min: 1e-3, t_max: 1e6, points_per_decade: 40, refine_tol: Some(1e-10) }
    }
}

impl TGridPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(TreeError::Config(format!("need 0 < t_min < t_max, got {} and {}", self.t_min, self.t_max)));
        }
        if self.points_per_decade < 10 {
            return Err(TreeError::Config("points_per_decade must be at least 10".into()));
        }
        Ok(())
    }
}

/// Multiplier applied to `|sum c_i J_t(d_i)|` before taking the supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeWeight {
    One,
    /// `d / t`
    DistanceOverT(f64),
}

impl TimeWeight {
    fn at(&self, t: f64) -> f64 {
        match *self {
            TimeWeight::One => 1.0,
            TimeWeight::DistanceOverT(d) => d / t,
        }
    }
}

/// Which part of `(0, inf)` the supremum runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeRange {
    All,
    /// `0 < t <= 1`
    Local,
}

/// Parameters of the Riesz-kernel quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszOptions {
    pub rel_tol: f64,
    pub initial_panels: usize,
    /// Far end of the explicit integration is `t_far * (d+1)^2`, at least `t_far`.
    pub t_far: f64,
}

impl Default for RieszOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, initial_panels: 16, t_far: 1e4 }
    }
}

/// Radial part of a Riesz-kernel value with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszProfile {
    pub value: f64,
    pub near: f64,
    pub far: f64,
    pub tail: f64,
    pub tail_exponent: f64,
}

type Column = Arc<Vec<f64>>;

/// Kernel engine: tree parameters, the time-grid policy and memoised profiles.
#[derive(Debug)]
pub struct Kernels {
    tree: Tree,
    policy: TGridPolicy,
    columns: RwLock<HashMap<i64, Column>>,
    riesz: RwLock<HashMap<(u32, bool), RieszProfile>>,
}

impl Clone for Kernels {
    fn clone(&self) -> Self {
        Self::with_policy(self.tree, self.policy).expect("policy already validated")
    }
}

impl Kernels {
    pub fn new(tree: Tree) -> Self {
        Self::with_policy(tree, TGridPolicy::default()).expect("default policy is valid")
    }

    pub fn with_policy(tree: Tree, policy: TGridPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            tree,
            policy,
            columns: RwLock::new(HashMap::new()),
            riesz: RwLock::new(HashMap::new()),
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn policy(&self) -> &TGridPolicy {
        &self.policy
    }

    /// Grid time with index `k`: `10^{k / ppd}`.
    pub fn grid_time(&self, k: i64) -> f64 {
        10f64.powf(k as f64 / f64::from(self.policy.points_per_decade))
    }

    /// Grid indices covering the window for distances up to `dmax`.
    pub fn grid_indices(&self, dmax: u32, range: TimeRange) -> std::ops::RangeInclusive<i64> {
        let ppd = f64::from(self.policy.points_per_decade);
        let lo = (self.policy.t_min.log10() * ppd).ceil() as i64;
        let hi = match range {
            TimeRange::All => {
                let top = self.policy.t_max * (f64::from(dmax) + 1.0).powi(2);
                (top.log10() * ppd).floor() as i64
            }
            TimeRange::Local => 0,
        };
        lo..=hi
    }

    /// Cached `J_{t_k}(d)` for `d = 0..=dmax` (the returned column may be longer).
    pub fn column(&self, k: i64, dmax: u32) -> Column {
        if let Some(c) = self.columns.read().expect("cache lock").get(&k) {
            if c.len() > dmax as usize {
                return Arc::clone(c);
            }
        }
        let old = self.columns.read().expect("cache lock").get(&k).map(|c| c.len()).unwrap_or(0);
        let want = (dmax as usize + 1).max(2 * old).max(64) as u32 - 1;
        let col = Arc::new(j_column(&self.tree, self.grid_time(k), want));
        let mut w = self.columns.write().expect("cache lock");
        let entry = w.entry(k).or_insert_with(|| Arc::clone(&col));
        if entry.len() < col.len() {
            *entry = Arc::clone(&col);
        }
        Arc::clone(entry)
    }

    pub fn flow_heat_kernel(&self, query: &KernelQuery) -> Result<f64> {
        flow_heat_kernel(&self.tree, query)
    }

    pub fn tree_heat_kernel(&self, t: f64, d: u32) -> Result<f64> {
        tree_heat_kernel(&self.tree, t, d)
    }

    pub fn poisson_kernel(&self, query: &KernelQuery) -> Result<f64> {
        poisson_kernel(&self.tree, query, 1e-10)
    }

    /// `sup_t |sum_i c_i J_t(d_i)| * weight(t)` over the policy grid, with `t = 0` included
    /// and golden-section refinement around the best grid point.
    pub fn sup_combination(&self, terms: &[(u32, f64)], weight: TimeWeight, range: TimeRange) -> SupResult {
        if terms.is_empty() || terms.iter().all(|&(_, c)| c == 0.0) {
            return SupResult { sup: 0.0, argmax_t: 0.0 };
        }
        let dmax = terms.iter().map(|&(d, _)| d).max().unwrap_or(0);
        let ds: Vec<u32> = terms.iter().map(|&(d, _)| d).collect();
        let eval_col = |col: &[f64]| -> f64 {
            let mut s = NeumaierSum::new();
            for &(d, c) in terms {
                s.add(c * col[d as usize]);
            }
            s.value().abs()
        };

        let mut best = SupResult { sup: 0.0, argmax_t: 0.0 };
        // t = 0: J_0(d) is the indicator of d = 0
        if let TimeWeight::One = weight {
            let at0: f64 = terms.iter().filter(|&&(d, _)| d == 0).map(|&(_, c)| c).sum();
            best.sup = at0.abs();
        }
        let indices = self.grid_indices(dmax, range);
        let (klo, khi) = (*indices.start(), *indices.end());
        let mut best_k = None;
        for k in indices {
            let t = self.grid_time(k);
            let v = eval_col(&self.column(k, dmax)) * weight.at(t);
            if v > best.sup {
                best = SupResult { sup: v, argmax_t: t };
                best_k = Some(k);
            }
        }
        if let (Some(tol), Some(k)) = (self.policy.refine_tol, best_k) {
            let lo = self.grid_time((k - 1).max(klo)).ln();
            let hi = self.grid_time((k + 1).min(khi)).ln();
            if hi > lo {
                let (u, v) = golden_section_max(
                    |u| {
                        let t = u.exp();
                        let js = j_at(&self.tree, t, &ds);
                        let mut s = NeumaierSum::new();
                        for (&(_, c), j) in terms.iter().zip(&js) {
                            s.add(c * j);
                        }
                        s.value().abs() * weight.at(t)
                    },
                    lo,
                    hi,
                    tol,
                );
                if v > best.sup {
                    best = SupResult { sup: v, argmax_t: u.exp() };
                }
            }
        }
        best
    }

    /// `sup_t H_t` (or `sup_t (d/t) H_t` when `weighted`) for the given levels and distance.
    pub fn heat_sup(&self, lx: i64, ly: i64, d: u32, weighted: bool) -> Result<SupResult> {
        KernelQuery::new(lx, ly, d, 0.0)?;
        let weight = if weighted { TimeWeight::DistanceOverT(f64::from(d)) } else { TimeWeight::One };
        let s = self.sup_combination(&[(d, 1.0)], weight, TimeRange::All);
        let qf = q_factor(&self.tree, lx, ly, d);
        Ok(SupResult { sup: qf * s.sup, argmax_t: s.argmax_t })
    }

    /// `sup_t |H_t(x, y) - H_t(x, p(y))|`, defined when `x` is not below `y`.
    pub fn grad_sup(&self, x: &Vertex, y: &Vertex) -> Result<SupResult> {
        if x.is_below(y) {
            return Err(TreeError::Hypothesis(format!("{x} lies below {y}")));
        }
        // p(y) is on the geodesic from y to x, so d(x, p(y)) = d - 1 and Q is unchanged
        let d = x.distance(y) as u32;
        let qf = q_factor(&self.tree, x.level(), y.level(), d);
        let s = self.sup_combination(&[(d, 1.0), (d - 1, -1.0)], TimeWeight::One, TimeRange::All);
        Ok(SupResult { sup: qf * s.sup, argmax_t: s.argmax_t })
    }

    /// Riesz kernel `int_0^inf t^{-1/2} (H_t(x, y) - H_t(p(x), y)) dt`.
    pub fn riesz_kernel(&self, x: &Vertex, y: &Vertex) -> Result<f64> {
        let d = x.distance(y) as u32;
        let below = y.is_below(x);
        let qf = q_factor(&self.tree, x.level(), y.level(), d);
        Ok(qf * self.riesz_profile(d, below)?.value)
    }

    /// Memoised radial part of the Riesz kernel with default options.
    pub fn riesz_profile(&self, d: u32, below: bool) -> Result<RieszProfile> {
        if let Some(p) = self.riesz.read().expect("cache lock").get(&(d, below)) {
            return Ok(*p);
        }
        let p = riesz_profile(&self.tree, d, below, RieszOptions::default())?;
        self.riesz.write().expect("cache lock").insert((d, below), p);
        Ok(p)
    }

    /// `sum_y H_t(x, y) f(y) mu(y)`.
    pub fn heat_apply(&self, f: &FinSuppFn, x: &Vertex, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(TreeError::InvalidTime(t));
        }
        let terms = self.heat_terms(f, x);
        let ds: Vec<u32> = terms.iter().map(|&(d, _)| d).collect();
        let js = j_at(&self.tree, t, &ds);
        Ok(terms.iter().zip(&js).map(|(&(_, c), j)| c * j).sum())
    }

    /// Coefficients `c_d` with `H_t f(x) = sum_d c_d J_t(d)`; `mu(y) Q(x, y) = q^{(ly - lx - d)/2}`.
    pub fn heat_terms(&self, f: &FinSuppFn, x: &Vertex) -> Vec<(u32, f64)> {
        let mut by_d: BTreeMap<u32, NeumaierSum> = BTreeMap::new();
        for (y, &v) in f.iter() {
            let d = x.distance(y);
            let e = (y.level() - x.level() - d as i64) / 2;
            by_d.entry(d as u32).or_default().add(v * q_power(&self.tree, e));
        }
        by_d.into_iter().map(|(d, s)| (d, s.value())).collect()
    }

    /// `sup_{t > 0} |H_t f(x)|`.
    pub fn maximal_heat(&self, f: &FinSuppFn, x: &Vertex) -> f64 {
        self.sup_combination(&self.heat_terms(f, x), TimeWeight::One, TimeRange::All).sup
    }

    /// `sup_{0 < t <= 1} |H_t f(x)|`.
    pub fn maximal_local(&self, f: &FinSuppFn, x: &Vertex) -> f64 {
        self.sup_combination(&self.heat_terms(f, x), TimeWeight::One, TimeRange::Local).sup
    }

    /// `sup_{t > 0} |P_t f(x)|`.
    ///
    /// Each `P_t` is a trapezoid sum in `u = ln z` over the cached heat grid, so the
    /// heat columns are shared between all `t`. Poisson times run over the same grid
    /// up to `sqrt(t_max) (d+1)`, and `t = 0` contributes `|f(x)|`.
    pub fn maximal_poisson(&self, f: &FinSuppFn, x: &Vertex) -> f64 {
        let terms = self.heat_terms(f, x);
        if terms.is_empty() {
            return 0.0;
        }
        let dmax = terms.iter().map(|&(d, _)| d).max().unwrap_or(0);
        let at0: f64 = terms.iter().filter(|&&(d, _)| d == 0).map(|&(_, c)| c).sum();
        let mut best = at0.abs();
        let ppd = f64::from(self.policy.points_per_decade);
        let du = std::f64::consts::LN_10 / ppd;
        let top = self.policy.t_max.sqrt() * (f64::from(dmax) + 1.0);
        let klo = (self.policy.t_min.log10() * ppd).ceil() as i64;
        let khi = (top.log10() * ppd).floor() as i64;
        let mut cache: HashMap<i64, f64> = HashMap::new();
        for kp in klo..=khi {
            let t = self.grid_time(kp);
            let (ulo, uhi) = subordination_window(t, dmax);
            let jlo = (ulo / du).floor() as i64;
            let jhi = (uhi / du).ceil() as i64;
            let mut acc = NeumaierSum::new();
            for j in jlo..=jhi {
                let hz = *cache.entry(j).or_insert_with(|| {
                    let col = self.column(j, dmax);
                    terms.iter().map(|&(d, c)| c * col[d as usize]).sum()
                });
                acc.add(subordination_weight(t, j as f64 * du) * hz);
            }
            best = best.max((acc.value() * du).abs());
        }
        best
    }

    /// `(1 / 2t) int_0^{2t} H_z f(x) dz`.
    pub fn ergodic_average(&self, f: &FinSuppFn, x: &Vertex, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(TreeError::InvalidTime(t));
        }
        let terms = self.heat_terms(f, x);
        let ds: Vec<u32> = terms.iter().map(|&(d, _)| d).collect();
        let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-300, initial_panels: 8, ..Default::default() };
        let r = integrate(
            |z| {
                let js = j_at(&self.tree, z, &ds);
                terms.iter().zip(&js).map(|(&(_, c), j)| c * j).sum()
            },
            0.0,
            2.0 * t,
            opts,
        )?;
        Ok(r.value / (2.0 * t))
    }
}

/// Radial Riesz integral `int_0^inf t^{-1/2} (J_t(d) - c J_t(d'))`, where `(c, d') = (1/q, d+1)`
/// when `y <= x` and `(1, d-1)` otherwise.
pub fn riesz_profile(tree: &Tree, d: u32, below: bool, opts: RieszOptions) -> Result<RieszProfile> {
    let (c, d2) = if below {
        (1.0 / tree.qf(), d + 1)
    } else if d == 0 {
        return Err(TreeError::InvalidQuery("y = x is below x".into()));
    } else {
        (1.0, d - 1)
    };
    let g = |t: f64| {
        let js = j_at(tree, t, &[d, d2]);
        js[0] - c * js[1]
    };
    let q_opts = QuadOptions {
        rel_tol: opts.rel_tol,
        abs_tol: 1e-300,
        initial_panels: opts.initial_panels,
        max_panels: 20_000,
    };
    // t = s^2 removes the endpoint singularity on (0, 1]
    let near = integrate(|s| 2.0 * g(s * s), 0.0, 1.0, q_opts)?.value;
    let t_far = opts.t_far * (f64::from(d) + 1.0).powi(2);
    let far = integrate(|u| (0.5 * u).exp() * g(u.exp()), 0.0, t_far.ln(), q_opts)?.value;
    let f_end = g(t_far) / t_far.sqrt();
    let f_prev = g(t_far / 10.0) / (t_far / 10.0).sqrt();
    let (tail, exponent) = if f_end == 0.0 {
        (0.0, -2.0)
    } else {
        let p = (f_end / f_prev).log10();
        if !p.is_finite() || (p + 2.0).abs() > 0.3 {
            return Err(TreeError::TailExtrapolation { exponent: p });
        }
        // fitted c / t^2 on the last decade integrates to c / T
        (f_end * t_far, p)
    };
    Ok(RieszProfile { value: near + far + tail, near, far, tail, tail_exponent: exponent })
}

/// Finitely supported function with its `mu`-mass `sum f mu` kept alongside.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FinSuppFn {
    entries: BTreeMap<Vertex, f64>,
    mass: f64,
}

impl FinSuppFn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(tree: &Tree, entries: impl IntoIterator<Item = (Vertex, f64)>) -> Self {
        let mut f = Self::new();
        for (v, x) in entries {
            *f.entries.entry(v).or_insert(0.0) += x;
        }
        f.entries.retain(|_, x| *x != 0.0);
        f.mass = f.recompute_mass(tree);
        f
    }

    pub fn delta(tree: &Tree, v: Vertex) -> Self {
        Self::from_entries(tree, [(v, 1.0)])
    }

    pub fn get(&self, v: &Vertex) -> f64 {
        self.entries.get(v).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vertex, &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored `sum f mu`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn recompute_mass(&self, tree: &Tree) -> f64 {
        let mut s = NeumaierSum::new();
        for (v, x) in &self.entries {
            s.add(x * tree.flow_measure(v).value(tree));
        }
        s.value()
    }

    /// `sum |f| mu`.
    pub fn l1_norm(&self, tree: &Tree) -> f64 {
        let mut s = NeumaierSum::new();
        for (v, x) in &self.entries {
            s.add(x.abs() * tree.flow_measure(v).value(tree));
        }
        s.value()
    }
}

/// `A f(x) = (1/2) ((1/q) sum_{s(x)} f + f(p(x)))`.
pub fn apply_a(tree: &Tree, f: &FinSuppFn, x: &Vertex) -> f64 {
    let sons: f64 = tree.sons(x).iter().map(|s| f.get(s)).sum();
    0.5 * (sons / tree.qf() + f.get(&x.predecessor()))
}

/// `L f(x) = f(x) - A f(x)`.
pub fn apply_l(tree: &Tree, f: &FinSuppFn, x: &Vertex) -> f64 {
    f.get(x) - apply_a(tree, f, x)
}
