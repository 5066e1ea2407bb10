//! Combinatorial geometry of the homogeneous tree with a fixed mythical ancestor.
//!
//! Every vertex is addressed by canonical coordinates `(h, w)`: `h` is the least
//! `m` with `x <= p^m(o)` and `w` is the path of son indices leading down from
//! `p^h(o)`. Son index `0` of a ray vertex `p^{m+1}(o)` is the ray vertex
//! `p^m(o)` itself, so a canonical word under `p^h(o)` with `h > 0` never starts
//! with `0`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};

/// Branching data of `T_{q+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    q: u32,
}

impl Tree {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(TreeError::InvalidBranching(q));
        }
        Ok(Self { q })
    }

    /// Number of sons of every vertex.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn qf(&self) -> f64 {
        f64::from(self.q)
    }

    pub fn ln_q(&self) -> f64 {
        self.qf().ln()
    }

    /// Bottom of the `L^2(#)` spectrum of the combinatorial Laplacian, `(sqrt(q)-1)^2/(q+1)`.
    pub fn b(&self) -> f64 {
        let s = self.qf().sqrt() - 1.0;
        s * s / (self.qf() + 1.0)
    }

    /// Builds a canonical vertex, rejecting out-of-range letters and a leading `0`
    /// under a ray vertex other than the origin.
    pub fn vertex(&self, h: u64, word: Vec<u32>) -> Result<Vertex> {
        for (position, &letter) in word.iter().enumerate() {
            if letter >= self.q {
                return Err(TreeError::LetterOutOfRange {
                    position,
                    letter,
                    q: self.q,
                });
            }
        }
        Vertex::from_parts(h, word)
    }

    pub fn parse_vertex(&self, s: &str) -> Result<Vertex> {
        let v: Vertex = s.parse()?;
        self.vertex(v.h, v.word)
    }

    /// The `q` sons of `v`, in son-index order.
    pub fn sons(&self, v: &Vertex) -> Vec<Vertex> {
        (0..self.q).map(|j| self.son(v, j)).collect()
    }

    /// Son with index `j`; index `0` of a ray vertex above the origin is the ray child.
    pub fn son(&self, v: &Vertex, j: u32) -> Vertex {
        debug_assert!(j < self.q);
        if v.word.is_empty() && v.h > 0 {
            if j == 0 {
                Vertex::ray(v.h - 1)
            } else {
                Vertex {
                    h: v.h,
                    word: vec![j],
                }
            }
        } else {
            let mut word = v.word.clone();
            word.push(j);
            Vertex { h: v.h, word }
        }
    }

    pub fn navigate(&self, v: &Vertex) -> Navigation {
        Navigation {
            predecessor: v.predecessor(),
            sons: self.sons(v),
            level: v.level(),
        }
    }

    /// All `q + 1` neighbours: predecessor first, then sons.
    pub fn neighbours(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.q as usize + 1);
        out.push(v.predecessor());
        out.extend(self.sons(v));
        out
    }

    /// Flow measure `mu(v) = q^{level(v)}`, held as an exponent.
    pub fn flow_measure(&self, v: &Vertex) -> FlowWeight {
        FlowWeight::new(v.level())
    }

    /// `mu(R) = q^{level(root)} (h'' - h')`, or `mu(y)` for a singleton.
    pub fn trapezoid_measure(&self, r: &Trapezoid) -> ScaledMeasure {
        match r {
            Trapezoid::Singleton(y) => ScaledMeasure {
                weight: FlowWeight::new(y.level()),
                factor: 1.0,
            },
            Trapezoid::Band { root, h_lo, h_hi } => ScaledMeasure {
                weight: FlowWeight::new(root.level()),
                factor: (h_hi - h_lo) as f64,
            },
        }
    }

    /// Descendant of `v` reached by following the son indices in `path`.
    pub fn descend(&self, v: &Vertex, path: &[u32]) -> Vertex {
        path.iter().fold(v.clone(), |acc, &j| self.son(&acc, j))
    }

    /// Lazy enumeration of the `q^depth` descendants of `root` at the given depth.
    pub fn descendants_at(&self, root: &Vertex, depth: u32) -> Descendants {
        Descendants {
            tree: *self,
            root: root.clone(),
            digits: vec![0; depth as usize],
            done: false,
        }
    }
}

/// Result of [`Tree::navigate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Navigation {
    pub predecessor: Vertex,
    pub sons: Vec<Vertex>,
    pub level: i64,
}

/// A vertex in canonical coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    h: u64,
    word: Vec<u32>,
}

impl Vertex {
    fn from_parts(h: u64, word: Vec<u32>) -> Result<Self> {
        if h > 0 && word.first() == Some(&0) {
            return Err(TreeError::NonCanonical { h });
        }
        Ok(Self { h, word })
    }

    pub fn origin() -> Self {
        Self {
            h: 0,
            word: Vec::new(),
        }
    }

    /// `p^h(o)`.
    pub fn ray(h: u64) -> Self {
        Self {
            h,
            word: Vec::new(),
        }
    }

    pub fn height(&self) -> u64 {
        self.h
    }

    pub fn word(&self) -> &[u32] {
        &self.word
    }

    pub fn depth(&self) -> u64 {
        self.word.len() as u64
    }

    pub fn level(&self) -> i64 {
        self.h as i64 - self.word.len() as i64
    }

    /// Distance to the origin, `|x|`.
    pub fn norm(&self) -> u64 {
        self.h + self.word.len() as u64
    }

    pub fn is_on_ray(&self) -> bool {
        self.word.is_empty()
    }

    pub fn predecessor(&self) -> Vertex {
        if self.word.is_empty() {
            Vertex::ray(self.h + 1)
        } else {
            Vertex {
                h: self.h,
                word: self.word[..self.word.len() - 1].to_vec(),
            }
        }
    }

    /// `p^k(self)`.
    pub fn ancestor(&self, k: u64) -> Vertex {
        let len = self.word.len() as u64;
        if k <= len {
            Vertex {
                h: self.h,
                word: self.word[..(len - k) as usize].to_vec(),
            }
        } else {
            Vertex::ray(self.h + (k - len))
        }
    }

    /// The confluent `x ∧ y`: the common ancestor of minimal level.
    pub fn confluent(&self, other: &Vertex) -> Vertex {
        match self.h.cmp(&other.h) {
            Ordering::Less => Vertex::ray(other.h),
            Ordering::Greater => Vertex::ray(self.h),
            Ordering::Equal => {
                let common = self
                    .word
                    .iter()
                    .zip(&other.word)
                    .take_while(|(a, b)| a == b)
                    .count();
                Vertex {
                    h: self.h,
                    word: self.word[..common].to_vec(),
                }
            }
        }
    }

    pub fn distance(&self, other: &Vertex) -> u64 {
        let c = self.confluent(other);
        (2 * c.level() - self.level() - other.level()) as u64
    }

    /// Partial order `self <= other`, i.e. `other` lies on `[self, xi_0)`.
    pub fn is_below(&self, other: &Vertex) -> bool {
        if other.word.is_empty() {
            // other = p^k(o): self is below iff self.h <= k
            self.h <= other.h
        } else {
            self.h == other.h && self.word.starts_with(&other.word)
        }
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used for deterministic iteration; unrelated to the tree order.
impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.h
            .cmp(&other.h)
            .then_with(|| self.word.len().cmp(&other.word.len()))
            .then_with(|| self.word.cmp(&other.word))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.h)?;
        for (i, letter) in self.word.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{letter}")?;
        }
        Ok(())
    }
}

impl FromStr for Vertex {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: &str| TreeError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (h, w) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| parse_err("expected the form h:w1.w2..."))?;
        let h: u64 = h.parse().map_err(|_| parse_err("height is not a nonnegative integer"))?;
        let word = if w.is_empty() {
            Vec::new()
        } else {
            w.split('.')
                .map(|l| l.parse::<u32>().map_err(|_| parse_err("letter is not a nonnegative integer")))
                .collect::<Result<Vec<_>>>()?
        };
        Vertex::from_parts(h, word)
    }
}

/// `q^exponent`, evaluated only on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowWeight {
    pub exponent: i64,
}

impl FlowWeight {
    pub fn new(exponent: i64) -> Self {
        Self { exponent }
    }

    pub fn ln(&self, tree: &Tree) -> f64 {
        self.exponent as f64 * tree.ln_q()
    }

    /// Double-precision value; saturates to `inf`/`0` outside the representable range.
    pub fn value(&self, tree: &Tree) -> f64 {
        tree.qf().powi(self.exponent.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
    }

    pub fn mul(self, other: FlowWeight) -> FlowWeight {
        FlowWeight::new(self.exponent + other.exponent)
    }
}

/// `factor * q^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMeasure {
    pub weight: FlowWeight,
    pub factor: f64,
}

impl ScaledMeasure {
    pub fn value(&self, tree: &Tree) -> f64 {
        self.factor * self.weight.value(tree)
    }

    pub fn ln(&self, tree: &Tree) -> f64 {
        self.factor.ln() + self.weight.ln(tree)
    }
}

/// Admissible trapezoid `R_{h'}^{h''}(y_R) = {y <= y_R : h' <= d(y, y_R) < h''}` or a singleton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trapezoid {
    Singleton(Vertex),
    Band { root: Vertex, h_lo: u32, h_hi: u32 },
}

impl Trapezoid {
    /// Checks `h' >= 1` and `2 <= h''/h' <= 12`.
    pub fn new(root: Vertex, h_lo: u32, h_hi: u32) -> Result<Self> {
        if h_lo == 0 {
            return Err(TreeError::InvalidTrapezoid("h' must be positive".into()));
        }
        if h_hi < 2 * h_lo || h_hi > 12 * h_lo {
            return Err(TreeError::InvalidTrapezoid(format!(
                "h''/h' = {h_hi}/{h_lo} outside [2, 12]"
            )));
        }
        Ok(Trapezoid::Band { root, h_lo, h_hi })
    }

    pub fn root(&self) -> &Vertex {
        match self {
            Trapezoid::Singleton(y) => y,
            Trapezoid::Band { root, .. } => root,
        }
    }

    /// Depths below the root covered by the trapezoid.
    pub fn depths(&self) -> std::ops::Range<u32> {
        match self {
            Trapezoid::Singleton(_) => 0..1,
            Trapezoid::Band { h_lo, h_hi, .. } => *h_lo..*h_hi,
        }
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        match self {
            Trapezoid::Singleton(y) => v == y,
            Trapezoid::Band { root, h_lo, h_hi } => {
                v.is_below(root) && {
                    let d = v.distance(root);
                    d >= u64::from(*h_lo) && d < u64::from(*h_hi)
                }
            }
        }
    }

    /// Members grouped by depth below the root, produced lazily.
    pub fn levels<'a>(&'a self, tree: &'a Tree) -> impl Iterator<Item = (u32, Descendants)> + 'a {
        self.depths()
            .map(move |depth| (depth, tree.descendants_at(self.root(), depth)))
    }
}

/// Odometer over son-index paths of fixed length.
#[derive(Debug, Clone)]
pub struct Descendants {
    tree: Tree,
    root: Vertex,
    digits: Vec<u32>,
    done: bool,
}

impl Iterator for Descendants {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        if self.done {
            return None;
        }
        let out = self.tree.descend(&self.root, &self.digits);
        // advance, least significant digit last
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.tree.q {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> Tree {
        Tree::new(2).unwrap()
    }

    #[test]
    fn rejects_small_branching() {
        assert_eq!(Tree::new(1), Err(TreeError::InvalidBranching(1)));
    }

    #[test]
    fn origin_and_ray_points() {
        let tree = t2();
        let o = tree.vertex(0, vec![]).unwrap();
        assert_eq!(o.level(), 0);
        let p3 = tree.vertex(3, vec![]).unwrap();
        assert_eq!(p3.level(), 3);
        assert_eq!(p3, o.ancestor(3));
    }

    #[test]
    fn canonical_form_is_enforced() {
        let tree = t2();
        assert_eq!(
            tree.vertex(2, vec![0, 1]),
            Err(TreeError::NonCanonical { h: 2 })
        );
        // the origin has no ray child, so index 0 is a legal first letter
        assert!(tree.vertex(0, vec![0, 1]).is_ok());
        assert!(matches!(
            tree.vertex(1, vec![2]),
            Err(TreeError::LetterOutOfRange { position: 0, letter: 2, q: 2 })
        ));
    }

    #[test]
    fn level_and_norm_of_labelled_vertex() {
        let tree = t2();
        let x = tree.vertex(3, vec![1, 0, 1]).unwrap();
        assert_eq!(x.level(), 0);
        assert_eq!(x.norm(), 6);
        assert_eq!(x.distance(&Vertex::origin()), 6);
        assert_eq!(x.confluent(&Vertex::origin()), Vertex::ray(3));
    }

    #[test]
    fn sons_of_origin_and_ray_vertex() {
        let tree = t2();
        let o = Vertex::origin();
        assert_eq!(tree.navigate(&o).predecessor, Vertex::ray(1));
        assert_eq!(
            tree.sons(&o),
            vec![
                tree.vertex(0, vec![0]).unwrap(),
                tree.vertex(0, vec![1]).unwrap()
            ]
        );
        let sons = tree.sons(&Vertex::ray(2));
        assert_eq!(sons, vec![Vertex::ray(1), tree.vertex(2, vec![1]).unwrap()]);
        for s in &sons {
            assert_eq!(s.predecessor(), Vertex::ray(2));
            assert_eq!(s.level(), 1);
        }
    }

    #[test]
    fn confluent_of_siblings_is_parent() {
        let tree = t2();
        let a = tree.vertex(0, vec![0]).unwrap();
        let b = tree.vertex(0, vec![1]).unwrap();
        assert_eq!(a.confluent(&b), Vertex::origin());
        assert_eq!(a.confluent(&a), a);
        let c = tree.vertex(0, vec![0, 1]).unwrap();
        assert_eq!(c.distance(&b), 3);
    }

    #[test]
    fn text_form_round_trips() {
        let tree = t2();
        for s in ["0:", "3:", "3:1.0.1", "0:0.1.1"] {
            let v = tree.parse_vertex(s).unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!(matches!("3".parse::<Vertex>(), Err(TreeError::Parse { .. })));
        assert!(matches!("x:1".parse::<Vertex>(), Err(TreeError::Parse { .. })));
        assert!(matches!(tree.parse_vertex("1:0"), Err(TreeError::NonCanonical { .. })));
    }

    #[test]
    fn flow_measure_examples() {
        let tree = t2();
        assert_eq!(tree.flow_measure(&Vertex::origin()).value(&tree), 1.0);
        let root = Vertex::ray(3);
        let r = Trapezoid::new(root, 2, 4).unwrap();
        assert_eq!(tree.trapezoid_measure(&r).value(&tree), 16.0);
    }

    #[test]
    fn trapezoid_ratio_bounds() {
        assert!(Trapezoid::new(Vertex::origin(), 2, 3).is_err());
        assert!(Trapezoid::new(Vertex::origin(), 1, 13).is_err());
        assert!(Trapezoid::new(Vertex::origin(), 0, 2).is_err());
        assert!(Trapezoid::new(Vertex::origin(), 1, 12).is_ok());
    }

    #[test]
    fn trapezoid_member_count() {
        let tree = t2();
        let r = Trapezoid::new(Vertex::ray(2), 2, 5).unwrap();
        let mut n = 0u64;
        for (depth, members) in r.levels(&tree) {
            for v in members {
                assert!(r.contains(&v));
                assert_eq!(v.distance(r.root()), u64::from(depth));
                n += 1;
            }
        }
        assert_eq!(n, 4 + 8 + 16);
    }
}
