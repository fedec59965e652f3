//! Finite groups with exact table arithmetic.
//!
//! Everything here is combinatorial: convolutions, translations, and
//! marginals are finite sums with no quadrature or interpolation error,
//! which makes this the reference setting for the discrete entropy
//! inequalities. A group is its Cayley table; construction validates the
//! whole contract (Latin square, identity at index 0, inverses,
//! associativity) rather than trusting the caller.

use crate::error::{Error, Result};
use crate::group::Side;
use crate::util::neumaier_sum;
use std::sync::Arc;

#[derive(Debug)]
pub struct FiniteGroup {
    name: String,
    n: usize,
    /// Row-major products: `table[a * n + b] = a . b`.
    table: Vec<usize>,
    inv: Vec<usize>,
}

impl FiniteGroup {
    /// Validate and adopt a Cayley table. Index 0 must be the identity.
    pub fn from_table(name: &str, rows: &[Vec<usize>]) -> Result<Arc<Self>> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCayleyTable {
                what: "table is not square".into(),
            });
        }
        let mut table = Vec::with_capacity(n * n);
        for r in rows {
            for &v in r {
                if v >= n {
                    return Err(Error::InvalidCayleyTable {
                        what: format!("entry {v} out of range for order {n}"),
                    });
                }
                table.push(v);
            }
        }
        // Latin square: every row and column is a permutation.
        for i in 0..n {
            let mut row = vec![false; n];
            let mut col = vec![false; n];
            for j in 0..n {
                row[table[i * n + j]] = true;
                col[table[j * n + i]] = true;
            }
            if row.iter().any(|v| !v) || col.iter().any(|v| !v) {
                return Err(Error::InvalidCayleyTable {
                    what: format!("row or column {i} is not a permutation"),
                });
            }
        }
        // Identity at index 0, two-sided.
        for a in 0..n {
            if table[a] != a || table[a * n] != a {
                return Err(Error::InvalidCayleyTable {
                    what: "index 0 is not a two-sided identity".into(),
                });
            }
        }
        // Inverses.
        let mut inv = vec![usize::MAX; n];
        for a in 0..n {
            for b in 0..n {
                if table[a * n + b] == 0 {
                    if table[b * n + a] != 0 {
                        return Err(Error::InvalidCayleyTable {
                            what: format!("element {a} has only a one-sided inverse"),
                        });
                    }
                    inv[a] = b;
                }
            }
        }
        if inv.iter().any(|&v| v == usize::MAX) {
            return Err(Error::InvalidCayleyTable {
                what: "missing inverse".into(),
            });
        }
        // Full associativity sweep; O(n^3) but exact.
        for a in 0..n {
            for b in 0..n {
                let ab = table[a * n + b];
                for c in 0..n {
                    if table[ab * n + c] != table[a * n + table[b * n + c]] {
                        return Err(Error::InvalidCayleyTable {
                            what: format!("({a}.{b}).{c} differs from {a}.({b}.{c})"),
                        });
                    }
                }
            }
        }
        Ok(Arc::new(Self {
            name: name.into(),
            n,
            table,
            inv,
        }))
    }

    /// Parse a whitespace-separated table (n^2 integers).
    pub fn from_text(name: &str, text: &str) -> Result<Arc<Self>> {
        let vals: Vec<usize> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad table entry {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let n = (vals.len() as f64).sqrt().round() as usize;
        if n * n != vals.len() || n == 0 {
            return Err(Error::Parse(format!(
                "expected a square table, got {} entries",
                vals.len()
            )));
        }
        let rows: Vec<Vec<usize>> = vals.chunks(n).map(|c| c.to_vec()).collect();
        Self::from_table(name, &rows)
    }

    pub fn cyclic(n: usize) -> Arc<Self> {
        let rows: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::from_table(&format!("Z{n}"), &rows).expect("cyclic table is a group")
    }

    /// Build a group of permutations (given as images) from generators by
    /// closure; elements are indexed in lexicographic order, which puts
    /// the identity at 0.
    fn from_permutations(name: &str, degree: usize, gens: &[Vec<usize>]) -> Arc<Self> {
        let id: Vec<usize> = (0..degree).collect();
        let mut els = vec![id];
        loop {
            let mut grew = false;
            let snapshot = els.clone();
            for p in &snapshot {
                for g in gens {
                    let q: Vec<usize> = (0..degree).map(|i| p[g[i]]).collect();
                    if !els.contains(&q) {
                        els.push(q);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        els.sort();
        let index = |p: &[usize]| els.iter().position(|e| e == p).unwrap();
        let rows: Vec<Vec<usize>> = els
            .iter()
            .map(|a| {
                els.iter()
                    .map(|b| {
                        let ab: Vec<usize> = (0..degree).map(|i| a[b[i]]).collect();
                        index(&ab)
                    })
                    .collect()
            })
            .collect();
        Self::from_table(name, &rows).expect("permutation closure is a group")
    }

    pub fn symmetric(degree: usize) -> Arc<Self> {
        assert!((2..=4).contains(&degree), "supported degrees: 2..=4");
        let mut gens = Vec::new();
        for i in 0..degree - 1 {
            let mut t: Vec<usize> = (0..degree).collect();
            t.swap(i, i + 1);
            gens.push(t);
        }
        Self::from_permutations(&format!("S{degree}"), degree, &gens)
    }

    /// Symmetries of the square (order 8), acting on corner labels.
    pub fn dihedral4() -> Arc<Self> {
        Self::from_permutations("D4", 4, &[vec![1, 2, 3, 0], vec![3, 2, 1, 0]])
    }

    /// Unit quaternions `{+-1, +-i, +-j, +-k}`.
    pub fn quaternion() -> Arc<Self> {
        // (w, x, y, z) with integer entries; exact Hamilton product.
        type Q = [i32; 4];
        let mul = |a: Q, b: Q| -> Q {
            [
                a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
            ]
        };
        let els: Vec<Q> = vec![
            [1, 0, 0, 0],
            [-1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, -1, 0, 0],
            [0, 0, 1, 0],
            [0, 0, -1, 0],
            [0, 0, 0, 1],
            [0, 0, 0, -1],
        ];
        let index = |q: Q| els.iter().position(|&e| e == q).unwrap();
        let rows: Vec<Vec<usize>> = els
            .iter()
            .map(|&a| els.iter().map(|&b| index(mul(a, b))).collect())
            .collect();
        Self::from_table("Q8", &rows).expect("quaternion table is a group")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.n + b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inv[a]
    }

    /// Closure of a generating set; errors if the input indices are bad.
    pub fn subgroup_closure(&self, gens: &[usize]) -> Result<Vec<usize>> {
        if gens.iter().any(|&g| g >= self.n) {
            return Err(Error::Config("generator index out of range".into()));
        }
        let mut member = vec![false; self.n];
        member[0] = true;
        let mut frontier = vec![0usize];
        while let Some(a) = frontier.pop() {
            for &g in gens {
                for b in [self.mul(a, g), self.mul(a, self.inv[g])] {
                    if !member[b] {
                        member[b] = true;
                        frontier.push(b);
                    }
                }
            }
        }
        Ok((0..self.n).filter(|&i| member[i]).collect())
    }

    pub fn is_subgroup(&self, els: &[usize]) -> bool {
        if !els.contains(&0) || els.iter().any(|&g| g >= self.n) {
            return false;
        }
        els.iter()
            .all(|&a| els.iter().all(|&b| els.contains(&self.mul(a, b))))
    }

    /// Partition into left cosets `gH` (side = Left) or right cosets `Hg`.
    /// Each class is sorted; classes are ordered by smallest member.
    pub fn cosets(&self, h: &[usize], side: Side) -> Result<Vec<Vec<usize>>> {
        if !self.is_subgroup(h) {
            return Err(Error::DecompositionNotAdmissible {
                what: "coset fiber is not a subgroup".into(),
            });
        }
        let mut seen = vec![false; self.n];
        let mut classes = Vec::new();
        for g in 0..self.n {
            if seen[g] {
                continue;
            }
            let mut class: Vec<usize> = h
                .iter()
                .map(|&x| match side {
                    Side::Left => self.mul(g, x),
                    Side::Right => self.mul(x, g),
                })
                .collect();
            class.sort_unstable();
            for &c in &class {
                seen[c] = true;
            }
            classes.push(class);
        }
        Ok(classes)
    }

    /// Partition into double cosets `KgH`, with the common fiber
    /// multiplicity `m = |K| |H| / |KgH|`. The entropy chain this feeds
    /// requires every fiber to have the same multiplicity; a decomposition
    /// with mixed class sizes is refused.
    pub fn double_cosets(&self, k: &[usize], h: &[usize]) -> Result<(Vec<Vec<usize>>, usize)> {
        if !self.is_subgroup(k) || !self.is_subgroup(h) {
            return Err(Error::DecompositionNotAdmissible {
                what: "double-coset factors must be subgroups".into(),
            });
        }
        let mut seen = vec![false; self.n];
        let mut classes = Vec::new();
        for g in 0..self.n {
            if seen[g] {
                continue;
            }
            let mut class = Vec::new();
            for &a in k {
                for &b in h {
                    let x = self.mul(self.mul(a, g), b);
                    if !seen[x] {
                        seen[x] = true;
                        class.push(x);
                    }
                }
            }
            class.sort_unstable();
            classes.push(class);
        }
        let size0 = classes[0].len();
        if classes.iter().any(|c| c.len() != size0) {
            return Err(Error::DecompositionNotAdmissible {
                what: format!(
                    "double cosets of {} have mixed sizes; the uniform-fiber chain does not apply",
                    self.name
                ),
            });
        }
        Ok((classes, k.len() * h.len() / size0))
    }
}

/// A probability vector on a finite group.
#[derive(Debug, Clone)]
pub struct FiniteDensity {
    group: Arc<FiniteGroup>,
    p: Vec<f64>,
}

impl FiniteDensity {
    /// Nonnegative weights, normalized to total mass 1.
    pub fn new(group: Arc<FiniteGroup>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != group.order() {
            return Err(Error::DimensionMismatch {
                expected: group.order(),
                got: weights.len(),
            });
        }
        if let Some((node, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, &v)| v < 0.0 || !v.is_finite())
        {
            return Err(Error::NegativeDensity { node, value });
        }
        let mass: f64 = weights.iter().sum();
        if mass <= 0.0 {
            return Err(Error::NotNormalizable { mass });
        }
        Ok(Self {
            group,
            p: weights.into_iter().map(|w| w / mass).collect(),
        })
    }

    pub fn uniform(group: Arc<FiniteGroup>) -> Self {
        let n = group.order();
        Self {
            group,
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(group: Arc<FiniteGroup>, g: usize) -> Self {
        let n = group.order();
        let mut p = vec![0.0; n];
        p[g] = 1.0;
        Self { group, p }
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// `(p * q)(g) = SUM_h p(h) q(h^-1 g)` — exact.
    pub fn convolve(&self, other: &FiniteDensity) -> Result<FiniteDensity> {
        if !Arc::ptr_eq(&self.group, &other.group) {
            return Err(Error::GridMismatch {
                what: "finite convolution needs one group",
            });
        }
        let g = &self.group;
        let n = g.order();
        let mut out = vec![0.0; n];
        for h in 0..n {
            if self.p[h] == 0.0 {
                continue;
            }
            for x in 0..n {
                out[g.mul(h, x)] += self.p[h] * other.p[x];
            }
        }
        Ok(FiniteDensity {
            group: self.group.clone(),
            p: out,
        })
    }

    /// Translate: left moves mass `p(g) -> p(h g)`; right `p(g) -> p(g h)`.
    pub fn translate(&self, h: usize, side: Side) -> FiniteDensity {
        let g = &self.group;
        let n = g.order();
        let mut out = vec![0.0; n];
        for x in 0..n {
            let y = match side {
                Side::Left => g.mul(h, x),
                Side::Right => g.mul(x, h),
            };
            out[y] = self.p[x];
        }
        FiniteDensity {
            group: self.group.clone(),
            p: out,
        }
    }

    pub fn invert(&self) -> FiniteDensity {
        let g = &self.group;
        let p = (0..g.order()).map(|x| self.p[g.inverse(x)]).collect();
        FiniteDensity {
            group: self.group.clone(),
            p,
        }
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        neumaier_sum(
            self.p
                .iter()
                .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 }),
        )
    }

    pub fn kl(&self, other: &FiniteDensity) -> Result<f64> {
        if !Arc::ptr_eq(&self.group, &other.group) {
            return Err(Error::GridMismatch {
                what: "divergence needs one group",
            });
        }
        let mut acc = Vec::with_capacity(self.p.len());
        for (&f, &g) in self.p.iter().zip(&other.p) {
            if f == 0.0 {
                continue;
            }
            if g == 0.0 {
                return Err(Error::SupportViolation { mass: f });
            }
            acc.push(f * (f / g).ln());
        }
        Ok(neumaier_sum(acc.into_iter()))
    }

    /// Marginal over a coset partition: one probability per class.
    pub fn coset_marginal(&self, h: &[usize], side: Side) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
        let classes = self.group.cosets(h, side)?;
        let m = classes
            .iter()
            .map(|c| c.iter().map(|&g| self.p[g]).sum())
            .collect();
        Ok((m, classes))
    }

    /// Marginal over a uniform-multiplicity double-coset partition.
    pub fn double_coset_marginal(
        &self,
        k: &[usize],
        h: &[usize],
    ) -> Result<(Vec<f64>, Vec<Vec<usize>>, usize)> {
        let (classes, m) = self.group.double_cosets(k, h)?;
        let marg = classes
            .iter()
            .map(|c| c.iter().map(|&g| self.p[g]).sum())
            .collect();
        Ok((marg, classes, m))
    }
}

/// Entropy of a bare probability vector (marginals).
pub fn vector_entropy(p: &[f64]) -> f64 {
    neumaier_sum(p.iter().map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 }))
}
