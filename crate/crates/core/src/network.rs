//! Connectivity matrices `G = (c_ik)` with non-negative off-diagonal entries
//! and vanishing row and column sums.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance on row and column sums.
pub const ZERO_SUM_RTOL: f64 = 1e-12;

/// Validated `n x n` coupling matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

/// `G = E + L` with `E` symmetric and `L` antisymmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSplit<T> {
    pub n: usize,
    pub sym: Vec<T>,
    pub anti: Vec<T>,
}

impl<T: Scalar> SymmetricSplit<T> {
    pub fn epsilon(&self, i: usize, k: usize) -> T {
        self.sym[i * self.n + k]
    }

    pub fn delta(&self, i: usize, k: usize) -> T {
        self.anti[i * self.n + k]
    }
}

impl<T: Scalar> CouplingMatrix<T> {
    /// Builds and validates a matrix from row-major entries.
    pub fn from_rows(n: usize, entries: Vec<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize { min: 2, got: n });
        }
        if entries.len() != n * n {
            return Err(Error::Shape(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        let m = Self { n, entries };
        m.validate()?;
        Ok(m)
    }

    /// `c_ik = g` for `i != k`, `c_ii = -(n-1) g`.
    pub fn complete(n: usize, g: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize { min: 2, got: n });
        }
        positive("coupling strength", g)?;
        Self::from_pattern(n, |i, k| i != k, g)
    }

    /// Unidirectional ring: `c_ii = -c`, `c_{i,i+1} = c` (indices mod n).
    pub fn ring_unidirectional(n: usize, c: T) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize { min: 3, got: n });
        }
        positive("coupling strength", c)?;
        Self::from_pattern(n, |i, k| k == (i + 1) % n, c)
    }

    fn from_pattern(n: usize, edge: impl Fn(usize, usize) -> bool, g: T) -> Result<Self> {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            let mut row = T::zero();
            for k in 0..n {
                if k != i && edge(i, k) {
                    entries[i * n + k] = g;
                    row = row + g;
                }
            }
            entries[i * n + i] = -row;
        }
        Self::from_rows(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> T {
        self.entries[i * self.n + k]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, &c| m.max(c.abs()))
    }

    /// Largest `|c_ii|`; bounds the spectral radius by twice this value.
    pub fn max_abs_diagonal(&self) -> T {
        (0..self.n).fold(T::zero(), |m, i| m.max(self.get(i, i).abs()))
    }

    /// Same pattern with every entry multiplied by `s >= 0`. `s = 0` yields the
    /// uncoupled network, which is kept as a valid (if disconnected) baseline.
    pub fn scaled(&self, s: T) -> Result<Self> {
        if !(s >= T::zero() && s.is_finite()) {
            return Err(Error::InvalidParam(format!("scale must be >= 0, got {s}")));
        }
        Ok(Self {
            n: self.n,
            entries: self.entries.iter().map(|&c| c * s).collect(),
        })
    }

    /// Symmetric weight `ε_ik = (c_ik + c_ki) / 2`.
    pub fn epsilon(&self, i: usize, k: usize) -> T {
        (self.get(i, k) + self.get(k, i)) * T::lit(0.5)
    }

    /// Undirected edges `(k, l)`, `k < l`, of the symmetric support `ε_kl > 0`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.n {
            for l in k + 1..self.n {
                if self.epsilon(k, l) > T::zero() {
                    out.push((k, l));
                }
            }
        }
        out
    }

    /// Adjacency lists of the symmetric support, sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (k, l) in self.edges() {
            adj[k].push(l);
            adj[l].push(k);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Relabels nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParam("not a permutation".into()));
        }
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                entries[i * n + k] = self.get(perm[i], perm[k]);
            }
        }
        Ok(Self { n, entries })
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if let Some(pos) = self.entries.iter().position(|c| !c.is_finite()) {
            return Err(Error::Assumption(format!(
                "non-finite entry at ({}, {})",
                pos / n + 1,
                pos % n + 1
            )));
        }
        for i in 0..n {
            for k in 0..n {
                let c = self.get(i, k);
                if i != k && c < T::zero() {
                    return Err(Error::Assumption(format!(
                        "negative off-diagonal entry c[{}][{}] = {c}",
                        i + 1,
                        k + 1
                    )));
                }
            }
        }
        let scale = self.max_abs();
        let rtol = T::lit(ZERO_SUM_RTOL).max(T::epsilon() * T::from_count(4 * n));
        let tol = rtol * scale;
        for i in 0..n {
            let row = (0..n).fold(T::zero(), |s, k| s + self.get(i, k));
            if row.abs() > tol {
                return Err(Error::Assumption(format!(
                    "row {} sums to {row}, not 0",
                    i + 1
                )));
            }
            let col = (0..n).fold(T::zero(), |s, k| s + self.get(k, i));
            if col.abs() > tol {
                return Err(Error::Assumption(format!(
                    "column {} sums to {col}, not 0",
                    i + 1
                )));
            }
        }
        let components = count_components(&self.adjacency());
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }

    /// Matrix file text: one line per row, space-separated decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# coupling matrix, n = {}", self.n);
        for row in self.entries.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|c| format!("{c}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn positive<T: Scalar>(what: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{what} must be > 0, got {x}")))
    }
}

fn count_components(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    components
}

pub fn complete_network<T: Scalar>(n: usize, g: T) -> Result<CouplingMatrix<T>> {
    CouplingMatrix::complete(n, g)
}

pub fn ring_unidirectional<T: Scalar>(n: usize, c: T) -> Result<CouplingMatrix<T>> {
    CouplingMatrix::ring_unidirectional(n, c)
}

pub fn split_symmetric<T: Scalar>(g: &CouplingMatrix<T>) -> SymmetricSplit<T> {
    let n = g.n();
    let half = T::lit(0.5);
    let mut sym = vec![T::zero(); n * n];
    let mut anti = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let (a, b) = (g.get(i, k), g.get(k, i));
            sym[i * n + k] = (a + b) * half;
            anti[i * n + k] = (a - b) * half;
        }
    }
    SymmetricSplit { n, sym, anti }
}

/// Parses and validates a matrix file: `n` lines of `n` decimals separated by
/// whitespace and/or commas; blank lines and `#` comments are ignored.
pub fn load_matrix<T: Scalar>(text: &str) -> Result<CouplingMatrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Shape(format!(
            "{n} rows but row {} has {} entries",
            i + 1,
            r.len()
        )));
    }
    CouplingMatrix::from_rows(n, rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complete_network_entries() {
        let g = complete_network(3, 0.1f64).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { -0.2 } else { 0.1 };
                assert!((g.get(i, k) - want).abs() < 1e-15);
            }
        }
        let g2 = complete_network(2, 1.0f64).unwrap();
        assert_eq!(g2.entries(), &[-1.0, 1.0, 1.0, -1.0]);
        assert!(matches!(
            complete_network(1, 1.0f64),
            Err(Error::InvalidSize { min: 2, got: 1 })
        ));
        assert!(complete_network(3, 0.0f64).is_err());
    }

    #[test]
    fn ring_entries_and_sums() {
        let g = ring_unidirectional(3, 1.0f64).unwrap();
        assert_eq!(g.entries(), &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0]);
        assert!(matches!(
            ring_unidirectional(2, 1.0f64),
            Err(Error::InvalidSize { min: 3, got: 2 })
        ));
        let big = ring_unidirectional(9, 0.3f64).unwrap();
        assert_eq!(big.epsilon(4, 5), 0.15);
        assert_eq!(big.edges().len(), 9);
    }

    #[test]
    fn split_of_ring() {
        let s = split_symmetric(&ring_unidirectional(3, 1.0f64).unwrap());
        assert_eq!(s.epsilon(0, 1), 0.5);
        assert_eq!(s.epsilon(1, 0), 0.5);
        assert_eq!(s.delta(0, 1), 0.5);
        assert_eq!(s.delta(1, 0), -0.5);
    }

    #[test]
    fn split_of_symmetric_has_no_antisymmetric_part() {
        let s = split_symmetric(&complete_network(5, 0.7f64).unwrap());
        assert!(s.anti.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn load_round_trip_and_errors() {
        let g = complete_network(3, 0.1f64).unwrap();
        assert_eq!(load_matrix::<f64>(&g.to_text()).unwrap(), g);

        let comma = "# c\n-1, 1\n\n1,-1\n";
        assert_eq!(load_matrix::<f64>(comma).unwrap().n(), 2);

        assert!(matches!(load_matrix::<f64>("1 2 3\n4 5 6\n"), Err(Error::Shape(_))));

        // Rows sum to zero, column 1 sums to 0.5.
        let bad_col = "-1 0.5 0.5\n0.5 -1 0.5\n1 0 -1\n";
        assert!(matches!(load_matrix::<f64>(bad_col), Err(Error::Assumption(_))));

        let negative = "1 -1\n-1 1\n";
        assert!(matches!(load_matrix::<f64>(negative), Err(Error::Assumption(_))));

        let blocks = "-1 1 0 0\n1 -1 0 0\n0 0 -2 2\n0 0 2 -2\n";
        assert!(matches!(
            load_matrix::<f64>(blocks),
            Err(Error::Disconnected { components: 2 })
        ));

        assert!(matches!(load_matrix::<f64>("1 x\n0 0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn complete_network_is_permutation_invariant() {
        let g = complete_network(6, 0.25f64).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        assert_eq!(g.permuted(&perm).unwrap(), g);
    }

    fn random_valid_matrix() -> impl Strategy<Value = CouplingMatrix<f64>> {
        // Sum of random weighted directed cycles: zero row and column sums.
        (3usize..8)
            .prop_flat_map(|n| {
                let cycles = prop::collection::vec(
                    (Just(n).prop_perturb(|n, mut rng| {
                        let mut p: Vec<usize> = (0..n).collect();
                        for i in (1..n).rev() {
                            p.swap(i, rng.random_range(0..=i));
                        }
                        p
                    }), 0.1f64..2.0),
                    1..4,
                );
                (Just(n), cycles)
            })
            .prop_map(|(n, cycles)| {
                let mut e = vec![0.0; n * n];
                for (p, w) in cycles {
                    for t in 0..n {
                        let (a, b) = (p[t], p[(t + 1) % n]);
                        e[a * n + b] += w;
                        e[a * n + a] -= w;
                    }
                }
                CouplingMatrix::from_rows(n, e).unwrap()
            })
    }

    proptest! {
        #[test]
        fn split_reconstructs_and_has_zero_row_sums(g in random_valid_matrix()) {
            let s = split_symmetric(&g);
            let n = g.n();
            let tol = 1e-15 * g.max_abs();
            for i in 0..n {
                let mut rs_e = 0.0;
                let mut rs_l = 0.0;
                for k in 0..n {
                    prop_assert!((s.epsilon(i, k) + s.delta(i, k) - g.get(i, k)).abs() <= tol);
                    prop_assert_eq!(s.epsilon(i, k), s.epsilon(k, i));
                    prop_assert_eq!(s.delta(i, k), -s.delta(k, i));
                    rs_e += s.epsilon(i, k);
                    rs_l += s.delta(i, k);
                }
                prop_assert!(rs_e.abs() < 1e-12 * g.max_abs() * n as f64);
                prop_assert!(rs_l.abs() < 1e-12 * g.max_abs() * n as f64);
            }
        }

        #[test]
        fn text_round_trip(g in random_valid_matrix()) {
            prop_assert_eq!(load_matrix::<f64>(&g.to_text()).unwrap(), g);
        }
    }
}
