//! Graph-theoretic sufficient conditions for identical synchronization.
//!
//! For every unordered node pair one minimal-length path is fixed; the load
//! `α_kl` of an edge is the summed length of the chosen paths through it. A
//! network synchronizes when every edge satisfies `a α_kl / n < ε_kl`, where
//! `ε_kl` is the symmetric coupling weight and `a` bounds the linearised
//! node dynamics (see [`estimate_constant_a`]).

use std::collections::{BTreeMap, VecDeque};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::network::{split_symmetric, CouplingMatrix};
use crate::scalar::Scalar;

/// Rule used to pick one path when several minimal paths join a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Lexicographically smallest node sequence from the lower-indexed node.
    #[default]
    Lexicographic,
    /// On an even ring `0-1-…-(n-1)-0`, the antipodal pair `(i, i + n/2)`
    /// runs forward (`i, i+1, …`) for even `i` and backward for odd `i`.
    /// Other graphs fall back to [`TieBreak::Lexicographic`].
    RingAlternating,
}

impl std::str::FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexicographic" => Ok(Self::Lexicographic),
            "ring_alternating" => Ok(Self::RingAlternating),
            other => Err(Error::InvalidParam(format!("unknown tie-break {other:?}"))),
        }
    }
}

/// Chosen minimal paths and the resulting per-edge loads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphaTable {
    pub n: usize,
    /// `α_kl` for every edge `(k, l)`, `k < l`. Non-edges are absent (zero).
    pub alpha: BTreeMap<(usize, usize), u64>,
    /// Chosen path `P_ij` for every pair `i < j`, from `i` to `j`.
    pub paths: BTreeMap<(usize, usize), Vec<usize>>,
}

impl AlphaTable {
    pub fn get(&self, k: usize, l: usize) -> u64 {
        let key = if k < l { (k, l) } else { (l, k) };
        self.alpha.get(&key).copied().unwrap_or(0)
    }

    pub fn max_alpha(&self) -> u64 {
        self.alpha.values().copied().max().unwrap_or(0)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Breadth-first distances from `src` on an unweighted adjacency list.
fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap_or(0);
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Detects the ring `0-1-…-(n-1)-0` (in label order) as the whole support.
fn is_label_ring(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    n >= 3
        && adj.iter().enumerate().all(|(i, nb)| {
            let mut want = vec![(i + 1) % n, (i + n - 1) % n];
            want.sort_unstable();
            nb.as_slice() == want.as_slice()
        })
}

fn ring_route(n: usize, from: usize, len: usize, forward: bool) -> Vec<usize> {
    (0..=len)
        .map(|s| if forward { (from + s) % n } else { (from + n - s) % n })
        .collect()
}

/// Computes `α_kl` with one chosen minimal path per pair.
pub fn alpha_coefficients<T: Scalar>(g: &CouplingMatrix<T>, tie_break: TieBreak) -> Result<AlphaTable> {
    let adj = g.adjacency();
    alpha_from_adjacency(&adj, tie_break)
}

/// [`alpha_coefficients`] on an explicit undirected adjacency list.
pub fn alpha_from_adjacency(adj: &[Vec<usize>], tie_break: TieBreak) -> Result<AlphaTable> {
    let n = adj.len();
    let ring_mode = tie_break == TieBreak::RingAlternating && n % 2 == 0 && is_label_ring(adj);
    let half = n / 2;
    let mut paths = BTreeMap::new();
    for j in 0..n {
        // Distances to the target let the greedy walk stay on minimal paths.
        let to_j = bfs(adj, j);
        for i in 0..j {
            let Some(d) = to_j[i] else {
                let components = {
                    let mut c = 0;
                    let mut seen = vec![false; n];
                    for s in 0..n {
                        if !seen[s] {
                            c += 1;
                            for (v, dv) in bfs(adj, s).into_iter().enumerate() {
                                if dv.is_some() {
                                    seen[v] = true;
                                }
                            }
                        }
                    }
                    c
                };
                return Err(Error::Disconnected { components });
            };
            let path = if ring_mode && j - i == half {
                ring_route(n, i, half, i % 2 == 0)
            } else {
                let mut path = Vec::with_capacity(d + 1);
                let mut cur = i;
                path.push(cur);
                while cur != j {
                    let dc = to_j[cur].unwrap_or(0);
                    cur = *adj[cur]
                        .iter()
                        .find(|&&w| to_j[w] == Some(dc - 1))
                        .expect("BFS predecessor exists");
                    path.push(cur);
                }
                path
            };
            paths.insert((i, j), path);
        }
    }
    let mut alpha = BTreeMap::new();
    for (a, nb) in adj.iter().enumerate() {
        for &b in nb {
            if a < b {
                alpha.insert((a, b), 0u64);
            }
        }
    }
    for path in paths.values() {
        let len = (path.len() - 1) as u64;
        for w in path.windows(2) {
            *alpha.entry(edge_key(w[0], w[1])).or_insert(0) += len;
        }
    }
    Ok(AlphaTable { n, alpha, paths })
}

/// Closed-form per-edge load on the unidirectional ring.
///
/// `n(n²−1)/24` for odd `n`, `n(n²+2)/24` when `n/2` is even, and
/// `n(n²+8)/24` when `n/2` is odd.
pub fn ring_alpha_closed_form(n: usize) -> Result<Ratio<i64>> {
    if n < 3 {
        return Err(Error::InvalidSize { min: 3, got: n });
    }
    let m = n as i64;
    let num = if n % 2 == 1 {
        m * (m * m - 1)
    } else if (n / 2) % 2 == 0 {
        m * (m * m + 2)
    } else {
        m * (m * m + 8)
    };
    Ok(Ratio::new(num, 24))
}

/// Each symmetric weight of a complete network must exceed `a / n`.
pub fn theoretical_threshold_complete<T: Num + FromPrimitive + Copy>(a_const: T, n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::InvalidSize { min: 2, got: n });
    }
    Ok(a_const / T::from_usize(n).expect("n representable"))
}

/// Ring strength `c` above which the unidirectional ring synchronizes.
pub fn theoretical_threshold_ring<T: Num + FromPrimitive + Copy>(a_const: T, n: usize) -> Result<T> {
    if n < 3 {
        return Err(Error::InvalidSize { min: 3, got: n });
    }
    let m = n as i64;
    let shift = if n % 2 == 1 {
        -1
    } else if (n / 2) % 2 == 0 {
        2
    } else {
        8
    };
    let factor = T::from_i64(m * m + shift).expect("representable");
    Ok(a_const * factor / T::from_i64(12).expect("representable"))
}

/// Per-edge evaluation of the path condition.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeReport<T> {
    pub k: usize,
    pub l: usize,
    pub epsilon: T,
    pub alpha: u64,
    pub required: T,
    pub margin: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdReport<T> {
    pub a_const: T,
    pub kappa: Option<T>,
    pub edges: Vec<EdgeReport<T>>,
    pub satisfied: bool,
    /// `min_edges (ε_kl − a α_kl / n)`.
    pub margin: T,
}

/// Checks `a α_kl / n < ε_kl` on every edge. `g` must be expressed with the
/// coupling outside the time-scale factor (divide a strength given inside
/// `ε u_t = …` by `ε` first, see [`CouplingMatrix::scaled`]).
pub fn check_sync_condition<T: Scalar>(
    g: &CouplingMatrix<T>,
    a_const: T,
    tie_break: TieBreak,
) -> Result<ThresholdReport<T>> {
    if !(a_const > T::zero()) {
        return Err(Error::InvalidParam(format!("a must be > 0, got {a_const}")));
    }
    let table = alpha_coefficients(g, tie_break)?;
    let split = split_symmetric(g);
    let n = T::from_count(g.n());
    let mut margin = T::infinity();
    let edges: Vec<EdgeReport<T>> = table
        .alpha
        .iter()
        .map(|(&(k, l), &alpha)| {
            let epsilon = split.epsilon(k, l);
            let required = a_const * T::from_u64(alpha).expect("alpha representable") / n;
            let m = epsilon - required;
            margin = margin.min(m);
            EdgeReport {
                k,
                l,
                epsilon,
                alpha,
                required,
                margin: m,
            }
        })
        .collect();
    Ok(ThresholdReport {
        a_const,
        kappa: None,
        edges,
        satisfied: margin > T::zero(),
        margin,
    })
}

/// Smallest strength `g` such that `pattern` scaled by `g / eps` satisfies the
/// path condition, for a strength placed inside `ε u_t = … + g Σ …`.
pub fn sufficient_strength<T: Scalar>(
    pattern: &CouplingMatrix<T>,
    a_const: T,
    eps: T,
    tie_break: TieBreak,
) -> Result<T> {
    let table = alpha_coefficients(pattern, tie_break)?;
    let n = T::from_count(pattern.n());
    let mut g = T::zero();
    for (&(k, l), &alpha) in &table.alpha {
        let need = eps * a_const * T::from_u64(alpha).expect("alpha representable")
            / (n * pattern.epsilon(k, l));
        g = g.max(need);
    }
    Ok(g)
}

/// Both sides of the path inequality `‖w_ij‖² ≤ k Σ_l ‖w_l‖²`, where the
/// `k` links `w_l` telescope to `w_ij = Σ_l w_l`. Returns `(lhs, rhs)`.
pub fn path_inequality<T: Scalar>(links: &[Vec<T>]) -> Result<(T, T)> {
    let dim = links.first().map_or(0, Vec::len);
    if links.is_empty() || links.iter().any(|w| w.len() != dim) {
        return Err(Error::Shape("need at least one link, all of equal dimension".into()));
    }
    let mut total = vec![T::zero(); dim];
    let mut sum_sq = T::zero();
    for w in links {
        for (t, &x) in total.iter_mut().zip(w) {
            *t = *t + x;
        }
        sum_sq = sum_sq + w.iter().map(|&x| x * x).sum::<T>();
    }
    let lhs = total.iter().map(|&x| x * x).sum::<T>();
    Ok((lhs, T::from_count(links.len()) * sum_sq))
}

/// Node constant for the FitzHugh–Nagumo node, returned as `(A, κ)`.
///
/// With `F_u = (3 − 3ū²)/ε`, `F_v = −1/ε` and `Φ_u = a`, the choice
/// `κ = b/2` and
/// `A = (3/ε)·max(1, sup_{|ū|≤M}(1 − ū²)) + (a − 1/ε)² / (2b)`
/// gives `F_u X₁² + F_v X₁X₂ + X₂(−b X₂ + a X₁) − A X₁² ≤ −κ X₂²` for all
/// `X` and all `|ū| ≤ M`.
pub fn estimate_constant_a<T: Scalar>(eps: T, a_param: T, b_param: T, sup_u: T) -> Result<(T, T)> {
    if !(b_param > T::zero()) {
        return Err(Error::DegenerateDamping(b_param.to_f64_lossy()));
    }
    if !(eps > T::zero()) || !(a_param > T::zero()) || !(sup_u >= T::zero()) {
        return Err(Error::InvalidParam(format!(
            "need eps > 0, a > 0, M >= 0; got eps = {eps}, a = {a_param}, M = {sup_u}"
        )));
    }
    let one = T::one();
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    // sup of 1 - u^2 over |u| <= M is attained at u = 0.
    let sup_shape = one;
    let kappa = b_param / two;
    let cross = a_param - eps.recip();
    let a_const = three / eps * one.max(sup_shape) + cross * cross / (two * b_param);
    Ok((a_const, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{complete_network, ring_unidirectional};

    fn five_node_example() -> Vec<Vec<usize>> {
        // Edges 1-2, 2-3, 2-4, 3-4, 4-5 (0-based here).
        let edges = [(0, 1), (1, 2), (1, 3), (2, 3), (3, 4)];
        let mut adj = vec![Vec::new(); 5];
        for (a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    #[test]
    fn path_inequality_is_tight_for_equal_links() {
        let links = vec![vec![1.0f64, -2.0]; 4];
        let (lhs, rhs) = path_inequality(&links).unwrap();
        assert_eq!(lhs, 80.0);
        assert_eq!(rhs, 80.0);
        let (lhs, rhs) = path_inequality(&[vec![1.0f64], vec![-1.0]]).unwrap();
        assert!(lhs == 0.0 && rhs == 4.0);
        assert!(path_inequality::<f64>(&[]).is_err());
    }

    #[test]
    fn five_node_example_paths_and_alpha() {
        let t = alpha_from_adjacency(&five_node_example(), TieBreak::Lexicographic).unwrap();
        assert_eq!(t.get(1, 2), 3);
        assert_eq!(t.paths[&(0, 4)], vec![0, 1, 3, 4]);
        assert_eq!(t.paths[&(2, 4)], vec![2, 3, 4]);
        assert_eq!(t.get(0, 4), 0);
    }

    #[test]
    fn ring_examples() {
        let r7 = ring_unidirectional(7, 1.0f64).unwrap();
        let t7 = alpha_coefficients(&r7, TieBreak::Lexicographic).unwrap();
        assert!(t7.alpha.values().all(|&a| a == 14));

        let r8 = ring_unidirectional(8, 1.0f64).unwrap();
        let t8 = alpha_coefficients(&r8, TieBreak::RingAlternating).unwrap();
        // Pair (1,5) runs 1-2-3-4-5 and pair (2,6) runs 2-1-8-7-6.
        assert_eq!(t8.paths[&(0, 4)], vec![0, 1, 2, 3, 4]);
        assert_eq!(t8.paths[&(1, 5)], vec![1, 0, 7, 6, 5]);
        let mean = t8.alpha.values().sum::<u64>() as f64 / 8.0;
        assert_eq!(mean, 22.0);
    }

    #[test]
    fn complete_graph_has_unit_alpha() {
        for n in 2..9 {
            let t = alpha_coefficients(&complete_network(n, 1.0f64).unwrap(), TieBreak::Lexicographic)
                .unwrap();
            assert_eq!(t.alpha.len(), n * (n - 1) / 2);
            assert!(t.alpha.values().all(|&a| a == 1));
        }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(ring_alpha_closed_form(7).unwrap(), Ratio::from_integer(14));
        assert_eq!(ring_alpha_closed_form(8).unwrap(), Ratio::from_integer(22));
        assert_eq!(ring_alpha_closed_form(6).unwrap(), Ratio::from_integer(11));
        assert!(ring_alpha_closed_form(2).is_err());
    }

    #[test]
    fn odd_and_half_odd_rings_match_closed_form_on_worst_edge() {
        for n in (3..=21).filter(|n| n % 2 == 1 || (n / 2) % 2 == 1) {
            let t = alpha_coefficients(&ring_unidirectional(n, 1.0f64).unwrap(), TieBreak::RingAlternating)
                .unwrap();
            assert_eq!(
                Ratio::from_integer(t.max_alpha() as i64),
                ring_alpha_closed_form(n).unwrap(),
                "n = {n}"
            );
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(theoretical_threshold_complete(1.0, 2).unwrap(), 0.5);
        assert_eq!(theoretical_threshold_complete(10.0, 5).unwrap(), 2.0);
        assert_eq!(theoretical_threshold_ring(12.0, 5).unwrap(), 24.0);
        assert_eq!(theoretical_threshold_ring(12.0, 8).unwrap(), 66.0);
        let r = theoretical_threshold_ring(Ratio::from_integer(12i64), 6).unwrap();
        assert_eq!(r, Ratio::from_integer(44));
    }

    #[test]
    fn complete_condition_flips_at_a_over_n() {
        for (g, ok) in [(0.24f64, false), (0.26, true)] {
            let m = complete_network(4, g).unwrap();
            let rep = check_sync_condition(&m, 1.0, TieBreak::Lexicographic).unwrap();
            assert_eq!(rep.satisfied, ok, "g = {g}");
            assert!((rep.margin - (g - 0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn ring3_condition_flips_at_eight() {
        for (c, ok) in [(7.9, false), (8.1, true)] {
            let m = ring_unidirectional(3, c).unwrap();
            let rep = check_sync_condition(&m, 12.0, TieBreak::Lexicographic).unwrap();
            assert_eq!(rep.satisfied, ok);
        }
        let tiny = check_sync_condition(&ring_unidirectional(5, 0.01).unwrap(), 1e-12, TieBreak::Lexicographic)
            .unwrap();
        assert!(tiny.satisfied);
    }

    #[test]
    fn sufficient_strength_complete() {
        let unit = complete_network(3, 1.0f64).unwrap();
        let g = sufficient_strength(&unit, 40530.0, 0.1, TieBreak::Lexicographic).unwrap();
        assert!((g - 0.1 * 40530.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_a_examples() {
        let (a, k) = estimate_constant_a(0.1f64, 1.0, 0.001, 2.0).unwrap();
        assert!((a - 40530.0).abs() < 1e-9);
        assert!((k - 0.0005).abs() < 1e-15);
        let (a, k) = estimate_constant_a(0.5f64, 2.0, 1.0, 3.0).unwrap();
        assert_eq!((a, k), (6.0, 0.5));
        let (a, _) = estimate_constant_a(1.0f64, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(a, 3.0);
        assert!(matches!(
            estimate_constant_a(0.1f64, 1.0, 0.0, 1.0),
            Err(Error::DegenerateDamping(_))
        ));
    }

    #[test]
    fn constant_a_is_monotone() {
        let base = estimate_constant_a(0.1f64, 1.0, 0.01, 1.0).unwrap().0;
        assert!(estimate_constant_a(0.1f64, 1.0, 0.01, 5.0).unwrap().0 >= base);
        assert!(estimate_constant_a(0.1f64, 1.0, 0.02, 1.0).unwrap().0 <= base);
    }
}
