//! Synchronization errors, the Lyapunov function and energy monitors.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{h1_seminorm_sq, l2_norm_sq, lq_norm, Field};
use crate::scalar::Scalar;
use crate::simulator::NetworkState;

/// Index of the pair `(i, j)`, `i < j`, in row-major upper-triangular order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn sq_distance<T: Scalar>(a: &Field<T>, b: &Field<T>) -> T {
    let nx = a.grid().nx();
    a.values()
        .chunks(nx)
        .zip(b.values().chunks(nx))
        .map(|(ra, rb)| {
            ra.iter().zip(rb).fold(T::zero(), |acc, (&x, &y)| {
                let d = x - y;
                acc + d * d
            })
        })
        .fold(T::zero(), |acc, r| acc + r)
        * a.grid().cell_area()
}

/// Squared pair distances `(|u_i − u_j|², |v_i − v_j|²)` for all `i < j`.
fn pair_sq_distances<T: Scalar>(state: &NetworkState<T>) -> Vec<(T, T)> {
    let n = state.n();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((
                sq_distance(state.u(i), state.u(j)),
                sq_distance(state.v(i), state.v(j)),
            ));
        }
    }
    out
}

/// Sum of consecutive full-state distances `Σ_i |U_i − U_{i+1}|` and the
/// distances `|U_i − U_j|` of all pairs `i < j` (see [`pair_index`]).
pub fn sync_error<T: Scalar>(state: &NetworkState<T>) -> (T, Vec<T>) {
    let n = state.n();
    let pairs: Vec<T> = pair_sq_distances(state)
        .into_iter()
        .map(|(du, dv)| (du + dv).sqrt())
        .collect();
    let total = (0..n.saturating_sub(1)).fold(T::zero(), |s, i| s + pairs[pair_index(n, i, i + 1)]);
    (total, pairs)
}

/// `V = Σ_i Σ_j (|u_j − u_i|² + |v_j − v_i|²)` over ordered pairs.
pub fn lyapunov_v<T: Scalar>(state: &NetworkState<T>) -> T {
    let s = pair_sq_distances(state)
        .into_iter()
        .fold(T::zero(), |acc, (du, dv)| acc + du + dv);
    s + s
}

/// Energy norms, each the maximum over nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energies<T> {
    /// `|u|₂²`
    pub l2_u: T,
    /// `|v|₂²`
    pub l2_v: T,
    /// `|∇u|₂²`
    pub h1_u: T,
    /// `sup |u|`
    pub max_abs_u: T,
    /// `|u|₄⁴`
    pub l4_u: T,
}

impl<T: Scalar> Energies<T> {
    pub fn measure(state: &NetworkState<T>) -> Self {
        let mut e = Self::default();
        for (u, v) in state.nodes() {
            e.l2_u = e.l2_u.max(l2_norm_sq(u));
            e.l2_v = e.l2_v.max(l2_norm_sq(v));
            e.h1_u = e.h1_u.max(h1_seminorm_sq(u));
            e.max_abs_u = e.max_abs_u.max(u.max_abs());
            e.l4_u = e.l4_u.max(lq_norm(u, 4).powi(4));
        }
        e
    }

    /// `sqrt(|u|₂² + |v|₂²)`, the state scale used by [`is_synchronized`].
    pub fn state_scale(&self) -> T {
        (self.l2_u + self.l2_v).sqrt()
    }
}

/// Diagnostics measured on one state.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample<T> {
    pub t: T,
    pub e_total: T,
    pub e_pairs: Vec<T>,
    /// `|u_i − u_j|` for all pairs, without the recovery variable.
    pub e_pairs_u: Vec<T>,
    pub v: T,
    pub energies: Energies<T>,
}

impl<T: Scalar> TraceSample<T> {
    pub fn measure(state: &NetworkState<T>) -> Self {
        let n = state.n();
        let sq = pair_sq_distances(state);
        let e_pairs: Vec<T> = sq.iter().map(|&(du, dv)| (du + dv).sqrt()).collect();
        let e_pairs_u = sq.iter().map(|&(du, _)| du.sqrt()).collect();
        let e_total = (0..n.saturating_sub(1)).fold(T::zero(), |s, i| s + e_pairs[pair_index(n, i, i + 1)]);
        let half_v = sq.iter().fold(T::zero(), |acc, &(du, dv)| acc + du + dv);
        Self {
            t: state.t,
            e_total,
            e_pairs,
            e_pairs_u,
            v: half_v + half_v,
            energies: Energies::measure(state),
        }
    }
}

/// Time series of synchronization diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SyncTrace<T> {
    pub n: usize,
    pub times: Vec<T>,
    pub e_total: Vec<T>,
    /// Per sample, `|U_i − U_{i+1}|` for `i = 1..n-1`.
    pub e_consecutive: Vec<Vec<T>>,
    /// Per sample, all pair distances; empty for traces read back from CSV.
    pub e_pairs: Vec<Vec<T>>,
    pub e_pairs_u: Vec<Vec<T>>,
    pub v: Vec<T>,
    pub energies: Vec<Energies<T>>,
}

/// Finite-horizon synchronization test: `e_total ≤ tol_rel · max(1, scale)`
/// on every sample of the final `window_frac` of the run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncCriterion {
    pub tol_rel: f64,
    pub window_frac: f64,
}

impl Default for SyncCriterion {
    fn default() -> Self {
        Self {
            tol_rel: 1e-3,
            window_frac: 0.1,
        }
    }
}

impl<T: Scalar> SyncTrace<T> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            times: Vec::new(),
            e_total: Vec::new(),
            e_consecutive: Vec::new(),
            e_pairs: Vec::new(),
            e_pairs_u: Vec::new(),
            v: Vec::new(),
            energies: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, s: TraceSample<T>) {
        let n = self.n;
        self.times.push(s.t);
        self.e_total.push(s.e_total);
        self.e_consecutive
            .push((0..n.saturating_sub(1)).map(|i| s.e_pairs[pair_index(n, i, i + 1)]).collect());
        self.e_pairs.push(s.e_pairs);
        self.e_pairs_u.push(s.e_pairs_u);
        self.v.push(s.v);
        self.energies.push(s.energies);
    }

    pub fn final_error(&self) -> Option<T> {
        self.e_total.last().copied()
    }

    fn tolerance_at(&self, k: usize, tol_rel: T) -> T {
        tol_rel * T::one().max(self.energies[k].state_scale())
    }

    /// First sample time from which the error stays within tolerance until
    /// the end of the trace.
    pub fn first_crossing(&self, criterion: &SyncCriterion) -> Option<T> {
        let tol = T::lit(criterion.tol_rel);
        let mut start = None;
        for k in 0..self.len() {
            if self.e_total[k] <= self.tolerance_at(k, tol) {
                start.get_or_insert(self.times[k]);
            } else {
                start = None;
            }
        }
        start
    }

    /// CSV with columns `t, e_total, e_1_2, …, e_{n-1}_n, V, l2_u, l2_v, h1_u,
    /// max_abs_u` (energies squared where applicable, max over nodes).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["t".to_string(), "e_total".to_string()];
        header.extend((1..self.n).map(|i| format!("e_{}_{}", i, i + 1)));
        header.extend(["V", "l2_u", "l2_v", "h1_u", "max_abs_u"].map(String::from));
        let _ = writeln!(out, "{}", header.join(","));
        for k in 0..self.len() {
            let mut row = vec![self.times[k], self.e_total[k]];
            row.extend(&self.e_consecutive[k]);
            let e = &self.energies[k];
            row.extend([self.v[k], e.l2_u, e.l2_v, e.h1_u, e.max_abs_u]);
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// [`SyncTrace::to_csv`] followed by a `# synchronized=… first_crossing=…` footer.
    pub fn to_csv_with_verdict(&self, criterion: &SyncCriterion) -> String {
        let mut out = self.to_csv();
        let verdict = is_synchronized(self, criterion.tol_rel, criterion.window_frac)
            .map(|b| b.to_string())
            .unwrap_or_else(|_| "undefined".into());
        let crossing = self
            .first_crossing(criterion)
            .map(|t| format!("{t}"))
            .unwrap_or_else(|| "none".into());
        let _ = writeln!(
            out,
            "# synchronized={verdict} first_crossing={crossing} tol_rel={} window_frac={}",
            criterion.tol_rel, criterion.window_frac
        );
        out
    }

    /// Reads a trace written by [`SyncTrace::to_csv`]. Pair distances beyond
    /// consecutive ones and `|u|₄⁴` are not carried by the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or(Error::EmptyTrace)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 7 || cols[0] != "t" || cols[1] != "e_total" {
            return Err(Error::Parse {
                line: 1,
                msg: "not a trace header".into(),
            });
        }
        let n = cols.len() - 7 + 1;
        let mut trace = SyncTrace::new(n);
        for (lineno, line) in lines {
            let vals = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", cols.len(), vals.len()),
                });
            }
            let m = n - 1;
            trace.times.push(vals[0]);
            trace.e_total.push(vals[1]);
            trace.e_consecutive.push(vals[2..2 + m].to_vec());
            trace.v.push(vals[2 + m]);
            trace.energies.push(Energies {
                l2_u: vals[3 + m],
                l2_v: vals[4 + m],
                h1_u: vals[5 + m],
                max_abs_u: vals[6 + m],
                l4_u: T::nan(),
            });
        }
        Ok(trace)
    }
}

/// True iff the trace stays within `tol_rel · max(1, |U|₂)` over the final
/// `window_frac` of its time span.
pub fn is_synchronized<T: Scalar>(trace: &SyncTrace<T>, tol_rel: f64, window_frac: f64) -> Result<bool> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(window_frac > 0.0 && window_frac <= 1.0) {
        return Err(Error::InvalidParam(format!("window_frac must lie in (0, 1], got {window_frac}")));
    }
    let t_last = trace.times[trace.len() - 1];
    let t_cut = t_last * T::lit(1.0 - window_frac);
    let tol = T::lit(tol_rel);
    Ok((0..trace.len())
        .filter(|&k| trace.times[k] >= t_cut || k + 1 == trace.len())
        .all(|k| trace.e_total[k] <= trace.tolerance_at(k, tol)))
}
