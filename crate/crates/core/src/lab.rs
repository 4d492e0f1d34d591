//! Minimal-coupling searches, parameter sweeps and least-squares fits of the
//! resulting scaling laws.
//!
//! A search scales a unit-strength coupling pattern by `g` and reruns the same
//! scenario (same seed, same initial condition) at every probe, so the
//! verdict is a deterministic function of `g`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::diagnostics::{is_synchronized, SyncCriterion};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::network::CouplingMatrix;
use crate::scalar::Scalar;
use crate::simulator::{run, InitialCondition, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Complete,
    Ring,
    File,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Complete => "complete",
            Self::Ring => "ring",
            Self::File => "file",
        })
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Self::Complete),
            "ring" => Ok(Self::Ring),
            "file" => Ok(Self::File),
            other => Err(Error::Config(format!("unknown topology `{other}`"))),
        }
    }
}

/// Coupling pattern family. `File` carries a unit-strength matrix of fixed size.
#[derive(Clone, Debug, PartialEq)]
pub enum Topology<T> {
    Complete,
    Ring,
    File(CouplingMatrix<T>),
}

impl<T: Scalar> Topology<T> {
    pub fn kind(&self) -> TopologyKind {
        match self {
            Self::Complete => TopologyKind::Complete,
            Self::Ring => TopologyKind::Ring,
            Self::File(_) => TopologyKind::File,
        }
    }

    /// The pattern on `n` nodes at strength `g`.
    pub fn build(&self, n: usize, g: T) -> Result<CouplingMatrix<T>> {
        match self {
            Self::Complete => CouplingMatrix::complete(n, T::one())?.scaled(g),
            Self::Ring => CouplingMatrix::ring_unidirectional(n, T::one())?.scaled(g),
            Self::File(m) if m.n() == n => m.scaled(g),
            Self::File(m) => Err(Error::Shape(format!(
                "matrix file has {} nodes, {n} requested",
                m.n()
            ))),
        }
    }
}

/// One probe of a threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub g: T,
    pub synchronized: bool,
    pub final_error: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMethod {
    Bisection,
    /// Bisection disagreed with its confirmation runs, or a scan was requested.
    Scan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdResult<T> {
    pub topology: TopologyKind,
    pub n: usize,
    pub g_star: T,
    /// `(g_lo_fail, g_hi_pass)`.
    pub bracket: (T, T),
    /// Every probe, in the order it was made.
    pub evaluations: Vec<Evaluation<T>>,
    pub method: SearchMethod,
}

/// Search window and verdict settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSearch<T> {
    pub g_lo: T,
    pub g_hi: T,
    pub resolution: T,
    pub criterion: SyncCriterion,
    /// Sweeps may double `g_hi` up to this many times when it fails to
    /// synchronize. [`find_threshold`] itself never widens.
    pub max_expansions: u32,
}

impl<T: Scalar> Default for ThresholdSearch<T> {
    fn default() -> Self {
        Self {
            g_lo: T::zero(),
            g_hi: T::lit(0.05),
            resolution: T::lit(1e-3),
            criterion: SyncCriterion::default(),
            max_expansions: 0,
        }
    }
}

impl<T: Scalar> ThresholdSearch<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_lo >= T::zero() && self.g_lo < self.g_hi && self.g_hi.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "need 0 <= g_lo < g_hi, got [{}, {}]",
                self.g_lo, self.g_hi
            )));
        }
        if !(self.resolution > T::zero() && self.resolution.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "resolution must be > 0, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Desk-scale scenario: 32x32 cells of unit spacing, `T = 300`, reference
/// parameters and at least 200 trace samples.
pub fn desk_config<T: Scalar>(coupling: CouplingMatrix<T>) -> SimConfig<T> {
    let grid = Grid::unit_spacing(32).expect("32 cells is a valid grid");
    let mut config = SimConfig::new(grid, coupling, T::lit(300.0));
    config.record_every = (config.steps() / 200).max(1);
    config
}

/// Runs `base` with its coupling scaled by `g`, remembering every verdict.
struct Probe<'a, T> {
    base: &'a SimConfig<T>,
    criterion: SyncCriterion,
    evaluations: Vec<Evaluation<T>>,
    cache: BTreeMap<u64, bool>,
}

fn cache_key<T: Scalar>(g: T) -> u64 {
    g.to_f64_lossy().to_bits()
}

impl<'a, T: Scalar> Probe<'a, T> {
    fn new(base: &'a SimConfig<T>, criterion: SyncCriterion) -> Self {
        Self {
            base,
            criterion,
            evaluations: Vec::new(),
            cache: BTreeMap::new(),
        }
    }

    fn record(&mut self, e: Evaluation<T>) {
        self.cache.insert(cache_key(e.g), e.synchronized);
        self.evaluations.push(e);
    }

    fn eval(&mut self, g: T) -> Result<bool> {
        if let Some(&s) = self.cache.get(&cache_key(g)) {
            return Ok(s);
        }
        let e = evaluate(self.base, g, &self.criterion)?;
        self.record(e);
        Ok(e.synchronized)
    }

    /// Evaluates the unseen points of `gs` concurrently, recorded in order.
    fn eval_all(&mut self, gs: &[T]) -> Result<()> {
        let mut todo: Vec<T> = gs
            .iter()
            .copied()
            .filter(|&g| !self.cache.contains_key(&cache_key(g)))
            .collect();
        todo.dedup();
        let (base, criterion) = (self.base, self.criterion);
        let fresh = todo
            .par_iter()
            .map(|&g| evaluate(base, g, &criterion))
            .collect::<Result<Vec<_>>>()?;
        fresh.into_iter().for_each(|e| self.record(e));
        Ok(())
    }

    fn finish(self, topology: TopologyKind, bracket: (T, T), method: SearchMethod) -> ThresholdResult<T> {
        ThresholdResult {
            topology,
            n: self.base.n(),
            g_star: bracket.1,
            bracket,
            evaluations: self.evaluations,
            method,
        }
    }
}

/// A single simulation of `base` at strength `g` (the base coupling is the
/// unit pattern).
pub fn evaluate<T: Scalar>(base: &SimConfig<T>, g: T, criterion: &SyncCriterion) -> Result<Evaluation<T>> {
    let mut config = base.clone();
    config.coupling = base.coupling.scaled(g)?;
    let out = run(&config).map_err(|f| f.error)?;
    let synchronized = is_synchronized(&out.trace, criterion.tol_rel, criterion.window_frac)?;
    Ok(Evaluation {
        g,
        synchronized,
        final_error: out.trace.final_error().ok_or(Error::EmptyTrace)?,
    })
}

fn bracket_error<T: Scalar>(g_lo: T, lo_sync: bool, g_hi: T, hi_sync: bool) -> Error {
    Error::Bracket {
        g_lo: g_lo.to_f64_lossy(),
        lo_sync,
        g_hi: g_hi.to_f64_lossy(),
        hi_sync,
    }
}

/// `(largest failing g, smallest passing g above it)` over a set of probes.
fn onset<T: Scalar>(evaluations: &[Evaluation<T>]) -> Option<(T, T)> {
    let last_fail = evaluations
        .iter()
        .filter(|e| !e.synchronized)
        .map(|e| e.g)
        .fold(None, |m: Option<T>, g| Some(m.map_or(g, |m| m.max(g))))?;
    let first_pass = evaluations
        .iter()
        .filter(|e| e.synchronized && e.g > last_fail)
        .map(|e| e.g)
        .fold(None, |m: Option<T>, g| Some(m.map_or(g, |m| m.min(g))))?;
    Some((last_fail, first_pass))
}

/// `g_lo, g_lo + resolution, ...`, closed by `g_hi`.
fn scan_points<T: Scalar>(search: &ThresholdSearch<T>) -> Vec<T> {
    let span = ((search.g_hi - search.g_lo) / search.resolution).to_f64_lossy();
    let count = (span - 1e-9).ceil().max(1.0) as usize;
    (0..=count)
        .map(|k| (search.g_lo + T::from_count(k) * search.resolution).min(search.g_hi))
        .collect()
}

fn check_endpoints<T: Scalar>(probe: &mut Probe<'_, T>, search: &ThresholdSearch<T>) -> Result<()> {
    let lo_sync = probe.eval(search.g_lo)?;
    let hi_sync = probe.eval(search.g_hi)?;
    if lo_sync || !hi_sync {
        return Err(bracket_error(search.g_lo, lo_sync, search.g_hi, hi_sync));
    }
    Ok(())
}

/// Bisection with confirmation; falls back to a scan of the window.
fn bisect<T: Scalar>(probe: &mut Probe<'_, T>, search: &ThresholdSearch<T>) -> Result<((T, T), SearchMethod)> {
    check_endpoints(probe, search)?;
    let (mut lo, mut hi) = (search.g_lo, search.g_hi);
    let two = T::lit(2.0);
    while hi - lo > search.resolution {
        let mid = (lo + hi) / two;
        if probe.eval(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let below = (hi - search.resolution).max(search.g_lo);
    if probe.eval(hi)? && !probe.eval(below)? {
        return Ok(((lo, hi), SearchMethod::Bisection));
    }
    probe.eval_all(&scan_points(search))?;
    let bracket = onset(&probe.evaluations).expect("a failing lower and passing upper end exist");
    Ok((bracket, SearchMethod::Scan))
}

/// Bisection for the smallest synchronizing strength in `[g_lo, g_hi]`.
///
/// `base.coupling` is the unit-strength pattern. The final bracket is
/// confirmed by runs at `g_star` and `g_star - resolution`; if either
/// contradicts the bracket, the window is rescanned exhaustively and the
/// threshold becomes the first probe above the largest failing one.
pub fn find_threshold<T: Scalar>(
    base: &SimConfig<T>,
    topology: TopologyKind,
    search: &ThresholdSearch<T>,
) -> Result<ThresholdResult<T>> {
    search.validate()?;
    let mut probe = Probe::new(base, search.criterion);
    let (bracket, method) = bisect(&mut probe, search)?;
    Ok(probe.finish(topology, bracket, method))
}

/// Exhaustive scan over `g_lo, g_lo + resolution, ...` up to `g_hi`, with the
/// runs executed concurrently. The threshold is the first grid point above
/// the last failing one, so every scanned `g >= g_star` synchronizes.
pub fn scan_threshold<T: Scalar>(
    base: &SimConfig<T>,
    topology: TopologyKind,
    search: &ThresholdSearch<T>,
) -> Result<ThresholdResult<T>> {
    search.validate()?;
    let mut probe = Probe::new(base, search.criterion);
    probe.eval_all(&scan_points(search))?;
    check_endpoints(&mut probe, search)?;
    let bracket = onset(&probe.evaluations).expect("a failing lower and passing upper end exist");
    Ok(probe.finish(topology, bracket, SearchMethod::Scan))
}

/// [`find_threshold`], doubling the upper end while it fails to synchronize
/// (at most `search.max_expansions` times). Each failed upper end becomes the
/// new lower end; probes are shared across attempts.
pub fn find_threshold_expanding<T: Scalar>(
    base: &SimConfig<T>,
    topology: TopologyKind,
    search: &ThresholdSearch<T>,
) -> Result<ThresholdResult<T>> {
    search.validate()?;
    let mut probe = Probe::new(base, search.criterion);
    let mut s = *search;
    let mut attempt = 0;
    loop {
        match bisect(&mut probe, &s) {
            Ok((bracket, method)) => return Ok(probe.finish(topology, bracket, method)),
            Err(Error::Bracket {
                lo_sync: false,
                hi_sync: false,
                ..
            }) if attempt < search.max_expansions => {
                attempt += 1;
                s.g_lo = s.g_hi;
                s.g_hi = s.g_hi * T::lit(2.0);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Outcome of one sweep point.
#[derive(Debug)]
pub struct SweepEntry<T> {
    /// `n` or `p`, depending on the sweep.
    pub key: f64,
    pub result: Result<ThresholdResult<T>>,
    pub wall_time: f64,
}

fn timed<T>(key: f64, f: impl FnOnce() -> Result<ThresholdResult<T>>) -> SweepEntry<T> {
    let start = Instant::now();
    let result = f();
    SweepEntry {
        key,
        result,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Independent threshold searches for each `n`, sharing every other setting
/// of `base`. Results come back sorted by `n`; a failing `n` records its error
/// and the sweep goes on.
pub fn sweep_n<T: Scalar>(
    topology: &Topology<T>,
    n_list: &[usize],
    base: &SimConfig<T>,
    search: &ThresholdSearch<T>,
) -> Result<Vec<SweepEntry<T>>> {
    if n_list.is_empty() {
        return Err(Error::InsufficientData("empty n list".into()));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns
        .par_iter()
        .map(|&n| {
            timed(n as f64, || {
                let mut config = base.clone();
                config.coupling = topology.build(n, T::one())?;
                find_threshold_expanding(&config, topology.kind(), search)
            })
        })
        .collect())
}

/// Threshold against the percentage `p` of nodes started from uniform noise
/// (the rest start homogeneous), at the node count of `base.coupling`.
pub fn sweep_p<T: Scalar>(
    topology: TopologyKind,
    p_list: &[T],
    base: &SimConfig<T>,
    search: &ThresholdSearch<T>,
) -> Result<Vec<SweepEntry<T>>> {
    if p_list.is_empty() {
        return Err(Error::InsufficientData("empty p list".into()));
    }
    Ok(p_list
        .par_iter()
        .map(|&p| {
            timed(p.to_f64_lossy(), || {
                let mut config = base.clone();
                config.ic = InitialCondition::Mixture { p_percent: p };
                find_threshold_expanding(&config, topology, search)
            })
        })
        .collect())
}

/// One parsed row of a sweep table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub key: f64,
    pub g_star: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub evaluations: usize,
    pub wall_time: f64,
}

/// Sweep table with `key_name` (`n` or `p`) as the first column. Failed
/// points are kept as `#` comment lines.
pub fn sweep_to_csv<T: Scalar>(key_name: &str, entries: &[SweepEntry<T>]) -> String {
    let mut out = format!("{key_name},g_star,bracket_lo,bracket_hi,evaluations,wall_time\n");
    for e in entries {
        match &e.result {
            Ok(r) => out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.key,
                r.g_star,
                r.bracket.0,
                r.bracket.1,
                r.evaluations.len(),
                e.wall_time
            )),
            Err(err) => out.push_str(&format!(
                "# {key_name}={} error: kind={} msg={}\n",
                e.key,
                err.kind(),
                err
            )),
        }
    }
    out
}

/// Reads a table written by [`sweep_to_csv`]; returns the key column name.
pub fn sweep_from_csv(text: &str) -> Result<(String, Vec<SweepRow>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or(Error::EmptyTrace)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 6 || cols[1..] != ["g_star", "bracket_lo", "bracket_hi", "evaluations", "wall_time"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected sweep header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(parse_err(format!("expected 6 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(format!("`{s}`: {e}")));
        rows.push(SweepRow {
            key: num(f[0])?,
            g_star: num(f[1])?,
            bracket_lo: num(f[2])?,
            bracket_hi: num(f[3])?,
            evaluations: f[4].parse().map_err(|e| parse_err(format!("`{}`: {e}", f[4])))?,
            wall_time: num(f[5])?,
        });
    }
    Ok((cols[0].to_string(), rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    /// `g = alpha / n + beta`
    InverseN,
    /// `g = a x^2 + b x + c`
    Quadratic,
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InverseN => "inverse_n",
            Self::Quadratic => "quadratic",
        })
    }
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_n" => Ok(Self::InverseN),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::Config(format!("unknown fit model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    /// `[alpha, beta]` or `[a, b, c]`.
    pub coefficients: Vec<f64>,
    pub rmse: f64,
    pub r_squared: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.model {
            FitModel::InverseN => c[0] / x + c[1],
            FitModel::Quadratic => (c[0] * x + c[1]) * x + c[2],
        }
    }

    pub fn to_csv(&self) -> String {
        let coeffs: Vec<String> = self.coefficients.iter().map(|c| c.to_string()).collect();
        format!(
            "model,coefficients,rmse,r_squared\n{},{},{},{}\n",
            self.model,
            coeffs.join(";"),
            self.rmse,
            self.r_squared
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let row = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .nth(1)
            .ok_or_else(|| Error::Parse {
                line: 2,
                msg: "missing fit row".into(),
            })?;
        let bad = |msg: String| Error::Parse { line: 2, msg };
        let f: Vec<&str> = row.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let model: FitModel = f[0].parse()?;
        let coefficients = f[1].split(';').map(num).collect::<Result<Vec<_>>>()?;
        let expected = if model == FitModel::InverseN { 2 } else { 3 };
        if coefficients.len() != expected {
            return Err(bad(format!("{model} needs {expected} coefficients")));
        }
        Ok(Self {
            model,
            coefficients,
            rmse: num(f[2])?,
            r_squared: num(f[3])?,
        })
    }

    fn with_residuals(model: FitModel, coefficients: Vec<f64>, points: &[(f64, f64)]) -> Self {
        let mut fit = Self {
            model,
            coefficients,
            rmse: 0.0,
            r_squared: 1.0,
        };
        let m = points.len() as f64;
        let mean = points.iter().map(|p| p.1).sum::<f64>() / m;
        let ss_res: f64 = points.iter().map(|&(x, y)| (y - fit.predict(x)).powi(2)).sum();
        let ss_tot: f64 = points.iter().map(|&(_, y)| (y - mean).powi(2)).sum();
        fit.rmse = (ss_res / m).sqrt();
        if ss_tot > 0.0 {
            fit.r_squared = 1.0 - ss_res / ss_tot;
        }
        fit
    }
}

/// Least squares for `g = alpha / n + beta` via the normal equations on the
/// regressor `1/n`.
pub fn fit_inverse_n(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "inverse_n fit needs >= 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, g)| !(n.is_finite() && n != 0.0 && g.is_finite())) {
        return Err(Error::InvalidParam("fit points must be finite with n != 0".into()));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - x_mean) * (p.1 - y_mean)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::InsufficientData("all points share one n; the regressor is degenerate".into()));
    }
    let alpha = sxy / sxx;
    let beta = y_mean - alpha * x_mean;
    Ok(FitResult::with_residuals(FitModel::InverseN, vec![alpha, beta], points))
}

/// Least squares for `g = a x^2 + b x + c`, solved by SVD of the design matrix.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if points.len() < 3 || distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "quadratic fit needs >= 3 distinct x, got {} points with {} distinct",
            points.len(),
            distinct.len()
        )));
    }
    if points.iter().any(|&(x, g)| !(x.is_finite() && g.is_finite())) {
        return Err(Error::InvalidParam("fit points must be finite".into()));
    }
    let design = DMatrix::from_fn(points.len(), 3, |r, c| points[r].0.powi(2 - c as i32));
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * f64::EPSILON * points.len() as f64;
    if svd.rank(tol) < 3 {
        return Err(Error::InsufficientData("quadratic design matrix is rank deficient".into()));
    }
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    Ok(FitResult::with_residuals(FitModel::Quadratic, sol.iter().copied().collect(), points))
}
