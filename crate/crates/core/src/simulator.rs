//! Explicit time integration of the coupled network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{SyncTrace, TraceSample};
use crate::error::{Error, Result};
use crate::fhn::{coupling_neighbors, evaluate_forcing, FhnParams, ForcingProfile};
use crate::grid::{laplacian_into, Field, Grid};
use crate::network::CouplingMatrix;
use crate::scalar::Scalar;

/// Below this many cell updates per step the node loop runs serially.
const PAR_MIN_WORK: usize = 1 << 15;

/// States `(u_i, v_i)` of all nodes at time `t`, on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState<T> {
    nodes: Vec<(Field<T>, Field<T>)>,
    pub t: T,
}

impl<T: Scalar> NetworkState<T> {
    pub fn new(nodes: Vec<(Field<T>, Field<T>)>) -> Result<Self> {
        let Some((u0, _)) = nodes.first() else {
            return Err(Error::InvalidSize { min: 1, got: 0 });
        };
        let grid = *u0.grid();
        for (i, (u, v)) in nodes.iter().enumerate() {
            if *u.grid() != grid || *v.grid() != grid {
                return Err(Error::GridMismatch(format!("node {} is on a different grid", i + 1)));
            }
        }
        Ok(Self { nodes, t: T::zero() })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn grid(&self) -> &Grid<T> {
        self.nodes[0].0.grid()
    }

    pub fn u(&self, i: usize) -> &Field<T> {
        &self.nodes[i].0
    }

    pub fn v(&self, i: usize) -> &Field<T> {
        &self.nodes[i].1
    }

    pub fn nodes(&self) -> &[(Field<T>, Field<T>)] {
        &self.nodes
    }

    pub fn all_finite(&self) -> bool {
        self.nodes.iter().all(|(u, v)| u.all_finite() && v.all_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition<T> {
    /// Spatially constant `(u, v)` per node; a single pair is broadcast.
    Homogeneous { values: Vec<(T, T)> },
    /// Independent uniforms in `[lo, hi)` for every cell of `u` and `v`.
    UniformRandom { lo: T, hi: T },
    /// Crossed half-plane broken-wave seed, rotated a quarter turn per node.
    SpiralSeed,
    /// The first `round(p n / 100)` nodes uniform in `[-1, 1)`, the others
    /// homogeneous at [`mixture_constant`].
    Mixture { p_percent: T },
}

impl<T: Scalar> Default for InitialCondition<T> {
    fn default() -> Self {
        Self::UniformRandom {
            lo: -T::one(),
            hi: T::one(),
        }
    }
}

impl<T: Scalar> InitialCondition<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Homogeneous { values } => {
                if values.len() != 1 && values.len() != n {
                    return Err(Error::Config(format!(
                        "homogeneous initial condition needs 1 or {n} (u, v) pairs, got {}",
                        values.len()
                    )));
                }
            }
            Self::UniformRandom { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::Config(format!("uniform range [{lo}, {hi}) is empty")));
                }
            }
            Self::SpiralSeed => {}
            Self::Mixture { p_percent } => {
                if !(*p_percent >= T::zero() && *p_percent <= T::lit(100.0)) {
                    return Err(Error::Config(format!("mixture p must lie in [0, 100], got {p_percent}")));
                }
            }
        }
        Ok(())
    }
}

/// Homogeneous state of node `i` (0-based) in a mixture of `n` nodes:
/// `u = -1.5 + 3 (i + 1/2) / n`, `v = 0`.
pub fn mixture_constant<T: Scalar>(i: usize, n: usize) -> (T, T) {
    let u = T::lit(-1.5) + T::lit(3.0) * (T::from_count(i) + T::lit(0.5)) / T::from_count(n);
    (u, T::zero())
}

/// Number of random nodes in a mixture: `round(p n / 100)`.
pub fn mixture_random_count<T: Scalar>(p_percent: T, n: usize) -> usize {
    (p_percent * T::from_count(n) / T::lit(100.0))
        .round()
        .to_usize()
        .unwrap_or(0)
        .min(n)
}

fn random_node<T: Scalar>(grid: &Grid<T>, seed: u64, node: usize, lo: T, hi: T) -> (Field<T>, Field<T>) {
    // One ChaCha stream per node: draws depend only on (seed, node, cell).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        u.push(T::lit(lo + (hi - lo) * rng.random::<f64>()));
        v.push(T::lit(lo + (hi - lo) * rng.random::<f64>()));
    }
    (
        Field::from_values(*grid, u).expect("sized"),
        Field::from_values(*grid, v).expect("sized"),
    )
}

fn spiral_node<T: Scalar>(grid: &Grid<T>, node: usize) -> (Field<T>, Field<T>) {
    let half = T::lit(0.5);
    let (cx, cy) = (grid.lx() * half, grid.ly() * half);
    let rotate = |x: T, y: T| {
        let (px, py) = (x - cx, y - cy);
        match node % 4 {
            0 => (px, py),
            1 => (-py, px),
            2 => (-px, -py),
            _ => (py, -px),
        }
    };
    let u = Field::from_fn(*grid, |x, y| {
        let (_, py) = rotate(x, y);
        if py < T::zero() {
            T::lit(1.8)
        } else {
            T::lit(-1.8)
        }
    });
    let v = Field::from_fn(*grid, |x, y| {
        let (px, _) = rotate(x, y);
        if px < T::zero() {
            T::lit(0.9)
        } else {
            T::lit(-0.9)
        }
    });
    (u, v)
}

pub fn make_initial<T: Scalar>(
    ic: &InitialCondition<T>,
    grid: &Grid<T>,
    n: usize,
    seed: u64,
) -> Result<NetworkState<T>> {
    ic.validate(n)?;
    let nodes: Vec<(Field<T>, Field<T>)> = (0..n)
        .into_par_iter()
        .map(|i| match ic {
            InitialCondition::Homogeneous { values } => {
                let (u, v) = if values.len() == 1 { values[0] } else { values[i] };
                (Field::constant(*grid, u), Field::constant(*grid, v))
            }
            InitialCondition::UniformRandom { lo, hi } => random_node(grid, seed, i, *lo, *hi),
            InitialCondition::SpiralSeed => spiral_node(grid, i),
            InitialCondition::Mixture { p_percent } => {
                if i < mixture_random_count(*p_percent, n) {
                    random_node(grid, seed, i, -T::one(), T::one())
                } else {
                    let (u, v) = mixture_constant(i, n);
                    (Field::constant(*grid, u), Field::constant(*grid, v))
                }
            }
        })
        .collect();
    NetworkState::new(nodes)
}

/// Largest explicit step allowed by diffusion and reaction stiffness:
/// `min(ε dx² dy² / (2 d_u (dx² + dy²)), ε/6) / 2`.
pub fn stability_max_dt<T: Scalar>(grid: &Grid<T>, params: &FhnParams<T>) -> T {
    let two = T::lit(2.0);
    let (dx2, dy2) = (grid.dx() * grid.dx(), grid.dy() * grid.dy());
    let diffusion = params.eps * dx2 * dy2 / (two * params.d_u * (dx2 + dy2));
    let reaction = params.eps / T::lit(6.0);
    diffusion.min(reaction) / two
}

/// Largest explicit step for the coupling term: `ε / (2 max_i |c_ii|)`.
///
/// Gershgorin bounds the coupling spectrum by `2 max |c_ii| / ε`; the factor
/// 2 is the same safety margin as in [`stability_max_dt`].
pub fn coupling_max_dt<T: Scalar>(g: &CouplingMatrix<T>, params: &FhnParams<T>) -> T {
    params.eps / (T::lit(2.0) * g.max_abs_diagonal())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig<T> {
    pub grid: Grid<T>,
    pub params: FhnParams<T>,
    pub forcing: ForcingProfile<T>,
    pub coupling: CouplingMatrix<T>,
    pub dt: T,
    pub t_end: T,
    pub ic: InitialCondition<T>,
    pub seed: u64,
    /// Steps between trace samples.
    pub record_every: usize,
    pub snapshot_times: Vec<T>,
}

impl<T: Scalar> SimConfig<T> {
    /// Reference parameters on `grid` with the given coupling, `dt = 0.005`.
    pub fn new(grid: Grid<T>, coupling: CouplingMatrix<T>, t_end: T) -> Self {
        Self {
            grid,
            params: FhnParams::reference(),
            forcing: ForcingProfile::default(),
            coupling,
            dt: T::lit(0.005),
            t_end,
            ic: InitialCondition::default(),
            seed: 0,
            record_every: 100,
            snapshot_times: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.coupling.n()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.forcing.validate()?;
        self.ic.validate(self.n())?;
        if !(self.dt > T::zero()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        let max_dt = stability_max_dt(&self.grid, &self.params).min(coupling_max_dt(&self.coupling, &self.params));
        if self.dt > max_dt {
            return Err(Error::Stability {
                dt: self.dt.to_f64_lossy(),
                max_dt: max_dt.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// Reusable forward-Euler integrator for one configuration.
pub struct Stepper<T> {
    grid: Grid<T>,
    params: FhnParams<T>,
    dt: T,
    forcing: Vec<T>,
    neighbors: Vec<Vec<(usize, T)>>,
    scratch: Vec<NodeScratch<T>>,
    step: usize,
}

struct NodeScratch<T> {
    lap: Vec<T>,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Stepper<T> {
    pub fn new(config: &SimConfig<T>) -> Self {
        let len = config.grid.len();
        Self {
            grid: config.grid,
            params: config.params,
            dt: config.dt,
            forcing: evaluate_forcing(&config.forcing, &config.grid).into_values(),
            neighbors: coupling_neighbors(&config.coupling),
            scratch: (0..config.n())
                .map(|_| NodeScratch {
                    lap: vec![T::zero(); len],
                    u: vec![T::zero(); len],
                    v: vec![T::zero(); len],
                })
                .collect(),
            step: 0,
        }
    }

    /// Advances `state` by one step in place.
    pub fn advance(&mut self, state: &mut NetworkState<T>) -> Result<()> {
        if state.n() != self.scratch.len() || *state.grid() != self.grid {
            return Err(Error::Shape("state does not match the stepper configuration".into()));
        }
        let Self {
            grid,
            params,
            dt,
            forcing,
            neighbors,
            scratch,
            ..
        } = self;
        let (grid, params, dt) = (*grid, *params, *dt);
        let nodes = &state.nodes;
        let inv_eps = params.eps.recip();
        let three = T::lit(3.0);
        let update = |(i, s): (usize, &mut NodeScratch<T>)| -> bool {
            let u = nodes[i].0.values();
            let v = nodes[i].1.values();
            laplacian_into(&grid, u, &mut s.lap);
            for (((d, &lap), &uk), &vk) in s.u.iter_mut().zip(&s.lap).zip(u).zip(v) {
                *d = params.d_u * lap - uk * uk * uk + three * uk - vk;
            }
            for &(j, c) in &neighbors[i] {
                for ((d, &uj), &uk) in s.u.iter_mut().zip(nodes[j].0.values()).zip(u) {
                    *d = *d + c * (uj - uk);
                }
            }
            let mut ok = true;
            for ((((du, dv), &uk), &vk), &ck) in s.u.iter_mut().zip(s.v.iter_mut()).zip(u).zip(v).zip(forcing.iter()) {
                let un = uk + dt * (*du * inv_eps);
                let vn = vk + dt * (params.a * uk - params.b * vk + ck);
                ok &= un.is_finite() && vn.is_finite();
                *du = un;
                *dv = vn;
            }
            ok
        };
        let work = nodes.len() * grid.len();
        let finite: Vec<bool> = if work >= PAR_MIN_WORK && rayon::current_num_threads() > 1 {
            scratch.par_iter_mut().enumerate().map(update).collect()
        } else {
            scratch.iter_mut().enumerate().map(update).collect()
        };
        self.step += 1;
        let t = T::from_count(self.step) * self.dt;
        if let Some(node) = finite.iter().position(|ok| !ok) {
            return Err(Error::BlowUp {
                step: self.step,
                t: t.to_f64_lossy(),
                node: node + 1,
            });
        }
        for ((u, v), s) in state.nodes.iter_mut().zip(self.scratch.iter_mut()) {
            std::mem::swap(u.values_vec_mut(), &mut s.u);
            std::mem::swap(v.values_vec_mut(), &mut s.v);
        }
        state.t = t;
        Ok(())
    }
}

/// One forward-Euler step from `state`.
pub fn step_euler<T: Scalar>(state: &NetworkState<T>, config: &SimConfig<T>) -> Result<NetworkState<T>> {
    let max_dt = stability_max_dt(&config.grid, &config.params);
    if config.dt > max_dt {
        return Err(Error::Stability {
            dt: config.dt.to_f64_lossy(),
            max_dt: max_dt.to_f64_lossy(),
        });
    }
    let mut stepper = Stepper::new(config);
    let steps_done = (state.t / config.dt).round().to_usize().unwrap_or(0);
    stepper.step = steps_done;
    let mut next = state.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub node: usize,
    pub u: Field<T>,
    pub v: Field<T>,
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub trace: SyncTrace<T>,
    pub snapshots: Vec<Snapshot<T>>,
    pub final_state: NetworkState<T>,
}

/// A failed run with the trace recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure<T> {
    pub error: Error,
    pub partial: SyncTrace<T>,
}

impl<T: std::fmt::Debug> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: std::fmt::Debug> std::error::Error for RunFailure<T> {}

impl<T> From<RunFailure<T>> for Error {
    fn from(f: RunFailure<T>) -> Self {
        f.error
    }
}

fn snapshot_all<T: Scalar>(state: &NetworkState<T>, out: &mut Vec<Snapshot<T>>) {
    for (i, (u, v)) in state.nodes().iter().enumerate() {
        out.push(Snapshot {
            t: state.t,
            node: i,
            u: u.clone(),
            v: v.clone(),
        });
    }
}

/// Integrates to `t_end`, sampling diagnostics every `record_every` steps
/// (and at the final step) and snapshotting every node at `t = 0` and at each
/// requested snapshot time.
pub fn run<T: Scalar>(config: &SimConfig<T>) -> std::result::Result<RunOutput<T>, RunFailure<T>> {
    let n = config.n();
    let fail = |error: Error| RunFailure {
        error,
        partial: SyncTrace::new(n),
    };
    config.validate().map_err(fail)?;
    let mut state = make_initial(&config.ic, &config.grid, n, config.seed).map_err(fail)?;
    let mut trace = SyncTrace::new(n);
    let mut snapshots = Vec::new();
    snapshot_all(&state, &mut snapshots);

    let half_dt = config.dt * T::lit(0.5);
    let mut pending: Vec<T> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > half_dt && s <= config.t_end + half_dt)
        .collect();
    pending.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    pending.dedup();
    let mut pending = pending.into_iter().peekable();

    let steps = config.steps();
    let mut stepper = Stepper::new(config);
    for k in 1..=steps {
        if let Err(error) = stepper.advance(&mut state) {
            return Err(RunFailure { error, partial: trace });
        }
        if k % config.record_every == 0 || k == steps {
            trace.push(TraceSample::measure(&state));
        }
        let mut due = false;
        while pending.next_if(|&s| s <= state.t + half_dt).is_some() {
            due = true;
        }
        if due {
            snapshot_all(&state, &mut snapshots);
        }
    }
    Ok(RunOutput {
        trace,
        snapshots,
        final_state: state,
    })
}
