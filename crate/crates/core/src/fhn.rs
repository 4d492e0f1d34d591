//! FitzHugh–Nagumo node dynamics
//!
//! ```text
//! ε u_t = d_u Δu − u³ + 3u − v + Σ_k c_ik u_k
//!   v_t = a u − b v + c(x)
//! ```
//!
//! on a rectangle with zero-flux boundaries. The coupling sits inside the
//! `ε`-scaled equation, so a strength `g` contributes `g/ε` to `u_t`.

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Field, Grid};
use crate::network::CouplingMatrix;
use crate::scalar::Scalar;
use crate::simulator::NetworkState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FhnParams<T> {
    pub eps: T,
    pub d_u: T,
    pub a: T,
    pub b: T,
}

impl<T: Scalar> FhnParams<T> {
    pub fn new(eps: T, d_u: T, a: T, b: T) -> Result<Self> {
        let p = Self { eps, d_u, a, b };
        p.validate()?;
        Ok(p)
    }

    /// `a = 1, b = 0.001, ε = 0.1, d_u = 0.05`: the oscillatory regime.
    pub fn reference() -> Self {
        Self {
            eps: T::lit(0.1),
            d_u: T::lit(0.05),
            a: T::one(),
            b: T::lit(0.001),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("eps", self.eps), ("d_u", self.d_u), ("a", self.a), ("b", self.b)] {
            if !(x > T::zero() && x.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {x}")));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Default for FhnParams<T> {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcingKind {
    Constant,
    /// `level` inside a disk, `outside_level` elsewhere.
    ExcitableWindow,
}

/// Spatial forcing `c(x)` of the recovery equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingProfile<T> {
    pub kind: ForcingKind,
    pub level: T,
    pub outside_level: T,
    /// Disk centre; `None` means the domain centre.
    pub center: Option<(T, T)>,
    pub radius: T,
}

impl<T: Scalar> ForcingProfile<T> {
    pub fn constant(level: T) -> Self {
        Self {
            kind: ForcingKind::Constant,
            level,
            ..Self::default()
        }
    }

    pub fn excitable_window(center: Option<(T, T)>, radius: T) -> Self {
        Self {
            kind: ForcingKind::ExcitableWindow,
            center,
            radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ForcingKind::ExcitableWindow && !(self.radius > T::zero()) {
            return Err(Error::InvalidParam(format!(
                "window radius must be > 0, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for ForcingProfile<T> {
    fn default() -> Self {
        Self {
            kind: ForcingKind::Constant,
            level: T::zero(),
            outside_level: T::lit(-1.1),
            center: None,
            radius: T::lit(5.0),
        }
    }
}

pub fn evaluate_forcing<T: Scalar>(forcing: &ForcingProfile<T>, grid: &Grid<T>) -> Field<T> {
    match forcing.kind {
        ForcingKind::Constant => Field::constant(*grid, forcing.level),
        ForcingKind::ExcitableWindow => {
            let half = T::lit(0.5);
            let (cx, cy) = forcing
                .center
                .unwrap_or((grid.lx() * half, grid.ly() * half));
            let r2 = forcing.radius * forcing.radius;
            Field::from_fn(*grid, |x, y| {
                let (ddx, ddy) = (x - cx, y - cy);
                if ddx * ddx + ddy * ddy <= r2 {
                    forcing.level
                } else {
                    forcing.outside_level
                }
            })
        }
    }
}

/// Uncoupled right-hand side written into `du`, `dv`; `lap` is scratch space
/// for `Δu`.
pub fn reaction_rhs_into<T: Scalar>(
    grid: &Grid<T>,
    u: &[T],
    v: &[T],
    c: &[T],
    params: &FhnParams<T>,
    lap: &mut [T],
    du: &mut [T],
    dv: &mut [T],
) {
    laplacian_into(grid, u, lap);
    let inv_eps = params.eps.recip();
    let three = T::lit(3.0);
    for k in 0..u.len() {
        let uk = u[k];
        du[k] = (params.d_u * lap[k] - uk * uk * uk + three * uk - v[k]) * inv_eps;
        dv[k] = params.a * uk - params.b * v[k] + c[k];
    }
}

/// `(u_t, v_t)` of one uncoupled node, Laplacian included.
pub fn reaction_rhs<T: Scalar>(
    u: &Field<T>,
    v: &Field<T>,
    params: &FhnParams<T>,
    forcing: &ForcingProfile<T>,
) -> Result<(Field<T>, Field<T>)> {
    u.ensure_same_grid(v)?;
    let grid = *u.grid();
    let c = evaluate_forcing(forcing, &grid);
    let mut lap = vec![T::zero(); grid.len()];
    let mut du = Field::zeros(grid);
    let mut dv = Field::zeros(grid);
    reaction_rhs_into(
        &grid,
        u.values(),
        v.values(),
        c.values(),
        params,
        &mut lap,
        du.values_mut(),
        dv.values_mut(),
    );
    Ok((du, dv))
}

/// Off-diagonal couplings `(k, c_ik)` per row, zeros dropped.
pub fn coupling_neighbors<T: Scalar>(g: &CouplingMatrix<T>) -> Vec<Vec<(usize, T)>> {
    (0..g.n())
        .map(|i| {
            (0..g.n())
                .filter(|&k| k != i && g.get(i, k) != T::zero())
                .map(|k| (k, g.get(i, k)))
                .collect()
        })
        .collect()
}

/// Coupling contribution `Σ_k c_ik u_k / ε` to `u_t` for every node.
///
/// Evaluated as `Σ_{k≠i} c_ik (u_k − u_i) / ε`, equal under zero row sums and
/// exactly zero on the synchronized manifold.
pub fn coupling_rhs<T: Scalar>(
    state: &NetworkState<T>,
    g: &CouplingMatrix<T>,
    params: &FhnParams<T>,
) -> Result<Vec<Field<T>>> {
    if state.n() != g.n() {
        return Err(Error::Shape(format!(
            "{} nodes but a {}x{} coupling matrix",
            state.n(),
            g.n(),
            g.n()
        )));
    }
    let inv_eps = params.eps.recip();
    let neighbors = coupling_neighbors(g);
    Ok((0..state.n())
        .map(|i| {
            let ui = state.u(i).values();
            let mut out = Field::zeros(*state.grid());
            for (cell, o) in out.values_mut().iter_mut().enumerate() {
                let mut s = T::zero();
                for &(k, c) in &neighbors[i] {
                    s = s + c * (state.u(k).values()[cell] - ui[cell]);
                }
                *o = s * inv_eps;
            }
            out
        })
        .collect())
}
