//! Uniform cell-centred grids on a rectangle, the zero-flux Laplacian and the
//! integral norms evaluated by midpoint quadrature.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cell-centred uniform grid on `[0, lx] x [0, ly]`.
///
/// Spacings are always derived from the stored extents, never stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3x3 cells, got {nx}x{ny}"
            )));
        }
        if !(lx > T::zero() && ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Grid with unit spacing: `n x n` cells on `[0, n]^2`.
    pub fn unit_spacing(n: usize) -> Result<Self> {
        Self::new(n, n, T::from_count(n), T::from_count(n))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> T {
        self.lx
    }

    pub fn ly(&self) -> T {
        self.ly
    }

    pub fn dx(&self) -> T {
        self.lx / T::from_count(self.nx)
    }

    pub fn dy(&self) -> T {
        self.ly / T::from_count(self.ny)
    }

    pub fn cell_area(&self) -> T {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Coordinates of the centre of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (T, T) {
        let half = T::lit(0.5);
        (
            (T::from_count(i) + half) * self.dx(),
            (T::from_count(j) + half) * self.dy(),
        )
    }
}

/// One scalar quantity sampled at the cell centres of a [`Grid`], row-major
/// with `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: Grid<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub(crate) fn values_vec_mut(&mut self) -> &mut Vec<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.grid.index(i, j);
        self.values[k] = value;
    }

    pub fn ensure_same_grid(&self, other: &Field<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{}x{} on {}x{} vs {}x{} on {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                self.grid.lx(),
                self.grid.ly(),
                other.grid.nx(),
                other.grid.ny(),
                other.grid.lx(),
                other.grid.ly()
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: T, other: &Field<T>, beta: T) -> Result<Field<T>> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Midpoint quadrature of the field over the domain.
    pub fn integral(&self) -> T {
        row_sums(&self.grid, &self.values, |v| v) * self.grid.cell_area()
    }

    /// Snapshot as CSV: `ny` lines of `nx` comma-separated values, `j = 0` first.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.grid.nx()) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`Field::to_csv`] back onto a domain of size `lx x ly`.
    pub fn from_csv(text: &str, lx: T, ly: T) -> Result<Self> {
        let mut values = Vec::new();
        let mut nx = None;
        let mut ny = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            match nx {
                None => nx = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected {w} values, found {}", row.len()),
                    })
                }
                _ => {}
            }
            values.extend(row);
            ny += 1;
        }
        let grid = Grid::new(nx.unwrap_or(0), ny, lx, ly)?;
        Field::from_values(grid, values)
    }

    /// Snapshot as an ASCII portable graymap (P2), linearly scaled from the
    /// field minimum (0) to its maximum (255). The scaling is recorded in a
    /// header comment.
    pub fn to_pgm(&self) -> String {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let mut out = String::new();
        let _ = writeln!(out, "P2");
        let _ = writeln!(out, "# min={lo} max={hi}");
        let _ = writeln!(out, "{} {}", self.grid.nx(), self.grid.ny());
        let _ = writeln!(out, "255");
        let max_level = T::lit(255.0);
        for row in self.values.chunks(self.grid.nx()) {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    let level = if span > T::zero() {
                        ((v - lo) / span * max_level).round()
                    } else {
                        T::zero()
                    };
                    format!("{}", level.to_u8().unwrap_or(0))
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Sums `map(v)` row by row, then across rows in order. The fixed combine
/// order keeps reductions bitwise reproducible.
pub(crate) fn row_sums<T: Scalar>(grid: &Grid<T>, values: &[T], map: impl Fn(T) -> T) -> T {
    values
        .chunks(grid.nx())
        .map(|row| row.iter().fold(T::zero(), |acc, &v| acc + map(v)))
        .fold(T::zero(), |acc, r| acc + r)
}

/// Five-point Laplacian with zero-flux (mirror ghost) boundaries, written into `out`.
pub fn laplacian_into<T: Scalar>(grid: &Grid<T>, src: &[T], out: &mut [T]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv_dx2 = (grid.dx() * grid.dx()).recip();
    let inv_dy2 = (grid.dy() * grid.dy()).recip();
    let two = T::lit(2.0);
    for j in 0..ny {
        let row = j * nx;
        let down = if j == 0 { row } else { row - nx };
        let up = if j + 1 == ny { row } else { row + nx };
        for i in 0..nx {
            let left = if i == 0 { 0 } else { i - 1 };
            let right = if i + 1 == nx { i } else { i + 1 };
            let c = src[row + i];
            let lap_x = (src[row + left] - two * c + src[row + right]) * inv_dx2;
            let lap_y = (src[down + i] - two * c + src[up + i]) * inv_dy2;
            out[row + i] = lap_x + lap_y;
        }
    }
}

pub fn laplacian_neumann<T: Scalar>(f: &Field<T>) -> Field<T> {
    let mut out = Field::zeros(f.grid);
    laplacian_into(&f.grid, &f.values, &mut out.values);
    out
}

/// `(sum |f|^q dA)^(1/q)` by midpoint quadrature.
pub fn lq_norm<T: Scalar>(f: &Field<T>, q: u32) -> T {
    assert!(q >= 1, "lq_norm needs q >= 1");
    let qi = q as i32;
    let s = row_sums(&f.grid, &f.values, |v| v.abs().powi(qi)) * f.grid.cell_area();
    match q {
        1 => s,
        2 => s.sqrt(),
        _ => s.powf(T::from_count(q as usize).recip()),
    }
}

/// Squared L2 norm, `sum f^2 dA`, without the final square root.
pub fn l2_norm_sq<T: Scalar>(f: &Field<T>) -> T {
    row_sums(&f.grid, &f.values, |v| v * v) * f.grid.cell_area()
}

/// Discrete Dirichlet energy `∫|∇f|^2`: squared forward differences on interior
/// faces, each weighted by the cell area. Boundary faces carry zero flux.
pub fn h1_seminorm_sq<T: Scalar>(f: &Field<T>) -> T {
    let g = &f.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let (dx, dy) = (g.dx(), g.dy());
    let v = &f.values;
    let mut total = T::zero();
    for j in 0..ny {
        let row = j * nx;
        let mut acc = T::zero();
        for i in 0..nx {
            if i + 1 < nx {
                let s = (v[row + i + 1] - v[row + i]) / dx;
                acc = acc + s * s;
            }
            if j + 1 < ny {
                let s = (v[row + nx + i] - v[row + i]) / dy;
                acc = acc + s * s;
            }
        }
        total = total + acc;
    }
    total * dx * dy
}

/// L2 distance between two fields on the same grid.
pub fn l2_distance<T: Scalar>(f: &Field<T>, g: &Field<T>) -> Result<T> {
    f.ensure_same_grid(g)?;
    let grid = &f.grid;
    let s = f
        .values
        .chunks(grid.nx())
        .zip(g.values.chunks(grid.nx()))
        .map(|(a, b)| {
            a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
                let d = x - y;
                acc + d * d
            })
        })
        .fold(T::zero(), |acc, r| acc + r);
    Ok((s * grid.cell_area()).sqrt())
}
