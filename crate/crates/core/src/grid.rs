//! Uniform Cartesian grids on bounded open rectangles, cell-centered fields,
//! and discrete boundary-layer cutoff functions.
//!
//! Cells are addressed in lexicographic order: in 2-D the linear index of the
//! cell with multi-index `(i, j)` is `i * n[1] + j`. Cell centers sit at
//! `lo + (i + 1/2) h` per axis. All reductions use compensated (Neumaier)
//! summation, so integrals are reproducible under summation-order changes to
//! well below the tolerances used anywhere in the crate.

use thiserror::Error;

/// Errors from grid construction and field arithmetic.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("axis {axis}: domain is degenerate (lo = {lo}, hi = {hi})")]
    DegenerateDomain { axis: usize, lo: f64, hi: f64 },
    #[error("dimension {0} unsupported; only 1 and 2 are")]
    UnsupportedDimension(usize),
    #[error("axis {axis}: {n} cells requested, at least 3 required")]
    TooFewCells { axis: usize, n: usize },
    #[error("expected {expected} axis entries, got {got}")]
    AxisCountMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("boundary layer width {delta} is not resolvable (needs at least {min})")]
    LayerTooThin { delta: f64, min: f64 },
}

/// Compensated (Neumaier) accumulator for reproducible reductions.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum an iterator with compensation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// An axis-aligned bounded open rectangle `Π (lo_i, hi_i)`, the spatial domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RectDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RectDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GridError> {
        if lo.len() != hi.len() {
            return Err(GridError::AxisCountMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() || lo.len() > 2 {
            return Err(GridError::UnsupportedDimension(lo.len()));
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l >= h {
                return Err(GridError::DegenerateDomain { axis, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unit interval (0, 1).
    pub fn unit_interval() -> Self {
        Self::new(vec![0.0], vec![1.0]).expect("unit interval is valid")
    }

    /// The unit square (0, 1)².
    pub fn unit_square() -> Self {
        Self::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("unit square is valid")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Distance from `x` to the boundary of the rectangle (0 outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for axis in 0..self.dim() {
            d = d.min(x[axis] - self.lo[axis]).min(self.hi[axis] - x[axis]);
        }
        d.max(0.0)
    }
}

/// A uniform cell-centered grid over a [`RectDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    domain: RectDomain,
    n: Vec<usize>,
    h: Vec<f64>,
}

/// Build a uniform grid with `n[axis]` cells per axis (at least 3 each).
pub fn build_grid(domain: RectDomain, n: Vec<usize>) -> Result<UniformGrid, GridError> {
    UniformGrid::new(domain, n)
}

impl UniformGrid {
    pub fn new(domain: RectDomain, n: Vec<usize>) -> Result<Self, GridError> {
        if n.len() != domain.dim() {
            return Err(GridError::AxisCountMismatch {
                expected: domain.dim(),
                got: n.len(),
            });
        }
        for (axis, &count) in n.iter().enumerate() {
            if count < 3 {
                return Err(GridError::TooFewCells { axis, n: count });
            }
        }
        let h = (0..domain.dim())
            .map(|a| domain.extent(a) / n[a] as f64)
            .collect();
        Ok(Self { domain, n, h })
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn max_h(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().product()
    }

    /// Volume (length/area) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Center coordinates of the cell with linear index `lin`.
    pub fn center(&self, lin: usize) -> Vec<f64> {
        self.multi_index(lin)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.axis_center(a, i))
            .collect()
    }

    /// Center coordinate along `axis` of a cell with per-axis index `i`.
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        self.domain.lo(axis) + (i as f64 + 0.5) * self.h[axis]
    }

    /// Multi-index of the cell with linear index `lin` (lexicographic order).
    pub fn multi_index(&self, lin: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![lin],
            2 => vec![lin / self.n[1], lin % self.n[1]],
            d => unreachable!("dimension {d} rejected at construction"),
        }
    }

    /// Linear index of a multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        match self.dim() {
            1 => idx[0],
            2 => idx[0] * self.n[1] + idx[1],
            d => unreachable!("dimension {d} rejected at construction"),
        }
    }

    /// Visit every 1-D line of cells along `axis` as `(base, stride, len)`:
    /// the cells of the line are `base, base + stride, …, base + (len-1)·stride`.
    pub(crate) fn for_each_line(&self, axis: usize, mut visit: impl FnMut(usize, usize, usize)) {
        match (self.dim(), axis) {
            (1, 0) => visit(0, 1, self.n[0]),
            (2, 0) => {
                for j in 0..self.n[1] {
                    visit(j, self.n[1], self.n[0]);
                }
            }
            (2, 1) => {
                for i in 0..self.n[0] {
                    visit(i * self.n[1], 1, self.n[1]);
                }
            }
            (d, a) => unreachable!("axis {a} invalid in dimension {d}"),
        }
    }
}

/// A scalar field of cell-centered (cell-averaged) values on a [`UniformGrid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: &UniformGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.cell_count()],
        }
    }

    /// Sample `f` at every cell center.
    pub fn from_fn(grid: &UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cell_count())
            .map(|lin| f(&grid.center(lin)))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &UniformGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cell_count() {
            return Err(GridError::AxisCountMismatch {
                expected: grid.cell_count(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Midpoint-rule integral `Σ_c u_c · vol`, compensated.
    pub fn integrate(&self) -> f64 {
        let vol = self.grid.cell_volume();
        compensated_sum(self.values.iter().map(|&v| v * vol))
    }

    /// `‖u − v‖_{L1}` over the domain, compensated.
    pub fn l1_distance(&self, other: &Field) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let vol = self.grid.cell_volume();
        Ok(compensated_sum(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| (a - b).abs() * vol),
        ))
    }
}

/// A discrete boundary-layer cutoff `ζ_δ` together with its discrete gradient.
///
/// `ζ_δ(x) = min(dist(x, ∂Ω)/δ, 1)` sampled at cell centers: 1 at cells farther
/// than δ from the boundary, a linear ramp across the layer. Boundary cells
/// carry `ζ = h/(2δ)`, not exactly 0, because the sample point is the cell
/// center. The gradient is the centered difference in the interior and the
/// one-sided difference at the first/last cells of each grid line, so
/// `−∇ζ_δ` points toward the nearest wall with magnitude `≈ 1/δ` inside the
/// layer (exactly `1/δ` on ramp cells whose difference stencil stays in the
/// ramp).
#[derive(Debug, Clone)]
pub struct BoundaryLayer {
    delta: f64,
    weights: Field,
    /// `gradient[axis][cell]` — discrete ∂ζ/∂x_axis.
    gradient: Vec<Vec<f64>>,
}

impl BoundaryLayer {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn weights(&self) -> &Field {
        &self.weights
    }

    pub fn gradient(&self, axis: usize) -> &[f64] {
        &self.gradient[axis]
    }
}

/// Build the boundary-layer cutoff for width `delta` (requires `delta ≥ 2·max hᵢ`
/// so the ramp is resolved by at least two cells).
pub fn boundary_layer(grid: &UniformGrid, delta: f64) -> Result<BoundaryLayer, GridError> {
    let min = 2.0 * grid.max_h();
    if !(delta.is_finite() && delta >= min) {
        return Err(GridError::LayerTooThin { delta, min });
    }
    let weights = Field::from_fn(grid, |x| (grid.domain().boundary_distance(x) / delta).min(1.0));
    let gradient = (0..grid.dim())
        .map(|axis| axis_gradient(grid, weights.values(), axis))
        .collect();
    Ok(BoundaryLayer {
        delta,
        weights,
        gradient,
    })
}

/// Discrete per-axis derivative of a cell field: centered differences in the
/// interior, one-sided at the first/last cells of each grid line.
pub(crate) fn axis_gradient(grid: &UniformGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.h(axis);
    let mut out = vec![0.0; values.len()];
    grid.for_each_line(axis, |base, stride, len| {
        out[base] = (values[base + stride] - values[base]) / h;
        for i in 1..len - 1 {
            let c = base + i * stride;
            out[c] = (values[c + stride] - values[c - stride]) / (2.0 * h);
        }
        let last = base + (len - 1) * stride;
        out[last] = (values[last] - values[last - stride]) / h;
    });
    out
}
