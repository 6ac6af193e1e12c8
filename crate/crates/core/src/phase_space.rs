//! Discretization of L²(ℝⁿ) and of phase space, Weyl quantization on the grid
//! and the Hermite basis used for truncated operators.

use crate::error::{Error, Result};
use crate::{par, C64};
use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform cell-centred grid on [-U, U] with `M` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_width: f64,
    points: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, points: usize) -> Result<Grid1D> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!("{points} points: need an even count >= 8")));
        }
        Ok(Grid1D { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Frequency grid of matching size covering [-π/h, π/h].
    pub fn dual(&self) -> Grid1D {
        Grid1D { half_width: PI / self.spacing(), points: self.points }
    }

    /// Every `stride`-th node, centred so the subset is again a symmetric grid.
    /// Returns the subgrid and the index of its first node in `self`.
    pub fn strided(&self, stride: usize) -> Result<(Grid1D, usize)> {
        if stride == 0 || stride % 2 == 0 || self.points % stride != 0 {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} must be odd and divide {}",
                self.points
            )));
        }
        let sub = Grid1D::new(self.half_width, self.points / stride)?;
        Ok((sub, (stride - 1) / 2))
    }
}

/// Row-major tensor product of 1D grids (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub axes: Vec<Grid1D>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Grid1D>) -> TensorGrid {
        TensorGrid { axes }
    }

    pub fn uniform(axis: Grid1D, dim: usize) -> TensorGrid {
        TensorGrid { axes: vec![axis; dim] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points()).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            let m = self.axes[d].points();
            idx[d] = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.points() + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.node(i))
            .collect()
    }
}

/// Complex samples on a tensor grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: TensorGrid,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: TensorGrid, values: Vec<C64>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: TensorGrid) -> GridFunction {
        let len = grid.len();
        GridFunction { grid, values: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn from_fn<F>(grid: TensorGrid, f: F) -> GridFunction
    where
        F: Fn(&[f64]) -> C64 + Sync + Send,
    {
        let values = par::map_range(grid.len(), |k| f(&grid.point(k)));
        GridFunction { grid, values }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ⟨self, other⟩ = Σ conj(self)·other·hᵏ.
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        self.check_same(other)?;
        let s: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("grid functions live on different grids".into()));
        }
        Ok(())
    }

    pub fn map<F: Fn(C64) -> C64>(&self, f: F) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: C64) -> GridFunction {
        self.map(|v| v * c)
    }

    pub fn zip_with<F: Fn(C64, C64) -> C64>(&self, other: &GridFunction, f: F) -> Result<GridFunction> {
        self.check_same(other)?;
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// ‖self − reference‖ / ‖reference‖.
    pub fn rel_l2_error(&self, reference: &GridFunction) -> Result<f64> {
        let diff = self.sub(reference)?;
        Ok(diff.l2_norm() / reference.l2_norm())
    }
}

/// Applies a dense linear map along one axis. `m` is `rows × shape[axis]`, row-major.
pub(crate) fn transform_axis(values: &[C64], shape: &[usize], axis: usize, m: &[C64], rows: usize) -> Vec<C64> {
    let cols = shape[axis];
    debug_assert_eq!(m.len(), rows * cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let blocks = par::map_range(outer, |o| {
        let mut out = vec![C64::new(0.0, 0.0); rows * inner];
        let base = o * cols * inner;
        for r in 0..rows {
            let row = &m[r * cols..(r + 1) * cols];
            let dst = &mut out[r * inner..(r + 1) * inner];
            for (c, &w) in row.iter().enumerate() {
                let src = &values[base + c * inner..base + (c + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        out
    });
    blocks.concat()
}

/// Euclidean Fourier transform with the (2π)^{-N/2} normalization, returned
/// on the dual grid. The Riemann-sum version is exactly unitary.
pub fn fourier_transform(f: &GridFunction) -> GridFunction {
    let mut shape = f.grid.shape();
    let mut values = f.values.clone();
    let mut axes = Vec::new();
    for (d, axis) in f.grid.axes.iter().enumerate() {
        let dual = axis.dual();
        let h = axis.spacing();
        let m = axis.points();
        let mut table = Vec::with_capacity(m * m);
        for k in 0..m {
            let z = dual.node(k);
            for i in 0..m {
                table.push(C64::from_polar(h / (2.0 * PI).sqrt(), -z * axis.node(i)));
            }
        }
        values = transform_axis(&values, &shape, d, &table, m);
        shape[d] = m;
        axes.push(dual);
    }
    GridFunction { grid: TensorGrid::new(axes), values }
}

/// A function of phase-space variables (ξ, u) ∈ ℝⁿ × ℝⁿ.
pub trait PhaseSymbol: Sync {
    fn eval(&self, xi: &[f64], u: &[f64]) -> C64;
}

impl<F> PhaseSymbol for F
where
    F: Fn(&[f64], &[f64]) -> C64 + Sync,
{
    fn eval(&self, xi: &[f64], u: &[f64]) -> C64 {
        self(xi, u)
    }
}

/// Sampled Weyl symbol on a ξ × u tensor grid (ξ axes first).
#[derive(Clone, Debug, PartialEq)]
pub struct WeylSymbol {
    pub n: usize,
    pub data: GridFunction,
}

impl WeylSymbol {
    pub fn new(n: usize, data: GridFunction) -> Result<WeylSymbol> {
        if data.grid.dim() != 2 * n {
            return Err(Error::GridMismatch(format!(
                "weyl symbol for n={n} needs {} axes, got {}",
                2 * n,
                data.grid.dim()
            )));
        }
        if let Some(v) = data.values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("symbol sample {v}")));
        }
        Ok(WeylSymbol { n, data })
    }

    /// Samples `a` on the phase-space grid of `ps`.
    pub fn sample<A: PhaseSymbol + ?Sized>(ps: &PhaseSpace, a: &A) -> WeylSymbol {
        let n = ps.n;
        let mut axes = vec![ps.xi_grid(); n];
        axes.extend(vec![ps.u; n]);
        let grid = TensorGrid::new(axes);
        let data = GridFunction::from_fn(grid, |p| a.eval(&p[..n], &p[n..]));
        WeylSymbol { n, data }
    }

    pub fn values(&self) -> &[C64] {
        &self.data.values
    }
}

/// Four-point Lagrange weights on the cell containing `x`; zero outside the grid.
fn cubic_weights(g: &Grid1D, x: f64) -> Option<([usize; 4], [f64; 4])> {
    let h = g.spacing();
    let s = (x + g.half_width()) / h - 0.5;
    let m = g.points() as isize;
    if s < -1e-12 || s > (m - 1) as f64 + 1e-12 {
        return None;
    }
    let base = (s.floor() as isize - 1).clamp(0, m - 4);
    let mut idx = [0usize; 4];
    let mut w = [0.0; 4];
    for k in 0..4 {
        idx[k] = (base + k as isize) as usize;
        let mut l = 1.0;
        for j in 0..4 {
            if j != k {
                l *= (s - (base + j as isize) as f64) / (k as f64 - j as f64);
            }
        }
        w[k] = l;
    }
    Some((idx, w))
}

impl PhaseSymbol for WeylSymbol {
    fn eval(&self, xi: &[f64], u: &[f64]) -> C64 {
        let grid = &self.data.grid;
        let coords: Vec<f64> = xi.iter().chain(u).copied().collect();
        let mut stencils = Vec::with_capacity(coords.len());
        for (axis, &x) in grid.axes.iter().zip(&coords) {
            match cubic_weights(axis, x) {
                Some(s) => stencils.push(s),
                None => return C64::new(0.0, 0.0),
            }
        }
        let dim = coords.len();
        let mut acc = C64::new(0.0, 0.0);
        let mut corner = vec![0usize; dim];
        let mut idx = vec![0usize; dim];
        'outer: loop {
            let mut w = 1.0;
            for d in 0..dim {
                idx[d] = stencils[d].0[corner[d]];
                w *= stencils[d].1[corner[d]];
            }
            acc += self.data.values[grid.flatten(&idx)] * w;
            for d in 0..dim {
                corner[d] += 1;
                if corner[d] < 4 {
                    continue 'outer;
                }
                corner[d] = 0;
            }
            break;
        }
        acc
    }
}

/// Normalized Hermite functions h_0..h_{count-1} at `u` by the three-term recurrence.
pub fn hermite_eval(count: usize, u: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(count);
    if count == 0 {
        return h;
    }
    h.push(PI.powf(-0.25) * (-0.5 * u * u).exp());
    if count > 1 {
        h.push(2.0f64.sqrt() * u * h[0]);
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * h[k] - (kf / (kf + 1.0)).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Multi-indices of the first `count` tensor Hermite functions, ordered by
/// total degree and then lexicographically.
pub fn hermite_indices(n: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(count);
    let mut degree = 0;
    while out.len() < count {
        let mut level = Vec::new();
        compositions(n, degree, &mut vec![0; n], 0, &mut level);
        level.sort();
        level.reverse();
        for k in level {
            if out.len() == count {
                break;
            }
            out.push(k);
        }
        degree += 1;
    }
    out
}

fn compositions(n: usize, remaining: usize, cur: &mut Vec<usize>, pos: usize, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == n {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for k in 0..=remaining {
        cur[pos] = k;
        compositions(n, remaining - k, cur, pos + 1, out);
    }
}

/// Total degrees |k| of the tensor Hermite basis.
pub fn hermite_degrees(n: usize, count: usize) -> Vec<usize> {
    hermite_indices(n, count).iter().map(|k| k.iter().sum()).collect()
}

fn check_aliasing(grid: &TensorGrid, count: usize) -> Result<Vec<Vec<usize>>> {
    let n = grid.dim();
    let idx = hermite_indices(n.max(1), count);
    for (d, axis) in grid.axes.iter().enumerate() {
        let limit = axis.points() / 2;
        let need = idx.iter().map(|k| k[d] + 1).max().unwrap_or(0);
        if need > limit {
            return Err(Error::Aliasing { requested: count, max: limit });
        }
    }
    Ok(idx)
}

/// The first `count` normalized Hermite functions sampled on `grid`.
pub fn hermite_basis(grid: &TensorGrid, count: usize) -> Result<Vec<GridFunction>> {
    let idx = check_aliasing(grid, count)?;
    let tables: Vec<Vec<Vec<f64>>> = grid
        .axes
        .iter()
        .map(|a| {
            let kmax = idx.iter().flatten().max().map_or(1, |m| m + 1);
            a.nodes().iter().map(|&u| hermite_eval(kmax, u)).collect()
        })
        .collect();
    Ok(idx
        .iter()
        .map(|k| {
            let values = (0..grid.len())
                .map(|flat| {
                    let p = grid.unflatten(flat);
                    let v: f64 = (0..grid.dim()).map(|d| tables[d][p[d]][k[d]]).product();
                    C64::new(v, 0.0)
                })
                .collect();
            GridFunction { grid: grid.clone(), values }
        })
        .collect())
}

/// Truncated operator on L²(ℝⁿ) in the Hermite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct RepOperator {
    pub lambda: f64,
    pub n: usize,
    pub matrix: DMatrix<C64>,
}

impl RepOperator {
    pub fn new(lambda: f64, n: usize, matrix: DMatrix<C64>) -> Result<RepOperator> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidParameter("operator matrix must be square".into()));
        }
        if matrix.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("operator matrix entry".into()));
        }
        Ok(RepOperator { lambda, n, matrix })
    }

    pub fn identity(lambda: f64, n: usize, dim: usize) -> RepOperator {
        RepOperator { lambda, n, matrix: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .fold(0.0, |a: f64, &s| a.max(s))
    }

    pub fn adjoint(&self) -> RepOperator {
        RepOperator { lambda: self.lambda, n: self.n, matrix: self.matrix.adjoint() }
    }

    pub fn mul(&self, other: &RepOperator) -> RepOperator {
        RepOperator { lambda: self.lambda, n: self.n, matrix: &self.matrix * &other.matrix }
    }

    pub fn scale(&self, c: C64) -> RepOperator {
        RepOperator { lambda: self.lambda, n: self.n, matrix: &self.matrix * c }
    }

    pub fn add(&self, other: &RepOperator) -> RepOperator {
        RepOperator { lambda: self.lambda, n: self.n, matrix: &self.matrix + &other.matrix }
    }

    /// Leading `k × k` block.
    pub fn truncate(&self, k: usize) -> RepOperator {
        let k = k.min(self.dim());
        RepOperator { lambda: self.lambda, n: self.n, matrix: self.matrix.view((0, 0), (k, k)).into_owned() }
    }

    /// Diagonal of π_λ(I−𝓛) on the basis: 1 + |λ|(2|k| + n).
    pub fn spectrum_i_minus_l(lambda: f64, n: usize, dim: usize) -> Vec<f64> {
        hermite_degrees(n, dim)
            .iter()
            .map(|&k| 1.0 + lambda.abs() * (2 * k + n) as f64)
            .collect()
    }

    /// D^{s_left} · self · D^{s_right} with D = π_λ(I−𝓛).
    pub fn sandwich_power(&self, s_left: f64, s_right: f64) -> RepOperator {
        let d = RepOperator::spectrum_i_minus_l(self.lambda, self.n, self.dim());
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= d[i].powf(s_left) * d[j].powf(s_right);
            }
        }
        RepOperator { lambda: self.lambda, n: self.n, matrix: m }
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Samples of a symbol at the ξ nodes and at all midpoints (u_i + u_j)/2.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    /// Row-major over (midpoint multi-index, ξ multi-index).
    pub values: Vec<C64>,
}

/// Phase-space discretization: u-grid, ξ-grid, Hermite basis and phase tables.
#[derive(Clone, Debug)]
pub struct PhaseSpace {
    pub n: usize,
    pub u: Grid1D,
    pub m_xi: usize,
    pub n_h: usize,
    basis: Vec<Vec<f64>>,
    phase: Vec<C64>,
}

impl PhaseSpace {
    /// `xi_factor` sets the number of ξ nodes to `xi_factor · M` per axis.
    pub fn new(n: usize, half_width: f64, points: usize, xi_factor: usize, n_h: usize) -> Result<PhaseSpace> {
        if n == 0 || n > 3 {
            return Err(Error::InvalidParameter(format!("dimension n={n} must be 1..=3")));
        }
        if xi_factor == 0 {
            return Err(Error::InvalidParameter("xi_factor must be positive".into()));
        }
        let u = Grid1D::new(half_width, points)?;
        let grid = TensorGrid::uniform(u, n);
        let basis = hermite_basis(&grid, n_h)?
            .into_iter()
            .map(|f| f.values.iter().map(|v| v.re).collect())
            .collect();
        let m_xi = xi_factor * points;
        let xi = Grid1D::new(PI / u.spacing(), m_xi)?;
        let h = u.spacing();
        let mut phase = Vec::with_capacity((2 * points - 1) * m_xi);
        for d in 0..(2 * points - 1) {
            let du = (d as f64 - (points - 1) as f64) * h;
            for l in 0..m_xi {
                phase.push(C64::from_polar(1.0, du * xi.node(l)));
            }
        }
        Ok(PhaseSpace { n, u, m_xi, n_h, basis, phase })
    }

    pub fn u_grid(&self) -> TensorGrid {
        TensorGrid::uniform(self.u, self.n)
    }

    pub fn xi_grid(&self) -> Grid1D {
        Grid1D { half_width: PI / self.u.spacing(), points: self.m_xi }
    }

    pub fn xi_spacing(&self) -> f64 {
        self.xi_grid().spacing()
    }

    /// Midpoint nodes w_m = −U + (m/2 + ½)h, m = 0..2M−2.
    pub fn midpoint(&self, m: usize) -> f64 {
        -self.u.half_width() + (m as f64 / 2.0 + 0.5) * self.u.spacing()
    }

    pub fn midpoint_count(&self) -> usize {
        2 * self.u.points() - 1
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Same discretization with a different Hermite truncation.
    pub fn with_n_h(&self, n_h: usize) -> Result<PhaseSpace> {
        PhaseSpace::new(self.n, self.u.half_width(), self.u.points(), self.m_xi / self.u.points(), n_h)
    }

    fn multi(&self, mut flat: usize, base: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for d in (0..self.n).rev() {
            idx[d] = flat % base;
            flat /= base;
        }
        idx
    }

    /// Tabulates `a` on (midpoints)ⁿ × (ξ nodes)ⁿ.
    pub fn symbol_table<A: PhaseSymbol + ?Sized>(&self, a: &A) -> SymbolTable {
        let nw = self.midpoint_count().pow(self.n as u32);
        let nx = self.m_xi.pow(self.n as u32);
        let xi = self.xi_grid();
        let rows = par::map_range(nw, |w| {
            let u: Vec<f64> = self.multi(w, self.midpoint_count()).iter().map(|&m| self.midpoint(m)).collect();
            (0..nx)
                .map(|l| {
                    let x: Vec<f64> = self.multi(l, self.m_xi).iter().map(|&k| xi.node(k)).collect();
                    a.eval(&x, &u)
                })
                .collect::<Vec<_>>()
        });
        SymbolTable { values: rows.concat() }
    }

    /// Kernel K(u_I, u_J)·hⁿ of Op^W for a tabulated symbol, row-major M^n × M^n.
    pub fn kernel_from_table(&self, table: &SymbolTable) -> Vec<C64> {
        if self.n == 1 {
            return self.kernel_from_table_1d(table);
        }
        let m = self.u.points();
        let size = m.pow(self.n as u32);
        let nw = self.midpoint_count();
        let nx = self.m_xi.pow(self.n as u32);
        let pref = (self.xi_spacing() / (2.0 * PI) * self.u.spacing()).powi(self.n as i32);
        let xi_idx: Vec<Vec<usize>> = (0..nx).map(|l| self.multi(l, self.m_xi)).collect();
        let rows = par::map_range(size, |i| {
            let ii = self.multi(i, m);
            let mut row = vec![C64::new(0.0, 0.0); size];
            let mut jj = vec![0usize; self.n];
            for (j, out) in row.iter_mut().enumerate() {
                for d in (0..self.n).rev() {
                    jj[d] = (j / m.pow((self.n - 1 - d) as u32)) % m;
                }
                let w = ii.iter().zip(&jj).fold(0, |acc, (&a, &b)| acc * nw + a + b);
                let sym = &table.values[w * nx..(w + 1) * nx];
                let acc = if self.n == 1 {
                    let d = ii[0] + m - 1 - jj[0];
                    let ph = &self.phase[d * self.m_xi..(d + 1) * self.m_xi];
                    ph.iter().zip(sym).map(|(p, s)| p * s).sum::<C64>()
                } else {
                    let rows: Vec<&[C64]> = (0..self.n)
                        .map(|d| {
                            let dd = ii[d] + m - 1 - jj[d];
                            &self.phase[dd * self.m_xi..(dd + 1) * self.m_xi]
                        })
                        .collect();
                    let mut acc = C64::new(0.0, 0.0);
                    for (l, s) in sym.iter().enumerate() {
                        let mut p = C64::new(1.0, 0.0);
                        for (d, row) in rows.iter().enumerate() {
                            p *= row[xi_idx[l][d]];
                        }
                        acc += p * s;
                    }
                    acc
                };
                *out = acc * pref;
            }
            row
        });
        rows.concat()
    }

    /// n = 1: Σ_l e^{i(u_i−u_j)ξ_l} a(w, ξ_l) is a length-m_ξ DFT in l
    /// evaluated at d = i − j, so each midpoint row costs one FFT.
    fn kernel_from_table_1d(&self, table: &SymbolTable) -> Vec<C64> {
        let m = self.u.points();
        let mx = self.m_xi;
        let pref = self.xi_spacing() / (2.0 * PI) * self.u.spacing();
        let fft = FftPlanner::new().plan_fft_inverse(mx);
        let rows = par::map_range(self.midpoint_count(), |w| {
            let mut buf = table.values[w * mx..(w + 1) * mx].to_vec();
            fft.process(&mut buf);
            buf
        });
        // e^{i d h ξ_l} = e^{−iπd} e^{iπd/m_ξ} e^{2πi d l/m_ξ}
        let mut kernel = vec![C64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                let d = i as i64 - j as i64;
                let phase = C64::from_polar(pref, PI * d as f64 * (1.0 / mx as f64 - 1.0));
                kernel[i * m + j] = rows[i + j][d.rem_euclid(mx as i64) as usize] * phase;
            }
        }
        kernel
    }

    pub fn opw_kernel<A: PhaseSymbol + ?Sized>(&self, a: &A) -> Vec<C64> {
        self.kernel_from_table(&self.symbol_table(a))
    }

    /// Op^W(a) f on the u-grid.
    pub fn opw_apply<A: PhaseSymbol + ?Sized>(&self, a: &A, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.u_grid() {
            return Err(Error::GridMismatch("function is not sampled on the phase-space u-grid".into()));
        }
        let k = self.opw_kernel(a);
        let size = f.values.len();
        let values = par::map_range(size, |i| {
            k[i * size..(i + 1) * size].iter().zip(&f.values).map(|(a, b)| a * b).sum()
        });
        Ok(GridFunction { grid: f.grid.clone(), values })
    }

    /// Projects a kernel (already weighted by hⁿ) onto the Hermite basis.
    pub fn matrix_from_kernel(&self, kernel: &[C64], lambda: f64) -> RepOperator {
        let size = self.u.points().pow(self.n as u32);
        let nh = self.n_h;
        let hn = self.u.spacing().powi(self.n as i32);
        let kb = par::map_range(size, |i| {
            let row = &kernel[i * size..(i + 1) * size];
            (0..nh)
                .map(|k| row.iter().zip(&self.basis[k]).map(|(a, &b)| a * b).sum::<C64>())
                .collect::<Vec<_>>()
        });
        let mut m = DMatrix::from_element(nh, nh, C64::new(0.0, 0.0));
        for j in 0..nh {
            for (i, kbi) in kb.iter().enumerate() {
                let b = self.basis[j][i] * hn;
                if b != 0.0 {
                    for k in 0..nh {
                        m[(j, k)] += kbi[k] * b;
                    }
                }
            }
        }
        RepOperator { lambda, n: self.n, matrix: m }
    }

    /// Matrix ⟨h_j, Op^W(a) h_k⟩ of the first `n_h` Hermite functions.
    pub fn opw_matrix<A: PhaseSymbol + ?Sized>(&self, a: &A, lambda: f64) -> RepOperator {
        self.matrix_from_kernel(&self.opw_kernel(a), lambda)
    }

    /// Hermite basis functions as grid functions.
    pub fn basis_function(&self, k: usize) -> GridFunction {
        GridFunction {
            grid: self.u_grid(),
            values: self.basis[k].iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(Grid1D::new(1.0, 7).is_err());
        assert!(Grid1D::new(1.0, 9).is_err());
        assert!(Grid1D::new(-1.0, 8).is_err());
        let g = Grid1D::new(2.0, 8).unwrap();
        assert!((g.node(0) + g.node(7)).abs() < 1e-15);
        assert!((g.spacing() * 8.0 - 4.0).abs() < 1e-15);
    }

    #[test]
    fn strided_subgrid_is_symmetric() {
        let g = Grid1D::new(6.0, 48).unwrap();
        let (s, off) = g.strided(3).unwrap();
        assert_eq!(s.points(), 16);
        for k in 0..16 {
            assert!((s.node(k) - g.node(off + 3 * k)).abs() < 1e-12);
        }
        assert!(g.strided(2).is_err());
    }

    #[test]
    fn explicit_low_hermite() {
        let h = hermite_eval(2, 0.8);
        let g = PI.powf(-0.25) * (-0.32f64).exp();
        assert!((h[0] - g).abs() < 1e-15);
        assert!((h[1] - 2f64.sqrt() * 0.8 * g).abs() < 1e-15);
    }

    #[test]
    fn tensor_order() {
        let idx = hermite_indices(2, 6);
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let g = Grid1D::new(4.0, 16).unwrap();
        let grid = TensorGrid::new(vec![g, g]);
        let p = |x: f64, u: f64| x * x * x - 2.0 * u * u + x * u;
        let data = GridFunction::from_fn(grid, |q| c(p(q[0], q[1])));
        let s = WeylSymbol::new(1, data).unwrap();
        let v = s.eval(&[0.3], &[-1.1]);
        assert!((v.re - p(0.3, -1.1)).abs() < 1e-10);
        assert_eq!(s.eval(&[9.0], &[0.0]), c(0.0));
    }

    #[test]
    fn rep_operator_basics() {
        let mut m = DMatrix::from_element(2, 2, c(0.0));
        m[(0, 0)] = c(1.0);
        m[(1, 1)] = c(2.0);
        let op = RepOperator::new(1.0, 1, m).unwrap();
        assert!((op.hs_norm() - 5f64.sqrt()).abs() < 1e-15);
        assert!((op.op_norm() - 2.0).abs() < 1e-12);
        assert_eq!(RepOperator::identity(1.0, 1, 10).trace(), c(10.0));
    }
}
