//! Schrödinger representations π_λ, the group Fourier transform and the
//! Plancherel measure.

use crate::error::{Error, Result};
use crate::heisenberg::{group_dim, HPoint};
use crate::phase_space::{hermite_eval, hermite_indices, transform_axis, GridFunction, PhaseSpace, RepOperator, SymbolTable};
use crate::{par, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// sgn(λ)·√|λ|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedSqrt {
    pub lambda: f64,
    pub value: f64,
}

impl SignedSqrt {
    pub fn new(lambda: f64) -> Result<SignedSqrt> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and nonzero, got {lambda}")));
        }
        Ok(SignedSqrt { lambda, value: lambda.signum() * lambda.abs().sqrt() })
    }
}

pub fn signed_sqrt(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

/// Symmetric log-spaced λ nodes with weights for ∫ f(λ)|λ|ⁿ dλ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub per_sign: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub plancherel_constant: Option<f64>,
}

impl LambdaGrid {
    pub fn new(n: usize, lambda_min: f64, lambda_max: f64, per_sign: usize) -> Result<LambdaGrid> {
        if !(lambda_min > 0.0 && lambda_max > lambda_min && lambda_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda band [{lambda_min}, {lambda_max}] must satisfy 0 < min < max"
            )));
        }
        if per_sign < 2 {
            return Err(Error::InvalidParameter("need at least 2 lambda nodes per sign".into()));
        }
        let ds = (lambda_max / lambda_min).ln() / (per_sign - 1) as f64;
        let mut pos = Vec::with_capacity(per_sign);
        let mut pw = Vec::with_capacity(per_sign);
        for k in 0..per_sign {
            let l = lambda_min * (k as f64 * ds).exp();
            let end = if k == 0 || k == per_sign - 1 { 0.5 } else { 1.0 };
            pos.push(l);
            pw.push(end * ds * l.powi(n as i32 + 1));
        }
        let mut nodes: Vec<f64> = pos.iter().rev().map(|l| -l).collect();
        nodes.extend(&pos);
        let mut weights: Vec<f64> = pw.iter().rev().copied().collect();
        weights.extend(&pw);
        Ok(LambdaGrid { n, lambda_min, lambda_max, per_sign, nodes, weights, plancherel_constant: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn with_constant(mut self, c: f64) -> LambdaGrid {
        self.plancherel_constant = Some(c);
        self
    }

    /// Σ w_k f_k in node order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_c(&self, values: &[C64]) -> C64 {
        self.weights.iter().zip(values).map(|(w, v)| v * *w).sum()
    }

    /// Share of Σ w|f| carried by the four band-edge nodes.
    pub fn tail_fraction(&self, values: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().zip(values).map(|(w, v)| w * v.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let k = self.per_sign;
        let edges = [0, k - 1, k, 2 * k - 1];
        edges.iter().map(|&i| self.weights[i] * values[i].abs()).sum::<f64>() / total
    }

    /// Grid with the band doubled at both ends in log scale and nodes added
    /// to keep the log spacing.
    pub fn extended(&self) -> Result<LambdaGrid> {
        let ds = (self.lambda_max / self.lambda_min).ln() / (self.per_sign - 1) as f64;
        let extra = (2f64.ln() / ds).round() as usize;
        LambdaGrid::new(self.n, self.lambda_min / 2.0, self.lambda_max * 2.0, self.per_sign + 2 * extra)
    }
}

/// Default tolerated lost-mass fraction in [`pi_point`].
pub const OVERFLOW_TOL: f64 = 1e-6;

/// Band-limited translation matrix along one axis: row i evaluates the
/// trigonometric interpolant at u_i + s, or 0 outside the grid.
fn shift_matrix(axis: &crate::Grid1D, s: f64) -> Vec<C64> {
    let m = axis.points();
    let dual = axis.dual();
    let mut out = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        let target = axis.node(i) + s;
        if target.abs() > axis.half_width() {
            continue;
        }
        for j in 0..m {
            let d = target - axis.node(j);
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..m {
                acc += C64::from_polar(1.0, dual.node(k) * d);
            }
            out[i * m + j] = acc / m as f64;
        }
    }
    out
}

/// π_λ(x,y,t)f(u) = e^{iλ(t + x·y/2)} e^{i√λ y·u} f(u + √|λ| x).
pub fn pi_point(lambda: f64, g: &HPoint, f: &GridFunction, overflow_tol: f64) -> Result<GridFunction> {
    let sq = SignedSqrt::new(lambda)?;
    let n = f.grid.dim();
    if n != g.n {
        return Err(Error::GridMismatch(format!("function on R^{n} but point in H_{}", g.n)));
    }
    let ab = lambda.abs().sqrt();
    let mut shape = f.grid.shape();
    let mut values = f.values.clone();
    for d in 0..n {
        let axis = f.grid.axes[d];
        if g.x[d] != 0.0 {
            let m = shift_matrix(&axis, ab * g.x[d]);
            values = transform_axis(&values, &shape, d, &m, axis.points());
        }
        shape[d] = axis.points();
    }
    let xy: f64 = (0..n).map(|j| g.x[j] * g.y[j]).sum();
    let base = lambda * (g.t + 0.5 * xy);
    for (flat, v) in values.iter_mut().enumerate() {
        let u = f.grid.point(flat);
        let phase = base + sq.value * (0..n).map(|j| g.y[j] * u[j]).sum::<f64>();
        *v *= C64::from_polar(1.0, phase);
    }
    let out = GridFunction { grid: f.grid.clone(), values };
    let before = f.l2_norm();
    if before > 0.0 {
        let lost = (1.0 - (out.l2_norm() / before).powi(2)).max(0.0);
        if lost > overflow_tol {
            return Err(Error::SupportOverflow { fraction: lost });
        }
    }
    Ok(out)
}

/// 1D block a_{jk} = ∫ h_j(u) e^{iβu} h_k(u+s) du by trapezoid quadrature.
fn shift_block_1d(rows: usize, cols: usize, beta: f64, s: f64) -> DMatrix<C64> {
    let kmax = rows.max(cols);
    let reach = (2.0 * kmax as f64 + 1.0).sqrt();
    let half = reach + 0.5 * s.abs() + 8.0;
    let h = (PI / (2.0 * reach + beta.abs() + 12.0)).min(0.1);
    let count = (2.0 * half / h).ceil() as usize + 1;
    let h = 2.0 * half / (count - 1) as f64;
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    for q in 0..count {
        let v = -half + q as f64 * h;
        let a = hermite_eval(rows, v - 0.5 * s);
        let b = hermite_eval(cols, v + 0.5 * s);
        let ph = C64::from_polar(h, beta * (v - 0.5 * s));
        for j in 0..rows {
            if a[j] == 0.0 {
                continue;
            }
            let aj = ph * a[j];
            for k in 0..cols {
                m[(j, k)] += aj * b[k];
            }
        }
    }
    m
}

/// ⟨h_J, π_λ(g) h_K⟩ for the first `rows` × `cols` tensor Hermite functions.
pub fn pi_point_block(lambda: f64, g: &HPoint, rows: usize, cols: usize) -> Result<DMatrix<C64>> {
    let sq = SignedSqrt::new(lambda)?;
    let n = g.n;
    let ri = hermite_indices(n, rows);
    let ci = hermite_indices(n, cols);
    let kr = ri.iter().flatten().max().map_or(1, |m| m + 1);
    let kc = ci.iter().flatten().max().map_or(1, |m| m + 1);
    let ab = lambda.abs().sqrt();
    let blocks: Vec<DMatrix<C64>> = (0..n).map(|j| shift_block_1d(kr, kc, sq.value * g.y[j], ab * g.x[j])).collect();
    let xy: f64 = (0..n).map(|j| g.x[j] * g.y[j]).sum();
    let phase = C64::from_polar(1.0, lambda * (g.t + 0.5 * xy));
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    for (a, r) in ri.iter().enumerate() {
        for (b, c) in ci.iter().enumerate() {
            let mut v = phase;
            for d in 0..n {
                v *= blocks[d][(r[d], c[d])];
            }
            m[(a, b)] = v;
        }
    }
    Ok(m)
}

pub fn pi_point_matrix(lambda: f64, g: &HPoint, n_h: usize) -> Result<RepOperator> {
    Ok(RepOperator { lambda, n: g.n, matrix: pi_point_block(lambda, g, n_h, n_h)? })
}

/// Generators whose images under dπ_λ are listed in the infinitesimal table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infinitesimal {
    X(usize),
    Y(usize),
    T,
    L,
}

/// Weyl symbol of π_λ(V): i√|λ|ξ_j, i√λ u_j, iλ, or −|λ|Σ(ξ_j² + u_j²).
pub fn infinitesimal_symbol(which: Infinitesimal, lambda: f64) -> impl Fn(&[f64], &[f64]) -> C64 + Sync + Send + Clone {
    let ab = lambda.abs().sqrt();
    let sg = signed_sqrt(lambda);
    move |xi: &[f64], u: &[f64]| match which {
        Infinitesimal::X(j) => C64::new(0.0, ab * xi[j]),
        Infinitesimal::Y(j) => C64::new(0.0, sg * u[j]),
        Infinitesimal::T => C64::new(0.0, lambda),
        Infinitesimal::L => {
            let r: f64 = xi.iter().zip(u).map(|(a, b)| a * a + b * b).sum();
            C64::new(-lambda.abs() * r, 0.0)
        }
    }
}

/// One λ-slice of the group Fourier transform.
#[derive(Clone, Debug)]
pub struct FourierSlice {
    pub lambda: f64,
    /// Weyl symbol at ξ nodes × midpoints, usable with [`PhaseSpace::kernel_from_table`].
    pub table: SymbolTable,
    /// Discretized kernel on the u-grid (weighted by hⁿ).
    pub kernel: Vec<C64>,
    pub matrix: RepOperator,
}

impl FourierSlice {
    /// HS norm of the discretized integral operator.
    pub fn kernel_hs_norm(&self) -> f64 {
        self.kernel.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// t-transform ∫ κ(x,y,t) e^{−iλt} dt on the (x,y) grid.
pub fn t_transform(kappa: &GridFunction, lambda: f64) -> Result<Vec<C64>> {
    let n = group_dim(&kappa.grid)?;
    let tg = kappa.grid.axes[2 * n];
    let limit = PI / tg.spacing();
    if lambda.abs() > limit {
        return Err(Error::OutOfBand { lambda, limit });
    }
    let mt = tg.points();
    let w: Vec<C64> = (0..mt).map(|k| C64::from_polar(tg.spacing(), -lambda * tg.node(k))).collect();
    let rows = kappa.values.len() / mt;
    Ok((0..rows)
        .map(|r| kappa.values[r * mt..(r + 1) * mt].iter().zip(&w).map(|(a, b)| a * b).sum())
        .collect())
}

/// Direct DFT matrix rows e^{−i f_r x_c} h, zeroed above the Nyquist frequency.
fn dft_rows(axis: &crate::Grid1D, freqs: &[f64]) -> Vec<C64> {
    let nyq = PI / axis.spacing();
    let h = axis.spacing();
    let mut m = Vec::with_capacity(freqs.len() * axis.points());
    for &f in freqs {
        for i in 0..axis.points() {
            m.push(if f.abs() > nyq { C64::new(0.0, 0.0) } else { C64::from_polar(h, -f * axis.node(i)) });
        }
    }
    m
}

/// The unnormalized Fourier transform ∫κ e^{−i(√|λ|ξ·x + √λ u·y + λt)} on
/// the phase-space symbol table of `ps`; π_λ(κ) is its Weyl quantization.
pub fn fourier_symbol_table(ps: &PhaseSpace, kappa: &GridFunction, lambda: f64) -> Result<SymbolTable> {
    let n = group_dim(&kappa.grid)?;
    if n != 1 || ps.n != 1 {
        return Err(Error::Unsupported("group Fourier transform is implemented for n = 1".into()));
    }
    let psi = t_transform(kappa, lambda)?;
    let (gx, gy) = (kappa.grid.axes[0], kappa.grid.axes[1]);
    let ab = lambda.abs().sqrt();
    let sg = signed_sqrt(lambda);
    let xi = ps.xi_grid();
    let fx: Vec<f64> = (0..ps.m_xi).map(|l| ab * xi.node(l)).collect();
    let fy: Vec<f64> = (0..ps.midpoint_count()).map(|m| sg * ps.midpoint(m)).collect();
    let shape = [gx.points(), gy.points()];
    let bx = transform_axis(&psi, &shape, 0, &dft_rows(&gx, &fx), fx.len());
    let by = transform_axis(&bx, &[fx.len(), gy.points()], 1, &dft_rows(&gy, &fy), fy.len());
    // by is (ξ, midpoint); the table is (midpoint, ξ)
    let (nx, nw) = (fx.len(), fy.len());
    let mut values = vec![C64::new(0.0, 0.0); nx * nw];
    for l in 0..nx {
        for m in 0..nw {
            values[m * nx + l] = by[l * nw + m];
        }
    }
    Ok(SymbolTable { values })
}

/// π_λ(κ) as kernel and truncated Hermite matrix.
pub fn group_fourier(ps: &PhaseSpace, kappa: &GridFunction, lambda: f64) -> Result<FourierSlice> {
    let table = fourier_symbol_table(ps, kappa, lambda)?;
    let kernel = ps.kernel_from_table(&table);
    let matrix = ps.matrix_from_kernel(&kernel, lambda);
    Ok(FourierSlice { lambda, table, kernel, matrix })
}

/// All slices of a λ-grid.
pub fn group_fourier_all(ps: &PhaseSpace, kappa: &GridFunction, lgrid: &LambdaGrid) -> Result<Vec<FourierSlice>> {
    par::map_slice(&lgrid.nodes, |&l| group_fourier(ps, kappa, l)).into_iter().collect()
}

/// Outcome of a Plancherel calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlancherelCalibration {
    pub constant: f64,
    pub per_function: Vec<f64>,
    /// (max − min) / mean of the per-function constants.
    pub spread: f64,
    /// Relative change of the λ-integral when N_h is halved.
    pub truncation_delta: f64,
    /// Largest band-edge share of the λ-integral.
    pub tail_fraction: f64,
}

/// Analytic value (2π)^{−(n+1)} for the normalization used here.
pub fn plancherel_constant_analytic(n: usize) -> f64 {
    (2.0 * PI).powi(-(n as i32 + 1))
}

/// ∫‖π_λ(κ)‖²_HS |λ|ⁿ dλ from the truncated matrices at N_h and N_h/2.
pub fn hs_integral(ps: &PhaseSpace, kappa: &GridFunction, lgrid: &LambdaGrid) -> Result<(f64, f64, f64)> {
    let half = ps.n_h / 2;
    let rows: Vec<Result<(f64, f64)>> = par::map_slice(&lgrid.nodes, |&l| {
        let s = group_fourier(ps, kappa, l)?;
        let full = s.matrix.hs_norm().powi(2);
        let trunc = s.matrix.truncate(half).hs_norm().powi(2);
        Ok((full, trunc))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let trunc: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok((lgrid.integrate(&full), lgrid.integrate(&trunc), lgrid.tail_fraction(&full)))
}

pub const SPREAD_TOL: f64 = 1e-2;

/// ĉ_n = ‖κ‖² / ∫‖π_λ(κ)‖²_HS|λ|ⁿdλ averaged over `tests`.
pub fn calibrate_plancherel(ps: &PhaseSpace, tests: &[GridFunction], lgrid: &LambdaGrid) -> Result<PlancherelCalibration> {
    calibrate_plancherel_with(ps, tests, lgrid, SPREAD_TOL)
}

pub fn calibrate_plancherel_with(
    ps: &PhaseSpace,
    tests: &[GridFunction],
    lgrid: &LambdaGrid,
    spread_tol: f64,
) -> Result<PlancherelCalibration> {
    if tests.len() < 2 {
        return Err(Error::InvalidParameter("calibration needs at least two test functions".into()));
    }
    let mut per = Vec::new();
    let mut delta: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for k in tests {
        let (full, trunc, t) = hs_integral(ps, k, lgrid)?;
        if !(full > 0.0) {
            return Err(Error::NonFinite("vanishing Plancherel integral".into()));
        }
        per.push(k.l2_norm().powi(2) / full);
        delta = delta.max((full - trunc).abs() / full);
        tail = tail.max(t);
    }
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let max = per.iter().cloned().fold(f64::MIN, f64::max);
    let min = per.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / mean;
    if spread > spread_tol {
        return Err(Error::Spread { spread, tol: spread_tol });
    }
    Ok(PlancherelCalibration { constant: mean, per_function: per, spread, truncation_delta: delta, tail_fraction: tail })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_sqrt_convention() {
        let s = SignedSqrt::new(-4.0).unwrap();
        assert_eq!(s.value, -2.0);
        assert_eq!(s.value * s.value, 4.0);
        assert!(SignedSqrt::new(0.0).is_err());
    }

    #[test]
    fn lambda_grid_is_symmetric() {
        let g = LambdaGrid::new(1, 1.0 / 16.0, 16.0, 8).unwrap();
        assert_eq!(g.len(), 16);
        for k in 0..16 {
            assert!((g.nodes[k] + g.nodes[15 - k]).abs() < 1e-14);
            assert!(g.weights[k] > 0.0 && (g.weights[k] - g.weights[15 - k]).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_weights_integrate_powers() {
        // ∫_{1/16}^{16} λ^{-2} · λ dλ = ln 256 per sign
        let g = LambdaGrid::new(1, 1.0 / 16.0, 16.0, 257).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|l| l.powi(-2)).collect();
        assert!((g.integrate(&vals) - 2.0 * 256f64.ln()).abs() < 1e-10);
    }
}
