//! Quantization Op(σ)φ(g) = c_n ∫ Tr(π_λ(g)σ(g,λ)π_λ(φ))|λ|ⁿdλ, its Weyl-side
//! form, spectral Sobolev norms and probes built on them.

use crate::difference_ops::SymbolFamily;
use crate::error::{Error, Result};
use crate::heisenberg::{group_dim, GroupBox, HPoint};
use crate::phase_space::{hermite_eval, transform_axis, Grid1D, GridFunction, PhaseSpace, RepOperator, TensorGrid};
use crate::representations::{
    group_fourier, plancherel_constant_analytic, signed_sqrt, t_transform, LambdaGrid,
};
use crate::symbol_calculus::{CoefFn, LambdaSymbol};
use crate::{par, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest λ-edge share of an integral before it is reported as unresolved.
pub const TAIL_TOL: f64 = 1e-2;

/// Discretization shared by all quantization routines.
#[derive(Clone, Debug)]
pub struct QuantConfig {
    pub ps: PhaseSpace,
    pub lgrid: LambdaGrid,
    pub gbox: GroupBox,
    /// c_n of the trace formula.
    pub plancherel_constant: f64,
    /// c'_n of the Weyl-side formula.
    pub weyl_constant: f64,
    /// Output stride of the Weyl-side formula on each axis.
    pub weyl_stride: usize,
}

/// Analytic c'_n = (2π)^{1/2−n} for the normalization used here.
pub fn weyl_constant_analytic(n: usize) -> f64 {
    (2.0 * PI).powf(0.5 - n as f64)
}

impl QuantConfig {
    pub fn new(ps: PhaseSpace, lgrid: LambdaGrid, gbox: GroupBox) -> Result<QuantConfig> {
        if ps.n != 1 || lgrid.n != 1 || gbox.n != 1 {
            return Err(Error::Unsupported("quantization is implemented for n = 1".into()));
        }
        let limit = PI * gbox.t_points as f64 / (2.0 * gbox.t_half_width);
        if lgrid.lambda_max > limit {
            return Err(Error::OutOfBand { lambda: lgrid.lambda_max, limit });
        }
        let c = lgrid.plancherel_constant.unwrap_or_else(|| plancherel_constant_analytic(1));
        Ok(QuantConfig { ps, lgrid, gbox, plancherel_constant: c, weyl_constant: weyl_constant_analytic(1), weyl_stride: 3 })
    }

    /// n = 1, U = 10, M = 128, N_h = 32, box [−6,6]²×[−8,8], band [1/16,16].
    pub fn default_n1() -> Result<QuantConfig> {
        let ps = PhaseSpace::new(1, 10.0, 128, 2, 32)?;
        let lgrid = LambdaGrid::new(1, 1.0 / 16.0, 16.0, 64)?;
        let gbox = GroupBox { n: 1, half_width: 6.0, points: 48, t_half_width: 8.0, t_points: 96 };
        QuantConfig::new(ps, lgrid, gbox)
    }

    pub fn grid(&self) -> Result<TensorGrid> {
        self.gbox.grid()
    }

    pub fn with_n_h(&self, n_h: usize) -> Result<QuantConfig> {
        Ok(QuantConfig { ps: self.ps.with_n_h(n_h)?, ..self.clone() })
    }

    /// Output grid of the Weyl-side formula.
    pub fn weyl_grid(&self) -> Result<TensorGrid> {
        Ok(strided_grid(&self.grid()?, self.weyl_stride)?.0)
    }
}

fn strided_grid(grid: &TensorGrid, stride: usize) -> Result<(TensorGrid, Vec<usize>)> {
    let mut axes = Vec::new();
    let mut offs = Vec::new();
    for a in &grid.axes {
        let (g, o) = a.strided(stride)?;
        axes.push(g);
        offs.push(o);
    }
    Ok((TensorGrid::new(axes), offs))
}

/// Restriction of `f` to the stride-`stride` subgrid.
pub fn restrict(f: &GridFunction, stride: usize) -> Result<GridFunction> {
    let (sub, offs) = strided_grid(&f.grid, stride)?;
    let values = (0..sub.len())
        .map(|k| {
            let idx: Vec<usize> = sub.unflatten(k).iter().zip(&offs).map(|(i, o)| o + stride * i).collect();
            f.values[f.grid.flatten(&idx)]
        })
        .collect();
    GridFunction::new(sub, values)
}

type Piece = (Option<CoefFn>, SymbolFamily);

fn check_input(phi: &GridFunction, cfg: &QuantConfig) -> Result<()> {
    group_dim(&phi.grid)?;
    if phi.grid != cfg.grid()? {
        return Err(Error::GridMismatch("function is not sampled on the configured group box".into()));
    }
    Ok(())
}

/// Weyl matrix of one piece at λ (adjointed if requested).
fn piece_matrix(ps: &PhaseSpace, fam: &SymbolFamily, lambda: f64, adjoint: bool) -> RepOperator {
    let g = HPoint::origin(fam.n);
    let f = fam.clone();
    let m = ps.opw_matrix(&move |x: &[f64], u: &[f64]| f.eval(&g, lambda, x, u), lambda);
    if adjoint {
        m.adjoint()
    } else {
        m
    }
}

/// I(x₀, y₀) = e^{−iλt₀}Tr(π_λ(x₀,y₀,t₀)M) on the given x and y nodes.
fn trace_against_translations(m: &DMatrix<C64>, lambda: f64, xs: &[f64], ys: &[f64]) -> Vec<C64> {
    let nh = m.nrows();
    let s = lambda.abs().sqrt();
    let sg = signed_sqrt(lambda);
    let ymax = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    let reach = (2.0 * nh as f64 + 1.0).sqrt();
    let half = reach + 8.0;
    let du = PI / (2.0 * reach + s * ymax + 12.0);
    let nq = (2.0 * half / du).ceil() as usize + 1;
    let us: Vec<f64> = (0..nq).map(|q| -half + q as f64 * du).collect();
    // c(u) = M·H(u)
    let c: Vec<Vec<C64>> = us
        .iter()
        .map(|&u| {
            let h = hermite_eval(nh, u);
            (0..nh).map(|k| (0..nh).map(|j| m[(k, j)] * h[j]).sum()).collect()
        })
        .collect();
    let d: Vec<Vec<C64>> = par::map_slice(xs, |&x0| {
        us.iter()
            .zip(&c)
            .map(|(&u, ck)| {
                hermite_eval(nh, u + s * x0).iter().zip(ck).map(|(h, c)| c * *h).sum::<C64>() * du
            })
            .collect()
    });
    let mut out = vec![C64::new(0.0, 0.0); xs.len() * ys.len()];
    for (a, &y0) in ys.iter().enumerate() {
        let ph: Vec<C64> = us.iter().map(|&u| C64::from_polar(1.0, sg * y0 * u)).collect();
        for (b, &x0) in xs.iter().enumerate() {
            let v: C64 = d[b].iter().zip(&ph).map(|(a, p)| a * p).sum();
            out[b * ys.len() + a] = v * C64::from_polar(1.0, lambda * x0 * y0 / 2.0);
        }
    }
    out
}

/// c_n Σ_λ w_λ e^{iλt₀} slice_λ(x₀,y₀) on the (x,y,t) output grid, per piece,
/// then combined with the piece coefficients.
fn synthesize(
    slices: &[Vec<Vec<C64>>],
    pieces: &[Piece],
    lgrid: &LambdaGrid,
    weight_power: i32,
    constant: f64,
    out: &TensorGrid,
) -> Result<GridFunction> {
    let (gx, gy, gt) = (out.axes[0], out.axes[1], out.axes[2]);
    let nxy = gx.points() * gy.points();
    let ts = gt.nodes();
    let w: Vec<f64> = lgrid.nodes.iter().zip(&lgrid.weights).map(|(l, w)| w / l.abs().powi(weight_power)).collect();
    // phases[t][k] = w_k e^{iλ_k t}
    let phases: Vec<Vec<C64>> =
        ts.iter().map(|&t0| lgrid.nodes.iter().zip(&w).map(|(&l, &wk)| C64::from_polar(wk, l * t0)).collect()).collect();
    let per_piece: Vec<Vec<C64>> = (0..pieces.len())
        .map(|p| {
            let rows = par::map_range(nxy, |xy| {
                let col: Vec<C64> = slices.iter().map(|s| s[p][xy]).collect();
                phases
                    .iter()
                    .map(|ph| col.iter().zip(ph).map(|(a, b)| a * b).sum::<C64>() * constant)
                    .collect::<Vec<_>>()
            });
            rows.concat()
        })
        .collect();
    let mut values = vec![C64::new(0.0, 0.0); out.len()];
    for (p, (coef, _)) in pieces.iter().enumerate() {
        for (k, v) in values.iter_mut().enumerate() {
            let c = match coef {
                Some(f) => f(&HPoint::from_coords(&out.point(k)).expect("odd")),
                None => C64::new(1.0, 0.0),
            };
            *v += c * per_piece[p][k];
        }
    }
    GridFunction::new(out.clone(), values)
}

fn apply_pieces(pieces: &[Piece], phi: &GridFunction, cfg: &QuantConfig, stride: usize, adjoint: bool) -> Result<GridFunction> {
    check_input(phi, cfg)?;
    let out = if stride == 1 { phi.grid.clone() } else { strided_grid(&phi.grid, stride)?.0 };
    let (xs, ys) = (out.axes[0].nodes(), out.axes[1].nodes());
    let slices: Vec<Result<Vec<Vec<C64>>>> = cfg
        .lgrid
        .nodes
        .iter()
        .map(|&l| {
            let phi_hat = group_fourier(&cfg.ps, phi, l)?.matrix;
            Ok(pieces
                .iter()
                .map(|(_, fam)| {
                    let s = piece_matrix(&cfg.ps, fam, l, adjoint);
                    let m = &s.matrix * &phi_hat.matrix;
                    trace_against_translations(&m, l, &xs, &ys)
                })
                .collect())
        })
        .collect();
    let slices: Vec<Vec<Vec<C64>>> = slices.into_iter().collect::<Result<_>>()?;
    synthesize(&slices, pieces, &cfg.lgrid, 0, cfg.plancherel_constant, &out)
}

/// Op(σ)φ on the full group grid by the trace formula.
pub fn apply(sym: &LambdaSymbol, phi: &GridFunction, cfg: &QuantConfig) -> Result<GridFunction> {
    apply_pieces(&sym.pieces()?, phi, cfg, 1, false)
}

/// Op(σ)φ on the stride-`stride` subgrid.
pub fn apply_strided(sym: &LambdaSymbol, phi: &GridFunction, cfg: &QuantConfig, stride: usize) -> Result<GridFunction> {
    apply_pieces(&sym.pieces()?, phi, cfg, stride, false)
}

/// Op(σ)*ψ for g-independent σ, by adjointing every Weyl matrix.
pub fn apply_adjoint(sym: &LambdaSymbol, psi: &GridFunction, cfg: &QuantConfig) -> Result<GridFunction> {
    if sym.family.g_dependent {
        return Err(Error::Unsupported("adjoint of a g-dependent symbol".into()));
    }
    apply_pieces(&sym.pieces()?, psi, cfg, 1, true)
}

/// Unnormalized Euclidean transform ∫φ e^{−i(η·(x,y) + λt)} on the dual
/// lattice of the (x,y) grid, row-major (η_x, η_y).
fn euclidean_slice(phi: &GridFunction, lambda: f64) -> Result<Vec<C64>> {
    let psi = t_transform(phi, lambda)?;
    let (gx, gy) = (phi.grid.axes[0], phi.grid.axes[1]);
    let rows = |g: &Grid1D| {
        let d = g.dual();
        let mut m = Vec::with_capacity(g.points() * g.points());
        for r in 0..d.points() {
            for c in 0..g.points() {
                m.push(C64::from_polar(g.spacing(), -d.node(r) * g.node(c)));
            }
        }
        m
    };
    let a = transform_axis(&psi, &[gx.points(), gy.points()], 0, &rows(&gx), gx.points());
    Ok(transform_axis(&a, &[gx.points(), gy.points()], 1, &rows(&gy), gy.points()))
}

/// Op(σ)φ by the Weyl-side formula on the strided grid of `cfg`:
/// c'(2π)^{−n−3/2} ∫dλ e^{iλt₀} ∫dη a((η_x − λy₀/2)/√|λ|, (η_y + λx₀/2)/√λ)
/// e^{i(x₀η_x + y₀η_y)} F(η, λ).
pub fn apply_weyl_form(sym: &LambdaSymbol, phi: &GridFunction, cfg: &QuantConfig) -> Result<GridFunction> {
    apply_weyl_with(sym, phi, cfg, cfg.weyl_constant)
}

fn apply_weyl_with(sym: &LambdaSymbol, phi: &GridFunction, cfg: &QuantConfig, constant: f64) -> Result<GridFunction> {
    check_input(phi, cfg)?;
    let pieces = sym.pieces()?;
    let out = cfg.weyl_grid()?;
    let (xs, ys) = (out.axes[0].nodes(), out.axes[1].nodes());
    let (gx, gy) = (phi.grid.axes[0], phi.grid.axes[1]);
    let (ex, ey) = (gx.dual().nodes(), gy.dual().nodes());
    let deta = gx.dual().spacing() * gy.dual().spacing();
    let px: Vec<Vec<C64>> = xs.iter().map(|&x| ex.iter().map(|&e| C64::from_polar(1.0, x * e)).collect()).collect();
    let py: Vec<Vec<C64>> = ys.iter().map(|&y| ey.iter().map(|&e| C64::from_polar(1.0, y * e)).collect()).collect();
    let origin = HPoint::origin(1);
    let slices: Vec<Result<Vec<Vec<C64>>>> = cfg
        .lgrid
        .nodes
        .iter()
        .map(|&l| {
            let f = euclidean_slice(phi, l)?;
            let (ab, sg) = (l.abs().sqrt(), signed_sqrt(l));
            let per: Vec<Vec<C64>> = pieces
                .iter()
                .map(|(_, fam)| {
                    let pts: Vec<(usize, usize)> =
                        (0..xs.len()).flat_map(|a| (0..ys.len()).map(move |b| (a, b))).collect();
                    par::map_slice(&pts, |&(a, b)| {
                        let (x0, y0) = (xs[a], ys[b]);
                        let mut acc = C64::new(0.0, 0.0);
                        for (i, &hx) in ex.iter().enumerate() {
                            let xi = [(hx - l * y0 / 2.0) / ab];
                            let row = &f[i * ey.len()..(i + 1) * ey.len()];
                            let mut inner = C64::new(0.0, 0.0);
                            for (j, &hy) in ey.iter().enumerate() {
                                let u = [(hy + l * x0 / 2.0) / sg];
                                inner += fam.eval(&origin, l, &xi, &u) * py[b][j] * row[j];
                            }
                            acc += inner * px[a][i];
                        }
                        acc * deta
                    })
                })
                .collect();
            Ok(per)
        })
        .collect();
    let slices: Vec<Vec<Vec<C64>>> = slices.into_iter().collect::<Result<_>>()?;
    synthesize(&slices, &pieces, &cfg.lgrid, 1, constant * (2.0 * PI).powf(-2.5), &out)
}

/// Independent calibration of c'_n by the inversion Op(1)φ = φ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylCalibration {
    pub constant: f64,
    pub per_function: Vec<f64>,
    pub spread: f64,
}

pub fn calibrate_weyl_constant(samples: &[GridFunction], cfg: &QuantConfig) -> Result<WeylCalibration> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("calibration needs at least one sample".into()));
    }
    let one = LambdaSymbol::new("one", SymbolFamily::from_lambda_fn(1, |_, _, _| C64::new(1.0, 0.0)), 0.0, 1.0, 0.0)?;
    let mut per = Vec::new();
    for phi in samples {
        let a = apply_weyl_with(&one, phi, cfg, 1.0)?;
        let target = restrict(phi, cfg.weyl_stride)?;
        let num = a.inner(&target)?.re;
        let den = a.l2_norm().powi(2);
        if !(den > 0.0) {
            return Err(Error::NonFinite("vanishing inversion output".into()));
        }
        per.push(num / den);
    }
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let max = per.iter().cloned().fold(f64::MIN, f64::max);
    let min = per.iter().cloned().fold(f64::MAX, f64::min);
    Ok(WeylCalibration { constant: mean, per_function: per, spread: (max - min) / mean })
}

/// Spectral Sobolev norm with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub norm: f64,
    pub tail_fraction: f64,
    /// Relative change of the squared norm when N_h is halved.
    pub truncation_delta: f64,
}

/// (c_n Σ_λ w_λ ‖π_λ(I−𝓛)^{s/2}π_λ(φ)‖²_HS)^{1/2}.
pub fn sobolev_report(phi: &GridFunction, s: f64, cfg: &QuantConfig) -> Result<SobolevReport> {
    group_dim(&phi.grid)?;
    let half = cfg.ps.n_h / 2;
    let rows: Vec<Result<(f64, f64)>> = par::map_slice(&cfg.lgrid.nodes, |&l| {
        let m = group_fourier(&cfg.ps, phi, l)?.matrix;
        let d = RepOperator::spectrum_i_minus_l(l, 1, m.dim());
        let mut full = 0.0;
        let mut trunc = 0.0;
        for k in 0..m.dim() {
            let wk = d[k].powf(s);
            for j in 0..m.dim() {
                let v = wk * m.matrix[(k, j)].norm_sqr();
                full += v;
                if k < half && j < half {
                    trunc += v;
                }
            }
        }
        Ok((full, trunc))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let trunc: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let a = cfg.lgrid.integrate(&full) * cfg.plancherel_constant;
    let b = cfg.lgrid.integrate(&trunc) * cfg.plancherel_constant;
    let tail = cfg.lgrid.tail_fraction(&full);
    Ok(SobolevReport { norm: a.max(0.0).sqrt(), tail_fraction: tail, truncation_delta: if a > 0.0 { (a - b) / a } else { 0.0 } })
}

pub fn sobolev_norm(phi: &GridFunction, s: f64, cfg: &QuantConfig) -> Result<f64> {
    let r = sobolev_report(phi, s, cfg)?;
    if r.tail_fraction > TAIL_TOL {
        return Err(Error::TailDominance { fraction: r.tail_fraction });
    }
    Ok(r.norm)
}

/// Per-sample ratios of a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub max_tail: f64,
}

fn finish_probe(ratios: Vec<f64>, tails: Vec<f64>) -> ProbeReport {
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let max_tail = tails.iter().cloned().fold(0.0, f64::max);
    ProbeReport { ratios, max_ratio, max_tail }
}

/// max over samples of ‖Op(σ)φ‖_{L²_{s−m}} / ‖φ‖_{L²_s}.
pub fn boundedness_probe(sym: &LambdaSymbol, s: f64, samples: &[GridFunction], cfg: &QuantConfig) -> Result<ProbeReport> {
    let mut ratios = Vec::new();
    let mut tails = Vec::new();
    for phi in samples {
        let a = apply(sym, phi, cfg)?;
        let num = sobolev_report(&a, s - sym.order, cfg)?;
        let den = sobolev_report(phi, s, cfg)?;
        ratios.push(num.norm / den.norm);
        tails.push(num.tail_fraction.max(den.tail_fraction));
    }
    Ok(finish_probe(ratios, tails))
}

/// Denominators below this fraction of the numerator flag a non-injective sample.
pub const INJECTIVITY_FLOOR: f64 = 1e-8;

/// max over samples of ‖φ‖_{L²_{s+m₀}} / ‖Aφ‖_{L²_s}.
pub fn subelliptic_probe(sym: &LambdaSymbol, m0: f64, s: f64, samples: &[GridFunction], cfg: &QuantConfig) -> Result<ProbeReport> {
    let mut ratios = Vec::new();
    let mut tails = Vec::new();
    for phi in samples {
        let a = apply(sym, phi, cfg)?;
        let num = sobolev_report(phi, s + m0, cfg)?;
        let den = sobolev_report(&a, s, cfg)?;
        if den.norm <= INJECTIVITY_FLOOR * num.norm {
            return Err(Error::NonFinite(format!("near-zero denominator {} in subelliptic ratio", den.norm)));
        }
        ratios.push(num.norm / den.norm);
        tails.push(num.tail_fraction.max(den.tail_fraction));
    }
    Ok(finish_probe(ratios, tails))
}

/// ‖Op(b)Op(a)φ − φ‖ / ‖φ‖.
pub fn composition_residual(a: &LambdaSymbol, b: &LambdaSymbol, phi: &GridFunction, cfg: &QuantConfig) -> Result<f64> {
    let ap = apply(a, phi, cfg)?;
    let bap = apply(b, &ap, cfg)?;
    bap.rel_l2_error(phi)
}
