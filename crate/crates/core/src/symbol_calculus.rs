//! Symbol classes S^m_{ρ,δ}(ℍₙ): the Shubin-type membership checker, operator
//! seminorms, ellipticity, a leading-order parametrix and built-in symbols.

use crate::difference_ops::{delta_power, phase_derivative, tilde_partial, x_g, SymbolFamily};
use crate::error::{Error, Result};
use crate::heisenberg::{Field, HPoint, MultiIndex};
use crate::phase_space::{PhaseSpace, PhaseSymbol, WeylSymbol};
use crate::representations::signed_sqrt;
use crate::{fd, par, C64};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type CoefFn = Arc<dyn Fn(&HPoint) -> C64 + Send + Sync>;

/// One factor c(g)·a(λ,ξ,u) of a symbol that is separable in g.
#[derive(Clone)]
pub struct GTerm {
    pub coef: CoefFn,
    pub family: SymbolFamily,
}

/// σ(g, λ) = Op^W(a_{g,λ}) with its declared class S^m_{ρ,δ}.
#[derive(Clone)]
pub struct LambdaSymbol {
    pub name: String,
    pub family: SymbolFamily,
    pub order: f64,
    pub rho: f64,
    pub delta: f64,
    /// Separable decomposition used when the symbol depends on g.
    pub g_terms: Option<Vec<GTerm>>,
}

impl fmt::Debug for LambdaSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LambdaSymbol")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("rho", &self.rho)
            .field("delta", &self.delta)
            .field("g_dependent", &self.family.g_dependent)
            .finish()
    }
}

fn check_class(rho: f64, delta: f64) -> Result<()> {
    if !(rho <= 1.0 && rho >= delta && delta >= 0.0) || (rho == 0.0 && delta == 0.0) {
        return Err(Error::InvalidParameter(format!("need 1 >= rho >= delta >= 0 and (rho,delta) != (0,0), got ({rho},{delta})")));
    }
    Ok(())
}

impl LambdaSymbol {
    pub fn new(name: &str, family: SymbolFamily, order: f64, rho: f64, delta: f64) -> Result<LambdaSymbol> {
        check_class(rho, delta)?;
        Ok(LambdaSymbol { name: name.to_string(), family, order, rho, delta, g_terms: None })
    }

    pub fn with_class(&self, order: f64, rho: f64, delta: f64) -> Result<LambdaSymbol> {
        check_class(rho, delta)?;
        Ok(LambdaSymbol { order, rho, delta, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.family.n
    }

    pub fn eval(&self, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64]) -> C64 {
        self.family.eval(g, lambda, xi, u)
    }

    /// Pieces (coefficient, g-independent family) for quantization.
    pub fn pieces(&self) -> Result<Vec<(Option<CoefFn>, SymbolFamily)>> {
        match (&self.g_terms, self.family.g_dependent) {
            (Some(t), _) => Ok(t.iter().map(|p| (Some(p.coef.clone()), p.family.clone())).collect()),
            (None, false) => Ok(vec![(None, self.family.clone())]),
            (None, true) => Err(Error::Unsupported(format!(
                "symbol '{}' depends on g without a separable decomposition",
                self.name
            ))),
        }
    }
}

/// Shubin weight 1 + |λ|(1 + |ξ|² + |u|²).
pub fn shubin_weight(lambda: f64, xi: &[f64], u: &[f64]) -> f64 {
    let r: f64 = xi.iter().chain(u).map(|v| v * v).sum();
    1.0 + lambda.abs() * (1.0 + r)
}

/// Finite sample set standing in for ℍₙ × (ℝ∖{0}) × ℝ²ⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_per_sign: usize,
    pub phase_half_width: f64,
    /// Odd number of nodes per phase axis (0 is always a node).
    pub phase_points: usize,
    pub g_half_width: f64,
    pub g_points: usize,
}

impl SampleSpec {
    pub fn default_for(n: usize) -> SampleSpec {
        SampleSpec {
            n,
            lambda_min: 1.0 / 16.0,
            lambda_max: 16.0,
            lambda_per_sign: 6,
            phase_half_width: 4.0,
            phase_points: 9,
            g_half_width: 2.0,
            g_points: 3,
        }
    }

    /// Doubled resolution, phase box, g-box and λ-band (in log scale).
    pub fn refine(&self) -> SampleSpec {
        let extra_band = (2.0f64 * 2.0).ln() / (self.lambda_max / self.lambda_min).ln();
        let per = ((self.lambda_per_sign - 1) as f64 * 2.0 * (1.0 + extra_band)).round() as usize + 1;
        SampleSpec {
            n: self.n,
            lambda_min: self.lambda_min / 2.0,
            lambda_max: self.lambda_max * 2.0,
            lambda_per_sign: per,
            phase_half_width: self.phase_half_width * 2.0,
            phase_points: 4 * (self.phase_points - 1) + 1,
            g_half_width: self.g_half_width * 2.0,
            g_points: 2 * (self.g_points - 1) + 1,
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let k = self.lambda_per_sign.max(2);
        let ds = (self.lambda_max / self.lambda_min).ln() / (k - 1) as f64;
        let pos: Vec<f64> = (0..k).map(|i| self.lambda_min * (i as f64 * ds).exp()).collect();
        let mut out: Vec<f64> = pos.iter().rev().map(|l| -l).collect();
        out.extend(pos);
        out
    }

    fn line(half: f64, points: usize) -> Vec<f64> {
        if points <= 1 {
            return vec![0.0];
        }
        (0..points).map(|i| -half + 2.0 * half * i as f64 / (points - 1) as f64).collect()
    }

    /// Phase points (ξ, u) flattened as 2n-vectors.
    pub fn phase_points_list(&self) -> Vec<Vec<f64>> {
        let line = SampleSpec::line(self.phase_half_width, self.phase_points);
        cartesian(&line, 2 * self.n)
    }

    /// g points; only the origin when `g_dependent` is false.
    pub fn group_points(&self, g_dependent: bool) -> Vec<HPoint> {
        if !g_dependent {
            return vec![HPoint::origin(self.n)];
        }
        let line = SampleSpec::line(self.g_half_width, self.g_points);
        cartesian(&line, 2 * self.n + 1).iter().map(|c| HPoint::from_coords(c).expect("odd")).collect()
    }
}

fn cartesian(line: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                line.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Values below this are treated as exact zeros of a derivative.
pub const ZERO_FLOOR: f64 = 1e-9;
/// Derivatives within this multiple of their roundoff bound count as zero.
pub const NOISE_FACTOR: f64 = 1e3;

/// Orders of one seminorm: ∂_ξ^α ∂_u^β ∂̃^{α̃} X_g^{β̃}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeminormIndex {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub alpha_t: usize,
    pub beta_g: MultiIndex,
}

impl SeminormIndex {
    pub fn phase_order(&self) -> usize {
        self.alpha.iter().sum::<usize>() + self.beta.iter().sum::<usize>()
    }

    pub fn label(&self) -> String {
        let v = |x: &[usize]| x.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "a=({}) b=({}) t={} g=({};{};{})",
            v(&self.alpha),
            v(&self.beta),
            self.alpha_t,
            v(&self.beta_g.alpha1),
            v(&self.beta_g.alpha2),
            self.beta_g.alpha3
        )
    }
}

/// ∂_ξ^α ∂_u^β ∂̃^{α̃} X_g^{β̃} a as a family.
pub fn derived_family(sym: &LambdaSymbol, idx: &SeminormIndex) -> SymbolFamily {
    let mut fam = x_g(&idx.beta_g, &sym.family);
    for _ in 0..idx.alpha_t {
        fam = tilde_partial(&fam);
    }
    phase_derivative(&idx.alpha, &idx.beta, &fam)
}

/// sup over the sample of |∂_ξ^α∂_u^β∂̃^{α̃}X_g^{β̃} a| divided by
/// |λ|^{ρ(|α|+|β|)/2}(1+|λ|(1+|ξ|²+|u|²))^{(m − 2ρα̃ + δ[β̃] − ρ(|α|+|β|))/2}.
pub fn shubin_seminorm(sym: &LambdaSymbol, idx: &SeminormIndex, sample: &SampleSpec) -> Result<f64> {
    let fam = derived_family(sym, idx);
    let k = idx.phase_order() as f64;
    let expo = (sym.order - 2.0 * sym.rho * idx.alpha_t as f64 + sym.delta * idx.beta_g.homogeneous_degree() as f64 - sym.rho * k) / 2.0;
    let n = sym.n();
    let phase = sample.phase_points_list();
    let gs = sample.group_points(sym.family.g_dependent);
    let lambdas = sample.lambdas();
    let mut jobs = Vec::with_capacity(gs.len() * lambdas.len());
    for g in &gs {
        for &l in &lambdas {
            jobs.push((*g, l));
        }
    }
    let sups: Vec<Result<f64>> = par::map_slice(&jobs, |(g, l)| {
        let mut best: f64 = 0.0;
        for p in &phase {
            let (xi, u) = p.split_at(n);
            let (v, noise) = fam.eval_noise(g, *l, xi, u, 1.0);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!("derivative {} at lambda={l}", idx.label())));
            }
            let a = v.norm();
            if a < ZERO_FLOOR.max(NOISE_FACTOR * noise) {
                continue;
            }
            let rhs = l.abs().powf(sym.rho * k / 2.0) * shubin_weight(*l, xi, u).powf(expo);
            best = best.max(a / rhs);
        }
        Ok(best)
    });
    let mut best: f64 = 0.0;
    for s in sups {
        best = best.max(s?);
    }
    Ok(best)
}

/// One row of a membership report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipRow {
    pub index: SeminormIndex,
    pub base: f64,
    pub refined: f64,
    pub growth: f64,
    pub pass: bool,
    /// Whether the row involves g-derivatives.
    pub g_row: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub symbol: String,
    pub order: f64,
    pub rho: f64,
    pub delta: f64,
    pub sample: SampleSpec,
    pub refined_sample: SampleSpec,
    pub rows: Vec<MembershipRow>,
    /// Verdict over rows without g-derivatives.
    pub phase_pass: bool,
    /// Verdict over rows with g-derivatives.
    pub g_pass: bool,
}

impl MembershipReport {
    pub fn pass(&self) -> bool {
        self.phase_pass && self.g_pass
    }

    pub fn worst_growth(&self) -> f64 {
        self.rows.iter().map(|r| r.growth).fold(0.0, f64::max)
    }
}

/// Allowed relative growth of a constant under refinement.
pub const GROWTH_TOL: f64 = 0.10;

/// All indices with |α|+|β| ≤ a, [β̃] ≤ b, α̃ ≤ c.
pub fn seminorm_indices(n: usize, a: usize, b: usize, c: usize) -> Vec<SeminormIndex> {
    let phase: Vec<Vec<usize>> = (0..=a)
        .flat_map(|tot| {
            let mut v = Vec::new();
            compositions(2 * n, tot, &mut vec![0; 2 * n], 0, &mut v);
            v
        })
        .collect();
    let gs = MultiIndex::up_to_degree(n, b);
    let mut out = Vec::new();
    for g in &gs {
        for t in 0..=c {
            for p in &phase {
                out.push(SeminormIndex { alpha: p[..n].to_vec(), beta: p[n..].to_vec(), alpha_t: t, beta_g: g.clone() });
            }
        }
    }
    out
}

fn compositions(dim: usize, rem: usize, cur: &mut Vec<usize>, pos: usize, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == dim {
        cur[pos] = rem;
        out.push(cur.clone());
        return;
    }
    for k in (0..=rem).rev() {
        cur[pos] = k;
        compositions(dim, rem - k, cur, pos + 1, out);
    }
}

pub fn membership(sym: &LambdaSymbol, orders: (usize, usize, usize), sample: &SampleSpec) -> Result<MembershipReport> {
    membership_with(sym, orders, sample, GROWTH_TOL)
}

pub fn membership_with(
    sym: &LambdaSymbol,
    orders: (usize, usize, usize),
    sample: &SampleSpec,
    growth_tol: f64,
) -> Result<MembershipReport> {
    let refined = sample.refine();
    let mut rows = Vec::new();
    for idx in seminorm_indices(sym.n(), orders.0, orders.1, orders.2) {
        let g_row = !idx.beta_g.is_zero();
        let (base, fine) = if g_row && !sym.family.g_dependent {
            (0.0, 0.0)
        } else {
            (shubin_seminorm(sym, &idx, sample)?, shubin_seminorm(sym, &idx, &refined)?)
        };
        let growth = if base > 0.0 { fine / base } else if fine > ZERO_FLOOR { f64::INFINITY } else { 1.0 };
        let pass = fine.is_finite() && fine <= (1.0 + growth_tol) * base + ZERO_FLOOR;
        rows.push(MembershipRow { index: idx, base, refined: fine, growth, pass, g_row });
    }
    let phase_pass = rows.iter().filter(|r| !r.g_row).all(|r| r.pass);
    let g_pass = rows.iter().filter(|r| r.g_row).all(|r| r.pass);
    Ok(MembershipReport {
        symbol: sym.name.clone(),
        order: sym.order,
        rho: sym.rho,
        delta: sym.delta,
        sample: sample.clone(),
        refined_sample: refined,
        rows,
        phase_pass,
        g_pass,
    })
}

/// Value of the operator seminorm together with its N_h/2 counterpart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSeminorm {
    pub value: f64,
    pub half_truncation: f64,
}

/// Tolerated relative change between N_h/2 and N_h truncations.
pub const TRUNCATION_TOL: f64 = 0.10;

/// sup over [α] ≤ a, [β] ≤ b, |γ| ≤ c of
/// ‖π_λ(I−𝓛)^{(ρ[α]−m−δ[β]+γ)/2} X_g^β Δ'^α σ(g,λ) π_λ(I−𝓛)^{−γ/2}‖_op.
pub fn operator_seminorm(
    sym: &LambdaSymbol,
    (a, b, c): (usize, usize, usize),
    lambda: f64,
    g: &HPoint,
    ps: &PhaseSpace,
) -> Result<OperatorSeminorm> {
    let n = sym.n();
    let mut value: f64 = 0.0;
    let mut half: f64 = 0.0;
    for alpha in MultiIndex::up_to_degree(n, a) {
        let diffed = delta_power(&alpha, &sym.family);
        for beta in MultiIndex::up_to_degree(n, b) {
            if !beta.is_zero() && !sym.family.g_dependent {
                continue;
            }
            let fam = x_g(&beta, &diffed);
            let gg = *g;
            let m = ps.opw_matrix(&move |xi: &[f64], u: &[f64]| fam.eval(&gg, lambda, xi, u), lambda);
            for gamma in -(c as i64)..=(c as i64) {
                let gm = gamma as f64;
                let left = (sym.rho * alpha.homogeneous_degree() as f64 - sym.order - sym.delta * beta.homogeneous_degree() as f64 + gm) / 2.0;
                let s = m.sandwich_power(left, -gm / 2.0);
                value = value.max(s.op_norm());
                half = half.max(s.truncate(ps.n_h / 2).op_norm());
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("operator seminorm".into()));
    }
    if value > 0.0 && (value - half).abs() > TRUNCATION_TOL * value {
        return Err(Error::Truncation { value, delta: (value - half).abs() / value });
    }
    Ok(OperatorSeminorm { value, half_truncation: half })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticReport {
    pub radius: f64,
    pub constant: f64,
    pub refined_constant: f64,
    pub pass: bool,
}

fn elliptic_constant(sym: &LambdaSymbol, radius: f64, sample: &SampleSpec) -> f64 {
    let n = sym.n();
    let phase = sample.phase_points_list();
    let gs = sample.group_points(sym.family.g_dependent);
    let mut jobs = Vec::new();
    for g in &gs {
        for l in sample.lambdas() {
            jobs.push((*g, l));
        }
    }
    let mins = par::map_slice(&jobs, |(g, l)| {
        let mut best = f64::INFINITY;
        for p in &phase {
            let (xi, u) = p.split_at(n);
            let r: f64 = p.iter().map(|v| v * v).sum::<f64>() * l.abs();
            if r < radius {
                continue;
            }
            let v = sym.eval(g, *l, xi, u).norm() / shubin_weight(*l, xi, u).powf(sym.order / 2.0);
            best = best.min(v);
        }
        best
    });
    mins.into_iter().fold(f64::INFINITY, f64::min)
}

/// Largest C with |a| ≥ C(1+|λ|(1+|ξ|²+|u|²))^{m/2} on {|λ|(|ξ|²+|u|²) ≥ R};
/// passes when C > 0 and survives refinement within the growth tolerance.
pub fn elliptic_check(sym: &LambdaSymbol, radius: f64, sample: &SampleSpec) -> EllipticReport {
    let c0 = elliptic_constant(sym, radius, sample);
    let c1 = elliptic_constant(sym, radius, &sample.refine());
    let pass = c0.is_finite() && c0 > ZERO_FLOOR && c1 >= (1.0 - GROWTH_TOL) * c0;
    EllipticReport { radius, constant: c0, refined_constant: c1, pass }
}

/// Quintic smoothstep: 0 for r ≤ R, 1 for r ≥ 2R.
pub fn cutoff(radius: f64, r: f64) -> f64 {
    let s = ((r - radius) / radius).clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// b = χ_R(|λ|(|ξ|²+|u|²))/a with declared order −m; refuses non-elliptic input.
pub fn parametrix_leading(sym: &LambdaSymbol, radius: f64, sample: &SampleSpec) -> Result<LambdaSymbol> {
    let rep = elliptic_check(sym, radius, sample);
    if !rep.pass {
        return Err(Error::NotElliptic { constant: rep.constant.min(rep.refined_constant) });
    }
    parametrix_unchecked(sym, radius)
}

/// The same construction without the ellipticity certificate.
pub fn parametrix_unchecked(sym: &LambdaSymbol, radius: f64) -> Result<LambdaSymbol> {
    if sym.g_terms.is_some() {
        return Err(Error::Unsupported("parametrix of a g-separable symbol".into()));
    }
    let fam = sym.family.clone();
    let b = SymbolFamily::new(sym.n(), fam.g_dependent, move |g, l, xi, u| {
        let r: f64 = xi.iter().chain(u).map(|v| v * v).sum::<f64>() * l.abs();
        let chi = cutoff(radius, r);
        if chi == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::new(chi, 0.0) / fam.eval(g, l, xi, u)
    });
    LambdaSymbol::new(&format!("parametrix({})", sym.name), b, -sym.order, sym.rho, sym.delta)
}

/// Smooth coefficient functions on ℍₙ for variable-coefficient examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coefficient {
    Constant(f64),
    /// offset + amplitude·sin(x₁).
    ShiftedSine { offset: f64, amplitude: f64 },
}

impl Coefficient {
    pub fn eval(&self, g: &HPoint) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::ShiftedSine { offset, amplitude } => offset + amplitude * g.x[0].sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

/// Parameters accepted by [`builtin_symbol`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolParams {
    pub n: usize,
    /// Index j of X_j / Y_j.
    pub j: usize,
    pub m: u32,
    pub m0: u32,
    pub f1: Coefficient,
    pub f2: Coefficient,
}

impl Default for SymbolParams {
    fn default() -> Self {
        SymbolParams { n: 1, j: 0, m: 2, m0: 2, f1: Coefficient::Constant(1.0), f2: Coefficient::Constant(1.0) }
    }
}

pub const BUILTIN_NAMES: [&str; 9] = ["one", "X", "Y", "T", "L", "I-L", "XY-T", "f1-f2L", "sin-inv-lambda"];

fn rsq(xi: &[f64], u: &[f64]) -> f64 {
    xi.iter().chain(u).map(|v| v * v).sum()
}

/// The example symbols at their natural class.
pub fn builtin_symbol(name: &str, p: &SymbolParams) -> Result<LambdaSymbol> {
    let n = p.n;
    if n == 0 || n > 3 {
        return Err(Error::InvalidParameter(format!("dimension n={n} must be 1..=3")));
    }
    let j = p.j;
    if j >= n {
        return Err(Error::InvalidParameter(format!("index j={j} out of range for n={n}")));
    }
    let i = C64::new(0.0, 1.0);
    let fam = |f: fn(f64, &[f64], &[f64], usize) -> C64| SymbolFamily::from_lambda_fn(n, move |l, x, u| f(l, x, u, j));
    let sym = match name {
        "one" => LambdaSymbol::new(name, fam(|_, _, _, _| C64::new(1.0, 0.0)), 0.0, 1.0, 0.0)?,
        "X" => LambdaSymbol::new(name, fam(|l, x, _, j| C64::new(0.0, l.abs().sqrt() * x[j])), 1.0, 1.0, 0.0)?,
        "Y" => LambdaSymbol::new(name, fam(|l, _, u, j| C64::new(0.0, signed_sqrt(l) * u[j])), 1.0, 1.0, 0.0)?,
        "T" => LambdaSymbol::new(name, fam(|l, _, _, _| C64::new(0.0, l)), 2.0, 1.0, 0.0)?,
        "L" => LambdaSymbol::new(name, fam(|l, x, u, _| C64::new(-l.abs() * rsq(x, u), 0.0)), 2.0, 1.0, 0.0)?,
        "I-L" => LambdaSymbol::new(name, fam(|l, x, u, _| C64::new(1.0 + l.abs() * rsq(x, u), 0.0)), 2.0, 1.0, 0.0)?,
        "sin-inv-lambda" => LambdaSymbol::new(name, fam(|l, _, _, _| C64::new((1.0 / l).sin(), 0.0)), 0.0, 1.0, 0.0)?,
        "XY-T" => {
            if n != 1 {
                return Err(Error::InvalidParameter("XY-T family is defined on H_1".into()));
            }
            let (m, m0) = (p.m, p.m0);
            if m % 2 != 0 || m0 % 2 != 0 || m0 == 0 || m < m0 {
                return Err(Error::InvalidParameter(format!("need even m >= m0 >= 2, got m={m}, m0={m0}")));
            }
            let f = SymbolFamily::from_lambda_fn(1, move |l, x, u| {
                let xs = C64::new(0.0, l.abs().sqrt() * x[0]);
                let ys = C64::new(0.0, signed_sqrt(l) * u[0]);
                xs.powu(m) + i * ys.powu(m0) + C64::new(0.0, l).powu(m0 / 2)
            });
            LambdaSymbol::new(name, f, m as f64, 1.0, 0.0)?
        }
        "f1-f2L" => {
            let (f1, f2) = (p.f1, p.f2);
            let whole = SymbolFamily::new(n, !(f1.is_constant() && f2.is_constant()), move |g, l, x, u| {
                C64::new(f1.eval(g) + f2.eval(g) * l.abs() * rsq(x, u), 0.0)
            });
            let mut s = LambdaSymbol::new(name, whole, 2.0, 1.0, 0.0)?;
            if s.family.g_dependent {
                let one = SymbolFamily::from_lambda_fn(n, |_, _, _| C64::new(1.0, 0.0));
                let lap = SymbolFamily::from_lambda_fn(n, |l, x, u| C64::new(l.abs() * rsq(x, u), 0.0));
                s.g_terms = Some(vec![
                    GTerm { coef: Arc::new(move |g| C64::new(f1.eval(g), 0.0)), family: one },
                    GTerm { coef: Arc::new(move |g| C64::new(f2.eval(g), 0.0)), family: lap },
                ]);
            }
            s
        }
        other => return Err(Error::InvalidParameter(format!("unknown symbol '{other}'; known: {}", BUILTIN_NAMES.join(", ")))),
    };
    Ok(sym)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub infimum: f64,
    pub refined_infimum: f64,
    /// sup |X^α f₁|, sup |X^α f₂| over [α] ≤ order, base and refined boxes.
    pub derivative_sups: Vec<(String, f64, f64)>,
    pub pass: bool,
}

fn coefficient_infimum(f1: Coefficient, f2: Coefficient, big_lambda: f64, sample: &SampleSpec) -> f64 {
    let lo = big_lambda.max(sample.lambda_min);
    let k = sample.lambda_per_sign.max(2);
    let ds = (sample.lambda_max / lo).ln() / (k - 1) as f64;
    let mut ls: Vec<f64> = (0..k).map(|i| lo * (i as f64 * ds).exp()).collect();
    if big_lambda > 0.0 && big_lambda < sample.lambda_min {
        ls.push(big_lambda);
    }
    let mut best = f64::INFINITY;
    for g in sample.group_points(true) {
        for &l in &ls {
            best = best.min((f1.eval(&g) + f2.eval(&g) * l).abs() / (1.0 + l));
        }
    }
    best
}

fn coefficient_derivative_sup(f: Coefficient, alpha: &MultiIndex, sample: &SampleSpec) -> f64 {
    let fields = alpha.fields();
    let n = sample.n;
    sample
        .group_points(true)
        .iter()
        .map(|g| {
            let h = |s: &[f64]| {
                let mut p = *g;
                for (k, fl) in fields.iter().enumerate() {
                    p = p.mul(&fl.exp(n, s[k]));
                }
                C64::new(f.eval(&p), 0.0)
            };
            let zeros = vec![0.0; fields.len()];
            let orders = vec![1; fields.len()];
            let steps = vec![0.05; fields.len()];
            fd::mixed_partial(&h, &zeros, &orders, &steps).norm()
        })
        .fold(0.0, f64::max)
}

/// inf over sampled g and λ ≥ Λ of |f₁ + f₂λ|/(1+λ), plus sup-norms of
/// left-invariant derivatives of f₁, f₂ up to homogeneous degree `order`.
pub fn variable_coeff_condition(f1: Coefficient, f2: Coefficient, big_lambda: f64, order: usize, sample: &SampleSpec) -> CoefficientReport {
    let refined = sample.refine();
    let inf0 = coefficient_infimum(f1, f2, big_lambda, sample);
    let inf1 = coefficient_infimum(f1, f2, big_lambda, &refined);
    let mut sups = Vec::new();
    let mut stable = true;
    for alpha in MultiIndex::up_to_degree(sample.n, order) {
        if alpha.is_zero() {
            continue;
        }
        for (label, f) in [("f1", f1), ("f2", f2)] {
            let a = coefficient_derivative_sup(f, &alpha, sample);
            let b = coefficient_derivative_sup(f, &alpha, &refined);
            stable &= b.is_finite() && b <= (1.0 + GROWTH_TOL) * a + 1e-6;
            let name = format!("{label}:{:?}", alpha.fields().iter().map(|f| match f {
                Field::X(_) => 'X',
                Field::Y(_) => 'Y',
                Field::T => 'T',
            }).collect::<String>());
            sups.push((name, a, b));
        }
    }
    let pass = inf0 > ZERO_FLOOR && inf1 >= (1.0 - GROWTH_TOL) * inf0 && stable;
    CoefficientReport { infimum: inf0, refined_infimum: inf1, derivative_sups: sups, pass }
}

/// A sampled renormalized symbol ã(ξ′, u′), used as a_λ(ξ,u) = ã(√|λ|ξ, √λu);
/// the samples are interpolated and vanish outside their box.
pub fn sampled_symbol(name: &str, table: WeylSymbol, order: f64, rho: f64, delta: f64) -> Result<LambdaSymbol> {
    let n = table.n;
    let fam = SymbolFamily::from_lambda_fn(n, move |l, x, u| {
        let (a, s) = (l.abs().sqrt(), signed_sqrt(l));
        let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
        let us: Vec<f64> = u.iter().map(|v| v * s).collect();
        table.eval(&xs, &us)
    });
    LambdaSymbol::new(name, fam, order, rho, delta)
}
