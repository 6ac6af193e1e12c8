//! Difference operators Δ_{x_j}, Δ_{y_j}, Δ_t on families of λ-symbols,
//! the operator ∂̃ = ∂_λ − (1/2λ)Σ(u_j∂_{u_j} + ξ_j∂_{ξ_j}), X_g-derivatives
//! and the renormalization a_λ(ξ,u) = ã_λ(√|λ|ξ, √λu).
//!
//! A family is a base evaluator plus a linear combination of terms
//! c·sgn(λ)^q·|λ|^p·D a, where D is a mixed derivative of the base in the
//! canonical variables (ξ', u', μ) of
//! H(ξ', u', μ) = a(μ, ξ'√(λ/μ), u'√(λ/μ)) taken at (ξ, u, λ), optionally
//! preceded by left-invariant derivatives in g. In these variables ∂̃ is the
//! plain μ-derivative up to a lower-order correction, so every operator of
//! this module acts exactly on the term list and only the final evaluation
//! uses finite differences.

use crate::error::{Error, Result};
use crate::fd::{mixed_partial_noise, mixed_partial_with};
use crate::heisenberg::{Field, HPoint, MultiIndex, MAX_N};
use crate::representations::signed_sqrt;
use crate::C64;
use std::fmt;
use std::sync::Arc;

pub type BaseFn = Arc<dyn Fn(&HPoint, f64, &[f64], &[f64]) -> C64 + Send + Sync>;

/// Extra stencil points per side used for symbol derivatives.
pub const STENCIL_EXTRA: usize = 2;
/// Relative phase-space step (in units of the Shubin length scale).
pub const PHASE_STEP: f64 = 0.1;
/// Relative λ step.
pub const LAMBDA_STEP: f64 = 0.05;
/// Step along one-parameter subgroups in g.
pub const GROUP_STEP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub sign_pow: u32,
    pub abs_pow: f64,
    pub xi: Vec<usize>,
    pub u: Vec<usize>,
    pub tilde: usize,
    /// Left-invariant fields applied in g, leftmost outermost.
    pub g: Vec<Field>,
}

impl Term {
    fn unit(n: usize) -> Term {
        Term { coef: C64::new(1.0, 0.0), sign_pow: 0, abs_pow: 0.0, xi: vec![0; n], u: vec![0; n], tilde: 0, g: Vec::new() }
    }

    fn phase_order(&self) -> usize {
        self.xi.iter().sum::<usize>() + self.u.iter().sum::<usize>()
    }

    fn is_plain(&self) -> bool {
        self.phase_order() == 0 && self.tilde == 0 && self.g.is_empty()
    }
}

/// A family of Weyl symbols a(g, λ, ξ, u).
#[derive(Clone)]
pub struct SymbolFamily {
    pub n: usize,
    base: BaseFn,
    pub terms: Vec<Term>,
    /// Whether the base depends on g.
    pub g_dependent: bool,
}

impl fmt::Debug for SymbolFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFamily")
            .field("n", &self.n)
            .field("terms", &self.terms)
            .field("g_dependent", &self.g_dependent)
            .finish()
    }
}

/// Shubin length scale √((1 + |λ|(1+|ξ|²+|u|²))/|λ|) of the phase variables.
pub fn phase_scale(lambda: f64, xi: &[f64], u: &[f64]) -> f64 {
    let r: f64 = xi.iter().chain(u).map(|v| v * v).sum();
    ((1.0 + lambda.abs() * (1.0 + r)) / lambda.abs()).sqrt()
}

impl SymbolFamily {
    pub fn new<F>(n: usize, g_dependent: bool, f: F) -> SymbolFamily
    where
        F: Fn(&HPoint, f64, &[f64], &[f64]) -> C64 + Send + Sync + 'static,
    {
        SymbolFamily { n, base: Arc::new(f), terms: vec![Term::unit(n)], g_dependent }
    }

    /// A g-independent family a(λ, ξ, u).
    pub fn from_lambda_fn<F>(n: usize, f: F) -> SymbolFamily
    where
        F: Fn(f64, &[f64], &[f64]) -> C64 + Send + Sync + 'static,
    {
        SymbolFamily::new(n, false, move |_, l, x, u| f(l, x, u))
    }

    pub fn zero(n: usize) -> SymbolFamily {
        SymbolFamily { n, base: Arc::new(|_, _, _, _| C64::new(0.0, 0.0)), terms: Vec::new(), g_dependent: false }
    }

    pub fn base(&self) -> &BaseFn {
        &self.base
    }

    fn map_terms<F: Fn(&Term) -> Vec<Term>>(&self, f: F) -> SymbolFamily {
        SymbolFamily {
            n: self.n,
            base: self.base.clone(),
            terms: self.terms.iter().flat_map(f).collect(),
            g_dependent: self.g_dependent,
        }
    }

    pub fn scale(&self, c: C64) -> SymbolFamily {
        self.map_terms(|t| vec![Term { coef: t.coef * c, ..t.clone() }])
    }

    /// Freezes the current term list into a new base evaluator.
    pub fn flatten(&self) -> SymbolFamily {
        if self.terms.len() == 1 && self.terms[0] == Term::unit(self.n) {
            return self.clone();
        }
        let me = self.clone();
        SymbolFamily::new(self.n, self.g_dependent, move |g, l, x, u| me.eval(g, l, x, u))
    }

    /// Pointwise sum; bases are combined by flattening when they differ.
    pub fn add(&self, other: &SymbolFamily) -> SymbolFamily {
        if Arc::ptr_eq(&self.base, &other.base) {
            let mut out = self.clone();
            out.terms.extend(other.terms.iter().cloned());
            return out;
        }
        let (a, b) = (self.clone(), other.clone());
        SymbolFamily::new(self.n, self.g_dependent || other.g_dependent, move |g, l, x, u| {
            a.eval(g, l, x, u) + b.eval(g, l, x, u)
        })
    }

    pub fn eval(&self, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64]) -> C64 {
        self.eval_scaled(g, lambda, xi, u, 1.0)
    }

    /// Evaluation with all finite-difference steps multiplied by `step_scale`.
    pub fn eval_scaled(&self, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64], step_scale: f64) -> C64 {
        self.eval_noise(g, lambda, xi, u, step_scale).0
    }

    /// Value and an estimate of its floating-point roundoff.
    pub fn eval_noise(&self, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64], step_scale: f64) -> (C64, f64) {
        let sg = lambda.signum();
        let mut acc = C64::new(0.0, 0.0);
        let mut noise = 0.0;
        for t in &self.terms {
            let pref = t.coef * sg.powi(t.sign_pow as i32) * lambda.abs().powf(t.abs_pow);
            let (v, e) = if t.is_plain() {
                let v = (self.base)(g, lambda, xi, u);
                (v, f64::EPSILON * v.norm())
            } else {
                self.derivative(t, g, lambda, xi, u, step_scale)
            };
            acc += pref * v;
            noise += pref.norm() * e;
        }
        (acc, noise)
    }

    /// Evaluation that also checks the derivatives against half-size steps.
    pub fn try_eval(&self, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64], rel_tol: f64) -> Result<C64> {
        let a = self.eval_scaled(g, lambda, xi, u, 1.0);
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::NonFinite(format!("symbol at lambda={lambda}")));
        }
        if self.terms.iter().all(Term::is_plain) {
            return Ok(a);
        }
        let b = self.eval_scaled(g, lambda, xi, u, 0.5);
        let diff = (a - b).norm();
        if diff > rel_tol * (a.norm().max(b.norm()) + 1e-8) {
            return Err(Error::NonSmooth(format!(
                "step halving changed the value from {a} to {b} at lambda={lambda}, xi={xi:?}, u={u:?}"
            )));
        }
        Ok(a)
    }

    fn derivative(&self, t: &Term, g: &HPoint, lambda: f64, xi: &[f64], u: &[f64], step_scale: f64) -> (C64, f64) {
        let n = self.n;
        // runs of equal consecutive fields share one curve parameter
        let mut runs: Vec<(Field, usize)> = Vec::new();
        for &f in &t.g {
            match runs.last_mut() {
                Some((last, k)) if *last == f => *k += 1,
                _ => runs.push((f, 1)),
            }
        }
        let dim = 2 * n + 1 + runs.len();
        let mut x0 = Vec::with_capacity(dim);
        x0.extend_from_slice(xi);
        x0.extend_from_slice(u);
        x0.push(lambda);
        x0.extend(std::iter::repeat_n(0.0, runs.len()));
        let mut orders = t.xi.clone();
        orders.extend(&t.u);
        orders.push(t.tilde);
        orders.extend(runs.iter().map(|r| r.1));
        let hp = PHASE_STEP * step_scale * phase_scale(lambda, xi, u);
        let mut steps = vec![hp; 2 * n];
        steps.push(LAMBDA_STEP * step_scale * lambda.abs());
        steps.extend(std::iter::repeat_n(GROUP_STEP * step_scale, runs.len()));
        let base = &self.base;
        let f = |v: &[f64]| {
            let mu = v[2 * n];
            let r = (lambda / mu).sqrt();
            let mut gg = *g;
            for (k, (field, _)) in runs.iter().enumerate() {
                gg = gg.mul(&field.exp(n, v[2 * n + 1 + k]));
            }
            let mut xs = [0.0; MAX_N];
            let mut us = [0.0; MAX_N];
            for k in 0..n {
                xs[k] = v[k] * r;
                us[k] = v[n + k] * r;
            }
            base(&gg, mu, &xs[..n], &us[..n])
        };
        mixed_partial_noise(&f, &x0, &orders, &steps, STENCIL_EXTRA)
    }
}

/// Δ_{x_j}: a ↦ (i/√|λ|)∂_{ξ_j}a.
pub fn delta_x(j: usize, fam: &SymbolFamily) -> SymbolFamily {
    fam.map_terms(|t| {
        let mut s = t.clone();
        s.coef *= C64::new(0.0, 1.0);
        s.abs_pow -= 0.5;
        s.xi[j] += 1;
        vec![s]
    })
}

/// Δ_{y_j}: a ↦ (i/√λ)∂_{u_j}a with the signed square root.
pub fn delta_y(j: usize, fam: &SymbolFamily) -> SymbolFamily {
    fam.map_terms(|t| {
        let mut s = t.clone();
        s.coef *= C64::new(0.0, 1.0);
        s.sign_pow += 1;
        s.abs_pow -= 0.5;
        s.u[j] += 1;
        vec![s]
    })
}

/// ∂̃ = ∂_λ − (1/2λ)Σ(u_j∂_{u_j} + ξ_j∂_{ξ_j}).
pub fn tilde_partial(fam: &SymbolFamily) -> SymbolFamily {
    fam.map_terms(|t| {
        let mut out = Vec::with_capacity(2);
        let c = t.abs_pow + t.phase_order() as f64 / 2.0;
        if c != 0.0 {
            out.push(Term { coef: t.coef * c, sign_pow: t.sign_pow + 1, abs_pow: t.abs_pow - 1.0, ..t.clone() });
        }
        out.push(Term { tilde: t.tilde + 1, ..t.clone() });
        out
    })
}

/// Δ_t = i∂̃.
pub fn delta_t(fam: &SymbolFamily) -> SymbolFamily {
    tilde_partial(fam).scale(C64::new(0.0, 1.0))
}

/// Δ'^α = Δ_x^{α₁}Δ_y^{α₂}Δ_t^{α₃}; the rightmost factor acts first.
pub fn delta_power(alpha: &MultiIndex, fam: &SymbolFamily) -> SymbolFamily {
    let mut out = fam.clone();
    for _ in 0..alpha.alpha3 {
        out = delta_t(&out);
    }
    for (j, &k) in alpha.alpha2.iter().enumerate() {
        for _ in 0..k {
            out = delta_y(j, &out);
        }
    }
    for (j, &k) in alpha.alpha1.iter().enumerate() {
        for _ in 0..k {
            out = delta_x(j, &out);
        }
    }
    out
}

/// Phase-space derivative ∂_ξ^α ∂_u^β of every term.
pub fn phase_derivative(alpha: &[usize], beta: &[usize], fam: &SymbolFamily) -> SymbolFamily {
    fam.map_terms(|t| {
        let mut s = t.clone();
        for j in 0..alpha.len() {
            s.xi[j] += alpha[j];
            s.u[j] += beta[j];
        }
        vec![s]
    })
}

/// X_g^β a = X^{β₁}Y^{β₂}T^{β₃} a in the g variable.
pub fn x_g(beta: &MultiIndex, fam: &SymbolFamily) -> SymbolFamily {
    let fields = beta.fields();
    fam.map_terms(|t| {
        let mut s = t.clone();
        let mut g = fields.clone();
        g.extend(&t.g);
        s.g = g;
        vec![s]
    })
}

/// ã(λ, ξ, u) = a(λ, ξ/√|λ|, u/√λ).
pub fn renormalize(fam: &SymbolFamily) -> SymbolFamily {
    let me = fam.clone();
    SymbolFamily::new(fam.n, fam.g_dependent, move |g, l, x, u| {
        let a = l.abs().sqrt();
        let s = signed_sqrt(l);
        let xs: Vec<f64> = x.iter().map(|v| v / a).collect();
        let us: Vec<f64> = u.iter().map(|v| v / s).collect();
        me.eval(g, l, &xs, &us)
    })
}

/// a(λ, ξ, u) = ã(λ, √|λ|ξ, √λu).
pub fn derenormalize(fam: &SymbolFamily) -> SymbolFamily {
    let me = fam.clone();
    SymbolFamily::new(fam.n, fam.g_dependent, move |g, l, x, u| {
        let a = l.abs().sqrt();
        let s = signed_sqrt(l);
        let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
        let us: Vec<f64> = u.iter().map(|v| v * s).collect();
        me.eval(g, l, &xs, &us)
    })
}

/// Plain ∂_λ at fixed (ξ, u), by central differences.
pub fn lambda_derivative(fam: &SymbolFamily) -> SymbolFamily {
    let me = fam.clone();
    SymbolFamily::new(fam.n, fam.g_dependent, move |g, l, x, u| {
        let f = |v: &[f64]| me.eval(g, v[0], x, u);
        mixed_partial_with(&f, &[l], &[1], &[LAMBDA_STEP * l.abs()], STENCIL_EXTRA)
    })
}

/// One row of the identity table: the largest |lhs − rhs| over a 7×7 box in
/// (ξ,u) ⊂ [−3,3]² and the λ list, relative to 1 + |a| for the
/// renormalization rows.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityRow {
    pub name: &'static str,
    pub max_error: f64,
}

pub const IDENTITY_LAMBDAS: [f64; 6] = [-4.0, -1.0, -0.25, 0.25, 1.0, 4.0];

fn table_box() -> Vec<(f64, f64)> {
    let line: Vec<f64> = (0..7).map(|i| -3.0 + i as f64).collect();
    line.iter().flat_map(|&x| line.iter().map(move |&u| (x, u))).collect()
}

type Rhs = Box<dyn Fn(f64, f64, f64) -> C64 + Send + Sync>;

/// Difference-operator identities on the symbols of X, Y, T, 𝓛 (n = 1), the
/// α = 0 no-op, and the three renormalization identities on a polynomial
/// test symbol.
pub fn identity_table(lambdas: &[f64]) -> Vec<IdentityRow> {
    use crate::representations::{infinitesimal_symbol, Infinitesimal::*};
    let o = HPoint::origin(1);
    let fam = |w| SymbolFamily::from_lambda_fn(1, move |l, x, u| infinitesimal_symbol(w, l)(x, u));
    let sym = |w| move |l: f64, x: f64, u: f64| infinitesimal_symbol(w, l)(&[x], &[u]);
    let zero: Rhs = Box::new(|_, _, _| C64::new(0.0, 0.0));
    let m1 = || -> Rhs { Box::new(|_, _, _| C64::new(-1.0, 0.0)) };
    let sx = sym(X(0));
    let sy = sym(Y(0));
    let sl = sym(L);
    let cases: Vec<(&'static str, SymbolFamily, Rhs)> = vec![
        ("dx_Y=0", delta_x(0, &fam(Y(0))), Box::new(|_, _, _| C64::new(0.0, 0.0))),
        ("dx_T=0", delta_x(0, &fam(T)), Box::new(|_, _, _| C64::new(0.0, 0.0))),
        ("dy_X=0", delta_y(0, &fam(X(0))), Box::new(|_, _, _| C64::new(0.0, 0.0))),
        ("dy_T=0", delta_y(0, &fam(T)), Box::new(|_, _, _| C64::new(0.0, 0.0))),
        ("dx_X=-1", delta_x(0, &fam(X(0))), m1()),
        ("dy_Y=-1", delta_y(0, &fam(Y(0))), m1()),
        ("dt_T=-1", delta_t(&fam(T)), m1()),
        ("dx_L=-2X", delta_x(0, &fam(L)), Box::new(move |l, x, u| -2.0 * sx(l, x, u))),
        ("dy_L=-2Y", delta_y(0, &fam(L)), Box::new(move |l, x, u| -2.0 * sy(l, x, u))),
        ("dt_L=0", delta_t(&fam(L)), zero),
        ("alpha0_noop", delta_power(&MultiIndex::zero(1), &fam(L)), Box::new(move |l, x, u| sl(l, x, u))),
    ];
    let pts = table_box();
    let mut rows: Vec<IdentityRow> = cases
        .into_iter()
        .map(|(name, lhs, rhs)| {
            let mut worst: f64 = 0.0;
            for &l in lambdas {
                for &(x, u) in &pts {
                    worst = worst.max((lhs.eval(&o, l, &[x], &[u]) - rhs(l, x, u)).norm());
                }
            }
            IdentityRow { name, max_error: worst }
        })
        .collect();

    let a = SymbolFamily::from_lambda_fn(1, |l, x, u| {
        let (x, u) = (x[0], u[0]);
        C64::new(l * l * x * x * x + u * u - l * x * u, l * u * x + 0.5 * l * l * l * u)
    });
    let at = renormalize(&a);
    let dl = lambda_derivative(&at);
    let dxi = phase_derivative(&[1], &[0], &at);
    let du = phase_derivative(&[0], &[1], &at);
    let t = tilde_partial(&a);
    let axi = phase_derivative(&[1], &[0], &a);
    let au = phase_derivative(&[0], &[1], &a);
    let mut e = [0.0f64; 3];
    for &l in lambdas {
        let (ab, sg) = (l.abs().sqrt(), signed_sqrt(l));
        for &(x, u) in &pts {
            let (xs, us) = ([ab * x], [sg * u]);
            let scale = 1.0 + a.eval(&o, l, &[x], &[u]).norm();
            e[0] = e[0].max((t.eval(&o, l, &[x], &[u]) - dl.eval(&o, l, &xs, &us)).norm() / scale);
            e[1] = e[1].max((axi.eval(&o, l, &[x], &[u]) / ab - dxi.eval(&o, l, &xs, &us)).norm() / scale);
            e[2] = e[2].max((au.eval(&o, l, &[x], &[u]) / sg - du.eval(&o, l, &xs, &us)).norm() / scale);
        }
    }
    for (name, v) in ["renorm_tilde", "renorm_xi", "renorm_u"].into_iter().zip(e) {
        rows.push(IdentityRow { name, max_error: v });
    }
    rows
}
