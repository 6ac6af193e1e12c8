//! Finite-difference stencils on arbitrary closures.

use crate::C64;
use std::sync::OnceLock;

/// Fornberg weights for the `order`-th derivative at `x0` from nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(order < n, "stencil too small for derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Odd central stencil: integer offsets and unit-step weights.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub offsets: Vec<i32>,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn central(order: usize, extra: usize) -> Stencil {
        let p = order.div_ceil(2) + extra;
        let offsets: Vec<i32> = (-(p as i32)..=p as i32).collect();
        let xs: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
        let weights = fornberg_weights(0.0, &xs, order);
        Stencil { offsets, weights }
    }
}

/// Default number of extra points per side beyond the minimal central stencil.
pub const EXTRA: usize = 3;

/// Mixed partial derivative of `f` at `x0` with per-axis `orders` and steps.
pub fn mixed_partial<F>(f: &F, x0: &[f64], orders: &[usize], steps: &[f64]) -> C64
where
    F: Fn(&[f64]) -> C64 + ?Sized,
{
    mixed_partial_with(f, x0, orders, steps, EXTRA)
}

pub fn mixed_partial_with<F>(
    f: &F,
    x0: &[f64],
    orders: &[usize],
    steps: &[f64],
    extra: usize,
) -> C64
where
    F: Fn(&[f64]) -> C64 + ?Sized,
{
    mixed_partial_noise(f, x0, orders, steps, extra).0
}

const MAX_ORDER: usize = 12;
const MAX_EXTRA: usize = 4;

fn cached_stencil(order: usize, extra: usize) -> &'static Stencil {
    static TABLE: OnceLock<Vec<Vec<Stencil>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|o| (0..=MAX_EXTRA).map(|e| Stencil::central(o.max(1), e)).collect())
            .collect()
    });
    &table[order][extra]
}

/// The mixed partial together with a roundoff bound ε·Σ|w_k f_k|/∏h^k.
pub fn mixed_partial_noise<F>(
    f: &F,
    x0: &[f64],
    orders: &[usize],
    steps: &[f64],
    extra: usize,
) -> (C64, f64)
where
    F: Fn(&[f64]) -> C64 + ?Sized,
{
    let mut active = [0usize; 16];
    let mut na = 0;
    for (i, &o) in orders.iter().enumerate() {
        if o > 0 {
            active[na] = i;
            na += 1;
        }
    }
    if na == 0 {
        let v = f(x0);
        return (v, f64::EPSILON * v.norm());
    }
    let owned: Vec<Stencil>;
    let stencils: Vec<&Stencil> = if active[..na].iter().all(|&i| orders[i] <= MAX_ORDER) && extra <= MAX_EXTRA {
        active[..na].iter().map(|&i| cached_stencil(orders[i], extra)).collect()
    } else {
        owned = active[..na].iter().map(|&i| Stencil::central(orders[i], extra)).collect();
        owned.iter().collect()
    };
    let mut scale = 1.0;
    for &i in &active[..na] {
        scale *= steps[i].powi(orders[i] as i32);
    }
    let mut idx = [0usize; 16];
    let mut point = x0.to_vec();
    let mut acc = C64::new(0.0, 0.0);
    let mut mass = 0.0;
    'outer: loop {
        let mut w = 1.0;
        for (a, &i) in active[..na].iter().enumerate() {
            let s = stencils[a];
            w *= s.weights[idx[a]];
            point[i] = x0[i] + s.offsets[idx[a]] as f64 * steps[i];
        }
        if w != 0.0 {
            let v = f(&point) * w;
            mass += v.norm();
            acc += v;
        }
        for a in 0..na {
            idx[a] += 1;
            if idx[a] < stencils[a].offsets.len() {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    (acc / scale, f64::EPSILON * mass / scale.abs())
}
