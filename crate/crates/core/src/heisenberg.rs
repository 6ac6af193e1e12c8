//! The group ℍₙ: points, group law, dilations and left-invariant vector fields
//! acting on sampled functions.

use crate::error::{Error, Result};
use crate::fd::fornberg_weights;
use crate::phase_space::{Grid1D, GridFunction, TensorGrid};
use crate::C64;
use serde::{Deserialize, Serialize};

pub const MAX_N: usize = 3;

/// g = (x, y, t) ∈ ℍₙ with n ≤ 3; unused slots stay zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub n: usize,
    pub x: [f64; MAX_N],
    pub y: [f64; MAX_N],
    pub t: f64,
}

impl HPoint {
    pub fn new(x: &[f64], y: &[f64], t: f64) -> Result<HPoint> {
        let n = x.len();
        if n == 0 || n > MAX_N || y.len() != n {
            return Err(Error::InvalidParameter(format!(
                "point needs x, y of equal length 1..={MAX_N}, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut p = HPoint::origin(n);
        p.x[..n].copy_from_slice(x);
        p.y[..n].copy_from_slice(y);
        p.t = t;
        Ok(p)
    }

    pub fn origin(n: usize) -> HPoint {
        HPoint { n, x: [0.0; MAX_N], y: [0.0; MAX_N], t: 0.0 }
    }

    pub fn h1(x: f64, y: f64, t: f64) -> HPoint {
        HPoint { n: 1, x: [x, 0.0, 0.0], y: [y, 0.0, 0.0], t }
    }

    /// Coordinates in the order (x₁..xₙ, y₁..yₙ, t).
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x[..self.n].to_vec();
        v.extend_from_slice(&self.y[..self.n]);
        v.push(self.t);
        v
    }

    pub fn from_coords(c: &[f64]) -> Result<HPoint> {
        if c.len() % 2 == 0 {
            return Err(Error::InvalidParameter("coordinate vector must have length 2n+1".into()));
        }
        let n = c.len() / 2;
        HPoint::new(&c[..n], &c[n..2 * n], c[2 * n])
    }

    pub fn mul(&self, other: &HPoint) -> HPoint {
        group_mul(self, other)
    }

    pub fn inverse(&self) -> HPoint {
        let mut p = *self;
        for j in 0..self.n {
            p.x[j] = -p.x[j];
            p.y[j] = -p.y[j];
        }
        p.t = -p.t;
        p
    }

    /// Euclidean norm of the coordinates.
    pub fn norm(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// (x,y,t)(x',y',t') = (x+x', y+y', t+t'+½(x·y' − x'·y)).
pub fn group_mul(g: &HPoint, h: &HPoint) -> HPoint {
    debug_assert_eq!(g.n, h.n);
    let mut p = HPoint::origin(g.n);
    let mut twist = 0.0;
    for j in 0..g.n {
        p.x[j] = g.x[j] + h.x[j];
        p.y[j] = g.y[j] + h.y[j];
        twist += g.x[j] * h.y[j] - h.x[j] * g.y[j];
    }
    p.t = g.t + h.t + 0.5 * twist;
    p
}

/// D_r(x,y,t) = (rx, ry, r²t).
pub fn dilate(r: f64, g: &HPoint) -> Result<HPoint> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("dilation factor {r} must be positive")));
    }
    let mut p = *g;
    for j in 0..g.n {
        p.x[j] *= r;
        p.y[j] *= r;
    }
    p.t *= r * r;
    Ok(p)
}

/// Left-invariant basis fields of the Lie algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    X(usize),
    Y(usize),
    T,
}

impl Field {
    /// exp(sV) in exponential coordinates.
    pub fn exp(&self, n: usize, s: f64) -> HPoint {
        let mut p = HPoint::origin(n);
        match *self {
            Field::X(j) => p.x[j] = s,
            Field::Y(j) => p.y[j] = s,
            Field::T => p.t = s,
        }
        p
    }
}

/// α = (α₁, α₂, α₃) ∈ ℕⁿ × ℕⁿ × ℕ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub alpha1: Vec<usize>,
    pub alpha2: Vec<usize>,
    pub alpha3: usize,
}

impl MultiIndex {
    pub fn zero(n: usize) -> MultiIndex {
        MultiIndex { alpha1: vec![0; n], alpha2: vec![0; n], alpha3: 0 }
    }

    pub fn new(alpha1: Vec<usize>, alpha2: Vec<usize>, alpha3: usize) -> Result<MultiIndex> {
        if alpha1.len() != alpha2.len() || alpha1.is_empty() {
            return Err(Error::InvalidParameter("alpha1 and alpha2 must have equal length n >= 1".into()));
        }
        Ok(MultiIndex { alpha1, alpha2, alpha3 })
    }

    pub fn n(&self) -> usize {
        self.alpha1.len()
    }

    /// [α] = |α₁| + |α₂| + 2α₃.
    pub fn homogeneous_degree(&self) -> usize {
        self.alpha1.iter().sum::<usize>() + self.alpha2.iter().sum::<usize>() + 2 * self.alpha3
    }

    /// Total number of derivatives |α₁| + |α₂| + α₃.
    pub fn order(&self) -> usize {
        self.alpha1.iter().sum::<usize>() + self.alpha2.iter().sum::<usize>() + self.alpha3
    }

    pub fn is_zero(&self) -> bool {
        self.order() == 0
    }

    /// All multi-indices with [α] ≤ `max_degree`, in a fixed order.
    pub fn up_to_degree(n: usize, max_degree: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let flat = 2 * n;
        let mut cur = vec![0usize; flat];
        loop {
            let first: usize = cur.iter().sum();
            if first <= max_degree {
                for a3 in 0..=(max_degree - first) / 2 {
                    out.push(MultiIndex {
                        alpha1: cur[..n].to_vec(),
                        alpha2: cur[n..].to_vec(),
                        alpha3: a3,
                    });
                }
            }
            let mut d = 0;
            loop {
                if d == flat {
                    out.sort_by_key(|m| (m.homogeneous_degree(), m.clone()));
                    return out;
                }
                cur[d] += 1;
                if cur[d] <= max_degree {
                    break;
                }
                cur[d] = 0;
                d += 1;
            }
        }
    }

    /// The fields of X^α = X^{α₁} Y^{α₂} T^{α₃} from left to right.
    pub fn fields(&self) -> Vec<Field> {
        let mut v = Vec::new();
        for (j, &k) in self.alpha1.iter().enumerate() {
            v.extend(std::iter::repeat_n(Field::X(j), k));
        }
        for (j, &k) in self.alpha2.iter().enumerate() {
            v.extend(std::iter::repeat_n(Field::Y(j), k));
        }
        v.extend(std::iter::repeat_n(Field::T, self.alpha3));
        v
    }
}

/// Sampling box [−B,B]^{2n} × [−B_t,B_t] for functions on ℍₙ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupBox {
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
    pub t_half_width: f64,
    pub t_points: usize,
}

impl GroupBox {
    pub fn grid(&self) -> Result<TensorGrid> {
        if self.n == 0 || self.n > MAX_N {
            return Err(Error::InvalidParameter(format!("dimension n={} must be 1..=3", self.n)));
        }
        let xy = Grid1D::new(self.half_width, self.points)?;
        let t = Grid1D::new(self.t_half_width, self.t_points)?;
        let mut axes = vec![xy; 2 * self.n];
        axes.push(t);
        Ok(TensorGrid::new(axes))
    }
}

pub fn group_dim(grid: &TensorGrid) -> Result<usize> {
    let d = grid.dim();
    if d % 2 == 0 || d < 3 || d > 2 * MAX_N + 1 {
        return Err(Error::GridMismatch(format!("{d} axes is not 2n+1 for n in 1..=3")));
    }
    Ok(d / 2)
}

pub fn point_at(grid: &TensorGrid, flat: usize) -> HPoint {
    HPoint::from_coords(&grid.point(flat)).expect("grid of dimension 2n+1")
}

/// Samples `f` on a grid over ℝ^{2n+1}.
pub fn sample<F>(grid: &TensorGrid, f: F) -> Result<GridFunction>
where
    F: Fn(&HPoint) -> C64 + Sync + Send,
{
    group_dim(grid)?;
    Ok(GridFunction::from_fn(grid.clone(), |c| f(&HPoint::from_coords(c).expect("odd dimension"))))
}

/// Fourth-order derivative along `axis`, one-sided near the edges.
pub fn partial(f: &GridFunction, axis: usize) -> Result<GridFunction> {
    let g = f.grid.axes[axis];
    let m = g.points();
    if m < 5 {
        return Err(Error::Margin(format!("axis {axis} has {m} points, need at least 5")));
    }
    let h = g.spacing();
    let offsets: Vec<Vec<f64>> = (0..5).map(|s| (0..5).map(|k| k as f64 - s as f64).collect()).collect();
    let weights: Vec<Vec<f64>> = offsets.iter().map(|o| fornberg_weights(0.0, o, 1)).collect();
    let shape = f.grid.shape();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); f.values.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let i = (flat / inner) % m;
        let (start, s) = if i < 2 {
            (0, i)
        } else if i + 2 >= m {
            (m - 5, i - (m - 5))
        } else {
            (i - 2, 2)
        };
        let base = flat - i * inner;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..5 {
            acc += f.values[base + (start + k) * inner] * weights[s][k];
        }
        *o = acc / h;
    }
    Ok(GridFunction { grid: f.grid.clone(), values: out })
}

/// X_j = ∂_{x_j} − (y_j/2)∂_t, Y_j = ∂_{y_j} + (x_j/2)∂_t, T = ∂_t.
pub fn vector_field_apply(which: Field, f: &GridFunction) -> Result<GridFunction> {
    let n = group_dim(&f.grid)?;
    let t_axis = 2 * n;
    let dt = partial(f, t_axis)?;
    let (axis, coeff_axis, sign) = match which {
        Field::T => return Ok(dt),
        Field::X(j) if j < n => (j, n + j, -0.5),
        Field::Y(j) if j < n => (n + j, j, 0.5),
        _ => return Err(Error::InvalidParameter(format!("field {which:?} out of range for n={n}"))),
    };
    let d = partial(f, axis)?;
    let cg = f.grid.axes[coeff_axis];
    let shape = f.grid.shape();
    let inner: usize = shape[coeff_axis + 1..].iter().product();
    let values = d
        .values
        .iter()
        .zip(&dt.values)
        .enumerate()
        .map(|(flat, (&a, &b))| {
            let c = cg.node((flat / inner) % cg.points());
            a + b * (sign * c)
        })
        .collect();
    Ok(GridFunction { grid: f.grid.clone(), values })
}

/// X^α f = X^{α₁}Y^{α₂}T^{α₃} f.
pub fn apply_multi(alpha: &MultiIndex, f: &GridFunction) -> Result<GridFunction> {
    let mut out = f.clone();
    for field in alpha.fields().into_iter().rev() {
        out = vector_field_apply(field, &out)?;
    }
    Ok(out)
}

/// 𝓛 f = Σ_j (X_j² + Y_j²) f.
pub fn sublaplacian_apply(f: &GridFunction) -> Result<GridFunction> {
    let n = group_dim(&f.grid)?;
    let mut acc = GridFunction::zeros(f.grid.clone());
    for j in 0..n {
        for field in [Field::X(j), Field::Y(j)] {
            let once = vector_field_apply(field, f)?;
            acc = acc.add(&vector_field_apply(field, &once)?)?;
        }
    }
    Ok(acc)
}
