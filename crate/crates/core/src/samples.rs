//! Schwartz-class sample functions on ℍ₁ used by tests, calibration and probes.

use crate::error::Result;
use crate::heisenberg::{sample, HPoint};
use crate::phase_space::{GridFunction, TensorGrid};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// G(x,y)·ψ_τ(t′ − t_c)·e^{i(k_x x + k_y y)} with a Gaussian G of width σ
/// (stretched by `stretch` in x) and the Mexican-hat profile
/// ψ_τ(s) = (1 − s²/τ²)e^{−s²/2τ²}. With `twist`, t′ = t + xy/2, which makes
/// the sample nearly annihilated by X₁ when the stretch is large.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchwartzSample {
    pub sigma: f64,
    pub center: [f64; 2],
    pub stretch: f64,
    pub tau: f64,
    pub t_center: f64,
    pub twist: bool,
    pub modulation: [f64; 2],
}

impl Default for SchwartzSample {
    fn default() -> Self {
        SchwartzSample {
            sigma: 1.0,
            center: [0.0, 0.0],
            stretch: 1.0,
            tau: 0.7,
            t_center: 0.0,
            twist: false,
            modulation: [0.0, 0.0],
        }
    }
}

impl SchwartzSample {
    pub fn eval(&self, p: &HPoint) -> C64 {
        let x = p.x[0];
        let y = p.y[0];
        let dx = (x - self.center[0]) / self.stretch;
        let dy = y - self.center[1];
        let g = (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp();
        let t = if self.twist { p.t + 0.5 * x * y } else { p.t } - self.t_center;
        let r = t * t / (self.tau * self.tau);
        let hat = (1.0 - r) * (-0.5 * r).exp();
        C64::from_polar(g * hat, self.modulation[0] * x + self.modulation[1] * y)
    }

    pub fn sample(&self, grid: &TensorGrid) -> Result<GridFunction> {
        let s = *self;
        sample(grid, move |p| s.eval(p))
    }

    /// Deterministic pseudo-random family.
    pub fn ensemble(seed: u64, count: usize) -> Vec<SchwartzSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| SchwartzSample {
                sigma: rng.gen_range(0.8..1.2),
                center: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                stretch: 1.0,
                tau: rng.gen_range(0.65..0.8),
                t_center: rng.gen_range(-0.5..0.5),
                twist: false,
                modulation: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_is_reproducible() {
        assert_eq!(SchwartzSample::ensemble(7, 3), SchwartzSample::ensemble(7, 3));
        assert_ne!(SchwartzSample::ensemble(7, 3), SchwartzSample::ensemble(8, 3));
    }

    #[test]
    fn hat_profile_has_zero_mean() {
        let s = SchwartzSample::default();
        let h = 0.01;
        let total: f64 = (-1000..=1000).map(|k| s.eval(&HPoint::h1(0.0, 0.0, k as f64 * h)).re * h).sum();
        assert!(total.abs() < 1e-8);
    }
}
