use heis_core::heisenberg::sample;
use heis_core::representations::*;
use heis_core::samples::SchwartzSample;
use heis_core::{group_mul, GridFunction, GroupBox, HPoint, PhaseSpace, RepOperator, TensorGrid, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn ps() -> PhaseSpace {
    PhaseSpace::new(1, 10.0, 128, 2, 32).unwrap()
}

fn group_grid() -> TensorGrid {
    GroupBox { n: 1, half_width: 6.0, points: 48, t_half_width: 8.0, t_points: 96 }.grid().unwrap()
}

fn gauss(ps: &PhaseSpace, c: f64) -> GridFunction {
    GridFunction::from_fn(ps.u_grid(), |u| C64::from_polar((-(u[0] - c).powi(2) / 2.0).exp(), 0.3 * u[0]))
}

fn h(x: f64, y: f64, t: f64) -> HPoint {
    HPoint::new(&[x], &[y], t).unwrap()
}

fn op_norm(m: &DMatrix<C64>) -> f64 {
    m.singular_values().max()
}

#[test]
fn central_elements_multiply() {
    let ps = ps();
    let f = gauss(&ps, 0.5);
    let out = pi_point(2.0, &h(0.0, 0.0, 0.7), &f, OVERFLOW_TOL).unwrap();
    for (a, b) in out.values.iter().zip(&f.values) {
        assert!((a - b * C64::from_polar(1.0, 1.4)).norm() < 1e-15);
    }
    let same = pi_point(-3.0, &HPoint::origin(1), &f, OVERFLOW_TOL).unwrap();
    assert_eq!(same.values, f.values);
}

#[test]
fn pi_point_is_unitary() {
    let ps = ps();
    let f = gauss(&ps, -0.3);
    for l in [-4.0, -0.25, 0.5, 4.0] {
        for g in [h(0.8, -0.4, 0.2), h(-1.0, 1.0, 3.0), h(0.3, 0.9, -1.0)] {
            let out = pi_point(l, &g, &f, OVERFLOW_TOL).unwrap();
            assert!((out.l2_norm() - f.l2_norm()).abs() < 1e-8 * f.l2_norm(), "{l} {g:?}");
        }
    }
}

#[test]
fn support_overflow_is_reported() {
    let ps = ps();
    let f = gauss(&ps, 7.0);
    assert!(pi_point(4.0, &h(2.0, 0.0, 0.0), &f, OVERFLOW_TOL).is_err());
}

#[test]
fn pi_matrix_group_law() {
    let n_h = 32;
    for l in [-4.0, -0.25, 1.0, 4.0] {
        let id = pi_point_matrix(l, &HPoint::origin(1), n_h).unwrap();
        assert!((id.matrix.clone() - DMatrix::identity(n_h, n_h)).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-10);
        let (a, b) = (h(0.6, -0.3, 0.4), h(-0.2, 0.7, -0.5));
        // the inner index runs over a longer expansion than the outer truncation
        let inner = 4 * n_h;
        let prod = pi_point_block(l, &a, n_h, inner).unwrap() * pi_point_block(l, &b, inner, n_h).unwrap();
        let direct = pi_point_block(l, &group_mul(&a, &b), n_h, n_h).unwrap();
        assert!(op_norm(&(prod - direct)) <= 1e-4, "lambda {l}");
        let inv = pi_point_matrix(l, &a.inverse(), n_h).unwrap();
        let adj = pi_point_matrix(l, &a, n_h).unwrap().adjoint();
        assert!(op_norm(&(inv.matrix - adj.matrix)) <= 1e-6);
    }
}

#[test]
fn infinitesimal_symbols() {
    let t = infinitesimal_symbol(Infinitesimal::T, 2.5);
    assert_eq!(t(&[1.0], &[-1.0]), C64::new(0.0, 2.5));
    let l = infinitesimal_symbol(Infinitesimal::L, 1.0);
    assert_eq!(l(&[2.0], &[3.0]), C64::new(-13.0, 0.0));
    let y = infinitesimal_symbol(Infinitesimal::Y(0), -4.0);
    assert_eq!(y(&[0.0], &[1.5]), C64::new(0.0, -3.0));
}

#[test]
fn identity_minus_sublaplacian_spectrum() {
    let ps = ps();
    for l in [-4.0, -0.25, 0.5, 2.0] {
        let lap = infinitesimal_symbol(Infinitesimal::L, l);
        let m = ps.opw_matrix(&move |x: &[f64], u: &[f64]| C64::new(1.0, 0.0) - lap(x, u), l);
        for k in 0..=16 {
            let want = 1.0 + l.abs() * (2 * k + 1) as f64;
            assert!((m.matrix[(k, k)] - want).norm() < 1e-6 * want.max(1.0), "lambda {l} k {k}: {}", m.matrix[(k, k)]);
        }
    }
}

#[test]
fn infinitesimal_consistency() {
    let ps = ps();
    let f = gauss(&ps, 0.2);
    for (l, field) in [(1.5, 0usize), (-0.5, 1)] {
        let s = 1e-3;
        let g = |v: f64| if field == 0 { h(v, 0.0, 0.0) } else { h(0.0, v, 0.0) };
        let plus = pi_point(l, &g(s), &f, OVERFLOW_TOL).unwrap();
        let minus = pi_point(l, &g(-s), &f, OVERFLOW_TOL).unwrap();
        let fd = plus.sub(&minus).unwrap().scale(C64::new(0.5 / s, 0.0));
        let which = if field == 0 { Infinitesimal::X(0) } else { Infinitesimal::Y(0) };
        let exact = ps.opw_apply(&infinitesimal_symbol(which, l), &f).unwrap();
        let e = fd.rel_l2_error(&exact).unwrap();
        assert!(e < 1e-3, "{e}");
    }
}

fn gaussian_kernel(grid: &TensorGrid) -> GridFunction {
    sample(grid, |g| C64::new((-(g.x[0].powi(2) + g.y[0].powi(2) + g.t * g.t) / 2.0).exp(), 0.0)).unwrap()
}

#[test]
fn fourier_transform_of_gaussian() {
    let ps = ps();
    let kappa = gaussian_kernel(&group_grid());
    for l in [-2.0f64, 0.5, 3.0] {
        let table = fourier_symbol_table(&ps, &kappa, l).unwrap();
        let xi = ps.xi_grid();
        for m in (0..ps.midpoint_count()).step_by(17) {
            for k in (0..ps.m_xi).step_by(13) {
                let (x, u) = (xi.node(k), ps.midpoint(m));
                if l.abs() * (x * x + u * u) > 30.0 {
                    continue;
                }
                let want = (2.0 * PI).powf(1.5) * (-(l.abs() * (x * x + u * u) + l * l) / 2.0).exp();
                let got = table.values[m * ps.m_xi + k];
                assert!((got - want).norm() < 1e-6, "{l} {x} {u}: {got} {want}");
            }
        }
    }
}

#[test]
fn fourier_matches_defining_integral() {
    let ps = ps();
    let grid = group_grid();
    let kappa = sample(&grid, |g| {
        C64::new((-(g.x[0] - 0.3).powi(2) / 2.0 - g.y[0].powi(2) / 1.5 - g.t * g.t / 2.0).exp(), 0.2 * g.t)
    })
    .unwrap();
    let l = 1.3;
    let slice = group_fourier(&ps, &kappa, l).unwrap();
    let h0: Vec<f64> = ps.basis()[0].clone();
    let m = ps.u.points();
    let fast: Vec<C64> = (0..m).map(|i| (0..m).map(|j| slice.kernel[i * m + j] * h0[j]).sum()).collect();
    // ∫κ(g)π_λ(g⁻¹)h₀ dg by direct quadrature
    let us = ps.u.nodes();
    let cell = grid.cell_volume();
    let mut direct = vec![C64::new(0.0, 0.0); m];
    let s = l.sqrt();
    for k in 0..grid.len() {
        let p = grid.point(k);
        let (x, y, t) = (-p[0], -p[1], -p[2]);
        let c = kappa.values[k] * C64::from_polar(cell, l * (t + x * y / 2.0));
        if c.norm() < 1e-14 {
            continue;
        }
        for (i, &u) in us.iter().enumerate() {
            let v = u + s * x;
            direct[i] += c * C64::from_polar(PI.powf(-0.25) * (-v * v / 2.0).exp(), s * y * u);
        }
    }
    let num: f64 = fast.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = direct.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(num / den <= 1e-3, "{}", num / den);
}

#[test]
fn fourier_is_linear() {
    let ps = ps();
    let grid = group_grid();
    let a = SchwartzSample::default().sample(&grid).unwrap();
    let b = SchwartzSample { center: [0.5, -0.3], ..SchwartzSample::default() }.sample(&grid).unwrap();
    let combo = a.scale(C64::new(2.0, 0.0)).add(&b.scale(C64::new(0.0, -1.0))).unwrap();
    let l = -0.7;
    let fa = group_fourier(&ps, &a, l).unwrap().matrix;
    let fb = group_fourier(&ps, &b, l).unwrap().matrix;
    let fc = group_fourier(&ps, &combo, l).unwrap().matrix;
    let want = fa.scale(C64::new(2.0, 0.0)).add(&fb.scale(C64::new(0.0, -1.0)));
    assert!(fc.add(&want.scale(C64::new(-1.0, 0.0))).hs_norm() < 1e-12 * want.hs_norm());
}

#[test]
fn fourier_intertwines_left_translation() {
    let ps = ps();
    let grid = group_grid();
    let g0 = h(0.4, -0.3, 0.5);
    let base = SchwartzSample::default();
    let kappa = base.sample(&grid).unwrap();
    let inv = g0.inverse();
    let moved = sample(&grid, move |g| base.eval(&group_mul(&inv, g))).unwrap();
    for l in [-1.0, 0.5, 2.0] {
        let lhs = group_fourier(&ps, &moved, l).unwrap().matrix;
        let phi = group_fourier(&ps, &kappa, l).unwrap().matrix;
        let p = pi_point_block(l, &inv, ps.n_h, 8).unwrap();
        let rhs = &phi.matrix * &p;
        let block = lhs.matrix.view((0, 0), (8, 8)).into_owned();
        let want = rhs.view((0, 0), (8, 8)).into_owned();
        let e = (block - &want).norm() / want.norm();
        assert!(e <= 1e-3, "lambda {l}: {e}");
    }
}

fn lgrid() -> LambdaGrid {
    LambdaGrid::new(1, 1.0 / 16.0, 16.0, 64).unwrap()
}

#[test]
fn plancherel_calibration() {
    let ps = ps();
    let grid = group_grid();
    let tests: Vec<GridFunction> = SchwartzSample::ensemble(5, 3).iter().map(|s| s.sample(&grid).unwrap()).collect();
    let cal = calibrate_plancherel(&ps, &tests, &lgrid()).unwrap();
    assert!(cal.spread <= 1e-3, "{cal:?}");
    assert!((cal.constant / plancherel_constant_analytic(1) - 1.0).abs() < 1e-3);
    // held out
    let held = SchwartzSample { sigma: 1.1, center: [0.2, 0.1], modulation: [0.3, -0.2], ..SchwartzSample::default() };
    let f = held.sample(&grid).unwrap();
    let (full, _, tail) = hs_integral(&ps, &f, &lgrid()).unwrap();
    assert!((cal.constant * full / f.l2_norm().powi(2) - 1.0).abs() < 1e-2);
    assert!(tail < 1e-2);
    // exact scaling invariance
    let doubled: Vec<GridFunction> = tests.iter().map(|t| t.scale(C64::new(2.0, 0.0))).collect();
    let cal2 = calibrate_plancherel(&ps, &doubled, &lgrid()).unwrap();
    assert!((cal2.constant - cal.constant).abs() < 1e-14 * cal.constant);
}

#[test]
fn plancherel_constant_converges() {
    // finer t-grid so that the doubled band stays below its Nyquist limit
    let grid = GroupBox { n: 1, half_width: 6.0, points: 48, t_half_width: 8.0, t_points: 192 }.grid().unwrap();
    let tests: Vec<GridFunction> = SchwartzSample::ensemble(9, 2).iter().map(|s| s.sample(&grid).unwrap()).collect();
    let base = calibrate_plancherel(&ps(), &tests, &lgrid()).unwrap().constant;
    let wide = calibrate_plancherel(&ps(), &tests, &lgrid().extended().unwrap()).unwrap().constant;
    let big = PhaseSpace::new(1, 14.0, 192, 2, 64).unwrap();
    let deep = calibrate_plancherel(&big, &tests, &lgrid()).unwrap().constant;
    assert!((wide / base - 1.0).abs() < 1e-3, "{base} {wide}");
    assert!((deep / base - 1.0).abs() < 1e-3, "{base} {deep}");
}

#[test]
fn calibration_needs_two_functions() {
    let f = gaussian_kernel(&group_grid());
    assert!(calibrate_plancherel(&ps(), &[f], &lgrid()).is_err());
}

#[test]
fn out_of_band_lambda_is_rejected() {
    let f = gaussian_kernel(&group_grid());
    assert!(group_fourier(&ps(), &f, 40.0).is_err());
    let _ = RepOperator::identity(1.0, 1, 2);
}
