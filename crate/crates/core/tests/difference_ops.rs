use heis_core::difference_ops::{
    delta_power, delta_t, delta_x, delta_y, derenormalize, lambda_derivative, phase_derivative, renormalize,
    tilde_partial, SymbolFamily,
};
use heis_core::representations::{group_fourier, infinitesimal_symbol, Infinitesimal};
use heis_core::{GroupBox, HPoint, MultiIndex, PhaseSpace, C64};
use proptest::prelude::*;

const LAMBDAS: [f64; 6] = [-4.0, -1.0, -0.25, 0.25, 1.0, 4.0];

fn origin() -> HPoint {
    HPoint::origin(1)
}

fn box_points() -> Vec<(f64, f64)> {
    let line: Vec<f64> = (0..7).map(|i| -3.0 + i as f64).collect();
    line.iter().flat_map(|&x| line.iter().map(move |&u| (x, u))).collect()
}

fn family(which: Infinitesimal) -> SymbolFamily {
    SymbolFamily::from_lambda_fn(1, move |l, x, u| infinitesimal_symbol(which, l)(x, u))
}

fn id_family() -> SymbolFamily {
    SymbolFamily::from_lambda_fn(1, |_, _, _| C64::new(1.0, 0.0))
}

/// max over the box and the λ list of |lhs − rhs|.
fn max_error(lhs: &SymbolFamily, rhs: &dyn Fn(f64, f64, f64) -> C64) -> f64 {
    let mut worst: f64 = 0.0;
    for &l in &LAMBDAS {
        for (x, u) in box_points() {
            worst = worst.max((lhs.eval(&origin(), l, &[x], &[u]) - rhs(l, x, u)).norm());
        }
    }
    worst
}

fn symbol_of(which: Infinitesimal) -> impl Fn(f64, f64, f64) -> C64 {
    move |l, x, u| infinitesimal_symbol(which, l)(&[x], &[u])
}

#[test]
fn identity_table() {
    use Infinitesimal::*;
    let zero = |_: f64, _: f64, _: f64| C64::new(0.0, 0.0);
    let minus_one = |_: f64, _: f64, _: f64| C64::new(-1.0, 0.0);
    let cases: Vec<(&str, SymbolFamily, Box<dyn Fn(f64, f64, f64) -> C64>)> = vec![
        ("dx Y", delta_x(0, &family(Y(0))), Box::new(zero)),
        ("dx T", delta_x(0, &family(T)), Box::new(zero)),
        ("dy X", delta_y(0, &family(X(0))), Box::new(zero)),
        ("dy T", delta_y(0, &family(T)), Box::new(zero)),
        ("dx X", delta_x(0, &family(X(0))), Box::new(minus_one)),
        ("dy Y", delta_y(0, &family(Y(0))), Box::new(minus_one)),
        ("dt T", delta_t(&family(T)), Box::new(minus_one)),
        ("dx L", delta_x(0, &family(L)), Box::new(move |l, x, u| -2.0 * symbol_of(X(0))(l, x, u))),
        ("dy L", delta_y(0, &family(L)), Box::new(move |l, x, u| -2.0 * symbol_of(Y(0))(l, x, u))),
        ("dt L", delta_t(&family(L)), Box::new(zero)),
    ];
    for (name, lhs, rhs) in cases {
        let e = max_error(&lhs, &*rhs);
        assert!(e <= 1e-5, "{name}: {e}");
    }
}

#[test]
fn library_identity_table_rows() {
    let rows = heis_core::difference_ops::identity_table(&LAMBDAS);
    assert_eq!(rows.len(), 14);
    for r in rows {
        assert!(r.max_error <= 1e-5, "{}: {}", r.name, r.max_error);
    }
}

#[test]
fn negative_lambda_uses_signed_root() {
    let d = delta_y(0, &family(Infinitesimal::Y(0)));
    let v = d.eval(&origin(), -1.0, &[0.3], &[0.7]);
    assert!((v + 1.0).norm() < 1e-8);
    let y = infinitesimal_symbol(Infinitesimal::Y(0), -1.0)(&[0.0], &[1.0]);
    assert!((y - C64::new(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn tilde_examples() {
    let t = tilde_partial(&family(Infinitesimal::T));
    assert!(max_error(&t, &|_, _, _| C64::new(0.0, 1.0)) < 1e-6);
    let l = tilde_partial(&family(Infinitesimal::L));
    assert!(max_error(&l, &|_, _, _| C64::new(0.0, 0.0)) < 1e-6);
    // homogeneous of degree 0 in ξ and λ-free
    let h = SymbolFamily::from_lambda_fn(1, |_, x, _| C64::new(x[0] / x[0].abs(), 0.0));
    let dh = tilde_partial(&h);
    for &l in &LAMBDAS {
        assert!(dh.eval(&origin(), l, &[1.5], &[0.2]).norm() < 1e-9);
    }
}

#[test]
fn delta_power_examples() {
    let lap = family(Infinitesimal::L);
    assert!(max_error(&delta_power(&MultiIndex::zero(1), &lap), &symbol_of(Infinitesimal::L)) < 1e-12);
    let xx = MultiIndex::new(vec![2], vec![0], 0).unwrap();
    assert!(max_error(&delta_power(&xx, &lap), &|_, _, _| C64::new(2.0, 0.0)) < 1e-5);
    let xy = MultiIndex::new(vec![1], vec![1], 0).unwrap();
    assert!(max_error(&delta_power(&xy, &lap), &|_, _, _| C64::new(0.0, 0.0)) < 1e-5);
}

fn poly() -> SymbolFamily {
    SymbolFamily::from_lambda_fn(1, |l, x, u| {
        let (x, u) = (x[0], u[0]);
        C64::new(l * l * x * x * x + u * u - l * x * u, l * u * x + 0.5 * l * l * l * u)
    })
}

#[test]
fn renormalization_round_trip() {
    let a = poly();
    let back = derenormalize(&renormalize(&a));
    for &l in &LAMBDAS {
        for (x, u) in box_points() {
            let d = back.eval(&origin(), l, &[x], &[u]) - a.eval(&origin(), l, &[x], &[u]);
            assert!(d.norm() <= 1e-12 * (1.0 + a.eval(&origin(), l, &[x], &[u]).norm()));
        }
    }
    let x = renormalize(&family(Infinitesimal::X(0)));
    assert!(max_error(&x, &|_, x, _| C64::new(0.0, x)) < 1e-14);
}

#[test]
fn renormalized_derivatives() {
    let a = poly();
    let at = renormalize(&a);
    let dl = lambda_derivative(&at);
    let dxi = phase_derivative(&[1], &[0], &at);
    let du = phase_derivative(&[0], &[1], &at);
    let t = tilde_partial(&a);
    let axi = phase_derivative(&[1], &[0], &a);
    let au = phase_derivative(&[0], &[1], &a);
    for &l in &LAMBDAS {
        let (ab, sg) = (l.abs().sqrt(), l.signum() * l.abs().sqrt());
        for (x, u) in box_points() {
            let (xs, us) = ([ab * x], [sg * u]);
            let scale = 1.0 + a.eval(&origin(), l, &[x], &[u]).norm();
            let e1 = t.eval(&origin(), l, &[x], &[u]) - dl.eval(&origin(), l, &xs, &us);
            assert!(e1.norm() <= 1e-5 * scale, "tilde at {l},{x},{u}: {e1}");
            let e2 = axi.eval(&origin(), l, &[x], &[u]) / ab - dxi.eval(&origin(), l, &xs, &us);
            assert!(e2.norm() <= 1e-5 * scale, "xi at {l},{x},{u}: {e2}");
            let e3 = au.eval(&origin(), l, &[x], &[u]) / sg - du.eval(&origin(), l, &xs, &us);
            assert!(e3.norm() <= 1e-5 * scale, "u at {l},{x},{u}: {e3}");
        }
    }
}

#[test]
fn delta_x_matches_coordinate_multiplication() {
    // π_λ(x κ) against Op^W of Δ_x applied to the exact λ-symbol of a Gaussian
    let grid = GroupBox { n: 1, half_width: 6.0, points: 48, t_half_width: 8.0, t_points: 96 }.grid().unwrap();
    let ps = PhaseSpace::new(1, 10.0, 128, 2, 16).unwrap();
    let xk = heis_core::heisenberg::sample(&grid, |g| C64::new(g.x[0] * (-(g.x[0].powi(2) + g.y[0].powi(2) + g.t * g.t) / 2.0).exp(), 0.0)).unwrap();
    let exact = SymbolFamily::from_lambda_fn(1, |l, x, u| {
        let c = (2.0 * std::f64::consts::PI).powf(1.5);
        C64::new(c * (-(l.abs() * (x[0] * x[0] + u[0] * u[0]) + l * l) / 2.0).exp(), 0.0)
    });
    let dx = delta_x(0, &exact);
    for l in [-1.0, 0.5, 2.0] {
        let want = ps.opw_matrix(&|x: &[f64], u: &[f64]| dx.eval(&origin(), l, x, u), l);
        let got = group_fourier(&ps, &xk, l).unwrap().matrix;
        let err = got.add(&want.scale(C64::new(-1.0, 0.0))).hs_norm() / want.hs_norm();
        assert!(err < 1e-4, "lambda {l}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_ops_are_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, l in 0.3..3.0f64, x in -2.0..2.0f64, u in -2.0..2.0f64) {
        let f = poly();
        let g = family(Infinitesimal::L);
        let combo = SymbolFamily::from_lambda_fn(1, move |l, x, u| {
            a * poly().eval(&HPoint::origin(1), l, x, u) + b * infinitesimal_symbol(Infinitesimal::L, l)(x, u)
        });
        for op in [delta_x as fn(usize, &SymbolFamily) -> SymbolFamily, delta_y] {
            let lhs = op(0, &combo).eval(&origin(), l, &[x], &[u]);
            let rhs = a * op(0, &f).eval(&origin(), l, &[x], &[u]) + b * op(0, &g).eval(&origin(), l, &[x], &[u]);
            prop_assert!((lhs - rhs).norm() < 1e-6 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn delta_x_and_delta_y_commute(l in -3.0..3.0f64, x in -2.0..2.0f64, u in -2.0..2.0f64) {
        prop_assume!(l.abs() > 0.2);
        let f = poly();
        let xy = delta_x(0, &delta_y(0, &f)).eval(&origin(), l, &[x], &[u]);
        let yx = delta_y(0, &delta_x(0, &f)).eval(&origin(), l, &[x], &[u]);
        prop_assert!((xy - yx).norm() < 1e-6 * (1.0 + xy.norm()));
    }

    #[test]
    fn identity_is_killed(l in 0.2..4.0f64, x in -2.0..2.0f64) {
        let one = id_family();
        prop_assert!(delta_x(0, &one).eval(&origin(), l, &[x], &[0.1]).norm() < 1e-12);
        prop_assert!(delta_t(&one).eval(&origin(), -l, &[x], &[0.1]).norm() < 1e-12);
    }
}
