//! Acceptance run: one PASS/FAIL line per criterion at the stated tolerances.
//! Failing criteria are reported, not asserted, so the target always exits 0.

use heis_core::heisenberg::{partial, vector_field_apply, Field};
use heis_core::quantize::{
    apply, apply_strided, apply_weyl_form, calibrate_weyl_constant, composition_residual, subelliptic_probe, QuantConfig,
};
use heis_core::representations::{
    calibrate_plancherel, hs_integral, infinitesimal_symbol, pi_point, pi_point_block, pi_point_matrix, Infinitesimal,
    LambdaGrid, OVERFLOW_TOL,
};
use heis_core::difference_ops::{identity_table, IDENTITY_LAMBDAS};
use heis_core::samples::SchwartzSample;
use heis_core::symbol_calculus::{
    builtin_symbol, elliptic_check, membership, parametrix_unchecked, LambdaSymbol, SampleSpec, SymbolParams,
};
use heis_core::{group_mul, GridFunction, HPoint, PhaseSpace, RepOperator, C64};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

type Verdict = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sym(name: &str) -> LambdaSymbol {
    builtin_symbol(name, &SymbolParams::default()).unwrap()
}

fn h(x: f64, y: f64, t: f64) -> HPoint {
    HPoint::new(&[x], &[y], t).unwrap()
}

fn cfg() -> QuantConfig {
    QuantConfig::default_n1().unwrap()
}

fn reference(cfg: &QuantConfig) -> GridFunction {
    SchwartzSample::default().sample(&cfg.grid().unwrap()).unwrap()
}

fn twisted(cfg: &QuantConfig, stretch: f64) -> GridFunction {
    SchwartzSample { sigma: 0.7, stretch, twist: true, ..SchwartzSample::default() }.sample(&cfg.grid().unwrap()).unwrap()
}

const LADDER: [f64; 3] = [1.0, std::f64::consts::SQRT_2, 2.0];

fn representation() -> Verdict {
    let ps = PhaseSpace::new(1, 10.0, 128, 2, 32).map_err(err)?;
    let f = GridFunction::from_fn(ps.u_grid(), |u| C64::from_polar((-(u[0] + 0.3).powi(2) / 2.0).exp(), 0.3 * u[0]));
    let mut unit: f64 = 0.0;
    for l in [-4.0, -0.25, 0.5, 4.0] {
        for g in [h(0.8, -0.4, 0.2), h(-1.0, 1.0, 3.0), h(0.3, 0.9, -1.0)] {
            let out = pi_point(l, &g, &f, OVERFLOW_TOL).map_err(err)?;
            unit = unit.max((out.l2_norm() - f.l2_norm()).abs() / f.l2_norm());
        }
    }
    let n_h = 32;
    let mut hom: f64 = 0.0;
    for l in [-4.0, -0.25, 1.0, 4.0] {
        let (a, b) = (h(0.6, -0.3, 0.4), h(-0.2, 0.7, -0.5));
        let inner = 4 * n_h;
        let prod = pi_point_block(l, &a, n_h, inner).map_err(err)? * pi_point_block(l, &b, inner, n_h).map_err(err)?;
        let direct = pi_point_matrix(l, &group_mul(&a, &b), n_h).map_err(err)?;
        hom = hom.max(RepOperator::new(l, 1, prod - direct.matrix).map_err(err)?.op_norm());
    }
    let mut spec: f64 = 0.0;
    for l in [-4.0, -0.25, 0.5, 2.0] {
        let lap = infinitesimal_symbol(Infinitesimal::L, l);
        let m = ps.opw_matrix(&move |x: &[f64], u: &[f64]| C64::new(1.0, 0.0) - lap(x, u), l);
        for k in 0..=16 {
            let want = 1.0 + l.abs() * (2 * k + 1) as f64;
            spec = spec.max((m.matrix[(k, k)] - want).norm() / want.max(1.0));
        }
    }
    let pass = unit <= 1e-8 && hom <= 1e-4 && spec <= 1e-6;
    Ok((pass, format!("unitarity {unit:.2e} (<=1e-8), homomorphism {hom:.2e} (<=1e-4), I-L spectrum {spec:.2e} (<=1e-6)")))
}

fn plancherel() -> Verdict {
    let c = cfg();
    let grid = c.grid().map_err(err)?;
    let lgrid = LambdaGrid::new(1, 1.0 / 16.0, 16.0, 64).map_err(err)?;
    let tests: Vec<GridFunction> = SchwartzSample::ensemble(5, 3).iter().map(|s| s.sample(&grid).unwrap()).collect();
    let cal = calibrate_plancherel(&c.ps, &tests, &lgrid).map_err(err)?;
    let held = SchwartzSample { sigma: 1.1, center: [0.2, 0.1], modulation: [0.3, -0.2], ..SchwartzSample::default() };
    let f = held.sample(&grid).map_err(err)?;
    let (full, _, tail) = hs_integral(&c.ps, &f, &lgrid).map_err(err)?;
    let held_err = (cal.constant * full / f.l2_norm().powi(2) - 1.0).abs();
    let pass = cal.spread <= 1e-3 && held_err <= 1e-2;
    Ok((pass, format!("c_n {:.9e}, spread {:.2e} (<=1e-3), held-out {held_err:.2e} (<=1e-2), tail {tail:.1e}", cal.constant, cal.spread)))
}

fn difference_operators() -> Verdict {
    let rows = identity_table(&IDENTITY_LAMBDAS);
    let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let lemma = rows.iter().filter(|r| r.name.starts_with("renorm")).count();
    Ok((worst <= 1e-5, format!("{} identities incl. {lemma} renormalization rows, max error {worst:.2e} (<=1e-5)", rows.len())))
}

fn quantization() -> Verdict {
    let c = cfg();
    let p = reference(&c);
    let one = apply(&sym("one"), &p, &c).map_err(err)?.rel_l2_error(&p).map_err(err)?;
    let x = apply(&sym("X"), &p, &c).map_err(err)?.rel_l2_error(&vector_field_apply(Field::X(0), &p).map_err(err)?).map_err(err)?;
    let t = apply(&sym("T"), &p, &c).map_err(err)?.rel_l2_error(&partial(&p, 2).map_err(err)?).map_err(err)?;
    // the Weyl-side constant is fitted on functions other than the one compared
    let grid = c.grid().map_err(err)?;
    let fit: Vec<GridFunction> = SchwartzSample::ensemble(21, 3).iter().map(|s| s.sample(&grid).unwrap()).collect();
    let w = calibrate_weyl_constant(&fit, &c).map_err(err)?;
    let calibrated = QuantConfig { weyl_constant: w.constant, ..c.clone() };
    let mut weyl: f64 = 0.0;
    for name in ["one", "X", "T"] {
        let s = sym(name);
        let a = apply_weyl_form(&s, &p, &calibrated).map_err(err)?;
        let b = apply_strided(&s, &p, &c, calibrated.weyl_stride).map_err(err)?;
        weyl = weyl.max(a.rel_l2_error(&b).map_err(err)?);
    }
    let pass = one <= 1e-2 && x <= 1e-2 && t <= 1e-2 && weyl <= 1e-2;
    Ok((pass, format!("Op(1) {one:.2e}, X1 {x:.2e}, T {t:.2e}, weyl-form {weyl:.2e} (all <=1e-2)")))
}

fn symbol_classes() -> Verdict {
    let s = SampleSpec::default_for(1);
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for name in ["one", "X", "T", "I-L", "XY-T"] {
        let r = membership(&sym(name), (2, 0, 1), &s).map_err(err)?;
        worst = worst.max(r.worst_growth());
        if !r.pass() {
            failed.push(name);
        }
    }
    let low = membership(&sym("I-L").with_class(1.0, 1.0, 0.0).map_err(err)?, (0, 0, 0), &s).map_err(err)?;
    let osc = membership(&sym("sin-inv-lambda"), (0, 0, 1), &s).map_err(err)?;
    let pass = failed.is_empty() && !low.pass() && !osc.pass();
    Ok((
        pass,
        format!(
            "natural classes worst growth {worst:.3} (<=1.10){}, I-L at m=1 rejected: {} (growth {:.2}), sin(1/lambda) rejected: {} (growth {:.2})",
            if failed.is_empty() { String::new() } else { format!(" failing {failed:?}") },
            !low.pass(),
            low.worst_growth(),
            !osc.pass(),
            osc.worst_growth()
        ),
    ))
}

fn parametrix() -> Verdict {
    let c = cfg();
    let p = reference(&c);
    let a = sym("I-L");
    let s = SampleSpec::default_for(1);
    let el = elliptic_check(&a, 4.0, &s);
    // measured on the unchecked construction so the residual is reported either way
    let b4 = parametrix_unchecked(&a, 4.0).map_err(err)?;
    let b8 = parametrix_unchecked(&a, 8.0).map_err(err)?;
    let r4 = composition_residual(&a, &b4, &p, &c).map_err(err)?;
    let r8 = composition_residual(&a, &b8, &p, &c).map_err(err)?;
    let m = membership(&b4, (2, 0, 1), &s).map_err(err)?;
    let pass = r4 <= 0.2 && r4 >= 2.0 * r8 && m.pass();
    Ok((
        pass,
        format!(
            "residual R=4 {r4:.3} (<=0.2), R=8 {r8:.3}, reduction {:.3} (>=2), order -2 membership {} (growth {:.2}), elliptic check {} (C {:.3} -> {:.3})",
            r4 / r8,
            m.pass(),
            m.worst_growth(),
            el.pass,
            el.constant,
            el.refined_constant
        ),
    ))
}

fn probes() -> Verdict {
    let c = cfg();
    let p = reference(&c);
    let lap = subelliptic_probe(&sym("I-L"), 2.0, 0.0, std::slice::from_ref(&p), &c).map_err(err)?.max_ratio;
    let mut xyt = vec![subelliptic_probe(&sym("XY-T"), 2.0, 0.0, std::slice::from_ref(&p), &c).map_err(err)?.max_ratio];
    let mut x_only = Vec::new();
    for l in LADDER {
        let f = twisted(&c, l);
        xyt.push(subelliptic_probe(&sym("XY-T"), 2.0, 0.0, std::slice::from_ref(&f), &c).map_err(err)?.max_ratio);
        x_only.push(subelliptic_probe(&sym("X"), 1.0, 0.0, std::slice::from_ref(&f), &c).map_err(err)?.max_ratio);
    }
    let ladder = &xyt[1..];
    let lo = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ladder.iter().cloned().fold(0.0, f64::max);
    let xmax = xyt.iter().cloned().fold(0.0, f64::max);
    let growing = x_only.windows(2).all(|w| w[1] > 1.1 * w[0]) && x_only[2] >= 2.0 * x_only[0];
    let pass = (lap - 1.0).abs() <= 2e-2 && xmax <= 10.0 && hi / lo - 1.0 <= 0.10 && growing;
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    Ok((
        pass,
        format!(
            "I-L ratio {lap:.5} (1 +- 2e-2), XY-T ratios [{}] max {xmax:.3} (<=10) drift {:.3} (<=0.10), X1-only ladder [{}] growing {growing}",
            fmt(&xyt),
            hi / lo - 1.0,
            fmt(&x_only)
        ),
    ))
}

fn heis(args: &[&str], out: &Path) -> Result<i32, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_heis")).args(args).arg("--out").arg(out).output().map_err(err)?;
    o.status.code().ok_or_else(|| "terminated by signal".to_string())
}

fn determinism() -> Verdict {
    let dirs = [tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?];
    let runs: [&[&str]; 4] = [&["calibrate"], &["identity-table"], &["membership", "--symbol", "XY-T"], &["apply", "--symbol", "I-L"]];
    for d in &dirs {
        for r in runs {
            let code = heis(r, d.path())?;
            if code != 0 {
                return Ok((false, format!("`heis {}` exited with {code}", r.join(" "))));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).map_err(err)?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).map_err(err)?;
        let b = std::fs::read(dirs[1].path().join(n)).map_err(err)?;
        if a != b {
            differing.push(n.to_string_lossy().into_owned());
        }
    }
    Ok((differing.is_empty(), format!("{} output files compared, {} differ {differing:?}", names.len(), differing.len())))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("representation", representation),
        ("plancherel", plancherel),
        ("difference-operators", difference_operators),
        ("quantization", quantization),
        ("symbol-classes", symbol_classes),
        ("parametrix", parametrix),
        ("hypoellipticity-probes", probes),
        ("determinism", determinism),
    ];
    let mut passed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += pass as usize;
        println!("criterion {} {name}: {} [{secs:.1}s] {detail}", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
