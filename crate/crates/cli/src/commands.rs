//! Subcommand implementations. Each writes one report (plus plot data where
//! useful) and returns the verdict.

use crate::calibration::{self, Calibration};
use crate::config::{ConfigError, RunConfig};
use crate::report::{num, write_plot, Report};
use heis_core::container;
use heis_core::difference_ops::{identity_table, IDENTITY_LAMBDAS};
use heis_core::phase_space::GridFunction;
use heis_core::quantize::{apply, boundedness_probe, calibrate_weyl_constant, composition_residual, subelliptic_probe, QuantConfig};
use heis_core::representations::{calibrate_plancherel_with, hs_integral};
use heis_core::samples::SchwartzSample;
use heis_core::symbol_calculus::{elliptic_check, membership_with, parametrix_unchecked, LambdaSymbol};
use heis_core::Error;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) | CmdError::Io(_) => EXIT_CONFIG,
            CmdError::Numeric(e) => match e {
                Error::Truncation { .. }
                | Error::TailDominance { .. }
                | Error::NonFinite(_)
                | Error::NonSmooth(_)
                | Error::Spread { .. }
                | Error::SupportOverflow { .. }
                | Error::Aliasing { .. } => EXIT_NUMERIC,
                Error::NotElliptic { .. } => EXIT_FAIL,
                _ => EXIT_CONFIG,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: PathBuf,
    /// Input function for `apply`; a seeded sample when absent.
    pub input: Option<PathBuf>,
    /// Build the parametrix even when the ellipticity check fails.
    pub force: bool,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub verdict: bool,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.verdict {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

impl Context {
    fn symbol(&mut self) -> Result<LambdaSymbol, CmdError> {
        let n = self.cfg.run.n;
        Ok(self.cfg.symbol.resolve(n, &self.base_dir)?)
    }

    fn calibration_path(&self) -> Option<PathBuf> {
        if !self.cfg.run.calibration.is_empty() {
            return Some(self.base_dir.join(&self.cfg.run.calibration));
        }
        let p = self.out.join(calibration::FILE_NAME);
        p.exists().then_some(p)
    }

    /// Quantization settings with persisted constants when available.
    fn quant(&self, report: &mut Report) -> Result<QuantConfig, CmdError> {
        let mut qc = self.cfg.quant_config()?;
        match self.calibration_path() {
            Some(p) => {
                let c = Calibration::load(&p)?;
                qc.plancherel_constant = c.plancherel_constant;
                qc.weyl_constant = c.weyl_constant;
                report.note("calibration", "persisted");
            }
            None => report.note("calibration", "analytic"),
        }
        report.note("plancherel_constant", num(qc.plancherel_constant));
        report.note("weyl_constant", num(qc.weyl_constant));
        Ok(qc)
    }

    fn finish(&self, report: &Report, mut extra: Vec<PathBuf>) -> Result<Outcome, CmdError> {
        let mut files = vec![report.write(&self.cfg, &self.out)?];
        files.append(&mut extra);
        Ok(Outcome { verdict: report.verdict, files })
    }

    fn plot_name(&self, what: &str) -> String {
        format!("{}_{}.dat", self.cfg.run.name, what)
    }
}

fn samples(grid: &heis_core::phase_space::TensorGrid, seed: u64, count: usize) -> Result<Vec<GridFunction>, CmdError> {
    SchwartzSample::ensemble(seed, count).iter().map(|s| s.sample(grid).map_err(CmdError::from)).collect()
}

pub fn calibrate(ctx: &mut Context) -> Result<Outcome, CmdError> {
    ctx.symbol()?;
    let tol = ctx.cfg.tolerances.clone();
    let mut report = Report::new("calibrate", &["quantity", "estimate", "analytic", "spread", "truncation_delta", "tail_fraction"]);
    let qc = ctx.cfg.quant_config()?;
    let grid = qc.grid()?;
    let tests = samples(&grid, ctx.cfg.run.seed, ctx.cfg.run.samples)?;
    // the band is checked before the spread: an unresolved band is the cause
    let pl = calibrate_plancherel_with(&qc.ps, &tests, &qc.lgrid, f64::INFINITY)?;
    if pl.tail_fraction > tol.tail {
        return Err(Error::TailDominance { fraction: pl.tail_fraction }.into());
    }
    if pl.spread > tol.calibration_spread {
        return Err(Error::Spread { spread: pl.spread, tol: tol.calibration_spread }.into());
    }
    let held_out = &samples(&grid, ctx.cfg.run.seed.wrapping_add(1), 1)?[0];
    let (hs, _, held_tail) = hs_integral(&qc.ps, held_out, &qc.lgrid)?;
    let held_err = (pl.constant * hs / held_out.l2_norm().powi(2) - 1.0).abs();

    let calibrated = QuantConfig { plancherel_constant: pl.constant, ..qc.clone() };
    let w = calibrate_weyl_constant(&tests, &calibrated)?;
    if w.spread > tol.calibration_spread {
        return Err(Error::Spread { spread: w.spread, tol: tol.calibration_spread }.into());
    }

    let c_an = heis_core::representations::plancherel_constant_analytic(1);
    let w_an = heis_core::quantize::weyl_constant_analytic(1);
    report.row(vec!["plancherel".into(), num(pl.constant), num(c_an), num(pl.spread), num(pl.truncation_delta), num(pl.tail_fraction)]);
    for (k, v) in pl.per_function.iter().enumerate() {
        report.row(vec![format!("plancherel[{k}]"), num(*v), num(c_an), "-".into(), "-".into(), "-".into()]);
    }
    report.row(vec!["plancherel_holdout_error".into(), num(held_err), "-".into(), "-".into(), "-".into(), num(held_tail)]);
    report.row(vec!["weyl".into(), num(w.constant), num(w_an), num(w.spread), "-".into(), "-".into()]);
    for (k, v) in w.per_function.iter().enumerate() {
        report.row(vec![format!("weyl[{k}]"), num(*v), num(w_an), "-".into(), "-".into(), "-".into()]);
    }
    report.verdict = held_err <= tol.calibration_spread;
    report.note("holdout_tolerance", num(tol.calibration_spread));

    std::fs::create_dir_all(&ctx.out)?;
    let cal = Calibration { plancherel_constant: pl.constant, weyl_constant: w.constant };
    let path = ctx.out.join(calibration::FILE_NAME);
    cal.save(&path)?;
    ctx.finish(&report, vec![path])
}

pub fn identity_table_cmd(ctx: &mut Context) -> Result<Outcome, CmdError> {
    ctx.symbol()?;
    let tol = ctx.cfg.tolerances.identity;
    let mut report = Report::new("identity-table", &["identity", "max_error", "tolerance", "pass"]);
    report.note("lambdas", IDENTITY_LAMBDAS.iter().map(|l| num(*l)).collect::<Vec<_>>().join(","));
    for r in identity_table(&IDENTITY_LAMBDAS) {
        let pass = r.max_error <= tol;
        report.verdict &= pass;
        report.row(vec![r.name.into(), num(r.max_error), num(tol), pass.to_string()]);
    }
    ctx.finish(&report, vec![])
}

pub fn membership_cmd(ctx: &mut Context) -> Result<Outcome, CmdError> {
    let sym = ctx.symbol()?;
    let [a, b, c] = ctx.cfg.membership.orders;
    let spec = ctx.cfg.sample_spec();
    let r = membership_with(&sym, (a, b, c), &spec, ctx.cfg.tolerances.growth)?;
    let mut report = Report::new("membership", &["index", "g_row", "base", "refined", "growth", "pass"]);
    report.note("symbol", sym.name.clone());
    report.note("class", format!("{} {} {}", num(r.order), num(r.rho), num(r.delta)));
    let mut plot = Vec::new();
    for (k, row) in r.rows.iter().enumerate() {
        report.row(vec![
            row.index.label(),
            row.g_row.to_string(),
            num(row.base),
            num(row.refined),
            num(row.growth),
            row.pass.to_string(),
        ]);
        plot.push(vec![k as f64, row.base, row.refined]);
    }
    report.verdict = r.pass();
    let p = write_plot(&ctx.out, &ctx.plot_name("membership"), &["row", "base", "refined"], &plot)?;
    ctx.finish(&report, vec![p])
}

pub fn parametrix_cmd(ctx: &mut Context) -> Result<Outcome, CmdError> {
    let sym = ctx.symbol()?;
    let tol = ctx.cfg.tolerances.clone();
    let spec = ctx.cfg.sample_spec();
    let radius = ctx.cfg.parametrix.radius;
    let mut report = Report::new("parametrix", &["quantity", "value", "tolerance", "pass"]);
    report.note("symbol", sym.name.clone());
    let el = elliptic_check(&sym, radius, &spec);
    report.row(vec!["elliptic_constant".into(), num(el.constant), "-".into(), el.pass.to_string()]);
    report.row(vec!["elliptic_constant_refined".into(), num(el.refined_constant), "-".into(), el.pass.to_string()]);
    if !el.pass && !ctx.force {
        report.note("refused", "symbol is not elliptic on the sampled region");
        report.verdict = false;
        return ctx.finish(&report, vec![]);
    }
    let qc = ctx.quant(&mut report)?;
    let phi = SchwartzSample::default().sample(&qc.grid()?)?;
    let b1 = parametrix_unchecked(&sym, radius)?;
    let b2 = parametrix_unchecked(&sym, 2.0 * radius)?;
    let r1 = composition_residual(&sym, &b1, &phi, &qc)?;
    let r2 = composition_residual(&sym, &b2, &phi, &qc)?;
    let [a, b, c] = ctx.cfg.parametrix.orders;
    let mem = membership_with(&b1, (a, b, c), &spec, tol.growth)?;
    let ok1 = r1 <= tol.residual;
    let ok2 = r1 >= tol.residual_ratio * r2;
    report.row(vec![format!("residual_R={}", num(radius)), num(r1), num(tol.residual), ok1.to_string()]);
    report.row(vec![format!("residual_R={}", num(2.0 * radius)), num(r2), "-".into(), "-".into()]);
    report.row(vec!["residual_reduction".into(), num(r1 / r2), num(tol.residual_ratio), ok2.to_string()]);
    report.row(vec![format!("membership_order={}", num(b1.order)), num(mem.worst_growth()), num(1.0 + tol.growth), mem.pass().to_string()]);
    report.verdict = el.pass && ok1 && ok2 && mem.pass();
    ctx.finish(&report, vec![])
}

pub fn probe_cmd(ctx: &mut Context) -> Result<Outcome, CmdError> {
    let sym = ctx.symbol()?;
    let tol = ctx.cfg.tolerances.clone();
    let p = ctx.cfg.probe.clone();
    let mut report = Report::new("probe", &["sample", "stretch", "ratio", "tail_fraction"]);
    report.note("symbol", sym.name.clone());
    report.note("mode", p.mode.clone());
    let qc = ctx.quant(&mut report)?;
    let grid = qc.grid()?;
    let mut fns = vec![("reference".to_string(), 1.0, SchwartzSample::default().sample(&grid)?)];
    for &l in &p.stretches {
        let s = SchwartzSample { sigma: 0.7, stretch: l, twist: true, ..SchwartzSample::default() };
        fns.push((format!("twisted_{}", num(l)), l, s.sample(&grid)?));
    }
    let mut ladder = Vec::new();
    let mut plot = Vec::new();
    let mut max_tail: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for (k, (label, stretch, f)) in fns.iter().enumerate() {
        let one = std::slice::from_ref(f);
        let r = if p.mode == "bounded" {
            boundedness_probe(&sym, p.s, one, &qc)?
        } else {
            subelliptic_probe(&sym, p.m0, p.s, one, &qc)?
        };
        report.row(vec![label.clone(), num(*stretch), num(r.max_ratio), num(r.max_tail)]);
        max_tail = max_tail.max(r.max_tail);
        max_ratio = max_ratio.max(r.max_ratio);
        if k > 0 {
            ladder.push(r.max_ratio);
            plot.push(vec![*stretch, r.max_ratio]);
        }
    }
    if max_tail > tol.tail {
        return Err(Error::TailDominance { fraction: max_tail }.into());
    }
    let lo = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ladder.iter().cloned().fold(0.0, f64::max);
    let drift = hi / lo - 1.0;
    report.note("max_ratio", num(max_ratio));
    report.note("ladder_drift", num(drift));
    report.verdict = max_ratio <= tol.probe_bound && drift <= tol.probe_growth;
    let pf = write_plot(&ctx.out, &ctx.plot_name("probe"), &["stretch", "ratio"], &plot)?;
    ctx.finish(&report, vec![pf])
}

pub fn apply_cmd(ctx: &mut Context) -> Result<Outcome, CmdError> {
    let sym = ctx.symbol()?;
    let mut report = Report::new("apply", &["quantity", "value"]);
    report.note("symbol", sym.name.clone());
    let qc = ctx.quant(&mut report)?;
    let grid = qc.grid()?;
    let phi = match &ctx.input {
        Some(p) => {
            let f = container::load(p).map_err(|e| ConfigError::Invalid(format!("input {}: {e}", p.display())))?;
            report.note("input", file_label(p));
            f
        }
        None => {
            report.note("input", format!("sample(seed={})", ctx.cfg.run.seed));
            samples(&grid, ctx.cfg.run.seed, 1)?.remove(0)
        }
    };
    let out = apply(&sym, &phi, &qc)?;
    report.row(vec!["input_l2".into(), num(phi.l2_norm())]);
    report.row(vec!["output_l2".into(), num(out.l2_norm())]);
    report.row(vec!["output_sup".into(), num(out.sup_norm())]);
    std::fs::create_dir_all(&ctx.out)?;
    let bin = ctx.out.join(format!("{}_apply.bin", ctx.cfg.run.name));
    container::save(&bin, &out)?;

    // x-profile through the centre of the box
    let shape = out.grid.shape();
    let (cy, ct) = (shape[1] / 2, shape[2] / 2);
    let plot: Vec<Vec<f64>> = (0..shape[0])
        .map(|i| {
            let v = out.values[out.grid.flatten(&[i, cy, ct])];
            vec![out.grid.axes[0].node(i), v.re, v.im]
        })
        .collect();
    let pf = write_plot(&ctx.out, &ctx.plot_name("apply"), &["x", "re", "im"], &plot)?;
    ctx.finish(&report, vec![bin, pf])
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
