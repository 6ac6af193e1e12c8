//! Run configuration: sectioned TOML with every field resolved and echoed.

use crate::symbol_spec::SymbolSpec;
use heis_core::phase_space::PhaseSpace;
use heis_core::quantize::QuantConfig;
use heis_core::representations::LambdaGrid;
use heis_core::symbol_calculus::SampleSpec;
use heis_core::GroupBox;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub n: usize,
    pub seed: u64,
    /// Sample functions drawn for calibration.
    pub samples: usize,
    /// Persisted calibration; empty means `<out>/calibration.toml` when present.
    pub calibration: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { name: "default".into(), n: 1, seed: 7, samples: 4, calibration: String::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub points: usize,
    pub xi_factor: usize,
    pub n_h: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { half_width: 10.0, points: 128, xi_factor: 2, n_h: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSection {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Default for LambdaSection {
    fn default() -> Self {
        LambdaSection { min: 1.0 / 16.0, max: 16.0, nodes: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSection {
    pub half_width: f64,
    pub points: usize,
    pub t_half_width: f64,
    pub t_points: usize,
}

impl Default for GroupSection {
    fn default() -> Self {
        GroupSection { half_width: 6.0, points: 48, t_half_width: 8.0, t_points: 96 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipSection {
    pub orders: [usize; 3],
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_per_sign: usize,
    pub phase_half_width: f64,
    pub phase_points: usize,
    pub g_half_width: f64,
    pub g_points: usize,
}

impl Default for MembershipSection {
    fn default() -> Self {
        let s = SampleSpec::default_for(1);
        MembershipSection {
            orders: [2, 0, 1],
            lambda_min: s.lambda_min,
            lambda_max: s.lambda_max,
            lambda_per_sign: s.lambda_per_sign,
            phase_half_width: s.phase_half_width,
            phase_points: s.phase_points,
            g_half_width: s.g_half_width,
            g_points: s.g_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixSection {
    pub radius: f64,
    /// Seminorm orders for the membership check of the parametrix symbol.
    pub orders: [usize; 3],
}

impl Default for ParametrixSection {
    fn default() -> Self {
        ParametrixSection { radius: 4.0, orders: [2, 0, 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// `bounded` or `subelliptic`.
    pub mode: String,
    pub s: f64,
    pub m0: f64,
    /// x-stretches of the twisted refinement ladder.
    pub stretches: Vec<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection { mode: "subelliptic".into(), s: 0.0, m0: 2.0, stretches: vec![1.0, std::f64::consts::SQRT_2, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub calibration_spread: f64,
    pub identity: f64,
    pub growth: f64,
    pub tail: f64,
    pub residual: f64,
    /// Required residual reduction factor from R to 2R.
    pub residual_ratio: f64,
    pub probe_bound: f64,
    /// Allowed relative drift of probe ratios along the ladder.
    pub probe_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            calibration_spread: 1e-2,
            identity: 1e-5,
            growth: 0.10,
            tail: 1e-2,
            residual: 0.2,
            residual_ratio: 2.0,
            probe_bound: 10.0,
            probe_growth: 0.10,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let slot = match name {
            "calibration_spread" => &mut self.calibration_spread,
            "identity" => &mut self.identity,
            "growth" => &mut self.growth,
            "tail" => &mut self.tail,
            "residual" => &mut self.residual,
            "residual_ratio" => &mut self.residual_ratio,
            "probe_bound" => &mut self.probe_bound,
            "probe_growth" => &mut self.probe_growth,
            _ => return invalid(format!("unknown tolerance `{name}`")),
        };
        if !(value.is_finite() && value > 0.0) {
            return invalid(format!("tolerance {name} must be positive, got {value}"));
        }
        *slot = value;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub lambda: LambdaSection,
    pub group: GroupSection,
    pub symbol: SymbolSpec,
    pub membership: MembershipSection,
    pub parametrix: ParametrixSection,
    pub probe: ProbeSection,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.n != 1 {
            return invalid(format!("n = {} is not supported by the quantization engine (n = 1 only)", self.run.n));
        }
        let g = &self.grid;
        if !g.points.is_power_of_two() {
            return invalid(format!("grid.points = {} must be a power of two", g.points));
        }
        if g.n_h == 0 || 2 * g.n_h > g.points {
            return invalid(format!("grid.n_h = {} must lie in 1..={}", g.n_h, g.points / 2));
        }
        if !(g.half_width > 0.0) || g.xi_factor == 0 {
            return invalid("grid.half_width and grid.xi_factor must be positive");
        }
        let l = &self.lambda;
        if !(l.min > 0.0 && l.min < l.max) || l.nodes < 2 {
            return invalid(format!("lambda band needs 0 < min < max and nodes >= 2, got [{}, {}] with {}", l.min, l.max, l.nodes));
        }
        let gr = &self.group;
        if !(gr.half_width > 0.0 && gr.t_half_width > 0.0) || gr.points % 2 != 0 || gr.t_points % 2 != 0 || gr.points < 4 || gr.t_points < 4 {
            return invalid("group box needs positive widths and even point counts >= 4");
        }
        if self.run.samples < 3 {
            return invalid("run.samples must be at least 3");
        }
        let m = &self.membership;
        if m.phase_points % 2 == 0 || m.g_points % 2 == 0 {
            return invalid("membership phase_points and g_points must be odd");
        }
        if !(m.lambda_min > 0.0 && m.lambda_min < m.lambda_max) || m.lambda_per_sign < 2 {
            return invalid("membership lambda band needs 0 < lambda_min < lambda_max and lambda_per_sign >= 2");
        }
        if !(self.parametrix.radius > 0.0) {
            return invalid("parametrix.radius must be positive");
        }
        if self.probe.mode != "bounded" && self.probe.mode != "subelliptic" {
            return invalid(format!("probe.mode `{}` is neither bounded nor subelliptic", self.probe.mode));
        }
        if self.probe.stretches.len() < 2 || self.probe.stretches.iter().any(|s| !(*s >= 1.0)) {
            return invalid("probe.stretches needs at least two values >= 1");
        }
        self.symbol.validate()
    }

    pub fn phase_space(&self) -> heis_core::Result<PhaseSpace> {
        let g = &self.grid;
        PhaseSpace::new(self.run.n, g.half_width, g.points, g.xi_factor, g.n_h)
    }

    pub fn lambda_grid(&self) -> heis_core::Result<LambdaGrid> {
        LambdaGrid::new(self.run.n, self.lambda.min, self.lambda.max, self.lambda.nodes)
    }

    pub fn group_box(&self) -> GroupBox {
        let g = &self.group;
        GroupBox { n: self.run.n, half_width: g.half_width, points: g.points, t_half_width: g.t_half_width, t_points: g.t_points }
    }

    pub fn quant_config(&self) -> heis_core::Result<QuantConfig> {
        QuantConfig::new(self.phase_space()?, self.lambda_grid()?, self.group_box())
    }

    pub fn sample_spec(&self) -> SampleSpec {
        let m = &self.membership;
        SampleSpec {
            n: self.run.n,
            lambda_min: m.lambda_min,
            lambda_max: m.lambda_max,
            lambda_per_sign: m.lambda_per_sign,
            phase_half_width: m.phase_half_width,
            phase_points: m.phase_points,
            g_half_width: m.g_half_width,
            g_points: m.g_points,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml("[lambda]\nmax = 1.0\n").unwrap();
        assert_eq!(c.lambda.max, 1.0);
        assert_eq!(c.lambda.min, 1.0 / 16.0);
        assert_eq!(c.grid, GridSection::default());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |t: &str| RunConfig::from_toml(t).map(|c| c.validate().is_err()).unwrap_or(true);
        assert!(bad("[grid]\npoints = 100\n"));
        assert!(bad("[grid]\nn_h = 65\n"));
        assert!(bad("[lambda]\nmin = 2.0\nmax = 1.0\n"));
        assert!(bad("[run]\nn = 2\n"));
        assert!(bad("[grid]\nbogus = 1\n"));
        assert!(bad("[probe]\nmode = \"sideways\"\n"));
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set("residual", 0.5).unwrap();
        assert_eq!(t.residual, 0.5);
        assert!(t.set("nope", 1.0).is_err());
        assert!(t.set("growth", -1.0).is_err());
    }
}
