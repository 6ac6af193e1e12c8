//! Persisted normalization constants. The bit patterns are authoritative; the
//! decimal fields are for readers.

use crate::config::ConfigError;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FILE_NAME: &str = "calibration.toml";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub plancherel_constant: f64,
    pub weyl_constant: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Stored {
    version: String,
    plancherel_constant: f64,
    weyl_constant: f64,
    plancherel_bits: String,
    weyl_bits: String,
}

fn bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn from_bits(s: &str) -> Result<f64, ConfigError> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| ConfigError::Invalid(format!("bad bit pattern `{s}` in calibration file")))
}

impl Calibration {
    pub fn to_toml(&self) -> String {
        let s = Stored {
            version: crate::report::version_tag(),
            plancherel_constant: self.plancherel_constant,
            weyl_constant: self.weyl_constant,
            plancherel_bits: bits(self.plancherel_constant),
            weyl_bits: bits(self.weyl_constant),
        };
        toml::to_string(&s).expect("calibration serializes")
    }

    pub fn from_toml(text: &str) -> Result<Calibration, ConfigError> {
        let s: Stored = toml::from_str(text)?;
        let c = Calibration { plancherel_constant: from_bits(&s.plancherel_bits)?, weyl_constant: from_bits(&s.weyl_bits)? };
        if !(c.plancherel_constant > 0.0 && c.weyl_constant > 0.0) {
            return Err(ConfigError::Invalid("calibration constants must be positive".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_toml())
    }

    pub fn load(path: &Path) -> Result<Calibration, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Calibration::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let c = Calibration { plancherel_constant: 0.1 + 0.2, weyl_constant: std::f64::consts::PI.powf(-1.5) };
        assert_eq!(Calibration::from_toml(&c.to_toml()).unwrap(), c);
    }
}
