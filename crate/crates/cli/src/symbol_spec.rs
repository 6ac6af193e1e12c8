//! Symbol selection: `NAME[:k=v,…]` on the command line or a `[symbol]` section.

use crate::config::ConfigError;
use heis_core::container;
use heis_core::phase_space::WeylSymbol;
use heis_core::symbol_calculus::{builtin_symbol, sampled_symbol, Coefficient, LambdaSymbol, SymbolParams, BUILTIN_NAMES};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// `name = "file"` selects the sampled renormalized symbol stored at `file`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolSpec {
    pub name: String,
    pub j: usize,
    pub m: u32,
    pub m0: u32,
    /// `<c>` for a constant or `sine:<offset>:<amplitude>`.
    pub f1: String,
    pub f2: String,
    pub file: String,
    /// Class parameters; unset means the natural class of the symbol.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Default for SymbolSpec {
    fn default() -> Self {
        SymbolSpec {
            name: "I-L".into(),
            j: 0,
            m: 2,
            m0: 2,
            f1: "1".into(),
            f2: "1".into(),
            file: String::new(),
            order: None,
            rho: None,
            delta: None,
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

pub fn parse_coefficient(s: &str) -> Result<Coefficient, ConfigError> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| ConfigError::Invalid(format!("bad number `{v}` in coefficient `{s}`")));
    match s.strip_prefix("sine:") {
        Some(rest) => match rest.split_once(':') {
            Some((o, a)) => Ok(Coefficient::ShiftedSine { offset: num(o)?, amplitude: num(a)? }),
            None => invalid(format!("coefficient `{s}` should read sine:<offset>:<amplitude>")),
        },
        None => Ok(Coefficient::Constant(num(s)?)),
    }
}

impl SymbolSpec {
    /// Applies a `NAME[:k=v,…]` selector on top of `self`.
    pub fn override_with(&mut self, arg: &str) -> Result<(), ConfigError> {
        let (name, rest) = arg.split_once(':').unwrap_or((arg, ""));
        if name.is_empty() {
            return invalid("empty symbol name");
        }
        if name != self.name {
            self.order = None;
            self.rho = None;
            self.delta = None;
        }
        self.name = name.to_string();
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("expected k=v, got `{kv}`")))?;
            let float = || v.parse::<f64>().map_err(|_| ConfigError::Invalid(format!("bad value for {k}: `{v}`")));
            let int = || v.parse::<u32>().map_err(|_| ConfigError::Invalid(format!("bad value for {k}: `{v}`")));
            match k {
                "j" => self.j = int()? as usize,
                "m" => self.m = int()?,
                "m0" => self.m0 = int()?,
                "f1" => self.f1 = v.to_string(),
                "f2" => self.f2 = v.to_string(),
                "file" => self.file = v.to_string(),
                "order" => self.order = Some(float()?),
                "rho" => self.rho = Some(float()?),
                "delta" => self.delta = Some(float()?),
                _ => return invalid(format!("unknown symbol parameter `{k}`")),
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name == "file" {
            if self.file.is_empty() {
                return invalid("symbol `file` needs file=PATH");
            }
        } else if !BUILTIN_NAMES.contains(&self.name.as_str()) {
            return invalid(format!("unknown symbol `{}`; built-ins are {}", self.name, BUILTIN_NAMES.join(", ")));
        }
        parse_coefficient(&self.f1)?;
        parse_coefficient(&self.f2)?;
        Ok(())
    }

    pub fn params(&self, n: usize) -> Result<SymbolParams, ConfigError> {
        Ok(SymbolParams { n, j: self.j, m: self.m, m0: self.m0, f1: parse_coefficient(&self.f1)?, f2: parse_coefficient(&self.f2)? })
    }

    /// Builds the symbol and pins its class in `self`, so the echoed config
    /// names every parameter that was used.
    pub fn resolve(&mut self, n: usize, base_dir: &Path) -> Result<LambdaSymbol, ConfigError> {
        self.validate()?;
        let sym = if self.name == "file" {
            let path = base_dir.join(&self.file);
            let data = container::load(&path).map_err(|e| ConfigError::Invalid(format!("symbol file {}: {e}", path.display())))?;
            let table = WeylSymbol::new(n, data).map_err(|e| ConfigError::Invalid(format!("symbol file: {e}")))?;
            let (m, r, d) = (self.order.unwrap_or(0.0), self.rho.unwrap_or(1.0), self.delta.unwrap_or(0.0));
            sampled_symbol("file", table, m, r, d).map_err(|e| ConfigError::Invalid(e.to_string()))?
        } else {
            let s = builtin_symbol(&self.name, &self.params(n)?).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let (m, r, d) = (self.order.unwrap_or(s.order), self.rho.unwrap_or(s.rho), self.delta.unwrap_or(s.delta));
            s.with_class(m, r, d).map_err(|e| ConfigError::Invalid(e.to_string()))?
        };
        self.order = Some(sym.order);
        self.rho = Some(sym.rho);
        self.delta = Some(sym.delta);
        Ok(sym)
    }
}
