//! Run configuration: a plain `key = value` file, then command-line
//! overrides, then validation and resolution to concrete parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relwave_core::params::{constants, validity_guard};
use relwave_core::{
    ground_packet, to_natural, CoeffSource, GaussianPacket, OscillatorParams, ScaleRecord,
    ValidityDiagnostics, ValidityThresholds,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "RELWAVE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    #[serde(rename = "custom")]
    Custom,
    #[serde(rename = "electron-1keV")]
    Electron1keV,
    #[serde(rename = "electron-10keV")]
    Electron10keV,
    #[serde(rename = "natural")]
    Natural,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Custom,
        Scenario::Electron1keV,
        Scenario::Electron10keV,
        Scenario::Natural,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Custom => "custom",
            Scenario::Electron1keV => "electron-1keV",
            Scenario::Electron10keV => "electron-10keV",
            Scenario::Natural => "natural",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown scenario `{s}` (expected custom, electron-1keV, electron-10keV or natural)"
                ))
            })
    }
}

/// Log-spaced sweep range `lo,hi,n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepRange {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.n)
            .map(|k| {
                if k == 0 {
                    self.lo
                } else if k + 1 == self.n {
                    self.hi
                } else {
                    (a + (b - a) * k as f64 / (self.n - 1) as f64).exp()
                }
            })
            .collect()
    }
}

impl FromStr for SweepRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || CliError::Config(format!("range `{s}` must look like LO,HI,N"));
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(CliError::Config(format!(
                "range `{s}` needs 0 < LO <= HI"
            )));
        }
        if n < 2 {
            return Err(CliError::Config(format!("range `{s}` needs at least 2 points")));
        }
        Ok(Self { lo, hi, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// η_E for the natural and custom scenarios (custom uses it only when c
    /// is not given).
    pub eps: f64,
    pub mass: Option<f64>,
    pub omega: Option<f64>,
    pub hbar: Option<f64>,
    pub c: Option<f64>,
    pub q0: Option<f64>,
    pub p0: Option<f64>,
    pub sigma_q: Option<f64>,
    pub periods: f64,
    pub points_per_period: usize,
    pub coeff_source: CoeffSource,
    pub fock_dim: Option<usize>,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub workers: Option<usize>,
    pub eta_range: Option<SweepRange>,
    pub omega_range: Option<SweepRange>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Natural,
            eps: 1e-3,
            mass: None,
            omega: None,
            hbar: None,
            c: None,
            q0: None,
            p0: None,
            sigma_q: None,
            periods: 4.0,
            points_per_period: 200,
            coeff_source: CoeffSource::Oracle,
            fock_dim: None,
            out_dir: PathBuf::from("relwave-out"),
            svg: false,
            workers: None,
            eta_range: None,
            omega_range: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "scenario" => self.scenario = v.parse()?,
            "eps" => self.eps = parse_num(&key, v)?,
            "mass" => self.mass = Some(parse_num(&key, v)?),
            "omega" => self.omega = Some(parse_num(&key, v)?),
            "hbar" => self.hbar = Some(parse_num(&key, v)?),
            "c" => self.c = Some(parse_num(&key, v)?),
            "q0" => self.q0 = Some(parse_num(&key, v)?),
            "p0" => self.p0 = Some(parse_num(&key, v)?),
            "sigma_q" => self.sigma_q = Some(parse_num(&key, v)?),
            "periods" => self.periods = parse_num(&key, v)?,
            "points_per_period" => self.points_per_period = parse_num(&key, v)?,
            "coeff_source" => {
                self.coeff_source = v
                    .parse()
                    .map_err(|e| CliError::Config(format!("`coeff_source`: {e}")))?
            }
            "fock_dim" => self.fock_dim = Some(parse_num(&key, v)?),
            "out" | "out_dir" => self.out_dir = PathBuf::from(v),
            "svg" => self.svg = parse_bool(&key, v)?,
            "workers" => self.workers = Some(parse_num(&key, v)?),
            "eta_range" => self.eta_range = Some(v.parse()?),
            "omega_range" => self.omega_range = Some(v.parse()?),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a `key = value` file body. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            self.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.periods > 0.0) || !self.periods.is_finite() {
            return Err(CliError::Config(format!("periods must be > 0, got {}", self.periods)));
        }
        if self.points_per_period < 8 {
            return Err(CliError::Config(format!(
                "points_per_period must be >= 8, got {}",
                self.points_per_period
            )));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(CliError::Config(format!("eps must be finite and >= 0, got {}", self.eps)));
        }
        if self.scenario != Scenario::Custom
            && (self.mass.is_some() || self.omega.is_some() || self.hbar.is_some() || self.c.is_some())
        {
            return Err(CliError::Config(format!(
                "mass/omega/hbar/c can only be set for the custom scenario (got {})",
                self.scenario
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        if let Some(dim) = self.fock_dim {
            relwave_core::FockConfig::new(dim)?;
        }
        Ok(())
    }

    /// Oscillator parameters in the scenario's own units.
    pub fn params(&self) -> Result<OscillatorParams> {
        let p = match self.scenario {
            Scenario::Natural => OscillatorParams::natural(self.eps)?,
            Scenario::Electron1keV => OscillatorParams::electron_trap(1.0e3)?,
            Scenario::Electron10keV => OscillatorParams::electron_trap(1.0e4)?,
            Scenario::Custom => {
                let mass = self.mass.unwrap_or(1.0);
                let omega = self.omega.unwrap_or(1.0);
                let hbar = self.hbar.unwrap_or(1.0);
                let c = match self.c {
                    Some(c) => c,
                    None if self.eps == 0.0 => f64::INFINITY,
                    None => (hbar * omega / (mass * self.eps)).sqrt(),
                };
                OscillatorParams::new(mass, omega, hbar, c)?
            }
        };
        Ok(p)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let params = self.params()?;
        let ground = ground_packet(&params);
        let packet = GaussianPacket::new(
            self.q0.unwrap_or(ground.q0),
            self.p0.unwrap_or(ground.p0),
            self.sigma_q.unwrap_or(ground.sigma_q),
        )?;
        let (natural, natural_packet, scales) = to_natural(&params, &packet)?;
        let diagnostics = validity_guard(&params, &packet, &ValidityThresholds::default());
        Ok(Resolved {
            scenario: self.scenario,
            params,
            packet,
            natural,
            natural_packet,
            scales,
            diagnostics,
        })
    }

    /// Fock dimension: explicit setting, else 128 for the ground packet and
    /// 256 for anything displaced or squeezed.
    pub fn fock_dim_for(&self, natural_packet: &GaussianPacket, natural: &OscillatorParams) -> usize {
        self.fock_dim.unwrap_or_else(|| {
            let ground = ground_packet(natural);
            let is_ground = natural_packet.q0 == 0.0
                && natural_packet.p0 == 0.0
                && (natural_packet.sigma_q / ground.sigma_q - 1.0).abs() < 1e-12;
            if is_ground {
                128
            } else {
                256
            }
        })
    }
}

/// A configuration resolved to concrete parameters in both unit systems.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub params: OscillatorParams,
    pub packet: GaussianPacket,
    pub natural: OscillatorParams,
    pub natural_packet: GaussianPacket,
    pub scales: ScaleRecord,
    pub diagnostics: ValidityDiagnostics,
}

impl Resolved {
    pub fn eta_e(&self) -> f64 {
        self.scales.epsilon
    }
}

/// Electron rest energy in eV, for converting η_E to a level spacing.
pub fn electron_rest_energy_ev() -> f64 {
    constants::ELECTRON_REST_ENERGY_EV
}
