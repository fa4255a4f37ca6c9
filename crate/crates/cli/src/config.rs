use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use dirac_edge::bloch::PeriodicPerturbation;
use dirac_edge::flow::SourceKind;
use dirac_edge::{BoundaryParam, EnergyWindow, PerturbationSpec, PhysParams, SwitchProfile, Zeta};
use serde::{Deserialize, Deserializer};

use crate::CliError;

/// Closed interval `a:b`, also accepted as `[a, b]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval(pub f64, pub f64);

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `lo:hi`, got `{s}`"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse `{t}` in `{s}`"))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(format!("interval `{s}` must satisfy lo < hi"));
        }
        Ok(Interval(a, b))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Pair([f64; 2]),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Pair([a, b]) => format!("{a}:{b}").parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

fn parse_zeta(s: &str) -> Result<Zeta, String> {
    s.parse().map_err(|e: dirac_edge::Error| e.to_string())
}

fn deserialize_zeta<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Zeta>, D::Error> {
    Ok(Some(Zeta::deserialize(d)?))
}

fn parse_kebab<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Parameters shared by every command, filled from flags and then
/// overridden field by field by `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Mass m (natural units unless --hbar/--c are given).
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Boundary parameter ζ, a real number or `inf`.
    #[arg(long, value_parser = parse_zeta, allow_hyphen_values = true)]
    #[serde(deserialize_with = "deserialize_zeta")]
    pub zeta: Option<Zeta>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub e: Option<f64>,
    /// Edge momentum range `lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub k_range: Option<Interval>,
    /// Number of momentum samples (or profile points for gapstate).
    #[arg(long)]
    pub n: Option<usize>,
    /// Energy window `lo:hi` inside the gap.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<Interval>,
    /// analytic, shooting or discrete.
    #[arg(long, value_parser = parse_kebab::<SourceKind>)]
    pub source: Option<SourceKind>,
    /// Switch function profile for the conductivity cross-check.
    #[arg(long, value_parser = parse_kebab::<SwitchProfile>)]
    pub profile: Option<SwitchProfile>,
    /// Edge momentum of a single fiber.
    #[arg(long, allow_hyphen_values = true)]
    pub k2: Option<f64>,
    /// Reference energy for the spectral flow.
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<f64>,
    /// Seed of the random perturbation family.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of the random perturbation family.
    #[arg(long)]
    pub count: Option<usize>,
    /// Largest sup norm in the random family.
    #[arg(long)]
    pub max_norm: Option<f64>,
    /// Length scale of the random profiles.
    #[arg(long)]
    pub length: Option<f64>,
    /// Bloch lattice spacing.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Bloch lattice sites.
    #[arg(long)]
    pub sites: Option<usize>,
    /// Period along the edge.
    #[arg(long)]
    pub period: Option<f64>,
    /// Fourier modes along the edge.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Quasi-momentum samples.
    #[arg(long)]
    pub theta_samples: Option<usize>,
    /// Acceptance criteria to run (default all).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u32>>,
    /// Primary output file (default stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// JSON summary file for commands whose primary output is CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Perturbation `W(x₁)`; JSON only.
    #[arg(skip)]
    pub perturbation: Option<PerturbationSpec>,
    /// Edge-periodic perturbation for `bloch`; JSON only.
    #[arg(skip)]
    pub periodic: Option<PeriodicPerturbation>,
}

macro_rules! overlay {
    ($base:ident, $over:ident; $($f:ident),*) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f; } )*
    };
}

impl RunConfig {
    /// Reads `path` and lets every field it sets replace the flag value.
    pub fn overlay_file(mut self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let over: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        overlay!(self, over; m, zeta, hbar, c, e, k_range, n, window, source, profile, k2,
            reference, seed, count, max_norm, length, spacing, sites, period, modes,
            theta_samples, criteria, output, summary, perturbation, periodic);
        Ok(self)
    }

    pub fn params(&self) -> Result<PhysParams, CliError> {
        let p = PhysParams::new(
            self.m.unwrap_or(1.0),
            self.hbar.unwrap_or(1.0),
            self.c.unwrap_or(1.0),
            self.e.unwrap_or(1.0),
        )?;
        p.require_gap()?;
        Ok(p)
    }

    pub fn boundary(&self) -> Result<BoundaryParam, CliError> {
        Ok(BoundaryParam::from_zeta(self.zeta.unwrap_or(Zeta::Finite(1.0)))?)
    }

    pub fn source(&self) -> SourceKind {
        self.source.unwrap_or(SourceKind::Analytic)
    }

    pub fn samples(&self, default: usize) -> Result<usize, CliError> {
        let n = self.n.unwrap_or(default);
        if n < 2 {
            return Err(CliError::Usage(format!("--n must be at least 2, got {n}")));
        }
        Ok(n)
    }

    pub fn perturbation(&self) -> Result<Option<&PerturbationSpec>, CliError> {
        match &self.perturbation {
            Some(w) => {
                w.validate()?;
                Ok((!w.is_zero()).then_some(w))
            }
            None => Ok(None),
        }
    }

    /// `--window`, or `±fraction·|m|c²`.
    pub fn window(&self, p: &PhysParams, fraction: f64) -> Result<EnergyWindow, CliError> {
        let w = match self.window {
            Some(Interval(a, b)) => EnergyWindow::new(a, b)?,
            None => EnergyWindow::new(-fraction * p.gap_edge(), fraction * p.gap_edge())?,
        };
        w.require_inside(p.gap_edge())?;
        Ok(w)
    }
}
