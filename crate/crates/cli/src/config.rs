//! JSON run configuration. Every field can be overridden from the command line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use subdiff_core::analysis::{SpatialErrorMode, SpatialGuard};
use subdiff_core::kernels::Scheme;

/// A grading exponent written either as a decimal or as a ratio such as `5/3`.
/// The original text is kept so a config survives a round trip unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    text: String,
    value: f64,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn from_f64(value: f64) -> Self {
        Self {
            text: format!("{value}"),
            value,
        }
    }
}

impl FromStr for Rational {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let value = match t.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().with_context(|| format!("bad numerator in '{t}'"))?;
                let den: f64 = den.trim().parse().with_context(|| format!("bad denominator in '{t}'"))?;
                if den == 0.0 {
                    bail!("zero denominator in '{t}'");
                }
                num / den
            }
            None => t.parse().with_context(|| format!("'{t}' is not a number or ratio"))?,
        };
        if !value.is_finite() {
            bail!("'{t}' is not finite");
        }
        Ok(Self { text: t.to_string(), value })
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Rational::from_f64(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    L1,
    Fraccn,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::L1 => Scheme::L1,
            SchemeName::Fraccn => Scheme::FracCn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpatialName {
    #[default]
    Direct,
    Extrapolated,
}

impl From<SpatialName> for SpatialErrorMode {
    fn from(s: SpatialName) -> Self {
        match s {
            SpatialName::Direct => SpatialErrorMode::Direct,
            SpatialName::Extrapolated => SpatialErrorMode::Extrapolated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardConfig {
    pub enabled: bool,
    pub max_intervals: usize,
    pub tolerance: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        let g = SpatialGuard::default();
        Self {
            enabled: g.enabled,
            max_intervals: g.max,
            tolerance: g.tolerance,
        }
    }
}

/// Parameters of a convergence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: SchemeName,
    pub example: u8,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: Rational,
    /// Step counts; each must double the previous one.
    pub steps: Vec<usize>,
    /// Spatial intervals (initial value when the guard is on).
    pub intervals: usize,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Length of the graded phase; the default is `min(1/gamma, 2^-gamma)`.
    #[serde(default)]
    pub graded_span: Option<f64>,
    #[serde(default)]
    pub guard: GuardConfig,
    #[serde(default)]
    pub spatial: SpatialName,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_t_final() -> f64 {
    1.0
}

fn default_threads() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Range and shape checks that the numerics would otherwise report later.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if !(self.sigma > 0.0) {
            bail!("sigma must be positive, got {}", self.sigma);
        }
        if !(self.gamma.value() >= 1.0) {
            bail!("gamma must be >= 1, got {}", self.gamma);
        }
        if self.example != 1 && self.example != 2 {
            bail!("example must be 1 or 2, got {}", self.example);
        }
        if self.steps.is_empty() {
            bail!("the step list is empty");
        }
        if let Some(i) = self.steps.windows(2).position(|w| w[1] != 2 * w[0]) {
            bail!("step counts must double: {} -> {}", self.steps[i], self.steps[i + 1]);
        }
        if self.intervals < 2 {
            bail!("need at least 2 spatial intervals");
        }
        if self.threads == 0 {
            bail!("threads must be >= 1");
        }
        Ok(())
    }
}

/// Parses a comma-separated list of step counts.
pub fn parse_steps(s: &str) -> Result<Vec<usize>> {
    let steps = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad step count '{p}'")))
        .collect::<Result<Vec<_>>>()?;
    if steps.is_empty() {
        bail!("the step list is empty");
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            scheme: SchemeName::Fraccn,
            example: 2,
            alpha: 0.4,
            sigma: 1.2,
            gamma: "5/3".parse().unwrap(),
            steps: vec![128, 256],
            intervals: 2048,
            t_final: 1.0,
            graded_span: None,
            guard: GuardConfig::default(),
            spatial: SpatialName::Extrapolated,
            threads: 2,
        }
    }

    #[test]
    fn rational_parsing() {
        let g: Rational = "5/3".parse().unwrap();
        assert_eq!(g.value(), 5.0 / 3.0);
        assert_eq!(g.to_string(), "5/3");
        assert_eq!("2.5".parse::<Rational>().unwrap().value(), 2.5);
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let c = sample();
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn numeric_gamma_and_defaults() {
        let c = RunConfig::from_json(r#"{"scheme":"l1","example":1,"alpha":0.5,"sigma":1.5,"gamma":1,"steps":[10,20],"intervals":64}"#).unwrap();
        assert_eq!(c.gamma.value(), 1.0);
        assert_eq!(c.t_final, 1.0);
        assert_eq!(c.threads, 1);
        assert!(c.guard.enabled);
        c.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let mut c = sample();
        c.steps = vec![10, 30];
        assert!(c.validate().is_err());
        c.steps.clear();
        assert!(c.validate().is_err());
        assert!(parse_steps("").is_err());
        assert_eq!(parse_steps("100, 200,400").unwrap(), vec![100, 200, 400]);
        assert!(RunConfig::from_json(r#"{"bogus":1}"#).is_err());
    }
}
