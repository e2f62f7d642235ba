use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    Mean,
    Zero,
}

impl PaddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PaddingMode::Mean => "mean",
            PaddingMode::Zero => "zero",
        }
    }
}

impl FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(PaddingMode::Mean),
            "zero" => Ok(PaddingMode::Zero),
            other => Err(Error::Config(format!("unknown padding mode `{other}`"))),
        }
    }
}

impl fmt::Display for PaddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the preprocessing grid. `None` switches a stage off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub padding: PaddingMode,
    pub filter_acc_hz: Option<f64>,
    pub filter_gyr_hz: Option<f64>,
    pub free_acceleration: bool,
    pub free_angular_velocity: bool,
    pub noise_std_acc: Option<f64>,
    pub noise_std_gyr: Option<f64>,
}

impl Default for PreprocessConfig {
    /// Everything off, zero padding.
    fn default() -> Self {
        PreprocessConfig {
            padding: PaddingMode::Zero,
            filter_acc_hz: None,
            filter_gyr_hz: None,
            free_acceleration: false,
            free_angular_velocity: false,
            noise_std_acc: None,
            noise_std_gyr: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 7] = [
    "padding",
    "filter_acc_hz",
    "filter_gyr_hz",
    "free_acceleration",
    "free_angular_velocity",
    "noise_std_acc",
    "noise_std_gyr",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    let value = value.trim();
    if value.eq_ignore_ascii_case("none") || value.eq_ignore_ascii_case("no") || value.is_empty() {
        return Ok(None);
    }
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Config(format!("{key}: `{value}` must be non-negative")));
    }
    // Zero is the tabulated spelling of "off".
    Ok(if v == 0.0 { None } else { Some(v) })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: `{other}` is not a boolean"))),
    }
}

impl PreprocessConfig {
    /// The top-ranked setup: mean padding, σ_acc 0.5, σ_gyr 3, no filter, not freed.
    pub fn best_reported() -> Self {
        PreprocessConfig {
            padding: PaddingMode::Mean,
            noise_std_acc: Some(0.5),
            noise_std_gyr: Some(3.0),
            ..Default::default()
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        for (name, cutoff) in [("filter_acc_hz", self.filter_acc_hz), ("filter_gyr_hz", self.filter_gyr_hz)] {
            if let Some(c) = cutoff {
                if !(c > 0.0 && c < nyquist) {
                    return Err(Error::Config(format!(
                        "{name} = {c} Hz must lie strictly between 0 and {nyquist} Hz"
                    )));
                }
            }
        }
        for (name, std) in [("noise_std_acc", self.noise_std_acc), ("noise_std_gyr", self.noise_std_gyr)] {
            if let Some(s) = std {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Config(format!("{name} = {s} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Sets one key. Hyphens and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "padding" => self.padding = value.parse()?,
            "filter_acc_hz" => self.filter_acc_hz = parse_opt(key, value)?,
            "filter_gyr_hz" => self.filter_gyr_hz = parse_opt(key, value)?,
            "filter_hz" => {
                let v = parse_opt(key, value)?;
                self.filter_acc_hz = v;
                self.filter_gyr_hz = v;
            }
            "free_acceleration" => self.free_acceleration = parse_bool(key, value)?,
            "free_angular_velocity" => self.free_angular_velocity = parse_bool(key, value)?,
            "noise_std_acc" => self.noise_std_acc = parse_opt(key, value)?,
            "noise_std_gyr" => self.noise_std_gyr = parse_opt(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses the flat `key=value` format. Blank lines and `#` comments are
    /// skipped; unspecified keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = PreprocessConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "padding={}\nfilter_acc_hz={}\nfilter_gyr_hz={}\nfree_acceleration={}\nfree_angular_velocity={}\nnoise_std_acc={}\nnoise_std_gyr={}\n",
            self.padding,
            fmt_opt(self.filter_acc_hz),
            fmt_opt(self.filter_gyr_hz),
            self.free_acceleration,
            self.free_angular_velocity,
            fmt_opt(self.noise_std_acc),
            fmt_opt(self.noise_std_gyr),
        )
    }

    /// Compact one-line form, used as a tie-break key and in logs.
    pub fn key(&self) -> String {
        self.to_kv_string().trim_end().replace('\n', ";")
    }

    /// Filter column in the ranked table, e.g. `0 / 10`.
    pub fn filter_pair_label(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "0".into());
        format!("{} / {}", f(self.filter_acc_hz), f(self.filter_gyr_hz))
    }

    pub fn freed_label(&self) -> &'static str {
        match (self.free_acceleration, self.free_angular_velocity) {
            (false, false) => "False",
            (true, true) => "True",
            (true, false) => "Acc",
            (false, true) => "Gyr",
        }
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_std_acc.is_some() || self.noise_std_gyr.is_some()
    }
}

/// Parses several configs separated by blank lines.
pub fn parse_config_list(text: &str) -> Result<Vec<PreprocessConfig>> {
    let mut out = Vec::new();
    let mut block = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            if !block.trim().is_empty() {
                out.push(PreprocessConfig::from_kv_str(&block)?);
            }
            block.clear();
        } else {
            block.push_str(content);
            block.push('\n');
        }
    }
    if out.is_empty() {
        return Err(Error::Config("config list is empty".into()));
    }
    Ok(out)
}

pub const NOISE_LEVELS_ACC: [Option<f64>; 4] = [None, Some(0.1), Some(0.5), Some(1.0)];
pub const NOISE_LEVELS_GYR: [Option<f64>; 4] = [None, Some(1.0), Some(3.0), Some(5.0)];
pub const CUTOFFS_HZ: [Option<f64>; 3] = [None, Some(10.0), Some(20.0)];

/// How the two filter cutoffs are swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterSweep {
    /// One cutoff applied to both signals.
    #[default]
    Paired,
    /// Acceleration and angular-velocity cutoffs varied separately.
    Independent,
}

/// Full Cartesian product of the preprocessing axes, in a fixed order:
/// padding, cutoff(s), freeing, acceleration noise, angular-velocity noise.
pub fn enumerate_grid(sweep: FilterSweep) -> Vec<PreprocessConfig> {
    let cutoff_pairs: Vec<(Option<f64>, Option<f64>)> = match sweep {
        FilterSweep::Paired => CUTOFFS_HZ.iter().map(|c| (*c, *c)).collect(),
        FilterSweep::Independent => CUTOFFS_HZ
            .iter()
            .flat_map(|a| CUTOFFS_HZ.iter().map(move |g| (*a, *g)))
            .collect(),
    };
    let mut out = Vec::new();
    for padding in [PaddingMode::Mean, PaddingMode::Zero] {
        for &(filter_acc_hz, filter_gyr_hz) in &cutoff_pairs {
            for freed in [false, true] {
                for noise_std_acc in NOISE_LEVELS_ACC {
                    for noise_std_gyr in NOISE_LEVELS_GYR {
                        out.push(PreprocessConfig {
                            padding,
                            filter_acc_hz,
                            filter_gyr_hz,
                            free_acceleration: freed,
                            free_angular_velocity: freed,
                            noise_std_acc,
                            noise_std_gyr,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(enumerate_grid(FilterSweep::Paired).len(), 2 * 3 * 2 * 4 * 4);
        assert_eq!(enumerate_grid(FilterSweep::Independent).len(), 2 * 3 * 3 * 2 * 4 * 4);
    }

    #[test]
    fn grid_contains_reported_top_rows() {
        let grid = enumerate_grid(FilterSweep::Paired);
        assert!(grid.contains(&PreprocessConfig::best_reported()));
        assert!(grid.contains(&PreprocessConfig::default()));
        let row5 = PreprocessConfig {
            padding: PaddingMode::Mean,
            filter_acc_hz: Some(20.0),
            filter_gyr_hz: Some(20.0),
            noise_std_acc: Some(0.1),
            noise_std_gyr: Some(3.0),
            ..Default::default()
        };
        assert!(grid.contains(&row5));
        let independent = enumerate_grid(FilterSweep::Independent);
        let row4 = PreprocessConfig {
            padding: PaddingMode::Zero,
            filter_gyr_hz: Some(10.0),
            noise_std_acc: Some(0.1),
            noise_std_gyr: Some(1.0),
            ..Default::default()
        };
        assert!(independent.contains(&row4));
        assert!(!grid.contains(&row4));
    }

    #[test]
    fn grid_configs_are_distinct_and_valid() {
        let grid = enumerate_grid(FilterSweep::Independent);
        let keys: std::collections::HashSet<_> = grid.iter().map(|c| c.key()).collect();
        assert_eq!(keys.len(), grid.len());
        for c in &grid {
            c.validate(60.0).unwrap();
        }
    }

    #[test]
    fn kv_format_round_trips() {
        for c in enumerate_grid(FilterSweep::Independent) {
            assert_eq!(PreprocessConfig::from_kv_str(&c.to_kv_string()).unwrap(), c);
        }
    }

    #[test]
    fn kv_parsing_accepts_aliases_and_rejects_garbage() {
        let c = PreprocessConfig::from_kv_str(
            "# best\npadding = mean\nnoise-std-acc=0.5\nnoise_std_gyr=3\nfilter_acc_hz=0\n",
        )
        .unwrap();
        assert_eq!(c, PreprocessConfig::best_reported());
        assert!(PreprocessConfig::from_kv_str("padding=edge").is_err());
        assert!(PreprocessConfig::from_kv_str("colour=blue").is_err());
        assert!(PreprocessConfig::from_kv_str("noise_std_acc=-1").is_err());
        assert!(PreprocessConfig::from_kv_str("padding").is_err());
    }

    #[test]
    fn cutoffs_must_stay_below_nyquist() {
        let mut c = PreprocessConfig::default();
        c.filter_acc_hz = Some(30.0);
        assert!(c.validate(60.0).is_err());
        c.filter_acc_hz = Some(29.9);
        assert!(c.validate(60.0).is_ok());
    }

    #[test]
    fn config_lists_split_on_blank_lines() {
        let text = "padding=mean\n\n\npadding=zero\nnoise_std_acc=1\n";
        let list = parse_config_list(text).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[1].noise_std_acc, Some(1.0));
        assert!(parse_config_list("\n# nothing\n").is_err());
    }

    #[test]
    fn table_labels() {
        let c = PreprocessConfig {
            filter_gyr_hz: Some(10.0),
            ..Default::default()
        };
        assert_eq!(c.filter_pair_label(), "0 / 10");
        assert_eq!(c.freed_label(), "False");
    }
}
