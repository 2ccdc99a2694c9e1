//! Generator settings and their flat `key = value` text form.
//!
//! Per-type lists follow the order IPV, child_adolescent, elderly,
//! intersibling_other. Per-reporter lists follow social_worker,
//! hospital_staff, police, other.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geo::boundaries::SYNTH_DISTRICTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Demographic counts are fixed by largest-remainder quotas and then
    /// shuffled, so published proportions are met to within one record.
    Stratified,
    /// Every attribute is an independent draw.
    Independent,
}

impl FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stratified" => Ok(Sampling::Stratified),
            "independent" => Ok(Sampling::Independent),
            _ => Err(format!("expected `stratified` or `independent`, got `{s}`")),
        }
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Stratified => "stratified",
            Sampling::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_cases: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub type_mix: [f64; 4],
    pub female_share: [f64; 4],
    pub low_income_rate: [f64; 4],
    pub disability_rate: [f64; 4],
    /// Share aged 0-18 per type.
    pub minor_share: [f64; 4],
    /// Share aged 65+ per type.
    pub senior_share: [f64; 4],
    pub reporter_mix: [f64; 4],
    pub reporter_score_means: [f64; 4],
    pub reporter_score_sds: [f64; 4],
    /// Target share of records with three or more reports.
    pub positive_rate: f64,
    /// Log-odds added per planted indicator present. Zero gives labels
    /// independent of every feature.
    pub signal_strength: f64,
    /// Assessment scores at or above this count as high.
    pub tipvda_high: u32,
    pub duration_mean_months: f64,
    pub positive_reports_min: u32,
    pub positive_reports_max: u32,
    /// Probability that a negative record has two reports rather than one.
    pub negative_two_report_share: f64,
    /// Relative case weight of each synthetic district, D01 first.
    pub district_weights: Vec<f64>,
    /// Probability that one model field of a record is left blank.
    pub missing_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::map_mode()
    }
}

impl GeneratorConfig {
    /// Citywide extract: all four case types.
    pub fn map_mode() -> Self {
        GeneratorConfig {
            n_cases: 8850,
            seed: 2015,
            sampling: Sampling::Stratified,
            type_mix: [0.52, 0.08, 0.06, 0.34],
            female_share: [0.81, 0.46, 0.63, 0.59],
            low_income_rate: [0.087, 0.242, 0.092, 0.124],
            disability_rate: [0.021, 0.018, 0.039, 0.042],
            minor_share: [0.03, 1.0, 0.0, 0.08],
            senior_share: [0.07, 0.0, 1.0, 0.09],
            reporter_mix: [0.40, 0.20, 0.35, 0.05],
            reporter_score_means: [2.71, 3.54, 2.30, 2.71],
            reporter_score_sds: [0.19, 0.19, 0.18, 0.19],
            positive_rate: 0.04,
            signal_strength: 5.5,
            tipvda_high: 4,
            duration_mean_months: 24.0,
            positive_reports_min: 3,
            positive_reports_max: 7,
            negative_two_report_share: 0.3,
            district_weights: vec![
                0.16, 0.14, 0.12, 0.11, 0.10, 0.09, 0.08, 0.07, 0.05, 0.04, 0.025, 0.015,
            ],
            missing_rate: 0.0,
        }
    }

    /// Modelling extract: intimate-partner cases only.
    pub fn model_mode() -> Self {
        GeneratorConfig {
            n_cases: 3759,
            type_mix: [1.0, 0.0, 0.0, 0.0],
            ..GeneratorConfig::map_mode()
        }
    }

    pub fn preset(name: &str) -> Result<Self, SynthError> {
        match name {
            "map" => Ok(GeneratorConfig::map_mode()),
            "model" => Ok(GeneratorConfig::model_mode()),
            _ => Err(SynthError::Invalid(format!("unknown preset `{name}` (map, model)"))),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        let unit = |name: &str, v: f64| -> Result<(), SynthError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SynthError::Invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        let simplex = |name: &str, v: &[f64]| -> Result<(), SynthError> {
            for &x in v {
                unit(name, x)?;
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(SynthError::Invalid(format!("{name} sums to {s}, expected 1")));
            }
            Ok(())
        };
        simplex("type_mix", &self.type_mix)?;
        simplex("reporter_mix", &self.reporter_mix)?;
        for (name, v) in [
            ("female_share", &self.female_share),
            ("low_income_rate", &self.low_income_rate),
            ("disability_rate", &self.disability_rate),
            ("minor_share", &self.minor_share),
            ("senior_share", &self.senior_share),
        ] {
            for &x in v {
                unit(name, x)?;
            }
        }
        for t in 0..4 {
            if self.minor_share[t] + self.senior_share[t] > 1.0 + 1e-9 {
                return bad(format!("minor_share + senior_share exceeds 1 for type {t}"));
            }
        }
        unit("positive_rate", self.positive_rate)?;
        unit("negative_two_report_share", self.negative_two_report_share)?;
        unit("missing_rate", self.missing_rate)?;
        if !self.signal_strength.is_finite() || self.signal_strength < 0.0 {
            return bad(format!("signal_strength = {} must be finite and >= 0", self.signal_strength));
        }
        for (&m, &s) in self.reporter_score_means.iter().zip(&self.reporter_score_sds) {
            if !m.is_finite() || !s.is_finite() || s < 0.0 {
                return bad("reporter score means must be finite and sds >= 0".into());
            }
        }
        if !(self.duration_mean_months.is_finite() && self.duration_mean_months > 0.0) {
            return bad(format!("duration_mean_months = {} must be > 0", self.duration_mean_months));
        }
        if self.positive_reports_min < 3 || self.positive_reports_max < self.positive_reports_min {
            return bad(format!(
                "positive report range {}..{} must start at 3 or more and be nonempty",
                self.positive_reports_min, self.positive_reports_max
            ));
        }
        if self.district_weights.len() != SYNTH_DISTRICTS
            || self.district_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.district_weights.iter().sum::<f64>() <= 0.0
        {
            return bad(format!(
                "district_weights needs {SYNTH_DISTRICTS} nonnegative values with a positive sum"
            ));
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), SynthError> {
        let invalid = |msg: String| SynthError::Value {
            key: key.to_string(),
            message: msg,
        };
        fn scalar<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", v.trim()))
        }
        fn list(v: &str) -> Result<Vec<f64>, String> {
            v.split(',').map(scalar::<f64>).collect()
        }
        fn four(v: &str) -> Result<[f64; 4], String> {
            let l = list(v)?;
            l.as_slice()
                .try_into()
                .map_err(|_| format!("expected 4 comma-separated values, got {}", l.len()))
        }
        let r: Result<(), String> = (|| {
            match key {
                "n_cases" => self.n_cases = scalar(value)?,
                "seed" => self.seed = scalar(value)?,
                "sampling" => self.sampling = scalar(value)?,
                "type_mix" => self.type_mix = four(value)?,
                "female_share" => self.female_share = four(value)?,
                "low_income_rate" => self.low_income_rate = four(value)?,
                "disability_rate" => self.disability_rate = four(value)?,
                "minor_share" => self.minor_share = four(value)?,
                "senior_share" => self.senior_share = four(value)?,
                "reporter_mix" => self.reporter_mix = four(value)?,
                "reporter_score_means" => self.reporter_score_means = four(value)?,
                "reporter_score_sds" => self.reporter_score_sds = four(value)?,
                "positive_rate" => self.positive_rate = scalar(value)?,
                "signal_strength" => self.signal_strength = scalar(value)?,
                "tipvda_high" => self.tipvda_high = scalar(value)?,
                "duration_mean_months" => self.duration_mean_months = scalar(value)?,
                "positive_reports_min" => self.positive_reports_min = scalar(value)?,
                "positive_reports_max" => self.positive_reports_max = scalar(value)?,
                "negative_two_report_share" => self.negative_two_report_share = scalar(value)?,
                "district_weights" => self.district_weights = list(value)?,
                "missing_rate" => self.missing_rate = scalar(value)?,
                _ => return Err(String::new()),
            }
            Ok(())
        })();
        match r {
            Ok(()) => Ok(()),
            Err(m) if m.is_empty() => Err(SynthError::UnknownKey(key.to_string())),
            Err(m) => Err(invalid(m)),
        }
    }

    /// Applies every `key = value` line of `text` on top of `self`. Blank
    /// lines and lines starting with `#` are ignored. A `preset` key, if
    /// present, must come first and resets all fields.
    pub fn apply_text(&mut self, text: &str) -> Result<(), SynthError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SynthError::Parse {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "preset" {
                *self = GeneratorConfig::preset(value)?;
            } else {
                self.apply(key, value)?;
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, SynthError> {
        let mut c = GeneratorConfig::map_mode();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Text form that `from_text` reads back to an equal config.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("n_cases", self.n_cases.to_string());
        kv("seed", self.seed.to_string());
        kv("sampling", self.sampling.to_string());
        kv("type_mix", join(&self.type_mix));
        kv("female_share", join(&self.female_share));
        kv("low_income_rate", join(&self.low_income_rate));
        kv("disability_rate", join(&self.disability_rate));
        kv("minor_share", join(&self.minor_share));
        kv("senior_share", join(&self.senior_share));
        kv("reporter_mix", join(&self.reporter_mix));
        kv("reporter_score_means", join(&self.reporter_score_means));
        kv("reporter_score_sds", join(&self.reporter_score_sds));
        kv("positive_rate", self.positive_rate.to_string());
        kv("signal_strength", self.signal_strength.to_string());
        kv("tipvda_high", self.tipvda_high.to_string());
        kv("duration_mean_months", self.duration_mean_months.to_string());
        kv("positive_reports_min", self.positive_reports_min.to_string());
        kv("positive_reports_max", self.positive_reports_max.to_string());
        kv("negative_two_report_share", self.negative_two_report_share.to_string());
        kv("district_weights", join(&self.district_weights));
        kv("missing_rate", self.missing_rate.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        GeneratorConfig::map_mode().validate().unwrap();
        GeneratorConfig::model_mode().validate().unwrap();
        assert_eq!(GeneratorConfig::model_mode().n_cases, 3759);
    }

    #[test]
    fn text_round_trip() {
        let mut c = GeneratorConfig::model_mode();
        c.signal_strength = 0.0;
        c.sampling = Sampling::Independent;
        assert_eq!(GeneratorConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn text_overrides_and_comments() {
        let c = GeneratorConfig::from_text("# demo\npreset = model\n\nn_cases = 10\nseed=3\n").unwrap();
        assert_eq!((c.n_cases, c.seed, c.type_mix[0]), (10, 3, 1.0));
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(
            GeneratorConfig::from_text("colour = red"),
            Err(SynthError::UnknownKey(k)) if k == "colour"
        ));
        assert!(matches!(
            GeneratorConfig::from_text("n_cases 5"),
            Err(SynthError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            GeneratorConfig::from_text("type_mix = 0.5,0.5"),
            Err(SynthError::Value { .. })
        ));
        assert!(GeneratorConfig::from_text("type_mix = 0.5,0.5,0.5,0.5").is_err());
        assert!(GeneratorConfig::from_text("positive_rate = 1.5").is_err());
        assert!(GeneratorConfig::from_text("positive_reports_min = 2").is_err());
        assert!(GeneratorConfig::from_text("district_weights = 1,2").is_err());
    }
}
