//! Synthetic case extracts matching the published marginals, with a planted
//! link between three model-visible features and repeat victimization.
//!
//! Planted indicators: a high assessment score, a long abuse history (above
//! the generator's own upper-tertile duration), and a severe injury. Each one
//! present adds `signal_strength` to the log-odds of being a repeat victim;
//! the intercept is solved so the realised positive share equals
//! `positive_rate`.

pub mod config;

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Normal, weighted::WeightedIndex};
use thiserror::Error;

pub use config::{GeneratorConfig, Sampling};

use crate::forest::seed::{stream_rng, REPORTER_STREAM, SYNTH_STREAM};
use crate::geo::{Boundaries, CaseType, CaseTypeMapping};
use crate::preprocess::{AgeBand, CaseRecord, Gender, ReporterOccupation};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("invalid generator config: {0}")]
    Invalid(String),
}

pub const MAIMED_LEVELS: [(&str, f64); 6] = [
    ("none", 0.40),
    ("bruise", 0.32),
    ("laceration", 0.15),
    ("fracture", 0.05),
    ("burn", 0.03),
    ("strangulation", 0.02),
];
pub const SEVERE_MAIMED: [&str; 3] = ["fracture", "burn", "strangulation"];

pub const OCCUPATION_LEVELS: [(&str, f64); 8] = [
    ("service", 0.25),
    ("unemployed", 0.22),
    ("manufacturing", 0.15),
    ("homemaker", 0.14),
    ("professional", 0.12),
    ("student", 0.06),
    ("military", 0.03),
    ("agriculture", 0.03),
];

pub const EDUCATION_LEVELS: [(&str, f64); 6] = [
    ("senior_high", 0.35),
    ("college", 0.25),
    ("junior_high", 0.20),
    ("elementary", 0.10),
    ("graduate", 0.06),
    ("illiterate", 0.04),
];

const TIPVDA_MAX: f64 = 15.0;

/// Largest-remainder apportionment of `n` items over `probs`; ties go to the
/// lower index.
pub fn quotas(probs: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = probs.iter().sum();
    let exact: Vec<f64> = probs.iter().map(|p| p / total * n as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// A category index per item, either by shuffled quota or by independent
/// draws.
fn assign(probs: &[f64], n: usize, sampling: Sampling, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match sampling {
        Sampling::Stratified => {
            let mut v: Vec<usize> = quotas(probs, n)
                .into_iter()
                .enumerate()
                .flat_map(|(i, q)| std::iter::repeat_n(i, q))
                .collect();
            v.shuffle(rng);
            v
        }
        Sampling::Independent => {
            let w = WeightedIndex::new(probs).expect("validated weights");
            (0..n).map(|_| w.sample(rng)).collect()
        }
    }
}

fn pick<'a>(table: &[(&'a str, f64)], rng: &mut ChaCha8Rng) -> &'a str {
    let w = WeightedIndex::new(table.iter().map(|(_, p)| *p)).expect("static weights");
    table[w.sample(rng)].0
}

/// Durations strictly above this many months count as long: the smallest
/// month at which the generator's duration distribution reaches 2/3.
pub fn long_duration_cut(config: &GeneratorConfig) -> u32 {
    let q = 1.0 - 1.0 / config.duration_mean_months.max(1.0);
    if q <= 0.0 {
        return 1;
    }
    ((1.0f64 / 3.0).ln() / q.ln()).ceil() as u32
}

/// Number of planted indicators present, or `None` if a needed field is
/// missing.
pub fn planted_indicators(config: &GeneratorConfig, record: &CaseRecord) -> Option<u32> {
    let high_score = record.tipvda_score? >= config.tipvda_high;
    let long = record.dv_duration_months? > long_duration_cut(config);
    let severe = SEVERE_MAIMED.contains(&record.maimed.as_deref()?);
    Some(u32::from(high_score) + u32::from(long) + u32::from(severe))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept giving mean probability `rate` over records whose indicator
/// counts are tallied in `by_h`.
fn solve_intercept(by_h: &[usize; 4], strength: f64, rate: f64) -> f64 {
    let n: usize = by_h.iter().sum();
    let mean = |b: f64| {
        by_h.iter()
            .enumerate()
            .map(|(h, &c)| c as f64 * sigmoid(b + strength * h as f64))
            .sum::<f64>()
            / n as f64
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate(config: &GeneratorConfig) -> Result<Vec<CaseRecord>, SynthError> {
    config.validate()?;
    let n = config.n_cases;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(config.seed, &[SYNTH_STREAM]);
    let sampling = config.sampling;

    let types = assign(&config.type_mix, n, sampling, &mut rng);
    let mut female = vec![false; n];
    let mut low_income = vec![false; n];
    let mut disability = vec![false; n];
    let mut band = vec![AgeBand::Adult; n];
    for t in 0..4 {
        let members: Vec<usize> = (0..n).filter(|&i| types[i] == t).collect();
        let m = members.len();
        let binary = |p: f64, rng: &mut ChaCha8Rng| assign(&[1.0 - p, p], m, sampling, rng);
        for (target, p) in [
            (&mut female, config.female_share[t]),
            (&mut low_income, config.low_income_rate[t]),
            (&mut disability, config.disability_rate[t]),
        ] {
            for (&i, v) in members.iter().zip(binary(p, &mut rng)) {
                target[i] = v == 1;
            }
        }
        let (minor, senior) = (config.minor_share[t], config.senior_share[t]);
        let adult = (1.0 - minor - senior).max(0.0);
        for (&i, b) in members.iter().zip(assign(&[minor, adult, senior], m, sampling, &mut rng)) {
            band[i] = AgeBand::ALL[b];
        }
    }
    let reporters = assign(&config.reporter_mix, n, sampling, &mut rng);

    let boundaries = Boundaries::synthetic();
    let mut by_district: Vec<Vec<usize>> = vec![Vec::new(); config.district_weights.len()];
    for (i, v) in boundaries.villages().iter().enumerate() {
        let d: usize = v.district_id[1..].parse().expect("synthetic district id");
        by_district[d - 1].push(i);
    }
    let district_pick = WeightedIndex::new(&config.district_weights).expect("validated weights");
    let mapping = CaseTypeMapping::builtin();
    let raw_labels: Vec<Vec<&str>> = CaseType::ALL.iter().map(|&c| mapping.labels(c)).collect();
    let duration = Geometric::new(1.0 / config.duration_mean_months.max(1.0)).expect("valid p");
    let unit = Uniform::new(0.0, 1.0).expect("unit interval");

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let occ = ReporterOccupation::ALL[reporters[i]];
        let k = reporters[i];
        let score = Normal::new(config.reporter_score_means[k], config.reporter_score_sds[k])
            .expect("validated sd")
            .sample(&mut rng)
            .round()
            .clamp(0.0, TIPVDA_MAX) as u32;
        let months = 1 + duration.sample(&mut rng).min(u64::from(u32::MAX - 1)) as u32;
        let maimed = pick(&MAIMED_LEVELS, &mut rng);
        let occupation = pick(&OCCUPATION_LEVELS, &mut rng);
        let education = pick(&EDUCATION_LEVELS, &mut rng);
        let district = district_pick.sample(&mut rng);
        let villages = &by_district[district];
        let village = &boundaries.villages()[villages[rng.random_range(0..villages.len())]];
        let bb = village.bbox();
        let lon = bb[0] + (bb[2] - bb[0]) * unit.sample(&mut rng);
        let lat = bb[1] + (bb[3] - bb[1]) * unit.sample(&mut rng);
        let (lo, hi) = band[i].range();
        let labels = &raw_labels[types[i]];
        records.push(CaseRecord {
            case_id: format!("C{:06}", i + 1),
            report_count: None,
            tipvda_score: Some(score),
            dv_duration_months: Some(months),
            maimed: Some(maimed.to_string()),
            occupation: Some(occupation.to_string()),
            education: Some(education.to_string()),
            district: Some(village.district_id.clone()),
            village: Some(village.village_id.clone()),
            victim_gender: if female[i] { Gender::Female } else { Gender::Male },
            victim_age: rng.random_range(lo..=hi),
            low_mid_income: low_income[i],
            disability_or_mental_illness: disability[i],
            reporter_occupation: occ,
            case_type_raw: labels[rng.random_range(0..labels.len())].to_string(),
            latitude: Some(lat),
            longitude: Some(lon),
        });
    }

    let h: Vec<u32> = records
        .iter()
        .map(|r| planted_indicators(config, r).expect("fields are filled"))
        .collect();
    let mut by_h = [0usize; 4];
    for &x in &h {
        by_h[x as usize] += 1;
    }
    let rate = config.positive_rate;
    let intercept = solve_intercept(&by_h, config.signal_strength, rate);
    for (r, &x) in records.iter_mut().zip(&h) {
        let p = match rate {
            0.0 => 0.0,
            1.0 => 1.0,
            _ => sigmoid(intercept + config.signal_strength * f64::from(x)),
        };
        let positive = unit.sample(&mut rng) < p;
        r.report_count = Some(if positive {
            rng.random_range(config.positive_reports_min..=config.positive_reports_max)
        } else if unit.sample(&mut rng) < config.negative_two_report_share {
            2
        } else {
            1
        });
        if config.missing_rate > 0.0 && unit.sample(&mut rng) < config.missing_rate {
            match rng.random_range(0..6) {
                0 => r.tipvda_score = None,
                1 => r.dv_duration_months = None,
                2 => r.maimed = None,
                3 => r.occupation = None,
                4 => r.education = None,
                _ => r.district = None,
            }
        }
    }
    Ok(records)
}

/// Unrounded assessment scores, `n_per_group` per reporter occupation, in
/// `ReporterOccupation::ALL` order.
pub fn reporter_scores(config: &GeneratorConfig, n_per_group: usize) -> Vec<(ReporterOccupation, Vec<f64>)> {
    ReporterOccupation::ALL
        .iter()
        .enumerate()
        .map(|(k, &occ)| {
            let mut rng = stream_rng(config.seed, &[REPORTER_STREAM, k as u64]);
            let d = Normal::new(config.reporter_score_means[k], config.reporter_score_sds[k])
                .expect("validated sd");
            (occ, (0..n_per_group).map(|_| d.sample(&mut rng)).collect())
        })
        .collect()
}
