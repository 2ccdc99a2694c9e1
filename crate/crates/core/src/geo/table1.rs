//! Demographic breakdown of cases by category, as percentages.

use serde::{Deserialize, Serialize};

use super::{classify_case_type, CaseType, CaseTypeMapping};
use crate::preprocess::{CaseRecord, Gender};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub category: CaseType,
    pub n: usize,
    /// Share of all cases, in percent.
    pub proportion: f64,
    /// The remaining columns are percentages within the category.
    pub male: f64,
    pub female: f64,
    pub low_mid_income: f64,
    pub disability_or_mental_illness: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    (1000.0 * num as f64 / den as f64).round() / 10.0
}

/// One row per category present in `records`, in category order, values
/// rounded to one decimal.
pub fn table1_summary(records: &[CaseRecord], mapping: &CaseTypeMapping) -> Vec<Table1Row> {
    let mut counts = [[0usize; 4]; 4];
    for r in records {
        let c = classify_case_type(&r.case_type_raw, mapping).category.index();
        counts[c][0] += 1;
        counts[c][1] += usize::from(r.victim_gender == Gender::Female);
        counts[c][2] += usize::from(r.low_mid_income);
        counts[c][3] += usize::from(r.disability_or_mental_illness);
    }
    CaseType::ALL
        .into_iter()
        .filter(|c| counts[c.index()][0] > 0)
        .map(|c| {
            let [n, female, low, dis] = counts[c.index()];
            Table1Row {
                category: c,
                n,
                proportion: pct(n, records.len()),
                male: pct(n - female, n),
                female: pct(female, n),
                low_mid_income: pct(low, n),
                disability_or_mental_illness: pct(dis, n),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::record::sample_record;

    #[test]
    fn empty_input_no_rows() {
        assert!(table1_summary(&[], &CaseTypeMapping::builtin()).is_empty());
    }

    #[test]
    fn single_record_is_one_full_row() {
        let mut r = sample_record("1");
        r.case_type_raw = "child abuse".into();
        let t = table1_summary(&[r], &CaseTypeMapping::builtin());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].category, CaseType::ChildAdolescent);
        assert_eq!(t[0].proportion, 100.0);
        assert_eq!(t[0].male + t[0].female, 100.0);
    }

    #[test]
    fn thirds_round_to_one_decimal() {
        let recs: Vec<CaseRecord> = (0..3)
            .map(|i| {
                let mut r = sample_record(&i.to_string());
                r.case_type_raw = if i == 0 { "elder abuse" } else { "dating violence" }.into();
                r.victim_gender = if i == 1 { Gender::Male } else { Gender::Female };
                r
            })
            .collect();
        let t = table1_summary(&recs, &CaseTypeMapping::builtin());
        assert_eq!(t[0].category, CaseType::Ipv);
        assert_eq!((t[0].proportion, t[0].female), (66.7, 50.0));
        assert_eq!(t[1].proportion, 33.3);
    }
}
