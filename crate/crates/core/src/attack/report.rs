//! Per-label campaign statistics and their text/CSV renderings.

/// Counters for one label of an attack campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelStats {
    pub label: u8,
    /// Samples the model classified correctly and that were attacked.
    pub attempted: usize,
    pub succeeded: usize,
    /// Samples excluded because the model misclassified them up front.
    pub skipped: usize,
}

impl LabelStats {
    pub fn ratio(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.succeeded as f64 / self.attempted as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    /// Sorted by label code; labels absent from the input are absent here.
    pub per_label: Vec<LabelStats>,
}

impl AttackReport {
    /// Mean of the per-label success ratios over labels with at least one
    /// attempt (not the pooled ratio).
    pub fn overall_mean(&self) -> f64 {
        let attempted: Vec<&LabelStats> =
            self.per_label.iter().filter(|s| s.attempted > 0).collect();
        if attempted.is_empty() {
            return 0.0;
        }
        attempted.iter().map(|s| s.ratio()).sum::<f64>() / attempted.len() as f64
    }

    /// Labels that were present in the dataset but never attacked (every
    /// sample skipped); callers usually warn about these.
    pub fn empty_labels(&self) -> Vec<u8> {
        self.per_label.iter().filter(|s| s.attempted == 0).map(|s| s.label).collect()
    }

    /// Aligned text table: one row per label with "succeeded / attempted"
    /// and the percentage to one decimal, then an average row.
    pub fn to_table_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Label   | Success Rate  | Percent (%)\n");
        out.push_str("--------|---------------|------------\n");
        for stats in &self.per_label {
            if stats.attempted == 0 {
                continue;
            }
            out.push_str(&format!(
                "{:<7} | {:>5} / {:<5} | {:.1}\n",
                stats.label,
                stats.succeeded,
                stats.attempted,
                100.0 * stats.ratio(),
            ));
        }
        out.push_str(&format!("Average |               | {:.1}\n", 100.0 * self.overall_mean()));
        out
    }

    /// Machine-readable form: `label,succeeded,attempted,percent` rows plus
    /// a final `average` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,succeeded,attempted,percent\n");
        for stats in &self.per_label {
            if stats.attempted == 0 {
                continue;
            }
            out.push_str(&format!(
                "{},{},{},{:.1}\n",
                stats.label,
                stats.succeeded,
                stats.attempted,
                100.0 * stats.ratio(),
            ));
        }
        out.push_str(&format!("average,,,{:.1}\n", 100.0 * self.overall_mean()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts from the reference campaign; the mean of these eight ratios is
    /// the reported average success rate (~64.4%).
    fn reference_report() -> AttackReport {
        let counts: [(u8, usize); 8] = [
            (1, 631),
            (2, 972),
            (3, 1079),
            (4, 1319),
            (5, 602),
            (6, 932),
            (7, 953),
            (8, 1238),
        ];
        AttackReport {
            per_label: counts
                .iter()
                .map(|&(label, succeeded)| LabelStats {
                    label,
                    attempted: 1500,
                    succeeded,
                    skipped: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn reference_rows_format_like_the_published_table() {
        let report = reference_report();
        let table = report.to_table_text();
        assert!(table.contains("631 / 1500  | 42.1"), "table:\n{table}");
        assert!(table.contains("1319 / 1500  | 87.9"));
        assert!(table.contains("602 / 1500  | 40.1"));
    }

    #[test]
    fn reference_mean_is_about_64_percent() {
        let report = reference_report();
        let mean = report.overall_mean();
        assert!((mean - 0.6436).abs() < 5e-4, "mean {mean}");
        assert!(report.to_table_text().contains("Average |               | 64.4"));
    }

    #[test]
    fn percent_column_is_ratio_rounded_to_one_decimal() {
        let report = reference_report();
        for line in report.to_csv().lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields[0] == "average" {
                continue;
            }
            let succeeded: f64 = fields[1].parse().unwrap();
            let attempted: f64 = fields[2].parse().unwrap();
            let percent: f64 = fields[3].parse().unwrap();
            let expected = format!("{:.1}", 100.0 * succeeded / attempted);
            assert_eq!(format!("{percent:.1}"), expected);
        }
    }

    #[test]
    fn vacuous_report_has_zero_mean_and_names_empty_labels() {
        let report = AttackReport {
            per_label: vec![LabelStats { label: 3, attempted: 0, succeeded: 0, skipped: 9 }],
        };
        assert_eq!(report.overall_mean(), 0.0);
        assert_eq!(report.empty_labels(), vec![3]);
        assert!(report.to_csv().starts_with("label,succeeded,attempted,percent\naverage"));
    }
}
