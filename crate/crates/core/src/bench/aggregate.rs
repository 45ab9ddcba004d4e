use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BenchError, Family, RecordKey, Result, RunRecord};

/// Keep the last record seen for every key.
pub fn dedup_records(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut last: HashMap<RecordKey, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        last.insert(r.key(), i);
    }
    let mut keep: Vec<usize> = last.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| records[i].clone()).collect()
}

/// Linear-interpolation percentile of sorted values, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    percentile(&s, 0.5)
}

/// Fold-level summary of one (dataset, family, size) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dataset: String,
    pub family: Family,
    pub size: usize,
    pub size_index: usize,
    /// Successful records in the group.
    pub runs: usize,
    pub failures: usize,
    pub mean_kappa: Option<f64>,
    pub mean_ece: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub median_seconds: Option<f64>,
}

/// Group records by (dataset, family, size) after de-duplication.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<GroupSummary>> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut groups: BTreeMap<(String, Family, usize), Vec<RunRecord>> = BTreeMap::new();
    for r in dedup_records(records) {
        groups
            .entry((r.dataset.clone(), r.family, r.size))
            .or_default()
            .push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((dataset, family, size), rs)| {
            let ok: Vec<&RunRecord> = rs.iter().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            GroupSummary {
                dataset,
                family,
                size,
                size_index: rs[0].size_index,
                runs: ok.len(),
                failures: rs.len() - ok.len(),
                mean_kappa: mean(&col(|r| r.kappa)),
                mean_ece: mean(&col(|r| r.ece)),
                mean_accuracy: mean(&col(|r| r.accuracy)),
                median_seconds: median(&col(|r| r.seconds)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Kappa,
    Ece,
    Time,
}

impl Metric {
    pub fn value(self, g: &GroupSummary) -> Option<f64> {
        match self {
            Metric::Kappa => g.mean_kappa,
            Metric::Ece => g.mean_ece,
            Metric::Time => g.median_seconds,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Kappa => "Cohen's kappa",
            Metric::Ece => "expected calibration error",
            Metric::Time => "fit time (s)",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Kappa => "kappa",
            Metric::Ece => "ece",
            Metric::Time => "time",
        }
    }

    pub const ALL: [Metric; 3] = [Metric::Kappa, Metric::Ece, Metric::Time];
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kappa" => Ok(Metric::Kappa),
            "ece" => Ok(Metric::Ece),
            "time" | "seconds" => Ok(Metric::Time),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Cross-dataset summary at one common size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub size: f64,
    /// Mean across datasets, or the median for fit time.
    pub center: f64,
    pub p25: f64,
    pub p75: f64,
    pub datasets: usize,
}

/// Per-dataset curve of one family: `(size, value)` sorted by size.
pub fn dataset_curves(
    groups: &[GroupSummary],
    family: Family,
    metric: Metric,
) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for g in groups.iter().filter(|g| g.family == family) {
        if let Some(v) = metric.value(g) {
            curves
                .entry(g.dataset.clone())
                .or_default()
                .push((g.size as f64, v));
        }
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    curves
}

/// Interpolate a curve linearly in log-size; `None` outside its range.
fn interpolate(curve: &[(f64, f64)], size: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if size < first.0 * (1.0 - 1e-12) || size > last.0 * (1.0 + 1e-12) {
        return None;
    }
    if curve.len() == 1 {
        return Some(first.1);
    }
    let x = size.ln();
    let i = curve
        .windows(2)
        .position(|w| x <= w[1].0.ln())
        .unwrap_or(curve.len() - 2);
    let (a, b) = (curve[i], curve[i + 1]);
    let t = ((x - a.0.ln()) / (b.0.ln() - a.0.ln())).clamp(0.0, 1.0);
    Some(a.1 + t * (b.1 - a.1))
}

/// Centre line and 25th..75th percentile band across datasets at `points`
/// log-spaced sizes spanning every dataset's schedule.
pub fn cross_dataset_band(
    groups: &[GroupSummary],
    family: Family,
    metric: Metric,
    points: usize,
) -> Vec<BandPoint> {
    let curves = dataset_curves(groups, family, metric);
    let lo = curves.values().filter_map(|c| c.first()).map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = curves.values().filter_map(|c| c.last()).map(|p| p.0).fold(0.0, f64::max);
    if !lo.is_finite() || points == 0 {
        return Vec::new();
    }
    let n = if hi > lo { points.max(2) } else { 1 };
    (0..n)
        .filter_map(|i| {
            let size = if n == 1 {
                lo
            } else {
                (lo.ln() + i as f64 * (hi.ln() - lo.ln()) / (n - 1) as f64).exp()
            };
            let mut vals: Vec<f64> = curves.values().filter_map(|c| interpolate(c, size)).collect();
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(f64::total_cmp);
            let center = match metric {
                Metric::Time => percentile(&vals, 0.5)?,
                _ => mean(&vals)?,
            };
            Some(BandPoint {
                size,
                center,
                p25: percentile(&vals, 0.25)?,
                p75: percentile(&vals, 0.75)?,
                datasets: vals.len(),
            })
        })
        .collect()
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

/// Markdown table of group summaries, or `no records`.
pub fn report_markdown(groups: &[GroupSummary]) -> String {
    if groups.is_empty() {
        return "no records\n".into();
    }
    let mut out = String::new();
    out.push_str("| dataset | family | size | runs | failed | kappa | ece | accuracy | median s |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for g in groups {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            g.dataset,
            g.family,
            g.size,
            g.runs,
            g.failures,
            cell(g.mean_kappa, 4),
            cell(g.mean_ece, 4),
            cell(g.mean_accuracy, 4),
            cell(g.median_seconds, 5),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, family: Family, fold: usize, size: usize, kappa: f64) -> RunRecord {
        RunRecord {
            dataset: dataset.into(),
            family,
            params: String::new(),
            fold,
            size,
            size_index: 0,
            kappa: Some(kappa),
            ece: Some(0.1),
            accuracy: Some(0.5),
            seconds: Some(fold as f64),
            seed: 0,
            timestamp: 0,
            error: None,
        }
    }

    #[test]
    fn percentiles_interpolate_linearly() {
        let v = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert!((percentile(&v, 0.25).unwrap() - 0.2).abs() < 1e-15);
        assert!((percentile(&v, 0.75).unwrap() - 0.4).abs() < 1e-15);
        assert!((percentile(&[1.0, 2.0], 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(percentile(&[], 0.5), None);
    }

    #[test]
    fn groups_average_folds_and_take_median_time() {
        let rs = vec![
            rec("a", Family::Forest, 0, 10, 0.2),
            rec("a", Family::Forest, 1, 10, 0.4),
            rec("a", Family::Forest, 2, 10, 0.9),
        ];
        let g = aggregate(&rs).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0].mean_kappa.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(g[0].median_seconds, Some(1.0));
    }

    #[test]
    fn duplicate_keys_keep_latest() {
        let rs = vec![
            rec("a", Family::Forest, 0, 10, 0.2),
            rec("a", Family::Forest, 0, 10, 0.6),
        ];
        let d = dedup_records(&rs);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kappa, Some(0.6));
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let mut bad = rec("a", Family::Network, 1, 10, 0.0);
        bad.kappa = None;
        bad.error = Some("diverged".into());
        let g = aggregate(&[rec("a", Family::Network, 0, 10, 0.3), bad]).unwrap();
        assert_eq!((g[0].runs, g[0].failures), (1, 1));
        assert_eq!(g[0].mean_kappa, Some(0.3));
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(BenchError::Empty)));
        assert_eq!(report_markdown(&[]), "no records\n");
    }

    #[test]
    fn single_dataset_band_collapses_to_its_curve() {
        let rs = vec![
            rec("a", Family::Forest, 0, 10, 0.2),
            rec("a", Family::Forest, 0, 100, 0.6),
        ];
        let band = cross_dataset_band(&aggregate(&rs).unwrap(), Family::Forest, Metric::Kappa, 3);
        assert_eq!(band.len(), 3);
        assert!((band[1].center - 0.4).abs() < 1e-12);
        assert!(band.iter().all(|b| b.p25 == b.center && b.p75 == b.center));
    }
}
