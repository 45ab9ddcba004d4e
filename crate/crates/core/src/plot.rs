//! Learning-curve charts: metric against training-set size on a log axis.

use std::path::Path;

use crate::bench::{
    self, cross_dataset_band, dataset_curves, BenchError, Family, GroupSummary, Metric, RunRecord,
};
use crate::svg::{hex, num, Svg};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const BAND_POINTS: usize = 32;

fn family_color(f: Family) -> [u8; 3] {
    match f {
        Family::Forest => [27, 120, 55],
        Family::Network => [118, 42, 131],
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, log: bool, pixel_lo: f64, pixel_hi: f64) -> Self {
        let (mut lo, mut hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        if hi - lo < 1e-12 {
            let pad = if log { 0.5 } else { lo.abs().max(1.0) * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Self {
            lo,
            hi,
            log,
            pixel_lo,
            pixel_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        self.pixel_lo + (t - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.floor() as i32..=self.hi.ceil() as i32)
                .map(|e| 10f64.powi(e))
                .filter(|&v| {
                    let t = v.log10();
                    t >= self.lo - 1e-9 && t <= self.hi + 1e-9
                })
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(raw);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|i| i as f64 * step).collect()
        }
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        let e = v.log10().round() as i32;
        if (0..=4).contains(&e) {
            format!("{}", 10i64.pow(e as u32))
        } else {
            format!("1e{e}")
        }
    } else {
        let s = format!("{v:.2}");
        if s == "-0.00" {
            "0.00".into()
        } else {
            s
        }
    }
}

/// Render one metric as an SVG chart: thin lines per dataset, a thick
/// cross-dataset mean (median for time) and a 25th..75th percentile band.
pub fn learning_curve_svg(groups: &[GroupSummary], metric: Metric) -> String {
    let log_y = metric == Metric::Time;
    let families: Vec<Family> = [Family::Forest, Family::Network]
        .into_iter()
        .filter(|f| groups.iter().any(|g| g.family == *f))
        .collect();

    let pts: Vec<(f64, f64)> = groups
        .iter()
        .filter_map(|g| metric.value(g).map(|v| (g.size as f64, v)))
        .filter(|&(_, v)| !log_y || v > 0.0)
        .collect();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if pts.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (1.0, 10.0, if log_y { 1e-3 } else { 0.0 }, 1.0);
    }
    let x = Axis::new(x_lo, x_hi, true, LEFT, WIDTH - RIGHT);
    let y = Axis::new(y_lo, y_hi, log_y, HEIGHT - BOTTOM, TOP);

    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.rect(0.0, 0.0, WIDTH, HEIGHT, r##"fill="#ffffff""##);
    svg.rect(
        LEFT,
        TOP,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM,
        r##"fill="none" stroke="#404040" stroke-width="1""##,
    );
    let font = r##"font-family="sans-serif" font-size="12" fill="#202020""##;
    for t in x.ticks() {
        let px = x.map(t);
        svg.line([px, HEIGHT - BOTTOM], [px, HEIGHT - BOTTOM + 5.0], r##"stroke="#404040""##);
        svg.text(
            [px, HEIGHT - BOTTOM + 18.0],
            &tick_label(t, true),
            &format!(r#"text-anchor="middle" {font}"#),
        );
    }
    for t in y.ticks() {
        let py = y.map(t);
        svg.line([LEFT - 5.0, py], [LEFT, py], r##"stroke="#404040""##);
        svg.line([LEFT, py], [WIDTH - RIGHT, py], r##"stroke="#e0e0e0""##);
        svg.text(
            [LEFT - 8.0, py + 4.0],
            &tick_label(t, log_y),
            &format!(r#"text-anchor="end" {font}"#),
        );
    }
    svg.text(
        [(LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 16.0],
        "training samples",
        &format!(r#"text-anchor="middle" {font}"#),
    );
    svg.text(
        [18.0, (TOP + HEIGHT - BOTTOM) / 2.0],
        metric.label(),
        &format!(
            r#"text-anchor="middle" transform="rotate(-90 18 {})" {font}"#,
            num((TOP + HEIGHT - BOTTOM) / 2.0)
        ),
    );
    svg.text(
        [LEFT, TOP - 14.0],
        &format!("{} versus sample size", metric.label()),
        &format!(r#"font-weight="bold" {font}"#),
    );

    let ok_y = |v: f64| !log_y || v > 0.0;
    for (slot, &family) in families.iter().enumerate() {
        let color = hex(family_color(family));
        let band = cross_dataset_band(groups, family, metric, BAND_POINTS);
        let band: Vec<_> = band
            .into_iter()
            .filter(|b| ok_y(b.center) && ok_y(b.p25) && ok_y(b.p75))
            .collect();
        if band.iter().any(|b| b.datasets > 1 && b.p75 > b.p25) {
            let mut poly: Vec<[f64; 2]> = band.iter().map(|b| [x.map(b.size), y.map(b.p75)]).collect();
            poly.extend(band.iter().rev().map(|b| [x.map(b.size), y.map(b.p25)]));
            svg.polygon(&poly, &format!(r#"fill="{color}" fill-opacity="0.18" stroke="none""#));
        }
        for curve in dataset_curves(groups, family, metric).values() {
            let line: Vec<[f64; 2]> = curve
                .iter()
                .filter(|p| ok_y(p.1))
                .map(|&(s, v)| [x.map(s), y.map(v)])
                .collect();
            if line.len() > 1 {
                svg.polyline(&line, &format!(r#"stroke="{color}" stroke-opacity="0.45" stroke-width="1""#));
            }
        }
        let centre: Vec<[f64; 2]> = band.iter().map(|b| [x.map(b.size), y.map(b.center)]).collect();
        if centre.len() > 1 {
            svg.polyline(&centre, &format!(r#"stroke="{color}" stroke-width="3""#));
        }
        let ly = TOP + 12.0 + slot as f64 * 20.0;
        let lx = WIDTH - RIGHT + 14.0;
        svg.line([lx, ly], [lx + 24.0, ly], &format!(r#"stroke="{color}" stroke-width="3""#));
        svg.text([lx + 30.0, ly + 4.0], family.as_str(), font);
    }
    svg.finish()
}

/// De-duplicate, aggregate and render `records`.
pub fn plot_records(records: &[RunRecord], metric: Metric) -> bench::Result<String> {
    let groups = bench::aggregate(records)?;
    Ok(learning_curve_svg(&groups, metric))
}

/// Read a JSON-lines log and write its chart to `out`.
pub fn plot_file(records: impl AsRef<Path>, metric: Metric, out: impl AsRef<Path>) -> bench::Result<()> {
    let records = bench::read_records(records)?;
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    std::fs::write(out, plot_records(&records, metric)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, size: usize, kappa: f64, secs: f64) -> RunRecord {
        RunRecord {
            dataset: dataset.into(),
            family: Family::Forest,
            params: String::new(),
            fold: 0,
            size,
            size_index: 0,
            kappa: Some(kappa),
            ece: Some(0.1),
            accuracy: Some(0.5),
            seconds: Some(secs),
            seed: 0,
            timestamp: 0,
            error: None,
        }
    }

    #[test]
    fn single_dataset_has_no_band() {
        let rs = vec![rec("a", 10, 0.1, 0.01), rec("a", 100, 0.5, 0.1)];
        let svg = plot_records(&rs, Metric::Kappa).unwrap();
        assert!(!svg.contains("<polygon"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn several_datasets_get_a_band() {
        let rs = vec![
            rec("a", 10, 0.1, 0.01),
            rec("a", 100, 0.5, 0.1),
            rec("b", 10, 0.3, 0.02),
            rec("b", 100, 0.9, 0.2),
        ];
        let svg = plot_records(&rs, Metric::Kappa).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn time_axis_is_logarithmic() {
        let rs = vec![rec("a", 10, 0.1, 0.001), rec("a", 1000, 0.5, 1.0)];
        let svg = plot_records(&rs, Metric::Time).unwrap();
        assert!(svg.contains(">1e-3<"));
        assert!(svg.contains(">1<"));
    }

    #[test]
    fn duplicate_records_do_not_change_the_chart() {
        let rs = vec![rec("a", 10, 0.1, 0.01), rec("a", 100, 0.5, 0.1)];
        let mut doubled = rs.clone();
        doubled.extend(rs.clone());
        assert_eq!(
            plot_records(&rs, Metric::Ece).unwrap(),
            plot_records(&doubled, Metric::Ece).unwrap()
        );
    }
}
