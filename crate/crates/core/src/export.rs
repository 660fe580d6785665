//! CSV, JSON and SVG renderings of a [`ProfileAnalysis`].
//!
//! Output is a pure function of the analysis: floats are printed with six
//! significant digits and rows follow bucket then feature order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::ProfileAnalysis;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "profile_id",
    "cd",
    "k",
    "count_all",
    "count_profile",
    "feature_id",
    "feature_name",
    "V",
];

const BLUE: &str = "#0000FF";
const RED: &str = "#FE0000";
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#393b79", "#637939",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExportFormat {
    Csv,
    Json,
    Svg,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [ExportFormat::Csv, ExportFormat::Json, ExportFormat::Svg];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
            ExportFormat::Svg => "svg",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::InvalidArgument(format!("unknown export format {other:?}"))),
        }
    }
}

/// `x` with six significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn to_csv(analysis: &ProfileAnalysis) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for b in analysis.buckets.nonempty() {
        for curve in &analysis.curves {
            let Some(point) = curve.points.iter().find(|p| p.k == b.k) else {
                continue;
            };
            w.write_record([
                analysis.profile_id.clone(),
                format_sig(b.cd.to_f64()),
                b.k.to_string(),
                b.count_all.to_string(),
                b.count_profile.to_string(),
                curve.feature_id.to_string(),
                curve.feature_name.clone(),
                format_sig(point.v),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn to_json(analysis: &ProfileAnalysis) -> String {
    serde_json::to_string_pretty(analysis).expect("analysis serializes")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 900.0;
const LEFT: f64 = 70.0;
const PLOT_W: f64 = 600.0;
const PANEL_H: f64 = 260.0;
const TOP1: f64 = 40.0;
const TOP2: f64 = 380.0;
const HEIGHT: f64 = 700.0;

fn count_panel(out: &mut String, a: &ProfileAnalysis) {
    let max = a.buckets.buckets.iter().map(|b| b.count_all).max().unwrap_or(1).max(1);
    // axis spans 10^-1 .. 10^decades so a count of 1 still shows
    let decades = (max as f64).log10().ceil().max(1.0);
    let span = decades + 1.0;
    let bottom = TOP1 + PANEL_H;
    let y = |c: u64| bottom - ((c as f64).log10() + 1.0) / span * PANEL_H;
    let slots = a.k_max as f64 + 1.0;
    let slot = PLOT_W / slots;

    let _ = writeln!(out, r#"<g class="count-panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">Scenarios per difficulty level ({})</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP1 - 15.0,
        escape(&a.summary())
    );
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        LEFT + PLOT_W
    );
    let _ = writeln!(out, r#"<line x1="{LEFT:.2}" y1="{TOP1:.2}" x2="{LEFT:.2}" y2="{bottom:.2}" stroke="black"/>"#);
    for e in 0..=decades as u32 {
        let c = 10u64.pow(e);
        let yy = y(c);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{c}</text>"##,
            LEFT + PLOT_W,
            LEFT - 5.0,
            yy + 3.0
        );
    }
    for b in a.buckets.buckets.iter().filter(|b| b.count_all > 0) {
        let x = LEFT + b.k as f64 * slot;
        let bw = slot * 0.38;
        let _ = writeln!(out, r#"<g class="bar-group" data-k="{}">"#, b.k);
        let ya = y(b.count_all);
        let _ = writeln!(
            out,
            r#"<rect class="all" x="{:.2}" y="{ya:.2}" width="{bw:.2}" height="{:.2}" fill="{BLUE}"><title>{}</title></rect>"#,
            x + slot * 0.1,
            bottom - ya,
            b.count_all
        );
        if b.count_profile > 0 {
            let yp = y(b.count_profile);
            let _ = writeln!(
                out,
                r#"<rect class="profile" x="{:.2}" y="{yp:.2}" width="{bw:.2}" height="{:.2}" fill="{RED}"><title>{}</title></rect>"#,
                x + slot * 0.5,
                bottom - yp,
                b.count_profile
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.2}</text>"#,
            x + slot / 2.0,
            bottom + 14.0,
            b.cd.to_f64()
        );
        let _ = writeln!(out, "</g>");
    }
    let lx = LEFT + PLOT_W + 20.0;
    let _ = writeln!(
        out,
        r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{BLUE}"/><text x="{:.2}" y="{:.2}" font-size="11">All scenarios</text>"#,
        TOP1,
        lx + 18.0,
        TOP1 + 10.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{RED}"/><text x="{:.2}" y="{:.2}" font-size="11">Profile specific scenarios</text>"#,
        TOP1 + 20.0,
        lx + 18.0,
        TOP1 + 30.0
    );
    let _ = writeln!(out, "</g>");
}

fn variance_panel(out: &mut String, a: &ProfileAnalysis) {
    let bottom = TOP2 + PANEL_H;
    let x = |cd: f64| LEFT + cd * PLOT_W;
    let y = |v: f64| bottom - v * PANEL_H;
    let _ = writeln!(out, r#"<g class="variance-panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">Feature variance by difficulty level</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP2 - 15.0
    );
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        LEFT + PLOT_W
    );
    let _ = writeln!(out, r#"<line x1="{LEFT:.2}" y1="{TOP2:.2}" x2="{LEFT:.2}" y2="{bottom:.2}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.2}</text>"##,
            y(v),
            LEFT + PLOT_W,
            y(v),
            LEFT - 5.0,
            y(v) + 3.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{v:.2}</text>"#,
            x(v),
            bottom + 14.0
        );
    }
    for (i, curve) in a.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.cd.to_f64()), y(p.v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="curve" data-feature="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            curve.feature_id,
            points.join(" ")
        );
        let ly = TOP2 + i as f64 * 16.0;
        let lx = LEFT + PLOT_W + 20.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 14.0,
            lx + 18.0,
            ly + 4.0,
            escape(&curve.feature_name)
        );
    }
    let _ = writeln!(out, "</g>");
}

pub fn to_svg(analysis: &ProfileAnalysis) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&analysis.profile_id));
    count_panel(&mut out, analysis);
    variance_panel(&mut out, analysis);
    out.push_str("</svg>\n");
    out
}

pub fn render(analysis: &ProfileAnalysis, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Csv => to_csv(analysis),
        ExportFormat::Json => Ok(to_json(analysis)),
        ExportFormat::Svg => Ok(to_svg(analysis)),
    }
}

/// Writes `<dir>/<profile_id>.<ext>` and returns its path.
pub fn export(analysis: &ProfileAnalysis, format: ExportFormat, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}.{}", analysis.profile_id, format.extension()));
    fs::write(&path, render(analysis, format)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, AnalyzeOptions};
    use crate::presets::{builtin_crosswalk_space, builtin_profiles};

    fn p1() -> ProfileAnalysis {
        analyze(&builtin_crosswalk_space(), &builtin_profiles()[0], AnalyzeOptions::default()).unwrap()
    }

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(2.0 / 3.0), "0.666667");
        assert_eq!(format_sig(0.9999999), "1");
        assert_eq!(format_sig(123456.7), "123457");
        assert_eq!(format_sig(0.000123456789), "0.000123457");
    }

    #[test]
    fn csv_rows() {
        let a = p1();
        let text = to_csv(&a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 9 * 12);
        assert!(text.contains("profile-1,1,9,"));
    }

    #[test]
    fn json_round_trip() {
        let a = p1();
        let back: ProfileAnalysis = serde_json::from_str(&to_json(&a)).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn svg_bar_groups_and_colors() {
        let a = p1();
        let svg = to_svg(&a);
        let groups = svg.matches(r#"class="bar-group""#).count();
        assert!((9..=10).contains(&groups), "{groups}");
        assert!(svg.contains(BLUE) && svg.contains(RED));
        assert_eq!(svg.matches(r#"class="curve""#).count(), 12);
        assert_eq!(svg, to_svg(&a));
    }

    #[test]
    fn export_writes_files() {
        let a = p1();
        let dir = tempfile::tempdir().unwrap();
        for f in ExportFormat::ALL {
            let path = export(&a, f, dir.path()).unwrap();
            assert_eq!(fs::read_to_string(path).unwrap(), render(&a, f).unwrap());
        }
        assert!(export(&a, ExportFormat::Csv, &dir.path().join("missing")).is_err());
    }
}
