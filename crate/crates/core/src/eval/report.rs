use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::artifact::{read_text, write_atomic, ArtifactHeader};
use crate::bench::ProbeTag;
use crate::error::ArtifactError;

use super::{Axiom, MetricsReport, PhaseMetrics};

pub const REPORT_FORMAT_VERSION: u32 = 1;

fn cell(v: Option<f64>, signed: bool) -> String {
    match v {
        None => "n/a".into(),
        Some(x) if signed => {
            let s = format!("{x:+.3}");
            if s == "-0.000" {
                "+0.000".into()
            } else {
                s
            }
        }
        Some(x) => format!("{x:.3}"),
    }
}

fn row(label: &str, m: &PhaseMetrics, signed: bool) -> Vec<String> {
    let mut out = vec![label.to_string()];
    let tags = |map: &BTreeMap<ProbeTag, Option<f64>>| -> Vec<String> {
        ProbeTag::ATOMS
            .iter()
            .map(|t| cell(map.get(t).copied().flatten(), signed))
            .collect()
    };
    out.extend(tags(&m.generative_accuracy));
    out.extend(tags(&m.probabilistic_mae));
    out.extend(
        Axiom::ALL
            .iter()
            .map(|a| cell(m.logical_mae.get(a).copied().flatten(), signed)),
    );
    out
}

/// Aligned text table: one section per subset with pre-edit, post-edit and Δ rows.
pub fn render_report(report: &MetricsReport) -> String {
    let mut head1 = vec![String::new()];
    let mut head2 = vec![String::new()];
    for (group, n) in [
        ("Generative accuracy", 4),
        ("Probabilistic coherence (MAE)", 4),
        ("Logical coherence (MAE)", 4),
    ] {
        head1.push(group.to_string());
        head1.extend(std::iter::repeat_n(String::new(), n - 1));
    }
    for t in ProbeTag::ATOMS.iter().chain(&ProbeTag::ATOMS) {
        head2.push(t.to_string());
    }
    head2.extend(Axiom::ALL.iter().map(|a| a.label().to_string()));

    let mut rows = vec![head2];
    let mut sections = Vec::new();
    for s in &report.subsets {
        let start = rows.len();
        rows.push(row("Pre-edit", &s.pre, false));
        rows.push(row("Post-edit", &s.post, false));
        rows.push(row("Δ", &s.delta, true));
        sections.push((s, start));
    }
    let cols = rows[0].len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let fmt_row = |r: &[String]| -> String {
        let mut line = String::new();
        for (c, v) in r.iter().enumerate() {
            if c == 1 || c == 5 || c == 9 {
                line.push_str(" |");
            }
            let pad = width[c].saturating_sub(v.chars().count());
            if c == 0 {
                let _ = write!(line, "{v}{}", " ".repeat(pad));
            } else {
                let _ = write!(line, " {}{v}", " ".repeat(pad));
            }
        }
        line.trim_end().to_string()
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "model: {}   edit weight: {}   cases: {}   evaluated: {}   failed: {}",
        report.model, report.edit_weight, report.total, report.evaluated, report.failed
    );
    let mut group_line = String::new();
    let lead = width[0];
    let span = |from: usize| -> usize { (from..from + 4).map(|c| width[c] + 1).sum::<usize>() + 1 };
    let _ = write!(group_line, "{}", " ".repeat(lead));
    for (i, from) in [1usize, 5, 9].into_iter().enumerate() {
        let title = &head1[1 + 4 * i];
        let w = span(from);
        let _ = write!(group_line, " |{:<w$}", format!(" {title}"), w = w - 1);
    }
    for (s, start) in sections {
        let _ = writeln!(
            out,
            "\n== {} [{}]  cases={} evaluated={} failed={}",
            s.subset.title(),
            s.subset,
            s.cases,
            s.evaluated,
            s.failed
        );
        let _ = writeln!(out, "{}", group_line.trim_end());
        let _ = writeln!(out, "{}", fmt_row(&rows[0]));
        for r in &rows[start..start + 3] {
            let _ = writeln!(out, "{}", fmt_row(r));
        }
    }
    if report.failed > 0 {
        let _ = writeln!(out, "\nfailed cases: {}", report.failed_ids.join(", "));
    }
    out
}

/// Companion path holding the machine-readable report.
pub fn json_path(text_path: &Path) -> PathBuf {
    let mut name = text_path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    text_path.with_file_name(name)
}

/// Writes the text table and its JSON companion (`<path>.json`). Returns the companion path.
pub fn write_report(
    report: &MetricsReport,
    header: &ArtifactHeader,
    path: &Path,
) -> Result<PathBuf, ArtifactError> {
    let mut header = header.clone();
    header.kind = "report".into();
    header.version = REPORT_FORMAT_VERSION;
    write_atomic(path, |w: &mut dyn Write| {
        w.write_all(header.render().as_bytes())?;
        w.write_all(render_report(report).as_bytes())
    })?;
    let companion = json_path(path);
    header.kind = "report-json".into();
    write_atomic(&companion, |w: &mut dyn Write| {
        w.write_all(header.render().as_bytes())?;
        serde_json::to_writer_pretty(&mut *w, report)?;
        w.write_all(b"\n")
    })?;
    Ok(companion)
}

pub fn read_report_json(path: &Path) -> Result<(ArtifactHeader, MetricsReport), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (h, body) = ArtifactHeader::split(&text, "report-json", REPORT_FORMAT_VERSION, &p)?;
    let r = serde_json::from_str(body).map_err(|e| ArtifactError::Format {
        path: p,
        message: e.to_string(),
    })?;
    Ok((h, r))
}
