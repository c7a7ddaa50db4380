//! CSV tables and SVG plots.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::bdrate::{bd_rate_with, BdMethod};
use super::{rd_curve, RdPoint};
use crate::error::{Error, Result};

pub const RD_CSV_HEADER: [&str; 11] = [
    "pattern",
    "scheme",
    "rank",
    "qp",
    "bytes_subset1",
    "bytes_subset2",
    "bytes_metadata",
    "total_bytes",
    "psnr_db",
    "psnr_subset1_db",
    "psnr_subset2_db",
];

/// Six significant digits, `.` decimal point, `inf` / `-inf` / `nan`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" { "0".into() } else { s }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::InvalidConfig(format!("bad number `{s}` in CSV"))),
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_rd_csv<W: Write>(points: &[RdPoint], w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(RD_CSV_HEADER)?;
    for p in points {
        wr.write_record([
            p.pattern.clone(),
            p.scheme.clone(),
            p.rank.to_string(),
            p.qp.to_string(),
            p.bytes_subset1.to_string(),
            p.bytes_subset2.to_string(),
            p.bytes_metadata.to_string(),
            p.total_bytes.to_string(),
            fmt_sig(p.psnr),
            fmt_sig(p.psnr_subset1),
            fmt_sig(p.psnr_subset2),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rd_csv<R: Read>(r: R) -> Result<Vec<RdPoint>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RD_CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {:?}", headers)));
    }
    let int = |s: &str| s.parse::<u64>().map_err(|_| Error::InvalidConfig(format!("bad integer `{s}` in CSV")));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(RdPoint {
            pattern: rec[0].to_string(),
            scheme: rec[1].to_string(),
            rank: int(&rec[2])? as usize,
            qp: u8::try_from(int(&rec[3])?).map_err(|_| Error::BadQp(rec[3].parse().unwrap_or(-1)))?,
            bytes_subset1: int(&rec[4])?,
            bytes_subset2: int(&rec[5])?,
            bytes_metadata: int(&rec[6])?,
            total_bytes: int(&rec[7])?,
            psnr: parse_f64(&rec[8])?,
            psnr_subset1: parse_f64(&rec[9])?,
            psnr_subset2: parse_f64(&rec[10])?,
        });
    }
    Ok(out)
}

/// One row of a per-subset BD-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdRow {
    pub scene: String,
    pub pattern: String,
    pub rank: usize,
    /// Percent; NaN when the curves cannot be compared.
    pub subset1: f64,
    pub subset2: f64,
}

/// BD-rate of each rank of `test` against `anchor`, per subset.
pub fn bd_table(scene: &str, anchor: &[RdPoint], test: &[RdPoint], method: BdMethod) -> Vec<BdRow> {
    let mut ranks: Vec<usize> = test.iter().map(|p| p.rank).collect();
    ranks.sort_unstable();
    ranks.dedup();
    ranks
        .into_iter()
        .map(|rank| {
            let cell = |subset: u8| {
                bd_rate_with(&rd_curve(anchor, None, subset), &rd_curve(test, Some(rank), subset), method).unwrap_or(f64::NAN)
            };
            BdRow {
                scene: scene.to_string(),
                pattern: test.iter().find(|p| p.rank == rank).map(|p| p.pattern.clone()).unwrap_or_default(),
                rank,
                subset1: cell(1),
                subset2: cell(2),
            }
        })
        .collect()
}

pub fn write_bd_csv<W: Write>(rows: &[BdRow], w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(["scene", "pattern", "rank", "subset1_pct", "subset2_pct"])?;
    for r in rows {
        wr.write_record([r.scene.clone(), r.pattern.clone(), r.rank.to_string(), fmt_sig(r.subset1), fmt_sig(r.subset2)])?;
    }
    wr.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

/// Total bytes against YUV-PSNR, one polyline per `(pattern, scheme, rank)`.
pub fn svg_plot(points: &[RdPoint], title: &str) -> Result<String> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for p in points {
        if !p.psnr.is_finite() || p.total_bytes == 0 {
            continue;
        }
        let label = if p.scheme == "view-anchor" { format!("{} {}", p.pattern, p.scheme) } else { format!("{} {} rank {}", p.pattern, p.scheme, p.rank) };
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push((p.total_bytes as f64, p.psnr)),
            None => series.push((label, vec![(p.total_bytes as f64, p.psnr)])),
        }
    }
    if series.is_empty() {
        return Err(Error::InvalidConfig("no finite rate-distortion points to plot".into()));
    }
    for (_, v) in &mut series {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all = series.iter().flat_map(|(_, v)| v.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let (w, h, ml, mr, mt, mb) = (720.0, 480.0, 70.0, 220.0, 40.0, 50.0);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (ml + w - mr) / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - mb, w - mr, h - mb);
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#, h - mb);
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(fx), h - mb + 16.0, fmt_sig(fx.round()));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, py(fy) + 4.0, fmt_sig((fy * 100.0).round() / 100.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">Total bytes</text>"#, (ml + w - mr) / 2.0, h - 10.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">YUV-PSNR (dB)</text>"#, h / 2.0, h / 2.0);
    for (i, (label, pts)) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{c}"/>"#, px(x), py(y));
        }
        let ly = mt + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, w - mr + 10.0, w - mr + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - mr + 36.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(rank: usize, qp: u8, bytes: u64, psnr: f64) -> RdPoint {
        RdPoint {
            pattern: "c2".into(),
            scheme: "hierarchical".into(),
            rank,
            qp,
            bytes_subset1: bytes / 2,
            bytes_subset2: bytes / 2,
            bytes_metadata: 0,
            total_bytes: bytes,
            psnr,
            psnr_subset1: psnr + 1.0,
            psnr_subset2: psnr - 1.0,
        }
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(35.123456789), "35.1235");
        assert_eq!(fmt_sig(0.000123456789), "0.000123457");
        assert_eq!(fmt_sig(-97.56541214), "-97.5654");
        assert_eq!(fmt_sig(2737.0), "2737");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn csv_round_trip_and_layout() {
        let pts = vec![point(4, 38, 1234, 31.5), point(4, 2, 99999, f64::INFINITY)];
        let mut buf = Vec::new();
        write_rd_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), RD_CSV_HEADER.join(","));
        let back = read_rd_csv(&buf[..]).unwrap();
        assert_eq!(back, pts);
        let mut again = Vec::new();
        write_rd_csv(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn svg_is_deterministic() {
        let pts = vec![point(4, 38, 1000, 30.0), point(4, 20, 3000, 35.0), point(8, 38, 1500, 31.0)];
        let a = svg_plot(&pts, "test").unwrap();
        assert_eq!(a, svg_plot(&pts, "test").unwrap());
        assert!(a.starts_with("<svg") && a.contains("polyline"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }
}
