use lfc::codec::{Codec, QuantParam};
use lfc::config::PipelineConfig;
use lfc::eval::{bd_rate, bd_rate_with, bd_table, read_rd_csv, rd_sweep, write_bd_csv, write_rd_csv, BdMethod, RdPoint};
use lfc::pattern::{PatternKind, PredictionPattern};
use lfc::synthetic::fixture_3x3;

fn point(pattern: &str, scheme: &str, rank: usize, qp: u8, bytes: u64, psnr: f64) -> RdPoint {
    RdPoint {
        pattern: pattern.into(),
        scheme: scheme.into(),
        rank,
        qp,
        bytes_subset1: bytes / 2,
        bytes_subset2: bytes / 2,
        bytes_metadata: 0,
        total_bytes: bytes,
        psnr,
        psnr_subset1: psnr + 0.5,
        psnr_subset2: psnr - 0.5,
    }
}

fn curve(pattern: &str, scheme: &str, rank: usize, scale: f64) -> Vec<RdPoint> {
    [2u8, 6, 10, 14, 20, 26, 38]
        .iter()
        .enumerate()
        .map(|(i, &qp)| point(pattern, scheme, rank, qp, (scale * 40000.0 / 1.6f64.powi(i as i32)) as u64, 42.0 - 1.7 * i as f64))
        .collect()
}

#[test]
fn one_cell_sweep() {
    let lf = fixture_3x3(0);
    let pattern = PredictionPattern::builtin(PatternKind::Circular2, lf.grid()).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.layers.max_iters = 100;
    cfg.fdl.n = 6;
    let pts = rd_sweep(&lf, &pattern, &[4], &[QuantParam::new(38).unwrap()], &Codec::Fallback, &cfg).unwrap();
    assert_eq!(pts.len(), 1);
    let p = &pts[0];
    assert!(p.bytes_subset1 > 0 && p.bytes_subset2 > 0 && p.psnr.is_finite());
    assert_eq!(p.total_bytes, p.bytes_subset1 + p.bytes_subset2 + p.bytes_metadata);

    let mut csv = Vec::new();
    write_rd_csv(&pts, &mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(!text.contains('\r'));
    let mut again = Vec::new();
    write_rd_csv(&pts, &mut again).unwrap();
    assert_eq!(csv, again);
}

#[test]
fn table_has_a_row_per_pattern_and_rank() {
    let ranks = [4, 8, 16, 28, 44, 52, 60];
    let mut rows = Vec::new();
    for pattern in ["C2", "H2"] {
        let anchor = curve(pattern, "view-anchor", 0, 1.0);
        let test: Vec<RdPoint> = ranks.iter().flat_map(|&r| curve(pattern, "hierarchical", r, 0.5 + r as f64 / 200.0)).collect();
        rows.extend(bd_table("synthetic", &anchor, &test, BdMethod::Cubic));
    }
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r.subset1 < 0.0 && r.subset2 < 0.0));
    let mut out = Vec::new();
    write_bd_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 15);
}

#[test]
fn bd_rate_is_antisymmetric() {
    let a: Vec<(f64, f64)> = vec![(1000.0, 30.0), (1800.0, 32.4), (3500.0, 35.1), (7600.0, 38.0)];
    let b: Vec<(f64, f64)> = vec![(900.0, 30.5), (1500.0, 32.6), (3300.0, 35.9), (6000.0, 38.3)];
    for m in [BdMethod::Cubic, BdMethod::Pchip] {
        let ab = bd_rate_with(&a, &b, m).unwrap();
        let ba = bd_rate_with(&b, &a, m).unwrap();
        assert!((ab * (1.0 + ba / 100.0) + ba).abs() < 1e-9, "{m:?}: {ab} {ba}");
    }
    assert_eq!(bd_rate(&a, &a).unwrap(), 0.0);
}

#[test]
fn csv_round_trip_keeps_six_digits() {
    let pts = curve("H2", "layers-only", 8, 1.0);
    let mut buf = Vec::new();
    write_rd_csv(&pts, &mut buf).unwrap();
    let back = read_rd_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), pts.len());
    for (a, b) in pts.iter().zip(&back) {
        assert_eq!(a.total_bytes, b.total_bytes);
        assert!((a.psnr - b.psnr).abs() < 1e-4);
    }
}
