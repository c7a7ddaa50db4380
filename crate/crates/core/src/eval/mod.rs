//! Rate-distortion sweeps and comparisons.

mod bdrate;
mod report;

use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::codec::{Codec, QuantParam};
use crate::config::{PipelineConfig, Scheme};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::metrics::{mean_view_psnr, yuv_psnr};
use crate::pipeline::{Encoded, Encoder};
use crate::pattern::PredictionPattern;

pub use bdrate::{bd_rate, bd_rate_with, BdMethod};
pub use report::{bd_table, read_rd_csv, svg_plot, write_bd_csv, write_rd_csv, BdRow, RD_CSV_HEADER};

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub pattern: String,
    pub scheme: String,
    pub rank: usize,
    pub qp: u8,
    pub bytes_subset1: u64,
    /// Layer or residual payloads of Subset 2.
    pub bytes_subset2: u64,
    pub bytes_metadata: u64,
    /// Sum of all container sections.
    pub total_bytes: u64,
    /// Aggregate YUV-PSNR against the original light field.
    pub psnr: f64,
    pub psnr_subset1: f64,
    pub psnr_subset2: f64,
}

impl RdPoint {
    pub fn from_encoded(original: &LightField, pattern: &PredictionPattern, scheme: Scheme, enc: &Encoded) -> Result<Self> {
        let bs = &enc.bitstream;
        let rec = &enc.reconstruction;
        let len = |i: usize| bs.sections.get(i).map_or(0, |s| s.len() as u64);
        let residual: u64 = bs.residuals().iter().map(|s| s.len() as u64).sum();
        let subset_psnr = |order: &[crate::lightfield::ViewCoord]| {
            mean_view_psnr(order.iter().map(|&c| (original.view(c).unwrap(), rec.view(c).unwrap())))
        };
        Ok(Self {
            pattern: pattern.kind().label().to_string(),
            scheme: scheme.label().to_string(),
            rank: bs.header.rank as usize,
            qp: bs.header.qp,
            bytes_subset1: len(0),
            bytes_subset2: len(1) + residual,
            bytes_metadata: len(2),
            total_bytes: bs.payload_bytes() as u64,
            psnr: yuv_psnr(original, rec)?.aggregate,
            psnr_subset1: subset_psnr(pattern.order1()),
            psnr_subset2: subset_psnr(pattern.order2()),
        })
    }

    /// Bitrate in kbit/s when `views` views are shown at `views_per_second`.
    pub fn kbps(&self, views: usize, views_per_second: f64) -> f64 {
        let seconds = views as f64 / views_per_second;
        self.total_bytes as f64 * 8.0 / seconds / 1000.0
    }
}

/// Encodes every `(rank, qp)` pair, ranks outermost. The view anchor has no
/// rank and is swept over `qps` only.
pub fn rd_sweep(
    lf: &LightField,
    pattern: &PredictionPattern,
    ranks: &[usize],
    qps: &[QuantParam],
    codec: &Codec,
    cfg: &PipelineConfig,
) -> Result<Vec<RdPoint>> {
    if qps.is_empty() || (ranks.is_empty() && cfg.scheme != Scheme::ViewAnchor) {
        return Err(Error::InvalidConfig("sweep needs at least one rank and one qp".into()));
    }
    let mut enc = Encoder::new(lf, pattern.clone(), codec.clone(), cfg.clone())?;
    let ranks: Vec<usize> = if cfg.scheme == Scheme::ViewAnchor { vec![0] } else { ranks.to_vec() };
    let mut out = Vec::with_capacity(ranks.len() * qps.len());
    for &rank in &ranks {
        for &qp in qps {
            let t = Instant::now();
            let e = enc.encode(rank, qp)?;
            let p = RdPoint::from_encoded(lf, pattern, cfg.scheme, &e)?;
            info!("rank {rank} qp {qp}: {} bytes, {:.2} dB ({:.1?})", p.total_bytes, p.psnr, t.elapsed());
            out.push(p);
        }
    }
    Ok(out)
}

/// `(rate, psnr)` pairs of one subset (1 or 2) or of the whole stream (0),
/// for points matching `rank`, sorted by qp.
pub fn rd_curve(points: &[RdPoint], rank: Option<usize>, subset: u8) -> Vec<(f64, f64)> {
    let mut sel: Vec<&RdPoint> = points.iter().filter(|p| rank.map_or(true, |r| p.rank == r)).collect();
    sel.sort_by_key(|p| p.qp);
    sel.iter()
        .map(|p| match subset {
            1 => (p.bytes_subset1 as f64, p.psnr_subset1),
            2 => (p.bytes_subset2 as f64, p.psnr_subset2),
            _ => (p.total_bytes as f64, p.psnr),
        })
        .collect()
}
