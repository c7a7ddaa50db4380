//! Hierarchical coding: Subset 1 seeds an FDL model, each Subset 2 view is
//! predicted from it, its residual coded, and the reconstructed view added
//! back to the model before the next prediction.

use super::{calibrate, synthesize_view, CalibrationResult, FdlConfig, FdlSystem};
use crate::codec::container::{decode_metadata, encode_metadata, LfcBitstream};
use crate::codec::{decode_layers, decode_residual, decode_views, encode_residual, encode_views, Codec, QuantParam};
use crate::error::{Error, Result};
use crate::layers::render_subset;
use crate::lightfield::{LightField, View, ViewCoord};
use crate::pattern::PredictionPattern;

/// How Subset 1 reaches the decoder.
#[derive(Debug, Clone, Copy)]
pub enum Subset1Base<'a> {
    /// Coded here as a sequence of views.
    Views,
    /// Already coded as a layer stack; its views are rendered from the
    /// decoded layers.
    Layers(&'a [u8]),
}

#[derive(Debug, Clone)]
pub struct HierarchicalEncoding {
    pub subset1: Vec<u8>,
    pub metadata: Vec<u8>,
    /// One payload per Subset 2 view, in coding order.
    pub residuals: Vec<Vec<u8>>,
    pub calibration: CalibrationResult,
    /// The encoder's local reconstruction, identical to the decoder output.
    pub reconstruction: LightField,
}

impl HierarchicalEncoding {
    /// Container sections: Subset 1, empty Subset 2 layers, metadata, residuals.
    pub fn sections(&self) -> Vec<Vec<u8>> {
        let mut s = vec![self.subset1.clone(), Vec::new(), self.metadata.clone()];
        s.extend(self.residuals.iter().cloned());
        s
    }
}

fn coord_of(coords: &[[f64; 2]], grid: &crate::lightfield::AngularGrid, c: ViewCoord) -> [f64; 2] {
    coords[grid.index(c).expect("pattern coordinate on grid")]
}

fn subset1_views(base: Subset1Base<'_>, payload: &[u8], order: &[ViewCoord], codec: &Codec) -> Result<Vec<View>> {
    match base {
        Subset1Base::Views => decode_views(payload, codec),
        Subset1Base::Layers(_) => render_subset(&decode_layers(payload, codec)?, order),
    }
}

/// The shared predict/correct/refit loop. `residual` receives the coding
/// index and the prediction and returns the decoded residual.
fn refine(
    pattern: &PredictionPattern,
    dims: (usize, usize),
    coords: &[[f64; 2]],
    disparities: &[f64],
    lambda: f64,
    subset1: Vec<View>,
    mut residual: impl FnMut(usize, &View) -> Result<View>,
) -> Result<LightField> {
    let grid = pattern.grid();
    if subset1.len() != pattern.order1().len() {
        return Err(Error::CorruptPayload(format!("{} Subset 1 views decoded, pattern has {}", subset1.len(), pattern.order1().len())));
    }
    let mut sys = FdlSystem::new(dims.0, dims.1, disparities, lambda)?;
    let mut slots: Vec<Option<View>> = vec![None; grid.len()];
    for (&c, v) in pattern.order1().iter().zip(subset1) {
        if v.dims() != dims {
            return Err(Error::CorruptPayload("Subset 1 view size differs from header".into()));
        }
        sys.add_view(&v, coord_of(coords, &grid, c))?;
        slots[grid.index(c).unwrap()] = Some(v);
    }
    let order2 = pattern.order2();
    for (i, &c) in order2.iter().enumerate() {
        let u = coord_of(coords, &grid, c);
        let pred = synthesize_view(&sys.solve()?, u);
        let res = residual(i, &pred)?;
        if res.dims() != dims {
            return Err(Error::CorruptPayload("residual size differs from header".into()));
        }
        let mut rec = View::new(dims.0, dims.1);
        for ((o, p), r) in rec.data_mut().iter_mut().zip(pred.data()).zip(res.data()) {
            *o = (p + r).clamp(0.0, 1.0);
        }
        if i + 1 < order2.len() {
            sys.add_view(&rec, u)?;
        }
        slots[grid.index(c).unwrap()] = Some(rec);
    }
    LightField::new(grid, slots.into_iter().map(|v| v.expect("every view coded")).collect())
}

/// Codes `approx_lf` hierarchically. Calibration runs on all views and its
/// result is transmitted as metadata.
pub fn hierarchical_encode(
    approx_lf: &LightField,
    pattern: &PredictionPattern,
    qp: QuantParam,
    codec: &Codec,
    cfg: &FdlConfig,
    base: Subset1Base<'_>,
    init: Option<&CalibrationResult>,
) -> Result<HierarchicalEncoding> {
    let grid = approx_lf.grid();
    if grid != pattern.grid() {
        return Err(Error::DimensionMismatch("pattern grid differs from light field grid".into()));
    }
    let dims = (approx_lf.height(), approx_lf.width());
    let nominal: Vec<[f64; 2]> = grid.coords().map(|c| [c.s as f64, c.t as f64]).collect();
    let views: Vec<&View> = approx_lf.views().iter().collect();
    let calibration = calibrate(&views, &nominal, cfg, init)?;
    let metadata = encode_metadata(&calibration.disparities, &calibration.coords.iter().map(|u| (u[0], u[1])).collect::<Vec<_>>());

    let subset1 = match base {
        Subset1Base::Views => {
            let v: Vec<View> = pattern.order1().iter().map(|&c| approx_lf.view(c).unwrap().clone()).collect();
            encode_views(&v, qp, codec)?
        }
        Subset1Base::Layers(p) => p.to_vec(),
    };
    let decoded1 = subset1_views(base, &subset1, pattern.order1(), codec)?;

    let mut residuals = Vec::with_capacity(pattern.order2().len());
    let reconstruction = refine(pattern, dims, &calibration.coords, &calibration.disparities, cfg.lambda, decoded1, |i, pred| {
        let target = approx_lf.view(pattern.order2()[i]).unwrap();
        let mut res = View::new(dims.0, dims.1);
        for ((o, t), p) in res.data_mut().iter_mut().zip(target.data()).zip(pred.data()) {
            *o = t - p;
        }
        let payload = encode_residual(&[res], qp, codec)?;
        let decoded = decode_residual(&payload, codec)?.remove(0);
        residuals.push(payload);
        Ok(decoded)
    })?;
    Ok(HierarchicalEncoding { subset1, metadata, residuals, calibration, reconstruction })
}

/// Mirrors [`hierarchical_encode`] from the container sections.
pub fn hierarchical_decode(bs: &LfcBitstream, pattern: &PredictionPattern, codec: &Codec) -> Result<LightField> {
    let h = &bs.header;
    let grid = pattern.grid();
    if (h.grid_rows as usize, h.grid_cols as usize) != (grid.rows(), grid.cols()) {
        return Err(Error::DimensionMismatch("pattern grid differs from container".into()));
    }
    let dims = (h.height as usize, h.width as usize);
    let (disparities, coords) = decode_metadata(bs.metadata(), grid.len())?;
    if disparities.is_empty() {
        return Err(Error::CorruptPayload("metadata holds no disparities".into()));
    }
    let coords: Vec<[f64; 2]> = coords.into_iter().map(|(s, t)| [s, t]).collect();
    let residuals = bs.residuals();
    if residuals.len() != pattern.order2().len() {
        return Err(Error::CorruptPayload(format!("{} residual sections for {} Subset 2 views", residuals.len(), pattern.order2().len())));
    }
    let base = if h.subset1_as_views() { Subset1Base::Views } else { Subset1Base::Layers(&[]) };
    let decoded1 = subset1_views(base, bs.subset1(), pattern.order1(), codec)?;
    refine(pattern, dims, &coords, &disparities, h.lambda, decoded1, |i, _| {
        let mut r = decode_residual(&residuals[i], codec)?;
        if r.len() != 1 {
            return Err(Error::CorruptPayload("residual payload must hold one view".into()));
        }
        Ok(r.remove(0))
    })
}
