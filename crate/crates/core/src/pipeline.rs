//! End-to-end encoding and decoding of a light field.
//!
//! [`Encoder`] caches the work that does not depend on the quantization
//! parameter: the layer fit of each subset and its low-rank approximation
//! per rank. Calibration is warm-started from the previous call.

use std::collections::HashMap;

use log::info;

use crate::bksvd::approximate_stack;
use crate::codec::container::{ContainerHeader, LfcBitstream, CONTAINER_VERSION, FLAG_PREDICTED, FLAG_SUBSET1_VIEWS};
use crate::codec::{decode_layers, encode_layers, Codec, CodecId, HevcCommands, QuantParam};
use crate::config::{PipelineConfig, Scheme};
use crate::error::{Error, Result};
use crate::fdl::{hierarchical_decode, hierarchical_encode, CalibrationResult, Subset1Base};
use crate::layers::{optimize_layers, render_subset, LayerStack};
use crate::lightfield::{LightField, View};
use crate::pattern::{merge_subsets, partition_views, PatternKind, PredictionPattern, ViewSubset};

/// Output of one encode.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub bitstream: LfcBitstream,
    /// What the decoder will reconstruct.
    pub reconstruction: LightField,
    /// The low-rank light field that Subset 2 prediction targets (absent for
    /// the view anchor).
    pub approx_lf: Option<LightField>,
    pub calibration: Option<CalibrationResult>,
}

impl Encoded {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bitstream.to_bytes()
    }
}

pub struct Encoder<'a> {
    lf: &'a LightField,
    pattern: PredictionPattern,
    cfg: PipelineConfig,
    codec: Codec,
    subsets: (ViewSubset, ViewSubset),
    fitted: Option<[LayerStack; 2]>,
    approximations: HashMap<usize, [LayerStack; 2]>,
    warm: Option<CalibrationResult>,
}

fn to_u8(v: usize, what: &str) -> Result<u8> {
    u8::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} too large for the container")))
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} too large for the container")))
}

impl<'a> Encoder<'a> {
    pub fn new(lf: &'a LightField, pattern: PredictionPattern, codec: Codec, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let subsets = partition_views(lf, &pattern)?;
        Ok(Self { lf, pattern, cfg, codec, subsets, fitted: None, approximations: HashMap::new(), warm: None })
    }

    pub fn pattern(&self) -> &PredictionPattern {
        &self.pattern
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Layer stacks fitted to Subset 1 and Subset 2.
    pub fn fitted_layers(&mut self) -> Result<&[LayerStack; 2]> {
        if self.fitted.is_none() {
            let mut lc = self.cfg.layers;
            lc.seed = self.cfg.seed;
            info!("fitting layers for {} + {} views", self.subsets.0.len(), self.subsets.1.len());
            let a = optimize_layers(&self.subsets.0, &lc)?;
            lc.seed = self.cfg.seed.wrapping_add(1);
            let b = optimize_layers(&self.subsets.1, &lc)?;
            self.fitted = Some([a, b]);
        }
        Ok(self.fitted.as_ref().unwrap())
    }

    /// Rank-`rank` approximations of the fitted stacks.
    pub fn approximated(&mut self, rank: usize) -> Result<[LayerStack; 2]> {
        if let Some(a) = self.approximations.get(&rank) {
            return Ok(a.clone());
        }
        let (eps, seed) = (self.cfg.krylov_epsilon, self.cfg.seed);
        let [a, b] = self.fitted_layers()?.clone();
        let approx = [approximate_stack(&a, rank, eps, seed)?, approximate_stack(&b, rank, eps, seed.wrapping_add(3))?];
        self.approximations.insert(rank, approx.clone());
        Ok(approx)
    }

    /// Sets the calibration used to warm-start the next encode.
    pub fn set_warm_start(&mut self, c: Option<CalibrationResult>) {
        self.warm = c;
    }

    fn header(&self, rank: usize, qp: QuantParam, flags: u8) -> Result<ContainerHeader> {
        let g = self.lf.grid();
        Ok(ContainerHeader {
            version: CONTAINER_VERSION,
            pattern: self.pattern.kind(),
            codec: self.codec.id(),
            grid_rows: to_u8(g.rows(), "grid rows")?,
            grid_cols: to_u8(g.cols(), "grid cols")?,
            height: to_u16(self.lf.height(), "height")?,
            width: to_u16(self.lf.width(), "width")?,
            rank: to_u16(rank, "rank")?,
            qp: qp.value(),
            flags,
            lambda: self.cfg.fdl.lambda,
        })
    }

    fn fdl_config(&self) -> crate::fdl::FdlConfig {
        let mut f = self.cfg.fdl.clone();
        if self.warm.is_some() {
            f.calibration.max_iters_per_stage = f.calibration.max_iters_per_stage.min(self.cfg.sweep.warm_calibration_iters);
        }
        f
    }

    /// Encodes with the configured scheme at `rank` and `qp`. The rank is
    /// ignored by the view anchor.
    pub fn encode(&mut self, rank: usize, qp: QuantParam) -> Result<Encoded> {
        match self.cfg.scheme {
            Scheme::ViewAnchor => {
                let fdl = self.fdl_config();
                let he = hierarchical_encode(self.lf, &self.pattern, qp, &self.codec, &fdl, Subset1Base::Views, self.warm.as_ref())?;
                self.warm = Some(he.calibration.clone());
                let header = self.header(0, qp, FLAG_PREDICTED | FLAG_SUBSET1_VIEWS)?;
                Ok(Encoded {
                    bitstream: LfcBitstream { header, sections: he.sections() },
                    reconstruction: he.reconstruction,
                    approx_lf: None,
                    calibration: Some(he.calibration),
                })
            }
            scheme => {
                let [a1, a2] = self.approximated(rank)?;
                let p1 = encode_layers(&a1, qp, &self.codec)?;
                let p2 = encode_layers(&a2, qp, &self.codec)?;
                let d1 = decode_layers(&p1, &self.codec)?;
                let d2 = decode_layers(&p2, &self.codec)?;
                let approx_lf = render_pair(&self.pattern, self.lf, &d1, &d2)?;
                if scheme == Scheme::LayersOnly {
                    let header = self.header(rank, qp, 0)?;
                    return Ok(Encoded {
                        bitstream: LfcBitstream { header, sections: vec![p1, p2, Vec::new()] },
                        reconstruction: approx_lf.clone(),
                        approx_lf: Some(approx_lf),
                        calibration: None,
                    });
                }
                let fdl = self.fdl_config();
                let he = hierarchical_encode(&approx_lf, &self.pattern, qp, &self.codec, &fdl, Subset1Base::Layers(&p1), self.warm.as_ref())?;
                self.warm = Some(he.calibration.clone());
                let header = self.header(rank, qp, FLAG_PREDICTED)?;
                Ok(Encoded {
                    bitstream: LfcBitstream { header, sections: he.sections() },
                    reconstruction: he.reconstruction,
                    approx_lf: Some(approx_lf),
                    calibration: Some(he.calibration),
                })
            }
        }
    }
}

fn subset_of(grid: crate::lightfield::AngularGrid, order: &[crate::lightfield::ViewCoord], views: Vec<View>) -> Result<ViewSubset> {
    ViewSubset::new(grid, order.iter().copied().zip(views).collect())
}

fn render_pair(pattern: &PredictionPattern, lf_like: &LightField, d1: &LayerStack, d2: &LayerStack) -> Result<LightField> {
    let g = lf_like.grid();
    let s1 = subset_of(g, pattern.order1(), render_subset(d1, pattern.order1())?)?;
    let s2 = subset_of(g, pattern.order2(), render_subset(d2, pattern.order2())?)?;
    merge_subsets(&s1, &s2)
}

/// One-shot encode.
pub fn encode_lightfield(
    lf: &LightField,
    pattern: &PredictionPattern,
    rank: usize,
    qp: QuantParam,
    codec: &Codec,
    cfg: &PipelineConfig,
) -> Result<Encoded> {
    Encoder::new(lf, pattern.clone(), codec.clone(), cfg.clone())?.encode(rank, qp)
}

/// Resolves the codec named in a container header. External commands come
/// from `hevc`, or from the environment when `None`.
pub fn codec_for(id: CodecId, hevc: Option<&HevcCommands>) -> Result<Codec> {
    match id {
        CodecId::FallbackQdct => Ok(Codec::Fallback),
        CodecId::HevcExternal => match hevc {
            Some(c) => Ok(Codec::HevcExternal(c.clone())),
            None => Codec::hevc_from_env(),
        },
    }
}

/// Decodes a container. Built-in patterns are reconstructed from the header;
/// a custom pattern must be supplied.
pub fn decode_lightfield(bytes: &[u8], custom_pattern: Option<&PredictionPattern>, hevc: Option<&HevcCommands>) -> Result<LightField> {
    let bs = LfcBitstream::from_bytes(bytes)?;
    decode_bitstream(&bs, custom_pattern, hevc)
}

pub fn decode_bitstream(bs: &LfcBitstream, custom_pattern: Option<&PredictionPattern>, hevc: Option<&HevcCommands>) -> Result<LightField> {
    let h = &bs.header;
    let grid = crate::lightfield::AngularGrid::from_dims(h.grid_rows as usize, h.grid_cols as usize)?;
    let pattern = match (h.pattern, custom_pattern) {
        (_, Some(p)) if p.kind() == h.pattern || h.pattern == PatternKind::Custom => p.clone(),
        (PatternKind::Custom, None) => return Err(Error::BadPattern("container uses a custom pattern; supply it".into())),
        (kind, _) => PredictionPattern::builtin(kind, grid)?,
    };
    if pattern.grid() != grid {
        return Err(Error::DimensionMismatch("pattern grid differs from container".into()));
    }
    let codec = codec_for(h.codec, hevc)?;
    if h.predicted() {
        return hierarchical_decode(bs, &pattern, &codec);
    }
    if bs.sections.len() < 2 {
        return Err(Error::CorruptPayload("layer container needs two layer sections".into()));
    }
    let d1 = decode_layers(bs.subset1(), &codec)?;
    let d2 = decode_layers(bs.subset2(), &codec)?;
    let grid_lf = LightField::from_fn(grid, |_| View::new(1, 1))?;
    let out = render_pair(&pattern, &grid_lf, &d1, &d2)?;
    if (out.height(), out.width()) != (h.height as usize, h.width as usize) {
        return Err(Error::CorruptPayload("layer payload dims differ from header".into()));
    }
    Ok(out)
}
