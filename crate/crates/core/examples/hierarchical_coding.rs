// Full pipeline: low-rank layers for Subset 1, FDL prediction plus residual
// coding for Subset 2. The decoder reproduces the encoder exactly.

use lfc::codec::{Codec, QuantParam};
use lfc::config::PipelineConfig;
use lfc::metrics::yuv_psnr;
use lfc::pattern::{PatternKind, PredictionPattern};
use lfc::pipeline::{decode_lightfield, Encoder};
use lfc::synthetic::fixture_3x3;

pub fn run_example() -> lfc::Result<()> {
    let lf = fixture_3x3(3);
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid())?;
    let mut cfg = PipelineConfig::default();
    cfg.layers.max_iters = 300;
    cfg.fdl.n = 12;

    let mut encoder = Encoder::new(&lf, pattern, Codec::Fallback, cfg)?;
    for qp in [14, 26, 38] {
        let enc = encoder.encode(8, QuantParam::new(qp)?)?;
        let bytes = enc.to_bytes();
        let decoded = decode_lightfield(&bytes, None, None)?;
        assert_eq!(decoded.views(), enc.reconstruction.views());
        let bs = &enc.bitstream;
        println!(
            "qp {qp}: {} bytes (subset 1 {}, metadata {}, {} residuals {}), {:.2} dB",
            bytes.len(),
            bs.subset1().len(),
            bs.metadata().len(),
            bs.residuals().len(),
            bs.residuals().iter().map(Vec::len).sum::<usize>(),
            yuv_psnr(&lf, &decoded)?.aggregate
        );
    }
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
