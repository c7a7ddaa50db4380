// Rate-distortion sweep of the proposed scheme and the view anchor, with a
// CSV table, an SVG plot and per-subset BD-rates.

use lfc::codec::{Codec, QuantParam};
use lfc::config::{PipelineConfig, Scheme};
use lfc::eval::{bd_table, rd_sweep, svg_plot, write_bd_csv, write_rd_csv, BdMethod};
use lfc::pattern::{PatternKind, PredictionPattern};
use lfc::synthetic::fixture_3x3;

pub fn run_example() -> lfc::Result<()> {
    let lf = fixture_3x3(1);
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid())?;
    let qps: Vec<QuantParam> = [14, 20, 26, 32, 38].iter().map(|&q| QuantParam::new(q)).collect::<lfc::Result<_>>()?;
    let mut cfg = PipelineConfig::default();
    cfg.layers.max_iters = 300;
    cfg.fdl.n = 12;

    let proposed = rd_sweep(&lf, &pattern, &[4, 8], &qps, &Codec::Fallback, &cfg)?;
    let anchor = rd_sweep(&lf, &pattern, &[], &qps, &Codec::Fallback, &PipelineConfig { scheme: Scheme::ViewAnchor, ..cfg })?;

    let dir = tempfile::tempdir()?;
    let mut csv = Vec::new();
    write_rd_csv(&proposed, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    let all: Vec<_> = proposed.iter().chain(&anchor).cloned().collect();
    std::fs::write(dir.path().join("rd.svg"), svg_plot(&all, "3x3 fixture, H2")?)?;

    let rows = bd_table("fixture", &anchor, &proposed, BdMethod::Cubic);
    let mut bd = Vec::new();
    write_bd_csv(&rows, &mut bd)?;
    print!("{}", String::from_utf8_lossy(&bd));
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
