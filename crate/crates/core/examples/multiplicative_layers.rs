// Fit three multiplicative layers to the H2 Subset 1 views and measure how
// well the rendered views match.

use lfc::layers::{optimize_layers_with_report, render_subset, LayerOptConfig};
use lfc::metrics::mean_view_psnr;
use lfc::pattern::{partition_views, PatternKind, PredictionPattern};
use lfc::synthetic::fixture_3x3;

pub fn run_example() -> lfc::Result<()> {
    let lf = fixture_3x3(1);
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid())?;
    let (subset1, _) = partition_views(&lf, &pattern)?;

    let cfg = LayerOptConfig { max_iters: 300, ..Default::default() };
    let (stack, report) = optimize_layers_with_report(&subset1, &cfg)?;
    println!(
        "{} iterations ({} rejected), loss {:.3e} -> {:.3e}",
        report.iterations,
        report.rejected,
        report.losses[0],
        report.final_loss()
    );

    let rendered = render_subset(&stack, &subset1.coords())?;
    let psnr = mean_view_psnr(subset1.views().zip(&rendered));
    println!("layers {:?} (padding {:?}), rendered views at {psnr:.2} dB", stack.layer_dims(), stack.padding());
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
