// Fourier disparity layers: calibrate a planted two-plane scene, fit the
// model, and synthesize a view that was never observed.

use lfc::fdl::{calibrate, fit_fdl, synthesize_view, FdlConfig};
use lfc::lightfield::View;
use lfc::metrics::mean_view_psnr;
use lfc::synthetic::planted_fdl_views;

pub fn run_example() -> lfc::Result<()> {
    let planted = [-0.6, 0.7];
    let coords: Vec<[f64; 2]> = (-1..=1).flat_map(|s| (-1..=1).map(move |t| [s as f64, t as f64])).collect();
    let views = planted_fdl_views(32, 32, &planted, &coords, 2);
    let refs: Vec<&View> = views.iter().collect();

    let cfg = FdlConfig { n: 2, ..Default::default() };
    let cal = calibrate(&refs, &coords, &cfg, None)?;
    println!("planted {planted:?}, recovered [{:.4}, {:.4}] ({:?})", cal.disparities[0], cal.disparities[1], cal.status);

    let model = fit_fdl(&refs, &cal.coords, &cal.disparities, 1e-6)?;
    let u = [0.5, -0.5];
    let truth = &planted_fdl_views(32, 32, &planted, &[u], 2)[0];
    let synth = synthesize_view(&model, u);
    println!("view at {u:?}: {:.1} dB", mean_view_psnr(std::iter::once((truth, &synth))));
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
