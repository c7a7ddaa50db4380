// Randomized block Krylov low-rank approximation of a layer stack, compared
// with the optimal error from a dense SVD.

use lfc::bksvd::{approximate_stack, lowrank, spectral_error_ratio, stack_channels, KrylovConfig};
use lfc::synthetic::random_layer_stack;

pub fn run_example() -> lfc::Result<()> {
    let stack = random_layer_stack(40, 40, 2, 2, 9);
    let green = &stack_channels(&stack)[1];
    let b = green.matrix();
    let sigma: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();

    for rank in [4, 8, 16] {
        let cfg = KrylovConfig::for_dims(rank, 0.1, 0, b.nrows(), b.ncols());
        let r = lowrank(b, &cfg)?;
        let ratio = spectral_error_ratio(b, &r, sigma[rank]);
        println!("rank {rank:2}: q = {}, |B - ZZ^T B| / sigma_(k+1) = {ratio:.4}", cfg.iterations);
    }

    let approx = approximate_stack(&stack, 8, 0.1, 0)?;
    println!("rank-8 stack has layers of {:?}", approx.layer_dims());
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
