//! Randomized Block-Krylov low-rank approximation of channel-stacked layers.
//!
//! For each color channel the three layers are stacked vertically into a
//! `3m x n` matrix `B`. A Gaussian start block `Pi` (`n x k`) seeds the
//! Krylov space `[B Pi, (B B^T) B Pi, ..., (B B^T)^{q-1} B Pi]`; its
//! orthonormal basis `Q` is compressed through the eigendecomposition of the
//! small matrix `Q^T B B^T Q`, and the top `k` eigenvectors give the
//! rank-`k` basis `W = Q U_k`. The approximation is `W W^T B`.
//!
//! The spectral-norm error is within `(1 + eps)` of the best rank-`k`
//! approximation with high probability once `q ~ log(n) / sqrt(eps)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::layers::LayerStack;
use crate::lightfield::View;

/// One color channel of a layer stack, `[M_{-1}; M_0; M_1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannelMatrix {
    matrix: DMatrix<f64>,
}

impl StackedChannelMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() % 3 != 0 {
            return Err(Error::BadRowCount { rows: matrix.nrows(), expected: matrix.nrows() / 3 });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn layer_height(&self) -> usize {
        self.matrix.nrows() / 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovConfig {
    pub rank: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl KrylovConfig {
    /// `q = ceil(ln(max(rows, cols)) / sqrt(eps))`, clamped to `[2, 10]`.
    pub fn default_iterations(rows: usize, cols: usize, epsilon: f64) -> usize {
        let q = ((rows.max(cols).max(2) as f64).ln() / epsilon.sqrt()).ceil();
        (q as usize).clamp(2, 10)
    }

    pub fn for_dims(rank: usize, epsilon: f64, seed: u64, rows: usize, cols: usize) -> Self {
        Self { rank, iterations: Self::default_iterations(rows, cols, epsilon), epsilon, seed }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let limit = rows.min(cols);
        if self.rank == 0 || self.rank > limit {
            return Err(Error::RankTooLarge { rank: self.rank, limit });
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("Krylov iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankResult {
    /// Orthonormal `3m x k` basis.
    pub basis: DMatrix<f64>,
    /// `W (W^T B)`.
    pub approx: DMatrix<f64>,
    /// Spectral norm of `B - approx`.
    pub achieved_error: f64,
}

/// Stacks each color channel of the three layers into a `3m x n` matrix.
pub fn stack_channels(stack: &LayerStack) -> [StackedChannelMatrix; 3] {
    let (m, n) = stack.layer_dims();
    [0, 1, 2].map(|ch| {
        let mut b = DMatrix::zeros(3 * m, n);
        for (z, layer) in stack.layers().iter().enumerate() {
            let plane = layer.plane(ch);
            for r in 0..m {
                for c in 0..n {
                    b[(z * m + r, c)] = plane[r * n + c];
                }
            }
        }
        StackedChannelMatrix { matrix: b }
    })
}

/// Splits each `3m x n` channel matrix back into three layers, clamping to
/// `[0, 1]`. `view_dims` and `padding` describe the stack geometry.
pub fn unstack_layers(
    channels: [&DMatrix<f64>; 3],
    view_dims: (usize, usize),
    padding: (usize, usize),
) -> Result<LayerStack> {
    let m = view_dims.0 + 2 * padding.0;
    let n = view_dims.1 + 2 * padding.1;
    for b in channels {
        if b.nrows() != 3 * m || b.ncols() != n {
            return Err(Error::BadRowCount { rows: b.nrows(), expected: m });
        }
    }
    let layers = [0, 1, 2].map(|z| {
        let mut layer = View::new(m, n);
        for (ch, b) in channels.iter().enumerate() {
            let plane = layer.plane_mut(ch);
            for r in 0..m {
                for c in 0..n {
                    plane[r * n + c] = b[(z * m + r, c)].clamp(0.0, 1.0);
                }
            }
        }
        layer
    });
    LayerStack::from_layers(view_dims.0, view_dims.1, padding.0, padding.1, layers)
}

/// Thin orthonormal basis of the columns of `a`, dropping numerically
/// dependent columns (column-pivoted QR).
fn orthonormal_basis(a: DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let qr = a.col_piv_qr();
    let r = qr.r();
    let diag0 = r[(0, 0)].abs();
    let tol = diag0 * 1e-10 * rows.max(cols) as f64;
    let rank = (0..r.nrows().min(r.ncols())).take_while(|&i| r[(i, i)].abs() > tol).count();
    qr.q().columns(0, rank).into_owned()
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.iter().fold(0.0f64, |m, &s| m.max(s))
}

/// Extends an orthonormal `rows x r` basis to `k` columns using unit vectors
/// orthogonalized against it.
fn complete_basis(q: DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let rows = q.nrows();
    let mut cols: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < k && e < rows {
        let mut v = nalgebra::DVector::zeros(rows);
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Rank-`k` Block-Krylov approximation of one stacked channel matrix.
pub fn block_krylov_lowrank(b: &StackedChannelMatrix, cfg: &KrylovConfig) -> Result<LowRankResult> {
    lowrank(&b.matrix, cfg)
}

/// Same as [`block_krylov_lowrank`] for any dense matrix.
pub fn lowrank(b: &DMatrix<f64>, cfg: &KrylovConfig) -> Result<LowRankResult> {
    let (rows, cols) = b.shape();
    cfg.validate(rows, cols)?;
    let k = cfg.rank;

    if b.iter().all(|&x| x == 0.0) {
        let basis = complete_basis(DMatrix::zeros(rows, 0), k);
        return Ok(LowRankResult { basis, approx: DMatrix::zeros(rows, cols), achieved_error: 0.0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pi = DMatrix::from_fn(cols, k, |_, _| StandardNormal.sample(&mut rng));

    // Each block is orthonormalized before the next power; this keeps the
    // span of the Krylov space while avoiding overflow of (B B^T)^i.
    let bt = b.transpose();
    let mut block = orthonormal_basis(b * &pi);
    let mut krylov = block.clone();
    for _ in 1..cfg.iterations {
        if block.ncols() == 0 {
            break;
        }
        block = orthonormal_basis(b * (&bt * &block));
        let mut grown = DMatrix::zeros(rows, krylov.ncols() + block.ncols());
        grown.columns_mut(0, krylov.ncols()).copy_from(&krylov);
        grown.columns_mut(krylov.ncols(), block.ncols()).copy_from(&block);
        krylov = grown;
    }
    let q = orthonormal_basis(krylov);

    // S = Q^T B B^T Q = C C^T with C = Q^T B.
    let c = q.transpose() * b;
    let s = &c * c.transpose();
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let keep = k.min(order.len());
    let top = DMatrix::from_fn(q.ncols(), keep, |r, j| eig.eigenvectors[(r, order[j])]);
    let basis = complete_basis(&q * top, k);

    let approx = &basis * (basis.transpose() * b);
    let achieved_error = spectral_norm(&(b - &approx));
    Ok(LowRankResult { basis, approx, achieved_error })
}

/// `||B - W W^T B||_2 / sigma_{k+1}`; zero when both vanish, `+inf` when only
/// the oracle value vanishes.
pub fn spectral_error_ratio(b: &DMatrix<f64>, result: &LowRankResult, oracle_sigma: f64) -> f64 {
    let residual = spectral_norm(&(b - &result.approx));
    let tiny = 1e-12 * spectral_norm(b).max(1e-300);
    if oracle_sigma <= tiny {
        if residual <= tiny.max(1e-9 * spectral_norm(b)) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        residual / oracle_sigma
    }
}

/// Low-rank approximation of a whole layer stack: all three channels at the
/// same rank, channel `c` seeded with `seed + c`, then unstacked and clamped.
pub fn approximate_stack(stack: &LayerStack, rank: usize, epsilon: f64, seed: u64) -> Result<LayerStack> {
    let channels = stack_channels(stack);
    let mut approx = Vec::with_capacity(3);
    for (ch, b) in channels.iter().enumerate() {
        let (rows, cols) = b.matrix.shape();
        let cfg = KrylovConfig::for_dims(rank, epsilon, seed.wrapping_add(ch as u64), rows, cols);
        approx.push(block_krylov_lowrank(b, &cfg)?.approx);
    }
    unstack_layers([&approx[0], &approx[1], &approx[2]], stack.view_dims(), stack.padding())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn sigma(b: &DMatrix<f64>, i: usize) -> f64 {
        let mut s: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.get(i).copied().unwrap_or(0.0)
    }

    fn random_stack(h: usize, w: usize, pad: (usize, usize), seed: u64) -> LayerStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lh, lw) = (h + 2 * pad.0, w + 2 * pad.1);
        let layers = [0, 1, 2]
            .map(|_| View::from_planar(lh, lw, (0..3 * lh * lw).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap());
        LayerStack::from_layers(h, w, pad.0, pad.1, layers).unwrap()
    }

    #[test]
    fn stacking_shape_and_order() {
        let st = random_stack(2, 5, (1, 0), 1);
        let [r, _, _] = stack_channels(&st);
        assert_eq!(r.matrix().shape(), (12, 5));
        for c in 0..5 {
            assert_eq!(r.matrix()[(0, c)], st.layer(-1).get(0, 0, c));
            assert_eq!(r.matrix()[(4, c)], st.layer(0).get(0, 0, c));
            assert_eq!(r.matrix()[(8, c)], st.layer(1).get(0, 0, c));
        }
    }

    #[test]
    fn unstack_identity_and_clamp() {
        let st = random_stack(3, 4, (1, 1), 2);
        let ch = stack_channels(&st);
        let back = unstack_layers([ch[0].matrix(), ch[1].matrix(), ch[2].matrix()], (3, 4), (1, 1)).unwrap();
        assert_eq!(back, st);

        let mut m = ch[0].matrix().clone();
        m[(0, 0)] = -0.03;
        m[(1, 1)] = 1.02;
        let clamped = unstack_layers([&m, ch[1].matrix(), ch[2].matrix()], (3, 4), (1, 1)).unwrap();
        assert_eq!(clamped.layer(-1).get(0, 0, 0), 0.0);
        assert_eq!(clamped.layer(-1).get(0, 1, 1), 1.0);

        let bad = DMatrix::zeros(14, 6);
        assert!(matches!(unstack_layers([&bad, &bad, &bad], (3, 4), (1, 1)), Err(Error::BadRowCount { .. })));
    }

    #[test]
    fn twelve_rows_three_layers() {
        let b = DMatrix::from_fn(12, 5, |r, c| ((r * 5 + c) % 7) as f64 / 7.0);
        let st = unstack_layers([&b, &b, &b], (4, 5), (0, 0)).unwrap();
        assert_eq!(st.layer_dims(), (4, 5));
        assert_eq!(st.layer(1).get(2, 3, 4), b[(11, 4)]);
    }

    #[test]
    fn exact_rank_recovered() {
        let b = gaussian(60, 4, 3) * gaussian(4, 40, 4);
        let cfg = KrylovConfig::for_dims(4, 0.1, 9, 60, 40);
        let res = lowrank(&b, &cfg).unwrap();
        assert!(res.achieved_error / spectral_norm(&b) <= 1e-6);
        assert!(spectral_error_ratio(&b, &res, sigma(&b, 4)) == 0.0);
    }

    #[test]
    fn identity_ratio_is_one() {
        let b = DMatrix::<f64>::identity(50, 50);
        let res = lowrank(&b, &KrylovConfig::for_dims(10, 0.1, 1, 50, 50)).unwrap();
        let ratio = spectral_error_ratio(&b, &res, 1.0);
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn full_rank_basis_has_zero_residual() {
        let b = gaussian(30, 12, 5);
        let res = lowrank(&b, &KrylovConfig::for_dims(12, 0.1, 1, 30, 12)).unwrap();
        assert_eq!(spectral_error_ratio(&b, &res, sigma(&b, 12)), 0.0);
    }

    #[test]
    fn orthonormal_and_factored() {
        let b = gaussian(45, 30, 6);
        let res = lowrank(&b, &KrylovConfig::for_dims(7, 0.2, 2, 45, 30)).unwrap();
        let gram = res.basis.transpose() * &res.basis;
        assert!((gram - DMatrix::<f64>::identity(7, 7)).amax() < 1e-8);
        let explicit = (&res.basis * res.basis.transpose()) * &b;
        assert!((explicit - &res.approx).amax() < 1e-10);
    }

    #[test]
    fn zero_matrix_is_not_an_error() {
        let b = DMatrix::zeros(12, 8);
        let res = lowrank(&b, &KrylovConfig::for_dims(3, 0.1, 0, 12, 8)).unwrap();
        assert_eq!(res.approx, b);
        assert_eq!(res.basis.ncols(), 3);
        assert!((res.basis.transpose() * &res.basis - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn rank_checks() {
        let b = gaussian(12, 5, 1);
        assert!(matches!(lowrank(&b, &KrylovConfig::for_dims(6, 0.1, 0, 12, 5)), Err(Error::RankTooLarge { .. })));
        assert!(matches!(lowrank(&b, &KrylovConfig::for_dims(0, 0.1, 0, 12, 5)), Err(Error::RankTooLarge { .. })));
        let cfg = KrylovConfig { rank: 2, iterations: 0, epsilon: 0.1, seed: 0 };
        assert!(lowrank(&b, &cfg).is_err());
    }

    #[test]
    fn default_iteration_rule() {
        assert_eq!(KrylovConfig::default_iterations(300, 100, 0.1), 10);
        assert_eq!(KrylovConfig::default_iterations(3, 3, 4.0), 2);
        assert_eq!(KrylovConfig::default_iterations(20, 10, 1.0), 3);
    }

    #[test]
    fn approximate_stack_stays_in_range() {
        let st = random_stack(6, 8, (1, 1), 4);
        let approx = approximate_stack(&st, 3, 0.1, 0).unwrap();
        assert_eq!(approx.layer_dims(), st.layer_dims());
        assert!(approx.layers().iter().flat_map(|l| l.data()).all(|&x| (0.0..=1.0).contains(&x)));
    }
}
