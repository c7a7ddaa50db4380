//! Fourier Disparity Layers.
//!
//! A view at angular coordinate `u = (s, t)` is modelled in the Fourier
//! domain as `V_u(f) = sum_k exp(+2 pi i d_k (u . f)) L_k(f)`, where `f =
//! (f_row, f_col)` is in cycles per pixel. Fitting solves a Tikhonov-regularized
//! least-squares problem independently at every frequency.
//!
//! Views are real, so the spectra of conjugate frequency pairs are conjugate.
//! Only one member of each pair is solved. Bins on a Nyquist line (even
//! dimensions) break that symmetry and are solved individually; synthesis
//! then keeps the real part of the inverse transform.

mod calibrate;
mod hierarchical;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::View;

pub use calibrate::{calibrate, calibrate_subset, CalibrationConfig, CalibrationResult, CalibrationStatus};
pub use hierarchical::{hierarchical_decode, hierarchical_encode, HierarchicalEncoding, Subset1Base};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdlConfig {
    /// Number of disparity layers.
    pub n: usize,
    /// Tikhonov weight. Entries of the regression matrix have unit modulus,
    /// so this is also the weight relative to the mean squared entry.
    pub lambda: f64,
    /// Range the initial disparities are spread over.
    pub d_min: f64,
    pub d_max: f64,
    pub calibration: CalibrationConfig,
}

impl Default for FdlConfig {
    fn default() -> Self {
        Self { n: 30, lambda: 1e-4, d_min: -2.0, d_max: 2.0, calibration: CalibrationConfig::default() }
    }
}

impl FdlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("FDL layer count must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.d_min < self.d_max) {
            return Err(Error::InvalidConfig("d_min must be below d_max".into()));
        }
        self.calibration.validate()
    }

    /// Disparities spread uniformly over `[d_min, d_max]` (bin centres).
    pub fn initial_disparities(&self) -> Vec<f64> {
        uniform_disparities(self.n, self.d_min, self.d_max)
    }
}

pub fn uniform_disparities(n: usize, d_min: f64, d_max: f64) -> Vec<f64> {
    let w = (d_max - d_min) / n as f64;
    (0..n).map(|k| d_min + (k as f64 + 0.5) * w).collect()
}

/// Signed frequency of DFT index `k` along an axis of length `n`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

/// 2D FFT of fixed size.
#[derive(Clone)]
pub struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: p.plan_fft_forward(w),
            col_fwd: p.plan_fft_forward(h),
            row_inv: p.plan_fft_inverse(w),
            col_inv: p.plan_fft_inverse(h),
        }
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.h, self.w);
        rows.process(data);
        let mut t = vec![Complex64::default(); h * w];
        for r in 0..h {
            for c in 0..w {
                t[c * h + r] = data[r * w + c];
            }
        }
        cols.process(&mut t);
        for r in 0..h {
            for c in 0..w {
                data[r * w + c] = t[c * h + r];
            }
        }
    }

    /// Unnormalized forward transform of a real plane.
    pub fn forward_real(&self, plane: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = plane.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.run(&mut d, &self.row_fwd, &self.col_fwd);
        d
    }

    /// Inverse transform (scaled by `1 / (h w)`), keeping the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut spec, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.h * self.w) as f64;
        spec.iter().map(|z| z.re * s).collect()
    }
}

/// The set of frequency bins that are solved explicitly, and how every other
/// bin is recovered from them.
#[derive(Debug)]
pub struct BinSet {
    h: usize,
    w: usize,
    /// Flat index and signed frequency of each solved bin.
    solved: Vec<(usize, [f64; 2])>,
    /// For every flat index: the slot holding it and whether to conjugate.
    source: Vec<(u32, bool)>,
}

impl BinSet {
    pub fn new(h: usize, w: usize) -> Self {
        let nyq = |k: usize, n: usize| 2 * k == n;
        let mut solved = Vec::new();
        let mut slot_of = vec![u32::MAX; h * w];
        for kr in 0..h {
            for kc in 0..w {
                let i = kr * w + kc;
                let p = ((h - kr) % h) * w + (w - kc) % w;
                if nyq(kr, h) || nyq(kc, w) || i <= p {
                    slot_of[i] = solved.len() as u32;
                    solved.push((i, [signed_frequency(kr, h), signed_frequency(kc, w)]));
                }
            }
        }
        let mut source = vec![(0u32, false); h * w];
        for kr in 0..h {
            for kc in 0..w {
                let i = kr * w + kc;
                source[i] = if slot_of[i] != u32::MAX {
                    (slot_of[i], false)
                } else {
                    (slot_of[((h - kr) % h) * w + (w - kc) % w], true)
                };
            }
        }
        Self { h, w, solved, source }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.solved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solved.is_empty()
    }

    pub fn frequency(&self, slot: usize) -> [f64; 2] {
        self.solved[slot].1
    }

    pub fn flat_index(&self, slot: usize) -> usize {
        self.solved[slot].0
    }

    /// Expands per-slot values to a full spectrum.
    pub fn expand(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.source.iter().map(|&(s, c)| if c { values[s as usize].conj() } else { values[s as usize] }).collect()
    }
}

/// Phase row `exp(+2 pi i d_k theta)` for `theta = u . f`.
fn phase_row(disparities: &[f64], theta: f64, out: &mut [Complex64]) {
    for (o, &d) in out.iter_mut().zip(disparities) {
        *o = Complex64::cis(TAU * d * theta);
    }
}

/// Solves `(M + lambda I) x = rhs` in place for a Hermitian positive
/// semi-definite `M` (row-major `n x n`, lower triangle used) and `m`
/// right-hand sides stored contiguously. Returns `false` when singular.
pub(crate) fn hermitian_solve(mat: &mut [Complex64], n: usize, lambda: f64, rhs: &mut [Complex64], m: usize) -> bool {
    let max_diag = (0..n).map(|i| mat[i * n + i].re).fold(0.0f64, f64::max);
    let tol = if lambda > 0.0 { 0.0 } else { 1e-12 * max_diag.max(1e-300) };
    for j in 0..n {
        let mut d = mat[j * n + j].re + lambda;
        for k in 0..j {
            d -= mat[j * n + k].norm_sqr();
        }
        if !(d > tol) {
            return false;
        }
        let l = d.sqrt();
        mat[j * n + j] = Complex64::new(l, 0.0);
        for i in j + 1..n {
            let mut s = mat[i * n + j];
            for k in 0..j {
                s -= mat[i * n + k] * mat[j * n + k].conj();
            }
            mat[i * n + j] = s / l;
        }
    }
    for r in 0..m {
        let x = &mut rhs[r * n..(r + 1) * n];
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= mat[i * n + k] * x[k];
            }
            x[i] = s / mat[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= mat[k * n + i].conj() * x[k];
            }
            x[i] = s / mat[i * n + i].re;
        }
    }
    true
}

/// A fitted FDL model: `n` layer spectra per colour channel.
#[derive(Debug, Clone)]
pub struct FdlModel {
    bins: Arc<BinSet>,
    disparities: Vec<f64>,
    /// `[slot][channel][k]`.
    x: Vec<Complex64>,
}

impl FdlModel {
    pub fn dims(&self) -> (usize, usize) {
        self.bins.dims()
    }

    pub fn disparities(&self) -> &[f64] {
        &self.disparities
    }

    pub fn n(&self) -> usize {
        self.disparities.len()
    }

    /// Full spectrum of layer `k` in channel `ch`.
    pub fn layer_spectrum(&self, k: usize, ch: usize) -> Vec<Complex64> {
        let n = self.n();
        let vals: Vec<Complex64> = (0..self.bins.len()).map(|s| self.x[(s * 3 + ch) * n + k]).collect();
        self.bins.expand(&vals)
    }

    /// Synthesized spectra of the three channels at `u`.
    pub fn synthesize_spectrum(&self, u: [f64; 2]) -> [Vec<Complex64>; 3] {
        let n = self.n();
        let mut phase = vec![Complex64::default(); n];
        let mut vals = [vec![Complex64::default(); self.bins.len()], vec![Complex64::default(); self.bins.len()], vec![Complex64::default(); self.bins.len()]];
        for slot in 0..self.bins.len() {
            let f = self.bins.frequency(slot);
            phase_row(&self.disparities, u[0] * f[0] + u[1] * f[1], &mut phase);
            for (ch, v) in vals.iter_mut().enumerate() {
                let x = &self.x[(slot * 3 + ch) * n..(slot * 3 + ch + 1) * n];
                v[slot] = phase.iter().zip(x).map(|(p, x)| p * x).sum();
            }
        }
        vals.map(|v| self.bins.expand(&v))
    }

    /// Synthesized view without clamping.
    pub fn synthesize_unclamped(&self, u: [f64; 2]) -> View {
        let (h, w) = self.dims();
        let fft = Fft2::new(h, w);
        let mut data = Vec::with_capacity(3 * h * w);
        for spec in self.synthesize_spectrum(u) {
            data.extend(fft.inverse_real(spec));
        }
        View::from_planar(h, w, data).expect("synthesized dims")
    }
}

/// Synthesizes the view at angular coordinate `u`, clamped to `[0, 1]`.
pub fn synthesize_view(model: &FdlModel, u: [f64; 2]) -> View {
    let mut v = model.synthesize_unclamped(u);
    v.clamp_unit();
    v
}

/// Per-frequency normal equations `A^H A` and `A^H b`, accumulated one view at
/// a time so that refits after adding a view cost one solve per frequency.
#[derive(Debug, Clone)]
pub struct FdlSystem {
    bins: Arc<BinSet>,
    fft: Fft2Handle,
    disparities: Vec<f64>,
    lambda: f64,
    /// `[slot][n x n]`.
    gram: Vec<Complex64>,
    /// `[slot][channel][n]`.
    rhs: Vec<Complex64>,
    views: usize,
}

#[derive(Clone)]
struct Fft2Handle(Fft2);

impl std::fmt::Debug for Fft2Handle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.0.h, self.0.w)
    }
}

impl FdlSystem {
    pub fn new(height: usize, width: usize, disparities: &[f64], lambda: f64) -> Result<Self> {
        if disparities.is_empty() {
            return Err(Error::InvalidConfig("at least one disparity is required".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        let bins = Arc::new(BinSet::new(height, width));
        let n = disparities.len();
        Ok(Self {
            gram: vec![Complex64::default(); bins.len() * n * n],
            rhs: vec![Complex64::default(); bins.len() * 3 * n],
            bins,
            fft: Fft2Handle(Fft2::new(height, width)),
            disparities: disparities.to_vec(),
            lambda,
            views: 0,
        })
    }

    pub fn view_count(&self) -> usize {
        self.views
    }

    pub fn add_view(&mut self, view: &View, u: [f64; 2]) -> Result<()> {
        if view.dims() != self.bins.dims() {
            return Err(Error::DimensionMismatch(format!("view is {:?}, model is {:?}", view.dims(), self.bins.dims())));
        }
        let n = self.disparities.len();
        let spectra: Vec<Vec<Complex64>> = (0..3).map(|ch| self.fft.0.forward_real(view.plane(ch))).collect();
        let mut a = vec![Complex64::default(); n];
        for slot in 0..self.bins.len() {
            let f = self.bins.frequency(slot);
            phase_row(&self.disparities, u[0] * f[0] + u[1] * f[1], &mut a);
            let g = &mut self.gram[slot * n * n..(slot + 1) * n * n];
            for i in 0..n {
                let ai = a[i].conj();
                for j in 0..=i {
                    g[i * n + j] += ai * a[j];
                }
            }
            let idx = self.bins.flat_index(slot);
            for (ch, spec) in spectra.iter().enumerate() {
                let b = spec[idx];
                let h = &mut self.rhs[(slot * 3 + ch) * n..(slot * 3 + ch + 1) * n];
                for i in 0..n {
                    h[i] += a[i].conj() * b;
                }
            }
        }
        self.views += 1;
        Ok(())
    }

    pub fn solve(&self) -> Result<FdlModel> {
        if self.views == 0 {
            return Err(Error::InvalidConfig("cannot fit an FDL model without views".into()));
        }
        let n = self.disparities.len();
        let mut x = self.rhs.clone();
        let mut g = vec![Complex64::default(); n * n];
        for slot in 0..self.bins.len() {
            g.copy_from_slice(&self.gram[slot * n * n..(slot + 1) * n * n]);
            if !hermitian_solve(&mut g, n, self.lambda, &mut x[slot * 3 * n..(slot + 1) * 3 * n], 3) {
                return Err(Error::SingularSystem(self.bins.flat_index(slot)));
            }
        }
        Ok(FdlModel { bins: self.bins.clone(), disparities: self.disparities.clone(), x })
    }
}

/// Fits an FDL model to `views` at angular coordinates `coords`.
pub fn fit_fdl(views: &[&View], coords: &[[f64; 2]], disparities: &[f64], lambda: f64) -> Result<FdlModel> {
    if views.is_empty() || views.len() != coords.len() {
        return Err(Error::DimensionMismatch(format!("{} views but {} coordinates", views.len(), coords.len())));
    }
    let (h, w) = views[0].dims();
    let mut sys = FdlSystem::new(h, w, disparities, lambda)?;
    for (v, &u) in views.iter().zip(coords) {
        sys.add_view(v, u)?;
    }
    sys.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(h: usize, w: usize, shift: [f64; 2]) -> View {
        let mut v = View::new(h, w);
        for ch in 0..3 {
            for r in 0..h {
                for c in 0..w {
                    let (y, x) = (r as f64 + shift[0], c as f64 + shift[1]);
                    let val = 0.5
                        + 0.2 * (TAU * (2.0 * y / h as f64 + 1.0 * x / w as f64) + ch as f64).cos()
                        + 0.1 * (TAU * (-1.0 * y / h as f64 + 3.0 * x / w as f64) + 0.3).sin();
                    v.set(ch, r, c, val);
                }
            }
        }
        v
    }

    #[test]
    fn bins_cover_spectrum() {
        for (h, w) in [(4, 6), (5, 7), (8, 3), (1, 1)] {
            let b = BinSet::new(h, w);
            let vals: Vec<Complex64> = (0..b.len()).map(|s| Complex64::new(s as f64, 1.0)).collect();
            let full = b.expand(&vals);
            assert_eq!(full.len(), h * w);
            // a real signal's spectrum is reproduced from the solved half
            let plane: Vec<f64> = (0..h * w).map(|i| ((i * 7) % 5) as f64).collect();
            let fft = Fft2::new(h, w);
            let spec = fft.forward_real(&plane);
            let solved: Vec<Complex64> = (0..b.len()).map(|s| spec[b.flat_index(s)]).collect();
            let back = b.expand(&solved);
            for (a, z) in back.iter().zip(&spec) {
                assert!((a - z).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn fft_round_trip() {
        let fft = Fft2::new(6, 9);
        let plane: Vec<f64> = (0..54).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = fft.inverse_real(fft.forward_real(&plane));
        for (a, b) in plane.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_solve_matches_direct() {
        let n = 3;
        let a = [
            Complex64::new(4.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(0.0, -0.5),
            Complex64::new(1.0, -1.0), Complex64::new(3.0, 0.0), Complex64::new(0.2, 0.1),
            Complex64::new(0.0, 0.5), Complex64::new(0.2, -0.1), Complex64::new(2.0, 0.0),
        ];
        let b = [Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.0), Complex64::new(0.5, 0.5)];
        let mut m = a;
        let mut x = b;
        assert!(hermitian_solve(&mut m, n, 0.0, &mut x, 1));
        for i in 0..n {
            let s: Complex64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((s - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_only_without_regularization() {
        let v = texture(6, 6, [0.0, 0.0]);
        let views = [&v, &v];
        let coords = [[0.0, 0.0], [0.0, 0.0]];
        assert!(matches!(fit_fdl(&views, &coords, &[-1.0, 1.0], 0.0), Err(Error::SingularSystem(_))));
        assert!(fit_fdl(&views, &coords, &[-1.0, 1.0], 1e-4).is_ok());
    }

    #[test]
    fn single_view_single_layer_is_its_spectrum() {
        let v = texture(6, 8, [0.0, 0.0]);
        let m = fit_fdl(&[&v], &[[0.0, 0.0]], &[0.7], 0.0).unwrap();
        let fft = Fft2::new(6, 8);
        for ch in 0..3 {
            let want = fft.forward_real(v.plane(ch));
            for (a, b) in m.layer_spectrum(0, ch).iter().zip(&want) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn zero_disparity_is_view_independent() {
        let v = texture(7, 7, [0.0, 0.0]);
        let m = fit_fdl(&[&v], &[[0.0, 0.0]], &[0.0], 1e-4).unwrap();
        let a = synthesize_view(&m, [0.0, 0.0]);
        let b = synthesize_view(&m, [3.0, -2.0]);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_disparity_held_out_view() {
        let (h, w, d) = (16, 20, 0.8);
        let coords: Vec<[f64; 2]> = vec![[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
        let views: Vec<View> = coords.iter().map(|u| texture(h, w, [d * u[0], d * u[1]])).collect();
        let refs: Vec<&View> = views.iter().collect();
        let m = fit_fdl(&refs, &coords, &[d], 1e-6).unwrap();
        let held = texture(h, w, [d * 0.5, d * -0.5]);
        let got = m.synthesize_unclamped([0.5, -0.5]);
        let mse = crate::metrics::mse(&held, &got);
        assert!(mse < 1e-10, "mse {mse}");
    }
}
