//! YUV-PSNR between light fields.

use crate::error::Result;
use crate::lightfield::{LightField, View};

/// Luma/chroma weights used for the aggregate score, `(wY, wU, wV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YuvWeights {
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl Default for YuvWeights {
    fn default() -> Self {
        Self { y: 6.0, u: 1.0, v: 1.0 }
    }
}

impl YuvWeights {
    pub fn combine(&self, y: f64, u: f64, v: f64) -> f64 {
        (self.y * y + self.u * u + self.v * v) / (self.y + self.u + self.v)
    }
}

/// PSNR of one view pair, per plane, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewPsnr {
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsnrReport {
    pub per_view: Vec<ViewPsnr>,
    /// Mean of the weighted per-view scores; `+inf` when every view matches.
    pub aggregate: f64,
}

/// BT.709 full-range RGB -> (Y, U, V) with chroma centered at 0.5.
#[inline]
pub fn rgb_to_yuv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    (y, (b - y) / 1.8556 + 0.5, (r - y) / 1.5748 + 0.5)
}

/// PSNR for unit peak. Zero MSE maps to `+inf`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn view_yuv_psnr(a: &View, b: &View, weights: YuvWeights) -> ViewPsnr {
    let n = a.height() * a.width();
    let mut sse = [0.0f64; 3];
    let (ar, ag, ab) = (a.plane(0), a.plane(1), a.plane(2));
    let (br, bg, bb) = (b.plane(0), b.plane(1), b.plane(2));
    for i in 0..n {
        let (y0, u0, v0) = rgb_to_yuv(ar[i], ag[i], ab[i]);
        let (y1, u1, v1) = rgb_to_yuv(br[i], bg[i], bb[i]);
        sse[0] += (y0 - y1) * (y0 - y1);
        sse[1] += (u0 - u1) * (u0 - u1);
        sse[2] += (v0 - v1) * (v0 - v1);
    }
    let [y, u, v] = sse.map(|e| psnr_from_mse(e / n as f64));
    ViewPsnr { y, u, v, weighted: weights.combine(y, u, v) }
}

/// Per-view YUV-PSNR and its (6, 1, 1)-weighted average.
pub fn yuv_psnr(reference: &LightField, test: &LightField) -> Result<PsnrReport> {
    yuv_psnr_weighted(reference, test, YuvWeights::default())
}

pub fn yuv_psnr_weighted(reference: &LightField, test: &LightField, weights: YuvWeights) -> Result<PsnrReport> {
    reference.same_dims(test)?;
    let per_view: Vec<ViewPsnr> =
        reference.views().iter().zip(test.views()).map(|(a, b)| view_yuv_psnr(a, b, weights)).collect();
    let aggregate = mean_psnr(per_view.iter().map(|p| p.weighted));
    Ok(PsnrReport { per_view, aggregate })
}

/// Mean over views of the weighted PSNR for an arbitrary set of view pairs.
pub fn mean_view_psnr<'a>(pairs: impl Iterator<Item = (&'a View, &'a View)>) -> f64 {
    mean_psnr(pairs.map(|(a, b)| view_yuv_psnr(a, b, YuvWeights::default()).weighted))
}

fn mean_psnr(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Plain RGB mean squared error between two views.
pub fn mse(a: &View, b: &View) -> f64 {
    let d = a.data();
    let e = b.data();
    d.iter().zip(e).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / d.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::AngularGrid;

    #[test]
    fn identical_is_infinite() {
        let lf = LightField::from_fn(AngularGrid::new(1, 1), |c| View::filled(3, 3, 0.1 * (c.s + 2) as f64)).unwrap();
        let r = yuv_psnr(&lf, &lf).unwrap();
        assert!(r.aggregate.is_infinite() && r.aggregate > 0.0);
    }

    #[test]
    fn black_vs_white_luma_is_zero_db() {
        let a = View::filled(4, 4, 0.0);
        let b = View::filled(4, 4, 1.0);
        let p = view_yuv_psnr(&a, &b, YuvWeights::default());
        assert!(p.y.abs() < 1e-12);
        // Gray inputs have identical chroma.
        assert!(p.u.is_infinite() && p.v.is_infinite());
    }

    #[test]
    fn weighted_mean() {
        let w = YuvWeights::default();
        assert!((w.combine(40.0, 50.0, 50.0) - 42.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_dimension_checked() {
        let g = AngularGrid::new(1, 1);
        let a = LightField::from_fn(g, |c| View::filled(2, 2, 0.3 + 0.01 * c.s as f64)).unwrap();
        let b = LightField::from_fn(g, |c| View::filled(2, 2, 0.35 + 0.02 * c.t as f64)).unwrap();
        let ab = yuv_psnr(&a, &b).unwrap().aggregate;
        let ba = yuv_psnr(&b, &a).unwrap().aggregate;
        assert_eq!(ab, ba);
        let c = LightField::from_fn(g, |_| View::new(3, 2)).unwrap();
        assert!(yuv_psnr(&a, &c).is_err());
    }
}
