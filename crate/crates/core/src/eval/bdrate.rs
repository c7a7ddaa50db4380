//! Bjontegaard delta rate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BdMethod {
    /// Least-squares cubic in PSNR fitted to log2(rate).
    #[default]
    Cubic,
    /// Monotone piecewise-cubic Hermite interpolation.
    Pchip,
}

/// Average rate difference of `test` relative to `anchor` at equal PSNR, in
/// percent. Curves are `(rate, psnr)` pairs; negative values are savings.
pub fn bd_rate(anchor: &[(f64, f64)], test: &[(f64, f64)]) -> Result<f64> {
    bd_rate_with(anchor, test, BdMethod::Cubic)
}

pub fn bd_rate_with(anchor: &[(f64, f64)], test: &[(f64, f64)], method: BdMethod) -> Result<f64> {
    let a = prepare(anchor)?;
    let t = prepare(test)?;
    let lo = a.first().unwrap().0.max(t.first().unwrap().0);
    let hi = a.last().unwrap().0.min(t.last().unwrap().0);
    if !(hi > lo) {
        return Err(Error::NoOverlap);
    }
    let integral = |pts: &[(f64, f64)]| -> Result<f64> {
        match method {
            BdMethod::Cubic => {
                let (p, centre, scale) = cubic_fit(pts)?;
                let t = |x: f64| (x - centre) / scale;
                Ok(scale * (poly_integral(&p, t(hi)) - poly_integral(&p, t(lo))))
            }
            BdMethod::Pchip => Ok(pchip_integral(pts, lo, hi)),
        }
    };
    let delta = (integral(&t)? - integral(&a)?) / (hi - lo);
    Ok(100.0 * (2f64.powf(delta) - 1.0))
}

/// Validates and converts to `(psnr, log2 rate)` sorted by PSNR.
fn prepare(curve: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if curve.len() < 4 {
        return Err(Error::TooFewPoints(curve.len()));
    }
    let mut pts = Vec::with_capacity(curve.len());
    for &(rate, psnr) in curve {
        if !(rate > 0.0 && rate.is_finite() && psnr.is_finite()) {
            return Err(Error::InvalidConfig(format!("rate-distortion point ({rate}, {psnr}) is not usable")));
        }
        pts.push((psnr, rate.log2()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

/// Least-squares cubic through `(x, y)` in the variable `(x - centre) / scale`,
/// returned as `(c0..c3, centre, scale)`. PSNR values sit far from zero, so
/// the raw Vandermonde matrix is badly conditioned.
fn cubic_fit(pts: &[(f64, f64)]) -> Result<([f64; 4], f64, f64)> {
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    let centre = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let a = DMatrix::from_fn(pts.len(), 4, |i, j| ((pts[i].0 - centre) / scale).powi(j as i32));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let c = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidConfig(format!("cubic fit failed: {e}")))?;
    Ok(([c[0], c[1], c[2], c[3]], centre, scale))
}

fn poly_integral(c: &[f64; 4], x: f64) -> f64 {
    c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0
}

/// Fritsch-Carlson slopes for monotone cubic Hermite interpolation.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| if h[i] > 0.0 { (y[i + 1] - y[i]) / h[i] } else { 0.0 }).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        return vec![del[0]; 2];
    }
    for i in 1..n - 1 {
        if del[i - 1] * del[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], del[0], del[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    m
}

/// Integral over `[lo, hi]` of the PCHIP interpolant (`lo`, `hi` inside the
/// data range).
fn pchip_integral(pts: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    // collapse repeated abscissae
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for &(x, y) in pts {
        if xs.last() == Some(&x) {
            let l = ys.len() - 1;
            ys[l] = 0.5 * (ys[l] + y);
        } else {
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.len() < 2 {
        return ys[0] * (hi - lo);
    }
    let m = pchip_slopes(&xs, &ys);
    let mut total = 0.0;
    for i in 0..xs.len() - 1 {
        let (a, b) = (xs[i].max(lo), xs[i + 1].min(hi));
        if b <= a {
            continue;
        }
        let h = xs[i + 1] - xs[i];
        // antiderivative of the Hermite cubic in local t = (x - x_i) / h
        let prim = |x: f64| {
            let t = (x - xs[i]) / h;
            let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
            let h00 = t - t3 + t4 / 2.0;
            let h10 = t2 / 2.0 - 2.0 * t3 / 3.0 + t4 / 4.0;
            let h01 = t3 - t4 / 2.0;
            let h11 = -t3 / 3.0 + t4 / 4.0;
            h * (h00 * ys[i] + h10 * h * m[i] + h01 * ys[i + 1] + h11 * h * m[i + 1])
        };
        total += prim(b) - prim(a);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> Vec<(f64, f64)> {
        vec![(1000.0, 30.0), (2000.0, 33.0), (4000.0, 36.5), (8000.0, 39.0)]
    }

    #[test]
    fn identical_is_zero() {
        assert_eq!(bd_rate(&curve(), &curve()).unwrap(), 0.0);
        assert!(bd_rate_with(&curve(), &curve(), BdMethod::Pchip).unwrap().abs() < 1e-12);
    }

    #[test]
    fn halved_rate_is_minus_fifty() {
        let half: Vec<_> = curve().iter().map(|&(r, p)| (r / 2.0, p)).collect();
        for m in [BdMethod::Cubic, BdMethod::Pchip] {
            let v = bd_rate_with(&curve(), &half, m).unwrap();
            assert!((v + 50.0).abs() < 1e-9, "{m:?}: {v}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(bd_rate(&curve()[..3], &curve()), Err(Error::TooFewPoints(3))));
        let far: Vec<_> = curve().iter().map(|&(r, p)| (r, p + 20.0)).collect();
        assert!(matches!(bd_rate(&curve(), &far), Err(Error::NoOverlap)));
    }

    #[test]
    fn pchip_reproduces_linear_data() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let v = pchip_integral(&pts, 0.5, 3.5);
        assert!((v - (3.5f64.powi(2) + 3.5 - 0.25 - 0.5)).abs() < 1e-12);
    }
}
