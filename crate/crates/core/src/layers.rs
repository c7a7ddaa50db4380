//! Three multiplicative transmittance layers and the translate-and-multiply
//! renderer.
//!
//! Layers sit at depths `z = -1, 0, 1`. For view `(s, t)` a ray through
//! output pixel `(u, v)` crosses layer `z` at `(u + z*s, v + z*t)` and the
//! observed intensity is the product of the three transmittances. Layers are
//! padded by the largest `|s|`, `|t|` of the subset so that every translation
//! stays inside them.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lightfield::{View, ViewCoord};
use crate::pattern::ViewSubset;

pub const DEPTHS: [i32; 3] = [-1, 0, 1];

/// Layers `M_{-1}`, `M_0`, `M_1` for one view subset.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    height: usize,
    width: usize,
    s_max: usize,
    t_max: usize,
    layers: [View; 3],
}

impl LayerStack {
    /// Constant stack rendering `height x width` views for offsets up to
    /// `(s_max, t_max)`.
    pub fn constant(height: usize, width: usize, s_max: usize, t_max: usize, value: f64) -> Self {
        let (lh, lw) = (height + 2 * s_max, width + 2 * t_max);
        Self { height, width, s_max, t_max, layers: [0, 1, 2].map(|_| View::filled(lh, lw, value)) }
    }

    /// Wraps three layer images of size `(height + 2 s_max) x (width + 2 t_max)`.
    pub fn from_layers(height: usize, width: usize, s_max: usize, t_max: usize, layers: [View; 3]) -> Result<Self> {
        let dims = (height + 2 * s_max, width + 2 * t_max);
        if layers.iter().any(|l| l.dims() != dims) {
            return Err(Error::DimensionMismatch(format!(
                "layers must be {}x{} for {height}x{width} views with padding ({s_max}, {t_max})",
                dims.0, dims.1
            )));
        }
        if layers.iter().flat_map(|l| l.data()).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidConfig("layer transmittance outside [0, 1]".into()));
        }
        Ok(Self { height, width, s_max, t_max, layers })
    }

    /// View size rendered by this stack.
    pub fn view_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn layer_dims(&self) -> (usize, usize) {
        self.layers[0].dims()
    }

    pub fn padding(&self) -> (usize, usize) {
        (self.s_max, self.t_max)
    }

    /// Layer at depth `z` in `{-1, 0, 1}`.
    pub fn layer(&self, z: i32) -> &View {
        &self.layers[(z + 1) as usize]
    }

    pub fn layers(&self) -> &[View; 3] {
        &self.layers
    }

    pub fn into_layers(self) -> [View; 3] {
        self.layers
    }

    /// Writes `{prefix}_m-1.png`, `{prefix}_m0.png`, `{prefix}_m1.png`.
    pub fn write_pngs(&self, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (z, layer) in DEPTHS.iter().zip(&self.layers) {
            crate::io::write_view(layer, &dir.join(format!("{prefix}_m{z}.png")))?;
        }
        Ok(())
    }
}

/// Renders view `(s, t)`: `M_{-1}(u - s, v - t) * M_0(u, v) * M_1(u + s, v + t)`.
pub fn render_view(stack: &LayerStack, s: i32, t: i32) -> Result<View> {
    check_offset(stack, s, t)?;
    let (h, w) = stack.view_dims();
    let mut out = View::new(h, w);
    let (lw, lh) = (stack.layer_dims().1, stack.layer_dims().0);
    let (sm, tm) = (stack.s_max as i32, stack.t_max as i32);
    for ch in 0..3 {
        let planes = [stack.layers[0].plane(ch), stack.layers[1].plane(ch), stack.layers[2].plane(ch)];
        let dst = out.plane_mut(ch);
        for u in 0..h {
            let row = |z: i32| {
                let r = (u as i32 + sm + z * s) as usize;
                let c = (tm + z * t) as usize;
                &planes[(z + 1) as usize][r * lw + c..r * lw + c + w]
            };
            let (a, b, c) = (row(-1), row(0), row(1));
            let o = &mut dst[u * w..(u + 1) * w];
            for i in 0..w {
                o[i] = a[i] * b[i] * c[i];
            }
        }
        debug_assert_eq!(planes[0].len(), lh * lw);
    }
    Ok(out)
}

/// Renders every coordinate in order.
pub fn render_subset(stack: &LayerStack, coords: &[ViewCoord]) -> Result<Vec<View>> {
    coords.iter().map(|c| render_view(stack, c.s, c.t)).collect()
}

fn check_offset(stack: &LayerStack, s: i32, t: i32) -> Result<()> {
    if s.unsigned_abs() as usize > stack.s_max || t.unsigned_abs() as usize > stack.t_max {
        return Err(Error::TranslationOutOfBounds { s, t, s_max: stack.s_max, t_max: stack.t_max });
    }
    Ok(())
}

/// Settings for [`optimize_layers`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LayerOptConfig {
    pub max_iters: usize,
    /// Initial step on the logit parameters.
    pub step_size: f64,
    /// Stop once the relative loss decrease over a 10-step window falls
    /// below `10 * plateau_tol`.
    pub plateau_tol: f64,
    pub seed: u64,
}

impl Default for LayerOptConfig {
    fn default() -> Self {
        Self { max_iters: 2000, step_size: 0.05, plateau_tol: 1e-6, seed: 0 }
    }
}

impl LayerOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig("step_size must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a layer fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    /// Loss after initialization followed by the loss of every accepted step.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub rejected: usize,
    pub converged: bool,
}

impl OptimizeReport {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss")
    }
}

/// Mean squared reconstruction error of a subset as a function of layer
/// logits. Parameters are laid out like the three layer images back to
/// back; transmittance is `sigmoid(logit)`.
pub struct LayerObjective<'a> {
    subset: &'a ViewSubset,
    height: usize,
    width: usize,
    s_max: usize,
    t_max: usize,
}

impl<'a> LayerObjective<'a> {
    pub fn new(subset: &'a ViewSubset) -> Self {
        let (s_max, t_max) = subset.max_offsets();
        Self { subset, height: subset.height(), width: subset.width(), s_max, t_max }
    }

    pub fn layer_dims(&self) -> (usize, usize) {
        (self.height + 2 * self.s_max, self.width + 2 * self.t_max)
    }

    pub fn num_params(&self) -> usize {
        let (lh, lw) = self.layer_dims();
        9 * lh * lw
    }

    fn samples(&self) -> usize {
        self.subset.len() * 3 * self.height * self.width
    }

    /// Transmittances for the given logits.
    pub fn transmittance(params: &[f64]) -> Vec<f64> {
        params.iter().map(|&x| sigmoid(x)).collect()
    }

    pub fn stack(&self, params: &[f64]) -> LayerStack {
        let (lh, lw) = self.layer_dims();
        let n = 3 * lh * lw;
        let m = Self::transmittance(params);
        let layers = [0, 1, 2].map(|z| View::from_planar(lh, lw, m[z * n..(z + 1) * n].to_vec()).expect("sized"));
        LayerStack { height: self.height, width: self.width, s_max: self.s_max, t_max: self.t_max, layers }
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.evaluate(params, None)
    }

    /// Loss and its gradient with respect to the logits.
    pub fn loss_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(params, Some(grad))
    }

    fn evaluate(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (lh, lw) = self.layer_dims();
        let plane = lh * lw;
        let layer_len = 3 * plane;
        let m = Self::transmittance(params);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        let (h, w) = (self.height, self.width);
        let (sm, tm) = (self.s_max as i32, self.t_max as i32);
        let mut sse = 0.0;
        for (coord, view) in self.subset.entries() {
            let (s, t) = (coord.s, coord.t);
            for ch in 0..3 {
                let target = view.plane(ch);
                for u in 0..h {
                    let off = |z: i32| {
                        let r = (u as i32 + sm + z * s) as usize;
                        (z + 1) as usize * layer_len + ch * plane + r * lw + (tm + z * t) as usize
                    };
                    let (oa, ob, oc) = (off(-1), off(0), off(1));
                    let y = &target[u * w..(u + 1) * w];
                    match grad.as_deref_mut() {
                        None => {
                            for i in 0..w {
                                let r = m[oa + i] * m[ob + i] * m[oc + i] - y[i];
                                sse += r * r;
                            }
                        }
                        Some(g) => {
                            for i in 0..w {
                                let (a, b, c) = (m[oa + i], m[ob + i], m[oc + i]);
                                let r = a * b * c - y[i];
                                sse += r * r;
                                g[oa + i] += r * b * c;
                                g[ob + i] += r * a * c;
                                g[oc + i] += r * a * b;
                            }
                        }
                    }
                }
            }
        }
        let n = self.samples() as f64;
        if let Some(g) = grad {
            // d(mean r^2)/dM = 2 r (others) / n ; dM/dlogit = M (1 - M)
            for (gi, &mi) in g.iter_mut().zip(&m) {
                *gi *= 2.0 / n * mi * (1.0 - mi);
            }
        }
        sse / n
    }

    /// Deterministic starting point: every layer at the cube root of the
    /// per-channel mean, plus small seeded noise.
    pub fn initial_params(&self, seed: u64) -> Vec<f64> {
        let (lh, lw) = self.layer_dims();
        let plane = lh * lw;
        let mut means = [0.0; 3];
        for view in self.subset.views() {
            for (ch, mean) in means.iter_mut().enumerate() {
                *mean += view.plane(ch).iter().sum::<f64>();
            }
        }
        let count = (self.subset.len() * self.height * self.width).max(1) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).expect("valid normal");
        let mut params = vec![0.0; self.num_params()];
        for z in 0..3 {
            for ch in 0..3 {
                let base = logit((means[ch] / count).cbrt().clamp(0.01, 0.99));
                for p in &mut params[(z * 3 + ch) * plane..(z * 3 + ch + 1) * plane] {
                    *p = base + noise.sample(&mut rng);
                }
            }
        }
        params
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits three layers to a view subset by minimizing the mean squared
/// reconstruction error.
pub fn optimize_layers(subset: &ViewSubset, cfg: &LayerOptConfig) -> Result<LayerStack> {
    optimize_layers_with_report(subset, cfg).map(|(stack, _)| stack)
}

/// Adam-scaled descent on the layer logits. A step is accepted only if the
/// loss does not increase; a rejected step halves the step size.
pub fn optimize_layers_with_report(subset: &ViewSubset, cfg: &LayerOptConfig) -> Result<(LayerStack, OptimizeReport)> {
    cfg.validate()?;
    if subset.is_empty() {
        return Err(Error::InvalidConfig("cannot fit layers to an empty subset".into()));
    }
    let objective = LayerObjective::new(subset);
    let np = objective.num_params();
    let mut params = objective.initial_params(cfg.seed);
    let mut grad = vec![0.0; np];
    let mut loss = objective.loss_and_gradient(&params, &mut grad);

    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut candidate = vec![0.0; np];
    let mut cand_grad = vec![0.0; np];
    let mut step = cfg.step_size;
    let mut report = OptimizeReport { losses: vec![loss], iterations: 0, rejected: 0, converged: false };
    let mut accepted = 0i32;

    while report.iterations < cfg.max_iters {
        if loss <= 1e-14 {
            report.converged = true;
            break;
        }
        report.iterations += 1;
        let t = accepted + 1;
        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
        for i in 0..np {
            let g = grad[i];
            let a = beta1 * m1[i] + (1.0 - beta1) * g;
            let b = beta2 * m2[i] + (1.0 - beta2) * g * g;
            candidate[i] = params[i] - step * (a / c1) / ((b / c2).sqrt() + eps);
        }
        let cand_loss = objective.loss_and_gradient(&candidate, &mut cand_grad);
        if cand_loss <= loss {
            for i in 0..np {
                let g = grad[i];
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
            }
            std::mem::swap(&mut params, &mut candidate);
            std::mem::swap(&mut grad, &mut cand_grad);
            loss = cand_loss;
            accepted += 1;
            report.losses.push(loss);
            step = (step * 1.05).min(cfg.step_size * 4.0);
            let window = 10;
            if report.losses.len() > window {
                let old = report.losses[report.losses.len() - 1 - window];
                if old > 0.0 && (old - loss) / old < cfg.plateau_tol * window as f64 {
                    report.converged = true;
                    break;
                }
            }
        } else {
            report.rejected += 1;
            step *= 0.5;
            if step < 1e-12 {
                report.converged = true;
                break;
            }
        }
    }
    Ok((objective.stack(&params), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::AngularGrid;

    fn random_stack(h: usize, w: usize, s_max: usize, t_max: usize, seed: u64) -> LayerStack {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lh, lw) = (h + 2 * s_max, w + 2 * t_max);
        let layers = [0, 1, 2].map(|_| {
            View::from_planar(lh, lw, (0..3 * lh * lw).map(|_| rng.gen_range(0.3..1.0)).collect()).unwrap()
        });
        LayerStack::from_layers(h, w, s_max, t_max, layers).unwrap()
    }

    #[test]
    fn zero_shift_is_central_product() {
        let st = random_stack(4, 5, 1, 2, 3);
        let v = render_view(&st, 0, 0).unwrap();
        for ch in 0..3 {
            for u in 0..4 {
                for x in 0..5 {
                    let p: f64 = st.layers().iter().map(|l| l.get(ch, u + 1, x + 2)).product();
                    assert_eq!(v.get(ch, u, x), p);
                }
            }
        }
    }

    #[test]
    fn constant_layers_cube() {
        let st = LayerStack::constant(3, 3, 1, 1, 0.5);
        let v = render_view(&st, 1, -1).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.125));
    }

    #[test]
    fn single_pixel_moves_with_view() {
        let (h, w, sm, tm) = (6, 7, 2, 2);
        let mut layers = [0, 1, 2].map(|_| View::filled(h + 2 * sm, w + 2 * tm, 1.0));
        layers[0] = View::new(h + 2 * sm, w + 2 * tm);
        let (u0, v0) = (4usize, 5usize);
        layers[0].set(1, u0, v0, 1.0);
        let st = LayerStack::from_layers(h, w, sm, tm, layers).unwrap();
        for s in -2..=2 {
            for t in -2..=2 {
                let out = render_view(&st, s, t).unwrap();
                for u in 0..h {
                    for x in 0..w {
                        // output pixel (u, x) sits at layer coordinate (u + sm, x + tm)
                        let hit = (u + sm) as i32 == u0 as i32 + s && (x + tm) as i32 == v0 as i32 + t;
                        assert_eq!(out.get(1, u, x) != 0.0, hit, "view ({s},{t}) pixel ({u},{x})");
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_bounds_translation() {
        let st = LayerStack::constant(2, 2, 1, 0, 0.5);
        assert!(matches!(render_view(&st, 0, 1), Err(Error::TranslationOutOfBounds { .. })));
        assert!(render_view(&st, -1, 0).is_ok());
    }

    fn subset_from(stack: &LayerStack, grid: AngularGrid) -> ViewSubset {
        let coords: Vec<_> = grid.coords().collect();
        let views = render_subset(stack, &coords).unwrap();
        ViewSubset::new(grid, coords.into_iter().zip(views).collect()).unwrap()
    }

    #[test]
    fn constant_field_fits_exactly() {
        let g = AngularGrid::new(1, 1);
        let subset = subset_from(&LayerStack::constant(6, 6, 1, 1, 0.9), g);
        let (_, rep) = optimize_layers_with_report(&subset, &LayerOptConfig::default()).unwrap();
        assert!(rep.final_loss() < 1e-10, "{}", rep.final_loss());
    }

    #[test]
    fn black_field_fits_exactly() {
        let g = AngularGrid::new(1, 1);
        let subset = ViewSubset::new(g, g.coords().map(|c| (c, View::new(5, 5))).collect()).unwrap();
        let (_, rep) = optimize_layers_with_report(&subset, &LayerOptConfig::default()).unwrap();
        assert!(rep.final_loss() <= 1e-8);
    }

    #[test]
    fn refit_small_random_stack() {
        let g = AngularGrid::new(1, 1);
        let truth = random_stack(12, 12, 1, 1, 11);
        let subset = subset_from(&truth, g);
        let (_, rep) = optimize_layers_with_report(&subset, &LayerOptConfig::default()).unwrap();
        assert!(rep.final_loss() <= 1e-4, "loss {}", rep.final_loss());
        assert!(rep.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deterministic() {
        let g = AngularGrid::new(1, 1);
        let subset = subset_from(&random_stack(6, 6, 1, 1, 5), g);
        let cfg = LayerOptConfig { max_iters: 50, ..Default::default() };
        assert_eq!(optimize_layers(&subset, &cfg).unwrap(), optimize_layers(&subset, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let g = AngularGrid::new(0, 0);
        let subset = ViewSubset::new(g, vec![(ViewCoord::CENTER, View::new(2, 2))]).unwrap();
        let cfg = LayerOptConfig { max_iters: 0, ..Default::default() };
        assert!(optimize_layers(&subset, &cfg).is_err());
        let cfg = LayerOptConfig { step_size: 0.0, ..Default::default() };
        assert!(optimize_layers(&subset, &cfg).is_err());
    }
}
