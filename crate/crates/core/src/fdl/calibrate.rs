//! Joint estimation of view coordinates and layer disparities.
//!
//! The objective is the regularized regression residual summed over a band
//! of low frequencies, with the layer spectra eliminated per frequency:
//! `E = sum_f min_x |A x - b|^2 + lambda |x|^2`. Its gradient with respect to
//! the entries of `A` follows from the envelope theorem, so no derivative of
//! the inner solve is needed.
//!
//! `E` is unchanged by a common translation of all coordinates and by the
//! rescaling `u -> a u, d -> d / a`. The view nearest the grid centre is
//! pinned to its nominal coordinate and the RMS distance to it is held at its
//! nominal value.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{hermitian_solve, phase_row, Fft2, FdlConfig, TAU};
use crate::error::{Error, Result};
use crate::lightfield::View;
use crate::pattern::ViewSubset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Frequency radii (cycles per pixel) of the coarse-to-fine stages.
    pub band_radii: Vec<f64>,
    /// Cap on the number of frequencies used, lowest first.
    pub max_bins: usize,
    pub max_iters_per_stage: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Also refine the view coordinates, not only the disparities.
    pub refine_coords: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            band_radii: vec![0.05, 0.1, 0.2],
            max_bins: 160,
            max_iters_per_stage: 40,
            initial_step: 0.1,
            min_step: 1e-4,
            refine_coords: true,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.band_radii.is_empty() || self.band_radii.iter().any(|&r| !(r > 0.0 && r <= 0.5)) {
            return Err(Error::InvalidConfig("calibration band radii must lie in (0, 0.5]".into()));
        }
        if !(self.initial_step > 0.0 && self.min_step > 0.0) {
            return Err(Error::InvalidConfig("calibration steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationStatus {
    Converged,
    BudgetExhausted,
    /// Fewer than two views: the initial parameters are returned unchanged.
    Unidentifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Angular coordinate of each input view, in input order.
    pub coords: Vec<[f64; 2]>,
    /// Strictly increasing.
    pub disparities: Vec<f64>,
    pub residual_energy: f64,
    pub status: CalibrationStatus,
    /// Objective after every accepted step, per stage.
    pub stage_losses: Vec<Vec<f64>>,
}

impl CalibrationResult {
    pub fn nominal(coords: &[[f64; 2]], disparities: Vec<f64>) -> Self {
        Self {
            coords: coords.to_vec(),
            disparities,
            residual_energy: f64::NAN,
            status: CalibrationStatus::Unidentifiable,
            stage_losses: Vec::new(),
        }
    }
}

struct Problem {
    /// Per bin: signed frequency and `b[view][channel]`.
    bins: Vec<([f64; 2], Vec<Complex64>)>,
    views: usize,
    lambda: f64,
}

struct Eval {
    energy: f64,
    grad_u: Vec<[f64; 2]>,
    grad_d: Vec<f64>,
}

impl Problem {
    fn new(views: &[&View], lambda: f64, radius: f64, max_bins: usize) -> Self {
        let (h, w) = views[0].dims();
        let fft = Fft2::new(h, w);
        let mut picked = Vec::new();
        for kr in 0..h {
            for kc in 0..w {
                let f = [super::signed_frequency(kr, h), super::signed_frequency(kc, w)];
                let upper = f[0] > 0.0 || (f[0] == 0.0 && f[1] > 0.0);
                let on_nyquist = 2 * kr == h || 2 * kc == w;
                let r = f[0].hypot(f[1]);
                if upper && !on_nyquist && r <= radius {
                    picked.push((r, kr * w + kc, f));
                }
            }
        }
        picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        picked.truncate(max_bins);
        let spectra: Vec<[Vec<Complex64>; 3]> =
            views.iter().map(|v| [0, 1, 2].map(|ch| fft.forward_real(v.plane(ch)))).collect();
        let bins = picked
            .into_iter()
            .map(|(_, idx, f)| {
                let b = spectra.iter().flat_map(|s| (0..3).map(move |ch| s[ch][idx])).collect();
                (f, b)
            })
            .collect();
        Self { bins, views: views.len(), lambda }
    }

    fn subset(&self, radius: f64) -> Vec<usize> {
        (0..self.bins.len()).filter(|&i| self.bins[i].0[0].hypot(self.bins[i].0[1]) <= radius).collect()
    }

    fn eval(&self, bins: &[usize], u: &[[f64; 2]], d: &[f64], grad: bool) -> Result<Eval> {
        let (j, n) = (self.views, d.len());
        let lam = self.lambda;
        let mut out = Eval { energy: 0.0, grad_u: vec![[0.0; 2]; j], grad_d: vec![0.0; n] };
        let mut a = vec![Complex64::default(); j * n];
        let mut theta = vec![0.0; j];
        let dual = j <= n;
        let m = if dual { j } else { n };
        let mut gram = vec![Complex64::default(); m * m];
        let mut sol = vec![Complex64::default(); 3 * m];
        let mut x = vec![Complex64::default(); 3 * n];
        let mut r = vec![Complex64::default(); 3 * j];
        for &bi in bins {
            let (f, b) = &self.bins[bi];
            for v in 0..j {
                theta[v] = u[v][0] * f[0] + u[v][1] * f[1];
                phase_row(d, theta[v], &mut a[v * n..(v + 1) * n]);
            }
            gram.iter_mut().for_each(|g| *g = Complex64::default());
            if dual {
                // A A^H, lower triangle
                for p in 0..j {
                    for q in 0..=p {
                        gram[p * j + q] = (0..n).map(|k| a[p * n + k] * a[q * n + k].conj()).sum();
                    }
                }
                for ch in 0..3 {
                    for v in 0..j {
                        sol[ch * j + v] = b[v * 3 + ch];
                    }
                }
            } else {
                for p in 0..n {
                    for q in 0..=p {
                        gram[p * n + q] = (0..j).map(|v| a[v * n + p].conj() * a[v * n + q]).sum();
                    }
                }
                for ch in 0..3 {
                    for k in 0..n {
                        sol[ch * n + k] = (0..j).map(|v| a[v * n + k].conj() * b[v * 3 + ch]).sum();
                    }
                }
            }
            if !hermitian_solve(&mut gram, m, lam, &mut sol, 3) {
                return Err(Error::SingularSystem(bi));
            }
            for ch in 0..3 {
                if dual {
                    for k in 0..n {
                        x[ch * n + k] = (0..j).map(|v| a[v * n + k].conj() * sol[ch * j + v]).sum();
                    }
                    for v in 0..j {
                        r[ch * j + v] = -sol[ch * j + v] * lam;
                    }
                } else {
                    x[ch * n..(ch + 1) * n].copy_from_slice(&sol[ch * n..(ch + 1) * n]);
                    for v in 0..j {
                        let ax: Complex64 = (0..n).map(|k| a[v * n + k] * x[ch * n + k]).sum();
                        r[ch * j + v] = ax - b[v * 3 + ch];
                    }
                }
                out.energy += r[ch * j..(ch + 1) * j].iter().map(|z| z.norm_sqr()).sum::<f64>()
                    + lam * x[ch * n..(ch + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            if grad {
                for v in 0..j {
                    for k in 0..n {
                        let p: Complex64 = (0..3).map(|ch| r[ch * j + v].conj() * a[v * n + k] * x[ch * n + k]).sum();
                        let c = -2.0 * TAU * p.im;
                        out.grad_u[v][0] += c * d[k] * f[0];
                        out.grad_u[v][1] += c * d[k] * f[1];
                        out.grad_d[k] += c * theta[v];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn pinned_index(nominal: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (i, u) in nominal.iter().enumerate() {
        if u[0].hypot(u[1]) < nominal[best][0].hypot(nominal[best][1]) {
            best = i;
        }
    }
    best
}

fn rms_from(u: &[[f64; 2]], p: usize) -> f64 {
    (u.iter().map(|x| (x[0] - u[p][0]).powi(2) + (x[1] - u[p][1]).powi(2)).sum::<f64>() / u.len() as f64).sqrt()
}

/// Applies the gauge and ordering constraints in place.
fn normalize(u: &mut [[f64; 2]], d: &mut [f64], nominal: &[[f64; 2]], pin: usize, target_rms: f64, refine: bool) {
    if refine {
        let shift = [nominal[pin][0] - u[pin][0], nominal[pin][1] - u[pin][1]];
        for x in u.iter_mut() {
            x[0] += shift[0];
            x[1] += shift[1];
        }
        let rms = rms_from(u, pin);
        if rms > 0.0 && target_rms > 0.0 {
            let a = target_rms / rms;
            let p = u[pin];
            for x in u.iter_mut() {
                x[0] = p[0] + a * (x[0] - p[0]);
                x[1] = p[1] + a * (x[1] - p[1]);
            }
            d.iter_mut().for_each(|v| *v /= a);
        }
    }
    d.sort_by(f64::total_cmp);
    for k in 1..d.len() {
        if d[k] <= d[k - 1] {
            d[k] = d[k - 1] + 1e-9 * (1.0 + d[k - 1].abs());
        }
    }
}

/// Calibrates `views` starting from their nominal grid coordinates and the
/// configured disparity range, or from `init` when given.
pub fn calibrate(
    views: &[&View],
    nominal: &[[f64; 2]],
    cfg: &FdlConfig,
    init: Option<&CalibrationResult>,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    if views.len() != nominal.len() {
        return Err(Error::DimensionMismatch(format!("{} views but {} coordinates", views.len(), nominal.len())));
    }
    if let Some(v) = views.iter().find(|v| v.dims() != views[0].dims()) {
        return Err(Error::DimensionMismatch(format!("view of size {:?} in calibration set", v.dims())));
    }
    let (mut u, mut d) = match init {
        Some(r) => {
            if r.coords.len() != views.len() || r.disparities.len() != cfg.n {
                return Err(Error::InvalidConfig(format!(
                    "initial calibration has {} coordinates and {} disparities, need {} and {}",
                    r.coords.len(),
                    r.disparities.len(),
                    views.len(),
                    cfg.n
                )));
            }
            (r.coords.clone(), r.disparities.clone())
        }
        None => (nominal.to_vec(), cfg.initial_disparities()),
    };
    if views.len() < 2 {
        let mut r = CalibrationResult::nominal(&u, d);
        r.status = CalibrationStatus::Unidentifiable;
        return Ok(r);
    }

    let cal = &cfg.calibration;
    let pin = pinned_index(nominal);
    let target_rms = rms_from(nominal, pin);
    let refine = cal.refine_coords;
    normalize(&mut u, &mut d, nominal, pin, target_rms, refine);

    let r_max = cal.band_radii.iter().cloned().fold(0.0, f64::max);
    let problem = Problem::new(views, cfg.lambda, r_max, cal.max_bins);
    let mut stage_losses = Vec::new();
    let mut converged = false;
    let mut energy = 0.0;
    for &radius in &cal.band_radii {
        let bins = problem.subset(radius);
        let mut cur = problem.eval(&bins, &u, &d, true)?;
        let mut losses = vec![cur.energy];
        let mut step = cal.initial_step;
        converged = false;
        for _ in 0..cal.max_iters_per_stage {
            let gu = cur.grad_u.iter().enumerate().filter(|(i, _)| *i != pin).flat_map(|(_, g)| g.iter()).fold(0.0f64, |m, g| m.max(g.abs()));
            let gd = cur.grad_d.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gd == 0.0 && (!refine || gu == 0.0) {
                converged = true;
                break;
            }
            let mut cu = u.clone();
            let mut cd = d.clone();
            if refine && gu > 0.0 {
                for (i, x) in cu.iter_mut().enumerate() {
                    if i != pin {
                        x[0] -= step * cur.grad_u[i][0] / gu;
                        x[1] -= step * cur.grad_u[i][1] / gu;
                    }
                }
            }
            if gd > 0.0 {
                for (k, x) in cd.iter_mut().enumerate() {
                    *x -= step * cur.grad_d[k] / gd;
                }
            }
            normalize(&mut cu, &mut cd, nominal, pin, target_rms, refine);
            let cand = problem.eval(&bins, &cu, &cd, true)?;
            if cand.energy <= cur.energy {
                u = cu;
                d = cd;
                cur = cand;
                losses.push(cur.energy);
                step = (step * 1.5).min(1.0);
            } else {
                step *= 0.5;
                if step < cal.min_step {
                    converged = true;
                    break;
                }
            }
        }
        energy = cur.energy;
        stage_losses.push(losses);
    }
    Ok(CalibrationResult {
        coords: u,
        disparities: d,
        residual_energy: energy,
        status: if converged { CalibrationStatus::Converged } else { CalibrationStatus::BudgetExhausted },
        stage_losses,
    })
}

/// [`calibrate`] on a subset, using its grid coordinates as nominal values.
pub fn calibrate_subset(subset: &ViewSubset, cfg: &FdlConfig, init: Option<&CalibrationResult>) -> Result<CalibrationResult> {
    let views: Vec<&View> = subset.views().collect();
    let nominal: Vec<[f64; 2]> = subset.coords().iter().map(|c| [c.s as f64, c.t as f64]).collect();
    calibrate(&views, &nominal, cfg, init)
}
