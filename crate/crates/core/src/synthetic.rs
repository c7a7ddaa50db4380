//! Seeded synthetic light fields with known structure.
//!
//! Textures are sums of sinusoids evaluated analytically at shifted
//! positions, so a view at angular coordinate `u` of a plane with disparity
//! `d` is exactly the texture translated by `d u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::layers::LayerStack;
use crate::lightfield::{AngularGrid, LightField, View, ViewCoord};

const TAU: f64 = std::f64::consts::TAU;

/// A band-limited colour texture.
#[derive(Debug, Clone)]
pub struct Texture {
    base: [f64; 3],
    /// Frequency (cycles per pixel, row/col), amplitude and phase per channel.
    waves: Vec<([f64; 2], [f64; 3], [f64; 3])>,
}

impl Texture {
    /// Random texture with frequencies up to `max_freq` cycles per pixel.
    pub fn random(rng: &mut impl Rng, waves: usize, max_freq: f64) -> Self {
        let base = [rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65)];
        let per = 0.3 / waves as f64;
        let waves = (0..waves)
            .map(|_| {
                let r = rng.gen_range(0.2..1.0) * max_freq;
                let a = rng.gen_range(0.0..TAU);
                let amp = [0; 3].map(|_| rng.gen_range(0.3..1.0) * per);
                let ph = [0; 3].map(|_| rng.gen_range(0.0..TAU));
                ([r * a.cos(), r * a.sin()], amp, ph)
            })
            .collect();
        Self { base, waves }
    }

    /// Random texture that is periodic over an `h x w` frame: every
    /// frequency is a whole number of cycles per frame.
    pub fn periodic(rng: &mut impl Rng, h: usize, w: usize, waves: usize, max_cycles: i32) -> Self {
        let mut t = Self::random(rng, waves, 0.1);
        for wv in &mut t.waves {
            let (kr, kc) = loop {
                let kr = rng.gen_range(-max_cycles..=max_cycles);
                let kc = rng.gen_range(-max_cycles..=max_cycles);
                if (kr, kc) != (0, 0) {
                    break (kr, kc);
                }
            };
            wv.0 = [kr as f64 / h as f64, kc as f64 / w as f64];
        }
        t
    }

    pub fn sample(&self, ch: usize, y: f64, x: f64) -> f64 {
        self.base[ch]
            + self.waves.iter().map(|(f, a, p)| a[ch] * (TAU * (f[0] * y + f[1] * x) + p[ch]).cos()).sum::<f64>()
    }

    /// The `h x w` view of this texture translated by `shift` pixels.
    pub fn render(&self, h: usize, w: usize, shift: [f64; 2]) -> View {
        let mut v = View::new(h, w);
        for ch in 0..3 {
            for r in 0..h {
                for c in 0..w {
                    v.set(ch, r, c, self.sample(ch, r as f64 + shift[0], c as f64 + shift[1]));
                }
            }
        }
        v
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Background plane plus a soft-edged disc in front of it.
#[derive(Debug, Clone)]
pub struct LayeredScene {
    pub background: Texture,
    pub background_disparity: f64,
    pub foreground: Texture,
    pub foreground_disparity: f64,
    pub disc_center: [f64; 2],
    pub disc_radius: f64,
}

impl LayeredScene {
    pub fn random(h: usize, w: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            background: Texture::random(&mut rng, 6, 0.08),
            background_disparity: rng.gen_range(-0.7..-0.3),
            foreground: Texture::random(&mut rng, 4, 0.12),
            foreground_disparity: rng.gen_range(0.4..0.9),
            disc_center: [h as f64 * rng.gen_range(0.4..0.6), w as f64 * rng.gen_range(0.4..0.6)],
            disc_radius: h.min(w) as f64 * rng.gen_range(0.2..0.3),
        }
    }

    pub fn view(&self, h: usize, w: usize, u: ViewCoord) -> View {
        let (s, t) = (u.s as f64, u.t as f64);
        let (db, df) = (self.background_disparity, self.foreground_disparity);
        let mut v = View::new(h, w);
        for r in 0..h {
            for c in 0..w {
                let (fy, fx) = (r as f64 + df * s, c as f64 + df * t);
                let dist = (fy - self.disc_center[0]).hypot(fx - self.disc_center[1]);
                let alpha = 1.0 - smoothstep(self.disc_radius - 1.5, self.disc_radius + 1.5, dist);
                let (by, bx) = (r as f64 + db * s, c as f64 + db * t);
                for ch in 0..3 {
                    let val = alpha * self.foreground.sample(ch, fy, fx) + (1.0 - alpha) * self.background.sample(ch, by, bx);
                    v.set(ch, r, c, val.clamp(0.0, 1.0));
                }
            }
        }
        v
    }

    pub fn light_field(&self, rows: usize, cols: usize, h: usize, w: usize) -> Result<LightField> {
        let grid = AngularGrid::from_dims(rows, cols)?;
        LightField::from_fn(grid, |c| self.view(h, w, c))
    }
}

/// 3x3 views of 32x32 pixels.
pub fn fixture_3x3(seed: u64) -> LightField {
    LayeredScene::random(32, 32, seed).light_field(3, 3, 32, 32).expect("valid fixture")
}

/// 9x9 views of 56x56 pixels. Layer stacks for its subsets are at least 60
/// pixels wide, so every rank up to 60 is admissible.
pub fn fixture_9x9(seed: u64) -> LightField {
    LayeredScene::random(56, 56, seed).light_field(9, 9, 56, 56).expect("valid fixture")
}

/// Every view identical: a scene without disparity.
pub fn constant_scene(rows: usize, cols: usize, h: usize, w: usize, seed: u64) -> Result<LightField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Texture::random(&mut rng, 5, 0.1).render(h, w, [0.0, 0.0]);
    LightField::from_fn(AngularGrid::from_dims(rows, cols)?, |_| v.clone())
}

/// Sum of periodic textures, one per disparity, viewed at each coordinate:
/// an exact FDL model.
pub fn planted_fdl_views(h: usize, w: usize, disparities: &[f64], coords: &[[f64; 2]], seed: u64) -> Vec<View> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let textures: Vec<Texture> = disparities.iter().map(|_| Texture::periodic(&mut rng, h, w, 4, 3)).collect();
    let scale = 1.0 / disparities.len() as f64;
    coords
        .iter()
        .map(|u| {
            let mut v = View::new(h, w);
            for (tex, &d) in textures.iter().zip(disparities) {
                let layer = tex.render(h, w, [d * u[0], d * u[1]]);
                for (o, x) in v.data_mut().iter_mut().zip(layer.data()) {
                    *o += scale * x;
                }
            }
            v
        })
        .collect()
}

/// Random layer stack with values in `[0.05, 0.95]`.
pub fn random_layer_stack(h: usize, w: usize, s_max: usize, t_max: usize, seed: u64) -> LayerStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lh, lw) = (h + 2 * s_max, w + 2 * t_max);
    let layers = [0; 3].map(|_| {
        let data = (0..3 * lh * lw)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (0.6 + 0.15 * z).clamp(0.05, 0.95)
            })
            .collect();
        View::from_planar(lh, lw, data).expect("layer dims")
    });
    LayerStack::from_layers(h, w, s_max, t_max, layers).expect("valid stack")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_in_range() {
        let a = fixture_3x3(1);
        let b = fixture_3x3(1);
        assert_eq!(a.views(), b.views());
        assert!(a.views().iter().flat_map(|v| v.data()).all(|&x| (0.0..=1.0).contains(&x)));
        assert_ne!(a.views()[0], a.views()[8]);
    }

    #[test]
    fn planted_views_shift_exactly() {
        let v = planted_fdl_views(8, 10, &[0.5], &[[0.0, 0.0], [2.0, 0.0]], 3);
        // shifting by d u = 1 row
        for ch in 0..3 {
            for r in 0..7 {
                for c in 0..10 {
                    assert!((v[1].get(ch, r, c) - v[0].get(ch, r + 1, c)).abs() < 1e-12);
                }
            }
        }
    }
}
