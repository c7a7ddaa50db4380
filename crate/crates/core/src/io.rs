//! Reading and writing light fields as directories of view images.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Rgb};
use regex::Regex;

use crate::error::{Error, Result};
use crate::lightfield::{AngularGrid, LightField, View, ViewCoord};

/// File-name convention for views.
///
/// A descriptor is a file-name template with placeholder tokens:
///
/// * `{r}`, `{c}`: zero- or one-based row/column indices (the smallest index
///   found on disk is the top-left view);
/// * `{s}`, `{t}`: signed angular coordinates centered on the middle view;
/// * `{ext}`: `png` or `ppm`.
///
/// `"view_{r}_{c}.png"` matches `view_0_0.png` ... `view_8_8.png`.
#[derive(Debug, Clone)]
pub struct Layout {
    descriptor: String,
    regex: Regex,
    signed: bool,
}

impl Layout {
    pub const DEFAULT: &'static str = "view_{r}_{c}.{ext}";

    pub fn parse(descriptor: &str) -> Result<Self> {
        let bad = |why: &str| Error::BadLayout(descriptor.to_string(), why.to_string());
        let has = |tok: &str| descriptor.contains(tok);
        let signed = match (has("{r}") && has("{c}"), has("{s}") && has("{t}")) {
            (true, false) => false,
            (false, true) => true,
            _ => return Err(bad("needs exactly one of the token pairs {r}/{c} or {s}/{t}")),
        };
        let mut pattern = String::from("^");
        let mut rest = descriptor;
        while let Some(open) = rest.find('{') {
            pattern.push_str(&regex::escape(&rest[..open]));
            let close = rest[open..].find('}').ok_or_else(|| bad("unclosed `{`"))? + open;
            pattern.push_str(match &rest[open + 1..close] {
                "r" => r"(?P<r>\d+)",
                "c" => r"(?P<c>\d+)",
                "s" => r"(?P<s>-?\d+)",
                "t" => r"(?P<t>-?\d+)",
                "ext" => r"(?:png|ppm|PNG|PPM)",
                other => return Err(bad(&format!("unknown token {{{other}}}"))),
            });
            rest = &rest[close + 1..];
        }
        pattern.push_str(&regex::escape(rest));
        pattern.push('$');
        let regex = Regex::new(&pattern).map_err(|e| bad(&e.to_string()))?;
        Ok(Self { descriptor: descriptor.to_string(), regex, signed })
    }

    /// Extracts `(row, col)` (or `(s, t)` for signed layouts) from a file name.
    fn indices(&self, name: &str) -> Option<(i64, i64)> {
        let caps = self.regex.captures(name)?;
        let (a, b) = if self.signed { ("s", "t") } else { ("r", "c") };
        Some((caps[a].parse().ok()?, caps[b].parse().ok()?))
    }

    /// File name of the view at `coord` (written files are always PNG).
    pub fn file_name(&self, grid: AngularGrid, coord: ViewCoord) -> String {
        let (a, b) = if self.signed {
            (coord.s as i64, coord.t as i64)
        } else {
            ((coord.s + grid.s_radius as i32) as i64, (coord.t + grid.t_radius as i32) as i64)
        };
        self.descriptor
            .replace("{r}", &a.to_string())
            .replace("{c}", &b.to_string())
            .replace("{s}", &a.to_string())
            .replace("{t}", &b.to_string())
            .replace("{ext}", "png")
    }
}

impl Default for Layout {
    fn default() -> Self {
        Self::parse(Self::DEFAULT).expect("default layout parses")
    }
}

/// Loads every view in `root` matching `layout` into a complete light field
/// with samples normalized to `[0, 1]`.
///
/// Files that do not match the layout are ignored unless they carry an image
/// extension, in which case they are reported as `UnparseableName`.
pub fn load_lightfield(root: &Path, layout: &Layout) -> Result<LightField> {
    let mut found: HashMap<(i64, i64), PathBuf> = HashMap::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        match layout.indices(&name) {
            Some(idx) => {
                found.insert(idx, path);
            }
            None => {
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
                if ext == "png" || ext == "ppm" {
                    return Err(Error::UnparseableName(name));
                }
            }
        }
    }
    if found.is_empty() {
        return Err(Error::DimensionMismatch(format!("no views found in {}", root.display())));
    }
    let (min_a, max_a) = bounds(found.keys().map(|k| k.0));
    let (min_b, max_b) = bounds(found.keys().map(|k| k.1));
    let grid = AngularGrid::from_dims((max_a - min_a + 1) as usize, (max_b - min_b + 1) as usize)?;
    // Signed layouts must already be centered.
    let (off_a, off_b) = if layout.signed { (0, 0) } else { (min_a + grid.s_radius as i64, min_b + grid.t_radius as i64) };
    if layout.signed && (min_a != -(grid.s_radius as i64) || min_b != -(grid.t_radius as i64)) {
        return Err(Error::DimensionMismatch("signed view coordinates are not centered on zero".into()));
    }

    let mut views = Vec::with_capacity(grid.len());
    for coord in grid.coords() {
        let key = (coord.s as i64 + off_a, coord.t as i64 + off_b);
        let path = found.get(&key).ok_or(Error::MissingView { s: coord.s, t: coord.t })?;
        views.push(read_view(path)?);
    }
    LightField::new(grid, views)
}

fn bounds(it: impl Iterator<Item = i64>) -> (i64, i64) {
    it.fold((i64::MAX, i64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Decodes one image into a view with samples in `[0, 1]`.
pub fn read_view(path: &Path) -> Result<View> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
    let sixteen = matches!(
        img.color(),
        image::ColorType::Rgb16 | image::ColorType::Rgba16 | image::ColorType::L16 | image::ColorType::La16
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut view = View::new(h, w);
    if sixteen {
        let buf = img.to_rgb16();
        for (x, y, px) in buf.enumerate_pixels() {
            for ch in 0..3 {
                view.set(ch, y as usize, x as usize, px[ch] as f64 / 65535.0);
            }
        }
    } else {
        let buf = img.to_rgb8();
        for (x, y, px) in buf.enumerate_pixels() {
            for ch in 0..3 {
                view.set(ch, y as usize, x as usize, px[ch] as f64 / 255.0);
            }
        }
    }
    Ok(view)
}

/// Writes a view as an 8-bit RGB PNG (values clamped, rounded to nearest).
pub fn write_view(view: &View, path: &Path) -> Result<()> {
    let (h, w) = view.dims();
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Rgb([0, 1, 2].map(|ch| to_u8(view.get(ch, y as usize, x as usize))))
    });
    DynamicImage::ImageRgb8(img)
        .save(path)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes every view of `lf` into `dir` (created if needed) using `layout`.
pub fn write_lightfield(lf: &LightField, dir: &Path, layout: &Layout) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (coord, view) in lf.iter() {
        write_view(view, &dir.join(layout.file_name(lf.grid(), coord)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: AngularGrid) -> LightField {
        LightField::from_fn(grid, |c| {
            let mut v = View::new(4, 5);
            for ch in 0..3 {
                for u in 0..4 {
                    for x in 0..5 {
                        let k = (c.s * 31 + c.t * 7 + (ch * 50 + u * 5 + x) as i32).rem_euclid(256);
                        v.set(ch, u, x, k as f64 / 255.0);
                    }
                }
            }
            v
        })
        .unwrap()
    }

    #[test]
    fn layout_parsing() {
        let l = Layout::parse("view_{r}_{c}.png").unwrap();
        assert_eq!(l.indices("view_3_12.png"), Some((3, 12)));
        assert_eq!(l.indices("view_3_12.ppm"), None);
        let l = Layout::parse("{s}/{t}.{ext}").unwrap();
        assert_eq!(l.indices("-2/3.ppm"), Some((-2, 3)));
        assert!(Layout::parse("view_{r}.png").is_err());
        assert!(Layout::parse("view_{r}_{c}_{q}.png").is_err());
    }

    #[test]
    fn write_then_reload_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(AngularGrid::new(4, 4));
        let layout = Layout::parse("view_{r}_{c}.png").unwrap();
        write_lightfield(&lf, dir.path(), &layout).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 81);
        let back = load_lightfield(dir.path(), &layout).unwrap();
        assert_eq!(back.grid(), AngularGrid::new(4, 4));
        assert_eq!(back, lf);
    }

    #[test]
    fn missing_view_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(AngularGrid::new(4, 4));
        let layout = Layout::default();
        write_lightfield(&lf, dir.path(), &layout).unwrap();
        fs::remove_file(dir.path().join("view_2_7.png")).unwrap();
        match load_lightfield(dir.path(), &layout) {
            Err(Error::MissingView { s, t }) => assert_eq!((s, t), (-2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_image_name() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(AngularGrid::new(1, 1));
        let layout = Layout::default();
        write_lightfield(&lf, dir.path(), &layout).unwrap();
        fs::copy(dir.path().join("view_0_0.png"), dir.path().join("stray.png")).unwrap();
        assert!(matches!(load_lightfield(dir.path(), &layout), Err(Error::UnparseableName(n)) if n == "stray.png"));
    }

    #[test]
    fn mismatched_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(AngularGrid::new(1, 1));
        let layout = Layout::default();
        write_lightfield(&lf, dir.path(), &layout).unwrap();
        write_view(&View::new(3, 3), &dir.path().join("view_1_1.png")).unwrap();
        assert!(matches!(load_lightfield(dir.path(), &layout), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn inner_crop_of_fifteen() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(AngularGrid::new(7, 7));
        let layout = Layout::parse("{r}_{c}.{ext}").unwrap();
        write_lightfield(&lf, dir.path(), &layout).unwrap();
        let inner = load_lightfield(dir.path(), &layout).unwrap().crop_angular(9, 9).unwrap();
        assert_eq!(inner.grid().rows(), 9);
        assert_eq!(inner.view(ViewCoord::new(4, -4)), lf.view(ViewCoord::new(4, -4)));
    }
}
