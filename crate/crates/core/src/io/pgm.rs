//! Binary graymap (P5) rendering of density fields with ray overlays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ray::RayWorldline;
use crate::units::{DensityField, SpacetimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Scale by the maximum of the image being rendered.
    PerFrameMax,
    /// Scale by a reference shared by every image of a run.
    GlobalMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub gamma: f64,
    pub overlay_rays: bool,
    pub normalization: Normalization,
}

impl HeatmapSpec {
    /// One pixel per grid point.
    pub fn for_grid(grid: &SpacetimeGrid, gamma: f64, overlay_rays: bool, normalization: Normalization) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            width_px: grid.nx,
            height_px: grid.nt,
            gamma,
            overlay_rays,
            normalization,
        })
    }
}

/// Encode `density` as P5 bytes, scaled by `rho_ref`.
///
/// The first image row is `t_max`, so time runs upward.
pub fn encode_pgm(density: &DensityField, spec: &HeatmapSpec, rho_ref: f64, rays: &[RayWorldline]) -> Result<Vec<u8>> {
    let grid = density.grid();
    if spec.width_px != grid.nx || spec.height_px != grid.nt {
        return Err(Error::invalid(format!(
            "heatmap is {}x{} but the grid is {}x{}",
            spec.width_px, spec.height_px, grid.nx, grid.nt
        )));
    }
    if !(rho_ref > 0.0) || !rho_ref.is_finite() {
        return Err(Error::DegenerateField);
    }
    let (w, h) = (grid.nx, grid.nt);
    let mut pixels = vec![0u8; w * h];
    for (i, row) in density.rows().enumerate() {
        let out = &mut pixels[(h - 1 - i) * w..(h - i) * w];
        for (p, &rho) in out.iter_mut().zip(row) {
            let level = 255.0 * (rho / rho_ref).powf(spec.gamma);
            *p = level.round().clamp(0.0, 255.0) as u8;
        }
    }
    if spec.overlay_rays {
        for ray in rays {
            draw_worldline(&mut pixels, grid, ray);
        }
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    Ok(bytes)
}

/// Write one heatmap; under [`Normalization::GlobalMax`] the caller's
/// `global_ref` is used instead of the field's own maximum.
pub fn render_heatmap(
    density: &DensityField,
    spec: &HeatmapSpec,
    rays: Option<&[RayWorldline]>,
    global_ref: Option<f64>,
    path: &Path,
) -> Result<()> {
    let rho_ref = match (spec.normalization, global_ref) {
        (Normalization::GlobalMax, Some(r)) => r,
        _ => density.max(),
    };
    let bytes = encode_pgm(density, spec, rho_ref, rays.unwrap_or(&[]))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Decoded P5 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Graymap {
    pub fn get(&self, column: usize, row: usize) -> u8 {
        self.pixels[row * self.width + column]
    }
}

/// Parse P5 bytes with maxval 255 as written by [`encode_pgm`].
pub fn decode_pgm(bytes: &[u8]) -> Result<Graymap> {
    let bad = |m: &str| Error::invalid(format!("not a P5 graymap: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected magic P5 and maxval 255"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let pixels = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    if pixels.len() != width * height {
        return Err(bad("raster size does not match header"));
    }
    Ok(Graymap {
        width,
        height,
        pixels: pixels.to_vec(),
    })
}

fn draw_worldline(pixels: &mut [u8], grid: &SpacetimeGrid, ray: &RayWorldline) {
    for seg in &ray.segments {
        if seg.weight == 0.0 {
            continue;
        }
        let t0 = seg.start.v0t / ray.v0;
        let t1 = seg.end_v0t.map_or(grid.t_max, |v| v / ray.v0).min(grid.t_max);
        if !(t1 > t0) {
            continue;
        }
        let (x0, x1) = (seg.x_at(t0 * ray.v0), seg.x_at(t1 * ray.v0));
        if let Some((a, b)) = clip(grid, (x0, t0), (x1, t1)) {
            let to_px = |(x, t): (f64, f64)| {
                let col = ((x - grid.x_min) / grid.dx()).round() as i64;
                let row = ((t - grid.t_min) / grid.dt()).round() as i64;
                (col, grid.nt as i64 - 1 - row)
            };
            for (c, r) in line(to_px(a), to_px(b)) {
                if c >= 0 && r >= 0 && (c as usize) < grid.nx && (r as usize) < grid.nt {
                    pixels[r as usize * grid.nx + c as usize] = 255;
                }
            }
        }
    }
}

/// Liang-Barsky clip of a segment to the grid rectangle in `(x, T)`.
fn clip(grid: &SpacetimeGrid, a: (f64, f64), b: (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dt) = (b.0 - a.0, b.1 - a.1);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, a.0 - grid.x_min),
        (dx, grid.x_max - a.0),
        (-dt, a.1 - grid.t_min),
        (dt, grid.t_max - a.1),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    (lo <= hi).then(|| ((a.0 + lo * dx, a.1 + lo * dt), (a.0 + hi * dx, a.1 + hi * dt)))
}

/// Bresenham rasterization, both endpoints included.
fn line(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - x).abs();
    let dy = -(b.1 - y).abs();
    let sx = if x < b.0 { 1 } else { -1 };
    let sy = if y < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ray::{RayLabel, RaySegment, SpacetimeEvent};

    fn grid(nx: usize, nt: usize) -> SpacetimeGrid {
        SpacetimeGrid::new(-1.0, 1.0, nx, 0.0, 1.0, nt).unwrap()
    }

    fn spec(g: &SpacetimeGrid, gamma: f64) -> HeatmapSpec {
        HeatmapSpec::for_grid(g, gamma, true, Normalization::PerFrameMax).unwrap()
    }

    #[test]
    fn uniform_field_is_white() {
        let g = grid(5, 4);
        let d = DensityField::new(g, vec![0.3; 20]).unwrap();
        let img = decode_pgm(&encode_pgm(&d, &spec(&g, 1.0), d.max(), &[]).unwrap()).unwrap();
        assert_eq!((img.width, img.height), (5, 4));
        assert!(img.pixels.iter().all(|&p| p == 255));
    }

    #[test]
    fn single_cell_and_orientation() {
        let g = grid(4, 3);
        let mut v = vec![0.0; 12];
        v[1] = 2.0; // t_min row, second column
        let d = DensityField::new(g, v).unwrap();
        let bytes = encode_pgm(&d, &spec(&g, 0.5), d.max(), &[]).unwrap();
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.pixels.iter().filter(|&&p| p == 255).count(), 1);
        assert_eq!(img.pixels.iter().filter(|&&p| p != 0).count(), 1);
        assert_eq!(img.get(1, 2), 255);
    }

    #[test]
    fn gamma_levels() {
        let g = grid(2, 2);
        let d = DensityField::new(g, vec![1.0, 0.25, 0.0, 0.0]).unwrap();
        let img = decode_pgm(&encode_pgm(&d, &spec(&g, 0.5), 1.0, &[]).unwrap()).unwrap();
        assert_eq!(img.get(0, 1), 255);
        assert_eq!(img.get(1, 1), 128); // round(255 * 0.5)
    }

    #[test]
    fn zero_field_is_degenerate() {
        let g = grid(3, 3);
        let d = DensityField::new(g, vec![0.0; 9]).unwrap();
        assert!(matches!(encode_pgm(&d, &spec(&g, 1.0), d.max(), &[]), Err(Error::DegenerateField)));
    }

    #[test]
    fn spec_must_match_grid() {
        let g = grid(3, 3);
        let d = DensityField::new(g, vec![1.0; 9]).unwrap();
        let s = HeatmapSpec { width_px: 4, ..spec(&g, 1.0) };
        assert!(encode_pgm(&d, &s, 1.0, &[]).is_err());
    }

    #[test]
    fn diagonal_ray_is_clipped() {
        // 11 x 11 grid; the ray x = -2 + 2 T enters at (-1, 0.5) and leaves at (0, 1)
        let g = grid(11, 11);
        let d = DensityField::new(g, vec![1e-9; 121]).unwrap();
        let ray = RayWorldline {
            v0: 1.0,
            segments: vec![RaySegment {
                start: SpacetimeEvent { x: -2.0, v0t: 0.0 },
                slope: 0.5,
                end_v0t: None,
                label: RayLabel::Transmitted,
                weight: 1.0,
            }],
        };
        let s = HeatmapSpec::for_grid(&g, 1.0, true, Normalization::PerFrameMax).unwrap();
        let img = decode_pgm(&encode_pgm(&d, &s, 1.0, std::slice::from_ref(&ray)).unwrap()).unwrap();
        let lit: Vec<(usize, usize)> = (0..11)
            .flat_map(|r| (0..11).map(move |c| (c, r)))
            .filter(|&(c, r)| img.get(c, r) == 255)
            .collect();
        assert_eq!(lit.len(), 6);
        assert!(lit.contains(&(0, 5)) && lit.contains(&(5, 0)));
        let hidden = HeatmapSpec { overlay_rays: false, ..s };
        let img = decode_pgm(&encode_pgm(&d, &hidden, 1.0, &[ray]).unwrap()).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn bresenham_endpoints() {
        assert_eq!(line((0, 0), (3, 1)), vec![(0, 0), (1, 0), (2, 1), (3, 1)]);
        assert_eq!(line((2, 2), (2, 2)), vec![(2, 2)]);
        assert_eq!(line((0, 3), (0, 0)).len(), 4);
    }
}
