use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

const BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaheParams {
    /// (rows, cols)
    #[serde(default = "default_tile_grid")]
    pub tile_grid: (usize, usize),
    #[serde(default = "default_clip_factor")]
    pub clip_factor: f64,
}

fn default_tile_grid() -> (usize, usize) {
    (8, 8)
}

fn default_clip_factor() -> f64 {
    2.0
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            tile_grid: default_tile_grid(),
            clip_factor: default_clip_factor(),
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.tile_grid;
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "CLAHE tile grid must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if !self.clip_factor.is_finite() || self.clip_factor < 1.0 {
            return Err(Error::invalid(format!(
                "CLAHE clip factor must be >= 1.0, got {}",
                self.clip_factor
            )));
        }
        Ok(())
    }
}

fn histogram(pixels: impl Iterator<Item = u8>) -> [usize; BINS] {
    let mut hist = [0usize; BINS];
    for p in pixels {
        hist[p as usize] += 1;
    }
    hist
}

/// Global histogram equalization.
///
/// `m(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))`, with `cdf_min`
/// the smallest nonzero CDF value. A single-valued image has no spread to
/// redistribute and is returned unchanged.
pub fn equalize_hist(img: &GrayImage) -> GrayImage {
    let hist = histogram(img.pixels().iter().copied());
    let total = img.pixels().len();
    let mut cdf = [0usize; BINS];
    let mut running = 0;
    for (v, &count) in hist.iter().enumerate() {
        running += count;
        cdf[v] = running;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if total == cdf_min {
        return img.clone();
    }
    let denom = (total - cdf_min) as u64;
    let mut lut = [0u8; BINS];
    for v in 0..BINS {
        let num = cdf[v].saturating_sub(cdf_min) as u64 * 255;
        // round half up in integer arithmetic
        lut[v] = ((2 * num + denom) / (2 * denom)).min(255) as u8;
    }
    map_pixels(img, |p| lut[p as usize])
}

fn map_pixels(img: &GrayImage, f: impl Fn(u8) -> u8) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| f(p)).collect(),
    }
}

/// Contrast limited adaptive histogram equalization.
///
/// The image is mirror-padded on the right and bottom up to a whole number of
/// tiles. Each tile histogram is clipped at
/// `max(1, floor(clip_factor * tile_pixels / 256))`, the excess is spread
/// uniformly over all bins (remainder one count per bin from bin 0), and the
/// clipped CDF gives the tile mapping. Output pixels blend the mappings of the
/// four nearest tile centers bilinearly.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    params.validate()?;
    let (rows, cols) = params.tile_grid;
    check_fits_grid(img, rows, cols)?;
    let tile_pixels = tile_dims(img, rows, cols).0 * tile_dims(img, rows, cols).1;
    let limit = ((params.clip_factor * tile_pixels as f64 / BINS as f64).floor() as usize).max(1);
    Ok(tiled_equalize(img, rows, cols, Some(limit)))
}

/// Adaptive histogram equalization without clipping: the same tiling and
/// interpolation as [`clahe`] with unbounded bins.
pub fn adaptive_equalize(img: &GrayImage, tile_grid: (usize, usize)) -> Result<GrayImage> {
    let (rows, cols) = tile_grid;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("tile grid must be at least 1x1"));
    }
    check_fits_grid(img, rows, cols)?;
    Ok(tiled_equalize(img, rows, cols, None))
}

fn check_fits_grid(img: &GrayImage, rows: usize, cols: usize) -> Result<()> {
    if img.width < cols || img.height < rows {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than a {rows}x{cols} tile grid",
            img.width, img.height
        )));
    }
    Ok(())
}

fn tile_dims(img: &GrayImage, rows: usize, cols: usize) -> (usize, usize) {
    (img.width.div_ceil(cols), img.height.div_ceil(rows))
}

/// Reflect-101 index folding; handles pads longer than the source.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

fn clip_histogram(hist: &mut [usize; BINS], limit: usize) {
    let mut excess = 0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += *bin - limit;
            *bin = limit;
        }
    }
    let batch = excess / BINS;
    let remainder = excess % BINS;
    for (i, bin) in hist.iter_mut().enumerate() {
        *bin += batch + usize::from(i < remainder);
    }
}

fn cdf_lut(hist: &[usize; BINS], total: usize) -> [u8; BINS] {
    let mut lut = [0u8; BINS];
    let mut cdf = 0u64;
    let total = total as u64;
    for v in 0..BINS {
        cdf += hist[v] as u64;
        lut[v] = ((2 * 255 * cdf + total) / (2 * total)).min(255) as u8;
    }
    lut
}

/// Per-tile lookup tables, indexed `[row * cols + col]`.
pub(crate) fn tile_luts(
    img: &GrayImage,
    rows: usize,
    cols: usize,
    clip_limit: Option<usize>,
) -> Vec<[u8; BINS]> {
    let (tw, th) = tile_dims(img, rows, cols);
    let mut luts = Vec::with_capacity(rows * cols);
    for ty in 0..rows {
        for tx in 0..cols {
            let pixels = (ty * th..(ty + 1) * th).flat_map(|py| {
                let sy = reflect(py, img.height);
                (tx * tw..(tx + 1) * tw).map(move |px| img.get(reflect(px, img.width), sy))
            });
            let mut hist = histogram(pixels);
            if let Some(limit) = clip_limit {
                clip_histogram(&mut hist, limit);
            }
            luts.push(cdf_lut(&hist, tw * th));
        }
    }
    luts
}

/// Tile neighbours and blend weight along one axis for pixel coordinate `p`.
pub(crate) fn axis_weights(p: usize, tile: usize, count: usize) -> (usize, usize, f64) {
    let g = (p as f64 + 0.5) / tile as f64 - 0.5;
    if g <= 0.0 {
        return (0, 0, 0.0);
    }
    let last = count - 1;
    if g >= last as f64 {
        return (last, last, 0.0);
    }
    let lo = g.floor() as usize;
    (lo, lo + 1, g - lo as f64)
}

fn tiled_equalize(img: &GrayImage, rows: usize, cols: usize, clip_limit: Option<usize>) -> GrayImage {
    let (tw, th) = tile_dims(img, rows, cols);
    let luts = tile_luts(img, rows, cols, clip_limit);
    let col_weights: Vec<_> = (0..img.width).map(|x| axis_weights(x, tw, cols)).collect();
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..img.height {
        let (r0, r1, wy) = axis_weights(y, th, rows);
        for (x, &(c0, c1, wx)) in col_weights.iter().enumerate() {
            let v = img.get(x, y) as usize;
            let top = (1.0 - wx) * luts[r0 * cols + c0][v] as f64 + wx * luts[r0 * cols + c1][v] as f64;
            let bottom =
                (1.0 - wx) * luts[r1 * cols + c0][v] as f64 + wx * luts[r1 * cols + c1][v] as f64;
            let blended = (1.0 - wy) * top + wy * bottom;
            pixels.push((blended + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}
