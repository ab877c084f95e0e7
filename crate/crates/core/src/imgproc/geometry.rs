use super::{GrayImage, LungMask, ProbabilityMap};
use crate::error::{Error, Result};

/// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground, if any.
pub fn mask_bounding_box(mask: &LungMask) -> Option<(usize, usize, usize, usize)> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                bbox = Some(match bbox {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    bbox
}

/// Zeroes pixels outside the mask, then crops to the mask bounding box grown
/// by `margin` and clamped to the frame.
pub fn apply_mask_and_crop(img: &GrayImage, mask: &LungMask, margin: usize) -> Result<GrayImage> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::invalid(format!(
            "image is {}x{} but mask is {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let (x0, y0, x1, y1) = mask_bounding_box(mask).ok_or(Error::EmptyMask)?;
    let x0 = x0.saturating_sub(margin);
    let y0 = y0.saturating_sub(margin);
    let x1 = (x1 + margin).min(img.width() - 1);
    let y1 = (y1 + margin).min(img.height() - 1);
    GrayImage::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| {
        let (sx, sy) = (x + x0, y + y0);
        if mask.get(sx, sy) {
            img.get(sx, sy)
        } else {
            0
        }
    })
}

/// Source coordinate for corner-aligned sampling; a single output sample
/// sits at the source center.
fn source_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            let pos = if dst == 1 {
                (src - 1) as f64 / 2.0
            } else {
                i as f64 * (src - 1) as f64 / (dst - 1) as f64
            };
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

fn resample(
    src_w: usize,
    src_h: usize,
    out_w: usize,
    out_h: usize,
    sample: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let xs = source_positions(src_w, out_w);
    let ys = source_positions(src_h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = (1.0 - fx) * sample(x0, y0) + fx * sample(x1, y0);
            let bottom = (1.0 - fx) * sample(x0, y1) + fx * sample(x1, y1);
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    out
}

/// Corner-aligned bilinear resize, rounding half up.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    if (out_w, out_h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let values = resample(img.width(), img.height(), out_w, out_h, |x, y| {
        img.get(x, y) as f64
    });
    let pixels = values
        .into_iter()
        .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(out_w, out_h, pixels)
}

/// Corner-aligned bilinear resize of a probability map.
pub fn resize_map_bilinear(
    map: &ProbabilityMap,
    out_w: usize,
    out_h: usize,
) -> Result<ProbabilityMap> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("resize target must be positive"));
    }
    if (out_w, out_h) == (map.width, map.height) {
        return Ok(map.clone());
    }
    let values = resample(map.width, map.height, out_w, out_h, |x, y| {
        map.get(x, y) as f64
    });
    ProbabilityMap::new(out_w, out_h, values.into_iter().map(|v| v as f32).collect())
}
