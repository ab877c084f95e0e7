use std::collections::VecDeque;

use super::{LungMask, ProbabilityMap};
use crate::error::{Error, Result};

/// Binarizes a probability map: foreground iff `p >= threshold`.
pub fn threshold_mask(map: &ProbabilityMap, threshold: f32) -> Result<LungMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut bits = Vec::with_capacity(map.values.len());
    for (i, &p) in map.values.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "probability {p} at index {i} outside [0, 1]"
            )));
        }
        bits.push((p >= threshold) as u8);
    }
    LungMask::new(map.width, map.height, bits)
}

/// Horizontal half-width of a discrete disk for each row offset `-r..=r`.
pub fn disk_offsets(radius: usize) -> Vec<(isize, usize)> {
    let r = radius as isize;
    (-r..=r)
        .map(|dy| {
            let rem = (r * r - dy * dy) as usize;
            let mut h = (rem as f64).sqrt() as usize;
            while (h + 1) * (h + 1) <= rem {
                h += 1;
            }
            while h * h > rem {
                h -= 1;
            }
            (dy, h)
        })
        .collect()
}

fn row_prefix_sums(bits: &[u8], width: usize) -> Vec<u32> {
    let height = bits.len() / width;
    let mut prefix = vec![0u32; (width + 1) * height];
    for y in 0..height {
        let row = &bits[y * width..(y + 1) * width];
        let out = &mut prefix[y * (width + 1)..(y + 1) * (width + 1)];
        for x in 0..width {
            out[x + 1] = out[x] + row[x] as u32;
        }
    }
    prefix
}

fn dilate_bits(bits: &[u8], width: usize, height: usize, radius: usize) -> Vec<u8> {
    let prefix = row_prefix_sums(bits, width);
    let disk = disk_offsets(radius);
    let mut out = vec![0u8; bits.len()];
    for y in 0..height {
        for x in 0..width {
            let hit = disk.iter().any(|&(dy, h)| {
                let yy = y as isize + dy;
                if yy < 0 || yy >= height as isize {
                    return false;
                }
                let row = &prefix[yy as usize * (width + 1)..(yy as usize + 1) * (width + 1)];
                let lo = x.saturating_sub(h);
                let hi = (x + h + 1).min(width);
                row[hi] > row[lo]
            });
            out[y * width + x] = hit as u8;
        }
    }
    out
}

fn complement(bits: &[u8]) -> Vec<u8> {
    bits.iter().map(|&b| 1 - b).collect()
}

/// Dilation by a disk; pixels outside the frame count as background.
pub fn dilate(mask: &LungMask, radius: usize) -> LungMask {
    let bits = dilate_bits(&mask.bits, mask.width, mask.height, radius);
    LungMask::from_bits_unchecked(mask.width, mask.height, bits)
}

/// Erosion by a disk; pixels outside the frame count as foreground.
pub fn erode(mask: &LungMask, radius: usize) -> LungMask {
    let bits = complement(&dilate_bits(
        &complement(&mask.bits),
        mask.width,
        mask.height,
        radius,
    ));
    LungMask::from_bits_unchecked(mask.width, mask.height, bits)
}

/// Morphological closing with a disk of the given radius.
///
/// Computed on a canvas padded by `radius` on every side so the result is the
/// closing of the mask as a set in the unbounded plane, restricted to the
/// frame. That keeps it extensive and idempotent at the borders.
pub fn morph_close(mask: &LungMask, radius: usize) -> Result<LungMask> {
    if radius < 1 {
        return Err(Error::invalid("closing radius must be >= 1"));
    }
    let (w, h) = (mask.width, mask.height);
    let (pw, ph) = (w + 2 * radius, h + 2 * radius);
    let mut canvas = vec![0u8; pw * ph];
    for y in 0..h {
        canvas[(y + radius) * pw + radius..(y + radius) * pw + radius + w]
            .copy_from_slice(&mask.bits[y * w..(y + 1) * w]);
    }
    let dilated = dilate_bits(&canvas, pw, ph, radius);
    let closed = complement(&dilate_bits(&complement(&dilated), pw, ph, radius));
    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        bits.extend_from_slice(&closed[(y + radius) * pw + radius..(y + radius) * pw + radius + w]);
    }
    Ok(LungMask::from_bits_unchecked(w, h, bits))
}

fn neighbours4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Sets every background pixel not 4-connected to the frame border.
pub fn fill_holes(mask: &LungMask) -> LungMask {
    let (w, h) = (mask.width, mask.height);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let border = (0..w)
        .flat_map(|x| [x, (h - 1) * w + x])
        .chain((0..h).flat_map(|y| [y * w, y * w + w - 1]));
    for i in border {
        if mask.bits[i] == 0 && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for n in neighbours4(i, w, h) {
            if mask.bits[n] == 0 && !outside[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        }
    }
    let bits = outside.iter().map(|&o| (!o) as u8).collect();
    LungMask::from_bits_unchecked(w, h, bits)
}

/// 4-connected labeling. Labels start at 1 in raster order of each
/// component's first pixel; returns the label image and component sizes
/// (`sizes[label - 1]`).
pub fn label_components(mask: &LungMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if mask.bits[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for n in neighbours4(i, w, h) {
                if mask.bits[n] != 0 && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps the `k` largest 4-connected components. Equal sizes are ranked by
/// the raster index of their first pixel.
pub fn keep_largest_components(mask: &LungMask, k: usize) -> LungMask {
    let (labels, sizes) = label_components(mask);
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable: ties keep raster order
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut keep = vec![false; sizes.len() + 1];
    for &idx in order.iter().take(k) {
        keep[idx + 1] = true;
    }
    let bits = labels.iter().map(|&l| (l != 0 && keep[l as usize]) as u8).collect();
    LungMask::from_bits_unchecked(mask.width, mask.height, bits)
}

/// Dice similarity `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(a: &LungMask, b: &LungMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::invalid(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (mut inter, mut sa, mut sb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x & y) as usize;
        sa += x as usize;
        sb += y as usize;
    }
    if sa + sb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (sa + sb) as f64)
}
