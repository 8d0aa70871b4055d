//! Binary mask cleanup and blob extraction.
//!
//! The cleanup chain runs hole filling first (so erosion cannot split a
//! blob along an interior hole), then erosion, then 8-connected component
//! labelling and an area filter.

use std::collections::VecDeque;

use crate::frame_io::BoundingBox;
use crate::segmentation::BinaryMask;

/// Reference frame area for the `min_area` setting: configured thresholds
/// are expressed for a 360x240 frame and scaled to the actual frame area.
pub const MIN_AREA_REFERENCE: f64 = 360.0 * 240.0;

/// A connected foreground region of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// 1-based label, assigned in raster order of each blob's first pixel.
    pub label: u32,
    /// Member pixels as `(x, y)`, in raster order.
    pub pixels: Vec<(u32, u32)>,
    /// Pixel count; always `pixels.len()`.
    pub area: usize,
    /// Tight bounding box of the member pixels.
    pub bbox: BoundingBox,
    /// Mean pixel position `(x̄, ȳ)`.
    pub centroid: (f64, f64),
}

/// Fill interior holes: background regions (4-connected) that cannot reach
/// the mask border become foreground, everything else is unchanged.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut reachable = vec![false; w as usize * h as usize];
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;
    let mut queue = VecDeque::new();
    let push = |x: u32, y: u32, reachable: &mut Vec<bool>, queue: &mut VecDeque<(u32, u32)>| {
        if !mask.get(x, y) && !reachable[idx(x, y)] {
            reachable[idx(x, y)] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        push(x, 0, &mut reachable, &mut queue);
        push(x, h - 1, &mut reachable, &mut queue);
    }
    for y in 0..h {
        push(0, y, &mut reachable, &mut queue);
        push(w - 1, y, &mut reachable, &mut queue);
    }
    while let Some((x, y)) = queue.pop_front() {
        if x > 0 {
            push(x - 1, y, &mut reachable, &mut queue);
        }
        if x + 1 < w {
            push(x + 1, y, &mut reachable, &mut queue);
        }
        if y > 0 {
            push(x, y - 1, &mut reachable, &mut queue);
        }
        if y + 1 < h {
            push(x, y + 1, &mut reachable, &mut queue);
        }
    }
    let mut out = mask.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) && !reachable[idx(x, y)] {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Erode with a 3x3 square structuring element, `iterations` times.
///
/// A pixel survives one pass only if all nine neighbourhood positions are
/// foreground; positions outside the frame count as background, so the
/// border is always eroded away. Zero iterations return the input unchanged.
pub fn erode(mask: &BinaryMask, iterations: u32) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut cur = mask.clone();
    for _ in 0..iterations {
        // Separable: horizontal min pass, then vertical min pass.
        let mut horiz = BinaryMask::new(w, h, mask.frame_index());
        for y in 0..h {
            for x in 1..w.saturating_sub(1) {
                if cur.get(x - 1, y) && cur.get(x, y) && cur.get(x + 1, y) {
                    horiz.set(x, y, true);
                }
            }
        }
        let mut next = BinaryMask::new(w, h, mask.frame_index());
        for y in 1..h.saturating_sub(1) {
            for x in 0..w {
                if horiz.get(x, y - 1) && horiz.get(x, y) && horiz.get(x, y + 1) {
                    next.set(x, y, true);
                }
            }
        }
        cur = next;
        if cur.is_empty() {
            break;
        }
    }
    cur
}

/// Label 8-connected foreground components in raster order.
///
/// Labels start at 1 and follow the raster order of each component's first
/// pixel; each blob's pixel list is itself raster-ordered.
pub fn connected_components(mask: &BinaryMask) -> Vec<Blob> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w as usize * h as usize];
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;
    let mut next_label = 0u32;
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[idx(x, y)] != 0 {
                continue;
            }
            next_label += 1;
            labels[idx(x, y)] = next_label;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        if mask.get(nx, ny) && labels[idx(nx, ny)] == 0 {
                            labels[idx(nx, ny)] = next_label;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
        }
    }

    let mut blobs: Vec<Blob> = (1..=next_label)
        .map(|label| Blob {
            label,
            pixels: Vec::new(),
            area: 0,
            bbox: BoundingBox::new(0, 0, 0, 0),
            centroid: (0.0, 0.0),
        })
        .collect();
    // Second raster pass keeps every pixel list in raster order.
    for y in 0..h {
        for x in 0..w {
            let label = labels[idx(x, y)];
            if label != 0 {
                blobs[label as usize - 1].pixels.push((x, y));
            }
        }
    }
    for blob in &mut blobs {
        blob.area = blob.pixels.len();
        let (mut min_x, mut min_y) = (u32::MAX, u32::MAX);
        let (mut max_x, mut max_y) = (0u32, 0u32);
        let (mut sum_x, mut sum_y) = (0u64, 0u64);
        for &(x, y) in &blob.pixels {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
            sum_x += u64::from(x);
            sum_y += u64::from(y);
        }
        blob.bbox = BoundingBox::new(
            i64::from(min_x),
            i64::from(min_y),
            i64::from(max_x - min_x + 1),
            i64::from(max_y - min_y + 1),
        );
        let n = blob.area as f64;
        blob.centroid = (sum_x as f64 / n, sum_y as f64 / n);
    }
    blobs
}

/// Keep only blobs with `area >= min_area`, preserving order and labels.
pub fn filter_by_area(blobs: Vec<Blob>, min_area: usize) -> Vec<Blob> {
    blobs.into_iter().filter(|b| b.area >= min_area).collect()
}

/// Scale a reference-resolution area threshold to an actual frame size.
///
/// `base` is interpreted at 360x240; the result is proportional to the
/// frame's pixel count, rounded, and at least 1.
pub fn scaled_min_area(base: u32, width: u32, height: u32) -> usize {
    let frame_area = f64::from(width) * f64::from(height);
    let scaled = (f64::from(base) * frame_area / MIN_AREA_REFERENCE).round();
    (scaled as usize).max(1)
}

/// Full cleanup chain: fill holes, erode, label components, drop small blobs.
pub fn clean_and_extract(mask: &BinaryMask, erode_iterations: u32, min_area: usize) -> Vec<Blob> {
    let filled = fill_holes(mask);
    let eroded = erode(&filled, erode_iterations);
    filter_by_area(connected_components(&eroded), min_area)
}
