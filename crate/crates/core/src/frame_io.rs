//! Frame and record I/O: decoding frame sequences, grayscale conversion,
//! box-record CSV files, and annotated output frames.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::segmentation::BinaryMask;

/// Smallest frame edge the pipeline accepts; the temporal statistic needs a
/// full 3x3 neighbourhood.
pub const MIN_FRAME_EDGE: u32 = 3;

/// File extensions recognised as sequence frames (case-insensitive).
pub const FRAME_EXTENSIONS: [&str; 6] = ["png", "ppm", "pnm", "bmp", "jpg", "jpeg"];

/// An 8-bit RGB frame in row-major order plus its position in the sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
    index: usize,
}

impl Frame {
    /// Build a frame, checking the dimension and buffer-size invariants.
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>, index: usize) -> Result<Frame> {
        if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
            return Err(Error::FrameTooSmall { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::BufferSize {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            pixels,
            index,
        })
    }

    /// Uniformly filled frame, mostly useful for tests and synthesis.
    pub fn filled(width: u32, height: u32, color: [u8; 3], index: usize) -> Result<Frame> {
        Frame::new(
            width,
            height,
            vec![color; width as usize * height as usize],
            index,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Position of this frame in its sequence.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: [u8; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// Row-major pixel data.
    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// True when both frames have the same dimensions and pixel content,
    /// regardless of sequence position.
    pub fn same_image(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }
}

/// Real-valued luminance image; values stay unrounded so downstream
/// statistics see the exact weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: u32,
    height: u32,
    values: Vec<f64>,
    index: usize,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, values: Vec<f64>, index: usize) -> Result<GrayFrame> {
        if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
            return Err(Error::FrameTooSmall { width, height });
        }
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(Error::BufferSize {
                width,
                height,
                expected,
                got: values.len(),
            });
        }
        Ok(GrayFrame {
            width,
            height,
            values,
            index,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn value(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// The 3x3 neighbourhood centred on `(x, y)`, row-major.
    ///
    /// The centre must lie strictly inside the frame.
    pub fn patch3(&self, x: u32, y: u32) -> [f64; 9] {
        debug_assert!(x >= 1 && x + 1 < self.width && y >= 1 && y + 1 < self.height);
        let w = self.width as usize;
        let base = (y as usize - 1) * w + (x as usize - 1);
        let v = &self.values;
        [
            v[base],
            v[base + 1],
            v[base + 2],
            v[base + w],
            v[base + w + 1],
            v[base + w + 2],
            v[base + 2 * w],
            v[base + 2 * w + 1],
            v[base + 2 * w + 2],
        ]
    }
}

/// Luma conversion with ITU-R BT.601 weights; no rounding is applied.
pub fn to_grayscale(frame: &Frame) -> GrayFrame {
    let values = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
        .collect();
    GrayFrame {
        width: frame.width,
        height: frame.height,
        values,
        index: frame.index,
    }
}

/// Axis-aligned box, `(x, y)` top-left corner, `w`/`h` extents in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BoundingBox {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> BoundingBox {
        BoundingBox { x, y, w, h }
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    /// One past the rightmost column.
    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    /// One past the bottom row.
    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }
}

/// One ground-truth or tracker output row: a box for an object id on a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxRecord {
    pub frame_index: usize,
    pub object_id: u64,
    pub bbox: BoundingBox,
}

/// A full set of per-frame object boxes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub records: Vec<BoxRecord>,
}

impl GroundTruth {
    /// Number of distinct object ids present.
    pub fn object_count(&self) -> usize {
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.object_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Parse a `frame_index,id,x,y,w,h` CSV file (no header).
///
/// Rows must be unique per `(frame_index, id)` and carry positive extents;
/// an empty file yields an empty record set.
pub fn load_box_records(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::RecordParse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 6 comma-separated fields, got {}", fields.len()),
            });
        }
        let mut parsed = [0i64; 6];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|_| Error::RecordParse {
                path: path.to_path_buf(),
                line,
                message: format!("`{}` is not an integer", field.trim()),
            })?;
        }
        let [frame_index, object_id, x, y, w, h] = parsed;
        if frame_index < 0 || object_id < 0 {
            return Err(Error::RecordInvalid {
                path: path.to_path_buf(),
                line,
                message: "frame index and object id must be non-negative".into(),
            });
        }
        if w <= 0 || h <= 0 {
            return Err(Error::RecordInvalid {
                path: path.to_path_buf(),
                line,
                message: format!("box extents must be positive, got w={w} h={h}"),
            });
        }
        if !seen.insert((frame_index, object_id)) {
            return Err(Error::RecordInvalid {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate record for frame {frame_index}, id {object_id}"),
            });
        }
        records.push(BoxRecord {
            frame_index: frame_index as usize,
            object_id: object_id as u64,
            bbox: BoundingBox::new(x, y, w, h),
        });
    }
    Ok(GroundTruth { records })
}

/// Write box records as `frame_index,id,x,y,w,h` lines (LF, no header),
/// sorted by frame index then object id.
pub fn save_box_records(records: &[BoxRecord], path: &Path) -> Result<()> {
    let mut rows: Vec<&BoxRecord> = records.iter().collect();
    rows.sort_by_key(|r| (r.frame_index, r.object_id));
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.frame_index, r.object_id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h
        ));
    }
    write_text_file(path, &out)
}

/// Write a text file, mapping failures to [`Error::Io`] with the path.
pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    let wrap = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(wrap)?;
    file.write_all(text.as_bytes()).map_err(wrap)
}

/// Decode one frame from disk, assigning it `index` within its sequence.
///
/// Non-RGB inputs (grayscale, 16-bit, alpha) are converted to 8-bit RGB.
pub fn load_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Decode {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    let rgb = img.into_rgb8();
    let (width, height) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Frame::new(width, height, pixels, index)
}

/// Encode a frame as PNG; the round trip through [`load_frame`] is
/// pixel-exact.
pub fn write_frame_png(frame: &Frame, path: &Path) -> Result<()> {
    let mut buf = image::RgbImage::new(frame.width, frame.height);
    for (i, px) in frame.pixels.iter().enumerate() {
        let x = (i % frame.width as usize) as u32;
        let y = (i / frame.width as usize) as u32;
        buf.put_pixel(x, y, image::Rgb(*px));
    }
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Encode {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

/// Dump a binary mask as an 8-bit grayscale PNG (foreground 255).
pub fn write_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let mut buf = image::GrayImage::new(mask.width(), mask.height());
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let v = if mask.get(x, y) { 255 } else { 0 };
            buf.put_pixel(x, y, image::Luma([v]));
        }
    }
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Encode {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

const BOX_COLOR: [u8; 3] = [255, 0, 0];

/// 3x5 bitmap glyphs for '0'..'9'; each row is a 3-bit pattern, MSB left.
const DIGIT_GLYPHS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111], // 0
    [0b010, 0b110, 0b010, 0b010, 0b111], // 1
    [0b111, 0b001, 0b111, 0b100, 0b111], // 2
    [0b111, 0b001, 0b111, 0b001, 0b111], // 3
    [0b101, 0b101, 0b111, 0b001, 0b001], // 4
    [0b111, 0b100, 0b111, 0b001, 0b111], // 5
    [0b111, 0b100, 0b111, 0b101, 0b111], // 6
    [0b111, 0b001, 0b010, 0b010, 0b010], // 7
    [0b111, 0b101, 0b111, 0b101, 0b111], // 8
    [0b111, 0b101, 0b111, 0b001, 0b111], // 9
];

fn put_clamped(frame: &mut Frame, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < frame.width && (y as u32) < frame.height {
        frame.set_pixel(x as u32, y as u32, color);
    }
}

fn draw_box_outline(frame: &mut Frame, bbox: &BoundingBox) {
    for x in bbox.x..bbox.right() {
        put_clamped(frame, x, bbox.y, BOX_COLOR);
        put_clamped(frame, x, bbox.bottom() - 1, BOX_COLOR);
    }
    for y in bbox.y..bbox.bottom() {
        put_clamped(frame, bbox.x, y, BOX_COLOR);
        put_clamped(frame, bbox.right() - 1, y, BOX_COLOR);
    }
}

fn draw_id(frame: &mut Frame, id: u64, bbox: &BoundingBox) {
    let text = id.to_string();
    // Prefer the strip above the box; fall back to inside its top-left.
    let top = if bbox.y >= 7 { bbox.y - 7 } else { bbox.y + 2 };
    let mut left = bbox.x;
    for ch in text.chars() {
        let glyph = DIGIT_GLYPHS[ch.to_digit(10).expect("id digits") as usize];
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3u8 {
                if bits & (0b100 >> col) != 0 {
                    put_clamped(frame, left + i64::from(col), top + row as i64, BOX_COLOR);
                }
            }
        }
        left += 4;
    }
}

/// Copy `frame` and draw a red 1-pixel outline plus the numeric id for each
/// `(id, box)` pair. Boxes reaching outside the frame are clamped while
/// drawing. An empty list returns an unmodified copy.
pub fn write_annotated_frame(
    frame: &Frame,
    boxes: &[(u64, BoundingBox)],
    path: &Path,
) -> Result<()> {
    let mut out = frame.clone();
    for (id, bbox) in boxes {
        draw_box_outline(&mut out, bbox);
        draw_id(&mut out, *id, bbox);
    }
    write_frame_png(&out, path)?;
    Ok(())
}

/// List the frame files of a sequence directory in ascending file-name
/// order. Only entries with a recognised image extension are included; the
/// directory must exist.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if let Some(ext) = ext {
            if FRAME_EXTENSIONS.contains(&ext.as_str()) {
                files.push(path);
            }
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}
