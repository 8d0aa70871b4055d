//! Blob appearance and shape descriptors.
//!
//! Colour statistics are the per-channel mean, population standard
//! deviation, and signed-cube-root skewness over the blob's pixels. Shape is
//! summarised by the seven Hu invariants computed from central moments of
//! the unit-weight binary silhouette.
//!
//! Central moments — spatial and colour alike — are evaluated with integer
//! arithmetic: with `m00 = N`, `m10 = Σx`, `m01 = Σy`, the scaled deviation
//! `x·N − m10` is an integer, so `μ_pq · N^(p+q)` is an exact integer sum.
//! This keeps `μ10 = μ01 = 0` exact and makes translation (and axis-aligned
//! rotation) invariance hold to the last bit.

use crate::error::{Error, Result};
use crate::frame_io::Frame;
use crate::morphology::Blob;

/// Number of entries in a combined feature vector.
pub const FEATURE_LEN: usize = 16;

/// Offset stopping `log10` from blowing up on exactly-zero invariants.
pub const HU_LOG_EPSILON: f64 = 1e-30;

/// Per-channel colour statistics in R, G, B order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorMoments {
    pub mean: [f64; 3],
    pub std_dev: [f64; 3],
    pub skewness: [f64; 3],
}

/// The seven Hu shape invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuMoments {
    pub phi: [f64; 7],
}

/// How Hu invariants enter the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HuTransform {
    /// Use φ1..φ7 as computed.
    #[default]
    Raw,
    /// Compress dynamic range: φ -> -sign(φ)·log10(|φ| + ε), with 0 -> 0.
    SignedLog,
}

/// A blob's 16 association features: 9 colour statistics (mean, std dev,
/// skewness for R, G, B) followed by the 7 Hu invariants. The blob area
/// rides along but is not part of the distance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_LEN],
    pub area: usize,
}

/// Colour mean, population standard deviation, and skewness of the blob's
/// pixels on `frame`. Every blob pixel must lie inside the frame.
pub fn color_moments(frame: &Frame, blob: &Blob) -> Result<ColorMoments> {
    debug_assert!(!blob.pixels.is_empty(), "blobs always have pixels");
    for &(x, y) in &blob.pixels {
        if x >= frame.width() || y >= frame.height() {
            return Err(Error::BlobOutOfFrame {
                x,
                y,
                width: frame.width(),
                height: frame.height(),
            });
        }
    }
    // Same integer trick as the spatial moments: with S = Σv the scaled
    // deviation v·N − S is an integer, so the central sums are exact and a
    // perfectly symmetric channel yields a skewness of exactly zero instead
    // of the cube root of rounding noise.
    let n = blob.pixels.len() as i128;
    let mut sums = [0i128; 3];
    for &(x, y) in &blob.pixels {
        let px = frame.pixel(x, y);
        for c in 0..3 {
            sums[c] += i128::from(px[c]);
        }
    }
    let mut s2 = [0i128; 3];
    let mut s3 = [0i128; 3];
    for &(x, y) in &blob.pixels {
        let px = frame.pixel(x, y);
        for c in 0..3 {
            let d = i128::from(px[c]) * n - sums[c];
            s2[c] += d * d;
            s3[c] += d * d * d;
        }
    }
    let nf = n as f64;
    let n3 = nf * nf * nf;
    let n4 = (nf * nf) * (nf * nf);
    let mut mean = [0.0f64; 3];
    let mut std_dev = [0.0f64; 3];
    let mut skewness = [0.0f64; 3];
    for c in 0..3 {
        mean[c] = sums[c] as f64 / nf;
        // Each deviation carries a factor N, so Σd² is m2·N³ and Σd³ is m3·N⁴.
        std_dev[c] = (s2[c] as f64 / n3).sqrt();
        // f64::cbrt is the signed cube root, matching the convention
        // s = sign(m3)·|m3|^(1/3).
        skewness[c] = (s3[c] as f64 / n4).cbrt();
    }
    Ok(ColorMoments {
        mean,
        std_dev,
        skewness,
    })
}

/// Integer raw-moment sums of a silhouette: N, Σx, Σy.
fn raw_sums(blob: &Blob) -> (i128, i128, i128) {
    let mut m10 = 0i128;
    let mut m01 = 0i128;
    for &(x, y) in &blob.pixels {
        m10 += i128::from(x);
        m01 += i128::from(y);
    }
    (blob.pixels.len() as i128, m10, m01)
}

/// Central moment μ_pq of the blob silhouette with unit pixel weight.
///
/// Defined for any small orders; the pipeline uses p + q <= 3. Pixel
/// coordinates are the integer (column, row) positions.
pub fn central_moment(blob: &Blob, p: u32, q: u32) -> f64 {
    let (m00, m10, m01) = raw_sums(blob);
    let mut sum = 0.0f64;
    for &(x, y) in &blob.pixels {
        let dx = (i128::from(x) * m00 - m10) as f64;
        let dy = (i128::from(y) * m00 - m01) as f64;
        sum += dx.powi(p as i32) * dy.powi(q as i32);
    }
    // Each deviation carries a factor m00, so the sum is μ_pq · m00^(p+q).
    sum / (m00 as f64).powi((p + q) as i32)
}

/// All second- and third-order central moments in one pass.
struct CentralMoments {
    mu00: f64,
    mu20: f64,
    mu02: f64,
    mu11: f64,
    mu30: f64,
    mu03: f64,
    mu21: f64,
    mu12: f64,
}

fn central_moments(blob: &Blob) -> CentralMoments {
    let (m00, m10, m01) = raw_sums(blob);
    let mut s20 = 0.0f64;
    let mut s02 = 0.0f64;
    let mut s11 = 0.0f64;
    let mut s30 = 0.0f64;
    let mut s03 = 0.0f64;
    let mut s21 = 0.0f64;
    let mut s12 = 0.0f64;
    for &(x, y) in &blob.pixels {
        let dx = (i128::from(x) * m00 - m10) as f64;
        let dy = (i128::from(y) * m00 - m01) as f64;
        let dx2 = dx * dx;
        let dy2 = dy * dy;
        s20 += dx2;
        s02 += dy2;
        s11 += dx * dy;
        s30 += dx2 * dx;
        s03 += dy2 * dy;
        s21 += dx2 * dy;
        s12 += dx * dy2;
    }
    let n = m00 as f64;
    let n2 = n * n;
    let n3 = n2 * n;
    CentralMoments {
        mu00: n,
        mu20: s20 / n2,
        mu02: s02 / n2,
        mu11: s11 / n2,
        mu30: s30 / n3,
        mu03: s03 / n3,
        mu21: s21 / n3,
        mu12: s12 / n3,
    }
}

/// The seven Hu invariants of the blob silhouette.
///
/// Central moments are normalised as η_pq = μ_pq / μ00^((p+q+2)/2) before
/// entering the invariant polynomials.
pub fn hu_moments(blob: &Blob) -> HuMoments {
    let m = central_moments(blob);
    let n2 = m.mu00 * m.mu00;
    let n2_5 = n2 * m.mu00.sqrt();
    let eta20 = m.mu20 / n2;
    let eta02 = m.mu02 / n2;
    let eta11 = m.mu11 / n2;
    let eta30 = m.mu30 / n2_5;
    let eta03 = m.mu03 / n2_5;
    let eta21 = m.mu21 / n2_5;
    let eta12 = m.mu12 / n2_5;

    let a = eta30 - 3.0 * eta12; // reused by φ3, φ5, φ7
    let b = 3.0 * eta21 - eta03;
    let r = eta30 + eta12;
    let z = eta21 + eta03;
    let r2 = r * r;
    let z2 = z * z;

    let phi1 = eta20 + eta02;
    let phi2 = (eta20 - eta02) * (eta20 - eta02) + 4.0 * eta11 * eta11;
    let phi3 = a * a + b * b;
    let phi4 = r2 + z2;
    let phi5 = a * r * (r2 - 3.0 * z2) + b * z * (3.0 * r2 - z2);
    // The grouping (r * z) keeps quarter-turn symmetry exact in floating point.
    let phi6 = (eta20 - eta02) * (r2 - z2) + 4.0 * (eta11 * (r * z));
    let phi7 = b * r * (r2 - 3.0 * z2) - a * z * (3.0 * r2 - z2);

    HuMoments {
        phi: [phi1, phi2, phi3, phi4, phi5, phi6, phi7],
    }
}

fn signed_log(phi: f64) -> f64 {
    if phi == 0.0 {
        0.0
    } else {
        -phi.signum() * (phi.abs() + HU_LOG_EPSILON).log10()
    }
}

/// Assemble a blob's 16-entry feature vector from its colour statistics and
/// Hu invariants, in the order
/// `[meanR, stdR, skewR, meanG, stdG, skewG, meanB, stdB, skewB, φ1..φ7]`.
pub fn extract_features(
    frame: &Frame,
    blob: &Blob,
    transform: HuTransform,
) -> Result<FeatureVector> {
    let color = color_moments(frame, blob)?;
    let hu = hu_moments(blob);
    let mut values = [0.0f64; FEATURE_LEN];
    for c in 0..3 {
        values[3 * c] = color.mean[c];
        values[3 * c + 1] = color.std_dev[c];
        values[3 * c + 2] = color.skewness[c];
    }
    for (i, &phi) in hu.phi.iter().enumerate() {
        values[9 + i] = match transform {
            HuTransform::Raw => phi,
            HuTransform::SignedLog => signed_log(phi),
        };
    }
    Ok(FeatureVector {
        values,
        area: blob.area,
    })
}
