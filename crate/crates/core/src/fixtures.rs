//! Procedurally drawn test images shipped with the library.
//!
//! They stand in for photographs in tests, benchmarks and demos: a street of
//! houses (wide, several separated objects), a portrait (one central
//! object), and a featureless frame with a zero importance map whose
//! distortion has a closed form.

use image::{Rgb, RgbImage};

use crate::error::Result;
use crate::importance::ImportanceMap;
use crate::pipeline::{compute_importance, RetargetConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub image: RgbImage,
    /// Fixed importance map; `None` means the built-in detector is used.
    pub importance: Option<ImportanceMap<f64>>,
}

impl Fixture {
    pub fn importance<T: Scalar>(&self) -> Result<ImportanceMap<T>> {
        match &self.importance {
            Some(map) => Ok(map.cast()),
            None => Ok(compute_importance(&self.image, &RetargetConfig::default())?.0),
        }
    }
}

/// Every bundled fixture at its default size.
pub fn bundled() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "houses",
            image: houses(240, 150),
            importance: None,
        },
        Fixture {
            name: "portrait",
            image: portrait(180, 200),
            importance: None,
        },
        zero_importance(160, 100),
    ]
}

/// A flat gray frame whose importance is zero everywhere.
pub fn zero_importance(width: u32, height: u32) -> Fixture {
    Fixture {
        name: "zero-importance",
        image: RgbImage::from_pixel(width, height, Rgb([128, 128, 128])),
        importance: Some(ImportanceMap::constant(width, height, 0.0).expect("non-empty fixture")),
    }
}

/// Large houses image used for timing.
pub fn performance_image() -> RgbImage {
    houses(2152, 1534)
}

/// Cheap deterministic per-pixel noise in `[0, 1)`.
fn noise(x: u32, y: u32, seed: u32) -> f64 {
    let mut h = x.wrapping_mul(0x9e37_79b1) ^ y.wrapping_mul(0x85eb_ca77) ^ seed.wrapping_mul(0xc2b2_ae3d);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2c1b_3c6d);
    h ^= h >> 12;
    (h & 0xffff) as f64 / 65536.0
}

fn shade(c: [f64; 3], amount: f64) -> Rgb<u8> {
    Rgb(c.map(|v| (v * amount).clamp(0.0, 255.0).round() as u8))
}

/// Sky, a textured street and a row of houses with roofs, doors and windows.
/// Coordinates are relative so any size gives the same scene.
pub fn houses(width: u32, height: u32) -> RgbImage {
    let (w, h) = (width as f64, height as f64);
    let horizon = 0.72;
    // (left, right, wall top) as fractions of the frame, plus wall colour.
    let houses: [(f64, f64, f64, [f64; 3]); 3] = [
        (0.12, 0.30, 0.42, [200.0, 70.0, 60.0]),
        (0.44, 0.58, 0.50, [230.0, 200.0, 90.0]),
        (0.70, 0.90, 0.38, [70.0, 120.0, 190.0]),
    ];
    RgbImage::from_fn(width, height, |px, py| {
        let (x, y) = ((px as f64 + 0.5) / w, (py as f64 + 0.5) / h);
        let grain = 0.94 + 0.12 * noise(px, py, 7);
        for &(l, r, top, wall) in &houses {
            let mid = 0.5 * (l + r);
            let roof_h = 0.12;
            // Gabled roof.
            if y >= top - roof_h && y < top && (x - mid).abs() <= (0.5 * (r - l) + 0.02) * (y - top + roof_h) / roof_h {
                return shade([90.0, 40.0, 35.0], grain);
            }
            if x >= l && x < r && y >= top && y < horizon {
                let door = (x - mid).abs() < 0.02 && y > horizon - 0.1;
                let u = (x - l) / (r - l);
                let v = (y - top) / (horizon - top);
                let window = ((u * 4.0).fract() - 0.5).abs() < 0.22 && ((v * 3.0).fract() - 0.5).abs() < 0.2 && v < 0.62;
                return if door {
                    shade([60.0, 35.0, 20.0], grain)
                } else if window {
                    shade([250.0, 245.0, 200.0], 1.0)
                } else {
                    shade(wall, grain)
                };
            }
        }
        if y >= horizon {
            shade([110.0, 110.0, 105.0], 0.8 + 0.3 * noise(px / 3, py / 3, 11))
        } else {
            shade([150.0 - 60.0 * y, 190.0 - 40.0 * y, 240.0], 1.0)
        }
    })
}

/// A head and shoulders silhouette centred on a soft, noisy backdrop.
pub fn portrait(width: u32, height: u32) -> RgbImage {
    let (w, h) = (width as f64, height as f64);
    RgbImage::from_fn(width, height, |px, py| {
        let (x, y) = ((px as f64 + 0.5) / w, (py as f64 + 0.5) / h);
        let face = ((x - 0.5) / 0.16).powi(2) + ((y - 0.38) / 0.2).powi(2);
        let eyes = [(0.44, 0.34), (0.56, 0.34)]
            .iter()
            .any(|&(ex, ey)| ((x - ex) / 0.025).powi(2) + ((y - ey) / 0.018).powi(2) < 1.0);
        let mouth = (x - 0.5).abs() < 0.05 && (y - 0.47).abs() < 0.008;
        let shoulders = y > 0.62 && ((x - 0.5) / 0.38).powi(2) + ((y - 1.0) / 0.4).powi(2) < 1.0;
        if eyes || mouth {
            shade([40.0, 25.0, 25.0], 1.0)
        } else if face < 1.0 {
            shade([235.0, 190.0, 160.0], 1.0 - 0.15 * face)
        } else if shoulders {
            shade([50.0, 70.0, 140.0], 0.9 + 0.1 * noise(px, py, 3))
        } else {
            shade([120.0 + 40.0 * x, 140.0, 110.0], 0.9 + 0.15 * noise(px / 2, py / 2, 5))
        }
    })
}
