use crate::error::{Error, Result};
use crate::model::BodyShape;
use crate::Vec3;

/// Estimated thickness ratio for one shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftThickness {
    pub shift: Vec3,
    /// `max_y meas((S_Δ) ∩ L_η^y) / |h|`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThicknessReport {
    pub per_shift: Vec<ShiftThickness>,
}

impl ThicknessReport {
    /// Largest ratio over all shifts: the estimate of `K_S`.
    pub fn constant(&self) -> Option<f64> {
        self.per_shift.iter().map(|s| s.ratio).reduce(f64::max)
    }
}

/// Measure of `[a0, a1] Δ [b0, b1]`.
fn symmetric_difference(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> f64 {
    let len = |x: Option<(f64, f64)>| x.map_or(0.0, |(s, e)| (e - s).max(0.0));
    let common = match (a, b) {
        (Some((a0, a1)), Some((b0, b1))) => (a1.min(b1) - a0.max(b0)).max(0.0),
        _ => 0.0,
    };
    len(a) + len(b) - 2.0 * common
}

fn orthonormal_complement(eta: &Vec3, dim: usize) -> Vec<Vec3> {
    if dim == 2 {
        return vec![Vec3::new(-eta[1], eta[0], 0.0)];
    }
    let helper = if eta[0].abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = eta.cross(&helper).normalize();
    let w = eta.cross(&u);
    vec![u, w]
}

/// Estimates the thickness constant `K_S` of the symmetric difference
/// `(h + S(0)) Δ S(0)`, measured along lines parallel to `η = h / |h|`.
///
/// Each shift is probed by `lines` parallel lines per transverse axis spread
/// over the circumscribed ball. Shifts must satisfy `0 < |h| <= r`.
pub fn h2_thickness_constant(
    shape: &BodyShape,
    shifts: &[Vec3],
    lines: usize,
) -> Result<ThicknessReport> {
    let dim = shape.dim();
    let r = shape.circumscribed_radius();
    let lines = lines.max(1);
    let mut report = ThicknessReport::default();
    for shift in shifts {
        let len = (0..dim).map(|a| shift[a] * shift[a]).sum::<f64>().sqrt();
        if len <= 1e-12 * r {
            return Err(Error::DegenerateShift(len));
        }
        if len > r * (1.0 + 1e-12) {
            return Err(Error::InvalidShape(format!(
                "shift length {len} exceeds h0 = {r}"
            )));
        }
        let eta = shift / len;
        let basis = orthonormal_complement(&eta, dim);
        let offset = |k: usize| -r + (k as f64 + 0.5) * 2.0 * r / lines as f64;
        let mut worst: f64 = 0.0;
        let second = if dim == 3 { lines } else { 1 };
        for k in 0..lines {
            for m in 0..second {
                let mut y = basis[0] * offset(k);
                if dim == 3 {
                    y += basis[1] * offset(m);
                }
                let base = shape.chord(&y, &eta);
                let moved = base.map(|(a, b)| (a + len, b + len));
                worst = worst.max(symmetric_difference(base, moved));
            }
        }
        report.per_shift.push(ShiftThickness {
            shift: *shift,
            ratio: worst / len,
        });
    }
    Ok(report)
}
