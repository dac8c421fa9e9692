use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;
use crate::Vec3;

/// Reference body part `S(0)`, centered at the origin.
///
/// Rectangle and box parameters are half-extents along the coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BodyShape {
    Rectangle { p: f64, q: f64 },
    Disc { r: f64 },
    Box { p: f64, q: f64, s: f64 },
    Ball { r: f64 },
}

impl BodyShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BodyShape::Rectangle { p, q } => positive(&[p, q]),
            BodyShape::Disc { r } | BodyShape::Ball { r } => positive(&[r]),
            BodyShape::Box { p, q, s } => positive(&[p, q, s]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShape(format!("{self:?}: sizes must be positive")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BodyShape::Rectangle { .. } | BodyShape::Disc { .. } => 2,
            BodyShape::Box { .. } | BodyShape::Ball { .. } => 3,
        }
    }

    /// Exact area or volume.
    pub fn measure(&self) -> f64 {
        match *self {
            BodyShape::Rectangle { p, q } => 4.0 * p * q,
            BodyShape::Disc { r } => PI * r * r,
            BodyShape::Box { p, q, s } => 8.0 * p * q * s,
            BodyShape::Ball { r } => 4.0 / 3.0 * PI * r * r * r,
        }
    }

    /// Radius of the smallest origin-centered ball containing the shape.
    pub fn circumscribed_radius(&self) -> f64 {
        match *self {
            BodyShape::Rectangle { p, q } => p.hypot(q),
            BodyShape::Disc { r } | BodyShape::Ball { r } => r,
            BodyShape::Box { p, q, s } => (p * p + q * q + s * s).sqrt(),
        }
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn half_extents(&self) -> Vec3 {
        match *self {
            BodyShape::Rectangle { p, q } => Vec3::new(p, q, 0.0),
            BodyShape::Disc { r } => Vec3::new(r, r, 0.0),
            BodyShape::Box { p, q, s } => Vec3::new(p, q, s),
            BodyShape::Ball { r } => Vec3::new(r, r, r),
        }
    }

    /// The same shape with its first two axes exchanged.
    pub fn swapped(&self) -> Self {
        match *self {
            BodyShape::Rectangle { p, q } => BodyShape::Rectangle { p: q, q: p },
            BodyShape::Box { p, q, s } => BodyShape::Box { p: q, q: p, s },
            other => other,
        }
    }

    /// Membership of the open shape (point relative to the center).
    pub fn contains(&self, x: &Vec3) -> bool {
        match *self {
            BodyShape::Rectangle { p, q } => x[0].abs() < p && x[1].abs() < q,
            BodyShape::Disc { r } => x[0] * x[0] + x[1] * x[1] < r * r,
            BodyShape::Box { p, q, s } => x[0].abs() < p && x[1].abs() < q && x[2].abs() < s,
            BodyShape::Ball { r } => x.norm_squared() < r * r,
        }
    }

    /// Exact measure of the shape centered at `center` intersected with the
    /// axis-aligned box `[lo, hi]`.
    pub fn coverage(&self, center: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
        let a = lo - center;
        let b = hi - center;
        match *self {
            BodyShape::Rectangle { p, q } => overlap(a[0], b[0], p) * overlap(a[1], b[1], q),
            BodyShape::Box { p, q, s } => {
                overlap(a[0], b[0], p) * overlap(a[1], b[1], q) * overlap(a[2], b[2], s)
            }
            BodyShape::Disc { r } => disc_rect_area(r, a[0], b[0], a[1], b[1]),
            BodyShape::Ball { r } => ball_box_volume(r, &a, &b),
        }
    }

    /// Parameter interval `[t0, t1]` where the line `origin + t * dir`
    /// (`|dir| = 1`) crosses the closed shape centered at the origin.
    pub fn chord(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        match *self {
            BodyShape::Rectangle { p, q } => slab(origin, dir, &Vec3::new(p, q, 0.0), 2),
            BodyShape::Box { p, q, s } => slab(origin, dir, &Vec3::new(p, q, s), 3),
            BodyShape::Disc { r } | BodyShape::Ball { r } => {
                let d = self.dim();
                let (mut od, mut oo, mut dd) = (0.0, 0.0, 0.0);
                for a in 0..d {
                    od += origin[a] * dir[a];
                    oo += origin[a] * origin[a];
                    dd += dir[a] * dir[a];
                }
                let disc = od * od - dd * (oo - r * r);
                if disc <= 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                Some(((-od - root) / dd, (-od + root) / dd))
            }
        }
    }
}

fn positive(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite() && *x > 0.0)
}

/// Length of `[a, b] ∩ [-half, half]`.
fn overlap(a: f64, b: f64, half: f64) -> f64 {
    (b.min(half) - a.max(-half)).max(0.0)
}

fn slab(origin: &Vec3, dir: &Vec3, half: &Vec3, dim: usize) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..dim {
        if dir[a].abs() < 1e-300 {
            if origin[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let ta = (-half[a] - origin[a]) / dir[a];
        let tb = (half[a] - origin[a]) / dir[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t1 > t0).then_some((t0, t1))
}

/// Antiderivative of `sqrt(r^2 - x^2)`.
fn semicircle_primitive(r: f64, x: f64) -> f64 {
    let x = x.clamp(-r, r);
    let s = (r * r - x * x).max(0.0).sqrt();
    0.5 * (x * s + r * r * (x / r).clamp(-1.0, 1.0).asin())
}

/// Area of the disc of radius `r` at the origin intersected with
/// `[x0, x1] x [y0, y1]`, in closed form.
pub fn disc_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let xa = x0.max(-r);
    let xb = x1.min(r);
    if xb <= xa || y1 <= y0 || y0 >= r || y1 <= -r {
        return 0.0;
    }
    // whole disc inside
    if x0 <= -r && x1 >= r && y0 <= -r && y1 >= r {
        return PI * r * r;
    }
    // rectangle inside the disc
    let far_x = x0.abs().max(x1.abs());
    let far_y = y0.abs().max(y1.abs());
    if far_x * far_x + far_y * far_y <= r * r {
        return (x1 - x0) * (y1 - y0);
    }
    let mut cuts = [0.0; 6];
    cuts[0] = xa;
    cuts[1] = xb;
    let mut len = 2;
    for y in [y0, y1] {
        if y.abs() < r {
            let c = (r * r - y * y).sqrt();
            for x in [-c, c] {
                if x > xa && x < xb {
                    cuts[len] = x;
                    len += 1;
                }
            }
        }
    }
    let cuts = &mut cuts[..len];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let s = (r * r - m * m).max(0.0).sqrt();
        let top_circle = s < y1;
        let bottom_circle = -s > y0;
        let top = if top_circle { s } else { y1 };
        let bottom = if bottom_circle { -s } else { y0 };
        if top <= bottom {
            continue;
        }
        let sp = semicircle_primitive(r, b) - semicircle_primitive(r, a);
        let upper = if top_circle { sp } else { y1 * (b - a) };
        let lower = if bottom_circle { -sp } else { y0 * (b - a) };
        area += upper - lower;
    }
    area.max(0.0)
}

/// Volume of the ball of radius `r` at the origin intersected with the box
/// `[lo, hi]`, integrating exact disc/rectangle slice areas.
pub fn ball_box_volume(r: f64, lo: &Vec3, hi: &Vec3) -> f64 {
    let xa = lo[0].max(-r);
    let xb = hi[0].min(r);
    if xb <= xa {
        return 0.0;
    }
    // quick rejects and full-containment shortcuts
    let mut nearest = 0.0;
    let mut farthest = 0.0;
    for a in 0..3 {
        let d = if lo[a] > 0.0 {
            lo[a]
        } else if hi[a] < 0.0 {
            -hi[a]
        } else {
            0.0
        };
        nearest += d * d;
        let f = lo[a].abs().max(hi[a].abs());
        farthest += f * f;
    }
    if nearest >= r * r {
        return 0.0;
    }
    if farthest <= r * r {
        return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    }
    if (0..3).all(|a| lo[a] <= -r && hi[a] >= r) {
        return 4.0 / 3.0 * PI * r * r * r;
    }

    // slice radii where the disc/rectangle intersection changes structure
    let mut radii = vec![lo[1].abs(), hi[1].abs(), lo[2].abs(), hi[2].abs()];
    for y in [lo[1], hi[1]] {
        for z in [lo[2], hi[2]] {
            radii.push(y.hypot(z));
        }
    }
    let mut cuts = vec![xa, xb];
    for rho in radii {
        if rho < r {
            let c = (r * r - rho * rho).sqrt();
            for x in [-c, c] {
                if x > xa && x < xb {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let scale = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    let slice = |x: f64| {
        let rho = (r * r - x * x).max(0.0).sqrt();
        disc_rect_area(rho, lo[1], hi[1], lo[2], hi[2])
    };
    cuts.windows(2)
        .map(|w| tanh_sinh(slice, w[0], w[1], scale, 1e-13))
        .sum::<f64>()
        .max(0.0)
}
