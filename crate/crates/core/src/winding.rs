//! Winding numbers of closed image curves and surfaces around a point.

use std::f64::consts::PI;

use crate::Vec3;

/// Winding number of the closed polygon `pts` (first two coordinates)
/// around `p`; `None` when `p` lies on the polygon.
pub fn winding_number(pts: &[Vec3], p: &Vec3) -> Option<i32> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let mut total = 0.0;
    for k in 0..n {
        let a = pts[k] - p;
        let b = pts[(k + 1) % n] - p;
        if point_segment_distance(p, &pts[k], &pts[(k + 1) % n]) == 0.0 {
            return None;
        }
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        total += cross.atan2(dot);
    }
    Some((total / (2.0 * PI)).round() as i32)
}

fn orient(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 <= 0.0 && o3 * o4 <= 0.0 && !(o1 == 0.0 && o2 == 0.0 && o3 == 0.0 && o4 == 0.0 && {
        // collinear: overlap test on the projections
        let span = |x: &Vec3, y: &Vec3, z: &Vec3, w: &Vec3, ax: usize| {
            x[ax].max(y[ax]) < z[ax].min(w[ax]) || z[ax].max(w[ax]) < x[ax].min(y[ax])
        };
        span(a, b, c, d, 0) || span(a, b, c, d, 1)
    })
}

/// No two non-adjacent edges of the closed polygon meet.
pub fn is_simple(pts: &[Vec3]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Euclidean distance (first two coordinates) from `p` to segment `ab`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Distance from `p` to the closed polygon.
pub fn distance_to_polygon(pts: &[Vec3], p: &Vec3) -> f64 {
    (0..pts.len())
        .map(|k| point_segment_distance(p, &pts[k], &pts[(k + 1) % pts.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Triangulated unit sphere: an icosahedron subdivided `levels` times
/// (42 vertices and 80 faces for one level). Faces are counter-clockwise
/// seen from outside.
pub fn icosphere(levels: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut cache = std::collections::BTreeMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Signed volume enclosed by the triangulated surface relative to `p`.
pub fn signed_volume(verts: &[Vec3], faces: &[[usize; 3]], p: &Vec3) -> f64 {
    faces
        .iter()
        .map(|[a, b, c]| (verts[*a] - p).dot(&(verts[*b] - p).cross(&(verts[*c] - p))) / 6.0)
        .sum()
}

/// Solid-angle winding number of a closed triangulated surface around `p`.
pub fn surface_winding(verts: &[Vec3], faces: &[[usize; 3]], p: &Vec3) -> Option<i32> {
    let mut total = 0.0;
    for [a, b, c] in faces {
        let (x, y, z) = (verts[*a] - p, verts[*b] - p, verts[*c] - p);
        let (lx, ly, lz) = (x.norm(), y.norm(), z.norm());
        if lx == 0.0 || ly == 0.0 || lz == 0.0 {
            return None;
        }
        let num = x.dot(&y.cross(&z));
        let den = lx * ly * lz + x.dot(&y) * lz + y.dot(&z) * lx + z.dot(&x) * ly;
        total += 2.0 * num.atan2(den);
    }
    Some((total / (4.0 * PI)).round() as i32)
}
