//! Exact per-triangle predicates shared by the BVH queries and their
//! brute-force counterparts.

use nalgebra::Vector3;

type V3 = Vector3<f64>;

/// Hits closer than this (mm) along a ray are ignored.
pub const RAY_T_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: V3,
    pub max: V3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: V3::repeat(f64::INFINITY),
            max: V3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a V3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &V3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Inflate by an absolute margin plus a relative one proportional to the
    /// coordinate magnitude, so rounding in the leaf predicates can never
    /// produce a hit outside its node's bounds.
    pub fn padded(&self) -> Aabb {
        let pad = |v: f64| 1e-7 + 1e-9 * v.abs();
        Aabb {
            min: self.min.map(|v| v - pad(v)),
            max: self.max.map(|v| v + pad(v)),
        }
    }

    pub fn center(&self) -> V3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> V3 {
        self.max - self.min
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains(&self, p: &V3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &V3) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
                d * d
            })
            .sum()
    }

    /// Entry parameter of the ray into the slab intersection, if any part of
    /// `[0, t_max]` lies inside the box.
    pub fn ray_entry(&self, origin: &V3, dir: &V3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut ta = (self.min[i] - origin[i]) * inv;
            let mut tb = (self.max[i] - origin[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Möller–Trumbore ray/triangle intersection. Returns the ray parameter of
/// the hit when it exceeds [`RAY_T_MIN`]. Edges and vertices count as hits.
pub fn ray_triangle(origin: &V3, dir: &V3, a: &V3, b: &V3, c: &V3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > RAY_T_MIN).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &V3, a: &V3, b: &V3, c: &V3) -> V3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Separating-axis test between a triangle and the axis-aligned box
/// `[-half, half]` (triangle already expressed in the box frame). Touching
/// counts as overlap.
pub fn triangle_box_overlap(half: &V3, v0: &V3, v1: &V3, v2: &V3) -> bool {
    // box face normals
    for i in 0..3 {
        let lo = v0[i].min(v1[i]).min(v2[i]);
        let hi = v0[i].max(v1[i]).max(v2[i]);
        if lo > half[i] || hi < -half[i] {
            return false;
        }
    }

    let edges = [v1 - v0, v2 - v1, v0 - v2];
    // edge × box-axis cross products
    for e in &edges {
        for axis_index in 0..3 {
            let mut unit = V3::zeros();
            unit[axis_index] = 1.0;
            let axis = unit.cross(e);
            if axis.norm_squared() < 1e-24 {
                continue;
            }
            let p0 = axis.dot(v0);
            let p1 = axis.dot(v1);
            let p2 = axis.dot(v2);
            let r = half[0] * axis[0].abs() + half[1] * axis[1].abs() + half[2] * axis[2].abs();
            let lo = p0.min(p1).min(p2);
            let hi = p0.max(p1).max(p2);
            if lo > r || hi < -r {
                return false;
            }
        }
    }

    // triangle plane
    let n = edges[0].cross(&edges[1]);
    let d = n.dot(v0);
    let r = half[0] * n[0].abs() + half[1] * n[1].abs() + half[2] * n[2].abs();
    d.abs() <= r
}

pub fn triangle_area(a: &V3, b: &V3, c: &V3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}
