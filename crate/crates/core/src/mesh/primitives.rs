//! Closed, outward-oriented primitive meshes centered on the origin (mm).

use std::collections::HashMap;

use nalgebra::Vector3;

use super::TriMesh;

type V3 = Vector3<f64>;

fn build(vertices: Vec<V3>, triangles: Vec<[u32; 3]>) -> TriMesh {
    TriMesh::new(vertices, triangles).expect("primitive construction is valid")
}

/// Axis-aligned box with 8 vertices and 12 triangles.
pub fn cuboid(size: V3) -> TriMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            V3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
    ];
    build(vertices, triangles)
}

pub fn cube(edge: f64) -> TriMesh {
    cuboid(V3::repeat(edge))
}

/// Box whose faces are each split into an `n × n` grid of quads, with
/// shared vertices along the seams.
pub fn subdivided_cuboid(size: V3, n: usize) -> TriMesh {
    let n = n.max(1);
    let h = size / 2.0;
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    // integer lattice key keeps seam vertices shared
    let mut vertex = |g: [i64; 3]| -> u32 {
        *index.entry(g).or_insert_with(|| {
            let p = V3::new(
                -h.x + size.x * g[0] as f64 / n as f64,
                -h.y + size.y * g[1] as f64 / n as f64,
                -h.z + size.z * g[2] as f64 / n as f64,
            );
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };
    let n_i = n as i64;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n_i] {
            for i in 0..n_i {
                for j in 0..n_i {
                    let grid = |di: i64, dj: i64| {
                        let mut g = [0i64; 3];
                        g[axis] = side;
                        g[u] = i + di;
                        g[v] = j + dj;
                        g
                    };
                    let a = vertex(grid(0, 0));
                    let b = vertex(grid(1, 0));
                    let c = vertex(grid(1, 1));
                    let d = vertex(grid(0, 1));
                    // (u, v, axis) is right-handed, so a→b→c faces +axis
                    if side == n_i {
                        triangles.push([a, b, c]);
                        triangles.push([a, c, d]);
                    } else {
                        triangles.push([a, c, b]);
                        triangles.push([a, d, c]);
                    }
                }
            }
        }
    }
    build(vertices, triangles)
}

pub fn subdivided_cube(edge: f64, n: usize) -> TriMesh {
    subdivided_cuboid(V3::repeat(edge), n)
}

/// Closed cylinder along z, `segments` facets around, with cap-center vertices.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    let segments = segments.max(3);
    let h = height / 2.0;
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for z in [-h, h] {
        for k in 0..segments {
            let a = std::f64::consts::TAU * k as f64 / segments as f64;
            vertices.push(V3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom_center = vertices.len() as u32;
    vertices.push(V3::new(0.0, 0.0, -h));
    let top_center = vertices.len() as u32;
    vertices.push(V3::new(0.0, 0.0, h));
    let s = segments as u32;
    let mut triangles = Vec::with_capacity(4 * segments);
    for k in 0..s {
        let k1 = (k + 1) % s;
        let (b0, b1, t0, t1) = (k, k1, k + s, k1 + s);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([bottom_center, b1, b0]);
        triangles.push([top_center, t0, t1]);
    }
    build(vertices, triangles)
}

/// Icosahedron refined `subdivisions` times with vertices projected to the sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<V3> = [
        [-1.0, phi, 0.0], [1.0, phi, 0.0], [-1.0, -phi, 0.0], [1.0, -phi, 0.0],
        [0.0, -1.0, phi], [0.0, 1.0, phi], [0.0, -1.0, -phi], [0.0, 1.0, -phi],
        [phi, 0.0, -1.0], [phi, 0.0, 1.0], [-phi, 0.0, -1.0], [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| V3::from(*p).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<V3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) / 2.0).normalize();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    build(vertices, faces)
}

/// Extrude a polygon (counter-clockwise in xy, star-shaped about vertex 0)
/// along z by `depth`, centered on its bounding box.
fn extrude(outline: &[[f64; 2]], depth: f64) -> TriMesh {
    let n = outline.len() as u32;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in outline {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let cx = (lo[0] + hi[0]) / 2.0;
    let cy = (lo[1] + hi[1]) / 2.0;
    let h = depth / 2.0;
    let mut vertices = Vec::new();
    for z in [-h, h] {
        for p in outline {
            vertices.push(V3::new(p[0] - cx, p[1] - cy, z));
        }
    }
    let mut triangles = Vec::new();
    for k in 1..n - 1 {
        triangles.push([0, k + 1, k]); // bottom faces -z
        triangles.push([n, n + k, n + k + 1]); // top faces +z
    }
    for k in 0..n {
        let k1 = (k + 1) % n;
        triangles.push([k, k1, k1 + n]);
        triangles.push([k, k1 + n, k + n]);
    }
    build(vertices, triangles)
}

/// L-shaped bracket: two `leg × thickness` arms joined at a corner, extruded by `depth`.
pub fn l_bracket(leg: f64, thickness: f64, depth: f64) -> TriMesh {
    extrude(
        &[
            [0.0, 0.0],
            [leg, 0.0],
            [leg, thickness],
            [thickness, thickness],
            [thickness, leg],
            [0.0, leg],
        ],
        depth,
    )
}

/// Triangular prism with an isosceles cross-section in the xz plane: base
/// of width `base` at the bottom, apex angle `apex_deg` at the top, extruded
/// along y by `depth`.
pub fn wedge(base: f64, apex_deg: f64, depth: f64) -> TriMesh {
    let height = (base / 2.0) / (apex_deg.to_radians() / 2.0).tan();
    let outline = [[-base / 2.0, 0.0], [base / 2.0, 0.0], [0.0, height]];
    // extrude works in xy; rotate so the profile lies in xz and depth runs along y
    let m = extrude(&outline, depth);
    let vertices = m
        .vertices()
        .iter()
        .map(|v| V3::new(v.x, -v.z, v.y))
        .collect();
    build(vertices, m.triangles().to_vec())
}
