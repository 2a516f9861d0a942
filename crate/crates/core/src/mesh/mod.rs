//! Indexed triangle meshes with BVH-accelerated queries.

mod bvh;
pub mod degrade;
pub mod geom;
pub mod io;
pub mod primitives;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;

pub use bvh::Bvh;
pub use degrade::{degrade_mesh, DegradeParams};
pub use io::{load_mesh, load_mesh_with_units, write_obj, Units};

use crate::error::{Error, Result};
use crate::se3::RigidTransform;
use crate::seed;
use geom::Aabb;

type V3 = Vector3<f64>;

/// Triangles with area at or below this (mm²) are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<V3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<V3>,
    areas: Vec<f64>,
    bvh: Bvh,
    diameter: f64,
    degenerate_removed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub point: V3,
    pub normal: V3,
    pub face_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub face_index: usize,
    pub normal: V3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: V3,
    pub distance: f64,
    pub face_index: usize,
}

impl TriMesh {
    /// Build a mesh, dropping degenerate triangles. Vertex order is kept as given.
    pub fn new(vertices: Vec<V3>, triangles: Vec<[u32; 3]>) -> Result<TriMesh> {
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Content(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Content(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area <= DEGENERATE_AREA {
                continue;
            }
            kept.push(*t);
            normals.push(cross.normalize());
            areas.push(area);
        }
        let degenerate_removed = triangles.len() - kept.len();
        if kept.is_empty() {
            return Err(Error::Content("mesh has no non-degenerate triangles".into()));
        }
        let diameter = max_pairwise_distance(&vertices);
        if diameter <= 0.0 {
            return Err(Error::Content("mesh diameter is zero".into()));
        }
        let bvh = Bvh::build(&vertices, &kept);
        Ok(TriMesh {
            vertices,
            triangles: kept,
            normals,
            areas,
            bvh,
            diameter,
            degenerate_removed,
        })
    }

    pub fn vertices(&self) -> &[V3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn face_normals(&self) -> &[V3] {
        &self.normals
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn degenerate_removed(&self) -> usize {
        self.degenerate_removed
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn triangle(&self, face: usize) -> [V3; 3] {
        self.triangles[face].map(|i| self.vertices[i as usize])
    }

    /// Apply a rigid transform to every vertex.
    pub fn transformed(&self, t: &RigidTransform) -> Result<TriMesh> {
        let vertices = self.vertices.iter().map(|v| t.transform_point(v)).collect();
        TriMesh::new(vertices, self.triangles.clone())
    }

    /// Nearest hit along a unit-length ray with distance above [`geom::RAY_T_MIN`].
    /// Equal distances resolve to the lowest face index.
    pub fn ray_cast(&self, origin: &V3, direction: &V3) -> Result<Option<RayHit>> {
        check_unit(direction)?;
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.bvh.nodes[i];
            let limit = best.map_or(f64::INFINITY, |b| b.0);
            match node.bounds.ray_entry(origin, direction, limit) {
                Some(_) => {}
                None => continue,
            }
            if node.is_leaf() {
                for &f in self.bvh.leaf_triangles(node) {
                    let [a, b, c] = self.triangle(f as usize);
                    if let Some(t) = geom::ray_triangle(origin, direction, &a, &b, &c) {
                        if better_hit(t, f as usize, best) {
                            best = Some((t, f as usize));
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(i + 1);
            }
        }
        Ok(best.map(|(distance, face_index)| RayHit {
            distance,
            face_index,
            normal: self.normals[face_index],
        }))
    }

    /// Brute-force counterpart of [`TriMesh::ray_cast`] over every triangle.
    pub fn ray_cast_brute_force(&self, origin: &V3, direction: &V3) -> Result<Option<RayHit>> {
        check_unit(direction)?;
        let mut best: Option<(f64, usize)> = None;
        for f in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(f);
            if let Some(t) = geom::ray_triangle(origin, direction, &a, &b, &c) {
                if better_hit(t, f, best) {
                    best = Some((t, f));
                }
            }
        }
        Ok(best.map(|(distance, face_index)| RayHit {
            distance,
            face_index,
            normal: self.normals[face_index],
        }))
    }

    /// Exact closest surface point. Equal distances resolve to the lowest face index.
    pub fn closest_point(&self, p: &V3) -> ClosestPoint {
        let mut best = (f64::INFINITY, usize::MAX, *p);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.bvh.nodes[i];
            if node.bounds.distance_squared(p) > best.0 {
                continue;
            }
            if node.is_leaf() {
                for &f in self.bvh.leaf_triangles(node) {
                    let [a, b, c] = self.triangle(f as usize);
                    let q = geom::closest_point_on_triangle(p, &a, &b, &c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && (f as usize) < best.1) {
                        best = (d2, f as usize, q);
                    }
                }
            } else {
                // visit the nearer child first
                let left = i + 1;
                let right = node.start as usize;
                let dl = self.bvh.nodes[left].bounds.distance_squared(p);
                let dr = self.bvh.nodes[right].bounds.distance_squared(p);
                if dl <= dr {
                    stack.push(right);
                    stack.push(left);
                } else {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        ClosestPoint {
            point: best.2,
            distance: best.0.sqrt(),
            face_index: best.1,
        }
    }

    pub fn closest_point_brute_force(&self, p: &V3) -> ClosestPoint {
        let mut best = (f64::INFINITY, usize::MAX, *p);
        for f in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(f);
            let q = geom::closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if d2 < best.0 {
                best = (d2, f, q);
            }
        }
        ClosestPoint {
            point: best.2,
            distance: best.0.sqrt(),
            face_index: best.1,
        }
    }

    /// Whether the oriented box with half extents `half` placed by `t_box`
    /// touches the mesh placed by `t_mesh`. A mesh lying entirely inside the
    /// box reports true, since its triangles then overlap the box themselves;
    /// a box buried inside a closed mesh reports true through a
    /// point-in-mesh test on its center.
    pub fn box_overlap(&self, t_mesh: &RigidTransform, half: &V3, t_box: &RigidTransform) -> bool {
        let mesh_to_box = t_box.inverse().compose(t_mesh);
        let box_in_mesh = mesh_to_box.inverse();
        // axis-aligned bounds of the oriented box, in the mesh frame
        let r = box_in_mesh.rotation();
        let reach = V3::from_fn(|i, _| (0..3).map(|j| r[(i, j)].abs() * half[j]).sum::<f64>());
        let c = box_in_mesh.translation();
        let query = Aabb {
            min: c - reach,
            max: c + reach,
        }
        .padded();

        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.bvh.nodes[i];
            if !node.bounds.overlaps(&query) {
                continue;
            }
            if node.is_leaf() {
                for &f in self.bvh.leaf_triangles(node) {
                    let [a, b, c] = self.triangle(f as usize).map(|v| mesh_to_box.transform_point(&v));
                    if geom::triangle_box_overlap(half, &a, &b, &c) {
                        return true;
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(i + 1);
            }
        }
        self.contains_point(c)
    }

    pub fn box_overlap_brute_force(
        &self,
        t_mesh: &RigidTransform,
        half: &V3,
        t_box: &RigidTransform,
    ) -> bool {
        let mesh_to_box = t_box.inverse().compose(t_mesh);
        let touches = (0..self.triangles.len()).any(|f| {
            let [a, b, c] = self.triangle(f).map(|v| mesh_to_box.transform_point(&v));
            geom::triangle_box_overlap(half, &a, &b, &c)
        });
        let center = mesh_to_box.inverse().translation().to_owned();
        touches
            || CONTAINS_DIRS
                .iter()
                .filter(|d| {
                    let d = V3::from(**d).normalize();
                    let hits = (0..self.triangles.len())
                        .filter(|&f| {
                            let [a, b, c] = self.triangle(f);
                            geom::ray_triangle(&center, &d, &a, &b, &c).is_some()
                        })
                        .count();
                    hits % 2 == 1
                })
                .count()
                >= 2
    }

    /// Inside/outside by ray parity, majority vote over three skewed directions.
    /// Meaningful for closed meshes; open meshes get a best-effort answer.
    pub fn contains_point(&self, p: &V3) -> bool {
        let votes = CONTAINS_DIRS
            .iter()
            .filter(|d| {
                let d = V3::from(**d).normalize();
                self.count_crossings(p, &d) % 2 == 1
            })
            .count();
        votes >= 2
    }

    fn count_crossings(&self, origin: &V3, dir: &V3) -> usize {
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.bvh.nodes[i];
            if node.bounds.ray_entry(origin, dir, f64::INFINITY).is_none() {
                continue;
            }
            if node.is_leaf() {
                for &f in self.bvh.leaf_triangles(node) {
                    let [a, b, c] = self.triangle(f as usize);
                    if geom::ray_triangle(origin, dir, &a, &b, &c).is_some() {
                        count += 1;
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(i + 1);
            }
        }
        count
    }

    /// Area-weighted uniform samples, deterministic per seed.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
        if n == 0 {
            return Err(Error::Parameter("sample count must be > 0".into()));
        }
        let sampler = SurfaceSampler::new(self);
        let mut rng = seed::rng(seed);
        Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
    }
}

// skewed so rays rarely graze edges of axis-aligned geometry
const CONTAINS_DIRS: [[f64; 3]; 3] = [
    [0.577_215_664_9, 0.618_033_988_7, 0.533_012_368_5],
    [-0.707_106_781_2, 0.141_421_356_2, 0.692_820_323_0],
    [0.173_205_080_8, -0.812_403_840_5, -0.556_776_436_3],
];

fn better_hit(t: f64, face: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, bf)) => t < bt || (t == bt && face < bf),
    }
}

fn check_unit(direction: &V3) -> Result<()> {
    let n = direction.norm();
    if (n - 1.0).abs() > 1e-6 || !n.is_finite() {
        return Err(Error::Parameter(format!(
            "ray direction must be unit length, has norm {n}"
        )));
    }
    Ok(())
}

fn max_pairwise_distance(vertices: &[V3]) -> f64 {
    let row = |i: usize| {
        let a = vertices[i];
        vertices[i + 1..]
            .iter()
            .map(|b| (a - b).norm_squared())
            .fold(0.0f64, f64::max)
    };
    let best = if vertices.len() > 4096 {
        (0..vertices.len()).into_par_iter().map(row).reduce(|| 0.0, f64::max)
    } else {
        (0..vertices.len()).map(row).fold(0.0, f64::max)
    };
    best.sqrt()
}

/// Draws area-weighted surface samples one at a time.
#[derive(Debug, Clone)]
pub struct SurfaceSampler<'a> {
    mesh: &'a TriMesh,
    cumulative: Vec<f64>,
}

impl<'a> SurfaceSampler<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let mut acc = 0.0;
        let cumulative = mesh
            .areas
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        Self { mesh, cumulative }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> SurfaceSample {
        let total = *self.cumulative.last().expect("mesh is non-empty");
        let u: f64 = rng.random::<f64>() * total;
        let face = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let [a, b, c] = self.mesh.triangle(face);
        let point = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        SurfaceSample {
            point,
            normal: self.mesh.normals[face],
            face_index: face,
        }
    }
}

/// Symmetric Chamfer distance on surface samples: the mean distance from
/// samples of `a` to `b` and from samples of `b` to `a`, averaged. Both
/// meshes are sampled with the same seed, so swapping arguments gives the
/// same value.
pub fn chamfer_distance(a: &TriMesh, b: &TriMesh, n_samples: usize, seed: u64) -> Result<f64> {
    let sa = a.sample_surface(n_samples, seed)?;
    let sb = b.sample_surface(n_samples, seed)?;
    let one_way = |samples: &[SurfaceSample], target: &TriMesh| {
        samples
            .iter()
            .map(|s| target.closest_point(&s.point).distance)
            .sum::<f64>()
            / samples.len() as f64
    };
    Ok((one_way(&sa, b) + one_way(&sb, a)) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::primitives;
    use super::*;

    #[test]
    fn cube_basics() {
        let cube = primitives::cube(40.0);
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.triangle_count(), 12);
        assert!((cube.diameter() - 40.0 * 3f64.sqrt()).abs() < 1e-12);
        for n in cube.face_normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
        assert!((cube.surface_area() - 6.0 * 1600.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_triangles_are_filtered() {
        let v = vec![
            V3::new(0.0, 0.0, 0.0),
            V3::new(1.0, 0.0, 0.0),
            V3::new(0.0, 1.0, 0.0),
            V3::new(2.0, 0.0, 0.0),
        ];
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.degenerate_removed(), 1);
        assert!(TriMesh::new(vec![V3::zeros(); 3], vec![[0, 1, 2]]).is_err());
        assert!(TriMesh::new(vec![V3::zeros(); 3], vec![[0, 1, 5]]).is_err());
    }

    #[test]
    fn ray_from_cube_center() {
        let cube = primitives::cube(40.0);
        let hit = cube.ray_cast(&V3::zeros(), &V3::x()).unwrap().unwrap();
        assert!((hit.distance - 20.0).abs() < 1e-12);
        assert_eq!(hit.normal, V3::x());
        let miss = cube.ray_cast(&V3::new(50.0, 0.0, 0.0), &V3::x()).unwrap();
        assert!(miss.is_none());
        assert!(matches!(
            cube.ray_cast(&V3::zeros(), &V3::new(2.0, 0.0, 0.0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn closest_point_analytic() {
        let cube = primitives::cube(40.0);
        let c = cube.closest_point(&V3::zeros());
        assert!((c.distance - 20.0).abs() < 1e-12);
        let corner = cube.vertices()[3];
        assert_eq!(cube.closest_point(&corner).distance, 0.0);
    }

    #[test]
    fn box_overlap_containment_and_distance() {
        let cube = primitives::cube(40.0);
        let i = RigidTransform::identity();
        assert!(cube.box_overlap(&i, &V3::new(1.0, 1.0, 1.0), &i));
        assert!(cube.box_overlap(&i, &V3::new(100.0, 100.0, 100.0), &i));
        let far = RigidTransform::from_translation(V3::new(200.0, 0.0, 0.0));
        assert!(!cube.box_overlap(&i, &V3::new(5.0, 5.0, 5.0), &far));
    }

    #[test]
    fn contains_point_on_closed_mesh() {
        let cube = primitives::cube(40.0);
        assert!(cube.contains_point(&V3::new(1.0, 2.0, 3.0)));
        assert!(!cube.contains_point(&V3::new(30.0, 2.0, 3.0)));
    }

    #[test]
    fn surface_sampling_is_area_weighted_and_deterministic() {
        let cube = primitives::cube(40.0);
        let n = 100_000;
        let samples = cube.sample_surface(n, 3).unwrap();
        assert_eq!(samples, cube.sample_surface(n, 3).unwrap());
        let mut per_side = [0usize; 6];
        for s in &samples {
            let axis = s.normal.iamax();
            let side = axis * 2 + usize::from(s.normal[axis] > 0.0);
            per_side[side] += 1;
            assert!(s.point.iter().all(|c| c.abs() <= 20.0 + 1e-9));
        }
        // multinomial 3σ bound
        let p = 1.0 / 6.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for count in per_side {
            let frac = count as f64 / n as f64;
            assert!((frac - p).abs() < 0.01);
            assert!((frac - p).abs() < 3.0 * sigma, "{frac}");
        }
        let one = cube.sample_surface(1, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(cube.closest_point(&one[0].point).distance < 1e-9);
        assert!(cube.sample_surface(0, 5).is_err());
    }

    #[test]
    fn samples_lie_on_their_faces() {
        let sphere = primitives::icosphere(30.0, 2);
        for s in sphere.sample_surface(500, 1).unwrap() {
            let [a, _, _] = sphere.triangle(s.face_index);
            assert!((s.point - a).dot(&s.normal).abs() < 1e-6);
        }
    }

    #[test]
    fn chamfer_properties() {
        let a = primitives::cube(40.0);
        let b = a
            .transformed(&RigidTransform::from_translation(V3::new(1.0, 0.0, 0.0)))
            .unwrap();
        assert!(chamfer_distance(&a, &a, 10_000, 1).unwrap() < 1e-6);
        let ab = chamfer_distance(&a, &b, 2_000, 1).unwrap();
        let ba = chamfer_distance(&b, &a, 2_000, 1).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0 && ab <= 1.0, "{ab}");
    }
}
