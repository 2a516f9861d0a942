use nalgebra::Vector3;

use super::geom::Aabb;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub bounds: Aabb,
    /// Leaf: range into `Bvh::order`. Interior: `start` is the right child, left child is `self + 1`.
    pub start: u32,
    pub count: u32,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Axis-aligned bounding-volume hierarchy over triangle indices, stored
/// depth-first in a flat array.
#[derive(Debug, Clone)]
pub struct Bvh {
    pub(crate) nodes: Vec<Node>,
    pub(crate) order: Vec<u32>,
}

impl Bvh {
    pub fn build(vertices: &[Vector3<f64>], triangles: &[[u32; 3]]) -> Bvh {
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i as usize])).padded())
            .collect();
        let centroids: Vec<Vector3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_recursive(&boxes, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Bvh { nodes, order }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(bvh: &Bvh, i: usize) -> usize {
            let n = &bvh.nodes[i];
            if n.is_leaf() {
                1
            } else {
                1 + walk(bvh, i + 1).max(walk(bvh, n.start as usize))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    pub(crate) fn leaf_triangles(&self, node: &Node) -> &[u32] {
        &self.order[node.start as usize..(node.start + node.count) as usize]
    }
}

fn build_recursive(
    boxes: &[Aabb],
    centroids: &[Vector3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let slice = &mut order[start..end];
    let bounds = slice
        .iter()
        .fold(Aabb::empty(), |acc, &i| acc.merge(&boxes[i as usize]));
    let index = nodes.len();
    nodes.push(Node {
        bounds,
        start: start as u32,
        count: slice.len() as u32,
    });
    if slice.len() <= LEAF_SIZE {
        return index;
    }

    let centroid_bounds = Aabb::from_points(slice.iter().map(|&i| &centroids[i as usize]));
    let extent = centroid_bounds.extent();
    let axis = extent.imax();
    if extent[axis] <= 0.0 {
        return index;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });

    nodes[index].count = 0;
    build_recursive(boxes, centroids, order, start, start + mid, nodes);
    let right = build_recursive(boxes, centroids, order, start + mid, end, nodes);
    nodes[index].start = right as u32;
    index
}
