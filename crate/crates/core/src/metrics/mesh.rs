use crate::error::{Error, Result};
use crate::exec;
use nalgebra::Vector3;

/// Triangle mesh with per-vertex correspondence ids that stay fixed over time.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    ids: Vec<u32>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} correspondence ids for {} vertices",
                ids.len(),
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("mesh vertex".into()));
        }
        let n = vertices.len() as u32;
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::ShapeMismatch(format!(
                "face {f:?} indexes past {n} vertices"
            )));
        }
        Ok(Self {
            vertices,
            faces,
            ids,
        })
    }

    /// Ids `0..V`.
    pub fn with_sequential_ids(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let ids = (0..vertices.len() as u32).collect();
        Self::new(vertices, faces, ids)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn triangle(&self, f: usize) -> [Vector3<f64>; 3] {
        self.faces[f].map(|i| Vector3::from(self.vertices[i as usize]))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Same topology, vertices replaced.
    pub fn with_vertices(&self, vertices: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(vertices, self.faces.clone(), self.ids.clone())
    }

    /// Barycentric interpolation of a per-vertex field on a face.
    pub fn interpolate(&self, field: &[[f64; 3]], face: usize, bary: [f64; 3]) -> [f64; 3] {
        let f = self.faces[face];
        std::array::from_fn(|k| {
            bary[0] * field[f[0] as usize][k]
                + bary[1] * field[f[1] as usize][k]
                + bary[2] * field[f[2] as usize][k]
        })
    }
}

/// Closest point on a mesh surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: usize,
    /// Weights of the face's three vertices.
    pub bary: [f64; 3],
    pub point: [f64; 3],
    pub distance: f64,
}

/// Exact closest point on triangle `abc` to `p` by Voronoi-region
/// classification. Returns the point and its barycentric weights.
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, other: &Aabb) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(other.lo[k]);
            self.hi[k] = self.hi[k].max(other.hi[k]);
        }
    }

    fn center(&self, k: usize) -> f64 {
        0.5 * (self.lo[k] + self.hi[k])
    }

    fn dist2(&self, p: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let d = (self.lo[k] - p[k]).max(0.0).max(p[k] - self.hi[k]);
            s += d * d;
        }
        s
    }
}

enum Node {
    Leaf {
        bbox: Aabb,
        start: usize,
        end: usize,
    },
    Inner {
        bbox: Aabb,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over boxed items answering nearest queries.
struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    fn build(boxes: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let mut nodes = Vec::new();
        if !boxes.is_empty() {
            Self::build_rec(boxes, &mut order, 0, boxes.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    fn build_rec(
        boxes: &[Aabb],
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let mut bbox = Aabb::empty();
        for &i in &order[start..end] {
            bbox.grow(&boxes[i]);
        }
        let id = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { bbox, start, end });
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (bbox.hi[a] - bbox.lo[a]).total_cmp(&(bbox.hi[b] - bbox.lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            boxes[a]
                .center(axis)
                .total_cmp(&boxes[b].center(axis))
                .then(a.cmp(&b))
        });
        nodes.push(Node::Leaf { bbox, start, end });
        let left = Self::build_rec(boxes, order, start, mid, nodes);
        let right = Self::build_rec(boxes, order, mid, end, nodes);
        nodes[id] = Node::Inner { bbox, left, right };
        id
    }

    /// Item minimizing `dist2`, lowest index on ties.
    fn nearest<R: Copy>(
        &self,
        p: &[f64; 3],
        dist2: impl Fn(usize) -> (f64, R),
    ) -> Option<(usize, f64, R)> {
        let mut best: Option<(usize, f64, R)> = None;
        let mut stack = Vec::with_capacity(64);
        if !self.nodes.is_empty() {
            stack.push(0);
        }
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if let Some((_, bd, _)) = best {
                if node.bbox().dist2(p) > bd {
                    continue;
                }
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &i in &self.order[*start..*end] {
                        let (d, r) = dist2(i);
                        let better = match best {
                            None => true,
                            Some((bi, bd, _)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((i, d, r));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let (dl, dr) = (
                        self.nodes[*left].bbox().dist2(p),
                        self.nodes[*right].bbox().dist2(p),
                    );
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }
}

/// Accelerated closest-point queries against a fixed mesh.
pub struct MeshIndex<'a> {
    mesh: &'a TriangleMesh,
    bvh: Bvh,
}

impl<'a> MeshIndex<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        if mesh.faces.is_empty() {
            return Err(Error::EmptyInput("mesh has no faces".into()));
        }
        let boxes: Vec<Aabb> = mesh
            .faces
            .iter()
            .map(|f| {
                let mut b = Aabb::empty();
                for &i in f {
                    let v = mesh.vertices[i as usize];
                    b.grow(&Aabb { lo: v, hi: v });
                }
                b
            })
            .collect();
        Ok(Self {
            mesh,
            bvh: Bvh::build(&boxes),
        })
    }

    pub fn closest(&self, p: &[f64; 3]) -> SurfacePoint {
        let q = Vector3::from(*p);
        let (face, d2, (pt, bary)) = self
            .bvh
            .nearest(p, |f| {
                let [a, b, c] = self.mesh.triangle(f);
                let (pt, bary) = closest_point_on_triangle(&q, &a, &b, &c);
                ((pt - q).norm_squared(), (pt, bary))
            })
            .expect("non-empty mesh");
        SurfacePoint {
            face,
            bary,
            point: pt.into(),
            distance: d2.sqrt(),
        }
    }
}

/// Closest surface point of every query.
pub fn nearest_on_mesh(points: &[[f64; 3]], mesh: &TriangleMesh) -> Result<Vec<SurfacePoint>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no query points".into()));
    }
    let index = MeshIndex::new(mesh)?;
    Ok(exec::map_slice(points, |_, p| index.closest(p)))
}

/// Same as [`nearest_on_mesh`] by scanning every face.
pub fn nearest_on_mesh_brute_force(
    points: &[[f64; 3]],
    mesh: &TriangleMesh,
) -> Result<Vec<SurfacePoint>> {
    if points.is_empty() || mesh.faces.is_empty() {
        return Err(Error::EmptyInput("no query points or faces".into()));
    }
    Ok(points
        .iter()
        .map(|p| {
            let q = Vector3::from(*p);
            let mut best: Option<SurfacePoint> = None;
            for f in 0..mesh.faces.len() {
                let [a, b, c] = mesh.triangle(f);
                let (pt, bary) = closest_point_on_triangle(&q, &a, &b, &c);
                let d = (pt - q).norm();
                if best.is_none_or(|b| d < b.distance) {
                    best = Some(SurfacePoint {
                        face: f,
                        bary,
                        point: pt.into(),
                        distance: d,
                    });
                }
            }
            best.unwrap()
        })
        .collect())
}

/// Index of and distance to the nearest reference point of every query.
pub fn nearest_points(points: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<Vec<(usize, f64)>> {
    if points.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("no query or reference points".into()));
    }
    let boxes: Vec<Aabb> = reference.iter().map(|&v| Aabb { lo: v, hi: v }).collect();
    let bvh = Bvh::build(&boxes);
    Ok(exec::map_slice(points, |_, p| {
        let (i, d2, _) = bvh
            .nearest(p, |i| {
                let r = reference[i];
                ((0..3).map(|k| (r[k] - p[k]).powi(2)).sum(), ())
            })
            .unwrap();
        (i, d2.sqrt())
    }))
}
