//! Conforming triangulations of the unit square with a global face structure.
//!
//! Every face is stored once. Its *inner* element is the adjacent element with
//! the smaller index and the stored unit normal points out of it. Local face
//! `i` of an element is the edge opposite its local vertex `i`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Second neighbour of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighbor {
    Element(usize),
    Boundary,
}

impl Neighbor {
    pub fn element(self) -> Option<usize> {
        match self {
            Neighbor::Element(k) => Some(k),
            Neighbor::Boundary => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub inner: usize,
    pub outer: Neighbor,
    /// Unit normal pointing away from `inner`.
    pub normal: Point,
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.outer == Neighbor::Boundary
    }
}

/// A face as seen from one of its elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFace {
    pub face: usize,
    /// `+1.0` iff the stored face normal points out of this element.
    pub sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub normal: Point,
    pub length: f64,
    pub midpoint: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[ElementFace; 3]>,
    areas: Vec<f64>,
    cells_per_side: Option<usize>,
}

impl Mesh {
    /// Structured `n x n` mesh of the unit square. Each square is cut along the
    /// diagonal from its lower-left to its upper-right corner.
    pub fn generate_structured(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "cells per side must be at least 1".into(),
            ));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = i + j * np;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        let mut mesh = Self::from_triangles(vertices, elements)?;
        mesh.cells_per_side = Some(n);
        Ok(mesh)
    }

    /// Builds the face structure for an arbitrary counterclockwise triangulation.
    pub fn from_triangles(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self> {
        let mut areas = Vec::with_capacity(elements.len());
        for (k, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        kind: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = 0.5 * cross(sub(b, a), sub(c, a));
            if area <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "element {k} is degenerate or clockwise (signed area {area:e})"
                )));
            }
            areas.push(area);
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_faces = Vec::with_capacity(elements.len());
        for (k, tri) in elements.iter().enumerate() {
            let mut local = [ElementFace {
                face: 0,
                sign: 1.0,
            }; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.outer != Neighbor::Boundary {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({a}, {b}) is shared by more than two elements"
                            )));
                        }
                        face.outer = Neighbor::Element(k);
                        *slot = ElementFace { face: f, sign: -1.0 };
                    }
                    None => {
                        let d = sub(vertices[b], vertices[a]);
                        let length = norm(d);
                        let normal = [d[1] / length, -d[0] / length];
                        let f = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            inner: k,
                            outer: Neighbor::Boundary,
                            normal,
                            length,
                        });
                        lookup.insert(key, f);
                        *slot = ElementFace { face: f, sign: 1.0 };
                    }
                }
            }
            element_faces.push(local);
        }

        Ok(Self {
            vertices,
            elements,
            faces,
            element_faces,
            areas,
            cells_per_side: None,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// `Some(n)` for meshes produced by [`Mesh::generate_structured`].
    pub fn cells_per_side(&self) -> Option<usize> {
        self.cells_per_side
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn element_faces(&self, k: usize) -> &[ElementFace; 3] {
        &self.element_faces[k]
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn element_points(&self, k: usize) -> [Point; 3] {
        self.elements[k].map(|v| self.vertices[v])
    }

    pub fn barycenter(&self, k: usize) -> Point {
        let [a, b, c] = self.element_points(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Physical point of the barycentric coordinates `bary` in element `k`.
    pub fn map_to_element(&self, k: usize, bary: [f64; 3]) -> Point {
        let p = self.element_points(k);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    /// Barycentric coordinates of `x` with respect to element `k` (not clamped).
    pub fn barycentric(&self, k: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.element_points(k);
        let two_area = 2.0 * self.areas[k];
        let l1 = cross(sub(x, a), sub(c, a)) / two_area;
        let l2 = cross(sub(b, a), sub(x, a)) / two_area;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Gradients of the three barycentric coordinate functions on element `k`.
    pub fn barycentric_gradients(&self, k: usize) -> [Point; 3] {
        let p = self.element_points(k);
        let two_area = 2.0 * self.areas[k];
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let pj = p[(i + 1) % 3];
            let pk = p[(i + 2) % 3];
            g[i] = [(pj[1] - pk[1]) / two_area, (pk[0] - pj[0]) / two_area];
        }
        g
    }

    pub fn check_element(&self, k: usize) -> Result<()> {
        check_index("element", k, self.elements.len())
    }

    pub fn check_face(&self, f: usize) -> Result<()> {
        check_index("face", f, self.faces.len())
    }

    pub fn face_geometry(&self, f: usize) -> Result<FaceGeometry> {
        self.check_face(f)?;
        let face = &self.faces[f];
        Ok(FaceGeometry {
            normal: face.normal,
            length: face.length,
            midpoint: self.face_point(f, 0.5),
        })
    }

    /// Point at parameter `t` along face `f`, from its first to its second vertex.
    pub fn face_point(&self, f: usize, t: f64) -> Point {
        let [a, b] = self.faces[f].vertices.map(|v| self.vertices[v]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    /// Distance from `x` to the segment of face `f`.
    pub fn distance_to_face(&self, f: usize, x: Point) -> f64 {
        let [a, b] = self.faces[f].vertices.map(|v| self.vertices[v]);
        let d = sub(b, a);
        let t = (dot(sub(x, a), d) / dot(d, d)).clamp(0.0, 1.0);
        norm(sub(x, [a[0] + t * d[0], a[1] + t * d[1]]))
    }

    /// Local index (0..3) of face `f` within element `k`, if adjacent.
    pub fn local_face_index(&self, k: usize, f: usize) -> Option<usize> {
        self.element_faces[k].iter().position(|ef| ef.face == f)
    }

    /// Index of the element whose closure contains `x` (first match).
    pub fn locate(&self, x: Point, tol: f64) -> Option<usize> {
        (0..self.num_elements()).find(|&k| self.barycentric(k, x).iter().all(|&l| l >= -tol))
    }
}

fn check_index(kind: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { kind, index, len })
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            Mesh::generate_structured(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn counts_small_meshes() {
        let m1 = Mesh::generate_structured(1).unwrap();
        assert_eq!(
            (m1.num_elements(), m1.num_vertices(), m1.num_faces()),
            (2, 4, 5)
        );
        assert_eq!(m1.faces().iter().filter(|f| !f.is_boundary()).count(), 1);

        let m2 = Mesh::generate_structured(2).unwrap();
        assert_eq!(
            (m2.num_elements(), m2.num_vertices(), m2.num_faces()),
            (8, 9, 16)
        );
        assert_eq!(m2.faces().iter().filter(|f| !f.is_boundary()).count(), 8);
        for k in 0..8 {
            assert!((m2.area(k) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_and_boundary_geometry() {
        let m = Mesh::generate_structured(1).unwrap();
        let diag = m.faces().iter().position(|f| !f.is_boundary()).unwrap();
        let g = m.face_geometry(diag).unwrap();
        assert!((g.length - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.midpoint[0] - 0.5).abs() < 1e-15 && (g.midpoint[1] - 0.5).abs() < 1e-15);

        // bottom edge y = 0 belongs to element 0 and points down
        let bottom = m
            .faces()
            .iter()
            .position(|f| f.vertices.iter().all(|&v| m.vertices()[v][1] == 0.0))
            .unwrap();
        let g = m.face_geometry(bottom).unwrap();
        assert_eq!(m.face(bottom).inner, 0);
        assert!((g.normal[0]).abs() < 1e-15 && (g.normal[1] + 1.0).abs() < 1e-15);
        assert!((g.length - 1.0).abs() < 1e-15);
    }

    #[test]
    fn face_index_out_of_range() {
        let m = Mesh::generate_structured(1).unwrap();
        assert!(matches!(
            m.face_geometry(5),
            Err(Error::IndexOutOfRange { kind: "face", .. })
        ));
    }

    #[test]
    fn inner_element_has_smaller_index_and_normals_point_out() {
        let m = Mesh::generate_structured(4).unwrap();
        for (f, face) in m.faces().iter().enumerate() {
            assert!((norm(face.normal) - 1.0).abs() < 1e-14);
            let mid = m.face_point(f, 0.5);
            let c = m.barycenter(face.inner);
            assert!(dot(sub(mid, c), face.normal) > 0.0);
            if let Neighbor::Element(outer) = face.outer {
                assert!(face.inner < outer);
                for k in [face.inner, outer] {
                    for v in face.vertices {
                        assert!(m.elements()[k].contains(&v));
                    }
                }
                assert_eq!(m.element_faces(outer)[m.local_face_index(outer, f).unwrap()].sign, -1.0);
            }
            assert_eq!(m.element_faces(face.inner)[m.local_face_index(face.inner, f).unwrap()].sign, 1.0);
        }
    }

    #[test]
    fn barycentric_roundtrip() {
        let m = Mesh::generate_structured(3).unwrap();
        for k in 0..m.num_elements() {
            let b = [0.2, 0.3, 0.5];
            let x = m.map_to_element(k, b);
            let back = m.barycentric(k, x);
            for i in 0..3 {
                assert!((back[i] - b[i]).abs() < 1e-14);
            }
            let g = m.barycentric_gradients(k);
            let sum = [g[0][0] + g[1][0] + g[2][0], g[0][1] + g[1][1] + g[2][1]];
            assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
        }
    }
}
