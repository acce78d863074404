//! Lowest-order Raviart-Thomas fluxes.
//!
//! A flux is stored by one dof per face, `d_F = int_F q . n_F` with `n_F` the
//! mesh's stored normal. On element `K` the local basis function of its face
//! opposite vertex `P` is `psi(x) = (x - P) / (2|K|)`, which has unit outward
//! flux through that face and none through the other two. Normal continuity
//! across faces follows from the single shared dof.

use std::sync::Arc;

use crate::dg::GEOMETRY_TOL;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::numerics::{SparseMatrix, TripletBuilder};
use crate::quadrature::{edge_gauss3, triangle_midpoints};

#[derive(Debug, Clone)]
pub struct RT0Function {
    mesh: Arc<Mesh>,
    dofs: Vec<f64>,
}

impl RT0Function {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_faces();
        Self {
            mesh,
            dofs: vec![0.0; n],
        }
    }

    pub fn from_dofs(mesh: Arc<Mesh>, dofs: Vec<f64>) -> Result<Self> {
        if dofs.len() != mesh.num_faces() {
            return Err(Error::DimensionMismatch(format!(
                "{} flux dofs for {} faces",
                dofs.len(),
                mesh.num_faces()
            )));
        }
        if let Some(f) = dofs.iter().position(|d| !d.is_finite()) {
            return Err(Error::NonFinite(format!("flux dof {f}")));
        }
        Ok(Self { mesh, dofs })
    }

    /// Canonical interpolant: face dofs are the normal fluxes of `field`,
    /// integrated with 3-point Gauss.
    pub fn interpolate(mesh: Arc<Mesh>, field: impl Fn(f64, f64) -> Point) -> Self {
        let rule = edge_gauss3();
        let dofs = (0..mesh.num_faces())
            .map(|f| {
                let face = mesh.face(f);
                rule.iter()
                    .map(|q| {
                        let x = mesh.face_point(f, q.t);
                        let v = field(x[0], x[1]);
                        q.weight * face.length * (v[0] * face.normal[0] + v[1] * face.normal[1])
                    })
                    .sum()
            })
            .collect();
        Self { mesh, dofs }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dofs(&self) -> &[f64] {
        &self.dofs
    }

    pub fn into_dofs(self) -> Vec<f64> {
        self.dofs
    }

    /// Value at barycentric coordinates `bary` of element `k`.
    pub fn value_bary(&self, k: usize, bary: [f64; 3]) -> Point {
        let x = self.mesh.map_to_element(k, bary);
        self.value_unchecked(k, x)
    }

    fn value_unchecked(&self, k: usize, x: Point) -> Point {
        let pts = self.mesh.element_points(k);
        let two_area = 2.0 * self.mesh.area(k);
        let mut v = [0.0; 2];
        for (i, ef) in self.mesh.element_faces(k).iter().enumerate() {
            let c = ef.sign * self.dofs[ef.face] / two_area;
            v[0] += c * (x[0] - pts[i][0]);
            v[1] += c * (x[1] - pts[i][1]);
        }
        v
    }

    /// Flux value at `point`, which must lie in the closure of element `k`.
    pub fn eval(&self, k: usize, point: Point) -> Result<Point> {
        self.mesh.check_element(k)?;
        let bary = self.mesh.barycentric(k, point);
        let outside = bary.iter().fold(0.0f64, |m, &l| m.max(-l));
        if outside > GEOMETRY_TOL {
            return Err(Error::PointOffEntity {
                what: format!("element {k}"),
                x: point[0],
                y: point[1],
                distance: outside,
            });
        }
        Ok(self.value_unchecked(k, point))
    }

    /// `(div q, 1)_K`, exact by the divergence theorem.
    pub fn cell_divergence_integral(&self, k: usize) -> Result<f64> {
        self.mesh.check_element(k)?;
        Ok(self.divergence_integral_unchecked(k))
    }

    pub(crate) fn divergence_integral_unchecked(&self, k: usize) -> f64 {
        self.mesh
            .element_faces(k)
            .iter()
            .map(|ef| ef.sign * self.dofs[ef.face])
            .sum()
    }

    pub fn cell_divergence_integrals(&self) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|k| self.divergence_integral_unchecked(k))
            .collect()
    }

    /// Values at element barycenters.
    pub fn barycenter_values(&self) -> Vec<Point> {
        let third = 1.0 / 3.0;
        (0..self.mesh.num_elements())
            .map(|k| self.value_bary(k, [third; 3]))
            .collect()
    }

    /// `int p . q + int div p div q`, integrated element by element.
    pub fn hdiv_inner(&self, other: &RT0Function) -> Result<f64> {
        if !same_mesh(&self.mesh, &other.mesh) {
            return Err(Error::DimensionMismatch("fluxes live on different meshes".into()));
        }
        let rule = triangle_midpoints();
        let mut total = 0.0;
        for k in 0..self.mesh.num_elements() {
            let area = self.mesh.area(k);
            for q in &rule {
                let a = self.value_bary(k, q.bary);
                let b = other.value_bary(k, q.bary);
                total += q.weight * area * (a[0] * b[0] + a[1] * b[1]);
            }
            total += self.divergence_integral_unchecked(k) * other.divergence_integral_unchecked(k) / area;
        }
        Ok(total)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            dofs: self.dofs.iter().map(|d| alpha * d).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &RT0Function) -> Result<Self> {
        if !same_mesh(&self.mesh, &other.mesh) {
            return Err(Error::DimensionMismatch("fluxes live on different meshes".into()));
        }
        Ok(Self {
            mesh: self.mesh.clone(),
            dofs: self
                .dofs
                .iter()
                .zip(&other.dofs)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }
}

fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.num_faces() == b.num_faces()
            && a.num_elements() == b.num_elements()
            && a.vertices() == b.vertices()
            && a.elements() == b.elements())
}

/// Element-by-face matrix mapping face dofs to `(div q, 1)_K`.
pub fn divergence_matrix(mesh: &Mesh) -> SparseMatrix {
    let mut triplets = TripletBuilder::new(mesh.num_elements(), mesh.num_faces());
    for k in 0..mesh.num_elements() {
        for ef in mesh.element_faces(k) {
            triplets.add(k, ef.face, ef.sign);
        }
    }
    triplets.build()
}

/// Gram matrix of the H(div) inner product over the face-dof basis.
pub fn hdiv_gram(mesh: &Mesh) -> SparseMatrix {
    let nf = mesh.num_faces();
    let mut triplets = TripletBuilder::new(nf, nf);
    let rule = triangle_midpoints();
    for k in 0..mesh.num_elements() {
        let pts = mesh.element_points(k);
        let area = mesh.area(k);
        let ef = mesh.element_faces(k);
        let mut local = [[0.0; 3]; 3];
        for q in &rule {
            let x = mesh.map_to_element(k, q.bary);
            let psi: [Point; 3] = std::array::from_fn(|i| {
                let s = ef[i].sign / (2.0 * area);
                [s * (x[0] - pts[i][0]), s * (x[1] - pts[i][1])]
            });
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] += q.weight * area * (psi[i][0] * psi[j][0] + psi[i][1] * psi[j][1]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                // div psi_i = sign_i / |K|
                let div = ef[i].sign * ef[j].sign / area;
                triplets.add(ef[i].face, ef[j].face, local[i][j] + div);
            }
        }
    }
    triplets.build()
}
