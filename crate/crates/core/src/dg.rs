//! Broken P1 space: element-wise affine fields with no inter-element continuity.
//!
//! Coefficients are element-local vertex values; dof `3k + i` is the value at
//! local vertex `i` of element `k`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Neighbor, Point};
use crate::quadrature::{edge_gauss3, triangle_degree5};

/// Tolerance for "point lies on the face / in the element" checks.
pub const GEOMETRY_TOL: f64 = 1e-12;

pub fn dof(element: usize, local_vertex: usize) -> usize {
    3 * element + local_vertex
}

#[derive(Debug, Clone)]
pub struct DGFunction {
    mesh: Arc<Mesh>,
    coefficients: Vec<f64>,
}

impl DGFunction {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = 3 * mesh.num_elements();
        Self {
            mesh,
            coefficients: vec![0.0; n],
        }
    }

    pub fn from_coefficients(mesh: Arc<Mesh>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != 3 * mesh.num_elements() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} elements",
                coefficients.len(),
                mesh.num_elements()
            )));
        }
        Ok(Self { mesh, coefficients })
    }

    /// Element-local nodal interpolant of `g`.
    pub fn interpolate(mesh: Arc<Mesh>, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut coefficients = Vec::with_capacity(3 * mesh.num_elements());
        for k in 0..mesh.num_elements() {
            for p in mesh.element_points(k) {
                let value = g(p[0], p[1]);
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "interpolated field at ({}, {})",
                        p[0], p[1]
                    )));
                }
                coefficients.push(value);
            }
        }
        Ok(Self { mesh, coefficients })
    }

    /// Indicator function of element `k`.
    pub fn indicator(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        mesh.check_element(k)?;
        let mut v = Self::zeros(mesh);
        v.coefficients[3 * k..3 * k + 3].fill(1.0);
        Ok(v)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn local(&self, k: usize) -> [f64; 3] {
        [
            self.coefficients[3 * k],
            self.coefficients[3 * k + 1],
            self.coefficients[3 * k + 2],
        ]
    }

    /// Value of the restriction to element `k` at barycentric coordinates `bary`.
    pub fn value_bary(&self, k: usize, bary: [f64; 3]) -> f64 {
        let c = self.local(k);
        c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2]
    }

    /// Value of the affine restriction to element `k` at `x`, which must lie in
    /// the closure of `k`.
    pub fn value_in_element(&self, k: usize, x: Point) -> Result<f64> {
        self.mesh.check_element(k)?;
        let bary = self.mesh.barycentric(k, x);
        let outside = bary.iter().fold(0.0f64, |m, &l| m.max(-l));
        if outside > GEOMETRY_TOL {
            return Err(Error::PointOffEntity {
                what: format!("element {k}"),
                x: x[0],
                y: x[1],
                distance: outside,
            });
        }
        Ok(self.value_bary(k, bary))
    }

    /// Value at `x`, taken from the first element containing it.
    pub fn evaluate(&self, x: Point) -> Result<f64> {
        let k = self.mesh.locate(x, GEOMETRY_TOL).ok_or(Error::PointOffEntity {
            what: "the mesh".into(),
            x: x[0],
            y: x[1],
            distance: f64::NAN,
        })?;
        Ok(self.value_bary(k, self.mesh.barycentric(k, x)))
    }

    /// Trace from element `k` at parameter `t` along face `f`.
    pub(crate) fn trace(&self, k: usize, f: usize, t: f64) -> f64 {
        let x = self.mesh.face_point(f, t);
        self.value_bary(k, self.mesh.barycentric(k, x))
    }

    /// Jump `v- - v+` and average `(v- + v+)/2` at `t`; both equal the inner
    /// trace on boundary faces.
    pub(crate) fn jump_average_at(&self, f: usize, t: f64) -> (f64, f64) {
        let face = self.mesh.face(f);
        let inner = self.trace(face.inner, f, t);
        match face.outer {
            Neighbor::Element(outer) => {
                let outer = self.trace(outer, f, t);
                (inner - outer, 0.5 * (inner + outer))
            }
            Neighbor::Boundary => (inner, inner),
        }
    }

    /// Jump and average of the face traces at `point`.
    pub fn jump_average(&self, f: usize, point: Point) -> Result<(f64, f64)> {
        self.mesh.check_face(f)?;
        let distance = self.mesh.distance_to_face(f, point);
        if distance > GEOMETRY_TOL {
            return Err(Error::PointOffEntity {
                what: format!("face {f}"),
                x: point[0],
                y: point[1],
                distance,
            });
        }
        let face = self.mesh.face(f);
        let inner = self.value_bary(face.inner, self.mesh.barycentric(face.inner, point));
        Ok(match face.outer {
            Neighbor::Element(outer) => {
                let outer = self.value_bary(outer, self.mesh.barycentric(outer, point));
                (inner - outer, 0.5 * (inner + outer))
            }
            Neighbor::Boundary => (inner, inner),
        })
    }

    /// Constant gradient of the restriction to element `k`.
    pub fn broken_gradient(&self, k: usize) -> Result<Point> {
        self.mesh.check_element(k)?;
        Ok(self.gradient_unchecked(k))
    }

    pub(crate) fn gradient_unchecked(&self, k: usize) -> Point {
        let g = self.mesh.barycentric_gradients(k);
        let c = self.local(k);
        [
            c[0] * g[0][0] + c[1] * g[1][0] + c[2] * g[2][0],
            c[0] * g[0][1] + c[1] * g[1][1] + c[2] * g[2][1],
        ]
    }

    /// `( sum_K |grad v|^2 |K| + sum_F (nu/h_F) int_F [v]^2 )^(1/2)`, with boundary
    /// faces penalizing the trace itself.
    pub fn v_norm(&self, nu: f64) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {nu}")));
        }
        let mesh = &self.mesh;
        let volume: f64 = (0..mesh.num_elements())
            .map(|k| {
                let g = self.gradient_unchecked(k);
                (g[0] * g[0] + g[1] * g[1]) * mesh.area(k)
            })
            .sum();
        let rule = edge_gauss3();
        let jumps: f64 = (0..mesh.num_faces())
            .map(|f| {
                let h = mesh.face(f).length;
                let int: f64 = rule
                    .iter()
                    .map(|q| {
                        let (j, _) = self.jump_average_at(f, q.t);
                        q.weight * h * j * j
                    })
                    .sum();
                nu / h * int
            })
            .sum();
        Ok((volume + jumps).sqrt())
    }

    /// `||v - u||_{L2}` against a smooth reference, integrated with a degree-5 rule.
    pub fn l2_error(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let mesh = &self.mesh;
        let rule = triangle_degree5();
        (0..mesh.num_elements())
            .map(|k| {
                let area = mesh.area(k);
                rule.iter()
                    .map(|q| {
                        let x = mesh.map_to_element(k, q.bary);
                        let e = self.value_bary(k, q.bary) - exact(x[0], x[1]);
                        q.weight * area * e * e
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// V-norm of `v - u` for a smooth reference `u` vanishing on the boundary:
    /// broken gradient error plus the penalized jumps of `v` itself.
    pub fn v_norm_error(
        &self,
        exact_gradient: impl Fn(f64, f64) -> Point,
        nu: f64,
    ) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {nu}")));
        }
        let mesh = &self.mesh;
        let rule = triangle_degree5();
        let volume: f64 = (0..mesh.num_elements())
            .map(|k| {
                let g = self.gradient_unchecked(k);
                let area = mesh.area(k);
                rule.iter()
                    .map(|q| {
                        let x = mesh.map_to_element(k, q.bary);
                        let ge = exact_gradient(x[0], x[1]);
                        let d = [g[0] - ge[0], g[1] - ge[1]];
                        q.weight * area * (d[0] * d[0] + d[1] * d[1])
                    })
                    .sum::<f64>()
            })
            .sum();
        let edge = edge_gauss3();
        let jumps: f64 = (0..mesh.num_faces())
            .map(|f| {
                let h = mesh.face(f).length;
                nu / h
                    * edge
                        .iter()
                        .map(|q| {
                            let (j, _) = self.jump_average_at(f, q.t);
                            q.weight * h * j * j
                        })
                        .sum::<f64>()
            })
            .sum();
        Ok((volume + jumps).sqrt())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            coefficients: self.coefficients.iter().map(|c| alpha * c).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &DGFunction) -> Result<Self> {
        if self.coefficients.len() != other.coefficients.len() {
            return Err(Error::DimensionMismatch("DG functions on different meshes".into()));
        }
        Ok(Self {
            mesh: self.mesh.clone(),
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Mean value on each element (for cell-data export).
    pub fn cell_means(&self) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|k| self.local(k).iter().sum::<f64>() / 3.0)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::generate_structured(n).unwrap())
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let m = mesh(3);
        let v = DGFunction::interpolate(m.clone(), |x, _| x).unwrap();
        for k in 0..m.num_elements() {
            let p = m.map_to_element(k, [0.2, 0.5, 0.3]);
            assert!((v.value_in_element(k, p).unwrap() - p[0]).abs() < 1e-14);
        }
        let z = DGFunction::interpolate(m, |_, _| 0.0).unwrap();
        assert!(z.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn interpolation_of_product_is_nodal() {
        let m = mesh(1);
        let v = DGFunction::interpolate(m.clone(), |x, y| x * y).unwrap();
        for k in 0..2 {
            let pts = m.element_points(k);
            let expected: f64 = pts.iter().map(|p| p[0] * p[1]).sum::<f64>() / 3.0;
            let c = m.barycenter(k);
            assert!((v.value_in_element(k, c).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_interpolation_rejected() {
        assert!(matches!(
            DGFunction::interpolate(mesh(1), |x, _| 1.0 / x),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn gradients() {
        let m = mesh(2);
        let v = DGFunction::interpolate(m.clone(), |x, _| x).unwrap();
        let w = DGFunction::interpolate(m.clone(), |x, y| 2.0 * y - x).unwrap();
        let z = DGFunction::zeros(m.clone());
        for k in 0..m.num_elements() {
            let g = v.broken_gradient(k).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);
            let g = w.broken_gradient(k).unwrap();
            assert!((g[0] + 1.0).abs() < 1e-14 && (g[1] - 2.0).abs() < 1e-14);
            assert_eq!(z.broken_gradient(k).unwrap(), [0.0, 0.0]);
        }
        assert!(v.broken_gradient(8).is_err());
    }

    #[test]
    fn jump_average_conventions() {
        let m = mesh(1);
        let diag = (0..m.num_faces()).find(|&f| !m.face(f).is_boundary()).unwrap();
        let mid = m.face_geometry(diag).unwrap().midpoint;

        let cont = DGFunction::interpolate(m.clone(), |x, y| x + 3.0 * y).unwrap();
        let (j, a) = cont.jump_average(diag, mid).unwrap();
        assert!(j.abs() < 1e-15 && (a - 2.0).abs() < 1e-14);

        let ind = DGFunction::indicator(m.clone(), m.face(diag).inner).unwrap();
        let (j, a) = ind.jump_average(diag, mid).unwrap();
        assert_eq!((j, a), (1.0, 0.5));

        let three = DGFunction::interpolate(m.clone(), |_, _| 3.0).unwrap();
        let bnd = (0..m.num_faces()).find(|&f| m.face(f).is_boundary()).unwrap();
        let (j, a) = three.jump_average(bnd, m.face_point(bnd, 0.3)).unwrap();
        assert!((j - 3.0).abs() < 1e-14 && (a - 3.0).abs() < 1e-14);

        assert!(matches!(
            three.jump_average(bnd, [0.5, 0.5]),
            Err(Error::PointOffEntity { .. })
        ));
    }

    // Direct oracle: v = x on N=1. |grad v|^2 = 1 on both triangles (sum |K| = 1).
    // Boundary traces: bottom y=0 and top y=1 carry v = x, int_0^1 x^2 = 1/3 each;
    // left x=0 carries 0; right x=1 carries 1 (int = 1). Diagonal jump is 0.
    // All boundary faces have length 1, so ||v||_V^2 = 1 + nu (1/3 + 1/3 + 1).
    #[test]
    fn v_norm_of_x_on_single_square() {
        let m = mesh(1);
        let v = DGFunction::interpolate(m, |x, _| x).unwrap();
        let nu = 10.0;
        let expected = (1.0f64 + nu * (1.0 / 3.0 + 1.0 / 3.0 + 1.0)).sqrt();
        assert!((v.v_norm(nu).unwrap() - expected).abs() < 1e-13);
        assert_eq!(DGFunction::zeros(v.mesh().clone()).v_norm(nu).unwrap(), 0.0);
        assert!(v.v_norm(0.0).is_err());
    }

    proptest! {
        #[test]
        fn v_norm_homogeneous_and_definite(coeffs in proptest::collection::vec(-5.0f64..5.0, 24)) {
            let m = mesh(2);
            let v = DGFunction::from_coefficients(m, coeffs.clone()).unwrap();
            let n1 = v.v_norm(10.0).unwrap();
            let n2 = v.scaled(2.0).v_norm(10.0).unwrap();
            prop_assert!((n2 - 2.0 * n1).abs() <= 1e-13 * n1.max(1.0));
            if coeffs.iter().any(|&c| c != 0.0) {
                prop_assert!(n1 > 0.0);
            }
        }

        #[test]
        fn jump_average_linear(a in proptest::collection::vec(-1.0f64..1.0, 24),
                               b in proptest::collection::vec(-1.0f64..1.0, 24),
                               alpha in -3.0f64..3.0, t in 0.0f64..1.0) {
            let m = mesh(2);
            let u = DGFunction::from_coefficients(m.clone(), a).unwrap();
            let w = DGFunction::from_coefficients(m.clone(), b).unwrap();
            let comb = u.add_scaled(alpha, &w).unwrap();
            for f in 0..m.num_faces() {
                let p = m.face_point(f, t);
                let (ju, au) = u.jump_average(f, p).unwrap();
                let (jw, aw) = w.jump_average(f, p).unwrap();
                let (jc, ac) = comb.jump_average(f, p).unwrap();
                prop_assert!((jc - (ju + alpha * jw)).abs() < 1e-12);
                prop_assert!((ac - (au + alpha * aw)).abs() < 1e-12);
            }
        }
    }
}
