//! Diffusive flux reconstruction from DG fields into RT0.
//!
//! For `v` in the broken P1 space the reconstructed flux has face dofs
//!
//! ```text
//! d_F = int_F -<sigma grad v . n> + (nu/h_F) [v] ds
//! ```
//!
//! with the same face conventions as the bilinear form. The map is linear in
//! `v` and affine in the diffusion, so it splits into one diffusive operator per
//! component plus a penalty operator.

use std::io::Write;
use std::sync::Arc;

use crate::dg::{dof, DGFunction};
use crate::error::{Error, Result};
use crate::ipdg::{face_sides, unit_diffusion_solve, FOMSystem};
use crate::mesh::Mesh;
use crate::numerics::{SparseMatrix, TripletBuilder};
use crate::problem::{ParametricProblem, Source};
use crate::quadrature::{edge_gauss3, triangle_midpoints};
use crate::rt0::RT0Function;

/// Face-by-dof matrix of the diffusive part for element-wise constant `sigma`.
pub fn diffusive_flux_matrix(mesh: &Mesh, sigma: &[f64]) -> Result<SparseMatrix> {
    if sigma.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} diffusion values for {} elements",
            sigma.len(),
            mesh.num_elements()
        )));
    }
    let mut t = TripletBuilder::new(mesh.num_faces(), 3 * mesh.num_elements());
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        for s in face_sides(mesh, f) {
            if sigma[s.element] == 0.0 {
                continue;
            }
            let g = mesh.barycentric_gradients(s.element);
            for i in 0..3 {
                let normal_flux = g[i][0] * face.normal[0] + g[i][1] * face.normal[1];
                let value = -face.length * s.average_weight * sigma[s.element] * normal_flux;
                if value != 0.0 {
                    t.add(f, dof(s.element, i), value);
                }
            }
        }
    }
    Ok(t.build())
}

/// Face-by-dof matrix of the penalty part `(nu/h_F) int_F [v]`.
pub fn penalty_flux_matrix(mesh: &Mesh, nu: f64) -> Result<SparseMatrix> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {nu}")));
    }
    let rule = edge_gauss3();
    let mut t = TripletBuilder::new(mesh.num_faces(), 3 * mesh.num_elements());
    for f in 0..mesh.num_faces() {
        let h = mesh.face(f).length;
        for s in face_sides(mesh, f) {
            for i in 0..3 {
                let integral: f64 = rule
                    .iter()
                    .zip(&s.traces)
                    .map(|(q, tr)| q.weight * h * s.jump_sign * tr[i])
                    .sum();
                if integral != 0.0 {
                    t.add(f, dof(s.element, i), nu / h * integral);
                }
            }
        }
    }
    Ok(t.build())
}

/// Diffusive reconstruction with an arbitrary element-wise `sigma`.
pub fn reconstruct_diffusive(v: &DGFunction, sigma: &[f64]) -> Result<RT0Function> {
    let m = diffusive_flux_matrix(v.mesh(), sigma)?;
    RT0Function::from_dofs(v.mesh().clone(), m.mul_vec(v.coefficients()))
}

pub fn reconstruct_penalty(v: &DGFunction, nu: f64) -> Result<RT0Function> {
    let m = penalty_flux_matrix(v.mesh(), nu)?;
    RT0Function::from_dofs(v.mesh().clone(), m.mul_vec(v.coefficients()))
}

/// Precomputed reconstruction operators of a parametric problem.
#[derive(Debug, Clone)]
pub struct FluxReconstruction {
    mesh: Arc<Mesh>,
    components: Vec<SparseMatrix>,
    penalty: SparseMatrix,
}

impl FluxReconstruction {
    pub fn new(problem: &ParametricProblem) -> Result<Self> {
        let mesh = problem.mesh().clone();
        let components = (0..problem.num_components())
            .map(|xi| diffusive_flux_matrix(&mesh, problem.component(xi)))
            .collect::<Result<Vec<_>>>()?;
        let penalty = penalty_flux_matrix(&mesh, problem.nu())?;
        Ok(Self {
            mesh,
            components,
            penalty,
        })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component_matrix(&self, xi: usize) -> &SparseMatrix {
        &self.components[xi]
    }

    pub fn penalty_matrix(&self) -> &SparseMatrix {
        &self.penalty
    }

    fn apply(&self, m: &SparseMatrix, v: &DGFunction) -> Result<RT0Function> {
        if v.coefficients().len() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "DG function with {} dofs for an operator on {}",
                v.coefficients().len(),
                m.ncols()
            )));
        }
        RT0Function::from_dofs(self.mesh.clone(), m.mul_vec(v.coefficients()))
    }

    /// Diffusive part with `sigma_xi` in place of `sigma_mu`.
    pub fn component_diff(&self, v: &DGFunction, xi: usize) -> Result<RT0Function> {
        let m = self.components.get(xi).ok_or(Error::IndexOutOfRange {
            kind: "component",
            index: xi,
            len: self.components.len(),
        })?;
        self.apply(m, v)
    }

    pub fn component_pen(&self, v: &DGFunction) -> Result<RT0Function> {
        self.apply(&self.penalty, v)
    }

    /// `sum_xi theta_xi(mu) R_xi v + R_pen v`.
    pub fn reconstruct(
        &self,
        v: &DGFunction,
        mu: &[f64],
        problem: &ParametricProblem,
    ) -> Result<RT0Function> {
        let theta = problem.theta(mu)?;
        self.reconstruct_from_theta(v, &theta)
    }

    pub fn reconstruct_from_theta(&self, v: &DGFunction, theta: &[f64]) -> Result<RT0Function> {
        if theta.len() != self.components.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} components",
                theta.len(),
                self.components.len()
            )));
        }
        let mut total = self.component_pen(v)?;
        for (xi, &th) in theta.iter().enumerate() {
            total = total.add_scaled(th, &self.component_diff(v, xi)?)?;
        }
        Ok(total)
    }
}

/// Source lift `t_f`: the reconstruction, with `sigma = 1`, of the IPDG
/// solution with `sigma = 1`. It lies in the locally conservative set for `f`.
pub fn compute_t_f(problem: &ParametricProblem, system: &FOMSystem) -> Result<RT0Function> {
    let u = unit_diffusion_solve(problem, system)?;
    let ones = vec![1.0; problem.mesh().num_elements()];
    let diff = reconstruct_diffusive(&u, &ones)?;
    let pen = reconstruct_penalty(&u, problem.nu())?;
    diff.add_scaled(1.0, &pen)
}

/// Element-wise local conservation defects `(div q, 1)_K - (g, 1)_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub defects: Vec<f64>,
    pub max_abs_defect: f64,
    /// `max(1, max_K |(g, 1)_K|)`
    pub scale: f64,
}

impl ConservationReport {
    pub fn relative_max(&self) -> f64 {
        self.max_abs_defect / self.scale
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_defect <= tol * self.scale
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "element_index,defect,abs_defect")?;
        for (k, d) in self.defects.iter().enumerate() {
            writeln!(w, "{k},{d:.16e},{:.16e}", d.abs())?;
        }
        Ok(())
    }
}

/// `(g, 1)_K` for every element with the edge-midpoint rule.
pub fn source_integrals(mesh: &Mesh, g: &Source) -> Vec<f64> {
    let rule = triangle_midpoints();
    (0..mesh.num_elements())
        .map(|k| {
            let area = mesh.area(k);
            rule.iter()
                .map(|q| {
                    let x = mesh.map_to_element(k, q.bary);
                    q.weight * area * g.eval(x[0], x[1])
                })
                .sum()
        })
        .collect()
}

pub fn conservation_defect(q: &RT0Function, g: &Source) -> ConservationReport {
    let mesh = q.mesh();
    let sources = source_integrals(mesh, g);
    let defects: Vec<f64> = q
        .cell_divergence_integrals()
        .iter()
        .zip(&sources)
        .map(|(d, s)| d - s)
        .collect();
    let max_abs_defect = defects.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let scale = sources.iter().fold(1.0f64, |m, s| m.max(s.abs()));
    ConservationReport {
        defects,
        max_abs_defect,
        scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipdg::fom_solve;
    use crate::mesh::Neighbor;
    use crate::problem::{ProblemDescriptor, DEFAULT_PENALTY};
    use proptest::prelude::*;

    fn block(n: usize) -> ParametricProblem {
        ProblemDescriptor::thermal_block(n, DEFAULT_PENALTY).build().unwrap()
    }

    /// Face-by-face evaluation through the DG trace API, independent of the
    /// assembled operators.
    fn reconstruct_oracle(v: &DGFunction, sigma: &[f64], nu: f64) -> Vec<f64> {
        let mesh = v.mesh().clone();
        (0..mesh.num_faces())
            .map(|f| {
                let face = mesh.face(f);
                let flux = |k: usize| {
                    let g = v.broken_gradient(k).unwrap();
                    sigma[k] * (g[0] * face.normal[0] + g[1] * face.normal[1])
                };
                let avg = match face.outer {
                    Neighbor::Element(o) => 0.5 * (flux(face.inner) + flux(o)),
                    Neighbor::Boundary => flux(face.inner),
                };
                edge_gauss3()
                    .iter()
                    .map(|q| {
                        let (j, _) = v.jump_average(f, mesh.face_point(f, q.t)).unwrap();
                        q.weight * face.length * (-avg + nu / face.length * j)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn vertical_face_dof_for_x() {
        let mesh = Arc::new(Mesh::generate_structured(4).unwrap());
        let v = DGFunction::interpolate(mesh.clone(), |x, _| x).unwrap();
        let q = reconstruct_diffusive(&v, &vec![1.0; mesh.num_elements()]).unwrap();
        let mut seen = 0;
        for (f, face) in mesh.faces().iter().enumerate() {
            if !face.is_boundary() && (face.normal[0] - 1.0).abs() < 1e-14 {
                assert!((q.dofs()[f] + face.length).abs() < 1e-14);
                seen += 1;
            }
        }
        assert!(seen > 0);
        let zero = reconstruct_diffusive(&v, &vec![0.0; mesh.num_elements()]).unwrap();
        assert!(zero.dofs().iter().all(|&d| d == 0.0));
        let zv = DGFunction::zeros(mesh.clone());
        assert!(reconstruct_diffusive(&zv, &vec![1.0; mesh.num_elements()])
            .unwrap()
            .dofs()
            .iter()
            .all(|&d| d == 0.0));
    }

    #[test]
    fn penalty_part_examples() {
        let mesh = Arc::new(Mesh::generate_structured(4).unwrap());
        let bubble = DGFunction::interpolate(mesh.clone(), |x, y| x * (1.0 - x) * y * (1.0 - y)).unwrap();
        let q = reconstruct_penalty(&bubble, 10.0).unwrap();
        assert!(q.dofs().iter().all(|d| d.abs() < 1e-15));

        let f = (0..mesh.num_faces()).find(|&f| !mesh.face(f).is_boundary()).unwrap();
        let ind = DGFunction::indicator(mesh.clone(), mesh.face(f).inner).unwrap();
        let q = reconstruct_penalty(&ind, 10.0).unwrap();
        assert!((q.dofs()[f] - 10.0).abs() < 1e-13);
        let q2 = reconstruct_penalty(&ind, 20.0).unwrap();
        for (a, b) in q.dofs().iter().zip(q2.dofs()) {
            assert!((2.0 * a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn operators_match_trace_oracle() {
        let p = block(4);
        let rec = FluxReconstruction::new(&p).unwrap();
        let v = DGFunction::interpolate(p.mesh().clone(), |x, y| (3.0 * x).sin() + x * y - y).unwrap();
        let mu = [0.2, 4.0, 9.0, 1.5];
        let got = rec.reconstruct(&v, &mu, &p).unwrap();
        let expected = reconstruct_oracle(&v, &p.sigma(&mu).unwrap(), p.nu());
        for (a, b) in got.dofs().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        // component split
        let th = p.theta(&mu).unwrap();
        let mut sum = rec.component_pen(&v).unwrap();
        for xi in 0..4 {
            sum = sum.add_scaled(th[xi], &rec.component_diff(&v, xi).unwrap()).unwrap();
        }
        for (a, b) in got.dofs().iter().zip(sum.dofs()) {
            assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
        assert!(matches!(
            rec.reconstruct(&v, &[20.0, 1.0, 1.0, 1.0], &p),
            Err(Error::ParameterOutOfBounds { .. })
        ));
    }

    #[test]
    fn fom_flux_is_locally_conservative() {
        let p = block(8);
        let sys = FOMSystem::assemble(&p).unwrap();
        let rec = FluxReconstruction::new(&p).unwrap();
        let mu = [0.3, 7.0, 2.2, 0.9];
        let u = fom_solve(&sys, &p, &mu).unwrap();
        let t = rec.reconstruct(&u, &mu, &p).unwrap();
        let report = conservation_defect(&t, &p.source());
        assert!(report.passes(1e-10), "{}", report.max_abs_defect);
        // Green's identity per element: (div t, 1)_K = (f, chi_K)
        for k in [0, 17, 100] {
            let chi = DGFunction::indicator(p.mesh().clone(), k).unwrap();
            let f_chi: f64 = sys.load.iter().zip(chi.coefficients()).map(|(a, b)| a * b).sum();
            assert!((t.cell_divergence_integral(k).unwrap() - f_chi).abs() < 1e-10);
        }
    }

    #[test]
    fn source_lift_examples() {
        let p = block(8);
        let sys = FOMSystem::assemble(&p).unwrap();
        let tf = compute_t_f(&p, &sys).unwrap();
        assert!(conservation_defect(&tf, &p.source()).passes(1e-10));
        let total: f64 = tf.cell_divergence_integrals().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);

        let zero = ProblemDescriptor::ThermalBlock {
            blocks_x: 2,
            blocks_y: 2,
            cells_per_side: 4,
            mu_min: 0.1,
            mu_max: 10.0,
            nu: DEFAULT_PENALTY,
            source: Source::Constant(0.0),
        }
        .build()
        .unwrap();
        let zs = FOMSystem::assemble(&zero).unwrap();
        assert!(compute_t_f(&zero, &zs).unwrap().dofs().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn conservation_report_examples() {
        let mesh = Arc::new(Mesh::generate_structured(4).unwrap());
        let r = conservation_defect(&RT0Function::zeros(mesh.clone()), &Source::Constant(0.0));
        assert!(r.defects.iter().all(|&d| d == 0.0));
        assert_eq!(r.scale, 1.0);
        let q = RT0Function::interpolate(mesh.clone(), |x, y| [x, y]);
        let r = conservation_defect(&q, &Source::Constant(2.0));
        assert!(r.max_abs_defect < 1e-14);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("element_index,defect,abs_defect\n"));
        assert_eq!(text.lines().count(), 1 + mesh.num_elements());
    }

    proptest! {
        #[test]
        fn reconstruction_linear_in_v(a in proptest::collection::vec(-1.0f64..1.0, 96),
                                      b in proptest::collection::vec(-1.0f64..1.0, 96),
                                      alpha in -2.0f64..2.0) {
            let p = block(4);
            let rec = FluxReconstruction::new(&p).unwrap();
            let u = DGFunction::from_coefficients(p.mesh().clone(), a).unwrap();
            let w = DGFunction::from_coefficients(p.mesh().clone(), b).unwrap();
            let mu = [1.0, 0.5, 3.0, 8.0];
            let lhs = rec.reconstruct(&u.add_scaled(alpha, &w).unwrap(), &mu, &p).unwrap();
            let rhs = rec.reconstruct(&u, &mu, &p).unwrap()
                .add_scaled(alpha, &rec.reconstruct(&w, &mu, &p).unwrap()).unwrap();
            for (x, y) in lhs.dofs().iter().zip(rhs.dofs()) {
                prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
                prop_assert!(x.is_finite());
            }
        }
    }
}
