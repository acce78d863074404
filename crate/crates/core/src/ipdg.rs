//! Symmetric interior penalty DG discretization in parameter-separable form.
//!
//! For diffusion `sigma` the bilinear form is
//!
//! ```text
//! a(u, v) = sum_K int_K sigma grad u . grad v
//!         + sum_F int_F -<sigma grad v . n>[u] - <sigma grad u . n>[v] + nu/h_F [u][v]
//! ```
//!
//! The diffusive part is linear in `sigma`, so each component `sigma_xi`
//! yields one matrix `A_xi`; the penalty part is parameter independent.
//! Boundary faces use `<v> = [v] = v`, which imposes homogeneous Dirichlet
//! conditions weakly.

use std::f64::consts::PI;

use crate::dg::{dof, DGFunction};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Neighbor};
use crate::numerics::{axpy, norm2, SparseMatrix, SpdSolver, TripletBuilder};
use crate::problem::{ParametricProblem, ProblemDescriptor, Source};
use crate::quadrature::{edge_gauss3, triangle_midpoints};

/// One side of a face as seen by the assembly loops.
pub(crate) struct FaceSide {
    pub element: usize,
    /// `+1` for the inner side, `-1` for the outer side: `[phi] = jump_sign * phi`.
    pub jump_sign: f64,
    /// `1/2` on interior faces, `1` on boundary faces.
    pub average_weight: f64,
    /// Traces of the three local basis functions at the edge quadrature points.
    pub traces: [[f64; 3]; 3],
}

pub(crate) fn face_sides(mesh: &Mesh, f: usize) -> Vec<FaceSide> {
    let face = mesh.face(f);
    let rule = edge_gauss3();
    let side = |element: usize, jump_sign: f64, average_weight: f64| {
        let mut traces = [[0.0; 3]; 3];
        for (q, qp) in rule.iter().enumerate() {
            traces[q] = mesh.barycentric(element, mesh.face_point(f, qp.t));
        }
        FaceSide {
            element,
            jump_sign,
            average_weight,
            traces,
        }
    };
    match face.outer {
        Neighbor::Element(outer) => vec![side(face.inner, 1.0, 0.5), side(outer, -1.0, 0.5)],
        Neighbor::Boundary => vec![side(face.inner, 1.0, 1.0)],
    }
}

/// Diffusive part of the bilinear form for element-wise constant `sigma`:
/// volume term plus the consistency and symmetry face terms.
pub fn assemble_diffusion(mesh: &Mesh, sigma: &[f64]) -> Result<SparseMatrix> {
    if sigma.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} diffusion values for {} elements",
            sigma.len(),
            mesh.num_elements()
        )));
    }
    let ndofs = 3 * mesh.num_elements();
    let mut triplets = TripletBuilder::new(ndofs, ndofs);
    for k in 0..mesh.num_elements() {
        if sigma[k] == 0.0 {
            continue;
        }
        let g = mesh.barycentric_gradients(k);
        let scale = sigma[k] * mesh.area(k);
        for i in 0..3 {
            for j in 0..3 {
                triplets.add(
                    dof(k, i),
                    dof(k, j),
                    scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]),
                );
            }
        }
    }

    let rule = edge_gauss3();
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let sides = face_sides(mesh, f);
        if sides.iter().all(|s| sigma[s.element] == 0.0) {
            continue;
        }
        // per local dof: (global dof, <sigma grad phi . n>, int_F [phi])
        let mut dofs = Vec::with_capacity(6);
        for s in &sides {
            let g = mesh.barycentric_gradients(s.element);
            for i in 0..3 {
                let flux = s.average_weight
                    * sigma[s.element]
                    * (g[i][0] * face.normal[0] + g[i][1] * face.normal[1]);
                let jump_integral: f64 = rule
                    .iter()
                    .zip(&s.traces)
                    .map(|(q, tr)| q.weight * face.length * s.jump_sign * tr[i])
                    .sum();
                dofs.push((dof(s.element, i), flux, jump_integral));
            }
        }
        for &(gi, avg_i, jump_i) in &dofs {
            for &(gj, avg_j, jump_j) in &dofs {
                let value = -(avg_i * jump_j + avg_j * jump_i);
                if value != 0.0 {
                    triplets.add(gi, gj, value);
                }
            }
        }
    }
    Ok(triplets.build())
}

/// Penalty part `sum_F (nu/h_F) int_F [u][v]`.
pub fn assemble_penalty_matrix(mesh: &Mesh, nu: f64) -> Result<SparseMatrix> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {nu}")));
    }
    let ndofs = 3 * mesh.num_elements();
    let mut triplets = TripletBuilder::new(ndofs, ndofs);
    let rule = edge_gauss3();
    for f in 0..mesh.num_faces() {
        let h = mesh.face(f).length;
        let sides = face_sides(mesh, f);
        let mut dofs = Vec::with_capacity(6);
        for s in &sides {
            for i in 0..3 {
                let jumps: [f64; 3] = std::array::from_fn(|q| s.jump_sign * s.traces[q][i]);
                dofs.push((dof(s.element, i), jumps));
            }
        }
        for (gi, ji) in &dofs {
            for (gj, jj) in &dofs {
                let value: f64 = rule
                    .iter()
                    .enumerate()
                    .map(|(q, qp)| qp.weight * h * ji[q] * jj[q])
                    .sum::<f64>()
                    * nu
                    / h;
                triplets.add(*gi, *gj, value);
            }
        }
    }
    Ok(triplets.build())
}

/// Load vector `F_i = int f phi_i` with the edge-midpoint triangle rule.
pub fn assemble_load(mesh: &Mesh, source: &Source) -> Result<Vec<f64>> {
    let mut load = vec![0.0; 3 * mesh.num_elements()];
    let rule = triangle_midpoints();
    for k in 0..mesh.num_elements() {
        let area = mesh.area(k);
        for q in &rule {
            let x = mesh.map_to_element(k, q.bary);
            let fx = source.eval(x[0], x[1]);
            if !fx.is_finite() {
                return Err(Error::NonFinite(format!("source at ({}, {})", x[0], x[1])));
            }
            for i in 0..3 {
                load[dof(k, i)] += q.weight * area * fx * q.bary[i];
            }
        }
    }
    Ok(load)
}

/// `A_xi` for component `xi` of the problem.
pub fn assemble_component(problem: &ParametricProblem, xi: usize) -> Result<SparseMatrix> {
    if xi >= problem.num_components() {
        return Err(Error::IndexOutOfRange {
            kind: "component",
            index: xi,
            len: problem.num_components(),
        });
    }
    assemble_diffusion(problem.mesh(), problem.component(xi))
}

pub fn assemble_penalty(problem: &ParametricProblem) -> Result<SparseMatrix> {
    assemble_penalty_matrix(problem.mesh(), problem.nu())
}

pub fn assemble_rhs(problem: &ParametricProblem) -> Result<Vec<f64>> {
    assemble_load(problem.mesh(), &problem.source())
}

/// Matrix of the V inner product: broken gradient Gram plus the penalty part.
pub fn assemble_v_inner(mesh: &Mesh, nu: f64) -> Result<SparseMatrix> {
    let ones = vec![1.0; mesh.num_elements()];
    let mut triplets = Vec::new();
    for k in 0..mesh.num_elements() {
        let g = mesh.barycentric_gradients(k);
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((
                    dof(k, i),
                    dof(k, j),
                    ones[k] * mesh.area(k) * (g[i][0] * g[j][0] + g[i][1] * g[j][1]),
                ));
            }
        }
    }
    let n = 3 * mesh.num_elements();
    let gradient = SparseMatrix::from_triplets(n, n, triplets);
    SparseMatrix::linear_combination(&[(1.0, &gradient), (1.0, &assemble_penalty_matrix(mesh, nu)?)])
}

/// Parameter-independent full-order matrices of a problem.
#[derive(Debug, Clone)]
pub struct FOMSystem {
    pub components: Vec<SparseMatrix>,
    pub penalty: SparseMatrix,
    pub load: Vec<f64>,
    pub v_inner: SparseMatrix,
}

impl FOMSystem {
    pub fn assemble(problem: &ParametricProblem) -> Result<Self> {
        let components = (0..problem.num_components())
            .map(|xi| assemble_component(problem, xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            components,
            penalty: assemble_penalty(problem)?,
            load: assemble_rhs(problem)?,
            v_inner: assemble_v_inner(problem.mesh(), problem.nu())?,
        })
    }

    pub fn dim(&self) -> usize {
        self.load.len()
    }

    /// `A(mu) = sum_xi theta_xi A_xi + A_pen` for given coefficient values.
    pub fn operator_from_theta(&self, theta: &[f64]) -> Result<SparseMatrix> {
        if theta.len() != self.components.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} components",
                theta.len(),
                self.components.len()
            )));
        }
        let mut terms: Vec<(f64, &SparseMatrix)> =
            theta.iter().copied().zip(self.components.iter()).collect();
        terms.push((1.0, &self.penalty));
        SparseMatrix::linear_combination(&terms)
    }

    pub fn operator(&self, problem: &ParametricProblem, mu: &[f64]) -> Result<SparseMatrix> {
        self.operator_from_theta(&problem.theta(mu)?)
    }
}

/// Solves `A x = b` for an IPDG operator, mapping loss of definiteness to a
/// penalty diagnostic and checking the algebraic residual.
pub(crate) fn solve_ipdg(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let solver = SpdSolver::new(a).map_err(|e| match e {
        Error::NotPositiveDefinite { row, pivot } => Error::PenaltyTooSmall(format!(
            "Cholesky pivot {pivot:e} at row {row}"
        )),
        other => other,
    })?;
    let x = solver.solve(b)?;
    let mut r = b.to_vec();
    axpy(-1.0, &a.mul_vec(&x), &mut r);
    let b_norm = norm2(b);
    if norm2(&r) > 1e-10 * b_norm {
        return Err(Error::PenaltyTooSmall(format!(
            "residual {:e} exceeds tolerance relative to {:e}",
            norm2(&r),
            b_norm
        )));
    }
    Ok(x)
}

/// Full-order solution `u_{h,mu}`.
pub fn fom_solve(
    system: &FOMSystem,
    problem: &ParametricProblem,
    mu: &[f64],
) -> Result<DGFunction> {
    let a = system.operator(problem, mu)?;
    let x = solve_ipdg(&a, &system.load)?;
    DGFunction::from_coefficients(problem.mesh().clone(), x)
}

/// Solution of the problem with `sigma = 1` everywhere.
pub fn unit_diffusion_solve(problem: &ParametricProblem, system: &FOMSystem) -> Result<DGFunction> {
    let mesh = problem.mesh();
    let ones = vec![1.0; mesh.num_elements()];
    let a = SparseMatrix::linear_combination(&[
        (1.0, &assemble_diffusion(mesh, &ones)?),
        (1.0, &system.penalty),
    ])?;
    let x = solve_ipdg(&a, &system.load)?;
    DGFunction::from_coefficients(mesh.clone(), x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub cells_per_side: usize,
    pub l2_error: f64,
    pub v_error: f64,
    /// `log2` of the error ratio to the previous level (`None` on the first).
    pub l2_rate: Option<f64>,
    pub v_rate: Option<f64>,
}

/// Errors against `u = sin(pi x) sin(pi y)` with unit diffusion on each level.
pub fn convergence_study(levels: &[usize], nu: f64) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in levels {
        let problem = ProblemDescriptor::manufactured(n, nu).build()?;
        let system = FOMSystem::assemble(&problem)?;
        let u = fom_solve(&system, &problem, &[1.0])?;
        let l2 = u.l2_error(|x, y| (PI * x).sin() * (PI * y).sin());
        let ve = u.v_norm_error(
            |x, y| {
                [
                    PI * (PI * x).cos() * (PI * y).sin(),
                    PI * (PI * x).sin() * (PI * y).cos(),
                ]
            },
            nu,
        )?;
        let (l2_rate, v_rate) = match rows.last() {
            Some(prev) => {
                let ratio = n as f64 / prev.cells_per_side as f64;
                (
                    Some((prev.l2_error / l2).ln() / ratio.ln()),
                    Some((prev.v_error / ve).ln() / ratio.ln()),
                )
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            cells_per_side: n,
            l2_error: l2,
            v_error: ve,
            l2_rate,
            v_rate,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::edge_gauss3;
    use std::sync::Arc;

    fn uniform(n: usize, nu: f64) -> ParametricProblem {
        ProblemDescriptor::Uniform {
            cells_per_side: n,
            mu_min: 0.1,
            mu_max: 10.0,
            nu,
            source: Source::Constant(1.0),
        }
        .build()
        .unwrap()
    }

    /// Independent evaluation of the diffusive part of the form for one pair of
    /// DG functions, face by face with the DGFunction trace machinery.
    fn form_oracle(u: &DGFunction, v: &DGFunction, sigma: &[f64], nu: Option<f64>) -> f64 {
        let mesh = u.mesh().clone();
        let mut total = 0.0;
        for k in 0..mesh.num_elements() {
            let gu = u.broken_gradient(k).unwrap();
            let gv = v.broken_gradient(k).unwrap();
            total += sigma[k] * mesh.area(k) * (gu[0] * gv[0] + gu[1] * gv[1]);
        }
        for f in 0..mesh.num_faces() {
            let face = mesh.face(f);
            let flux_avg = |w: &DGFunction| {
                let gi = w.broken_gradient(face.inner).unwrap();
                let fi = sigma[face.inner] * (gi[0] * face.normal[0] + gi[1] * face.normal[1]);
                match face.outer {
                    Neighbor::Element(o) => {
                        let go = w.broken_gradient(o).unwrap();
                        let fo = sigma[o] * (go[0] * face.normal[0] + go[1] * face.normal[1]);
                        0.5 * (fi + fo)
                    }
                    Neighbor::Boundary => fi,
                }
            };
            let (au, av) = (flux_avg(u), flux_avg(v));
            for q in edge_gauss3() {
                let p = mesh.face_point(f, q.t);
                let (ju, _) = u.jump_average(f, p).unwrap();
                let (jv, _) = v.jump_average(f, p).unwrap();
                let w = q.weight * face.length;
                total += w * (-av * ju - au * jv);
                if let Some(nu) = nu {
                    total += w * nu / face.length * ju * jv;
                }
            }
        }
        total
    }

    #[test]
    fn zero_component_gives_zero_matrix() {
        let mesh = Mesh::generate_structured(2).unwrap();
        let a = assemble_diffusion(&mesh, &vec![0.0; 8]).unwrap();
        assert_eq!(a.max_abs(), 0.0);
    }

    #[test]
    fn components_exactly_symmetric() {
        let p = ProblemDescriptor::thermal_block(4, 10.0).build().unwrap();
        for xi in 0..4 {
            assert_eq!(assemble_component(&p, xi).unwrap().max_asymmetry(), 0.0);
        }
        assert_eq!(assemble_penalty(&p).unwrap().max_asymmetry(), 0.0);
        assert!(assemble_component(&p, 4).is_err());
    }

    #[test]
    fn quadratic_form_of_x_matches_face_oracle() {
        let p = uniform(1, 10.0);
        let mesh = p.mesh().clone();
        let a = assemble_component(&p, 0).unwrap();
        let v = DGFunction::interpolate(mesh.clone(), |x, _| x).unwrap();
        let got = a.bilinear(v.coefficients(), v.coefficients());
        let expected = form_oracle(&v, &v, &[1.0, 1.0], None);
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
        // Hand value: volume 1; only the right boundary x=1 has grad.n = 1 and
        // trace 1, giving -2 * 1 * 1; the left boundary has trace 0; top and
        // bottom have grad.n = 0. Total 1 - 2 = -1.
        assert!((got + 1.0).abs() < 1e-13);
    }

    #[test]
    fn bilinear_form_matches_oracle_on_random_functions() {
        use rand::{Rng, SeedableRng};
        let p = ProblemDescriptor::thermal_block(4, 7.0).build().unwrap();
        let mesh = p.mesh().clone();
        let system = FOMSystem::assemble(&p).unwrap();
        let mu = [0.4, 3.0, 1.2, 8.5];
        let a = system.operator(&p, &mu).unwrap();
        let sigma = p.sigma(&mu).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let mut rand_fn = || {
                let c = (0..3 * mesh.num_elements()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                DGFunction::from_coefficients(mesh.clone(), c).unwrap()
            };
            let (u, v) = (rand_fn(), rand_fn());
            let got = a.bilinear(v.coefficients(), u.coefficients());
            let expected = form_oracle(&u, &v, &sigma, Some(7.0));
            assert!((got - expected).abs() < 1e-11 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn penalty_examples() {
        let p = uniform(4, 10.0);
        let mesh = p.mesh().clone();
        let pen = assemble_penalty(&p).unwrap();

        // continuous and vanishing on the boundary
        let bubble = DGFunction::interpolate(mesh.clone(), |x, y| x * (1.0 - x) * y * (1.0 - y)).unwrap();
        let c = bubble.coefficients();
        // nodal interpolation of a smooth function on a conforming mesh is continuous
        assert!(pen.bilinear(c, c).abs() < 1e-14);

        // indicator of an interior element: three faces with jump 1
        let interior = (0..mesh.num_elements())
            .find(|&k| mesh.element_faces(k).iter().all(|ef| !mesh.face(ef.face).is_boundary()))
            .unwrap();
        let ind = DGFunction::indicator(mesh.clone(), interior).unwrap();
        let q = pen.bilinear(ind.coefficients(), ind.coefficients());
        assert!((q - 30.0).abs() < 1e-12);

        let pen2 = assemble_penalty_matrix(&mesh, 20.0).unwrap();
        let diff = SparseMatrix::linear_combination(&[(1.0, &pen2), (-2.0, &pen)]).unwrap();
        assert!(diff.max_abs() < 1e-12);
        assert!(assemble_penalty_matrix(&mesh, 0.0).is_err());
    }

    #[test]
    fn load_vector_examples() {
        let mesh = Mesh::generate_structured(1).unwrap();
        assert!(assemble_load(&mesh, &Source::Constant(0.0)).unwrap().iter().all(|&x| x == 0.0));
        let f = assemble_load(&mesh, &Source::Constant(1.0)).unwrap();
        assert!((f[0..3].iter().sum::<f64>() - 0.5).abs() < 1e-15);
        let mesh = Mesh::generate_structured(8).unwrap();
        let f = assemble_load(&mesh, &Source::Constant(1.0)).unwrap();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn v_inner_is_norm_matrix() {
        let mesh = Arc::new(Mesh::generate_structured(3).unwrap());
        let m = assemble_v_inner(&mesh, 10.0).unwrap();
        let v = DGFunction::interpolate(mesh.clone(), |x, y| x * x - y).unwrap();
        let c = v.coefficients();
        assert!((m.bilinear(c, c).sqrt() - v.v_norm(10.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_source_zero_solution() {
        let p = ProblemDescriptor::ThermalBlock {
            blocks_x: 2,
            blocks_y: 2,
            cells_per_side: 4,
            mu_min: 0.1,
            mu_max: 10.0,
            nu: 100.0,
            source: Source::Constant(0.0),
        }
        .build()
        .unwrap();
        let s = FOMSystem::assemble(&p).unwrap();
        let u = fom_solve(&s, &p, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(u.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn equal_parameters_match_uniform_diffusion() {
        let p = ProblemDescriptor::thermal_block(4, 100.0).build().unwrap();
        let s = FOMSystem::assemble(&p).unwrap();
        let unit = unit_diffusion_solve(&p, &s).unwrap();
        let u1 = fom_solve(&s, &p, &[1.0; 4]).unwrap();
        for (a, b) in u1.coefficients().iter().zip(unit.coefficients()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }

        let c = 2.5;
        let q = uniform(4, 100.0);
        let sq = FOMSystem::assemble(&q).unwrap();
        let uc = fom_solve(&s, &p, &[c; 4]).unwrap();
        let reference = fom_solve(&sq, &q, &[c]).unwrap();
        for (a, b) in uc.coefficients().iter().zip(reference.coefficients()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        // the penalty does not scale with sigma, so u_c differs from u_1 / c
        let scaled = unit.scaled(1.0 / c);
        let diff = uc.add_scaled(-1.0, &scaled).unwrap();
        assert!(diff.v_norm(100.0).unwrap() > 1e-6 * uc.v_norm(100.0).unwrap());
    }

    #[test]
    fn tiny_penalty_surfaces_explicit_error() {
        let p = ProblemDescriptor::ThermalBlock {
            blocks_x: 2,
            blocks_y: 2,
            cells_per_side: 4,
            mu_min: 0.1,
            mu_max: 10.0,
            nu: 0.01,
            source: Source::Constant(1.0),
        }
        .build()
        .unwrap();
        let s = FOMSystem::assemble(&p).unwrap();
        let err = fom_solve(&s, &p, &[10.0; 4]).unwrap_err();
        assert!(matches!(err, Error::PenaltyTooSmall(_)), "{err}");
    }
}
