//! Reduced-basis models with a locally conservative reduced flux.
//!
//! Offline, a [`ReducedBasisBuilder`] collects V-orthonormal solution snapshots
//! together with a parallel H(div)-orthonormal flux space spanned by snapshot
//! fluxes minus the source lift `t_f`. Every flux space member therefore has
//! vanishing divergence integral on each element, and the online flux
//! `t_f + sum_k d_k q_k` satisfies local conservation for any coefficients.

mod greedy;
mod io;
mod online;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use greedy::{greedy, GreedyOptions, GreedyStep, Termination};
pub use io::MODEL_VERSION;

use crate::dg::DGFunction;
use crate::error::{Error, Result};
use crate::flux::{compute_t_f, FluxReconstruction};
use crate::ipdg::{fom_solve, FOMSystem};
use crate::mesh::Mesh;
use crate::numerics::{
    axpy, dot, orthonormalize_against, orthonormalize_against_scaled, SparseMatrix, SpdSolver,
    TripletBuilder, DEPENDENCE_TOL,
};
use crate::problem::ParametricProblem;
use crate::rt0::{divergence_matrix, hdiv_gram, RT0Function};

/// How the minimum diffusion enters the error estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorConstant {
    /// `eta = ||res||_{V'} / sigma_min(mu)`
    #[default]
    Divide,
    /// `eta = sigma_min(mu) ||res||_{V'}`
    Multiply,
}

impl EstimatorConstant {
    pub fn apply(self, dual_norm: f64, sigma_min: f64) -> f64 {
        match self {
            EstimatorConstant::Divide => dual_norm / sigma_min,
            EstimatorConstant::Multiply => dual_norm * sigma_min,
        }
    }
}

/// Full-order operators shared by the offline stage and the oracles.
pub struct FullOrderContext {
    problem: ParametricProblem,
    system: FOMSystem,
    flux: FluxReconstruction,
    hdiv_gram: SparseMatrix,
    v_solver: SpdSolver,
    t_f: RT0Function,
    riesz_f: Vec<f64>,
    divergence: SparseMatrix,
    divergence_normal: SpdSolver,
}

impl FullOrderContext {
    pub fn new(problem: ParametricProblem) -> Result<Self> {
        let system = FOMSystem::assemble(&problem)?;
        let flux = FluxReconstruction::new(&problem)?;
        let hdiv_gram = hdiv_gram(problem.mesh());
        let v_solver = SpdSolver::new(&system.v_inner)?;
        let t_f = compute_t_f(&problem, &system)?;
        let riesz_f = v_solver.solve(&system.load)?;
        let divergence = divergence_matrix(problem.mesh());
        let divergence_normal = SpdSolver::new(&normal_matrix(&divergence))?;
        Ok(Self {
            problem,
            system,
            flux,
            hdiv_gram,
            v_solver,
            t_f,
            riesz_f,
            divergence,
            divergence_normal,
        })
    }

    pub fn problem(&self) -> &ParametricProblem {
        &self.problem
    }

    pub fn system(&self) -> &FOMSystem {
        &self.system
    }

    pub fn flux(&self) -> &FluxReconstruction {
        &self.flux
    }

    pub fn hdiv_gram(&self) -> &SparseMatrix {
        &self.hdiv_gram
    }

    pub fn t_f(&self) -> &RT0Function {
        &self.t_f
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.problem.mesh()
    }

    pub fn solve(&self, mu: &[f64]) -> Result<DGFunction> {
        fom_solve(&self.system, &self.problem, mu)
    }

    /// Riesz representative of a functional given by its coefficient vector.
    pub fn riesz(&self, functional: &[f64]) -> Result<Vec<f64>> {
        self.v_solver.solve(functional)
    }

    /// Removes the element-wise divergence of a face-dof vector with the
    /// smallest Euclidean correction `S^T (S S^T)^{-1} S w`.
    pub fn remove_divergence(&self, w: &mut [f64]) -> Result<()> {
        let div = self.divergence.mul_vec(w);
        let lambda = self.divergence_normal.solve(&div)?;
        let correction = self.divergence.mul_transpose_vec(&lambda);
        for (x, c) in w.iter_mut().zip(&correction) {
            *x -= c;
        }
        Ok(())
    }

    /// `R_mu v`
    pub fn reconstruct(&self, v: &DGFunction, mu: &[f64]) -> Result<RT0Function> {
        self.flux.reconstruct(v, mu, &self.problem)
    }

    /// `||F - A(mu) v||_{V'}` by a full-order Riesz solve.
    pub fn residual_dual_norm(&self, mu: &[f64], v: &DGFunction) -> Result<f64> {
        let a = self.system.operator(&self.problem, mu)?;
        let mut r = self.system.load.clone();
        let av = a.mul_vec(v.coefficients());
        for (ri, ai) in r.iter_mut().zip(&av) {
            *ri -= ai;
        }
        let z = self.v_solver.solve(&r)?;
        Ok(dot(&z, &r).max(0.0).sqrt())
    }

    pub fn v_norm(&self, v: &DGFunction) -> f64 {
        let c = v.coefficients();
        self.system.v_inner.bilinear(c, c).max(0.0).sqrt()
    }

    /// Galerkin projection solved densely from full-order matrices and an
    /// arbitrary basis (no precomputed reduced data).
    pub fn direct_galerkin(&self, basis: &[Vec<f64>], mu: &[f64]) -> Result<Vec<f64>> {
        let a = self.system.operator(&self.problem, mu)?;
        let n = basis.len();
        let a_basis: Vec<Vec<f64>> = basis.iter().map(|b| a.mul_vec(b)).collect();
        let mat = DMatrix::from_fn(n, n, |i, j| dot(&basis[i], &a_basis[j]));
        let rhs: Vec<f64> = basis.iter().map(|b| dot(b, &self.system.load)).collect();
        crate::numerics::dense_spd_solve(&mat, &rhs)
    }
}

/// Incrementally built snapshot and flux spaces with their Riesz data.
pub struct ReducedBasisBuilder<'a> {
    ctx: &'a FullOrderContext,
    basis: Vec<Vec<f64>>,
    /// `A_xi phi_j` for every component (penalty last) and basis vector.
    applied: Vec<Vec<Vec<f64>>>,
    /// Riesz representatives of `applied`.
    riesz: Vec<Vec<Vec<f64>>>,
    flux_basis: Vec<Vec<f64>>,
    flux_origin: Vec<usize>,
    selected: Vec<Vec<f64>>,
}

/// Outcome of a basis extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Added,
    /// The candidate was numerically dependent on the current span.
    Rejected,
}

impl<'a> ReducedBasisBuilder<'a> {
    pub fn new(ctx: &'a FullOrderContext) -> Self {
        let parts = ctx.system.components.len() + 1;
        Self {
            ctx,
            basis: Vec::new(),
            applied: vec![Vec::new(); parts],
            riesz: vec![Vec::new(); parts],
            flux_basis: Vec::new(),
            flux_origin: Vec::new(),
            selected: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn flux_len(&self) -> usize {
        self.flux_basis.len()
    }

    fn operators(&self) -> Vec<&'a SparseMatrix> {
        let sys = &self.ctx.system;
        sys.components.iter().chain(std::iter::once(&sys.penalty)).collect()
    }

    /// Gram-Schmidt in the V inner product; rejects numerically dependent snapshots.
    pub fn extend_basis(&mut self, u: &DGFunction) -> Result<Extension> {
        let c = u.coefficients();
        if c.len() != self.ctx.system.dim() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot with {} dofs for a space of dimension {}",
                c.len(),
                self.ctx.system.dim()
            )));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("snapshot coefficients".into()));
        }
        let Some(phi) =
            orthonormalize_against(&self.basis, c, &self.ctx.system.v_inner, DEPENDENCE_TOL)
        else {
            return Ok(Extension::Rejected);
        };
        let ops = self.operators();
        for (p, op) in ops.iter().enumerate() {
            let a_phi = op.mul_vec(&phi);
            let z = self.ctx.riesz(&a_phi)?;
            self.applied[p].push(a_phi);
            self.riesz[p].push(z);
        }
        self.basis.push(phi);
        Ok(Extension::Added)
    }

    /// Adds `t - t_f` to the flux space, orthonormalized in H(div). The
    /// candidate counts as dependent when its remainder is negligible against `t`.
    pub fn extend_flux_basis(&mut self, snapshot_flux: &RT0Function) -> Result<Extension> {
        let shifted = snapshot_flux.add_scaled(-1.0, &self.ctx.t_f)?;
        let reference = self.ctx.hdiv_gram.bilinear(snapshot_flux.dofs(), snapshot_flux.dofs());
        match orthonormalize_against_scaled(
            &self.flux_basis,
            shifted.dofs(),
            &self.ctx.hdiv_gram,
            DEPENDENCE_TOL,
            reference.max(0.0).sqrt(),
        ) {
            Some(mut q) => {
                // Gram-Schmidt amplifies the round-off divergence of small
                // remainders; project it out and restore orthonormality.
                let ip = &self.ctx.hdiv_gram;
                self.ctx.remove_divergence(&mut q)?;
                for b in &self.flux_basis {
                    let c = ip.bilinear(b, &q);
                    axpy(-c, b, &mut q);
                }
                let norm = ip.bilinear(&q, &q).max(0.0).sqrt();
                q.iter_mut().for_each(|x| *x /= norm);
                self.flux_basis.push(q);
                self.flux_origin.push(self.basis.len().saturating_sub(1));
                Ok(Extension::Added)
            }
            None => Ok(Extension::Rejected),
        }
    }

    /// One greedy step: snapshot solve, basis extension, snapshot flux and
    /// flux space extension.
    pub fn add_snapshot(&mut self, mu: &[f64]) -> Result<(Extension, Extension)> {
        let u = self.ctx.solve(mu)?;
        let ext = self.extend_basis(&u)?;
        if ext == Extension::Rejected {
            return Ok((ext, Extension::Rejected));
        }
        self.selected.push(mu.to_vec());
        let t = self.ctx.reconstruct(&u, mu)?;
        let flux_ext = self.extend_flux_basis(&t)?;
        Ok((ext, flux_ext))
    }

    /// Projects all full-order data onto the current spaces.
    pub fn build(&self) -> Result<ReducedModel> {
        let ctx = self.ctx;
        let sys = &ctx.system;
        let n = self.basis.len();
        let parts = self.applied.len();
        let a_hat: Vec<DMatrix<f64>> = (0..parts)
            .map(|p| {
                let m = DMatrix::from_fn(n, n, |i, j| dot(&self.basis[i], &self.applied[p][j]));
                symmetrize(m)
            })
            .collect();
        let f_hat: Vec<f64> = self.basis.iter().map(|b| dot(b, &sys.load)).collect();

        let ff = dot(&ctx.riesz_f, &sys.load);
        let fa: Vec<Vec<f64>> = (0..parts)
            .map(|p| self.applied[p].iter().map(|a| dot(&ctx.riesz_f, a)).collect())
            .collect();
        let mut aa = vec![vec![DMatrix::zeros(n, n); parts]; parts];
        for p in 0..parts {
            for q in p..parts {
                let block = DMatrix::from_fn(n, n, |i, j| dot(&self.riesz[p][i], &self.applied[q][j]));
                if p == q {
                    aa[p][q] = symmetrize(block);
                } else {
                    aa[q][p] = block.transpose();
                    aa[p][q] = block;
                }
            }
        }

        let m = self.flux_basis.len();
        let g_q: Vec<Vec<f64>> = self
            .flux_basis
            .iter()
            .map(|q| ctx.hdiv_gram.mul_vec(q))
            .collect();
        let flux_gram = symmetrize(DMatrix::from_fn(m, m, |k, l| dot(&g_q[k], &self.flux_basis[l])));
        let recon = |op: &SparseMatrix| -> Vec<Vec<f64>> {
            self.basis.iter().map(|b| op.mul_vec(b)).collect()
        };
        let flux_components: Vec<DMatrix<f64>> = (0..ctx.flux.num_components())
            .map(|xi| {
                let r = recon(ctx.flux.component_matrix(xi));
                DMatrix::from_fn(m, n, |k, j| dot(&g_q[k], &r[j]))
            })
            .collect();
        let r_pen = recon(ctx.flux.penalty_matrix());
        let flux_penalty = DMatrix::from_fn(m, n, |k, j| dot(&g_q[k], &r_pen[j]));
        let flux_source: Vec<f64> = g_q.iter().map(|g| dot(g, ctx.t_f.dofs())).collect();

        ReducedModel::new(ModelParts {
            problem: ctx.problem.clone(),
            basis: self.basis.clone(),
            flux_basis: self.flux_basis.clone(),
            flux_origin: self.flux_origin.clone(),
            t_f: ctx.t_f.dofs().to_vec(),
            a_hat,
            f_hat,
            estimator: EstimatorGram { ff, fa, aa },
            flux_gram,
            flux_components,
            flux_penalty,
            flux_source,
            selected_parameters: self.selected.clone(),
        })
    }
}

/// `S S^T` for a rectangular `S`.
fn normal_matrix(s: &SparseMatrix) -> SparseMatrix {
    let st = s.transpose();
    let mut triplets = TripletBuilder::new(s.nrows(), s.nrows());
    for f in 0..st.nrows() {
        let (rows, values) = st.row(f);
        for (&a, &va) in rows.iter().zip(values) {
            for (&b, &vb) in rows.iter().zip(values) {
                triplets.add(a, b, va * vb);
            }
        }
    }
    triplets.build()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Gram data of the Riesz representatives `z_f` and `z_{p,j}` (`p` ranges over
/// the diffusion components and, last, the penalty).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorGram {
    /// `(z_f, z_f)_V`
    pub ff: f64,
    /// `fa[p][j] = (z_f, z_{p,j})_V`
    pub fa: Vec<Vec<f64>>,
    /// `aa[p][q][(i, j)] = (z_{p,i}, z_{q,j})_V`
    pub aa: Vec<Vec<DMatrix<f64>>>,
}

pub(crate) struct ModelParts {
    pub problem: ParametricProblem,
    pub basis: Vec<Vec<f64>>,
    pub flux_basis: Vec<Vec<f64>>,
    pub flux_origin: Vec<usize>,
    pub t_f: Vec<f64>,
    pub a_hat: Vec<DMatrix<f64>>,
    pub f_hat: Vec<f64>,
    pub estimator: EstimatorGram,
    pub flux_gram: DMatrix<f64>,
    pub flux_components: Vec<DMatrix<f64>>,
    pub flux_penalty: DMatrix<f64>,
    pub flux_source: Vec<f64>,
    pub selected_parameters: Vec<Vec<f64>>,
}

/// A trained reduced model. Online methods only touch reduced data; lifting
/// methods return full-order fields.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    problem: ParametricProblem,
    /// Distinct element-wise component vectors, for an online `sigma_min`.
    sigma_patterns: Vec<Vec<f64>>,
    basis: Vec<Vec<f64>>,
    flux_basis: Vec<Vec<f64>>,
    flux_origin: Vec<usize>,
    t_f: Vec<f64>,
    /// Components first, penalty last.
    a_hat: Vec<DMatrix<f64>>,
    f_hat: Vec<f64>,
    estimator: EstimatorGram,
    flux_gram: DMatrix<f64>,
    flux_components: Vec<DMatrix<f64>>,
    flux_penalty: DMatrix<f64>,
    flux_source: Vec<f64>,
    selected_parameters: Vec<Vec<f64>>,
    pub estimator_constant: EstimatorConstant,
    pub tolerance: Option<f64>,
    pub trajectory: Vec<GreedyStep>,
    pub config_hash: Option<String>,
}

impl ReducedModel {
    pub(crate) fn new(parts: ModelParts) -> Result<Self> {
        let n = parts.basis.len();
        let m = parts.flux_basis.len();
        let xi = parts.problem.num_components();
        let consistent = parts.a_hat.len() == xi + 1
            && parts.a_hat.iter().all(|a| a.shape() == (n, n))
            && parts.f_hat.len() == n
            && parts.estimator.fa.len() == xi + 1
            && parts.estimator.fa.iter().all(|r| r.len() == n)
            && parts.estimator.aa.len() == xi + 1
            && parts
                .estimator
                .aa
                .iter()
                .all(|row| row.len() == xi + 1 && row.iter().all(|b| b.shape() == (n, n)))
            && parts.flux_gram.shape() == (m, m)
            && parts.flux_components.len() == xi
            && parts.flux_components.iter().all(|b| b.shape() == (m, n))
            && parts.flux_penalty.shape() == (m, n)
            && parts.flux_source.len() == m
            && parts.flux_origin.len() == m
            && parts.t_f.len() == parts.problem.mesh().num_faces()
            && parts
                .basis
                .iter()
                .all(|b| b.len() == 3 * parts.problem.mesh().num_elements())
            && parts
                .flux_basis
                .iter()
                .all(|q| q.len() == parts.problem.mesh().num_faces());
        if !consistent {
            return Err(Error::Model(format!(
                "inconsistent reduced data for n = {n}, m = {m}, components = {xi}"
            )));
        }
        if m > n {
            return Err(Error::Model(format!("flux space dimension {m} exceeds basis size {n}")));
        }
        let sigma_patterns = sigma_patterns(&parts.problem);
        Ok(Self {
            problem: parts.problem,
            sigma_patterns,
            basis: parts.basis,
            flux_basis: parts.flux_basis,
            flux_origin: parts.flux_origin,
            t_f: parts.t_f,
            a_hat: parts.a_hat,
            f_hat: parts.f_hat,
            estimator: parts.estimator,
            flux_gram: parts.flux_gram,
            flux_components: parts.flux_components,
            flux_penalty: parts.flux_penalty,
            flux_source: parts.flux_source,
            selected_parameters: parts.selected_parameters,
            estimator_constant: EstimatorConstant::default(),
            tolerance: None,
            trajectory: Vec::new(),
            config_hash: None,
        })
    }

    pub fn problem(&self) -> &ParametricProblem {
        &self.problem
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.problem.mesh()
    }

    /// Dimension of the reduced solution space.
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Dimension of the reduced flux space.
    pub fn m(&self) -> usize {
        self.flux_basis.len()
    }

    pub fn num_components(&self) -> usize {
        self.flux_components.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn flux_basis(&self) -> &[Vec<f64>] {
        &self.flux_basis
    }

    pub fn t_f(&self) -> RT0Function {
        RT0Function::from_dofs(self.mesh().clone(), self.t_f.clone()).expect("t_f matches mesh")
    }

    pub fn selected_parameters(&self) -> &[Vec<f64>] {
        &self.selected_parameters
    }

    pub fn reduced_operators(&self) -> &[DMatrix<f64>] {
        &self.a_hat
    }

    pub fn reduced_load(&self) -> &[f64] {
        &self.f_hat
    }

    pub fn estimator_gram(&self) -> &EstimatorGram {
        &self.estimator
    }

    pub fn flux_gram(&self) -> &DMatrix<f64> {
        &self.flux_gram
    }

    /// The nested model after its first `n` greedy extensions: the leading
    /// `n` basis vectors, the flux vectors created with them, and the
    /// matching sub-blocks of all reduced data.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a model of size {} to {n}",
                self.n()
            )));
        }
        let keep: Vec<usize> = (0..self.m()).filter(|&k| self.flux_origin[k] < n).collect();
        let m = keep.len();
        let sub = |a: &DMatrix<f64>| a.view((0, 0), (n, n)).into_owned();
        let rows = |b: &DMatrix<f64>| DMatrix::from_fn(m, n, |r, j| b[(keep[r], j)]);
        let mut model = Self::new(ModelParts {
            problem: self.problem.clone(),
            basis: self.basis[..n].to_vec(),
            flux_basis: keep.iter().map(|&k| self.flux_basis[k].clone()).collect(),
            flux_origin: keep.iter().map(|&k| self.flux_origin[k]).collect(),
            t_f: self.t_f.clone(),
            a_hat: self.a_hat.iter().map(sub).collect(),
            f_hat: self.f_hat[..n].to_vec(),
            estimator: EstimatorGram {
                ff: self.estimator.ff,
                fa: self.estimator.fa.iter().map(|r| r[..n].to_vec()).collect(),
                aa: self
                    .estimator
                    .aa
                    .iter()
                    .map(|row| row.iter().map(sub).collect())
                    .collect(),
            },
            flux_gram: DMatrix::from_fn(m, m, |a, b| self.flux_gram[(keep[a], keep[b])]),
            flux_components: self.flux_components.iter().map(rows).collect(),
            flux_penalty: rows(&self.flux_penalty),
            flux_source: keep.iter().map(|&k| self.flux_source[k]).collect(),
            selected_parameters: self.selected_parameters[..n.min(self.selected_parameters.len())]
                .to_vec(),
        })?;
        model.estimator_constant = self.estimator_constant;
        model.tolerance = self.tolerance;
        model.config_hash = self.config_hash.clone();
        Ok(model)
    }
}

/// Distinct rows `(sigma_1(K), ..., sigma_Xi(K))` over the elements.
fn sigma_patterns(problem: &ParametricProblem) -> Vec<Vec<f64>> {
    let mut patterns: Vec<Vec<f64>> = Vec::new();
    for k in 0..problem.mesh().num_elements() {
        let row: Vec<f64> = (0..problem.num_components())
            .map(|xi| problem.component(xi)[k])
            .collect();
        if !patterns.contains(&row) {
            patterns.push(row);
        }
    }
    patterns
}
