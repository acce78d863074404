use nalgebra::{DMatrix, DVector};

use super::ReducedModel;
use crate::dg::DGFunction;
use crate::error::{Error, Result};
use crate::numerics::dense_spd_solve;
use crate::rt0::RT0Function;

impl ReducedModel {
    /// `theta(mu)` with a trailing 1 for the penalty part.
    fn theta_with_penalty(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let mut theta = self.problem.theta(mu)?;
        theta.push(1.0);
        Ok(theta)
    }

    fn check_coefficients(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} reduced coefficients for a basis of size {}",
                c.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `min_K sigma_mu(K)` from the stored element patterns.
    pub fn sigma_min(&self, mu: &[f64]) -> Result<f64> {
        let theta = self.problem.theta(mu)?;
        Ok(self
            .sigma_patterns
            .iter()
            .map(|p| p.iter().zip(&theta).map(|(s, t)| s * t).sum::<f64>())
            .fold(f64::INFINITY, f64::min))
    }

    /// Assembled reduced operator `A_n(mu)`.
    pub fn reduced_operator(&self, mu: &[f64]) -> Result<DMatrix<f64>> {
        let theta = self.theta_with_penalty(mu)?;
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (t, block) in theta.iter().zip(&self.a_hat) {
            a += block * *t;
        }
        Ok(a)
    }

    /// Reduced Galerkin coefficients.
    pub fn rom_solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let a = self.reduced_operator(mu)?;
        if self.n() == 0 {
            return Ok(Vec::new());
        }
        dense_spd_solve(&a, &self.f_hat)
    }

    /// `||F - A(mu) u_n||_{V'}` from the Riesz Gram data.
    pub fn residual_dual_norm(&self, mu: &[f64], c: &[f64]) -> Result<f64> {
        self.check_coefficients(c)?;
        let theta = self.theta_with_penalty(mu)?;
        let g = &self.estimator;
        let cv = DVector::from_column_slice(c);
        let mut value = g.ff;
        for (p, tp) in theta.iter().enumerate() {
            let fa: f64 = g.fa[p].iter().zip(c).map(|(a, b)| a * b).sum();
            value -= 2.0 * tp * fa;
            for (q, tq) in theta.iter().enumerate() {
                value += tp * tq * cv.dot(&(&g.aa[p][q] * &cv));
            }
        }
        Ok(value.max(0.0).sqrt())
    }

    /// Error estimator for a reduced solution.
    pub fn estimate(&self, mu: &[f64], c: &[f64]) -> Result<f64> {
        let dual = self.residual_dual_norm(mu, c)?;
        let sigma = self.sigma_min(mu)?;
        Ok(self.estimator_constant.apply(dual, sigma))
    }

    /// Reduced solve followed by the estimator.
    pub fn solve_and_estimate(&self, mu: &[f64]) -> Result<(Vec<f64>, f64)> {
        let c = self.rom_solve(mu)?;
        let eta = self.estimate(mu, &c)?;
        Ok((c, eta))
    }

    /// Coefficients of the H(div) projection of `R_mu u_n - t_f` onto the
    /// reduced flux space.
    pub fn reduced_flux_coefficients(&self, mu: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.check_coefficients(c)?;
        let theta = self.problem.theta(mu)?;
        let m = self.m();
        if m == 0 {
            return Ok(Vec::new());
        }
        let cv = DVector::from_column_slice(c);
        let mut rhs = &self.flux_penalty * &cv;
        for (t, b) in theta.iter().zip(&self.flux_components) {
            rhs += (b * &cv) * *t;
        }
        for (r, g) in rhs.iter_mut().zip(&self.flux_source) {
            *r -= g;
        }
        dense_spd_solve(&self.flux_gram, rhs.as_slice())
    }

    /// `t_f + sum_k d_k q_k`
    pub fn lift_flux(&self, d: &[f64]) -> Result<RT0Function> {
        if d.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} flux coefficients for a flux space of size {}",
                d.len(),
                self.m()
            )));
        }
        let mut dofs = self.t_f.clone();
        for (dk, q) in d.iter().zip(&self.flux_basis) {
            for (x, qi) in dofs.iter_mut().zip(q) {
                *x += dk * qi;
            }
        }
        RT0Function::from_dofs(self.mesh().clone(), dofs)
    }

    /// Locally conservative reduced flux: coefficients and lifted field.
    pub fn reduced_flux(&self, mu: &[f64], c: &[f64]) -> Result<(Vec<f64>, RT0Function)> {
        let d = self.reduced_flux_coefficients(mu, c)?;
        let q = self.lift_flux(&d)?;
        Ok((d, q))
    }

    /// `sum_j c_j phi_j`
    pub fn lift_solution(&self, c: &[f64]) -> Result<DGFunction> {
        self.check_coefficients(c)?;
        let mut coeffs = vec![0.0; 3 * self.mesh().num_elements()];
        for (cj, phi) in c.iter().zip(&self.basis) {
            for (x, p) in coeffs.iter_mut().zip(phi) {
                *x += cj * p;
            }
        }
        DGFunction::from_coefficients(self.mesh().clone(), coeffs)
    }
}
