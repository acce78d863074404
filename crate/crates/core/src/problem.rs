//! Parametric diffusion problems with affine parameter dependence
//! `sigma_mu = sum_xi theta_xi(mu) sigma_xi`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Default interior penalty. The penalty is not weighted by the diffusion, and
/// the form loses definiteness once `sigma` exceeds roughly `nu / 3.3` on these
/// meshes, so the default covers the thermal block range `sigma <= 10`.
pub const DEFAULT_PENALTY: f64 = 100.0;

/// Tolerance on the parameter-box membership check.
const BOX_TOL: f64 = 1e-12;

/// Right-hand side `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Constant(f64),
    /// `f = 2 pi^2 sin(pi x) sin(pi y)`, the load for `u = sin(pi x) sin(pi y)`
    /// with unit diffusion.
    SineProduct,
}

impl Source {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Source::Constant(c) => c,
            Source::SineProduct => 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
        }
    }
}

/// Coefficient functional `theta_xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta {
    /// `theta(mu) = mu[i]`
    Coordinate(usize),
    Constant(f64),
}

impl Theta {
    pub fn eval(&self, mu: &[f64]) -> f64 {
        match *self {
            Theta::Coordinate(i) => mu[i],
            Theta::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument(
                "parameter box bounds must be nonempty and of equal length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(format!(
                "invalid parameter box {lower:?} .. {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(m, (l, u))| m.is_finite() && *m >= l - BOX_TOL && *m <= u + BOX_TOL)
    }

    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::ParameterOutOfBounds { mu: mu.to_vec() })
        }
    }

    /// `count` independent uniform samples drawn from a ChaCha stream seeded by `seed`.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_dim` equispaced points per coordinate (endpoints included).
    pub fn tensor_grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                if per_dim <= 1 {
                    vec![0.5 * (l + u)]
                } else {
                    (0..per_dim)
                        .map(|i| l + (u - l) * i as f64 / (per_dim - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|bits| {
                (0..d)
                    .map(|i| {
                        if bits >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Serializable recipe for a [`ParametricProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemDescriptor {
    /// Unit square split into `blocks_x * blocks_y` equal subdomains with
    /// `sigma = mu_xi` on subdomain `xi` (row-major from the lower left).
    ThermalBlock {
        blocks_x: usize,
        blocks_y: usize,
        cells_per_side: usize,
        mu_min: f64,
        mu_max: f64,
        nu: f64,
        source: Source,
    },
    /// A single component `sigma = mu_0` on the whole domain.
    Uniform {
        cells_per_side: usize,
        mu_min: f64,
        mu_max: f64,
        nu: f64,
        source: Source,
    },
}

impl ProblemDescriptor {
    /// The 2x2 thermal block on `[0.1, 10]^4` with `f = 1`.
    pub fn thermal_block(cells_per_side: usize, nu: f64) -> Self {
        ProblemDescriptor::ThermalBlock {
            blocks_x: 2,
            blocks_y: 2,
            cells_per_side,
            mu_min: 0.1,
            mu_max: 10.0,
            nu,
            source: Source::Constant(1.0),
        }
    }

    /// Unit diffusion with the manufactured sine-product load.
    pub fn manufactured(cells_per_side: usize, nu: f64) -> Self {
        ProblemDescriptor::Uniform {
            cells_per_side,
            mu_min: 1.0,
            mu_max: 1.0,
            nu,
            source: Source::SineProduct,
        }
    }

    pub fn cells_per_side(&self) -> usize {
        match *self {
            ProblemDescriptor::ThermalBlock { cells_per_side, .. }
            | ProblemDescriptor::Uniform { cells_per_side, .. } => cells_per_side,
        }
    }

    pub fn nu(&self) -> f64 {
        match *self {
            ProblemDescriptor::ThermalBlock { nu, .. } | ProblemDescriptor::Uniform { nu, .. } => nu,
        }
    }

    pub fn with_cells_per_side(&self, n: usize) -> Self {
        let mut d = self.clone();
        match &mut d {
            ProblemDescriptor::ThermalBlock { cells_per_side, .. }
            | ProblemDescriptor::Uniform { cells_per_side, .. } => *cells_per_side = n,
        }
        d
    }

    pub fn with_nu(&self, value: f64) -> Self {
        let mut d = self.clone();
        match &mut d {
            ProblemDescriptor::ThermalBlock { nu, .. } | ProblemDescriptor::Uniform { nu, .. } => {
                *nu = value
            }
        }
        d
    }

    pub fn build(&self) -> Result<ParametricProblem> {
        match *self {
            ProblemDescriptor::ThermalBlock {
                blocks_x,
                blocks_y,
                cells_per_side,
                mu_min,
                mu_max,
                nu,
                source,
            } => {
                if blocks_x == 0 || blocks_y == 0 {
                    return Err(Error::InvalidArgument("thermal block needs at least one block".into()));
                }
                if cells_per_side == 0
                    || cells_per_side % blocks_x != 0
                    || cells_per_side % blocks_y != 0
                {
                    return Err(Error::InvalidArgument(format!(
                        "cells per side {cells_per_side} must be a positive multiple of the block counts {blocks_x}x{blocks_y}"
                    )));
                }
                let mesh = Arc::new(Mesh::generate_structured(cells_per_side)?);
                let nb = blocks_x * blocks_y;
                let mut components = vec![vec![0.0; mesh.num_elements()]; nb];
                for k in 0..mesh.num_elements() {
                    let c = mesh.barycenter(k);
                    let bx = ((c[0] * blocks_x as f64).floor() as usize).min(blocks_x - 1);
                    let by = ((c[1] * blocks_y as f64).floor() as usize).min(blocks_y - 1);
                    components[bx + blocks_x * by][k] = 1.0;
                }
                ParametricProblem::new(
                    mesh,
                    components,
                    (0..nb).map(Theta::Coordinate).collect(),
                    ParameterBox::cube(nb, mu_min, mu_max)?,
                    source,
                    nu,
                    Some(self.clone()),
                )
            }
            ProblemDescriptor::Uniform {
                cells_per_side,
                mu_min,
                mu_max,
                nu,
                source,
            } => {
                let mesh = Arc::new(Mesh::generate_structured(cells_per_side)?);
                let ones = vec![1.0; mesh.num_elements()];
                ParametricProblem::new(
                    mesh,
                    vec![ones],
                    vec![Theta::Coordinate(0)],
                    ParameterBox::cube(1, mu_min, mu_max)?,
                    source,
                    nu,
                    Some(self.clone()),
                )
            }
        }
    }
}

/// Diffusion `sigma_mu = sum_xi theta_xi(mu) sigma_xi` with element-wise
/// constant components, source `f`, and penalty `nu`.
#[derive(Debug, Clone)]
pub struct ParametricProblem {
    mesh: Arc<Mesh>,
    components: Vec<Vec<f64>>,
    theta: Vec<Theta>,
    parameter_box: ParameterBox,
    source: Source,
    nu: f64,
    descriptor: Option<ProblemDescriptor>,
}

impl ParametricProblem {
    pub fn new(
        mesh: Arc<Mesh>,
        components: Vec<Vec<f64>>,
        theta: Vec<Theta>,
        parameter_box: ParameterBox,
        source: Source,
        nu: f64,
        descriptor: Option<ProblemDescriptor>,
    ) -> Result<Self> {
        if components.is_empty() || components.len() != theta.len() {
            return Err(Error::InvalidArgument(format!(
                "{} components with {} coefficient functionals",
                components.len(),
                theta.len()
            )));
        }
        for (xi, c) in components.iter().enumerate() {
            if c.len() != mesh.num_elements() {
                return Err(Error::DimensionMismatch(format!(
                    "component {xi} has {} values for {} elements",
                    c.len(),
                    mesh.num_elements()
                )));
            }
            if c.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "component {xi} must be finite and nonnegative"
                )));
            }
        }
        for t in &theta {
            if let Theta::Coordinate(i) = t {
                if *i >= parameter_box.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "theta reads coordinate {i} of a {}-dimensional parameter",
                        parameter_box.dim()
                    )));
                }
            }
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {nu}")));
        }
        let problem = Self {
            mesh,
            components,
            theta,
            parameter_box,
            source,
            nu,
            descriptor,
        };
        // sigma is affine in mu for these thetas, so its minimum over the box
        // is attained at a corner
        for corner in problem.parameter_box.corners() {
            let s = problem.sigma_lower_bound_unchecked(&corner);
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "diffusion not uniformly positive: min sigma = {s} at {corner:?}"
                )));
            }
        }
        Ok(problem)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, xi: usize) -> &[f64] {
        &self.components[xi]
    }

    pub fn parameter_box(&self) -> &ParameterBox {
        &self.parameter_box
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn descriptor(&self) -> Option<&ProblemDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn check_parameter(&self, mu: &[f64]) -> Result<()> {
        self.parameter_box.check(mu)
    }

    pub fn theta(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_parameter(mu)?;
        Ok(self.theta.iter().map(|t| t.eval(mu)).collect())
    }

    pub fn theta_functionals(&self) -> &[Theta] {
        &self.theta
    }

    /// Element-wise diffusion values `sigma_mu(K)`.
    pub fn sigma(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let th = self.theta(mu)?;
        Ok(self.sigma_from_theta(&th))
    }

    fn sigma_from_theta(&self, th: &[f64]) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|k| {
                th.iter()
                    .zip(&self.components)
                    .map(|(t, c)| t * c[k])
                    .sum()
            })
            .collect()
    }

    fn sigma_lower_bound_unchecked(&self, mu: &[f64]) -> f64 {
        let th: Vec<f64> = self.theta.iter().map(|t| t.eval(mu)).collect();
        self.sigma_from_theta(&th)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum of `sigma_mu` over the domain (exact for element-wise constants).
    pub fn sigma_lower_bound(&self, mu: &[f64]) -> Result<f64> {
        self.check_parameter(mu)?;
        Ok(self.sigma_lower_bound_unchecked(mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_block_layout() {
        let p = ProblemDescriptor::thermal_block(4, 10.0).build().unwrap();
        assert_eq!(p.num_components(), 4);
        let mesh = p.mesh().clone();
        for xi in 0..4 {
            let area: f64 = (0..mesh.num_elements())
                .map(|k| p.component(xi)[k] * mesh.area(k))
                .sum();
            assert!((area - 0.25).abs() < 1e-14);
        }
        // partition of unity
        for k in 0..mesh.num_elements() {
            assert_eq!((0..4).map(|xi| p.component(xi)[k]).sum::<f64>(), 1.0);
        }
        let mu = [0.3, 2.0, 5.0, 0.7];
        assert_eq!(p.sigma_lower_bound(&mu).unwrap(), 0.3);
        assert_eq!(p.theta(&mu).unwrap(), mu.to_vec());
        // lower-left block is component 0
        let k = mesh.locate([0.1, 0.1], 0.0).unwrap();
        assert_eq!(p.sigma(&mu).unwrap()[k], 0.3);
        let k = mesh.locate([0.9, 0.1], 0.0).unwrap();
        assert_eq!(p.sigma(&mu).unwrap()[k], 2.0);
    }

    #[test]
    fn odd_resolution_rejected_for_block() {
        assert!(ProblemDescriptor::thermal_block(5, 10.0).build().is_err());
    }

    #[test]
    fn parameter_checks() {
        let p = ProblemDescriptor::thermal_block(2, 10.0).build().unwrap();
        assert!(matches!(
            p.theta(&[0.05, 1.0, 1.0, 1.0]),
            Err(Error::ParameterOutOfBounds { .. })
        ));
        assert!(p.theta(&[1.0, 1.0]).is_err());
        assert!(p.theta(&[10.0, 0.1, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let mesh = Arc::new(Mesh::generate_structured(2).unwrap());
        let n = mesh.num_elements();
        let res = ParametricProblem::new(
            mesh,
            vec![vec![1.0; n]],
            vec![Theta::Coordinate(0)],
            ParameterBox::cube(1, 0.0, 1.0).unwrap(),
            Source::Constant(1.0),
            10.0,
            None,
        );
        assert!(res.is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_inside() {
        let b = ParameterBox::cube(4, 0.1, 10.0).unwrap();
        let s1 = b.sample_uniform(30, 42);
        let s2 = b.sample_uniform(30, 42);
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|m| b.contains(m)));
        assert_ne!(s1, b.sample_uniform(30, 43));
        let g = b.tensor_grid(3);
        assert_eq!(g.len(), 81);
        assert_eq!(g[0], vec![0.1; 4]);
        assert_eq!(g[80], vec![10.0; 4]);
    }

    #[test]
    fn descriptor_json_roundtrip() {
        let d = ProblemDescriptor::thermal_block(8, 10.0);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<ProblemDescriptor>(&s).unwrap(), d);
    }
}
