use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EstimatorConstant, EstimatorGram, GreedyStep, ModelParts, ReducedModel};
use crate::error::{Error, Result};
use crate::problem::ProblemDescriptor;

pub const MODEL_VERSION: u32 = 1;

type Matrix = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    problem: ProblemDescriptor,
    cells_per_side: usize,
    nu: f64,
    n: usize,
    m: usize,
    num_components: usize,
    estimator_constant: EstimatorConstant,
    tolerance: Option<f64>,
    config_hash: Option<String>,
    selected_parameters: Matrix,
    trajectory: Vec<GreedyStep>,
    /// `[n][3T]`
    basis: Matrix,
    /// `[m][F]`
    flux_basis: Matrix,
    /// `[m]`, the basis index whose snapshot produced each flux vector
    flux_origin: Vec<usize>,
    /// `[F]`
    t_f: Vec<f64>,
    /// `[Xi + 1][n][n]`, penalty last
    reduced_operators: Vec<Matrix>,
    /// `[n]`
    reduced_load: Vec<f64>,
    riesz_ff: f64,
    /// `[Xi + 1][n]`
    riesz_fa: Matrix,
    /// `[Xi + 1][Xi + 1][n][n]`
    riesz_aa: Vec<Vec<Matrix>>,
    /// `[m][m]`
    flux_gram: Matrix,
    /// `[Xi][m][n]`
    flux_components: Vec<Matrix>,
    /// `[m][n]`
    flux_penalty: Matrix,
    /// `[m]`
    flux_source: Vec<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &Matrix, nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Model(format!("{what} does not have shape {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ReducedModel {
    fn to_file(&self) -> Result<ModelFile> {
        let descriptor = self
            .problem
            .descriptor()
            .ok_or_else(|| Error::Model("problem has no descriptor and cannot be saved".into()))?
            .clone();
        Ok(ModelFile {
            version: MODEL_VERSION,
            cells_per_side: descriptor.cells_per_side(),
            nu: descriptor.nu(),
            problem: descriptor,
            n: self.n(),
            m: self.m(),
            num_components: self.num_components(),
            estimator_constant: self.estimator_constant,
            tolerance: self.tolerance,
            config_hash: self.config_hash.clone(),
            selected_parameters: self.selected_parameters.clone(),
            trajectory: self.trajectory.clone(),
            basis: self.basis.clone(),
            flux_basis: self.flux_basis.clone(),
            flux_origin: self.flux_origin.clone(),
            t_f: self.t_f.clone(),
            reduced_operators: self.a_hat.iter().map(to_rows).collect(),
            reduced_load: self.f_hat.clone(),
            riesz_ff: self.estimator.ff,
            riesz_fa: self.estimator.fa.clone(),
            riesz_aa: self
                .estimator
                .aa
                .iter()
                .map(|row| row.iter().map(to_rows).collect())
                .collect(),
            flux_gram: to_rows(&self.flux_gram),
            flux_components: self.flux_components.iter().map(to_rows).collect(),
            flux_penalty: to_rows(&self.flux_penalty),
            flux_source: self.flux_source.clone(),
        })
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        if file.problem.cells_per_side() != file.cells_per_side || file.problem.nu() != file.nu {
            return Err(Error::Model("mesh size or penalty disagrees with the problem".into()));
        }
        let problem = file.problem.build()?;
        let (n, m) = (file.n, file.m);
        let xi = problem.num_components();
        if xi != file.num_components || file.basis.len() != n || file.flux_basis.len() != m {
            return Err(Error::Model("declared sizes disagree with stored data".into()));
        }
        if file.riesz_aa.len() != xi + 1 || file.reduced_operators.len() != xi + 1 {
            return Err(Error::Model("wrong number of operator blocks".into()));
        }
        let a_hat = file
            .reduced_operators
            .iter()
            .map(|a| from_rows(a, n, n, "reduced operator"))
            .collect::<Result<_>>()?;
        let aa = file
            .riesz_aa
            .iter()
            .map(|row| {
                if row.len() != xi + 1 {
                    return Err(Error::Model("wrong number of Riesz Gram blocks".into()));
                }
                row.iter()
                    .map(|b| from_rows(b, n, n, "Riesz Gram block"))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let flux_components = file
            .flux_components
            .iter()
            .map(|b| from_rows(b, m, n, "flux component block"))
            .collect::<Result<_>>()?;
        let mut model = Self::new(ModelParts {
            problem,
            basis: file.basis,
            flux_basis: file.flux_basis,
            flux_origin: file.flux_origin,
            t_f: file.t_f,
            a_hat,
            f_hat: file.reduced_load,
            estimator: EstimatorGram {
                ff: file.riesz_ff,
                fa: file.riesz_fa,
                aa,
            },
            flux_gram: from_rows(&file.flux_gram, m, m, "flux Gram matrix")?,
            flux_components,
            flux_penalty: from_rows(&file.flux_penalty, m, n, "flux penalty block")?,
            flux_source: file.flux_source,
            selected_parameters: file.selected_parameters,
        })?;
        model.estimator_constant = file.estimator_constant;
        model.tolerance = file.tolerance;
        model.trajectory = file.trajectory;
        model.config_hash = file.config_hash;
        Ok(model)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &self.to_file()?)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(BufReader::new(File::open(path)?))
    }
}
