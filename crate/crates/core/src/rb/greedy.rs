use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EstimatorConstant, Extension, FullOrderContext, ReducedBasisBuilder, ReducedModel};
use crate::error::{Error, Result};

/// Relative level (against the first maximum) below which the estimator is
/// considered to sit at round-off.
const STAGNATION_FLOOR: f64 = 1e-7;
/// Consecutive round-off iterations tolerated before giving up.
const STAGNATION_PATIENCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    pub tolerance: f64,
    pub max_basis: Option<usize>,
    pub estimator_constant: EstimatorConstant,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_basis: None,
            estimator_constant: EstimatorConstant::Divide,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxBasis,
}

/// One sweep of the greedy loop: sizes before extension, the largest
/// estimate over the training set and its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub iteration: usize,
    pub n: usize,
    pub m: usize,
    pub max_estimate: f64,
    pub mu: Vec<f64>,
}

fn sweep(model: &ReducedModel, train: &[Vec<f64>]) -> Result<(usize, f64)> {
    let estimates: Vec<f64> = train
        .par_iter()
        .map(|mu| model.solve_and_estimate(mu).map(|(_, eta)| eta))
        .collect::<Result<_>>()?;
    if let Some(i) = estimates.iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFinite(format!("estimate at training point {i}")));
    }
    let best = argmax(&estimates);
    Ok((best, estimates[best]))
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Weak greedy construction of the solution and flux spaces.
pub fn greedy(
    ctx: &FullOrderContext,
    train: &[Vec<f64>],
    options: &GreedyOptions,
) -> Result<(ReducedModel, Termination)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "greedy tolerance must be positive, got {}",
            options.tolerance
        )));
    }
    for mu in train {
        ctx.problem().check_parameter(mu)?;
    }
    let mut builder = ReducedBasisBuilder::new(ctx);
    let mut trajectory = Vec::new();
    let mut first_max = None;
    let mut flat_iterations = 0;
    let finish = |mut model: ReducedModel, trajectory: Vec<GreedyStep>| {
        model.tolerance = Some(options.tolerance);
        model.trajectory = trajectory;
        model
    };
    for iteration in 0.. {
        let mut model = builder.build()?;
        model.estimator_constant = options.estimator_constant;
        let (best, eta) = sweep(&model, train)?;
        trajectory.push(GreedyStep {
            iteration,
            n: builder.len(),
            m: builder.flux_len(),
            max_estimate: eta,
            mu: train[best].clone(),
        });
        if eta <= options.tolerance {
            return Ok((finish(model, trajectory), Termination::Converged));
        }
        if options.max_basis.is_some_and(|cap| builder.len() >= cap) {
            return Ok((finish(model, trajectory), Termination::MaxBasis));
        }
        if builder.len() >= train.len() {
            return Err(Error::GreedyStagnation(format!(
                "basis size {} reached the training set size with estimate {eta:e} above {:e}",
                builder.len(),
                options.tolerance
            )));
        }
        let reference = *first_max.get_or_insert(eta);
        if eta <= STAGNATION_FLOOR * reference {
            flat_iterations += 1;
            if flat_iterations >= STAGNATION_PATIENCE {
                return Err(Error::GreedyStagnation(format!(
                    "estimate stuck at {eta:e} above tolerance {:e}",
                    options.tolerance
                )));
            }
        } else {
            flat_iterations = 0;
        }
        let (ext, _) = builder.add_snapshot(&train[best])?;
        if ext == Extension::Rejected {
            return Err(Error::GreedyStagnation(format!(
                "snapshot at {:?} is dependent on the basis while the estimate is {eta:e}",
                train[best]
            )));
        }
    }
    unreachable!("the greedy loop only exits by returning")
}

#[cfg(test)]
mod tests {
    use super::argmax;
    use proptest::prelude::*;

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax(&[1.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 5.0, 5.0]), 1);
    }

    proptest! {
        #[test]
        fn argmax_is_invariant_under_positive_scaling(
            values in proptest::collection::vec(0.0f64..1e3, 1..50),
            scale in 1e-6f64..1e6,
        ) {
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = argmax(&values);
            let b = argmax(&scaled);
            // scaling can merge near-ties by rounding; the chosen value must stay maximal
            prop_assert!(values[b] >= values[a] * (1.0 - 1e-15));
            if values.iter().filter(|&&v| v == values[a]).count() == 1
                && values.iter().all(|&v| v == values[a] || v < values[a] * (1.0 - 1e-12))
            {
                prop_assert_eq!(a, b);
            }
        }
    }
}
