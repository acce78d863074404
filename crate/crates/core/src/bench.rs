//! Wall-clock timing of full-order and online solves.

use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::rb::{FullOrderContext, ReducedModel};

/// Median of a nonempty sample.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn check(params: &[Vec<f64>], repeats: usize) -> Result<()> {
    if params.is_empty() || repeats == 0 {
        return Err(Error::InvalidArgument(
            "timing needs at least one parameter and one repeat".into(),
        ));
    }
    Ok(())
}

/// Median seconds per online evaluation (reduced solve plus reduced flux
/// coefficients), each repeat sweeping all parameters `inner` times.
pub fn time_online(
    model: &ReducedModel,
    params: &[Vec<f64>],
    repeats: usize,
    inner: usize,
) -> Result<f64> {
    check(params, repeats)?;
    let inner = inner.max(1);
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        for _ in 0..inner {
            for mu in params {
                let c = model.rom_solve(black_box(mu))?;
                black_box(model.reduced_flux_coefficients(mu, &c)?);
            }
        }
        samples.push(start.elapsed().as_secs_f64() / (inner * params.len()) as f64);
    }
    Ok(median(samples))
}

/// Median seconds per full-order solve over the given parameters.
pub fn time_fom(ctx: &FullOrderContext, params: &[Vec<f64>], repeats: usize) -> Result<f64> {
    check(params, repeats)?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        for mu in params {
            black_box(ctx.solve(black_box(mu))?);
        }
        samples.push(start.elapsed().as_secs_f64() / params.len() as f64);
    }
    Ok(median(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(vec![3.0]), 3.0);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn timing_rejects_empty_input() {
        let problem = crate::problem::ProblemDescriptor::thermal_block(2, 100.0)
            .build()
            .unwrap();
        let ctx = FullOrderContext::new(problem).unwrap();
        assert!(time_fom(&ctx, &[], 3).is_err());
        assert!(time_fom(&ctx, &[vec![1.0; 4]], 0).is_err());
        assert!(time_fom(&ctx, &[vec![1.0; 4]], 1).unwrap() > 0.0);
    }
}
