use super::elliptical::{stream_rng, BLOCK_ROWS};
use super::scenario::ScenarioMatrix;
use super::UnivariateModel;
use crate::error::{DqError, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

/// `count` rows of `cols` independent draws from `model`.
pub fn sample_iid(model: &UnivariateModel, cols: usize, count: usize, seed: u64) -> Result<ScenarioMatrix> {
    if cols == 0 || count == 0 {
        return Err(DqError::invalid("sample dimensions must be positive"));
    }
    let student = match *model {
        UnivariateModel::StudentT { dof, .. } => {
            Some(StudentT::new(dof).map_err(|e| DqError::invalid(e.to_string()))?)
        }
        _ => None,
    };
    let mut data = vec![0.0; count * cols];
    data.par_chunks_mut(BLOCK_ROWS * cols).enumerate().for_each(|(block, chunk)| {
        let mut rng = stream_rng(seed, block as u64);
        for x in chunk.iter_mut() {
            *x = match *model {
                UnivariateModel::Normal { loc, scale } => {
                    loc + scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                }
                UnivariateModel::StudentT { loc, scale, .. } => {
                    loc + scale * student.as_ref().unwrap().sample(&mut rng)
                }
                UnivariateModel::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
                UnivariateModel::Pareto { tail_index, scale } => {
                    // 1 - U lies in (0, 1]
                    scale * (1.0 - rng.random::<f64>()).powf(-1.0 / tail_index)
                }
            };
        }
    });
    ScenarioMatrix::from_row_major(cols, data)
}
