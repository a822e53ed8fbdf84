//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::graph::{Graph, Var};
use super::params::Params;
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates checked per tensor (all of them when the tensor is smaller).
    pub coords_per_tensor: usize,
    /// Lower bound on the denominator of the relative error, so coordinates
    /// whose true gradient is ~0 are judged on absolute error.
    pub floor: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: 1e-5,
            coords_per_tensor: 8,
            floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic[i]` against central differences of `f` around `points`
/// on a random subset of coordinates of every tensor.
pub fn finite_difference_check<R: Rng + ?Sized>(
    points: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    mut f: impl FnMut(&[Tensor<f64>]) -> Result<f64, NnError>,
    cfg: FdConfig,
    rng: &mut R,
) -> Result<FdReport, NnError> {
    if points.len() != analytic.len() {
        return Err(NnError::Shape(format!(
            "{} points but {} gradients",
            points.len(),
            analytic.len()
        )));
    }
    let mut work: Vec<Tensor<f64>> = points.to_vec();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for t in 0..points.len() {
        let n = points[t].len();
        let coords: Vec<usize> = if n <= cfg.coords_per_tensor {
            (0..n).collect()
        } else {
            sample(rng, n, cfg.coords_per_tensor).into_vec()
        };
        for c in coords {
            let x0 = points[t].data()[c];
            work[t].data_mut()[c] = x0 + cfg.step;
            let up = f(&work)?;
            work[t].data_mut()[c] = x0 - cfg.step;
            let down = f(&work)?;
            work[t].data_mut()[c] = x0;
            let numeric = (up - down) / (2.0 * cfg.step);
            let err = relative_error(analytic[t].data()[c], numeric, cfg.floor);
            worst = worst.max(err);
            checked += 1;
        }
    }
    Ok(FdReport {
        max_rel_error: worst,
        coords_checked: checked,
    })
}

/// Finite-difference check of every parameter of a model whose scalar loss
/// is built by `loss` on a fresh graph.
pub fn check_params<R: Rng + ?Sized>(
    params: &Params<f64>,
    loss: impl Fn(&mut Graph<f64>, &Params<f64>) -> Result<Var, NnError>,
    cfg: FdConfig,
    rng: &mut R,
) -> Result<FdReport, NnError> {
    let mut g = Graph::new();
    let out = loss(&mut g, params)?;
    let grads = g.backward(out)?.param_grads(params);
    let points: Vec<Tensor<f64>> = params.iter().map(|(_, t)| t.clone()).collect();
    let mut scratch = params.clone();
    finite_difference_check(
        &points,
        &grads,
        |ts| {
            for (id, t) in scratch.ids().collect::<Vec<_>>().into_iter().zip(ts) {
                *scratch.get_mut(id) = t.clone();
            }
            let mut g = Graph::new();
            let out = loss(&mut g, &scratch)?;
            Ok(g.value(out).item())
        },
        cfg,
        rng,
    )
}
