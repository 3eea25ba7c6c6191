//! MAP estimation by multi-restart gradient ascent in whitened coordinates.
//!
//! Each restart runs plain gradient ascent with Armijo backtracking
//! (contraction 0.5, slope factor 1e-4, initial step 1.0) until the
//! infinity norm of the whitened gradient drops below the tolerance or the
//! iteration budget runs out. Restart 0 starts at the prior mean, the rest
//! at small standard-normal perturbations around it. Restarts are
//! independent and run in parallel; the best final objective wins.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{NsgpError, Result};
use crate::kernel::{cholesky_with_jitter, nonstationary_kernel};
use crate::model::{Hyperparams, LatentState, VariantFlags};
use crate::objective::{MllValue, Objective};

const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_CONTRACTION: f64 = 0.5;
const INITIAL_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-18;

/// Options for [`fit_map`].
#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { restarts: 10, max_iters: 2000, grad_tol: 1e-5, seed: 0 }
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone)]
pub struct RestartDiagnostics {
    pub restart: usize,
    pub init_mll: f64,
    pub final_mll: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting at the initial point.
    pub mll_trace: Vec<f64>,
    pub error: Option<String>,
}

/// The best latent state found over all restarts.
#[derive(Debug, Clone)]
pub struct MapResult {
    /// Natural-frame latent state.
    pub state: LatentState,
    pub mll: MllValue,
    pub restarts_run: usize,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: Vec<RestartDiagnostics>,
}

struct RestartOutcome {
    diag: RestartDiagnostics,
    state: Option<(DVector<f64>, f64)>,
}

fn run_restart(obj: &Objective, init: DVector<f64>, opts: &MapOptions, id: usize) -> RestartOutcome {
    let fail = |msg: String, init_mll: f64, trace: Vec<f64>, iters: usize| RestartOutcome {
        diag: RestartDiagnostics {
            restart: id,
            init_mll,
            final_mll: f64::NEG_INFINITY,
            iterations: iters,
            converged: false,
            mll_trace: trace,
            error: Some(msg),
        },
        state: None,
    };

    let mut w = init;
    let (mut value, mut grad) = match obj.whitened_value_and_grad(&w) {
        Ok(vg) => vg,
        Err(e) => return fail(e.to_string(), f64::NEG_INFINITY, Vec::new(), 0),
    };
    let init_mll = value;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        iterations = iter;
        if grad.amax() <= opts.grad_tol {
            converged = true;
            break;
        }
        // backtracking line search along the gradient
        let slope = grad.norm_squared();
        let mut step = INITIAL_STEP;
        let mut accepted = None;
        while step >= MIN_STEP {
            let candidate = &w + &grad * step;
            match obj.whitened_value(&candidate) {
                Ok(v) if v >= value + ARMIJO_SLOPE * step * slope => {
                    accepted = Some((candidate, v));
                    break;
                }
                _ => step *= ARMIJO_CONTRACTION,
            }
        }
        let Some((next, next_value)) = accepted else {
            // no ascent direction step acceptable: stalled at numerical limit
            break;
        };
        w = next;
        value = next_value;
        trace.push(value);
        match obj.whitened_value_and_grad(&w) {
            Ok((v, g)) => {
                value = v;
                grad = g;
            }
            Err(e) => return fail(e.to_string(), init_mll, trace, iterations),
        }
        iterations = iter + 1;
    }

    RestartOutcome {
        diag: RestartDiagnostics {
            restart: id,
            init_mll,
            final_mll: value,
            iterations,
            converged,
            mll_trace: trace,
            error: None,
        },
        state: Some((w, value)),
    }
}

fn initial_point(obj: &Objective, opts: &MapOptions, id: usize) -> DVector<f64> {
    let prior_mean = LatentState::at_prior_mean(obj.theta(), obj.flags(), obj.n());
    let mut flat = obj
        .whitened_flat_from_state(&prior_mean)
        .expect("prior mean is always representable");
    if id > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(id as u64);
        for v in flat.iter_mut() {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    flat
}

/// Fit the MAP latent state with multiple restarts, keeping the one with
/// the highest marginal log likelihood.
pub fn fit_map(
    y: &DVector<f64>,
    x: &DVector<f64>,
    theta: &Hyperparams,
    flags: &VariantFlags,
    opts: &MapOptions,
) -> Result<MapResult> {
    let obj = Objective::new(y, x, theta, flags)?;
    fit_map_objective(&obj, opts)
}

/// Same as [`fit_map`] for an already-built objective.
pub fn fit_map_objective(obj: &Objective, opts: &MapOptions) -> Result<MapResult> {
    if obj.n() < 2 {
        return Err(NsgpError::Dimension {
            context: "fit_map requires at least two points",
            expected: 2,
            got: obj.n(),
        });
    }
    if opts.restarts == 0 {
        return Err(NsgpError::Optimization("fit_map needs at least one restart".into()));
    }

    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|id| run_restart(obj, initial_point(obj, opts, id), opts, id))
        .collect();

    let mut best: Option<(usize, &DVector<f64>, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some((w, v)) = &o.state {
            if best.map_or(true, |(_, _, bv)| *v > bv) {
                best = Some((i, w, *v));
            }
        }
    }
    let Some((best_idx, best_w, _)) = best else {
        let detail: Vec<String> = outcomes
            .iter()
            .map(|o| {
                format!(
                    "restart {}: {}",
                    o.diag.restart,
                    o.diag.error.as_deref().unwrap_or("no state")
                )
            })
            .collect();
        return Err(NsgpError::Optimization(format!(
            "all {} restarts failed ({})",
            opts.restarts,
            detail.join("; ")
        )));
    };

    let state = obj.state_from_whitened_flat(best_w)?;
    let mll = obj.mll(&state)?;
    let diag = &outcomes[best_idx].diag;
    Ok(MapResult {
        state,
        mll,
        restarts_run: opts.restarts,
        converged: diag.converged,
        iterations: diag.iterations,
        restarts: outcomes.into_iter().map(|o| o.diag).collect(),
    })
}

/// Gaussian posterior of the latent function at the training inputs given
/// a natural-frame latent state:
/// mean `K_f (K_f + Omega)^{-1} y`, covariance `K_f - K_f (K_f + Omega)^{-1} K_f`.
pub fn function_posterior(
    state: &LatentState,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.len();
    if y.len() != n {
        return Err(NsgpError::Dimension {
            context: "function_posterior",
            expected: n,
            got: y.len(),
        });
    }
    let ell = state.ell.natural_values(n);
    let sigma = state.sigma.natural_values(n);
    let omega = state.omega.natural_values(n);
    let k_f = nonstationary_kernel(x, x, &ell, &ell, &sigma, &sigma)?.entries;
    let mut k_y = k_f.clone();
    for i in 0..n {
        k_y[(i, i)] += omega[i] * omega[i];
    }
    let jc = cholesky_with_jitter(&k_y, 0.0, "function posterior")?;
    let mean = &k_f * jc.chol.solve(y);
    let mut cov = &k_f - &k_f * jc.chol.solve(&k_f);
    // clean up the asymmetry left by the solve
    cov = (&cov + cov.transpose()) * 0.5;
    Ok((mean, cov))
}

/// Function posterior at the MAP solution.
pub fn map_function_posterior(
    map: &MapResult,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    function_posterior(&map.state, y, x)
}
