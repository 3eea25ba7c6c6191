//! No-U-Turn sampling of the latent posterior.
//!
//! A self-contained implementation of the efficient NUTS recursion with a
//! fixed step size and an identity mass matrix; whitening of the latent
//! vectors does the preconditioning, so all sampling happens in flat
//! whitened coordinates. The tree doubles until the trajectory turns back
//! on itself or the depth limit is hit; a leaf whose energy error exceeds
//! `DELTA_MAX` (or whose evaluation fails numerically) stops the doubling
//! and counts as a divergence. Chains run in parallel with independent
//! RNG streams and merge deterministically by (chain, draw index).

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{NsgpError, Result};
use crate::model::{Hyperparams, Latent, LatentState, VariantFlags, LATENT_KINDS};
use crate::objective::Objective;
use crate::predict::{PredictiveComponent, PredictiveMixture};

/// Energy-error threshold beyond which a leaf is declared divergent.
const DELTA_MAX: f64 = 1000.0;

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct NutsConfig {
    pub step_size: f64,
    pub max_tree_depth: usize,
    /// Kept draws per chain (after warmup).
    pub n_samples: usize,
    /// Discarded draws per chain; `None` means 20% of `n_samples`.
    pub n_warmup: Option<usize>,
    pub n_chains: usize,
    pub seed: u64,
    /// Optional natural-frame start for chain 0 (e.g. the MAP state);
    /// other chains always start from dispersed random points.
    pub start_at: Option<LatentState>,
}

impl Default for NutsConfig {
    fn default() -> Self {
        NutsConfig {
            step_size: 0.01,
            max_tree_depth: 10,
            n_samples: 1000,
            n_warmup: None,
            n_chains: 10,
            seed: 0,
            start_at: None,
        }
    }
}

impl NutsConfig {
    pub fn warmup(&self) -> usize {
        self.n_warmup.unwrap_or(self.n_samples.div_ceil(5))
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(NsgpError::Domain(format!(
                "step_size = {} must be positive",
                self.step_size
            )));
        }
        if self.max_tree_depth == 0 || self.n_samples == 0 || self.n_chains == 0 {
            return Err(NsgpError::Domain(
                "max_tree_depth, n_samples and n_chains must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One posterior draw in the natural frame.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub state: LatentState,
    pub mll: f64,
    pub chain: usize,
    pub index: usize,
}

/// Per-chain acceptance statistics.
#[derive(Debug, Clone)]
pub struct ChainStats {
    pub chain: usize,
    pub transitions: usize,
    pub divergences: usize,
    /// Transitions whose proposal moved the chain.
    pub moved: usize,
    pub mean_tree_depth: f64,
}

/// Ordered posterior draws from all chains.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<PosteriorSample>,
    pub chain_stats: Vec<ChainStats>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keep every `stride`-th draw (per the full ordered list).
    pub fn thin(&self, stride: usize) -> SampleSet {
        let stride = stride.max(1);
        SampleSet {
            samples: self
                .samples
                .iter()
                .step_by(stride)
                .cloned()
                .collect(),
            chain_stats: self.chain_stats.clone(),
        }
    }

    /// Columnar text form: a header, then one row per draw with
    /// `chain`, `index`, `mll`, and the latent entries. Nonstationary
    /// blocks get numbered columns (`ell0`, `ell1`, ...), stationary
    /// scalars a single bare column (`ell`).
    pub fn to_columnar(&self) -> Result<String> {
        let first = self
            .samples
            .first()
            .ok_or(NsgpError::Empty("SampleSet::to_columnar"))?;
        let mut header: Vec<String> = vec!["chain".into(), "index".into(), "mll".into()];
        for (kind, name) in LATENT_KINDS.iter().zip(["ell", "sigma", "omega"]) {
            match first.state.component(*kind) {
                Latent::Field(v) => {
                    header.extend((0..v.len()).map(|i| format!("{name}{i}")));
                }
                Latent::Scalar(_) => header.push(name.to_string()),
            }
        }
        let mut out = header.join("\t");
        out.push('\n');
        for s in &self.samples {
            let mut row = format!("{}\t{}\t{}", s.chain, s.index, s.mll);
            for kind in LATENT_KINDS {
                match s.state.component(kind) {
                    Latent::Field(v) => {
                        for val in v.iter() {
                            row.push('\t');
                            row.push_str(&val.to_string());
                        }
                    }
                    Latent::Scalar(c) => {
                        row.push('\t');
                        row.push_str(&c.to_string());
                    }
                }
            }
            out.push_str(&row);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse the format produced by [`to_columnar`](Self::to_columnar).
    pub fn from_columnar(text: &str, path: &str) -> Result<SampleSet> {
        let err = |line: usize, msg: String| NsgpError::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| err(1, "empty sample file".into()))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 6 || cols[0] != "chain" || cols[1] != "index" || cols[2] != "mll" {
            return Err(err(1, "expected header starting 'chain\\tindex\\tmll'".into()));
        }
        // block extents from the column names
        let mut blocks = Vec::new();
        let mut at = 3;
        for name in ["ell", "sigma", "omega"] {
            if at >= cols.len() {
                return Err(err(1, format!("missing '{name}' columns")));
            }
            if cols[at] == name {
                blocks.push((at, 1usize, false));
                at += 1;
            } else {
                let mut count = 0;
                while at + count < cols.len()
                    && cols[at + count] == format!("{name}{count}")
                {
                    count += 1;
                }
                if count == 0 {
                    return Err(err(1, format!("expected '{name}' or '{name}0' column")));
                }
                blocks.push((at, count, true));
                at += count;
            }
        }

        let mut samples = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != cols.len() {
                return Err(err(
                    lineno + 1,
                    format!("expected {} fields, got {}", cols.len(), fields.len()),
                ));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| err(lineno + 1, format!("{what}: {e}")))
            };
            let chain = fields[0]
                .parse::<usize>()
                .map_err(|e| err(lineno + 1, format!("chain: {e}")))?;
            let index = fields[1]
                .parse::<usize>()
                .map_err(|e| err(lineno + 1, format!("index: {e}")))?;
            let mll = parse(fields[2], "mll")?;
            let mut latents = Vec::with_capacity(3);
            for &(start, count, is_field) in &blocks {
                if is_field {
                    let mut v = DVector::zeros(count);
                    for i in 0..count {
                        v[i] = parse(fields[start + i], "latent entry")?;
                    }
                    latents.push(Latent::Field(v));
                } else {
                    latents.push(Latent::Scalar(parse(fields[start], "latent entry")?));
                }
            }
            let omega = latents.pop().unwrap();
            let sigma = latents.pop().unwrap();
            let ell = latents.pop().unwrap();
            samples.push(PosteriorSample {
                state: LatentState { ell, sigma, omega, frame: crate::model::Frame::Natural },
                mll,
                chain,
                index,
            });
        }
        Ok(SampleSet { samples, chain_stats: Vec::new() })
    }
}

/// Position, gradient, and log density carried through the trajectory so
/// no evaluation is repeated.
#[derive(Clone)]
struct Point {
    q: DVector<f64>,
    grad: DVector<f64>,
    logp: f64,
}

fn eval(obj: &Objective, q: &DVector<f64>) -> Option<Point> {
    match obj.whitened_value_and_grad(q) {
        Ok((logp, grad)) if logp.is_finite() => Some(Point { q: q.clone(), grad, logp }),
        _ => None,
    }
}

/// One leapfrog step of size `eps` (signed); `None` on numerical failure.
fn leapfrog_step(obj: &Objective, point: &Point, p: &DVector<f64>, eps: f64) -> Option<(Point, DVector<f64>)> {
    let p_half = p + &point.grad * (0.5 * eps);
    let q_new = &point.q + &p_half * eps;
    let new_point = eval(obj, &q_new)?;
    let p_new = &p_half + &new_point.grad * (0.5 * eps);
    Some((new_point, p_new))
}

/// Integrate `steps` leapfrog steps from `(q0, p0)`; public so integrator
/// properties (reversibility, energy drift) can be checked directly.
pub fn leapfrog_trajectory(
    obj: &Objective,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    eps: f64,
    steps: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut point = eval(obj, q0)
        .ok_or_else(|| NsgpError::Numerical("leapfrog start not evaluable".into()))?;
    let mut p = p0.clone();
    for _ in 0..steps {
        let (next, p_next) = leapfrog_step(obj, &point, &p, eps)
            .ok_or_else(|| NsgpError::Numerical("leapfrog step failed".into()))?;
        point = next;
        p = p_next;
    }
    Ok((point.q, p))
}

/// Log density minus kinetic energy.
fn joint(point: &Point, p: &DVector<f64>) -> f64 {
    point.logp - 0.5 * p.norm_squared()
}

struct Tree {
    minus: Point,
    p_minus: DVector<f64>,
    plus: Point,
    p_plus: DVector<f64>,
    proposal: Point,
    n: u64,
    keep_going: bool,
    divergent: bool,
}

fn no_u_turn(minus: &Point, p_minus: &DVector<f64>, plus: &Point, p_plus: &DVector<f64>) -> bool {
    let dq = &plus.q - &minus.q;
    dq.dot(p_minus) >= 0.0 && dq.dot(p_plus) >= 0.0
}

#[allow(clippy::too_many_arguments)]
fn build_tree(
    obj: &Objective,
    point: &Point,
    p: &DVector<f64>,
    log_u: f64,
    direction: f64,
    depth: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Tree {
    if depth == 0 {
        // base case: one leapfrog step in the chosen direction
        match leapfrog_step(obj, point, p, direction * eps) {
            Some((new_point, p_new)) => {
                let j = joint(&new_point, &p_new);
                let n = u64::from(log_u <= j);
                let keep_going = log_u < j + DELTA_MAX;
                Tree {
                    minus: new_point.clone(),
                    p_minus: p_new.clone(),
                    plus: new_point.clone(),
                    p_plus: p_new.clone(),
                    proposal: new_point,
                    n,
                    divergent: !keep_going,
                    keep_going,
                }
            }
            None => Tree {
                minus: point.clone(),
                p_minus: p.clone(),
                plus: point.clone(),
                p_plus: p.clone(),
                proposal: point.clone(),
                n: 0,
                keep_going: false,
                divergent: true,
            },
        }
    } else {
        // recursion: build the inner subtree, then extend it outward
        let mut tree = build_tree(obj, point, p, log_u, direction, depth - 1, eps, rng);
        if tree.keep_going {
            let outer = if direction < 0.0 {
                let t = build_tree(obj, &tree.minus, &tree.p_minus, log_u, direction, depth - 1, eps, rng);
                tree.minus = t.minus.clone();
                tree.p_minus = t.p_minus.clone();
                t
            } else {
                let t = build_tree(obj, &tree.plus, &tree.p_plus, log_u, direction, depth - 1, eps, rng);
                tree.plus = t.plus.clone();
                tree.p_plus = t.p_plus.clone();
                t
            };
            let total = tree.n + outer.n;
            if total > 0 && rng.random::<f64>() < outer.n as f64 / total as f64 {
                tree.proposal = outer.proposal;
            }
            tree.n = total;
            tree.divergent |= outer.divergent;
            tree.keep_going = outer.keep_going
                && no_u_turn(&tree.minus, &tree.p_minus, &tree.plus, &tree.p_plus);
        }
        tree
    }
}

struct Transition {
    point: Point,
    depth: usize,
    divergent: bool,
    moved: bool,
}

fn transition(
    obj: &Objective,
    current: Point,
    cfg: &NutsConfig,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let dim = current.q.len();
    let p0 = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let joint0 = joint(&current, &p0);
    let log_u = joint0 + rng.random::<f64>().ln();

    let mut minus = current.clone();
    let mut p_minus = p0.clone();
    let mut plus = current.clone();
    let mut p_plus = p0;
    let mut proposal = current.clone();
    let mut n: u64 = 1;
    let mut depth = 0;
    let mut divergent = false;
    let mut moved = false;

    while depth < cfg.max_tree_depth {
        let direction: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let subtree = if direction < 0.0 {
            let t = build_tree(obj, &minus, &p_minus, log_u, direction, depth, cfg.step_size, rng);
            minus = t.minus.clone();
            p_minus = t.p_minus.clone();
            t
        } else {
            let t = build_tree(obj, &plus, &p_plus, log_u, direction, depth, cfg.step_size, rng);
            plus = t.plus.clone();
            p_plus = t.p_plus.clone();
            t
        };
        divergent |= subtree.divergent;
        if subtree.keep_going && rng.random::<f64>() < subtree.n as f64 / n as f64 {
            proposal = subtree.proposal.clone();
            moved = true;
        }
        n += subtree.n;
        depth += 1;
        if !(subtree.keep_going && no_u_turn(&minus, &p_minus, &plus, &p_plus)) {
            break;
        }
    }

    Transition { point: proposal, depth, divergent, moved }
}

fn chain_start(obj: &Objective, cfg: &NutsConfig, chain: usize) -> Result<DVector<f64>> {
    if chain == 0 {
        if let Some(state) = &cfg.start_at {
            return obj.whitened_flat_from_state(state);
        }
    }
    let prior_mean = LatentState::at_prior_mean(obj.theta(), obj.flags(), obj.n());
    let mut flat = obj.whitened_flat_from_state(&prior_mean)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x10_0000 + chain as u64);
    for v in flat.iter_mut() {
        *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(flat)
}

fn run_chain(
    obj: &Objective,
    cfg: &NutsConfig,
    chain: usize,
) -> Result<(Vec<PosteriorSample>, ChainStats)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);

    let q0 = chain_start(obj, cfg, chain)?;
    let mut current = eval(obj, &q0).ok_or_else(|| {
        NsgpError::Sampling(format!("chain {chain}: initial state not evaluable"))
    })?;

    let warmup = cfg.warmup();
    let total = warmup + cfg.n_samples;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut divergences = 0usize;
    let mut moved = 0usize;
    let mut depth_sum = 0usize;

    for i in 0..total {
        let t = transition(obj, current, cfg, &mut rng);
        current = t.point;
        divergences += usize::from(t.divergent);
        moved += usize::from(t.moved);
        depth_sum += t.depth;
        if i >= warmup {
            let state = obj.state_from_whitened_flat(&current.q)?;
            samples.push(PosteriorSample {
                state,
                mll: current.logp,
                chain,
                index: i - warmup,
            });
        }
    }

    if divergences * 2 > total {
        return Err(NsgpError::Sampling(format!(
            "chain {chain}: {divergences} of {total} transitions diverged \
             (step size {} likely too large)",
            cfg.step_size
        )));
    }

    Ok((
        samples,
        ChainStats {
            chain,
            transitions: total,
            divergences,
            moved,
            mean_tree_depth: depth_sum as f64 / total as f64,
        },
    ))
}

/// Sample the latent posterior with NUTS over the whitened coordinates.
/// Deterministic for a fixed seed; chains run in parallel and the result
/// is merged in (chain, draw) order.
pub fn sample_posterior(
    y: &DVector<f64>,
    x: &DVector<f64>,
    theta: &Hyperparams,
    flags: &VariantFlags,
    cfg: &NutsConfig,
) -> Result<SampleSet> {
    let obj = Objective::new(y, x, theta, flags)?;
    sample_posterior_objective(&obj, cfg)
}

/// Same as [`sample_posterior`] for an already-built objective (also the
/// entry point for prior-only calibration targets).
pub fn sample_posterior_objective(obj: &Objective, cfg: &NutsConfig) -> Result<SampleSet> {
    cfg.validate()?;
    if obj.n() < 1 {
        return Err(NsgpError::Empty("sample_posterior: no data"));
    }
    let results: Vec<Result<(Vec<PosteriorSample>, ChainStats)>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| run_chain(obj, cfg, chain))
        .collect();

    let mut samples = Vec::with_capacity(cfg.n_chains * cfg.n_samples);
    let mut chain_stats = Vec::with_capacity(cfg.n_chains);
    for r in results {
        let (s, stats) = r?;
        samples.extend(s);
        chain_stats.push(stats);
    }
    Ok(SampleSet { samples, chain_stats })
}

/// Posterior of the latent function at the training inputs as a uniform
/// mixture with one Gaussian component per retained draw.
pub fn posterior_mixture(
    samples: &SampleSet,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<PredictiveMixture> {
    if samples.is_empty() {
        return Err(NsgpError::Empty("posterior_mixture: no samples"));
    }
    let components = samples
        .samples
        .iter()
        .map(|s| {
            let (mean, cov) = crate::infer_map::function_posterior(&s.state, y, x)?;
            let noise_sd = s.state.omega.natural_values(x.len());
            Ok(PredictiveComponent { mean, cov, noise_sd })
        })
        .collect::<Result<Vec<_>>>()?;
    PredictiveMixture::uniform(components)
}
