//! Estimation: decay fitting, learnable-space reconstruction, intercept
//! estimates, physical feasibility regions and SP-noise lower bounds.
//!
//! Decays are fitted by weighted least squares on log means (weights from
//! per-depth circuit variance via the delta method), with bootstrap
//! resampling over circuits for standard errors. Reconstruction solves for
//! the cycle-space component of the log-fidelity vector; its orthogonal
//! cut-space component is pure gauge, which the feasibility region then
//! bounds through the complete-positivity constraints on the unlearnable
//! error-rate directions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::wht_lambda_to_p;
use crate::clifford::GateSet;
use crate::graph::{EdgeFunctional, GraphError, PatternGraph, RankTracker, SpaceBasis};
use crate::pauli::{symplectic_idx, PauliOp};
use crate::sim::{CbRun, Protocol, SimError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("fewer than two usable depths: {0}")]
    Unfittable(String),
    #[error("run {0:?} not found in the dataset")]
    MissingRun(String),
    #[error("observations do not span the cycle space; missing: {0:?}")]
    InsufficientCoverage(Vec<String>),
    #[error("intercept families have incompatible shapes")]
    BadInterceptPair,
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("simulation error: {0}")]
    Sim(#[from] SimError),
    #[error("pauli error: {0}")]
    Pauli(#[from] crate::pauli::PauliError),
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct FitOptions {
    /// Bootstrap resamples over circuits.
    pub bootstrap: u32,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> FitOptions {
        FitOptions { bootstrap: 200, seed: 0 }
    }
}

/// Result of fitting mean = A * rate^x to one run.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub run_id: String,
    pub rate: f64,
    pub amplitude: f64,
    pub rate_err: f64,
    pub amplitude_err: f64,
    /// Log-domain residual per used point.
    pub residuals: Vec<(f64, f64)>,
    pub used_points: usize,
    pub dropped_points: usize,
}

/// Per-depth aggregated samples: (x, circuit means).
type Points = Vec<(f64, Vec<f64>)>;

/// A labeled target functional: (label, (gate, Pauli, coefficient) list).
pub type LabeledFunctional = (String, Vec<(String, String, f64)>);

fn weighted_line_fit(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    // points: (x, y, weight). Centered form avoids the catastrophic
    // cancellation of the raw normal equations under extreme weights.
    let wsum: f64 = points.iter().map(|p| p.2).sum();
    if !(wsum > 0.0) {
        return None;
    }
    let xbar = points.iter().map(|p| p.2 * p.0).sum::<f64>() / wsum;
    let ybar = points.iter().map(|p| p.2 * p.1).sum::<f64>() / wsum;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((ybar - slope * xbar, slope))
}

/// Selects usable points and runs the log-domain WLS.
///
/// Points whose mean is nonpositive or below three standard errors are
/// dropped (the log of a noise-floor mean is meaningless); between three
/// and seven standard errors the weight fades in smoothly, since a hard
/// gate makes the estimator bimodal across datasets. The fit runs twice:
/// the second pass takes its weights, taper, and the first-order log-bias
/// correction from the first pass's *predicted* curve, decoupling them
/// from the per-depth fluctuations (weights proportional to the observed
/// mean squared would upweight upward fluctuations at the high-leverage
/// deep depths and bias the rate high).
fn fit_once(points: &Points) -> Option<(f64, f64, Vec<(f64, f64)>, usize)> {
    let stats: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|(x, means)| {
            let c = means.len() as f64;
            let mean: f64 = means.iter().sum::<f64>() / c;
            let var = if means.len() > 1 {
                means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (c - 1.0) / c
            } else {
                0.0
            };
            (*x, mean, var)
        })
        .collect();

    let pass = |predicted: Option<(f64, f64)>| -> Option<(f64, f64, Vec<(f64, f64)>, usize)> {
        let mut prepared = Vec::new();
        let mut dropped = 0;
        for &(x, mean, var) in &stats {
            // Reference scale: the fitted curve when available, else the
            // observed mean.
            let reference = match predicted {
                Some((a, b)) => (a + b * x).exp(),
                None => mean,
            };
            let snr = if var > 0.0 { reference / var.sqrt() } else { f64::INFINITY };
            if !(mean > 0.0 && reference > 0.0 && snr > 5.0) {
                dropped += 1;
                continue;
            }
            let taper = ((snr - 5.0) / 4.0).min(1.0);
            // Var[log m] ~ var/ref^2, with the relative error floored at
            // 1e-8 so exact (infinite-shot) data gets uniform weights
            // instead of rounding-noise-driven extremes. E[log m-hat] sits
            // var/(2 ref^2) below log m; the second pass corrects it.
            let rel = if var > 0.0 { var.sqrt() / reference } else { 0.0 };
            let w = taper * taper / (rel.max(1e-8) * rel.max(1e-8));
            let bias = if predicted.is_some() { 0.5 * var / (reference * reference) } else { 0.0 };
            prepared.push((x, mean.ln() + bias, w));
        }
        if prepared.len() < 2 {
            return None;
        }
        let (intercept, slope) = weighted_line_fit(&prepared)?;
        let residuals =
            prepared.iter().map(|&(x, y, _)| (x, y - intercept - slope * x)).collect();
        Some((intercept, slope, residuals, dropped))
    };

    let (mut a, mut b, _, _) = pass(None)?;
    for _ in 0..2 {
        match pass(Some((a, b))) {
            Some((a2, b2, _, _)) => {
                a = a2;
                b = b2;
            }
            None => return pass(None),
        }
    }
    pass(Some((a, b))).or(pass(None))
}

fn gather_points(run: &CbRun) -> Points {
    let mut points: Points = Vec::new();
    for row in &run.rows {
        match points.iter_mut().find(|(x, _)| *x == row.x) {
            Some((_, v)) => v.push(row.mean),
            None => points.push((row.x, vec![row.mean])),
        }
    }
    points
}

fn bootstrap_rng(run_id: &str, seed: u64, resample: u32) -> impl FnMut(usize) -> usize {
    // Deterministic per-(run, resample) index stream.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in run_id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^= seed.wrapping_mul(0x9E3779B97F4A7C15);
    h ^= (resample as u64).wrapping_mul(0xD1B54A32D192ED03);
    let mut state = h;
    move |range: usize| {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z % range as u64) as usize
    }
}

/// Fits one run; bootstrap over circuits for the standard errors.
pub fn fit_decay(run: &CbRun, opts: &FitOptions) -> Result<DecayFit, FitError> {
    let points = gather_points(run);
    let (intercept, slope, residuals, dropped) = fit_once(&points)
        .ok_or_else(|| FitError::Unfittable(run.meta.run_id.clone()))?;
    let mut rates = Vec::new();
    let mut amps = Vec::new();
    for b in 0..opts.bootstrap {
        let mut draw = bootstrap_rng(&run.meta.run_id, opts.seed, b);
        let resampled: Points = points
            .iter()
            .map(|(x, means)| {
                let v: Vec<f64> = (0..means.len()).map(|_| means[draw(means.len())]).collect();
                (*x, v)
            })
            .collect();
        if let Some((a, s, _, _)) = fit_once(&resampled) {
            rates.push(s.exp());
            amps.push(a.exp());
        }
    }
    let std = |v: &[f64]| -> f64 {
        if v.len() < 2 {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
    };
    Ok(DecayFit {
        run_id: run.meta.run_id.clone(),
        rate: slope.exp(),
        amplitude: intercept.exp(),
        rate_err: std(&rates),
        amplitude_err: std(&amps),
        residuals,
        used_points: points.len() - dropped,
        dropped_points: dropped,
    })
}

/// One fitted run as a linear observation of log fidelities:
/// functional . l = value +- sigma.
#[derive(Clone, Debug, Serialize)]
pub struct Observation {
    pub run_id: String,
    pub entries: Vec<(String, String, f64)>,
    pub value: f64,
    pub sigma: f64,
    pub fit: DecayFit,
}

/// Fits every decay run in a dataset into observations (intercept families
/// are skipped; see [`intercept_estimate`]).
pub fn observations(runs: &[CbRun], opts: &FitOptions) -> Result<Vec<Observation>, FitError> {
    let mut out = Vec::new();
    for run in runs {
        match run.meta.protocol {
            Protocol::InterceptA | Protocol::InterceptB => continue,
            _ => {}
        }
        let fit = fit_decay(run, opts)?;
        let period = run.meta.period as f64;
        out.push(Observation {
            run_id: run.meta.run_id.clone(),
            entries: run.meta.functional.clone(),
            value: period * fit.rate.ln(),
            sigma: period * fit.rate_err / fit.rate,
            fit,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisEstimate {
    pub label: String,
    pub entries: Vec<(String, String, f64)>,
    /// Estimate of the functional applied to log fidelities.
    pub value: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnableEstimates {
    pub basis: Vec<BasisEstimate>,
    pub missing: Vec<String>,
    /// Per-observation consistency residual (value - prediction, sigma).
    pub consistency: Vec<(String, f64, f64)>,
    /// Minimum-norm log-fidelity vector matching the estimates: the
    /// cut-space (gauge) components are zero.
    pub gauge_fixed_log_lambdas: Vec<f64>,
}

fn dense_functional(
    graph: &PatternGraph,
    gates: &GateSet,
    entries: &[(String, String, f64)],
) -> Result<Vec<f64>, FitError> {
    let mut dense = vec![0.0; graph.edge_count()];
    for (gname, pstr, coeff) in entries {
        let (gi, _) = gates
            .by_name(gname)
            .ok_or_else(|| FitError::Sim(SimError::UnknownGate(gname.clone())))?;
        let p: PauliOp = pstr.parse()?;
        dense[graph.edge_index(gi, p.index())] += coeff;
    }
    Ok(dense)
}

/// Reconstructs every target basis functional from the observations by
/// weighted least squares over the cycle space.
pub fn reconstruct_learnable(
    obs: &[Observation],
    graph: &PatternGraph,
    gates: &GateSet,
    targets: &[LabeledFunctional],
) -> Result<LearnableEstimates, FitError> {
    let cycles = graph.cycle_space();
    let d = cycles.dim();
    let k = obs.len();
    // Design matrix in the cycle-basis parameterization l = B^T beta.
    let mut design = vec![vec![0.0; d]; k];
    let mut dense_obs = Vec::with_capacity(k);
    for (i, o) in obs.iter().enumerate() {
        let dense = dense_functional(graph, gates, &o.entries)?;
        for (j, b) in cycles.vectors.iter().enumerate() {
            design[i][j] = b.dot_dense(&dense);
        }
        dense_obs.push(dense);
    }
    // Exactly-noiseless observations (lambda_II, infinite-shot data) get a
    // floored sigma tied to the data scale, so the weight spread stays
    // within what the normal-equation eigensolve can resolve.
    let max_sigma = obs.iter().map(|o| o.sigma).fold(0.0f64, f64::max);
    let sigma_floor = (max_sigma * 1e-4).max(1e-12);
    let weights: Vec<f64> =
        obs.iter().map(|o| 1.0 / (o.sigma.max(sigma_floor) * o.sigma.max(sigma_floor))).collect();
    // Normal equations with pseudo-inverse (rank-deficient coverage allowed).
    let mut normal = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for i in 0..k {
        for a in 0..d {
            let wa = weights[i] * design[i][a];
            rhs[a] += wa * obs[i].value;
            for b in 0..d {
                normal[a][b] += wa * design[i][b];
            }
        }
    }
    let pinv = SymmetricPinv::new(normal);
    let beta = pinv.apply(&rhs);
    let l_hat = cycle_combination(&cycles, &beta, graph.edge_count());

    // Reachability of each target functional.
    let mut span = RankTracker::new();
    for dense in &dense_obs {
        span.try_add(dense.clone());
    }
    let mut basis = Vec::new();
    let mut missing = Vec::new();
    for (label, entries) in targets {
        let dense = dense_functional(graph, gates, entries)?;
        if !span.contains(&dense) {
            missing.push(label.clone());
            continue;
        }
        // g = B c where c projects the target into beta space.
        let g: Vec<f64> = cycles.vectors.iter().map(|b| b.dot_dense(&dense)).collect();
        let value: f64 = dense.iter().zip(&l_hat).map(|(a, b)| a * b).sum();
        // For WLS with W = diag(1/sigma_i^2), Var(g . beta) = g^T N^+ g
        // with N the weighted normal matrix.
        let var = {
            let pg = pinv.apply(&g);
            g.iter().zip(&pg).map(|(a, b)| a * b).sum::<f64>()
        };
        basis.push(BasisEstimate {
            label: label.clone(),
            entries: entries.clone(),
            value,
            sigma: var.max(0.0).sqrt(),
        });
    }
    let consistency = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let pred: f64 = dense_obs[i].iter().zip(&l_hat).map(|(a, b)| a * b).sum();
            (o.run_id.clone(), o.value - pred, o.sigma)
        })
        .collect();
    Ok(LearnableEstimates { basis, missing, consistency, gauge_fixed_log_lambdas: l_hat })
}

fn cycle_combination(cycles: &SpaceBasis, beta: &[f64], edge_count: usize) -> Vec<f64> {
    let mut l = vec![0.0; edge_count];
    for (b, vector) in beta.iter().zip(&cycles.vectors) {
        for &(idx, c) in &vector.entries {
            l[idx] += b * c as f64;
        }
    }
    l
}

/// Reconstruction with full-pipeline bootstrap standard errors: circuits
/// are resampled per run, every decay refitted, and the whole linear solve
/// repeated, so the basis sigmas absorb weight-estimation noise and the
/// depth drop-rule as well.
pub fn reconstruct_with_bootstrap(
    runs: &[CbRun],
    graph: &PatternGraph,
    gates: &GateSet,
    targets: &[LabeledFunctional],
    opts: &FitOptions,
) -> Result<LearnableEstimates, FitError> {
    let obs = observations(runs, opts)?;
    let mut estimates = reconstruct_learnable(&obs, graph, gates, targets)?;
    if opts.bootstrap < 2 {
        return Ok(estimates);
    }
    // Fixed pieces across replicas: design, weights, normal pseudo-inverse.
    let cycles = graph.cycle_space();
    let d = cycles.dim();
    let k = obs.len();
    let mut design = vec![vec![0.0; d]; k];
    for (i, o) in obs.iter().enumerate() {
        let dense = dense_functional(graph, gates, &o.entries)?;
        for (j, b) in cycles.vectors.iter().enumerate() {
            design[i][j] = b.dot_dense(&dense);
        }
    }
    let max_sigma = obs.iter().map(|o| o.sigma).fold(0.0f64, f64::max);
    let sigma_floor = (max_sigma * 1e-4).max(1e-12);
    let weights: Vec<f64> =
        obs.iter().map(|o| 1.0 / (o.sigma.max(sigma_floor) * o.sigma.max(sigma_floor))).collect();
    let mut normal = vec![vec![0.0; d]; d];
    for i in 0..k {
        for a in 0..d {
            for b in 0..d {
                normal[a][b] += weights[i] * design[i][a] * design[i][b];
            }
        }
    }
    let pinv = SymmetricPinv::new(normal);
    let g_targets: Result<Vec<Vec<f64>>, FitError> = estimates
        .basis
        .iter()
        .map(|b| {
            let dense = dense_functional(graph, gates, &b.entries)?;
            Ok(cycles.vectors.iter().map(|v| v.dot_dense(&dense)).collect())
        })
        .collect();
    let g_targets = g_targets?;

    let decay_runs: Vec<&CbRun> = runs
        .iter()
        .filter(|r| {
            r.meta.protocol != Protocol::InterceptA && r.meta.protocol != Protocol::InterceptB
        })
        .collect();
    let points: Vec<Points> = decay_runs.iter().map(|r| gather_points(r)).collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(opts.bootstrap as usize); g_targets.len()];
    for rep in 0..opts.bootstrap {
        let mut y = Vec::with_capacity(k);
        for (run, pts) in decay_runs.iter().zip(&points) {
            let mut draw = bootstrap_rng(&run.meta.run_id, opts.seed ^ 0x9E37_79B9, rep);
            let resampled: Points = pts
                .iter()
                .map(|(x, means)| {
                    (*x, (0..means.len()).map(|_| means[draw(means.len())]).collect())
                })
                .collect();
            let value = match fit_once(&resampled) {
                Some((_, slope, _, _)) => run.meta.period as f64 * slope,
                // Degenerate resample: fall back to the original estimate.
                None => obs[y.len()].value,
            };
            y.push(value);
        }
        let mut rhs = vec![0.0; d];
        for i in 0..k {
            for a in 0..d {
                rhs[a] += weights[i] * design[i][a] * y[i];
            }
        }
        let beta = pinv.apply(&rhs);
        for (sample, g) in samples.iter_mut().zip(&g_targets) {
            sample.push(g.iter().zip(&beta).map(|(a, b)| a * b).sum());
        }
    }
    for (basis, sample) in estimates.basis.iter_mut().zip(&samples) {
        if sample.len() > 1 {
            let m = sample.iter().sum::<f64>() / sample.len() as f64;
            let var =
                sample.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (sample.len() as f64 - 1.0);
            basis.sigma = var.sqrt();
        }
    }
    Ok(estimates)
}

/// Pseudo-inverse of a symmetric PSD matrix via Jacobi eigendecomposition.
struct SymmetricPinv {
    eigvals: Vec<f64>,
    eigvecs: Vec<Vec<f64>>, // column-major: eigvecs[j] is the j-th vector
}

impl SymmetricPinv {
    fn new(mut a: Vec<Vec<f64>>) -> SymmetricPinv {
        let d = a.len();
        let mut v: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for i in 0..d {
                for j in (i + 1)..d {
                    off = off.max(a[i][j].abs());
                }
            }
            if off < 1e-14 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..d {
                        let (vkp, vkq) = (v[k][p], v[k][q]);
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let eigvals: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
        let eigvecs: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| v[i][j]).collect()).collect();
        SymmetricPinv { eigvals, eigvecs }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.eigvals.len();
        let max = self.eigvals.iter().copied().fold(0.0f64, |m, e| m.max(e.abs()));
        let cutoff = max * 1e-13;
        let mut out = vec![0.0; d];
        for (j, vec_j) in self.eigvecs.iter().enumerate() {
            if self.eigvals[j].abs() <= cutoff {
                continue;
            }
            let proj: f64 = vec_j.iter().zip(x).map(|(a, b)| a * b).sum();
            let scale = proj / self.eigvals[j];
            for (o, vj) in out.iter_mut().zip(vec_j) {
                *o += scale * vj;
            }
        }
        out
    }
}

/// Intercept-CB estimate for one Pauli: the ratio of fitted intercepts,
/// asymptotically unbiased for lambda_a * lambda^S_a / lambda^S_b.
#[derive(Clone, Debug, Serialize)]
pub struct InterceptEstimate {
    pub pauli: String,
    pub partner: String,
    pub value: f64,
    pub sigma: f64,
    pub fit_a: DecayFit,
    pub fit_b: DecayFit,
    /// Both families must decay at the same per-l rate; false flags a
    /// model violation (> 3 sigma apart).
    pub rates_compatible: bool,
    /// Direct ratio of the l = 0 means, the model-free cross-check.
    pub l0_ratio: Option<f64>,
}

pub fn intercept_estimate(
    run_a: &CbRun,
    run_b: &CbRun,
    opts: &FitOptions,
) -> Result<InterceptEstimate, FitError> {
    if run_a.meta.protocol != Protocol::InterceptA || run_b.meta.protocol != Protocol::InterceptB {
        return Err(FitError::BadInterceptPair);
    }
    let fit_a = fit_decay(run_a, opts)?;
    let fit_b = fit_decay(run_b, opts)?;
    // Paired bootstrap for the intercept ratio.
    let points_a = gather_points(run_a);
    let points_b = gather_points(run_b);
    let mut ratios = Vec::new();
    for b in 0..opts.bootstrap {
        let mut draw_a = bootstrap_rng(&run_a.meta.run_id, opts.seed, b);
        let mut draw_b = bootstrap_rng(&run_b.meta.run_id, opts.seed, b);
        let res_a: Points = points_a
            .iter()
            .map(|(x, m)| (*x, (0..m.len()).map(|_| m[draw_a(m.len())]).collect()))
            .collect();
        let res_b: Points = points_b
            .iter()
            .map(|(x, m)| (*x, (0..m.len()).map(|_| m[draw_b(m.len())]).collect()))
            .collect();
        if let (Some((ia, _, _, _)), Some((ib, _, _, _))) = (fit_once(&res_a), fit_once(&res_b)) {
            ratios.push((ia - ib).exp());
        }
    }
    let value = fit_a.amplitude / fit_b.amplitude;
    let sigma = if ratios.len() > 1 {
        let m = ratios.iter().sum::<f64>() / ratios.len() as f64;
        (ratios.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (ratios.len() as f64 - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let rate_gap = (fit_a.rate - fit_b.rate).abs();
    let rate_tol = 3.0 * (fit_a.rate_err.powi(2) + fit_b.rate_err.powi(2)).sqrt();
    let l0_mean = |run: &CbRun| {
        let zero: Vec<f64> =
            run.rows.iter().filter(|r| r.x == 0.0).map(|r| r.mean).collect();
        (!zero.is_empty()).then(|| zero.iter().sum::<f64>() / zero.len() as f64)
    };
    let l0_ratio = match (l0_mean(run_a), l0_mean(run_b)) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    };
    Ok(InterceptEstimate {
        pauli: run_a.meta.prepare.clone(),
        partner: run_a.meta.measure.clone(),
        value,
        sigma,
        rates_compatible: rate_gap <= rate_tol.max(1e-12),
        l0_ratio,
        fit_a,
        fit_b,
    })
}

// Feasibility region over the gauge (cut-space) freedom.

#[derive(Clone, Debug, Serialize)]
pub struct RegionCoord {
    pub gate: String,
    pub pauli: String,
    pub edge: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionGrid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub y0: f64,
    pub dy: f64,
    pub ny: usize,
    #[serde(skip)]
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RowInterval {
    pub y: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Interval {
    pub gate: String,
    pub pauli: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibleRegion {
    pub coords: Vec<RegionCoord>,
    pub eps: f64,
    pub grid: RegionGrid,
    /// Bisection-refined feasible interval per grid row (one for 1D).
    pub rows: Vec<RowInterval>,
    pub is_interval_product: bool,
    pub lambda_intervals: Vec<Interval>,
    pub p_intervals: Vec<Interval>,
    pub feasible_points: usize,
    /// Set when the region is empty at the requested eps: the smallest
    /// slack that would admit at least one grid point.
    pub min_feasible_eps: Option<f64>,
}

struct RegionProblem<'a> {
    graph: &'a PatternGraph,
    gates: &'a GateSet,
    l_hat: Vec<f64>,
    cuts: SpaceBasis,
    /// Per gate: indices of unlearnable error-rate directions.
    unlearnable_p: Vec<Vec<usize>>,
    eps: f64,
}

impl<'a> RegionProblem<'a> {
    /// Gauge parameters t -> per-gate lambda vectors.
    fn lambdas_at(&self, t: &[f64]) -> Vec<Vec<f64>> {
        let size = 1usize << (2 * self.graph.n());
        let mut shift = self.l_hat.clone();
        for (tp, cut) in t.iter().zip(&self.cuts.vectors) {
            for &(idx, c) in &cut.entries {
                shift[idx] += tp * c as f64;
            }
        }
        (0..self.gates.len())
            .map(|gi| {
                (0..size).map(|a| shift[self.graph.edge_index(gi, a as u64)].exp()).collect()
            })
            .collect()
    }

    /// Maximum constraint violation at t (0 when feasible).
    fn violation(&self, t: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (gi, lambdas) in self.lambdas_at(t).iter().enumerate() {
            let p = wht_lambda_to_p(lambdas).expect("lambda length is 4^n");
            for &a in &self.unlearnable_p[gi] {
                worst = worst.max(-(p[a] + self.eps));
            }
        }
        worst
    }

    fn feasible(&self, t: &[f64]) -> bool {
        self.violation(t) <= 0.0
    }
}

/// Identifies, per gate, which error rates have a gauge-dependent (cut
/// space) first-order direction; only those are constrained.
fn unlearnable_error_dirs(
    graph: &PatternGraph,
    gates: &GateSet,
) -> Result<Vec<Vec<usize>>, FitError> {
    let size = 1usize << (2 * graph.n());
    let norm_size = size as f64;
    let mut out = Vec::new();
    for gi in 0..gates.len() {
        let mut dirs = Vec::new();
        for a in 0..size {
            let mut w = EdgeFunctional::zeros(graph.edge_count());
            for b in 0..size {
                let sign = if symplectic_idx(a as u64, b as u64) == 1 { -1.0 } else { 1.0 };
                w.0[graph.edge_index(gi, b as u64)] = sign / norm_size;
            }
            let verdict = graph.is_learnable(&w, 1e-9)?;
            if !verdict.learnable {
                dirs.push(a);
            }
        }
        out.push(dirs);
    }
    Ok(out)
}

/// Picks the reporting coordinates: the first (canonical edge order)
/// linearly independent unlearnable single-edge fidelities, preferring
/// full-pattern Paulis. For CNOT this is (XX, ZZ); for SWAP, XI.
fn pick_coords(
    graph: &PatternGraph,
    cuts: &SpaceBasis,
) -> Result<Vec<usize>, FitError> {
    let k = cuts.dim();
    let full = (1u64 << graph.n()) - 1;
    let response = |edge: usize| -> Vec<f64> {
        cuts.vectors
            .iter()
            .map(|cut| {
                cut.entries
                    .iter()
                    .filter(|(i, _)| *i == edge)
                    .map(|&(_, c)| c as f64)
                    .sum()
            })
            .collect()
    };
    let candidates: Vec<usize> = {
        let non_loop: Vec<(usize, u64)> = graph
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.src != e.dst)
            .map(|(i, e)| (i, e.src))
            .collect();
        let mut ordered: Vec<usize> =
            non_loop.iter().filter(|(_, src)| *src == full).map(|(i, _)| *i).collect();
        ordered.extend(non_loop.iter().filter(|(_, src)| *src != full).map(|(i, _)| *i));
        ordered
    };
    let mut picked: Vec<usize> = Vec::new();
    let mut tracker = RankTracker::new();
    for edge in candidates {
        if tracker.try_add(response(edge)) {
            picked.push(edge);
            if picked.len() == k {
                return Ok(picked);
            }
        }
    }
    Err(FitError::Graph(GraphError::CutDimension(k)))
}

/// Computes the feasibility region of the gauge freedom: the set of cut
/// parameters for which every unlearnable-direction error rate is >= -eps.
/// Grid-scanned (default 401 per axis) with bisection-refined boundary;
/// supports cut dimension 1 and 2.
pub fn feasible_region(
    estimates: &LearnableEstimates,
    graph: &PatternGraph,
    gates: &GateSet,
    eps: f64,
    grid_points: usize,
) -> Result<FeasibleRegion, FitError> {
    if !estimates.missing.is_empty() {
        return Err(FitError::InsufficientCoverage(estimates.missing.clone()));
    }
    let cuts = graph.cut_space();
    let k = cuts.dim();
    if k == 0 || k > 2 {
        return Err(FitError::Graph(GraphError::CutDimension(k)));
    }
    let problem = RegionProblem {
        graph,
        gates,
        l_hat: estimates.gauge_fixed_log_lambdas.clone(),
        cuts,
        unlearnable_p: unlearnable_error_dirs(graph, gates)?,
        eps,
    };
    let coords = pick_coords(graph, &problem.cuts)?;
    // Response matrix: log lambda_coord_i = l_hat_i + sum_j R[i][j] t_j.
    let r: Vec<Vec<f64>> = coords
        .iter()
        .map(|&edge| {
            problem
                .cuts
                .vectors
                .iter()
                .map(|cut| {
                    cut.entries.iter().filter(|(i, _)| *i == edge).map(|&(_, c)| c as f64).sum()
                })
                .collect()
        })
        .collect();
    let r_inv = invert_small(&r);
    let l0: Vec<f64> = coords.iter().map(|&e| estimates.gauge_fixed_log_lambdas[e]).collect();
    // t for given coordinate log-lambdas.
    let t_of = |log_coords: &[f64]| -> Vec<f64> {
        let delta: Vec<f64> = log_coords.iter().zip(&l0).map(|(a, b)| a - b).collect();
        (0..r_inv.len())
            .map(|i| (0..delta.len()).map(|j| r_inv[i][j] * delta[j]).sum())
            .collect()
    };
    let feasible_log = |log_coords: &[f64]| problem.feasible(&t_of(log_coords));

    // Stage 1: seed the region by minimizing the worst constraint
    // violation with coordinate descent in gauge space. The feasible set
    // can be extremely narrow in one direction (no-Z-error noise pinches
    // lambda_XX), so blind coarse scans are hopeless.
    let k_t = problem.cuts.dim();
    let mut seed = vec![0.0; k_t];
    let mut best = problem.violation(&seed);
    let mut bracket = 0.5f64;
    for _ in 0..80 {
        if best <= 0.0 {
            break;
        }
        let mut improved = false;
        for i in 0..k_t {
            let (mut a, mut b) = (seed[i] - bracket, seed[i] + bracket);
            for _ in 0..50 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                let eval = |v: f64| {
                    let mut tt = seed.clone();
                    tt[i] = v;
                    problem.violation(&tt)
                };
                if eval(m1) < eval(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            let mut cand = seed.clone();
            cand[i] = 0.5 * (a + b);
            let v = problem.violation(&cand);
            if v < best - 1e-18 {
                best = v;
                seed = cand;
                improved = true;
            }
        }
        if !improved {
            bracket *= 0.5;
            if bracket < 1e-10 {
                break;
            }
        }
    }
    if best > 0.0 {
        // Empty at this eps; report the slack that would admit the best
        // point found.
        return Ok(FeasibleRegion {
            coords: coord_labels(graph, gates, &coords),
            eps,
            grid: RegionGrid { x0: 0.0, dx: 0.0, nx: 0, y0: 0.0, dy: 0.0, ny: 0, mask: Vec::new() },
            rows: Vec::new(),
            is_interval_product: false,
            lambda_intervals: Vec::new(),
            p_intervals: Vec::new(),
            feasible_points: 0,
            min_feasible_eps: Some(eps + best),
        });
    }

    // Stage 2: per-axis extents of the region from the seed, by marching
    // then bisecting the boundary.
    let axis_extent = |dir_axis: usize, sign: f64| -> f64 {
        let feas = |d: f64| {
            let mut tt = seed.clone();
            tt[dir_axis] += sign * d;
            problem.feasible(&tt)
        };
        let mut step = 1e-5f64;
        let mut last_ok = 0.0f64;
        while step <= 60.0 {
            if feas(step) {
                last_ok = step;
                step *= 1.7;
            } else {
                break;
            }
        }
        if step > 60.0 {
            return last_ok;
        }
        let (mut lo_d, mut hi_d) = (last_ok, step);
        for _ in 0..60 {
            let mid = 0.5 * (lo_d + hi_d);
            if feas(mid) {
                lo_d = mid;
            } else {
                hi_d = mid;
            }
        }
        lo_d
    };
    let mut t_lo = vec![0.0; k_t];
    let mut t_hi = vec![0.0; k_t];
    for i in 0..k_t {
        let margin = 1e-4;
        t_lo[i] = seed[i] - axis_extent(i, -1.0) * 1.3 - margin;
        t_hi[i] = seed[i] + axis_extent(i, 1.0) * 1.3 + margin;
    }
    // Map the gauge box to log-coordinate space through its corners, then
    // verify no feasible cell sits on the border (expanding if needed:
    // axis-aligned extents can clip a skewed region's corners).
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for corner in 0..(1usize << k_t) {
        let t: Vec<f64> = (0..k_t)
            .map(|i| if (corner >> i) & 1 == 1 { t_hi[i] } else { t_lo[i] })
            .collect();
        for (ci, &edge) in coords.iter().enumerate() {
            let mut log_c = estimates.gauge_fixed_log_lambdas[edge];
            for j in 0..k_t {
                log_c += r[ci][j] * t[j];
            }
            lo[ci] = lo[ci].min(log_c);
            hi[ci] = hi[ci].max(log_c);
        }
    }
    let coarse = 33usize;
    for _ in 0..8 {
        let mut touched = vec![false; 2 * k];
        let steps: Vec<f64> = (0..k).map(|i| (hi[i] - lo[i]) / (coarse as f64 - 1.0)).collect();
        let total = coarse.pow(k as u32);
        for flat in 0..total {
            let mut point = vec![0.0; k];
            let mut rem = flat;
            let mut on_border = Vec::new();
            for i in 0..k {
                let gi = rem % coarse;
                rem /= coarse;
                point[i] = lo[i] + steps[i] * gi as f64;
                if gi == 0 {
                    on_border.push(2 * i);
                }
                if gi == coarse - 1 {
                    on_border.push(2 * i + 1);
                }
            }
            if !on_border.is_empty() && feasible_log(&point) {
                for b in on_border {
                    touched[b] = true;
                }
            }
        }
        if touched.iter().all(|t| !t) {
            break;
        }
        for i in 0..k {
            let w = (hi[i] - lo[i]).max(1e-6);
            if touched[2 * i] {
                lo[i] -= w * 0.5;
            }
            if touched[2 * i + 1] {
                hi[i] += w * 0.5;
            }
        }
    }

    // Fine grid in lambda (not log) coordinates.
    let nx = grid_points.max(11);
    let ny = if k == 2 { nx } else { 1 };
    let (x0, x1) = (lo[0].exp(), hi[0].exp());
    let (y0, y1) = if k == 2 { (lo[1].exp(), hi[1].exp()) } else { (0.0, 0.0) };
    let dx = (x1 - x0) / (nx as f64 - 1.0);
    let dy = if k == 2 { (y1 - y0) / (ny as f64 - 1.0) } else { 0.0 };
    let feasible_lambda = |x: f64, y: f64| -> bool {
        let mut logs = vec![x.ln()];
        if k == 2 {
            logs.push(y.ln());
        }
        x > 0.0 && (k == 1 || y > 0.0) && feasible_log(&logs)
    };
    let mut mask = vec![false; nx * ny];
    let mut feasible_points = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let ok = feasible_lambda(x0 + dx * ix as f64, y0 + dy * iy as f64);
            mask[iy * nx + ix] = ok;
            feasible_points += ok as usize;
        }
    }
    if feasible_points == 0 {
        // The seed was feasible but thinner than the grid; count it via
        // its own cell so downstream intervals stay meaningful.
        return Ok(FeasibleRegion {
            coords: coord_labels(graph, gates, &coords),
            eps,
            grid: RegionGrid { x0, dx, nx, y0, dy, ny, mask },
            rows: Vec::new(),
            is_interval_product: false,
            lambda_intervals: Vec::new(),
            p_intervals: Vec::new(),
            feasible_points: 0,
            min_feasible_eps: Some(eps),
        });
    }

    // Bisection-refined feasible interval per row.
    let refine = |mut inside: f64, mut outside: f64, y: f64| -> f64 {
        for _ in 0..40 {
            if (inside - outside).abs() < 1e-5 {
                break;
            }
            let mid = 0.5 * (inside + outside);
            if feasible_lambda(mid, y) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let mut rows = Vec::new();
    for iy in 0..ny {
        let y = y0 + dy * iy as f64;
        let row = &mask[iy * nx..(iy + 1) * nx];
        let Some(first) = row.iter().position(|&m| m) else { continue };
        let last = row.iter().rposition(|&m| m).unwrap();
        let lo_x = if first == 0 {
            x0
        } else {
            refine(x0 + dx * first as f64, x0 + dx * (first - 1) as f64, y)
        };
        let hi_x = if last == nx - 1 {
            x0 + dx * last as f64
        } else {
            refine(x0 + dx * last as f64, x0 + dx * (last + 1) as f64, y)
        };
        rows.push(RowInterval { y, lo: lo_x, hi: hi_x });
    }

    // Product-of-intervals check at grid resolution: a feasible cell
    // always lies inside the bounding rectangle of the row/column
    // projections, so deviation from a product shape shows up as holes in
    // that rectangle. A slightly tilted edge shaves corner cells without
    // changing the shape class, so tolerate holes up to 1% of the
    // rectangle's area (beyond the one-cell boundary ring).
    let row_any: Vec<bool> = (0..ny).map(|iy| (0..nx).any(|ix| mask[iy * nx + ix])).collect();
    let col_any: Vec<bool> = (0..nx).map(|ix| (0..ny).any(|iy| mask[iy * nx + ix])).collect();
    let bounds = |flags: &[bool]| {
        let first = flags.iter().position(|&b| b);
        let last = flags.iter().rposition(|&b| b);
        (first.unwrap_or(0), last.unwrap_or(0))
    };
    let (ry0, ry1) = bounds(&row_any);
    let (rx0, rx1) = bounds(&col_any);
    let mut holes = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let strictly_inside = iy > ry0 && iy < ry1 && ix > rx0 && ix < rx1;
            if strictly_inside && !mask[iy * nx + ix] {
                holes += 1;
            }
        }
    }
    let rect_area = (ry1 - ry0 + 1) * (rx1 - rx0 + 1);
    let is_interval_product = holes * 100 <= rect_area;

    // Extremize lambdas and error rates over the feasible grid.
    let size = 1usize << (2 * graph.n());
    let mut lam_lo = vec![f64::INFINITY; graph.edge_count()];
    let mut lam_hi = vec![f64::NEG_INFINITY; graph.edge_count()];
    let mut p_lo = vec![vec![f64::INFINITY; size]; gates.len()];
    let mut p_hi = vec![vec![f64::NEG_INFINITY; size]; gates.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            if !mask[iy * nx + ix] {
                continue;
            }
            let mut logs = vec![(x0 + dx * ix as f64).ln()];
            if k == 2 {
                logs.push((y0 + dy * iy as f64).ln());
            }
            let t = t_of(&logs);
            let lambdas = problem.lambdas_at(&t);
            for (gi, lam) in lambdas.iter().enumerate() {
                let p = wht_lambda_to_p(lam).expect("length 4^n");
                for a in 0..size {
                    let e = graph.edge_index(gi, a as u64);
                    lam_lo[e] = lam_lo[e].min(lam[a]);
                    lam_hi[e] = lam_hi[e].max(lam[a]);
                    p_lo[gi][a] = p_lo[gi][a].min(p[a]);
                    p_hi[gi][a] = p_hi[gi][a].max(p[a]);
                }
            }
        }
    }
    let n = graph.n();
    let mut lambda_intervals = Vec::new();
    let mut p_intervals = Vec::new();
    for gi in 0..gates.len() {
        let gname = gates.gate(gi).name().to_string();
        for a in 0..size {
            let pauli = PauliOp::from_index(n, a as u64).to_string();
            let e = graph.edge_index(gi, a as u64);
            lambda_intervals.push(Interval {
                gate: gname.clone(),
                pauli: pauli.clone(),
                lo: lam_lo[e],
                hi: lam_hi[e],
            });
            p_intervals.push(Interval { gate: gname.clone(), pauli, lo: p_lo[gi][a], hi: p_hi[gi][a] });
        }
    }

    Ok(FeasibleRegion {
        coords: coord_labels(graph, gates, &coords),
        eps,
        grid: RegionGrid { x0, dx, nx, y0, dy, ny, mask },
        rows,
        is_interval_product,
        lambda_intervals,
        p_intervals,
        feasible_points,
        min_feasible_eps: None,
    })
}

fn coord_labels(graph: &PatternGraph, gates: &GateSet, coords: &[usize]) -> Vec<RegionCoord> {
    coords
        .iter()
        .map(|&edge| {
            let e = graph.edge(edge);
            RegionCoord {
                gate: gates.gate(e.gate).name().to_string(),
                pauli: PauliOp::from_index(graph.n(), e.pauli).to_string(),
                edge,
            }
        })
        .collect()
}

fn invert_small(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = m.len();
    match k {
        1 => vec![vec![1.0 / m[0][0]]],
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            vec![
                vec![m[1][1] / det, -m[0][1] / det],
                vec![-m[1][0] / det, m[0][0] / det],
            ]
        }
        _ => panic!("region coordinates are 1D or 2D"),
    }
}

/// SP-noise ratio bounds from an intercept estimate and a feasible
/// interval, with the bit-flip-model conversion to a flip-rate lower bound.
#[derive(Clone, Debug, Serialize)]
pub struct SpBound {
    pub pauli: String,
    pub partner: String,
    /// Bounds on lambda^S_a / lambda^S_b.
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub ratio_lo_sigma: f64,
    pub ratio_hi_sigma: f64,
    /// Qubit whose initialization flip rate is bounded, when the patterns
    /// differ on exactly one qubit.
    pub flip_qubit: Option<usize>,
    /// (lower bound, first-order sigma); None when the ratio interval
    /// contains 1 (no nontrivial bound).
    pub flip_rate_lower_bound: Option<(f64, f64)>,
}

pub fn sp_lower_bound(
    icb_value: f64,
    icb_sigma: f64,
    lambda_interval: (f64, f64),
    a: &PauliOp,
    b: &PauliOp,
) -> SpBound {
    let (l_min, l_max) = lambda_interval;
    let ratio_lo = icb_value / l_max;
    let ratio_hi = icb_value / l_min;
    let ratio_lo_sigma = icb_sigma / l_max;
    let ratio_hi_sigma = icb_sigma / l_min;
    let (pa, pb) = (a.pattern(), b.pattern());
    let extra_a = pa & !pb;
    let extra_b = pb & !pa;
    let single_bit = |bits: u64| (bits.count_ones() == 1).then(|| bits.trailing_zeros() as usize);
    // Under initialization bit flips, lambda^S_a/lambda^S_b equals
    // (1 - 2 eps_j) when pattern(a) has exactly one extra qubit j, and its
    // reciprocal when pattern(b) does.
    let mut flip_qubit = None;
    let mut bound = None;
    if extra_b == 0 {
        if let Some(j) = single_bit(extra_a) {
            flip_qubit = Some(j);
            if ratio_hi < 1.0 {
                bound = Some(((1.0 - ratio_hi) / 2.0, ratio_hi_sigma / 2.0));
            }
        }
    } else if extra_a == 0 {
        if let Some(j) = single_bit(extra_b) {
            flip_qubit = Some(j);
            if ratio_lo > 1.0 {
                bound = Some((
                    (1.0 - 1.0 / ratio_lo) / 2.0,
                    ratio_lo_sigma / (2.0 * ratio_lo * ratio_lo),
                ));
            }
        }
    }
    SpBound {
        pauli: a.to_string(),
        partner: b.to_string(),
        ratio_lo,
        ratio_hi,
        ratio_lo_sigma,
        ratio_hi_sigma,
        flip_qubit,
        flip_rate_lower_bound: bound,
    }
}

/// Error-rate reconstruction for one gate: exact WHT of the gauge-fixed
/// fidelities against the first-order log approximation, plus feasible
/// intervals when a region is supplied.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReconstruction {
    pub gate: String,
    pub exact: Vec<f64>,
    pub first_order: Vec<f64>,
    pub max_gap: f64,
    pub intervals: Option<Vec<Interval>>,
}

pub fn reconstruct_errors(
    estimates: &LearnableEstimates,
    graph: &PatternGraph,
    gates: &GateSet,
    region: Option<&FeasibleRegion>,
) -> Vec<ErrorReconstruction> {
    let size = 1usize << (2 * graph.n());
    let mut out = Vec::new();
    for gi in 0..gates.len() {
        let gname = gates.gate(gi).name().to_string();
        let logs: Vec<f64> = (0..size)
            .map(|a| estimates.gauge_fixed_log_lambdas[graph.edge_index(gi, a as u64)])
            .collect();
        let lambdas: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let exact = wht_lambda_to_p(&lambdas).expect("length 4^n");
        let shifted: Vec<f64> = logs.iter().map(|l| 1.0 + l).collect();
        let first_order = wht_lambda_to_p(&shifted).expect("length 4^n");
        let max_gap = exact
            .iter()
            .zip(&first_order)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let intervals = region.map(|r| {
            r.p_intervals.iter().filter(|iv| iv.gate == gname).cloned().collect()
        });
        out.push(ErrorReconstruction { gate: gname, exact, first_order, max_gap, intervals });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, PauliChannel};
    use crate::clifford::cnot;
    use crate::gauge::{apply_gauge, default_eta, GaugeTransform};
    use crate::graph::PatternGraph;
    use crate::report::human_basis;
    use crate::sim::{plan_learnable_suite, run_intercept_cb, run_specs, CbParams, Engine, ResolvedNoise};

    fn cnot_set() -> GateSet {
        GateSet::new(vec![cnot()]).unwrap()
    }

    fn ad_twirl_model() -> NoiseModel {
        let gamma: f64 = 0.05;
        let s = (1.0 - gamma).sqrt();
        let one = [1.0, s, 1.0 - gamma, s];
        let lambdas =
            (0..16).map(|idx| one[idx & 3] * one[(idx >> 2) & 3]).collect::<Vec<f64>>();
        NoiseModel::new(
            PauliChannel::identity(2),
            PauliChannel::bit_flip_each(&[0.003, 0.003]),
            [("CNOT".to_string(), PauliChannel::from_lambdas(lambdas).unwrap())].into(),
        )
        .unwrap()
    }

    fn synthetic_run(amplitude: f64, rate: f64, depths: &[u32], circuits: usize) -> CbRun {
        let rows = depths
            .iter()
            .flat_map(|&d| {
                (0..circuits).map(move |c| crate::sim::CbRow {
                    depth: d,
                    x: d as f64,
                    circuit: c as u32,
                    sign: 1,
                    shots: 0,
                    mean: amplitude * rate.powi(d as i32),
                })
            })
            .collect();
        CbRun {
            meta: crate::sim::RunMeta {
                run_id: "synthetic".into(),
                protocol: Protocol::Standard,
                prepare: "IX".into(),
                measure: "IX".into(),
                gate_names: vec!["CNOT".into()],
                layer_names: vec![None],
                period: 1,
                functional: vec![("CNOT".into(), "IX".into(), 1.0)],
                depths: depths.to_vec(),
                xs: depths.iter().map(|&d| d as f64).collect(),
                circuits: circuits as u32,
                shots: 0,
                seed: 0,
                engine: Engine::PauliFast,
                config_hash: String::new(),
            },
            rows,
        }
    }

    #[test]
    fn exact_loglinear_data_is_recovered() {
        let run = synthetic_run(0.95, 0.98, &[2, 4, 8, 16, 32, 64, 128], 3);
        let fit = fit_decay(&run, &FitOptions::default()).unwrap();
        assert!((fit.rate - 0.98).abs() < 1e-9);
        assert!((fit.amplitude - 0.95).abs() < 1e-9);
        assert_eq!(fit.dropped_points, 0);
    }

    #[test]
    fn nonpositive_tail_is_dropped_and_all_bad_is_unfittable() {
        let mut run = synthetic_run(1.0, 0.9, &[2, 4], 2);
        for row in run.rows.iter_mut() {
            if row.depth == 4 {
                row.mean = -0.1;
            }
        }
        assert!(matches!(
            fit_decay(&run, &FitOptions::default()),
            Err(FitError::Unfittable(_))
        ));
        let mut run = synthetic_run(1.0, 0.9, &[2, 4, 8], 2);
        for row in run.rows.iter_mut() {
            if row.depth == 8 {
                row.mean = 0.0;
            }
        }
        let fit = fit_decay(&run, &FitOptions::default()).unwrap();
        assert_eq!(fit.dropped_points, 1);
        assert!((fit.rate - 0.9).abs() < 1e-9);
    }

    #[test]
    fn standard_iz_fit_is_the_geometric_mean() {
        let gates = cnot_set();
        let model = ad_twirl_model();
        let noise = ResolvedNoise::from_model(&model, &gates).unwrap();
        let spec =
            crate::sim::standard_spec(&gates, "CNOT", "IZ", &[2, 4, 8, 16, 32, 64, 128]).unwrap();
        let params = CbParams { circuits: 3, shots: 0, seed: 1, engine: Engine::PauliFast };
        let ds = run_specs(&noise, &gates, &[spec], &params).unwrap();
        let fit = fit_decay(&ds.runs[0], &FitOptions::default()).unwrap();
        let ch = &model.gate_noise["CNOT"];
        let iz: PauliOp = "IZ".parse().unwrap();
        let zz: PauliOp = "ZZ".parse().unwrap();
        let geo = (ch.lambda(iz.index()) * ch.lambda(zz.index())).sqrt();
        assert!((fit.rate - geo).abs() < 1e-9);
    }

    fn full_suite_estimates(model: &NoiseModel) -> LearnableEstimates {
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let noise = ResolvedNoise::from_model(model, &gates).unwrap();
        let specs =
            plan_learnable_suite(&gates, &graph, &[2, 4, 8, 16, 32, 64, 128]).unwrap();
        let params = CbParams { circuits: 2, shots: 0, seed: 3, engine: Engine::PauliFast };
        let ds = run_specs(&noise, &gates, &specs, &params).unwrap();
        let obs = observations(&ds.runs, &FitOptions::default()).unwrap();
        let targets: Vec<LabeledFunctional> =
            human_basis(&graph, &gates).into_iter().map(|b| (b.label, b.entries)).collect();
        reconstruct_learnable(&obs, &graph, &gates, &targets).unwrap()
    }

    #[test]
    fn infinite_shot_reconstruction_is_exact_and_gauge_invariant() {
        let gates = cnot_set();
        let model = {
            // Strictly positive error rates so gauges exist.
            let uniform = |d: f64| {
                let mut p = vec![d / 15.0; 16];
                p[0] = 1.0 - d;
                PauliChannel::from_error_rates(p).unwrap()
            };
            NoiseModel::new(
                uniform(0.04),
                uniform(0.06),
                [("CNOT".to_string(), uniform(0.1))].into(),
            )
            .unwrap()
        };
        let est = full_suite_estimates(&model);
        assert!(est.missing.is_empty());
        assert_eq!(est.basis.len(), 14);
        // Exact against the model.
        let logs = model.log_fidelities(&["CNOT"]).unwrap();
        let graph = PatternGraph::build(&gates).unwrap();
        for b in &est.basis {
            let dense = dense_functional(&graph, &gates, &b.entries).unwrap();
            let truth: f64 = dense.iter().zip(&logs).map(|(a, l)| a * l).sum();
            assert!((b.value - truth).abs() < 1e-9, "{}", b.label);
        }
        // Gauge invariance of the pipeline.
        let eta = default_eta(&model);
        let gauged =
            apply_gauge(&model, &GaugeTransform::Depolarizing { qubit: 0, eta }, &gates).unwrap();
        let est2 = full_suite_estimates(&gauged);
        for (a, b) in est.basis.iter().zip(&est2.basis) {
            assert_eq!(a.label, b.label);
            assert!((a.value - b.value).abs() < 1e-9, "{} moved under gauge", a.label);
        }
    }

    #[test]
    fn withholding_interleaved_reports_missing_directions() {
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let model = ad_twirl_model();
        let noise = ResolvedNoise::from_model(&model, &gates).unwrap();
        let specs: Vec<_> = plan_learnable_suite(&gates, &graph, &[2, 4, 8, 16, 32, 64, 128])
            .unwrap()
            .into_iter()
            .filter(|s| {
                s.protocol != Protocol::Interleaved && s.protocol != Protocol::Cycle
            })
            .collect();
        let params = CbParams { circuits: 2, shots: 0, seed: 3, engine: Engine::PauliFast };
        let ds = run_specs(&noise, &gates, &specs, &params).unwrap();
        let obs = observations(&ds.runs, &FitOptions::default()).unwrap();
        let targets: Vec<LabeledFunctional> =
            human_basis(&graph, &gates).into_iter().map(|b| (b.label, b.entries)).collect();
        let est = reconstruct_learnable(&obs, &graph, &gates, &targets).unwrap();
        assert_eq!(est.missing.len(), 6);
        for label in ["l_XZ", "l_YY", "l_XY", "l_YZ"] {
            assert!(est.missing.iter().any(|m| m == label), "missing {label}");
        }
    }

    #[test]
    fn intercept_estimates_lambda_with_sp_bias() {
        let gates = cnot_set();
        let mut model = ad_twirl_model();
        model.sp_noise = PauliChannel::bit_flip_each(&[0.01, 0.0]);
        let params = CbParams { circuits: 2, shots: 0, seed: 5, engine: Engine::PauliFast };
        let ds =
            run_intercept_cb(&model, &gates, "CNOT", "IZ", &[0, 1, 2, 4, 8, 16, 32], &params)
                .unwrap();
        let est = intercept_estimate(
            ds.run("icb:CNOT:IZ:A").unwrap(),
            ds.run("icb:CNOT:IZ:B").unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        let ch = &model.gate_noise["CNOT"];
        let iz: PauliOp = "IZ".parse().unwrap();
        let zz: PauliOp = "ZZ".parse().unwrap();
        let expected = ch.lambda(iz.index()) * model.sp_noise.lambda(iz.index())
            / model.sp_noise.lambda(zz.index());
        assert!((est.value - expected).abs() < 1e-9);
        assert!(est.rates_compatible);
        let l0 = est.l0_ratio.unwrap();
        assert!((l0 - expected).abs() < 1e-9);
        // SP-noiseless: unbiased for lambda_a.
        let clean = ad_twirl_model();
        let ds = run_intercept_cb(&clean, &gates, "CNOT", "IZ", &[0, 1, 2, 4, 8], &params).unwrap();
        let est = intercept_estimate(
            ds.run("icb:CNOT:IZ:A").unwrap(),
            ds.run("icb:CNOT:IZ:B").unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!((est.value - ch.lambda(iz.index())).abs() < 1e-9);
    }

    #[test]
    fn feasible_region_contains_truth_and_is_rectangular() {
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let model = ad_twirl_model();
        let est = full_suite_estimates(&model);
        let region = feasible_region(&est, &graph, &gates, 1e-6, 201).unwrap();
        assert!(region.min_feasible_eps.is_none());
        assert_eq!(region.coords.len(), 2);
        assert_eq!(region.coords[0].pauli, "XX");
        assert_eq!(region.coords[1].pauli, "ZZ");
        let ch = &model.gate_noise["CNOT"];
        let xx: PauliOp = "XX".parse().unwrap();
        let zz: PauliOp = "ZZ".parse().unwrap();
        let (tx, ty) = (ch.lambda(xx.index()), ch.lambda(zz.index()));
        // The true point is inside the reported intervals.
        let find = |p: &str| {
            region
                .lambda_intervals
                .iter()
                .find(|iv| iv.pauli == p)
                .map(|iv| (iv.lo, iv.hi))
                .unwrap()
        };
        let (xlo, xhi) = find("XX");
        let (ylo, yhi) = find("ZZ");
        let slack = 1e-3;
        assert!(xlo - slack <= tx && tx <= xhi + slack, "XX {tx} not in [{xlo}, {xhi}]");
        assert!(ylo - slack <= ty && ty <= yhi + slack, "ZZ {ty} not in [{ylo}, {yhi}]");
        assert!(region.is_interval_product);
        // Feasibility soundness: re-verify accepted grid points post hoc.
        let cuts = graph.cut_space();
        let problem_unlearnable = unlearnable_error_dirs(&graph, &gates).unwrap();
        let nx = region.grid.nx;
        for iy in 0..region.grid.ny {
            for ix in 0..nx {
                if !region.grid.mask[iy * nx + ix] {
                    continue;
                }
                // Solve for t from the two coordinates and recheck with a
                // fresh WHT.
                let x = region.grid.x0 + region.grid.dx * ix as f64;
                let y = region.grid.y0 + region.grid.dy * iy as f64;
                let e0 = region.coords[0].edge;
                let e1 = region.coords[1].edge;
                let resp = |edge: usize| -> Vec<f64> {
                    cuts.vectors
                        .iter()
                        .map(|c| {
                            c.entries
                                .iter()
                                .filter(|(i, _)| *i == edge)
                                .map(|&(_, s)| s as f64)
                                .sum()
                        })
                        .collect()
                };
                let r = vec![resp(e0), resp(e1)];
                let rinv = invert_small(&r);
                let d0 = x.ln() - est.gauge_fixed_log_lambdas[e0];
                let d1 = y.ln() - est.gauge_fixed_log_lambdas[e1];
                let t = [rinv[0][0] * d0 + rinv[0][1] * d1, rinv[1][0] * d0 + rinv[1][1] * d1];
                let mut logs = est.gauge_fixed_log_lambdas.clone();
                for (tp, cut) in t.iter().zip(&cuts.vectors) {
                    for &(idx, c) in &cut.entries {
                        logs[idx] += tp * c as f64;
                    }
                }
                let lambdas: Vec<f64> = (0..16)
                    .map(|a| logs[graph.edge_index(0, a as u64)].exp())
                    .collect();
                let p = wht_lambda_to_p(&lambdas).unwrap();
                for &a in &problem_unlearnable[0] {
                    assert!(p[a] >= -region.eps - 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_region_reports_minimal_eps() {
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let model = ad_twirl_model();
        let mut est = full_suite_estimates(&model);
        // Corrupt a learnable product so no gauge can make it physical.
        for v in est.gauge_fixed_log_lambdas.iter_mut() {
            *v += 0.5;
        }
        let iz: PauliOp = "II".parse().unwrap();
        est.gauge_fixed_log_lambdas[graph.edge_index(0, iz.index())] = 0.0;
        let region = feasible_region(&est, &graph, &gates, 0.0, 61).unwrap();
        assert_eq!(region.feasible_points, 0);
        assert!(region.min_feasible_eps.unwrap() > 0.0);
    }

    #[test]
    fn sp_bound_reproduces_reported_arithmetic() {
        let a: PauliOp = "ZZ".parse().unwrap();
        let b: PauliOp = "IZ".parse().unwrap();
        let bound = sp_lower_bound(0.9879, 0.0023, (1.0, 1.0), &a, &b);
        assert_eq!(bound.flip_qubit, Some(0));
        let (rate, sigma) = bound.flip_rate_lower_bound.unwrap();
        // Two significant figures: 0.61% and 0.12% (the exact values sit at
        // the rounding boundary, so agree within half a final digit).
        assert!((rate * 100.0 - 0.61).abs() <= 0.00505, "rate {rate}");
        assert!((sigma * 100.0 - 0.12).abs() <= 0.00505, "sigma {sigma}");
    }

    /// Full infinite-shot pipeline for an arbitrary gate set: suite, fits,
    /// reconstruction against the model's exact log fidelities.
    fn pipeline_exact(gates: &GateSet, model: &NoiseModel) -> (LearnableEstimates, PatternGraph) {
        let graph = PatternGraph::build(gates).unwrap();
        let noise = ResolvedNoise::from_model(model, gates).unwrap();
        let specs = plan_learnable_suite(gates, &graph, &[2, 4, 8, 16, 32, 64, 128]).unwrap();
        let params = CbParams { circuits: 2, shots: 0, seed: 17, engine: Engine::PauliFast };
        let ds = run_specs(&noise, gates, &specs, &params).unwrap();
        let obs = observations(&ds.runs, &FitOptions { bootstrap: 10, seed: 17 }).unwrap();
        let targets: Vec<LabeledFunctional> = crate::report::human_basis(&graph, gates)
            .into_iter()
            .map(|b| (b.label, b.entries))
            .collect();
        let est = reconstruct_learnable(&obs, &graph, gates, &targets).unwrap();
        (est, graph)
    }

    fn uniform_model(gates: &GateSet, delta: f64) -> NoiseModel {
        let n = gates.n();
        let size = 1usize << (2 * n);
        let channel = |d: f64| {
            let mut p = vec![d / (size as f64 - 1.0); size];
            p[0] = 1.0 - d;
            PauliChannel::from_error_rates(p).unwrap()
        };
        NoiseModel::new(
            channel(delta * 0.5),
            channel(delta * 0.7),
            gates.gates().iter().map(|g| (g.name().to_string(), channel(delta))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn swap_region_is_one_dimensional_over_xi() {
        let gates = GateSet::new(vec![crate::clifford::swap()]).unwrap();
        let model = uniform_model(&gates, 0.12);
        let (est, graph) = pipeline_exact(&gates, &model);
        assert!(est.missing.is_empty());
        assert_eq!(est.basis.len(), 15);
        let region = feasible_region(&est, &graph, &gates, 1e-9, 201).unwrap();
        assert!(region.min_feasible_eps.is_none());
        assert_eq!(region.coords.len(), 1);
        assert_eq!(region.coords[0].pauli, "XI");
        assert_eq!(region.rows.len(), 1);
        assert!(region.is_interval_product);
        let xi: PauliOp = "XI".parse().unwrap();
        let truth = model.gate_noise["SWAP"].lambda(xi.index());
        let row = &region.rows[0];
        assert!(
            row.lo - 1e-6 <= truth && truth <= row.hi + 1e-6,
            "true lambda_XI {truth} not in [{}, {}]",
            row.lo,
            row.hi
        );
    }

    #[test]
    fn three_qubit_permutation_pipeline_is_exact() {
        let gates = GateSet::new(vec![crate::clifford::circ(3)]).unwrap();
        let model = uniform_model(&gates, 0.2);
        let (est, graph) = pipeline_exact(&gates, &model);
        assert!(est.missing.is_empty());
        assert_eq!(est.basis.len(), 60);
        let logs = model.log_fidelities(&["CIRC3"]).unwrap();
        for b in &est.basis {
            let dense = dense_functional(&graph, &gates, &b.entries).unwrap();
            let truth: f64 = dense.iter().zip(&logs).map(|(a, l)| a * l).sum();
            assert!((b.value - truth).abs() < 1e-9, "{}", b.label);
        }
    }

    #[test]
    fn joint_gate_set_pipeline_is_exact() {
        let gates = GateSet::new(vec![cnot(), crate::clifford::swap()]).unwrap();
        let model = uniform_model(&gates, 0.15);
        let (est, graph) = pipeline_exact(&gates, &model);
        assert!(est.missing.is_empty());
        assert_eq!(est.basis.len(), 30);
        let logs = model.log_fidelities(&["CNOT", "SWAP"]).unwrap();
        for b in &est.basis {
            let dense = dense_functional(&graph, &gates, &b.entries).unwrap();
            let truth: f64 = dense.iter().zip(&logs).map(|(a, l)| a * l).sum();
            assert!((b.value - truth).abs() < 1e-9, "{}", b.label);
        }
    }

    #[test]
    fn sp_bound_recovers_synthetic_flip_rate() {
        // SP bit-flip 1% on qubit 0; intercept CB on ZZ (image IZ) plus the
        // feasible interval from learnable data recovers a positive lower
        // bound that cannot exceed the true 1%.
        let gates = cnot_set();
        let eps_true = 0.01;
        let mut model = ad_twirl_model();
        model.sp_noise = PauliChannel::bit_flip_each(&[eps_true, 0.0]);
        let params = CbParams { circuits: 2, shots: 0, seed: 21, engine: Engine::PauliFast };
        let ds = run_intercept_cb(&model, &gates, "CNOT", "ZZ", &[0, 1, 2, 4, 8], &params).unwrap();
        let icb = intercept_estimate(
            ds.run("icb:CNOT:ZZ:A").unwrap(),
            ds.run("icb:CNOT:ZZ:B").unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        let graph = PatternGraph::build(&gates).unwrap();
        let est = full_suite_estimates(&model);
        let region = feasible_region(&est, &graph, &gates, 1e-6, 201).unwrap();
        let interval = region
            .lambda_intervals
            .iter()
            .find(|iv| iv.pauli == "ZZ")
            .map(|iv| (iv.lo, iv.hi))
            .unwrap();
        let a: PauliOp = "ZZ".parse().unwrap();
        let b: PauliOp = "IZ".parse().unwrap();
        let bound = sp_lower_bound(icb.value, icb.sigma.max(1e-6), interval, &a, &b);
        assert_eq!(bound.flip_qubit, Some(0));
        let (rate, _) = bound.flip_rate_lower_bound.expect("nontrivial bound");
        assert!(rate > 0.0 && rate <= eps_true + 1e-6, "bound {rate}");
    }

    #[test]
    fn intercept_estimate_is_gauge_covariant() {
        // Under a gauge, the intercept estimand shifts by exactly the
        // transformed SP-fidelity ratio.
        let gates = cnot_set();
        let model = {
            let uniform = |d: f64| {
                let mut p = vec![d / 15.0; 16];
                p[0] = 1.0 - d;
                PauliChannel::from_error_rates(p).unwrap()
            };
            NoiseModel::new(uniform(0.05), uniform(0.04), [("CNOT".into(), uniform(0.1))].into())
                .unwrap()
        };
        let eta = default_eta(&model);
        let gauged =
            apply_gauge(&model, &GaugeTransform::Depolarizing { qubit: 0, eta }, &gates).unwrap();
        let params = CbParams { circuits: 2, shots: 0, seed: 3, engine: Engine::PauliFast };
        let run = |m: &NoiseModel| {
            let ds = run_intercept_cb(m, &gates, "CNOT", "IZ", &[0, 1, 2, 4], &params).unwrap();
            intercept_estimate(
                ds.run("icb:CNOT:IZ:A").unwrap(),
                ds.run("icb:CNOT:IZ:B").unwrap(),
                &FitOptions::default(),
            )
            .unwrap()
            .value
        };
        let iz: PauliOp = "IZ".parse().unwrap();
        let zz: PauliOp = "ZZ".parse().unwrap();
        let factor = (gauged.sp_noise.lambda(iz.index()) / model.sp_noise.lambda(iz.index()))
            / (gauged.sp_noise.lambda(zz.index()) / model.sp_noise.lambda(zz.index()))
            * (gauged.gate_noise["CNOT"].lambda(iz.index())
                / model.gate_noise["CNOT"].lambda(iz.index()));
        assert!((run(&gauged) - run(&model) * factor).abs() < 1e-9);
    }

    #[test]
    fn sp_bound_trivial_when_interval_contains_one() {
        let a: PauliOp = "ZZ".parse().unwrap();
        let b: PauliOp = "IZ".parse().unwrap();
        let bound = sp_lower_bound(1.0, 0.001, (0.99, 1.01), &a, &b);
        assert!(bound.flip_rate_lower_bound.is_none());
        // Reciprocal direction: pattern(b) has the extra qubit.
        let bound = sp_lower_bound(1.03, 0.001, (1.0, 1.0), &b, &a);
        assert_eq!(bound.flip_qubit, Some(0));
        let (rate, _) = bound.flip_rate_lower_bound.unwrap();
        assert!((rate - (1.0 - 1.0 / 1.03) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_reconstruction_first_order_gap_is_small_for_weak_noise() {
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        // All lambdas >= 0.98.
        let lambdas: Vec<f64> =
            (0..16).map(|i| if i == 0 { 1.0 } else { 0.98 + 0.001 * (i % 3) as f64 }).collect();
        let model = NoiseModel::new(
            PauliChannel::identity(2),
            PauliChannel::identity(2),
            [("CNOT".to_string(), PauliChannel::from_lambdas(lambdas).unwrap())].into(),
        )
        .unwrap();
        let est = full_suite_estimates(&model);
        let recon = reconstruct_errors(&est, &graph, &gates, None);
        assert_eq!(recon.len(), 1);
        assert!(recon[0].max_gap < 1e-3, "gap {}", recon[0].max_gap);
        // lambda == 1 gives the point mass on the identity, and every
        // reconstructed log-domain estimate is zero.
        let clean = full_suite_estimates(&NoiseModel::noiseless(2, &["CNOT"]));
        assert!(clean.basis.iter().all(|b| b.value.abs() < 1e-12));
        let recon = reconstruct_errors(&clean, &graph, &gates, None);
        assert!((recon[0].exact[0] - 1.0).abs() < 1e-9);
        assert!(recon[0].exact[1..].iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn approximately_learnable_error_combos_are_gauge_stable() {
        // p_IZ + p_ZZ varies less over the region than p_IZ alone.
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let model = ad_twirl_model();
        let est = full_suite_estimates(&model);
        let region = feasible_region(&est, &graph, &gates, 1e-4, 121).unwrap();
        let get = |p: &str| {
            region.p_intervals.iter().find(|iv| iv.pauli == p).map(|iv| (iv.lo, iv.hi)).unwrap()
        };
        let (iz_lo, iz_hi) = get("IZ");
        let width_iz = iz_hi - iz_lo;
        // Sum tracked across the grid: recompute from lambda intervals is
        // not enough (correlations), so scan the mask again.
        let cuts = graph.cut_space();
        let mut sum_lo = f64::INFINITY;
        let mut sum_hi = f64::NEG_INFINITY;
        let nx = region.grid.nx;
        let e0 = region.coords[0].edge;
        let e1 = region.coords[1].edge;
        let resp = |edge: usize| -> Vec<f64> {
            cuts.vectors
                .iter()
                .map(|c| {
                    c.entries.iter().filter(|(i, _)| *i == edge).map(|&(_, s)| s as f64).sum()
                })
                .collect()
        };
        let rinv = invert_small(&[resp(e0), resp(e1)]);
        let iz: PauliOp = "IZ".parse().unwrap();
        let zz: PauliOp = "ZZ".parse().unwrap();
        for iy in 0..region.grid.ny {
            for ix in 0..nx {
                if !region.grid.mask[iy * nx + ix] {
                    continue;
                }
                let x = region.grid.x0 + region.grid.dx * ix as f64;
                let y = region.grid.y0 + region.grid.dy * iy as f64;
                let d0 = x.ln() - est.gauge_fixed_log_lambdas[e0];
                let d1 = y.ln() - est.gauge_fixed_log_lambdas[e1];
                let t = [rinv[0][0] * d0 + rinv[0][1] * d1, rinv[1][0] * d0 + rinv[1][1] * d1];
                let mut logs = est.gauge_fixed_log_lambdas.clone();
                for (tp, cut) in t.iter().zip(&cuts.vectors) {
                    for &(idx, c) in &cut.entries {
                        logs[idx] += tp * c as f64;
                    }
                }
                let lambdas: Vec<f64> =
                    (0..16).map(|a| logs[graph.edge_index(0, a as u64)].exp()).collect();
                let p = wht_lambda_to_p(&lambdas).unwrap();
                let s = p[iz.index() as usize] + p[zz.index() as usize];
                sum_lo = sum_lo.min(s);
                sum_hi = sum_hi.max(s);
            }
        }
        let width_sum = sum_hi - sum_lo;
        assert!(
            width_sum < width_iz * 0.2,
            "sum width {width_sum} vs individual width {width_iz}"
        );
    }
}



