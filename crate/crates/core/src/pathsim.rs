//! Simulation of stable CARMA paths on a fine grid and equidistant sampling.

use serde::{Deserialize, Serialize};

use crate::carma_model::CarmaSpec;
use crate::error::{Error, Result};
use crate::linalg::matrix_exp;
use crate::stable_levy::{RngStream, StableParams};

/// Fine-grid and sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Euler step `h`.
    pub step: f64,
    /// Sampling distance between retained observations.
    pub delta: f64,
    /// Number of retained observations.
    pub n: usize,
    /// Time simulated and discarded before the first retained observation.
    pub burn_in: f64,
}

impl SimConfig {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0.01,
            delta: 1.0,
            n,
            burn_in: 0.0,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Fine steps per observation.
    pub fn steps_per_obs(&self) -> Result<usize> {
        integer_ratio(self.delta, self.step, "delta / step")
    }

    /// Fine steps of burn-in.
    pub fn burn_in_steps(&self) -> Result<usize> {
        if self.burn_in == 0.0 {
            return Ok(0);
        }
        integer_ratio(self.burn_in, self.step, "burn_in / step")
    }

    pub fn check(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "burn_in must be >= 0, got {}",
                self.burn_in
            )));
        }
        self.steps_per_obs()?;
        self.burn_in_steps()?;
        Ok(())
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let k = r.round();
    if !(k >= 1.0 && (r - k).abs() <= 1e-9 * k.max(1.0)) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be a positive integer, got {r}"
        )));
    }
    Ok(k as usize)
}

/// Where a series came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub stream_id: Option<u64>,
    pub step: Option<f64>,
    pub burn_in: Option<f64>,
    pub family: Option<String>,
    pub theta: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub scheme: Option<String>,
}

/// Equidistant observations `Y_delta, ..., Y_{n delta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSeries {
    pub values: Vec<f64>,
    pub delta: f64,
    pub provenance: Provenance,
}

impl SampledSeries {
    /// Series without provenance; entries must be finite.
    pub fn from_values(values: Vec<f64>, delta: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("series must not be empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("observation {} is not finite", i + 1)));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(Self {
            values,
            delta,
            provenance: Provenance::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Records the parametric model in the provenance.
    pub fn with_model(mut self, family: &str, theta: &[f64]) -> Self {
        self.provenance.family = Some(family.to_string());
        self.provenance.theta = Some(theta.to_vec());
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Which discretization of the state equation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Exact,
}

fn check_inputs(spec: &CarmaSpec, noise: &StableParams, cfg: &SimConfig) -> Result<()> {
    cfg.check()?;
    if !noise.is_symmetric() {
        return Err(Error::InvalidParameter("driving noise must be symmetric".into()));
    }
    if (cfg.delta - spec.delta()).abs() > 1e-12 * spec.delta() {
        return Err(Error::InvalidConfig(format!(
            "simulation delta {} differs from model delta {}",
            cfg.delta,
            spec.delta()
        )));
    }
    spec.validate().into_result()?;
    Ok(())
}

fn provenance(noise: &StableParams, cfg: &SimConfig, rng: &RngStream, scheme: Scheme) -> Provenance {
    Provenance {
        seed: Some(rng.seed()),
        stream_id: Some(rng.stream_id()),
        step: Some(cfg.step),
        burn_in: Some(cfg.burn_in),
        family: None,
        theta: None,
        alpha: Some(noise.alpha),
        sigma: Some(noise.sigma),
        scheme: Some(match scheme {
            Scheme::Euler => "euler".into(),
            Scheme::Exact => "exact".into(),
        }),
    }
}

fn observe(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Euler–Maruyama on the state equation `dX = A X dt + e_p dL` from `X_0 = 0`.
pub fn euler_maruyama(
    spec: &CarmaSpec,
    noise: &StableParams,
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<SampledSeries> {
    check_inputs(spec, noise, cfg)?;
    let p = spec.p();
    let a = spec.ar();
    let c = spec.ma();
    let h = cfg.step;
    let per_obs = cfg.steps_per_obs()?;
    let burn = cfg.burn_in_steps()?;
    let sampler = noise.over_time(h)?.sampler();

    let mut x = vec![0.0; p];
    let mut ax = vec![0.0; p];
    let mut step = |x: &mut [f64], rng: &mut RngStream| {
        ax[..p - 1].copy_from_slice(&x[1..]);
        ax[p - 1] = -(0..p).map(|j| a[p - 1 - j] * x[j]).sum::<f64>();
        for i in 0..p {
            x[i] += h * ax[i];
        }
        x[p - 1] += sampler.draw(rng);
    };

    for k in 0..burn {
        step(&mut x, rng);
        if (k + 1) % per_obs == 0 && !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("state diverged during burn-in".into()));
        }
    }
    let mut values = Vec::with_capacity(cfg.n);
    for k in 0..cfg.n {
        for _ in 0..per_obs {
            step(&mut x, rng);
        }
        let y = observe(c, &x);
        if !y.is_finite() {
            return Err(Error::NonFinite(format!(
                "state diverged at observation {} (step {h} may be too coarse)",
                k + 1
            )));
        }
        values.push(y);
    }
    Ok(SampledSeries {
        values,
        delta: cfg.delta,
        provenance: provenance(noise, cfg, rng, Scheme::Euler),
    })
}

/// Exact state transition over each sampling interval with the stochastic
/// integral approximated on the fine grid at subinterval midpoints.
pub fn exact_recursion(
    spec: &CarmaSpec,
    noise: &StableParams,
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<SampledSeries> {
    check_inputs(spec, noise, cfg)?;
    let p = spec.p();
    let h = cfg.step;
    let m = cfg.steps_per_obs()?;
    let burn = cfg.burn_in_steps()?;
    let a_mat = spec.companion();
    let c = spec.ma();
    let sampler = noise.over_time(h)?.sampler();

    // weights for the noise of subinterval i within a sampling interval
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let s = (i as f64 + 0.5) * h;
            let e = matrix_exp(&a_mat, cfg.delta - s);
            (0..p).map(|r| e[(r, p - 1)]).collect()
        })
        .collect();
    let phi = matrix_exp(&a_mat, cfg.delta);

    let mut x = vec![0.0; p];
    let mut next = vec![0.0; p];
    let mut advance = |x: &mut Vec<f64>, rng: &mut RngStream| {
        for r in 0..p {
            next[r] = (0..p).map(|j| phi[(r, j)] * x[j]).sum();
        }
        for w in &weights {
            let dl = sampler.draw(rng);
            for r in 0..p {
                next[r] += w[r] * dl;
            }
        }
        x.copy_from_slice(&next);
    };

    // burn-in: whole intervals first, then leftover fine steps with
    // the same midpoint rule on the shorter span
    let whole = burn / m;
    let rest = burn % m;
    for _ in 0..whole {
        advance(&mut x, rng);
    }
    if rest > 0 {
        let span = rest as f64 * h;
        let phi_rest = matrix_exp(&a_mat, span);
        let mut y = vec![0.0; p];
        for r in 0..p {
            y[r] = (0..p).map(|j| phi_rest[(r, j)] * x[j]).sum();
        }
        for i in 0..rest {
            let s = (i as f64 + 0.5) * h;
            let e = matrix_exp(&a_mat, span - s);
            let dl = sampler.draw(rng);
            for r in 0..p {
                y[r] += e[(r, p - 1)] * dl;
            }
        }
        x = y;
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("state diverged during burn-in".into()));
    }

    let mut values = Vec::with_capacity(cfg.n);
    for k in 0..cfg.n {
        advance(&mut x, rng);
        let y = observe(c, &x);
        if !y.is_finite() {
            return Err(Error::NonFinite(format!(
                "state diverged at observation {}",
                k + 1
            )));
        }
        values.push(y);
    }
    Ok(SampledSeries {
        values,
        delta: cfg.delta,
        provenance: provenance(noise, cfg, rng, Scheme::Exact),
    })
}

pub fn simulate(
    scheme: Scheme,
    spec: &CarmaSpec,
    noise: &StableParams,
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<SampledSeries> {
    match scheme {
        Scheme::Euler => euler_maruyama(spec, noise, cfg, rng),
        Scheme::Exact => exact_recursion(spec, noise, cfg, rng),
    }
}
