//! Whittle objectives (classical, adjusted, stable-scaled) and their
//! minimization over a parameter box.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carma_model::ParamFamily;
use crate::error::{Error, Result};
use crate::kalman_transfer::{solve_riccati, TransferArtifacts};
use crate::linalg::poly_eval;
use crate::optimize::{minimize_box, NmOptions};
use crate::spectral::{periodogram, Periodogram};

/// Which Whittle function to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `(1/2n) sum [I/f + log f]` with driver variance `sigma_l2`.
    Classical { sigma_l2: f64 },
    /// `(pi/n) sum |Pi|^2 I`.
    Adjusted,
    /// `n^{1-2/alpha}` times the adjusted function.
    Alpha { alpha: f64 },
}

/// Result of a Whittle fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub objective_value: f64,
    pub n: usize,
    pub converged: bool,
    pub starts_used: usize,
    pub failure: Option<String>,
}

/// `|Pi(e^{i w_j})|^2` at every periodogram frequency.
pub fn pi_abs2_on_grid(art: &TransferArtifacts, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&w| {
            let z = Complex64::from_polar(1.0, w);
            (poly_eval(&art.num_coeffs, z) / poly_eval(&art.den_coeffs, z)).norm_sqr()
        })
        .collect()
}

/// `(pi/n) sum_j |Pi(e^{i w_j})|^2 I_n(w_j)`.
pub fn whittle_adjusted(pgram: &Periodogram, art: &TransferArtifacts) -> f64 {
    let n = pgram.n();
    if n == 0 {
        return 0.0;
    }
    let s: f64 = pi_abs2_on_grid(art, &pgram.freqs)
        .iter()
        .zip(&pgram.values)
        .map(|(p, i)| p * i)
        .sum();
    PI / n as f64 * s
}

/// `(pi / n^{2/alpha}) sum_j |Pi|^2 I_n`.
pub fn whittle_alpha(pgram: &Periodogram, art: &TransferArtifacts, alpha: f64) -> f64 {
    let n = pgram.n() as f64;
    n.powf(1.0 - 2.0 / alpha) * whittle_adjusted(pgram, art)
}

/// `(1/2n) sum_j [I_n / f + log f]` with `f` from the innovation form.
pub fn whittle_classical(pgram: &Periodogram, art: &TransferArtifacts, sigma_l2: f64) -> Result<f64> {
    let n = pgram.n();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = sigma_l2 * art.innovation_scale() / (2.0 * PI);
    let mut s = 0.0;
    for (p2, i) in pi_abs2_on_grid(art, &pgram.freqs).iter().zip(&pgram.values) {
        let f = scale / p2;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spectral density {f} is not positive"
            )));
        }
        s += i / f + f.ln();
    }
    Ok(s / (2.0 * n as f64))
}

/// Objective as a function of the parameter vector.
#[derive(Debug, Clone)]
pub struct WhittleFunction<'a> {
    pub pgram: &'a Periodogram,
    pub family: &'a ParamFamily,
    pub delta: f64,
    pub objective: Objective,
}

impl WhittleFunction<'_> {
    /// Value at `theta`; `+inf` where the model is inadmissible.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        let Ok(spec) = self.family.spec(theta, self.delta) else {
            return f64::INFINITY;
        };
        let Ok(art) = solve_riccati(&spec) else {
            return f64::INFINITY;
        };
        let v = match self.objective {
            Objective::Adjusted => whittle_adjusted(self.pgram, &art),
            Objective::Alpha { alpha } => whittle_alpha(self.pgram, &art, alpha),
            Objective::Classical { sigma_l2 } => {
                whittle_classical(self.pgram, &art, sigma_l2).unwrap_or(f64::INFINITY)
            }
        };
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn check_objective(objective: &Objective) -> Result<()> {
    match *objective {
        Objective::Alpha { alpha } if !(alpha > 0.0 && alpha <= 2.0) => Err(Error::InvalidParameter(
            format!("alpha must lie in (0, 2], got {alpha}"),
        )),
        Objective::Classical { sigma_l2 } if !(sigma_l2 > 0.0 && sigma_l2.is_finite()) => Err(
            Error::InvalidParameter(format!("sigma_l2 must be positive, got {sigma_l2}")),
        ),
        _ => Ok(()),
    }
}

/// Minimizes the chosen objective over the family's box.
pub fn minimize(
    pgram: &Periodogram,
    family: &ParamFamily,
    delta: f64,
    objective: Objective,
    opts: &NmOptions,
) -> Result<EstimationResult> {
    check_objective(&objective)?;
    if pgram.is_empty() {
        return Err(Error::InvalidParameter("empty periodogram".into()));
    }
    let f = WhittleFunction {
        pgram,
        family,
        delta,
        objective,
    };
    let r = minimize_box(&|x: &[f64]| f.eval(x), family.bounds(), opts);
    Ok(EstimationResult {
        theta_hat: r.x,
        objective_value: r.value,
        n: pgram.n(),
        converged: r.converged,
        starts_used: r.starts_used,
        failure: r.failure,
    })
}

/// Periodogram followed by [`minimize`].
pub fn whittle_fit(
    y: &[f64],
    family: &ParamFamily,
    delta: f64,
    objective: Objective,
    opts: &NmOptions,
) -> Result<EstimationResult> {
    if y.is_empty() {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    minimize(&periodogram(y), family, delta, objective, opts)
}
