//! Indirect estimator: Gaussian ARMA(p, p-1) fit, AR roots mapped to CARMA
//! eigenvalues, MA parameters matched through autocorrelations.
//!
//! For `alpha < 2` the autocorrelations used in the matching step are formal
//! L² quantities of the filtered kernel; second moments of the data do not
//! exist.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arma::{arma_mle, ArmaFit};
use crate::carma_model::{CarmaSpec, FamilyId, ParamFamily};
use crate::error::{Error, Result};
use crate::kalman_transfer::solve_riccati;
use crate::linalg::{matrix_exp, poly_roots, Mat, Vector};
use crate::optimize::{minimize_box, NmOptions};
use crate::quadrature::GaussLegendre;

/// Stage at which the pipeline stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    ArmaMle,
    LogRoot,
    MaMatch,
}

impl FailureStage {
    pub fn name(&self) -> &'static str {
        match self {
            FailureStage::ArmaMle => "arma_mle",
            FailureStage::LogRoot => "log_root",
            FailureStage::MaMatch => "ma_match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarciaResult {
    pub theta_hat: Option<Vec<f64>>,
    /// Recovered CARMA eigenvalues.
    pub lambda_hat: Vec<Complex64>,
    pub arma_fit: Option<ArmaFit>,
    pub failed: bool,
    pub failure_stage: Option<FailureStage>,
    pub message: Option<String>,
}

impl GarciaResult {
    fn fail(
        stage: FailureStage,
        message: String,
        arma_fit: Option<ArmaFit>,
        lambda_hat: Vec<Complex64>,
    ) -> Self {
        Self {
            theta_hat: None,
            lambda_hat,
            arma_fit,
            failed: true,
            failure_stage: Some(stage),
            message: Some(message),
        }
    }
}

/// `lambda_j = -log(z_j) / delta` for the zeros `z_j` of `a_D`. Fails when a
/// zero lies on the closed non-positive real axis or inside the closed unit
/// disc.
pub fn recover_lambda(a_d: &[f64], delta: f64) -> Result<Vec<Complex64>> {
    let roots = poly_roots(a_d)?;
    let mut out = Vec::with_capacity(roots.len());
    for z in roots {
        let on_axis = z.im.abs() <= 1e-12 * z.norm().max(1.0) && z.re <= 0.0;
        if on_axis {
            return Err(Error::InvalidParameter(format!(
                "AR zero {z} lies on the non-positive real axis, logarithm undefined"
            )));
        }
        if z.norm() <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "AR zero {z} is not outside the unit circle"
            )));
        }
        let mut lam = -z.ln() / delta;
        if z.im == 0.0 {
            lam.im = 0.0;
        }
        out.push(lam);
    }
    Ok(out)
}

/// `h(s) = sum_i d_i g(s - i delta)`, the kernel of `a_D(B) Y`.
pub fn filtered_kernel(spec: &CarmaSpec, a_d: &[f64], s: f64) -> f64 {
    a_d.iter()
        .enumerate()
        .map(|(i, &d)| d * spec.kernel(s - i as f64 * spec.delta()))
        .sum()
}

/// Nodes and weights covering `[0, (p + k_max) delta]` with 128 points per
/// sampling interval, with `e^{A t} e_p` cached at every shifted node.
struct AcfGrid {
    p: usize,
    a_d: Vec<f64>,
    nodes: Vec<(f64, f64)>,
    /// `states[k][m][i]` is `e^{A (s_m + k delta - i delta)} e_p`, zero for
    /// negative arguments.
    states: Vec<Vec<Vec<Vector>>>,
}

impl AcfGrid {
    const PER_INTERVAL: usize = 128;

    fn new(a: &Mat, delta: f64, a_d: &[f64], k_max: usize) -> Self {
        let p = a.nrows();
        let gl = GaussLegendre::new(Self::PER_INTERVAL);
        let mut nodes = Vec::new();
        for i in 0..p {
            nodes.extend(gl.mapped(i as f64 * delta, (i + 1) as f64 * delta));
        }
        let mut ep = Vector::zeros(p);
        ep[p - 1] = 1.0;
        let states = (0..=k_max)
            .map(|k| {
                nodes
                    .iter()
                    .map(|&(s, _)| {
                        (0..a_d.len())
                            .map(|i| {
                                let t = s + (k as f64 - i as f64) * delta;
                                if t < 0.0 {
                                    Vector::zeros(p)
                                } else {
                                    matrix_exp(a, t) * &ep
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            p,
            a_d: a_d.to_vec(),
            nodes,
            states,
        }
    }

    fn h(&self, c: &Vector, k: usize, m: usize) -> f64 {
        self.states[k][m]
            .iter()
            .zip(&self.a_d)
            .map(|(v, d)| d * c.dot(v))
            .sum()
    }

    /// `r(k) / r(0)` for observation vector `c`.
    fn acf(&self, c: &Vector, k: usize) -> Result<f64> {
        let r = |lag: usize| -> f64 {
            self.nodes
                .iter()
                .enumerate()
                .map(|(m, &(_, w))| w * self.h(c, 0, m) * self.h(c, lag, m))
                .sum()
        };
        let r0 = r(0);
        if !(r0 > 1e-14) {
            return Err(Error::Singular(format!("filtered kernel has L2 norm {r0}")));
        }
        if k >= self.p {
            return Ok(0.0);
        }
        Ok(r(k) / r0)
    }
}

/// Formal autocorrelation at lag `k` of `a_D(B) Y` for the model `spec`.
pub fn model_acf(spec: &CarmaSpec, a_d: &[f64], k: usize) -> Result<f64> {
    let grid = AcfGrid::new(&spec.companion(), spec.delta(), a_d, k.min(spec.p()));
    grid.acf(&spec.c_vector(), k)
}

/// `sum_i c_i c_{i+k} / sum_i c_i^2`, zero beyond the MA order.
pub fn ma_acf(c: &[f64], k: usize) -> f64 {
    if k >= c.len() {
        return 0.0;
    }
    let num: f64 = c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum();
    let den: f64 = c.iter().map(|x| x * x).sum();
    num / den
}

/// Steps two and three of the pipeline from a given ARMA fit.
pub fn garcia_from_arma(fit: &ArmaFit, family: &ParamFamily, delta: f64) -> GarciaResult {
    let lambda = match recover_lambda(&fit.ar, delta) {
        Ok(l) => l,
        Err(e) => {
            return GarciaResult::fail(
                FailureStage::LogRoot,
                e.to_string(),
                Some(fit.clone()),
                Vec::new(),
            )
        }
    };
    let done = |theta: Vec<f64>, lambda: Vec<Complex64>| {
        if theta.iter().all(|v| v.is_finite()) {
            GarciaResult {
                theta_hat: Some(theta),
                lambda_hat: lambda,
                arma_fit: Some(fit.clone()),
                failed: false,
                failure_stage: None,
                message: None,
            }
        } else {
            GarciaResult::fail(
                FailureStage::LogRoot,
                "non-finite estimate".into(),
                Some(fit.clone()),
                lambda,
            )
        }
    };
    match family.id() {
        FamilyId::Ou => done(vec![lambda[0].re], lambda),
        FamilyId::Carma20Ex47 => {
            let fixed = Complex64::new(-2.0, 0.0);
            let (i_fixed, dist) = lambda
                .iter()
                .enumerate()
                .map(|(i, l)| (i, (l - fixed).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("two eigenvalues");
            if dist > 0.5 {
                return GarciaResult::fail(
                    FailureStage::LogRoot,
                    format!("no recovered eigenvalue within 0.5 of -2 (closest at distance {dist:.3})"),
                    Some(fit.clone()),
                    lambda,
                );
            }
            let other = lambda[1 - i_fixed];
            done(vec![other.re], lambda)
        }
        FamilyId::Carma21Ex48 => {
            let t1 = -(lambda[0] + lambda[1]).re;
            let t2 = (lambda[0] * lambda[1]).re;
            let target = ma_acf(&fit.ma, 1);
            let ar_spec = match family.spec(&[t1, t2, 1.0], delta) {
                Ok(s) => s,
                Err(e) => {
                    return GarciaResult::fail(
                        FailureStage::MaMatch,
                        e.to_string(),
                        Some(fit.clone()),
                        lambda,
                    )
                }
            };
            let grid = AcfGrid::new(&ar_spec.companion(), delta, &fit.ar, 1);
            let objective = |x: &[f64]| {
                let c = Vector::from_vec(vec![x[0], 1.0]);
                match grid.acf(&c, 1) {
                    Ok(rho) => (rho - target).powi(2),
                    Err(_) => f64::INFINITY,
                }
            };
            let bounds = [family.bounds()[2]];
            let r = minimize_box(&objective, &bounds, &NmOptions::default());
            if !r.value.is_finite() {
                return GarciaResult::fail(
                    FailureStage::MaMatch,
                    r.failure.unwrap_or_else(|| "matching failed".into()),
                    Some(fit.clone()),
                    lambda,
                );
            }
            done(vec![t1, t2, r.x[0]], lambda)
        }
        FamilyId::Generic => GarciaResult::fail(
            FailureStage::MaMatch,
            "generic families are not supported by the indirect estimator".into(),
            Some(fit.clone()),
            lambda,
        ),
    }
}

/// Full pipeline on an observed series.
pub fn garcia_estimate(y: &[f64], family: &ParamFamily, delta: f64) -> Result<GarciaResult> {
    if family.id() == FamilyId::Generic {
        return Err(Error::InvalidConfig(
            "the indirect estimator needs a named family (OU, CARMA20_EX47 or CARMA21_EX48)".into(),
        ));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let p = family.p();
    let fit = match arma_mle(y, p, p - 1) {
        Ok(f) if f.converged => f,
        Ok(f) => {
            return Ok(GarciaResult::fail(
                FailureStage::ArmaMle,
                "ARMA optimizer did not converge".into(),
                Some(f),
                Vec::new(),
            ))
        }
        Err(e @ Error::InvalidParameter(_)) => return Err(e),
        Err(e) => {
            return Ok(GarciaResult::fail(
                FailureStage::ArmaMle,
                e.to_string(),
                None,
                Vec::new(),
            ))
        }
    };
    Ok(garcia_from_arma(&fit, family, delta))
}

/// Exact ARMA reduction of a finite-variance CARMA model as an [`ArmaFit`]
/// with `c_D` normalized to a leading one.
pub fn exact_arma_fit(spec: &CarmaSpec) -> Result<ArmaFit> {
    let art = solve_riccati(spec)?;
    let (ar, ma) = art.arma_coeffs();
    Ok(ArmaFit {
        ar,
        ma,
        sigma2: art.innovation_scale(),
        loglik: f64::NAN,
        converged: true,
    })
}
