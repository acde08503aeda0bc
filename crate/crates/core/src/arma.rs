//! Gaussian ARMA(p, q) maximum likelihood through the prediction-error
//! decomposition of a state-space form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{discrete_lyapunov, Mat, Vector};
use crate::optimize::{nelder_mead, NmOptions};
use crate::spectral::sample_acvf_all;

/// Fitted model `a(B) Y_t = c(B) e_t` with ascending coefficients
/// `a = (1, a_1, ..., a_p)` and `c = (1, c_1, ..., c_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub converged: bool,
}

/// Partial autocorrelations to AR coefficients `phi` of
/// `1 - phi_1 z - ... - phi_k z^k`.
pub fn pacf_to_ar(r: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - rk * prev[k - 1 - j];
        }
        phi.push(rk);
    }
    phi
}

/// Inverse of [`pacf_to_ar`]; `None` outside the stationary region.
pub fn ar_to_pacf(phi: &[f64]) -> Option<Vec<f64>> {
    let k = phi.len();
    let mut cur = phi.to_vec();
    let mut r = vec![0.0; k];
    for m in (0..k).rev() {
        let rk = cur[m];
        if !(rk.abs() < 1.0) {
            return None;
        }
        r[m] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..m).map(|j| (cur[j] + rk * cur[m - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

/// Concentrated Gaussian likelihood evaluator for fixed orders.
struct Likelihood<'a> {
    y: &'a [f64],
    p: usize,
    q: usize,
}

struct FilterOutput {
    sigma2: f64,
    sum_log_f: f64,
}

impl Likelihood<'_> {
    fn r(&self) -> usize {
        self.p.max(self.q + 1)
    }

    /// `phi` for `1 - sum phi z^i`, `theta` for `1 + sum theta z^i`.
    fn filter(&self, phi: &[f64], theta: &[f64]) -> Option<FilterOutput> {
        let r = self.r();
        let mut t = Mat::zeros(r, r);
        for i in 0..r {
            if i < phi.len() {
                t[(i, 0)] = phi[i];
            }
            if i + 1 < r {
                t[(i, i + 1)] = 1.0;
            }
        }
        let mut rv = Vector::zeros(r);
        rv[0] = 1.0;
        for i in 0..theta.len() {
            rv[i + 1] = theta[i];
        }
        let rr = &rv * rv.transpose();
        let p0 = discrete_lyapunov(&t, &rr).ok()?;

        let tf: Vec<f64> = t.transpose().iter().copied().collect(); // row-major T
        let rrf: Vec<f64> = rr.transpose().iter().copied().collect();
        let mut pm: Vec<f64> = p0.transpose().iter().copied().collect();
        let mut a = vec![0.0; r];
        let mut ta = vec![0.0; r];
        let mut k = vec![0.0; r];
        let mut tp = vec![0.0; r * r];
        let mut next = vec![0.0; r * r];
        let mut steady = false;
        let mut ss = 0.0;
        let mut sum_log_f = 0.0;
        for &yt in self.y {
            let f = pm[0];
            if !(f > 0.0) || !f.is_finite() {
                return None;
            }
            let v = yt - a[0];
            ss += v * v / f;
            sum_log_f += f.ln();
            // K = T P[:, 0] / F
            for i in 0..r {
                k[i] = (0..r).map(|j| tf[i * r + j] * pm[j * r]).sum::<f64>() / f;
            }
            for i in 0..r {
                ta[i] = (0..r).map(|j| tf[i * r + j] * a[j]).sum::<f64>() + k[i] * v;
            }
            std::mem::swap(&mut a, &mut ta);
            if steady {
                continue;
            }
            for i in 0..r {
                for j in 0..r {
                    tp[i * r + j] = (0..r).map(|l| tf[i * r + l] * pm[l * r + j]).sum();
                }
            }
            let mut change: f64 = 0.0;
            for i in 0..r {
                for j in 0..r {
                    let v = (0..r).map(|l| tp[i * r + l] * tf[j * r + l]).sum::<f64>() + rrf[i * r + j]
                        - k[i] * k[j] * f;
                    change = change.max((v - pm[i * r + j]).abs());
                    next[i * r + j] = v;
                }
            }
            std::mem::swap(&mut pm, &mut next);
            if change < 1e-13 {
                steady = true;
            }
        }
        let n = self.y.len() as f64;
        Some(FilterOutput {
            sigma2: ss / n,
            sum_log_f,
        })
    }

    /// `log sigma2_hat + mean log F_t`, i.e. `-2 loglik / n` up to constants.
    fn objective(&self, phi: &[f64], theta: &[f64]) -> f64 {
        match self.filter(phi, theta) {
            Some(o) if o.sigma2 > 0.0 => o.sigma2.ln() + o.sum_log_f / self.y.len() as f64,
            _ => f64::INFINITY,
        }
    }

    fn unpack(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ar_pacf: Vec<f64> = u[..self.p].iter().map(|x| x.tanh()).collect();
        let ma_pacf: Vec<f64> = u[self.p..].iter().map(|x| x.tanh()).collect();
        let phi = pacf_to_ar(&ar_pacf);
        let theta = pacf_to_ar(&ma_pacf).into_iter().map(|x| -x).collect();
        (phi, theta)
    }
}

/// Yule–Walker AR(m) coefficients by Durbin–Levinson on uncentered
/// autocovariances.
fn yule_walker(y: &[f64], m: usize) -> Result<Vec<f64>> {
    let g = sample_acvf_all(y, m)?;
    if !(g[0] > 0.0) {
        return Err(Error::InvalidParameter("series has zero variance".into()));
    }
    let mut phi: Vec<f64> = Vec::new();
    let mut v = g[0];
    for k in 1..=m {
        let num = g[k] - (1..k).map(|j| phi[j - 1] * g[k - j]).sum::<f64>();
        let rk = num / v;
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - rk * prev[k - 2 - j];
        }
        phi.push(rk);
        v *= 1.0 - rk * rk;
    }
    Ok(phi)
}

/// Hannan–Rissanen initial values `(phi, theta)`.
pub fn hannan_rissanen(y: &[f64], p: usize, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let m = ((10.0 * (n as f64).log10()).ceil() as usize)
        .max(2 * (p + q))
        .min(n / 4)
        .max(1);
    let long = yule_walker(y, m)?;
    let mut e = vec![0.0; n];
    for t in m..n {
        e[t] = y[t] - (0..m).map(|j| long[j] * y[t - 1 - j]).sum::<f64>();
    }
    let start = m + q;
    let rows = n.saturating_sub(start);
    let cols = p + q;
    if cols == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if rows <= cols {
        return Err(Error::InvalidParameter(
            "series too short for Hannan–Rissanen".into(),
        ));
    }
    let x = Mat::from_fn(rows, cols, |i, j| {
        let t = start + i;
        if j < p {
            y[t - 1 - j]
        } else {
            e[t - 1 - (j - p)]
        }
    });
    let b = Vector::from_iterator(rows, (start..n).map(|t| y[t]));
    let beta = x
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Singular(format!("Hannan–Rissanen regression: {e}")))?;
    Ok((beta.as_slice()[..p].to_vec(), beta.as_slice()[p..].to_vec()))
}

fn to_unconstrained(coeffs: &[f64]) -> Vec<f64> {
    match ar_to_pacf(coeffs) {
        Some(r) => r.iter().map(|x| x.clamp(-0.99, 0.99).atanh()).collect(),
        None => vec![0.0; coeffs.len()],
    }
}

const U_BOUND: f64 = 8.0;

/// Gaussian ARMA(p, q) fit without mean correction.
pub fn arma_mle(y: &[f64], p: usize, q: usize) -> Result<ArmaFit> {
    let n = y.len();
    if n <= 10 * (p + q) || n < 3 {
        return Err(Error::InvalidParameter(format!(
            "need more than {} observations for ARMA({p}, {q}), got {n}",
            10 * (p + q)
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("observation {} is not finite", i + 1)));
    }
    let lik = Likelihood { y, p, q };
    let d = p + q;
    let (ar0, ma0) = hannan_rissanen(y, p, q)?;
    let neg_ma: Vec<f64> = ma0.iter().map(|x| -x).collect();
    let mut u0 = to_unconstrained(&ar0);
    u0.extend(to_unconstrained(&neg_ma));

    let f = |u: &[f64]| {
        let (phi, theta) = lik.unpack(u);
        lik.objective(&phi, &theta)
    };
    let (best_u, converged) = if d == 0 {
        (Vec::new(), true)
    } else {
        let bounds = vec![(-U_BOUND, U_BOUND); d];
        let opts = NmOptions {
            tol: 1e-7,
            max_iter: 2000,
            max_starts: 1,
            init_step: 0.02,
        };
        let mut best = nelder_mead(&f, &u0, &bounds, &opts);
        let alt = nelder_mead(&f, &vec![0.0; d], &bounds, &opts);
        if alt.value < best.value {
            best = alt;
        }
        // one restart from the winner guards against a collapsed simplex
        let polish = nelder_mead(&f, &best.x, &bounds, &opts);
        if polish.value <= best.value {
            best = polish;
        }
        if !best.value.is_finite() {
            return Err(Error::NoConvergence("ARMA likelihood is not finite".into()));
        }
        (best.x, best.converged)
    };
    let (phi, theta) = lik.unpack(&best_u);
    let out = lik
        .filter(&phi, &theta)
        .ok_or_else(|| Error::NonFinite("ARMA filter failed at the optimum".into()))?;
    let nf = n as f64;
    let loglik = -0.5 * nf * (2.0 * std::f64::consts::PI * out.sigma2).ln() - 0.5 * out.sum_log_f - 0.5 * nf;
    let mut ar = vec![1.0];
    ar.extend(phi.iter().map(|x| -x));
    let mut ma = vec![1.0];
    ma.extend(theta.iter().copied());
    Ok(ArmaFit {
        ar,
        ma,
        sigma2: out.sigma2,
        loglik,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_levy::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn arma(phi: &[f64], theta: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let e = gaussian(n + 500, seed);
        let mut y = vec![0.0; n + 500];
        for t in 0..n + 500 {
            let mut v = e[t];
            for (i, &c) in theta.iter().enumerate() {
                if t > i {
                    v += c * e[t - 1 - i];
                }
            }
            for (i, &c) in phi.iter().enumerate() {
                if t > i {
                    v += c * y[t - 1 - i];
                }
            }
            y[t] = v;
        }
        y.split_off(500)
    }

    #[test]
    fn pacf_round_trip() {
        let r = [0.5, -0.3, 0.8];
        let phi = pacf_to_ar(&r);
        let back = ar_to_pacf(&phi).unwrap();
        for (a, b) in r.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ar_to_pacf(&[1.2]).is_none());
        // AR(2) with phi = (0.5, 0.3): last pacf 0.3
        let r = ar_to_pacf(&[0.5, 0.3]).unwrap();
        assert!((r[1] - 0.3).abs() < 1e-12);
        assert!((r[0] - 0.5 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn ar1_estimate() {
        let y = arma(&[0.5], &[], 5000, 1);
        let fit = arma_mle(&y, 1, 0).unwrap();
        assert!((-fit.ar[1] - 0.5).abs() < 0.05, "{:?}", fit.ar);
        assert!((fit.sigma2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn white_noise_estimate() {
        let y = gaussian(5000, 2);
        let fit = arma_mle(&y, 1, 0).unwrap();
        assert!(fit.ar[1].abs() < 0.05);
    }

    #[test]
    fn arma21_estimate() {
        let y = arma(&[1.0, -0.3], &[0.4], 5000, 3);
        let fit = arma_mle(&y, 2, 1).unwrap();
        assert!((-fit.ar[1] - 1.0).abs() < 0.1, "{fit:?}");
        assert!((-fit.ar[2] + 0.3).abs() < 0.1, "{fit:?}");
        assert!((fit.ma[1] - 0.4).abs() < 0.1, "{fit:?}");
        assert!(fit.loglik.is_finite());
    }

    #[test]
    fn deterministic() {
        let y = arma(&[0.3, 0.2], &[0.5], 800, 9);
        assert_eq!(arma_mle(&y, 2, 1).unwrap(), arma_mle(&y, 2, 1).unwrap());
    }

    #[test]
    fn likelihood_matches_exact_gaussian_ar1() {
        // exact AR(1) likelihood: y_1 ~ N(0, s2/(1-phi^2)), then conditionals
        let y = arma(&[0.6], &[], 200, 5);
        let lik = Likelihood { y: &y, p: 1, q: 0 };
        let o = lik.filter(&[0.6], &[]).unwrap();
        let mut ss = y[0] * y[0] * (1.0 - 0.36);
        for t in 1..y.len() {
            ss += (y[t] - 0.6 * y[t - 1]).powi(2);
        }
        assert!((o.sigma2 - ss / 200.0).abs() < 1e-12);
        assert!((o.sum_log_f - (1.0f64 / 0.64).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_series() {
        assert!(arma_mle(&[1.0; 20], 2, 1).is_err());
    }
}
