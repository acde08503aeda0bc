//! Riccati fixed point, Kalman gain, the sampled transfer polynomial and
//! the spectral density of the sampled process.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::carma_model::{CarmaSpec, ParamFamily};
use crate::error::{Error, Result};
use crate::linalg::{
    det_one_minus_coeffs, discrete_lyapunov, matrix_exp, poly_eval, spectral_radius, to_complex, CMat,
    CVector, Mat, Vector,
};
use crate::quadrature::{periodic_grid, GaussLegendre};

const MAX_ITER: usize = 100_000;

/// `int_0^delta e^{Au} e_p e_p^T e^{A^T u} du`. Van Loan's block exponential
/// on a short step, then doubled up to `delta` so that fast modes never
/// produce large cancelling blocks.
pub fn gramian(a: &Mat, delta: f64) -> Mat {
    let p = a.nrows();
    if delta == 0.0 {
        return Mat::zeros(p, p);
    }
    let mut doublings = 0;
    let mut h = delta;
    let norm = a.amax();
    while norm * h.abs() > 0.5 && doublings < 60 {
        h *= 0.5;
        doublings += 1;
    }
    let mut m = Mat::zeros(2 * p, 2 * p);
    m.view_mut((0, 0), (p, p)).copy_from(&(-a));
    m[(p - 1, 2 * p - 1)] = 1.0;
    m.view_mut((p, p), (p, p)).copy_from(&a.transpose());
    let e = matrix_exp(&m, h);
    let g12 = e.view((0, p), (p, p)).into_owned();
    let g22 = e.view((p, p), (p, p)).into_owned();
    let mut q = g22.transpose() * g12;
    q = (&q + q.transpose()) * 0.5;
    let mut phi = matrix_exp(a, h);
    for _ in 0..doublings {
        q = &q + &phi * &q * phi.transpose();
        q = (&q + q.transpose()) * 0.5;
        phi = &phi * &phi;
    }
    q
}

/// Everything derived from the Riccati fixed point at one parameter.
#[derive(Debug, Clone, Serialize)]
pub struct TransferArtifacts {
    /// Stationary one-step prediction covariance of the state.
    pub omega_mat: Mat,
    /// Kalman gain.
    pub gain: Vector,
    /// `e^{A delta}`.
    pub phi: Mat,
    /// Innovation state matrix `phi - K c^T`.
    pub f_mat: Mat,
    /// Observation vector.
    pub c: Vector,
    /// Process noise covariance per unit driver variance.
    pub q: Mat,
    /// Frobenius norm of `R(Omega) - Omega`.
    pub residual: f64,
    pub iterations: usize,
    /// Ascending coefficients of `det(I - phi z)`.
    pub num_coeffs: Vec<f64>,
    /// Ascending coefficients of `det(I - F z)`.
    pub den_coeffs: Vec<f64>,
}

/// Geometric bound `|psi_j| <= c rho^j` on the inverse series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub c: f64,
    pub rho: f64,
}

fn riccati_map(phi: &Mat, q: &Mat, c: &Vector, omega: &Mat) -> Result<Mat> {
    let oc = omega * c;
    let denom = c.dot(&oc);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Singular(format!("c^T Omega c = {denom}")));
    }
    let poc = phi * oc;
    let next = phi * omega * phi.transpose() + q - &poc * poc.transpose() / denom;
    Ok((&next + next.transpose()) * 0.5)
}

/// Solves the Riccati equation by fixed-point iteration from the Gramian.
pub fn solve_riccati(spec: &CarmaSpec) -> Result<TransferArtifacts> {
    spec.validate().into_result()?;
    let a = spec.companion();
    let c = spec.c_vector();
    let phi = matrix_exp(&a, spec.delta());
    let q = gramian(&a, spec.delta());

    let mut omega = q.clone();
    let mut iterations = 0;
    loop {
        let next = riccati_map(&phi, &q, &c, &omega)?;
        let change = (&next - &omega).norm();
        omega = next;
        iterations += 1;
        let scale = omega.norm().max(1.0);
        if change < 1e-13 * scale {
            break;
        }
        if iterations % 16 == 0 {
            let r = (riccati_map(&phi, &q, &c, &omega)? - &omega).norm();
            if r < 1e-12 * scale {
                break;
            }
        }
        if iterations >= MAX_ITER {
            return Err(Error::NoConvergence(format!(
                "Riccati iteration did not converge in {MAX_ITER} steps (last change {change:e})"
            )));
        }
        if !change.is_finite() {
            return Err(Error::NonFinite("Riccati iteration diverged".into()));
        }
    }
    let residual = (riccati_map(&phi, &q, &c, &omega)? - &omega).norm();
    let oc = &omega * &c;
    let gain = &phi * &oc / c.dot(&oc);
    let f_mat = &phi - &gain * c.transpose();
    let num_coeffs = det_one_minus_coeffs(&phi);
    let den_coeffs = det_one_minus_coeffs(&f_mat);
    Ok(TransferArtifacts {
        omega_mat: omega,
        gain,
        phi,
        f_mat,
        c,
        q,
        residual,
        iterations,
        num_coeffs,
        den_coeffs,
    })
}

impl TransferArtifacts {
    pub fn p(&self) -> usize {
        self.c.len()
    }

    /// `c^T Omega c`, the innovation variance per unit driver variance.
    pub fn innovation_scale(&self) -> f64 {
        self.c.dot(&(&self.omega_mat * &self.c))
    }

    /// `1 - c^T (I - F z)^{-1} K z` through the resolvent.
    pub fn pi(&self, z: Complex64) -> Result<Complex64> {
        let p = self.p();
        let m = CMat::identity(p, p) - to_complex(&self.f_mat) * z;
        let k = CVector::from_iterator(p, self.gain.iter().map(|&x| Complex64::new(x, 0.0)));
        let sol = m
            .lu()
            .solve(&k)
            .ok_or_else(|| Error::Singular(format!("resolvent singular at z = {z}")))?;
        let ct: Complex64 = self.c.iter().zip(sol.iter()).map(|(&ci, &s)| s * ci).sum();
        Ok(Complex64::new(1.0, 0.0) - ct * z)
    }

    /// `det(I - phi z) / det(I - F z)`, equal to [`Self::pi`].
    pub fn pi_rational(&self, z: Complex64) -> Complex64 {
        poly_eval(&self.num_coeffs, z) / poly_eval(&self.den_coeffs, z)
    }

    /// `|Pi(e^{i omega})|^2`.
    pub fn pi_abs2(&self, omega: f64) -> f64 {
        self.pi_rational(Complex64::from_polar(1.0, omega)).norm_sqr()
    }

    /// `psi_j = c^T phi^{j-1} K`, `j = 1..=j_max`, with a geometric tail bound.
    pub fn pi_inverse_coeffs(&self, j_max: usize) -> (Vec<f64>, TailBound) {
        let probe = j_max.max(1) + 200;
        let mut v = self.gain.clone();
        let mut psi = Vec::with_capacity(probe);
        for _ in 0..probe {
            psi.push(self.c.dot(&v));
            v = &self.phi * v;
        }
        let sr = spectral_radius(&self.phi);
        let rho = sr + 0.1 * (1.0 - sr);
        let c = psi
            .iter()
            .enumerate()
            .map(|(j, x)| x.abs() / rho.powi(j as i32 + 1))
            .fold(0.0, f64::max);
        psi.truncate(j_max);
        (psi, TailBound { c, rho })
    }

    /// Exact ARMA form of the sampled process: ascending AR coefficients
    /// `det(I - phi z)` and MA coefficients `det(I - F z)` of degree `p - 1`.
    pub fn arma_coeffs(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.p();
        let mut ma = self.den_coeffs.clone();
        ma.truncate(p);
        (self.num_coeffs.clone(), ma)
    }
}

/// Stationary state covariance per unit driver variance,
/// `int_0^inf e^{Au} e_p e_p^T e^{A^T u} du`.
pub fn stationary_covariance(spec: &CarmaSpec) -> Result<Mat> {
    let a = spec.companion();
    let phi = matrix_exp(&a, spec.delta());
    let q = gramian(&a, spec.delta());
    discrete_lyapunov(&phi, &q)
}

/// Autocovariance `sigma_L2 c^T phi^h Sigma c` of the sampled process with
/// finite-variance driver.
pub fn model_acvf(spec: &CarmaSpec, lags: usize, sigma_l2: f64) -> Result<Vec<f64>> {
    let sigma = stationary_covariance(spec)?;
    let c = spec.c_vector();
    let phi = matrix_exp(&spec.companion(), spec.delta());
    let mut v = &sigma * &c;
    let mut out = Vec::with_capacity(lags + 1);
    for _ in 0..=lags {
        out.push(sigma_l2 * c.dot(&v));
        v = &phi * v;
    }
    Ok(out)
}

/// Both evaluations of the sampled spectral density at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityPair {
    pub omega: f64,
    /// Quadrature of the defining integral.
    pub integral: f64,
    /// `sigma_L2 c^T Omega c / (2 pi |Pi|^2)`.
    pub via_pi: f64,
}

impl DensityPair {
    pub fn rel_diff(&self) -> f64 {
        (self.integral - self.via_pi).abs() / self.via_pi.abs().max(f64::MIN_POSITIVE)
    }
}

/// Precomputed quadrature for the sampled spectral density of one model.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    art: TransferArtifacts,
    /// `(weight, c^T e^{A u})` at the Gauss–Legendre nodes on `[0, delta]`.
    rows: Vec<(f64, Vector)>,
}

impl SpectralDensity {
    pub const NODES: usize = 64;

    pub fn new(spec: &CarmaSpec, art: &TransferArtifacts) -> Self {
        let a = spec.companion();
        let c = spec.c_vector();
        let gl = GaussLegendre::new(Self::NODES);
        let rows = gl
            .mapped(0.0, spec.delta())
            .map(|(u, w)| (w, matrix_exp(&a, u).transpose() * &c))
            .collect();
        Self {
            art: art.clone(),
            rows,
        }
    }

    pub fn artifacts(&self) -> &TransferArtifacts {
        &self.art
    }

    pub fn eval(&self, omega: f64, sigma_l2: f64) -> Result<DensityPair> {
        let p = self.art.p();
        let z = Complex64::from_polar(1.0, omega);
        let m = CMat::identity(p, p) - to_complex(&self.art.phi) * z;
        let mut ep = CVector::zeros(p);
        ep[p - 1] = Complex64::new(1.0, 0.0);
        let r = m
            .lu()
            .solve(&ep)
            .ok_or_else(|| Error::Singular(format!("I - phi e^(i{omega}) is singular")))?;
        let quad: f64 = self
            .rows
            .iter()
            .map(|(w, row)| {
                let s: Complex64 = row.iter().zip(r.iter()).map(|(&a, &b)| b * a).sum();
                w * s.norm_sqr()
            })
            .sum();
        let integral = sigma_l2 / (2.0 * PI) * quad;
        let via_pi = sigma_l2 * self.art.innovation_scale() / (2.0 * PI * self.art.pi_abs2(omega));
        Ok(DensityPair {
            omega,
            integral,
            via_pi,
        })
    }
}

/// Sampled spectral density at `omega` in both representations; errors when
/// they disagree by more than `1e-6` relative.
pub fn spectral_density_sampled(
    omega: f64,
    spec: &CarmaSpec,
    art: &TransferArtifacts,
    sigma_l2: f64,
) -> Result<DensityPair> {
    let d = SpectralDensity::new(spec, art).eval(omega, sigma_l2)?;
    if d.rel_diff() > 1e-6 {
        return Err(Error::NoConvergence(format!(
            "spectral density forms disagree at omega = {omega}: {} vs {}",
            d.integral, d.via_pi
        )));
    }
    Ok(d)
}

/// `log |Pi(e^{i w})|^{-2}` on a frequency grid.
fn log_inv_pi2(family: &ParamFamily, theta: &[f64], delta: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let art = solve_riccati(&family.spec(theta, delta)?)?;
    Ok(grid.iter().map(|&w| -art.pi_abs2(w).ln()).collect())
}

/// Asymptotic covariance `4 pi [int grad grad^T dw]^{-1}` of the adjusted
/// Whittle estimator in the Brownian case, with central differences of
/// step `fd_step` and the trapezoid rule on `2^12` frequencies.
pub fn sigma_wa_with_step(family: &ParamFamily, theta0: &[f64], delta: f64, fd_step: f64) -> Result<Mat> {
    let d = family.dim();
    if theta0.len() != d {
        return Err(Error::InvalidParameter(format!(
            "expected {d} parameters, got {}",
            theta0.len()
        )));
    }
    let m = 1 << 12;
    let grid = periodic_grid(m);
    let mut grads = Vec::with_capacity(d);
    for i in 0..d {
        let mut up = theta0.to_vec();
        let mut dn = theta0.to_vec();
        up[i] += fd_step;
        dn[i] -= fd_step;
        let fu = log_inv_pi2(family, &up, delta, &grid)?;
        let fd = log_inv_pi2(family, &dn, delta, &grid)?;
        grads.push(
            fu.iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) / (2.0 * fd_step))
                .collect::<Vec<_>>(),
        );
    }
    let w = 2.0 * PI / m as f64;
    let info = Mat::from_fn(d, d, |i, j| {
        w * grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let inv = info
        .try_inverse()
        .ok_or_else(|| Error::Singular("Whittle information matrix".into()))?;
    let out = inv * (4.0 * PI);
    Ok((&out + out.transpose()) * 0.5)
}

pub fn sigma_wa(family: &ParamFamily, theta0: &[f64], delta: f64) -> Result<Mat> {
    sigma_wa_with_step(family, theta0, delta, 1e-5)
}
