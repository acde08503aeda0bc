//! Limit objects of the stable Whittle function and of the sample
//! autocovariance: the sampled-kernel transfer function, `G`, the skewness
//! diagnostics and simulation of the `alpha/2`-stable limits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carma_model::{CarmaSpec, ParamFamily};
use crate::error::{Error, Result};
use crate::kalman_transfer::{solve_riccati, TransferArtifacts};
use crate::linalg::{discrete_lyapunov, matrix_exp, to_complex, CMat, CVector, Mat, Vector};
use crate::quadrature::{adaptive_simpson, bisect, periodic_grid};
use crate::stable_levy::{tail_constant, RngStream, StableParams};

/// Number of trapezoid points in frequency.
pub const OMEGA_POINTS: usize = 1 << 12;
/// Subintervals used when simulating the limit integrals.
pub const LIMIT_STEPS: usize = 512;
/// Absolute tolerance of the `u` quadrature.
pub const U_TOL: f64 = 1e-9;
const SIGN_GRID: usize = 512;

/// `e^{A^T (delta - u)} c` and `e^{-i w}(I - phi e^{-i w})^{-1} e_p` for a
/// fixed model; their inner product is the sampled-kernel transfer function.
#[derive(Debug, Clone)]
pub struct TransferKernel {
    a: Mat,
    phi: Mat,
    c: Vector,
    delta: f64,
}

impl TransferKernel {
    pub fn new(spec: &CarmaSpec) -> Result<Self> {
        spec.validate().into_result()?;
        let a = spec.companion();
        Ok(Self {
            phi: matrix_exp(&a, spec.delta()),
            a,
            c: spec.c_vector(),
            delta: spec.delta(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn w(&self, u: f64) -> Vector {
        matrix_exp(&self.a, self.delta - u).transpose() * &self.c
    }

    pub fn r(&self, omega: f64) -> Result<CVector> {
        let p = self.c.len();
        let z = Complex64::from_polar(1.0, -omega);
        let m = CMat::identity(p, p) - to_complex(&self.phi) * z;
        let mut ep = CVector::zeros(p);
        ep[p - 1] = Complex64::new(1.0, 0.0);
        let sol = m
            .lu()
            .solve(&ep)
            .ok_or_else(|| Error::Singular(format!("I - phi e^(-i{omega}) is singular")))?;
        Ok(sol * z)
    }

    /// `(1/m) sum_k weight(w_k) Re(r_k r_k^H)` over the periodic grid.
    fn weighted_gram<F: Fn(f64) -> f64>(&self, m: usize, weight: F) -> Result<Mat> {
        let p = self.c.len();
        let mut h = Mat::zeros(p, p);
        for w in periodic_grid(m) {
            let r = self.r(w)?;
            let wt = weight(w);
            for i in 0..p {
                for j in 0..p {
                    h[(i, j)] += wt * (r[i] * r[j].conj()).re;
                }
            }
        }
        Ok(h / m as f64)
    }
}

/// `sum_j g(delta j - s) e^{-i j w}` in closed form.
pub fn sampled_transfer(spec0: &CarmaSpec, s: f64, omega: f64) -> Result<Complex64> {
    if !(0.0..=spec0.delta()).contains(&s) {
        return Err(Error::InvalidParameter(format!("s = {s} outside [0, delta]")));
    }
    let k = TransferKernel::new(spec0)?;
    let w = k.w(s);
    let r = k.r(omega)?;
    let mut v: Complex64 = w.iter().zip(r.iter()).map(|(&a, &b)| b * a).sum();
    if s == 0.0 {
        v += spec0.kernel(0.0);
    }
    Ok(v)
}

/// `G(u) = w(u)^T H w(u)`, where `H` integrates the bracket
/// `|Pi_theta|^2 - |Pi_theta0|^2` against the transfer kernel of `theta0`.
#[derive(Debug, Clone)]
pub struct GFunction {
    kernel: TransferKernel,
    h: Mat,
}

impl GFunction {
    pub fn new(family: &ParamFamily, theta: &[f64], theta0: &[f64], delta: f64) -> Result<Self> {
        Self::with_grid(family, theta, theta0, delta, OMEGA_POINTS)
    }

    pub fn with_grid(
        family: &ParamFamily,
        theta: &[f64],
        theta0: &[f64],
        delta: f64,
        m: usize,
    ) -> Result<Self> {
        let spec = family.spec(theta, delta)?;
        let spec0 = family.spec(theta0, delta)?;
        let art = solve_riccati(&spec)?;
        let art0 = solve_riccati(&spec0)?;
        let kernel = TransferKernel::new(&spec0)?;
        let h = kernel.weighted_gram(m, |w| art.pi_abs2(w) - art0.pi_abs2(w))?;
        Ok(Self { kernel, h })
    }

    pub fn eval(&self, u: f64) -> f64 {
        let w = self.kernel.w(u);
        w.dot(&(&self.h * &w))
    }

    pub fn delta(&self) -> f64 {
        self.kernel.delta
    }
}

/// `G_{theta,theta0}(u)`.
pub fn big_g(family: &ParamFamily, theta: &[f64], theta0: &[f64], delta: f64, u: f64) -> Result<f64> {
    Ok(GFunction::new(family, theta, theta0, delta)?.eval(u))
}

/// `int (f^+)^{a}` and `int (f^-)^{a}` over `[lo, hi]` with the sign
/// changes of `f` located first.
pub fn signed_power_integrals<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    power: f64,
    tol: f64,
) -> (f64, f64) {
    let mut cuts = vec![lo];
    let step = (hi - lo) / SIGN_GRID as f64;
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    for i in 1..=SIGN_GRID {
        let x = if i == SIGN_GRID { hi } else { lo + i as f64 * step };
        let fx = f(x);
        if prev_f != 0.0 && fx != 0.0 && (prev_f > 0.0) != (fx > 0.0) {
            cuts.push(bisect(f, prev_x, x, prev_f));
        } else if fx == 0.0 && i < SIGN_GRID {
            cuts.push(x);
        }
        prev_x = x;
        prev_f = fx;
    }
    cuts.push(hi);
    cuts.dedup();
    let mut plus = 0.0;
    let mut minus = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let mid = f(0.5 * (a + b));
        let v = adaptive_simpson(|x| f(x).abs().powf(power), a, b, tol);
        if mid >= 0.0 {
            plus += v;
        } else {
            minus += v;
        }
    }
    (plus, minus)
}

/// Skewness diagnostics of the limit of `W(theta) - W(theta0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaDiagnostic {
    pub theta: Vec<f64>,
    pub theta0: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// Stable scale `sigma_{theta,theta0}`.
    pub sigma_scale: f64,
    /// Absolute tolerance requested from the `u` quadrature per segment.
    pub quad_tol: f64,
}

/// `C_alpha / C_{alpha/2}`.
pub fn tail_ratio(alpha: f64) -> Result<f64> {
    Ok(tail_constant(alpha)? / tail_constant(alpha / 2.0)?)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 2), got {alpha}"
        )));
    }
    Ok(())
}

/// `beta`, `beta^+`, `beta^-` and the scale for one parameter pair. At
/// `theta = theta0` all are zero by convention.
pub fn beta_diag(
    family: &ParamFamily,
    theta: &[f64],
    theta0: &[f64],
    alpha: f64,
    sigma: f64,
    delta: f64,
) -> Result<BetaDiagnostic> {
    check_alpha(alpha)?;
    let mut out = BetaDiagnostic {
        theta: theta.to_vec(),
        theta0: theta0.to_vec(),
        alpha,
        beta: 0.0,
        beta_plus: 0.0,
        beta_minus: 0.0,
        sigma_scale: 0.0,
        quad_tol: U_TOL,
    };
    if theta == theta0 {
        return Ok(out);
    }
    let g = GFunction::new(family, theta, theta0, delta)?;
    let (plus, minus) = signed_power_integrals(&|u| g.eval(u), 0.0, delta, alpha / 2.0, U_TOL);
    out.beta_plus = plus;
    out.beta_minus = minus;
    let total = plus + minus;
    if total > 0.0 {
        out.beta = (plus - minus) / total;
        let pow = sigma.powf(alpha) * tail_ratio(alpha)? * total;
        out.sigma_scale = pow.powf(2.0 / alpha);
    }
    Ok(out)
}

/// `(2 pi)^{-1} int |1 - e^{theta delta + i w}|^2 / |1 - e^{theta0 delta + i w}|^2 dw`.
pub fn w_ou(theta: f64, theta0: f64, delta: f64) -> f64 {
    let a = (theta * delta).exp();
    let b = (theta0 * delta).exp();
    let grid = periodic_grid(OMEGA_POINTS);
    grid.iter()
        .map(|&w| (1.0 + a * a - 2.0 * a * w.cos()) / (1.0 + b * b - 2.0 * b * w.cos()))
        .sum::<f64>()
        / OMEGA_POINTS as f64
}

/// Increment law of the `alpha/2`-stable integrator over a step of length `dt`.
fn limit_increments(alpha: f64, sigma: f64, dt: f64) -> Result<StableParams> {
    let ratio = tail_ratio(alpha)?;
    let scale = sigma * sigma * ratio.powf(2.0 / alpha) * dt.powf(2.0 / alpha);
    StableParams::new(alpha / 2.0, scale, 1.0, 0.0)
}

/// Draws of the limit `W(theta)` jointly over `theta_grid`; row `r` holds
/// replication `r`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_limit_w(
    family: &ParamFamily,
    theta_grid: &[Vec<f64>],
    theta0: &[f64],
    alpha: f64,
    sigma: f64,
    delta: f64,
    reps: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    check_alpha(alpha)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let spec0 = family.spec(theta0, delta)?;
    let kernel = TransferKernel::new(&spec0)?;
    let arts: Vec<TransferArtifacts> = theta_grid
        .iter()
        .map(|t| solve_riccati(&family.spec(t, delta)?))
        .collect::<Result<_>>()?;
    let m = LIMIT_STEPS;
    let dt = delta / m as f64;
    let ws: Vec<Vector> = (0..m).map(|i| kernel.w((i as f64 + 0.5) * dt)).collect();
    // integrand values per grid point and subinterval
    let values: Vec<Vec<f64>> = arts
        .iter()
        .map(|art| {
            let h = kernel.weighted_gram(OMEGA_POINTS, |w| art.pi_abs2(w))?;
            Ok(ws.iter().map(|w| w.dot(&(&h * w))).collect())
        })
        .collect::<Result<_>>()?;
    let sampler = limit_increments(alpha, sigma, dt)?.sampler();
    let mut dl = vec![0.0; m];
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        sampler.fill(rng, &mut dl);
        out.push(
            values
                .iter()
                .map(|v| v.iter().zip(&dl).map(|(a, b)| a * b).sum())
                .collect(),
        );
    }
    Ok(out)
}

/// Stable law `S_{alpha/2}(scale, skew, 0)` of a limit integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLimit {
    pub alpha: f64,
    pub scale: f64,
    pub skew: f64,
}

impl StableLimit {
    pub fn params(&self) -> Result<StableParams> {
        StableParams::new(self.alpha, self.scale, self.skew, 0.0)
    }
}

/// `G_h(s) = sum_j g(delta j - s) g(delta (j + h) - s)` on `(0, delta]`.
#[derive(Debug, Clone)]
pub struct AcvfKernel {
    a: Mat,
    c: Vector,
    delta: f64,
    /// `Sigma_d (phi^T)^h`.
    m: Mat,
}

impl AcvfKernel {
    pub fn new(spec: &CarmaSpec, h: usize) -> Result<Self> {
        spec.validate().into_result()?;
        let a = spec.companion();
        let p = spec.p();
        let phi = matrix_exp(&a, spec.delta());
        let mut epep = Mat::zeros(p, p);
        epep[(p - 1, p - 1)] = 1.0;
        let sigma_d = discrete_lyapunov(&phi, &epep)?;
        let m = sigma_d * phi.transpose().pow(h as u32);
        Ok(Self {
            a,
            c: spec.c_vector(),
            delta: spec.delta(),
            m,
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let w = matrix_exp(&self.a, self.delta - s).transpose() * &self.c;
        w.dot(&(&self.m * &w))
    }
}

/// Stable parameters of the limit of `n^{1-2/alpha} gamma_n(h)`.
pub fn acvf_limit_params(
    family: &ParamFamily,
    theta0: &[f64],
    alpha: f64,
    sigma: f64,
    delta: f64,
    h: usize,
) -> Result<StableLimit> {
    check_alpha(alpha)?;
    let spec = family.spec(theta0, delta)?;
    let g = AcvfKernel::new(&spec, h)?;
    let (plus, minus) = signed_power_integrals(&|s| g.eval(s), 0.0, delta, alpha / 2.0, U_TOL);
    let total = plus + minus;
    let pow = sigma.powf(alpha) * tail_ratio(alpha)? * total;
    Ok(StableLimit {
        alpha: alpha / 2.0,
        scale: pow.powf(2.0 / alpha),
        skew: if total > 0.0 { (plus - minus) / total } else { 0.0 },
    })
}

/// Draws of `int_0^delta G_h dL^{alpha/2}` by the same midpoint scheme as
/// [`simulate_limit_w`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_acvf_limit(
    family: &ParamFamily,
    theta0: &[f64],
    alpha: f64,
    sigma: f64,
    delta: f64,
    h: usize,
    reps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let g = AcvfKernel::new(&family.spec(theta0, delta)?, h)?;
    let m = LIMIT_STEPS;
    let dt = delta / m as f64;
    let vals: Vec<f64> = (0..m).map(|i| g.eval((i as f64 + 0.5) * dt)).collect();
    let sampler = limit_increments(alpha, sigma, dt)?.sampler();
    let mut dl = vec![0.0; m];
    Ok((0..reps)
        .map(|_| {
            sampler.fill(rng, &mut dl);
            vals.iter().zip(&dl).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// One-coordinate sweep holding the other coordinates at `theta0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub coordinate: usize,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn linspace(coordinate: usize, lo: f64, hi: f64, points: usize) -> Self {
        let values = if points <= 1 {
            vec![lo]
        } else {
            (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .collect()
        };
        Self { coordinate, values }
    }

    /// Adds `value` unless already present, keeping the values sorted.
    pub fn with_point(mut self, value: f64) -> Self {
        if !self.values.contains(&value) {
            self.values.push(value);
            self.values.sort_by(|a, b| a.total_cmp(b));
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub coordinate: usize,
    pub value: f64,
    pub beta: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

/// `beta` along a coordinate sweep.
pub fn beta_grid(
    family: &ParamFamily,
    theta0: &[f64],
    alpha: f64,
    delta: f64,
    sweep: &Sweep,
) -> Result<Vec<BetaRow>> {
    if sweep.coordinate >= family.dim() {
        return Err(Error::InvalidParameter(format!(
            "coordinate {} out of range for a {}-parameter family",
            sweep.coordinate,
            family.dim()
        )));
    }
    sweep
        .values
        .par_iter()
        .map(|&v| {
            let mut theta = theta0.to_vec();
            theta[sweep.coordinate] = v;
            let d = beta_diag(family, &theta, theta0, alpha, 1.0, delta)?;
            Ok(BetaRow {
                coordinate: sweep.coordinate,
                value: v,
                beta: d.beta,
                beta_plus: d.beta_plus,
                beta_minus: d.beta_minus,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const EX48: [f64; 3] = [1.9647, 0.0893, 0.1761];

    fn truncated(spec: &CarmaSpec, s: f64, omega: f64, jmax: i64) -> Complex64 {
        (-jmax..=jmax)
            .map(|j| Complex64::from_polar(spec.kernel(spec.delta() * j as f64 - s), -(j as f64) * omega))
            .sum()
    }

    #[test]
    fn ou_transfer_closed_form() {
        let spec = ParamFamily::ou().spec(&[-1.0], 1.0).unwrap();
        for &(s, w) in &[(0.3f64, 0.5), (1.0, -2.0), (0.7, 0.0)] {
            let z = Complex64::from_polar(1.0, -w);
            let expected = z * (-(1.0 - s)).exp() / (1.0 - z * (-1.0f64).exp());
            assert!((sampled_transfer(&spec, s, w).unwrap() - expected).norm() < 1e-12);
        }
        let v = sampled_transfer(&spec, 0.4, 0.0).unwrap();
        assert_abs_diff_eq!(v.re, (-0.6f64).exp() / (1.0 - (-1.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn transfer_matches_truncated_sum() {
        // the slow mode needs far more than 200 terms; the closed form is
        // checked against the truncated sum on the fast-decaying Ex 4.7 and
        // on Ex 4.8 with a long truncation
        let spec = ParamFamily::carma20_ex47().spec(&[-3.0], 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            let s = rng.uniform();
            let w = PI * (2.0 * rng.uniform() - 1.0);
            let a = sampled_transfer(&spec, s, w).unwrap();
            assert!((a - truncated(&spec, s, w, 200)).norm() < 1e-10);
        }
        let spec = ParamFamily::carma21_ex48().spec(&EX48, 1.0).unwrap();
        for _ in 0..3 {
            let s = rng.uniform();
            let w = PI * (2.0 * rng.uniform() - 1.0);
            let a = sampled_transfer(&spec, s, w).unwrap();
            assert!((a - truncated(&spec, s, w, 800)).norm() < 1e-10);
        }
    }

    #[test]
    fn g_vanishes_at_truth() {
        let fam = ParamFamily::carma21_ex48();
        let g = GFunction::new(&fam, &EX48, &EX48, 1.0).unwrap();
        for i in 0..=10 {
            assert_eq!(g.eval(i as f64 / 10.0), 0.0);
        }
    }

    #[test]
    fn g_ou_factorizes() {
        let fam = ParamFamily::ou();
        let g = GFunction::new(&fam, &[-2.0], &[-1.0], 1.0).unwrap();
        let w = w_ou(-2.0, -1.0, 1.0);
        for i in 0..=10 {
            let u = i as f64 / 10.0;
            let expected = (-2.0 * (1.0 - u)).exp() * (w - 1.0);
            assert!(
                (g.eval(u) - expected).abs() < 1e-10,
                "{} vs {expected}",
                g.eval(u)
            );
        }
    }

    #[test]
    fn g_grid_converged() {
        let fam = ParamFamily::carma20_ex47();
        let a = GFunction::with_grid(&fam, &[-5.0], &[-3.0], 1.0, OMEGA_POINTS).unwrap();
        let b = GFunction::with_grid(&fam, &[-5.0], &[-3.0], 1.0, 2 * OMEGA_POINTS).unwrap();
        for i in 0..=8 {
            let u = i as f64 / 8.0;
            assert!((a.eval(u) - b.eval(u)).abs() < 1e-10);
        }
    }

    #[test]
    fn w_ou_values() {
        assert_abs_diff_eq!(w_ou(-1.0, -1.0, 1.0), 1.0, epsilon = 1e-12);
        assert!(w_ou(-2.0, -1.0, 1.0) > 1.0);
        assert!(w_ou(-0.5, -1.0, 1.0) > 1.0);
        // adaptive quadrature oracle
        let (a, b) = ((-2.0f64).exp(), (-1.0f64).exp());
        let f = |w: f64| (1.0 + a * a - 2.0 * a * w.cos()) / (1.0 + b * b - 2.0 * b * w.cos());
        let oracle = adaptive_simpson(f, -PI, PI, 1e-12) / (2.0 * PI);
        assert!((w_ou(-2.0, -1.0, 1.0) - oracle).abs() < 1e-6);
    }

    #[test]
    fn beta_ou_is_one() {
        let fam = ParamFamily::ou();
        for &t in &[-3.0, -1.5, -0.5, -0.1] {
            let d = beta_diag(&fam, &[t], &[-1.0], 1.5, 1.0, 1.0).unwrap();
            assert_abs_diff_eq!(d.beta, 1.0, epsilon = 1e-12);
            assert_eq!(d.beta_minus, 0.0);
        }
        let d = beta_diag(&fam, &[-1.0], &[-1.0], 1.5, 1.0, 1.0).unwrap();
        assert_eq!((d.beta, d.sigma_scale), (0.0, 0.0));
    }

    #[test]
    fn beta_identity_and_sign_structure() {
        let fam = ParamFamily::carma20_ex47();
        for &t in &[-6.0, -4.0, -2.5] {
            let sets: Vec<bool> = [1.2, 1.5, 1.8]
                .iter()
                .map(|&a| {
                    let d = beta_diag(&fam, &[t], &[-3.0], a, 1.0, 1.0).unwrap();
                    assert!(
                        (d.beta * (d.beta_plus + d.beta_minus) - (d.beta_plus - d.beta_minus)).abs() < 1e-9
                    );
                    assert!(d.beta.abs() <= 1.0);
                    d.beta_minus > 1e-6
                })
                .collect();
            assert!(sets.iter().all(|&b| b == sets[0]));
        }
    }

    #[test]
    fn signed_integrals_of_sine() {
        // int_0^{2pi} |sin|^{0.75} split evenly between the two signs
        let (p, m) = signed_power_integrals(&|x: f64| x.sin(), 0.0, 2.0 * PI, 0.75, 1e-10);
        assert!((p - m).abs() < 1e-8);
        let oracle = adaptive_simpson(|x: f64| x.sin().powf(0.75), 0.0, PI, 1e-12);
        assert!((p - oracle).abs() < 1e-8);
    }

    #[test]
    fn acvf_kernel_ou() {
        let spec = ParamFamily::ou().spec(&[-1.0], 1.0).unwrap();
        let g = AcvfKernel::new(&spec, 0).unwrap();
        for &s in &[0.1f64, 0.5, 1.0] {
            let expected = (-2.0 * (1.0 - s)).exp() / (1.0 - (-2.0f64).exp());
            assert_abs_diff_eq!(g.eval(s), expected, epsilon = 1e-12);
        }
        let g1 = AcvfKernel::new(&spec, 1).unwrap();
        assert_abs_diff_eq!(g1.eval(0.5), g.eval(0.5) * (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn acvf_limit_ou_closed_form() {
        let fam = ParamFamily::ou();
        let alpha = 1.5;
        let lim = acvf_limit_params(&fam, &[-1.0], alpha, 1.0, 1.0, 0).unwrap();
        assert_eq!(lim.skew, 1.0);
        let integral = (1.0 - (-2.0f64).exp()).powf(-alpha / 2.0) * (1.0 - (-alpha).exp()) / alpha;
        let pow = tail_ratio(alpha).unwrap() * integral;
        assert!((lim.scale - pow.powf(2.0 / alpha)).abs() < 1e-8 * lim.scale);
        let far = acvf_limit_params(&fam, &[-1.0], alpha, 1.0, 1.0, 10).unwrap();
        let farther = acvf_limit_params(&fam, &[-1.0], alpha, 1.0, 1.0, 20).unwrap();
        assert!(farther.scale < far.scale && far.scale < lim.scale);
    }

    #[test]
    fn limit_w_draws() {
        let fam = ParamFamily::ou();
        let grid = vec![vec![-1.0], vec![-2.0], vec![-0.5]];
        let mut rng = RngStream::new(3, 0);
        let draws = simulate_limit_w(&fam, &grid, &[-1.0], 1.5, 1.0, 1.0, 200, &mut rng).unwrap();
        assert_eq!(draws.len(), 200);
        let w2 = w_ou(-2.0, -1.0, 1.0);
        let w05 = w_ou(-0.5, -1.0, 1.0);
        for row in &draws {
            assert!(row[0] > 0.0);
            assert!((row[1] / row[0] - w2).abs() < 1e-8 * w2);
            assert!((row[2] / row[0] - w05).abs() < 1e-8 * w05);
            assert!(row[1] > row[0] && row[2] > row[0]);
        }
    }

    #[test]
    fn sweep_helpers() {
        let s = Sweep::linspace(0, -6.0, -2.0, 5).with_point(-3.0);
        assert_eq!(s.values, vec![-6.0, -5.0, -4.0, -3.0, -2.0]);
        let s = Sweep::linspace(0, 0.0, 1.0, 2).with_point(0.25);
        assert_eq!(s.values, vec![0.0, 0.25, 1.0]);
    }
}
