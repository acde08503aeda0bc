//! CARMA(p, q) models in controller canonical form and the parametric
//! families used throughout the crate.
//!
//! A model is stored as the AR coefficients `a = (a_1, ..., a_p)` of
//! `a(z) = z^p + a_1 z^{p-1} + ... + a_p` and the length-`p` observation
//! vector `c`, so that the MA polynomial is `c(z) = sum_i c[i] z^i` and the
//! kernel is `g(t) = c^T exp(A t) e_p` for `t >= 0`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, matrix_exp, poly_roots, Mat, Vector};

/// Minimum distance between an MA root and an eigenvalue of `A`.
pub const CANCELLATION_TOL: f64 = 1e-10;

/// A single CARMA model with its sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct CarmaSpec {
    a: Vec<f64>,
    c: Vec<f64>,
    delta: f64,
}

impl CarmaSpec {
    pub fn new(a: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        let p = a.len();
        if p == 0 {
            return Err(Error::InvalidModel("AR order must be at least 1".into()));
        }
        if c.len() != p {
            return Err(Error::InvalidModel(format!(
                "observation vector has length {} but AR order is {p}",
                c.len()
            )));
        }
        if a[p - 1] == 0.0 {
            return Err(Error::InvalidModel("a_p must be nonzero".into()));
        }
        if c.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidModel(
                "at least one MA coefficient must be nonzero".into(),
            ));
        }
        if a.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sampling step must be positive, got {delta}"
            )));
        }
        Ok(Self { a, c, delta })
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn ar(&self) -> &[f64] {
        &self.a
    }

    /// The observation vector `c` (ascending MA coefficients).
    pub fn ma(&self) -> &[f64] {
        &self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// MA order `q`: the index of the last nonzero entry of `c`.
    pub fn q(&self) -> usize {
        self.c.iter().rposition(|&x| x != 0.0).unwrap_or(0)
    }

    pub fn companion(&self) -> Mat {
        companion(&self.a).expect("validated at construction")
    }

    pub fn c_vector(&self) -> Vector {
        Vector::from_column_slice(&self.c)
    }

    /// `e_p`, the last unit vector.
    pub fn e_p(&self) -> Vector {
        let mut e = Vector::zeros(self.p());
        e[self.p() - 1] = 1.0;
        e
    }

    pub fn kernel(&self, t: f64) -> f64 {
        kernel(self, t)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Companion matrix with ones on the superdiagonal and last row `(-a_p, ..., -a_1)`.
pub fn companion(a: &[f64]) -> Result<Mat> {
    let p = a.len();
    if p == 0 {
        return Err(Error::InvalidModel("AR order must be at least 1".into()));
    }
    if a[p - 1] == 0.0 {
        return Err(Error::InvalidModel("a_p must be nonzero".into()));
    }
    let mut m = Mat::zeros(p, p);
    for i in 0..p - 1 {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..p {
        m[(p - 1, j)] = -a[p - 1 - j];
    }
    Ok(m)
}

/// Kernel `g(t) = c^T exp(A t) e_p` on `[0, inf)`, zero for negative `t`.
pub fn kernel(spec: &CarmaSpec, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let e = matrix_exp(&spec.companion(), t);
    let p = spec.p();
    (0..p).map(|i| spec.c[i] * e[(i, p - 1)]).sum()
}

/// Closed-form kernel of the CARMA(2,1) family with `a(z) = z^2 + t1 z + t2`
/// and `c(z) = z + t3`, valid for distinct real roots.
pub fn carma21_kernel_closed_form(theta: [f64; 3], t: f64) -> Result<f64> {
    let [t1, t2, t3] = theta;
    let disc = t1 * t1 - 4.0 * t2;
    if disc <= 0.0 || !disc.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "closed form needs distinct real roots, discriminant is {disc}"
        )));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    let s = disc.sqrt();
    let (lp, lm) = carma21_lambdas(theta)?;
    Ok(((lp - t3) * (-lp * t).exp() - (lm - t3) * (-lm * t).exp()) / s)
}

/// Decay rates `(lambda_plus, lambda_minus) = (t1 +- sqrt(t1^2 - 4 t2)) / 2`.
pub fn carma21_lambdas(theta: [f64; 3]) -> Result<(f64, f64)> {
    let disc = theta[0] * theta[0] - 4.0 * theta[1];
    if disc <= 0.0 {
        return Err(Error::InvalidParameter("roots are not real and distinct".into()));
    }
    let s = disc.sqrt();
    Ok(((theta[0] + s) / 2.0, (theta[0] - s) / 2.0))
}

/// Outcome of the identifiability and stability checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
    #[serde(skip)]
    pub ma_roots: Vec<Complex64>,
    /// Strictly negative real parts.
    pub stable: bool,
    /// MA roots apart from the eigenvalues.
    pub no_cancellation: bool,
    /// Imaginary parts inside the sampling strip `(-pi/delta, pi/delta)`.
    pub sampling_strip: bool,
    pub pass: bool,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::InvalidModel(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut failed = Vec::new();
        if !self.stable {
            failed.push("eigenvalue with nonnegative real part");
        }
        if !self.no_cancellation {
            failed.push("MA root coincides with an eigenvalue");
        }
        if !self.sampling_strip {
            failed.push("eigenvalue outside the sampling strip");
        }
        if failed.is_empty() {
            write!(f, "valid")
        } else {
            write!(f, "{}", failed.join("; "))
        }
    }
}

pub fn validate(spec: &CarmaSpec) -> ValidationReport {
    let eig = eigenvalues(&spec.companion());
    let ma_roots = poly_roots(spec.ma()).unwrap_or_default();
    let stable = eig.iter().all(|e| e.re < 0.0 && e.re.is_finite());
    let no_cancellation = ma_roots
        .iter()
        .all(|r| eig.iter().all(|e| (r - e).norm() > CANCELLATION_TOL));
    let strip = PI / spec.delta();
    let sampling_strip = eig.iter().all(|e| e.im.abs() < strip);
    ValidationReport {
        eigenvalues: eig,
        ma_roots,
        stable,
        no_cancellation,
        sampling_strip,
        pass: stable && no_cancellation && sampling_strip,
    }
}

/// Identifier of a parametric family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    /// CAR(1): `a_1 = -theta`, `c = (1)`.
    #[serde(rename = "OU")]
    Ou,
    /// `a(z) = z^2 - (theta - 2) z - 2 theta`, `c(z) = theta - 2`.
    #[serde(rename = "CARMA20_EX47")]
    Carma20Ex47,
    /// `a(z) = z^2 + theta_1 z + theta_2`, `c(z) = z + theta_3`.
    #[serde(rename = "CARMA21_EX48")]
    Carma21Ex48,
    /// `theta = (a_1, ..., a_p, c_0, ..., c_{p-1})` with `c` ascending.
    #[serde(rename = "GENERIC")]
    Generic,
}

impl FamilyId {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyId::Ou => "OU",
            FamilyId::Carma20Ex47 => "CARMA20_EX47",
            FamilyId::Carma21Ex48 => "CARMA21_EX48",
            FamilyId::Generic => "GENERIC",
        }
    }
}

impl std::str::FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "OU" => Ok(FamilyId::Ou),
            "CARMA20_EX47" => Ok(FamilyId::Carma20Ex47),
            "CARMA21_EX48" => Ok(FamilyId::Carma21Ex48),
            "GENERIC" => Ok(FamilyId::Generic),
            other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
        }
    }
}

/// A parametric family `theta -> CarmaSpec` with a compact parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFamily {
    id: FamilyId,
    p: usize,
    bounds: Vec<(f64, f64)>,
}

impl ParamFamily {
    pub fn ou() -> Self {
        Self {
            id: FamilyId::Ou,
            p: 1,
            bounds: vec![(-5.0, -0.05)],
        }
    }

    pub fn carma20_ex47() -> Self {
        Self {
            id: FamilyId::Carma20Ex47,
            p: 2,
            bounds: vec![(-10.0, -0.1)],
        }
    }

    pub fn carma21_ex48() -> Self {
        Self {
            id: FamilyId::Carma21Ex48,
            p: 2,
            bounds: vec![(0.1, 5.0), (0.005, 2.0), (0.01, 2.0)],
        }
    }

    /// Generic CARMA(p, q <= p-1) family; `bounds` must have `2p` entries.
    pub fn generic(p: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("generic family needs p >= 1".into()));
        }
        let fam = Self {
            id: FamilyId::Generic,
            p,
            bounds,
        };
        fam.check_bounds()?;
        Ok(fam)
    }

    /// Default family for an identifier; GENERIC needs the order and bounds
    /// and is built with [`ParamFamily::generic`].
    pub fn from_id(id: FamilyId) -> Result<Self> {
        match id {
            FamilyId::Ou => Ok(Self::ou()),
            FamilyId::Carma20Ex47 => Ok(Self::carma20_ex47()),
            FamilyId::Carma21Ex48 => Ok(Self::carma21_ex48()),
            FamilyId::Generic => Err(Error::InvalidConfig(
                "GENERIC family needs an explicit order and parameter box".into(),
            )),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        self.bounds = bounds;
        self.check_bounds()?;
        Ok(self)
    }

    fn check_bounds(&self) -> Result<()> {
        if self.bounds.len() != self.dim() {
            return Err(Error::InvalidConfig(format!(
                "family {} has dimension {} but {} bounds were given",
                self.id.name(),
                self.dim(),
                self.bounds.len()
            )));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        match self.id {
            FamilyId::Ou | FamilyId::Carma20Ex47 => 1,
            FamilyId::Carma21Ex48 => 3,
            FamilyId::Generic => 2 * self.p,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(&t, &(lo, hi))| t >= lo && t <= hi)
    }

    pub fn in_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(&t, &(lo, hi))| t > lo && t < hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Builds the model at `theta` (no validation of Assumption A beyond
    /// the structural checks of [`CarmaSpec::new`]).
    pub fn spec(&self, theta: &[f64], delta: f64) -> Result<CarmaSpec> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "family {} expects {} parameters, got {}",
                self.id.name(),
                self.dim(),
                theta.len()
            )));
        }
        match self.id {
            FamilyId::Ou => CarmaSpec::new(vec![-theta[0]], vec![1.0], delta),
            FamilyId::Carma20Ex47 => {
                let t = theta[0];
                CarmaSpec::new(vec![2.0 - t, -2.0 * t], vec![t - 2.0, 0.0], delta)
            }
            FamilyId::Carma21Ex48 => CarmaSpec::new(vec![theta[0], theta[1]], vec![theta[2], 1.0], delta),
            FamilyId::Generic => {
                let p = self.p;
                CarmaSpec::new(theta[..p].to_vec(), theta[p..].to_vec(), delta)
            }
        }
    }

    /// Builds and validates the model; invalid parameters are an error.
    pub fn valid_spec(&self, theta: &[f64], delta: f64) -> Result<CarmaSpec> {
        let spec = self.spec(theta, delta)?;
        spec.validate().into_result()?;
        Ok(spec)
    }
}
