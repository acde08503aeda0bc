//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `exp(A t)` by scaling and squaring with Padé approximants.
pub fn matrix_exp(a: &Mat, t: f64) -> Mat {
    assert!(a.is_square(), "matrix exponential needs a square matrix");
    if t == 0.0 {
        return Mat::identity(a.nrows(), a.ncols());
    }
    (a * t).exp()
}

/// Eigenvalues of a real square matrix, sorted by real part then imaginary part.
pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    let mut eig: Vec<Complex64> = if a.nrows() == 1 {
        vec![Complex64::new(a[(0, 0)], 0.0)]
    } else {
        a.clone().complex_eigenvalues().iter().copied().collect()
    };
    eig.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    eig
}

/// Coefficients `(1, d_1, ..., d_p)` of `det(I - M z) = sum d_k z^k`
/// (Faddeev–LeVerrier).
pub fn det_one_minus_coeffs(m: &Mat) -> Vec<f64> {
    let p = m.nrows();
    let mut coeffs = vec![1.0; p + 1];
    let id = Mat::identity(p, p);
    let mut mk = Mat::zeros(p, p);
    for k in 1..=p {
        mk = m * &mk + &id * coeffs[k - 1];
        let amk = m * &mk;
        coeffs[k] = -amk.trace() / k as f64;
    }
    coeffs
}

/// Evaluates `sum c_k z^k` by Horner's rule.
pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Zeros of `sum c_k z^k` (ascending coefficients) via companion eigenvalues.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .ok_or_else(|| Error::InvalidParameter("zero polynomial has no finite roots".into()))?;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut comp = Mat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    Ok(eigenvalues(&comp))
}

/// Ascending coefficients of `prod_j (1 - r_j z)` with the imaginary parts of
/// the result dropped; `roots` must be closed under conjugation.
pub fn poly_from_reciprocal_roots(r: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &rj in r {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += ck;
            next[k + 1] -= ck * rj;
        }
        c = next;
    }
    c.into_iter().map(|x| x.re).collect()
}

/// Solves `X = Phi X Phi^T + Q` through the Kronecker form.
pub fn discrete_lyapunov(phi: &Mat, q: &Mat) -> Result<Mat> {
    let p = phi.nrows();
    let kron = phi.kronecker(phi);
    let lhs = Mat::identity(p * p, p * p) - kron;
    // column-major vec
    let rhs = Vector::from_iterator(p * p, q.iter().copied());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("discrete Lyapunov operator".into()))?;
    let x = Mat::from_iterator(p, p, sol.iter().copied());
    Ok((&x + x.transpose()) * 0.5)
}

/// Spectral radius `max |lambda|`.
pub fn spectral_radius(a: &Mat) -> f64 {
    eigenvalues(a).iter().map(|e| e.norm()).fold(0.0, f64::max)
}

pub fn to_complex(a: &Mat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Symmetric eigenvalues, ascending.
pub fn symmetric_eigenvalues(a: &Mat) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_scalar_and_identity() {
        let a = Mat::from_element(1, 1, -1.0);
        assert_abs_diff_eq!(matrix_exp(&a, 1.0)[(0, 0)], (-1.0f64).exp(), epsilon = 1e-15);
        let b = Mat::from_row_slice(2, 2, &[0.0, 1.0, -6.0, -5.0]);
        assert_eq!(matrix_exp(&b, 0.0), Mat::identity(2, 2));
    }

    #[test]
    fn exp_matches_eigen_decomposition() {
        // A = V diag(-3,-2) V^-1 with eigenvectors (1,-3) and (1,-2).
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -6.0, -5.0]);
        let v = Mat::from_row_slice(2, 2, &[1.0, 1.0, -3.0, -2.0]);
        let vinv = v.clone().try_inverse().unwrap();
        for &t in &[0.1f64, 1.0, 3.7] {
            let d = Mat::from_diagonal(&Vector::from_vec(vec![(-3.0 * t).exp(), (-2.0 * t).exp()]));
            let expected = &v * d * &vinv;
            let got = matrix_exp(&a, t);
            for (x, y) in got.iter().zip(expected.iter()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn exp_repeated_eigenvalue() {
        // Jordan block: exp(J t) = e^{-2t} [[1, t], [0, 1]]
        let j = Mat::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -2.0]);
        let e = matrix_exp(&j, 1.5);
        let s = (-3.0f64).exp();
        assert_abs_diff_eq!(e[(0, 0)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 1)], 1.5 * s, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn det_coeffs_match_eigenvalues() {
        let m = Mat::from_row_slice(3, 3, &[0.2, 0.1, 0.0, -0.3, 0.5, 0.2, 0.1, 0.0, -0.4]);
        let coeffs = det_one_minus_coeffs(&m);
        let eig = eigenvalues(&m);
        let expected = poly_from_reciprocal_roots(&eig);
        for (a, b) in coeffs.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn roots_of_quadratic() {
        // z^2 + 5z + 6
        let r = poly_roots(&[6.0, 5.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r[0].re, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].re, -2.0, epsilon = 1e-12);
        assert!(poly_roots(&[0.0, 0.0]).is_err());
        assert!(poly_roots(&[3.0]).unwrap().is_empty());
    }

    #[test]
    fn lyapunov_scalar() {
        let phi = Mat::from_element(1, 1, 0.5);
        let q = Mat::from_element(1, 1, 1.0);
        let x = discrete_lyapunov(&phi, &q).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0 / 0.75, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_fixed_point() {
        let phi = Mat::from_row_slice(2, 2, &[0.3, 0.2, -0.1, 0.6]);
        let q = Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let x = discrete_lyapunov(&phi, &q).unwrap();
        let r = &phi * &x * phi.transpose() + &q - &x;
        assert!(r.norm() < 1e-13);
    }
}
