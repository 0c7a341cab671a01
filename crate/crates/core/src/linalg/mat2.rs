use std::ops::{Add, Mul, Neg, Sub};

/// Dense 2×2 matrix, row-major: `Mat2([[a, b], [c, d]])`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Outer product `x yᵀ`.
    pub fn outer(x: [f64; 2], y: [f64; 2]) -> Self {
        Mat2([[x[0] * y[0], x[0] * y[1]], [x[1] * y[0], x[1] * y[1]]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Cofactor matrix, `cof(M) = det(M) M⁻ᵀ`. Linear in `M` in two dimensions.
    pub fn cofactor(&self) -> Self {
        let m = &self.0;
        Mat2([[m[1][1], -m[1][0]], [-m[0][1], m[0][0]]])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(self.cofactor().transpose().scale(1.0 / d))
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Frobenius product `M : N = Σ M_ij N_ij`.
    pub fn ddot(&self, other: &Mat2) -> f64 {
        let a = &self.0;
        let b = &other.0;
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let m = &self.0;
        let a = m[0][0];
        let d = m[1][1];
        let b = 0.5 * (m[0][1] + m[1][0]);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - rad, mean + rad]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactor_is_det_times_inverse_transpose() {
        let m = Mat2::new(1.3, -0.2, 0.4, 0.9);
        let k = m.cofactor();
        let expected = m.inverse().unwrap().transpose().scale(m.det());
        assert!((k - expected).max_abs() < 1e-15);
    }

    #[test]
    fn symmetric_eigenvalues_of_diagonal() {
        let m = Mat2::new(3.0, 0.0, 0.0, 0.5);
        assert_eq!(m.sym_eigenvalues(), [0.5, 3.0]);
    }

    #[test]
    fn singular_has_no_inverse() {
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }
}
