//! Small fixed-size tensor types for 2D continuum kinematics.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const ID: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn rotation(angle: f64) -> Mat2 {
        let (s, c) = angle.sin_cos();
        Mat2([[c, -s], [s, c]])
    }

    pub fn diag(a: f64, b: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, b]])
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn transpose(&self) -> Mat2 {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    #[inline]
    pub fn sym(&self) -> Mat2 {
        let half = 0.5;
        Mat2([
            [self.0[0][0], half * (self.0[0][1] + self.0[1][0])],
            [half * (self.0[0][1] + self.0[1][0]), self.0[1][1]],
        ])
    }

    /// Frobenius inner product.
    #[inline]
    pub fn dot(&self, other: &Mat2) -> f64 {
        self.0[0][0] * other.0[0][0]
            + self.0[0][1] * other.0[0][1]
            + self.0[1][0] * other.0[1][0]
            + self.0[1][1] * other.0[1][1]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Inverse; caller guarantees a nonzero determinant.
    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ])
    }

    /// Right Cauchy-Green tensor F^T F, exactly symmetric.
    pub fn cauchy_green(&self) -> Mat2 {
        let f = &self.0;
        let c01 = f[0][0] * f[0][1] + f[1][0] * f[1][1];
        Mat2([
            [f[0][0] * f[0][0] + f[1][0] * f[1][0], c01],
            [c01, f[0][1] * f[0][1] + f[1][1] * f[1][1]],
        ])
    }

    pub fn matmul(&self, other: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &other.0;
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

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Squared distance to SO(2) via singular values; requires det > 0.
    pub fn dist_sq_so2(&self) -> f64 {
        // sigma1^2 + sigma2^2 = |F|^2, sigma1*sigma2 = det F,
        // so (sigma1 + sigma2)^2 = |F|^2 + 2 det F.
        let nsq = self.norm_sq();
        let sum = (nsq + 2.0 * self.det()).max(0.0).sqrt();
        nsq - 2.0 * sum + 2.0
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] + o.0[0][0], self.0[0][1] + o.0[0][1]],
            [self.0[1][0] + o.0[1][0], self.0[1][1] + o.0[1][1]],
        ])
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] - o.0[0][0], self.0[0][1] - o.0[0][1]],
            [self.0[1][0] - o.0[1][0], self.0[1][1] - o.0[1][1]],
        ])
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self * -1.0
    }
}

/// Third-order tensor G[i][j][k], the discrete counterpart of d_j d_k y_i.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tens3(pub [[[f64; 2]; 2]; 2]);

impl Tens3 {
    pub const ZERO: Tens3 = Tens3([[[0.0; 2]; 2]; 2]);

    pub fn dot(&self, other: &Tens3) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    s += self.0[i][j][k] * other.0[i][j][k];
                }
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn scale(&self, s: f64) -> Tens3 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out.0[i][j][k] *= s;
                }
            }
        }
        out
    }

    /// Rotation acting on the first (vector) index.
    pub fn rotate_first(&self, q: &Mat2) -> Tens3 {
        let mut out = Tens3::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for m in 0..2 {
                        out.0[i][j][k] += q.0[i][m] * self.0[m][j][k];
                    }
                }
            }
        }
        out
    }
}

impl Add for Tens3 {
    type Output = Tens3;
    fn add(self, o: Tens3) -> Tens3 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out.0[i][j][k] += o.0[i][j][k];
                }
            }
        }
        out
    }
}

/// Fourth-order tensor acting on 2x2 matrices, stored by components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tens4(pub [[[[f64; 2]; 2]; 2]; 2]);

impl Tens4 {
    pub const ZERO: Tens4 = Tens4([[[[0.0; 2]; 2]; 2]; 2]);

    /// Isotropic tensor E -> two_mu * sym(E) + lambda * tr(E) * Id.
    pub fn isotropic(two_mu: f64, lambda: f64) -> Tens4 {
        let mut t = Tens4::ZERO;
        let id = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t.0[i][j][k][l] = 0.5 * two_mu * (id(i, k) * id(j, l) + id(i, l) * id(j, k))
                            + lambda * id(i, j) * id(k, l);
                    }
                }
            }
        }
        t
    }

    pub fn apply(&self, e: &Mat2) -> Mat2 {
        let mut out = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out.0[i][j] += self.0[i][j][k][l] * e.0[k][l];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Tens4 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out.0[i][j][k][l] *= s;
                    }
                }
            }
        }
        out
    }

    /// Max |C_ijkl - C_klij| over all index pairs.
    pub fn major_symmetry_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m = m.max((self.0[i][j][k][l] - self.0[k][l][i][j]).abs());
                    }
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_green_symmetric() {
        let f = Mat2([[1.3, 0.2], [-0.4, 0.9]]);
        let c = f.cauchy_green();
        assert_eq!(c.0[0][1], c.0[1][0]);
        let exact = f.transpose().matmul(&f);
        assert!((c.0[0][1] - exact.0[0][1]).abs() < 1e-15);
    }

    #[test]
    fn dist_to_so2_zero_on_rotation() {
        let q = Mat2::rotation(0.7);
        assert!(q.dist_sq_so2().abs() < 1e-14);
    }

    #[test]
    fn dist_to_so2_diagonal() {
        // singular values 1.5, 0.5 -> dist^2 = 0.25 + 0.25
        let f = Mat2::diag(1.5, 0.5);
        assert!((f.dist_sq_so2() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn isotropic_apply() {
        let t = Tens4::isotropic(2.0, 3.0);
        let e = Mat2([[1.0, 2.0], [2.0, -1.0]]);
        let r = t.apply(&e);
        // 2*sym(E) + 3*tr(E)*Id with tr = 0
        assert!((r.0[0][0] - 2.0).abs() < 1e-14);
        assert!((r.0[0][1] - 4.0).abs() < 1e-14);
        // skew input maps through its symmetric part only
        let skew = Mat2([[0.0, 1.0], [-1.0, 0.0]]);
        let rs = t.apply(&skew);
        assert!(rs.norm() < 1e-14);
    }
}
