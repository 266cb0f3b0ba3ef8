//! Small dense linear algebra used in the element kernels.
//!
//! Everything here works on at most 2x2 (geometry, metrics) or 6x6
//! (local DG systems) matrices, so the routines are written out by hand
//! instead of going through a general-purpose crate.

/// A square matrix of dimension 1 or 2 stored in a fixed 2x2 buffer.
///
/// In 1D only `a[0][0]` is meaningful; the other entries stay zero so the
/// same formulas (trace, determinant, inverse) apply in both dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    pub dim: usize,
    pub a: [[f64; 2]; 2],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 1 || dim == 2);
        SmallMat {
            dim,
            a: [[0.0; 2]; 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        let mut m = Self::zeros(1);
        m.a[0][0] = v;
        m
    }

    pub fn from_rows(r0: [f64; 2], r1: [f64; 2]) -> Self {
        SmallMat {
            dim: 2,
            a: [r0, r1],
        }
    }

    pub fn sym2(a11: f64, a12: f64, a22: f64) -> Self {
        Self::from_rows([a11, a12], [a12, a22])
    }

    pub fn diag2(d1: f64, d2: f64) -> Self {
        Self::sym2(d1, 0.0, d2)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.a[0][0],
            _ => self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0],
        }
    }

    pub fn trace(&self) -> f64 {
        match self.dim {
            1 => self.a[0][0],
            _ => self.a[0][0] + self.a[1][1],
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = *self;
        t.a[0][1] = self.a[1][0];
        t.a[1][0] = self.a[0][1];
        t
    }

    /// Inverse; the caller guarantees a nonzero determinant.
    pub fn inverse(&self) -> Self {
        let d = self.det();
        match self.dim {
            1 => Self::scalar(1.0 / self.a[0][0]),
            _ => Self::from_rows(
                [self.a[1][1] / d, -self.a[0][1] / d],
                [-self.a[1][0] / d, self.a[0][0] / d],
            ),
        }
    }

    pub fn mul(&self, o: &SmallMat) -> Self {
        let mut r = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.a[i][k] * o.a[k][j];
                }
                r.a[i][j] = s;
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut r = *self;
        for row in r.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        r
    }

    pub fn add(&self, o: &SmallMat) -> Self {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.a[i][j] += o.a[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &SmallMat) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        match self.dim {
            1 => [self.a[0][0] * v[0], 0.0],
            _ => [
                self.a[0][0] * v[0] + self.a[0][1] * v[1],
                self.a[1][0] * v[0] + self.a[1][1] * v[1],
            ],
        }
    }

    /// Quadratic form v^T A v.
    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        let av = self.mul_vec(v);
        av[0] * v[0] + av[1] * v[1]
    }

    pub fn max_abs_diff(&self, o: &SmallMat) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.a[i][j] - o.a[i][j]).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|v| v.is_finite())
    }

    /// Symmetric eigen-decomposition: returns eigenvalues (ascending) and
    /// the orthogonal matrix whose columns are the eigenvectors.
    pub fn sym_eigen(&self) -> ([f64; 2], SmallMat) {
        if self.dim == 1 {
            return ([self.a[0][0], 0.0], Self::identity(1));
        }
        let a = self.a[0][0];
        let b = 0.5 * (self.a[0][1] + self.a[1][0]);
        let d = self.a[1][1];
        if b == 0.0 {
            return if a <= d {
                ([a, d], Self::identity(2))
            } else {
                ([d, a], Self::from_rows([0.0, 1.0], [1.0, 0.0]))
            };
        }
        // Jacobi rotation annihilating the off-diagonal entry.
        let theta = 0.5 * (d - a) / b;
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let l1 = a - t * b;
        let l2 = d + t * b;
        // Columns: (c, -s) for l1 and (s, c) for l2.
        if l1 <= l2 {
            ([l1, l2], Self::from_rows([c, s], [-s, c]))
        } else {
            ([l2, l1], Self::from_rows([s, c], [c, -s]))
        }
    }

    /// Recompose Q diag(lambda) Q^T.
    pub fn from_eigen(lambda: [f64; 2], q: &SmallMat) -> Self {
        if q.dim == 1 {
            return Self::scalar(lambda[0]);
        }
        let mut r = Self::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                r.a[i][j] = q.a[i][0] * lambda[0] * q.a[j][0] + q.a[i][1] * lambda[1] * q.a[j][1];
            }
        }
        // Enforce exact symmetry.
        let off = 0.5 * (r.a[0][1] + r.a[1][0]);
        r.a[0][1] = off;
        r.a[1][0] = off;
        r
    }

    /// Lower-triangular Cholesky factor of an SPD matrix.
    pub fn cholesky(&self) -> Option<SmallMat> {
        match self.dim {
            1 => (self.a[0][0] > 0.0).then(|| Self::scalar(self.a[0][0].sqrt())),
            _ => {
                if self.a[0][0] <= 0.0 {
                    return None;
                }
                let l11 = self.a[0][0].sqrt();
                let l21 = self.a[1][0] / l11;
                let r = self.a[1][1] - l21 * l21;
                if r <= 0.0 {
                    return None;
                }
                Some(Self::from_rows([l11, 0.0], [l21, r.sqrt()]))
            }
        }
    }
}

/// Solve `a x = b` in place for a dense row-major `n x n` system using
/// Gaussian elimination with partial pivoting. On return `b` holds `x`.
/// Returns `false` if a pivot underflows (numerically singular matrix).
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    debug_assert!(a.len() >= n * n && b.len() >= n);
    let mut scale: f64 = 0.0;
    for v in a[..n * n].iter() {
        scale = scale.max(v.abs());
    }
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    let tiny = scale * 1e-300_f64.max(f64::EPSILON * 1e-3);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= tiny {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let inv = 1.0 / a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    true
}
