//! Discrete-ordinate direction sets.
//!
//! Weights are normalized to sum to one, so `sum_m w_m I_m` approximates the
//! angular mean `(1/4pi) \int_S I dOmega` directly.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order must be at least 1 (got {0})")]
    ZeroOrder(usize),
    #[error("explicit direction set is invalid: {0}")]
    InvalidDirections(String),
}

/// One discrete direction.
///
/// `omega` is the transport direction projected on the spatial plane: `(mu, 0)`
/// for slab geometry, `(zeta, eta)` in 2D. `mu` is the polar cosine, kept so
/// that direction-dependent data such as `sqrt(1 - zeta^2 - eta^2)` stays
/// available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub omega: [f64; 2],
    pub mu: f64,
}

impl Direction {
    pub fn slab(mu: f64) -> Self {
        Direction {
            omega: [mu, 0.0],
            mu,
        }
    }

    pub fn planar(zeta: f64, eta: f64) -> Self {
        let mu = (1.0 - zeta * zeta - eta * eta).max(0.0).sqrt();
        Direction {
            omega: [zeta, eta],
            mu,
        }
    }

    pub fn dot(&self, n: [f64; 2]) -> f64 {
        self.omega[0] * n[0] + self.omega[1] * n[1]
    }
}

/// Directions and positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    pub dimension: usize,
    pub directions: Vec<Direction>,
    pub weights: Vec<f64>,
}

impl AngularQuadrature {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Gauss-Legendre rule in `mu` for slab geometry.
    pub fn gauss_legendre_1d(order: usize) -> Result<Self, QuadratureError> {
        let (nodes, weights) = gauss_legendre(order)?;
        Ok(AngularQuadrature {
            dimension: 1,
            directions: nodes.into_iter().map(Direction::slab).collect(),
            weights: weights.into_iter().map(|w| 0.5 * w).collect(),
        })
    }

    /// Legendre-Chebyshev product rule on the unit sphere, projected on the
    /// x-y plane: Legendre roots in `mu`, equally spaced Chebyshev azimuths
    /// `phi_j = (2j - 1) pi / n_azimuthal`.
    pub fn legendre_chebyshev_2d(
        n_polar: usize,
        n_azimuthal: usize,
    ) -> Result<Self, QuadratureError> {
        if n_azimuthal == 0 {
            return Err(QuadratureError::ZeroOrder(0));
        }
        let (mus, wmu) = gauss_legendre(n_polar)?;
        let mut directions = Vec::with_capacity(n_polar * n_azimuthal);
        let mut weights = Vec::with_capacity(n_polar * n_azimuthal);
        for (mu, w) in mus.iter().zip(&wmu) {
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            for j in 1..=n_azimuthal {
                let phi = (2 * j - 1) as f64 * PI / n_azimuthal as f64;
                directions.push(Direction {
                    omega: [s * phi.cos(), s * phi.sin()],
                    mu: *mu,
                });
                weights.push(0.5 * w / n_azimuthal as f64);
            }
        }
        Ok(AngularQuadrature {
            dimension: 2,
            directions,
            weights,
        })
    }

    /// A user-supplied set (e.g. a single beam direction). Weights are
    /// rescaled to sum to one.
    pub fn explicit(
        dimension: usize,
        directions: Vec<Direction>,
        weights: Vec<f64>,
    ) -> Result<Self, QuadratureError> {
        if directions.is_empty() || directions.len() != weights.len() {
            return Err(QuadratureError::InvalidDirections(format!(
                "{} directions vs {} weights",
                directions.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(QuadratureError::InvalidDirections(
                "weights must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(AngularQuadrature {
            dimension,
            directions,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// `sum_m w_m f(Omega_m)`.
    pub fn integrate(&self, f: impl Fn(&Direction) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * f(d))
            .sum()
    }
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1]. Weights sum to 2.
///
/// Roots are found by Newton iteration on the three-term recurrence, starting
/// from the Chebyshev-type guesses `cos(pi (i - 1/4) / (n + 1/2))`.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    if order == 0 {
        return Err(QuadratureError::ZeroOrder(order));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// P_n(x) and P_n'(x).
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: Golub-Welsch. Nodes are eigenvalues of the
    /// symmetric tridiagonal Jacobi matrix, found here by plain bisection on
    /// the Sturm sequence; weights are 2 v_0^2 with v the normalized
    /// eigenvector computed from the three-term recurrence.
    fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
        let beta: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        let count_below = |x: f64| -> usize {
            // Sturm count of eigenvalues < x for the zero-diagonal matrix.
            let mut c = 0;
            let mut q = -x;
            if q < 0.0 {
                c += 1;
            }
            for b in &beta {
                let qq = if q == 0.0 { 1e-300 } else { q };
                q = -x - b * b / qq;
                if q < 0.0 {
                    c += 1;
                }
            }
            c
        };
        let mut nodes = Vec::new();
        for k in 0..n {
            let (mut lo, mut hi) = (-1.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let mut v = vec![1.0];
                if n > 1 {
                    v.push(x / beta[0]);
                }
                for k in 1..n - 1 {
                    let next = (x * v[k] - beta[k - 1] * v[k - 1]) / beta[k];
                    v.push(next);
                }
                let norm2: f64 = v.iter().map(|a| a * a).sum();
                2.0 / norm2
            })
            .collect();
        (nodes, weights)
    }

    #[test]
    fn order_two_is_pm_inv_sqrt3() {
        let q = AngularQuadrature::gauss_legendre_1d(2).unwrap();
        let (gw_nodes, gw_w) = golub_welsch(2);
        let s = 1.0 / 3f64.sqrt();
        assert!((q.directions[0].mu + s).abs() < 1e-15);
        assert!((q.directions[1].mu - s).abs() < 1e-15);
        assert!((q.weights[0] - 0.5).abs() < 1e-15 && (q.weights[1] - 0.5).abs() < 1e-15);
        for i in 0..2 {
            assert!((gw_nodes[i] - q.directions[i].mu).abs() < 1e-13);
            assert!((0.5 * gw_w[i] - q.weights[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn order_one_is_single_node_at_zero() {
        let q = AngularQuadrature::gauss_legendre_1d(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.directions[0].mu, 0.0);
        assert!((q.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn newton_nodes_agree_with_golub_welsch_up_to_order_12() {
        for n in 1..=12 {
            let (nodes, w) = gauss_legendre(n).unwrap();
            let (gn, gw) = golub_welsch(n);
            for i in 0..n {
                assert!((nodes[i] - gn[i]).abs() < 1e-13, "n={n} i={i}");
                assert!((w[i] - gw[i]).abs() < 1e-13, "n={n} i={i}");
            }
            assert!(nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn zero_order_rejected() {
        assert_eq!(
            AngularQuadrature::gauss_legendre_1d(0),
            Err(QuadratureError::ZeroOrder(0))
        );
        assert!(AngularQuadrature::legendre_chebyshev_2d(0, 4).is_err());
        assert!(AngularQuadrature::legendre_chebyshev_2d(4, 0).is_err());
    }

    #[test]
    fn one_dimensional_rule_exactness() {
        for n in 1..=8 {
            let q = AngularQuadrature::gauss_legendre_1d(n).unwrap();
            assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(q.weights.iter().all(|w| *w > 0.0));
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    1.0 / (deg as f64 + 1.0)
                };
                let got = q.integrate(|d| d.mu.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn p8_t8_has_64_directions() {
        let q = AngularQuadrature::legendre_chebyshev_2d(8, 8).unwrap();
        assert_eq!(q.len(), 64);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for d in &q.directions {
            let r2 = d.omega[0] * d.omega[0] + d.omega[1] * d.omega[1];
            assert!(r2 <= 1.0 + 1e-15);
            assert!((r2 + d.mu * d.mu - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_polar_node_lies_on_unit_circle() {
        let q = AngularQuadrature::legendre_chebyshev_2d(1, 4).unwrap();
        assert_eq!(q.len(), 4);
        for (d, w) in q.directions.iter().zip(&q.weights) {
            assert_eq!(d.mu, 0.0);
            assert!((d.omega[0].hypot(d.omega[1]) - 1.0).abs() < 1e-15);
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn in_plane_second_moment_is_two_thirds() {
        for np in 2..=8 {
            let q = AngularQuadrature::legendre_chebyshev_2d(np, 8).unwrap();
            let m = q.integrate(|d| d.omega[0] * d.omega[0] + d.omega[1] * d.omega[1]);
            assert!((m - 2.0 / 3.0).abs() < 1e-12);
        }
    }
}
