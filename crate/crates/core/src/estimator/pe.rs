use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Time-averaged outer product of the sinusoidal regressor over one
/// fundamental period, with its extreme eigenvalues.
#[derive(Debug, Clone)]
pub struct PeGram {
    /// `(1/τ)∫𝕊𝕊ᵀdt`, ordered `[cos ω₁t, sin ω₁t, …, cos nω₁t, sin nω₁t]`.
    pub matrix: DMatrix<f64>,
    /// Integration window `τ = 2π/ω₁`.
    pub period: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl PeGram {
    /// The period integral without the `1/τ` normalization.
    pub fn unnormalized(&self) -> DMatrix<f64> {
        &self.matrix * self.period
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }
}

/// Midpoint-rule Gram matrix of the sinusoidal regressor entries at sampling
/// rate `fs` (DC terms excluded).
pub fn pe_gram(omega1: f64, n: usize, fs: f64) -> Result<PeGram> {
    if n == 0 || !(omega1 > 0.0) {
        return Err(Error::InvalidInput("pe_gram needs n ≥ 1 and ω₁ > 0".into()));
    }
    let f1 = omega1 / (2.0 * PI);
    if !(fs > 2.0 * n as f64 * f1) {
        return Err(Error::Nyquist {
            order: n,
            freq_hz: n as f64 * f1,
            fs,
        });
    }
    let period = 2.0 * PI / omega1;
    let steps = (fs * period).ceil() as usize;
    let dt = period / steps as f64;
    let dim = 2 * n;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut s = vec![0.0; dim];
    for j in 0..steps {
        let t = (j as f64 + 0.5) * dt;
        for i in 0..n {
            let (sn, cs) = ((i + 1) as f64 * omega1 * t).sin_cos();
            s[2 * i] = cs;
            s[2 * i + 1] = sn;
        }
        for a in 0..dim {
            for b in a..dim {
                m[(a, b)] += s[a] * s[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            m[(a, b)] *= dt / period;
            m[(b, a)] = m[(a, b)];
        }
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let rho_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let rho_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PeGram {
        matrix: m,
        period,
        rho_min,
        rho_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_gram_is_half_identity() {
        let g = pe_gram(100.0 * PI, 1, 12_000.0).unwrap();
        assert!((g.matrix[(0, 0)] - 0.5).abs() < 1e-9);
        assert!(g.max_off_diagonal() < 1e-3);
        assert!((g.rho_min - 0.5).abs() < 1e-6 && (g.rho_max - 0.5).abs() < 1e-6);
        assert!((g.unnormalized()[(0, 0)] - 0.01).abs() < 1e-4);
    }

    #[test]
    fn harmonics_are_orthogonal() {
        let g = pe_gram(100.0 * PI, 2, 12_000.0).unwrap();
        assert_eq!(g.matrix.shape(), (4, 4));
        assert!(g.max_off_diagonal() < 1e-3);
    }

    #[test]
    fn rejects_under_nyquist() {
        assert!(pe_gram(100.0 * PI, 13, 1200.0).is_err());
        assert!(pe_gram(100.0 * PI, 0, 1200.0).is_err());
    }
}
