//! Fourier–Galerkin representation of the perturbation `f(x, p)`.
//!
//! `f(x,p) = Σ_k Σ_n c_{k,n} e^{iξ_k·x} φ_n(p)` with `ξ_k = 2πk/ℓ` on the box
//! `[0, ℓ)³` and `|k|_∞ ≤ N_x`. Spatial integrals use the normalised measure
//! `dx/ℓ³`, so Parseval reads `‖f‖²_{L²_{x,p}} = Σ_k c_k^* M c_k`.

use super::basis::{polynomials, BASIS_LEN, NULL_INDICES};
use crate::collision::Juttner;
use crate::error::{Error, Result};
use crate::geometry::FourMomentum;
use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

const B: usize = BASIS_LEN;

/// Complex Fourier–Galerkin coefficients of a real perturbation at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    /// Highest wave index per axis.
    pub n_x: usize,
    /// Side length `ℓ` of the periodic box.
    pub box_length: f64,
    pub t: f64,
    /// `coeffs[mode * BASIS_LEN + n]`, modes ordered lexicographically in `k`.
    pub coeffs: Vec<Complex64>,
}

impl DistributionField {
    pub fn zeros(n_x: usize, box_length: f64) -> Self {
        let side = 2 * n_x + 1;
        Self { n_x, box_length, t: 0.0, coeffs: vec![Complex64::new(0.0, 0.0); side * side * side * B] }
    }

    /// Modes per axis, `2N_x + 1`.
    pub fn side(&self) -> usize {
        2 * self.n_x + 1
    }

    pub fn n_modes(&self) -> usize {
        self.side().pow(3)
    }

    /// Storage index of wave vector `k`, if it is resolved.
    pub fn mode_index(&self, k: [i32; 3]) -> Option<usize> {
        let n = self.n_x as i32;
        if k.iter().any(|v| v.abs() > n) {
            return None;
        }
        let s = self.side();
        Some(((k[0] + n) as usize * s + (k[1] + n) as usize) * s + (k[2] + n) as usize)
    }

    /// Wave vector of storage index `i`.
    pub fn wave_vector(&self, i: usize) -> [i32; 3] {
        let (s, n) = (self.side(), self.n_x as i32);
        [(i / (s * s)) as i32 - n, ((i / s) % s) as i32 - n, (i % s) as i32 - n]
    }

    /// Physical wave vector `ξ = 2πk/ℓ`.
    pub fn wavenumber(&self, i: usize) -> [f64; 3] {
        let scale = 2.0 * PI / self.box_length;
        self.wave_vector(i).map(|k| scale * k as f64)
    }

    pub fn mode(&self, i: usize) -> &[Complex64] {
        &self.coeffs[i * B..(i + 1) * B]
    }

    pub fn mode_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.coeffs[i * B..(i + 1) * B]
    }

    /// Index of the mean (`k = 0`) mode.
    pub fn mean_index(&self) -> usize {
        self.mode_index([0, 0, 0]).expect("mean mode")
    }

    /// Adds `amplitude·φ_n(p)·cos(ξ_k·x + phase)`; keeps the field real.
    pub fn add_cosine(&mut self, k: [i32; 3], n: usize, amplitude: f64, phase: f64) -> Result<()> {
        let (Some(i), Some(j)) = (self.mode_index(k), self.mode_index(k.map(|v| -v))) else {
            return Err(Error::Domain(format!("wave vector {k:?} exceeds N_x = {}", self.n_x)));
        };
        if n >= B {
            return Err(Error::Domain(format!("basis index {n} out of range")));
        }
        let half = Complex64::from_polar(0.5 * amplitude, phase);
        if i == j {
            self.coeffs[i * B + n] += Complex64::new(amplitude * phase.cos(), 0.0);
        } else {
            self.coeffs[i * B + n] += half;
            self.coeffs[j * B + n] += half.conj();
        }
        Ok(())
    }

    /// Largest violation of `c_{−k} = conj(c_k)`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_modes() {
            let j = self.mode_index(self.wave_vector(i).map(|v| -v)).expect("mirror mode");
            for n in 0..B {
                worst = worst.max((self.coeffs[i * B + n] - self.coeffs[j * B + n].conj()).norm());
            }
        }
        worst
    }

    /// Replaces each pair `(c_k, c_{−k})` by its Hermitian part.
    pub fn enforce_reality(&mut self) {
        for i in 0..self.n_modes() {
            let j = self.mode_index(self.wave_vector(i).map(|v| -v)).expect("mirror mode");
            if j < i {
                continue;
            }
            for n in 0..B {
                let (a, b) = (self.coeffs[i * B + n], self.coeffs[j * B + n]);
                let s = 0.5 * (a + b.conj());
                self.coeffs[i * B + n] = s;
                self.coeffs[j * B + n] = s.conj();
            }
        }
    }

    /// Conserved moments `∫∫ (1, p, p⁰)√J f dx dp` (normalised in `x`), from the mean mode.
    pub fn conserved_moments(&self, mass: &DMatrix<f64>) -> [f64; 5] {
        let c = self.mode(self.mean_index());
        NULL_INDICES.map(|r| (0..B).map(|n| mass[(r, n)] * c[n].re).sum())
    }

    /// Removes the collision-invariant part of the mean mode (mass-matrix projection).
    pub fn project_out_conserved(&mut self, mass: &DMatrix<f64>) -> Result<()> {
        let gram = DMatrix::from_fn(5, 5, |a, b| mass[(NULL_INDICES[a], NULL_INDICES[b])]);
        let rhs = DVector::from_column_slice(&self.conserved_moments(mass));
        let chol = gram.cholesky().ok_or_else(|| Error::Conditioning("invariant Gram matrix not positive".into()))?;
        let alpha = chol.solve(&rhs);
        let mean = self.mean_index();
        for (a, &r) in NULL_INDICES.iter().enumerate() {
            self.coeffs[mean * B + r] -= Complex64::new(alpha[a], 0.0);
        }
        Ok(())
    }

    /// `Σ_k c_k^* A c_k` weighted per mode, for a Hermitian form `A`.
    pub fn weighted_form(&self, a: &DMatrix<f64>, weight: impl Fn(&[f64; 3]) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_modes() {
            let c = self.mode(i);
            if c.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                continue;
            }
            let w = weight(&self.wavenumber(i));
            let mut q = 0.0;
            for m in 0..B {
                let mut row = Complex64::new(0.0, 0.0);
                for n in 0..B {
                    row += a[(m, n)] * c[n];
                }
                q += (c[m].conj() * row).re;
            }
            total += w * q;
        }
        total
    }

    /// Polynomial part `Σ_n c_n(x) P_n(p)` at a point, so that `f = (that)·√J`.
    pub fn polynomial_at(&self, x: &[f64; 3], p: &FourMomentum) -> f64 {
        let poly = polynomials(p);
        let mut total = 0.0;
        for i in 0..self.n_modes() {
            let xi = self.wavenumber(i);
            let phase = Complex64::from_polar(1.0, xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2]);
            let c = self.mode(i);
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..B {
                s += c[n] * poly[n];
            }
            total += (s * phase).re;
        }
        total
    }

    /// `f(x, p)`.
    pub fn eval(&self, x: &[f64; 3], p: &FourMomentum, j: &Juttner) -> f64 {
        self.polynomial_at(x, p) * j.sqrt_j(p)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::basis::{IDX_A, IDX_IC};

    #[test]
    fn indexing_and_reality() {
        let mut f = DistributionField::zeros(2, 2.0 * PI);
        for i in 0..f.n_modes() {
            assert_eq!(f.mode_index(f.wave_vector(i)), Some(i));
        }
        f.add_cosine([1, 0, -2], 3, 0.5, 0.3).unwrap();
        assert!(f.reality_defect() < 1e-15);
        assert!(f.add_cosine([3, 0, 0], 0, 1.0, 0.0).is_err());
        let x: [f64; 3] = [0.4, 1.0, 2.0];
        let p = FourMomentum::on_shell([0.2, 0.1, -0.3]);
        let expect = 0.5 * (x[0] - 2.0 * x[2] + 0.3).cos() * polynomials(&p)[3];
        assert!((f.polynomial_at(&x, &p) - expect).abs() < 1e-14);
    }

    #[test]
    fn projection_removes_mean_invariants_only() {
        let mut m = DMatrix::<f64>::identity(B, B);
        m[(IDX_A, IDX_A + 4)] = 0.3;
        m[(IDX_A + 4, IDX_A)] = 0.3;
        let mut f = DistributionField::zeros(1, 1.0);
        f.add_cosine([0, 0, 0], IDX_A, 2.0, 0.0).unwrap();
        f.add_cosine([1, 0, 0], IDX_IC, 0.1, 0.0).unwrap();
        let before = f.clone();
        f.project_out_conserved(&m).unwrap();
        assert!(f.conserved_moments(&m).iter().all(|v| v.abs() < 1e-14));
        let i = f.mode_index([1, 0, 0]).unwrap();
        assert_eq!(f.mode(i), before.mode(i));
    }
}
