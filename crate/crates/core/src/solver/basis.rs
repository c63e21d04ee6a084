//! Polynomial-times-`√J` basis of the momentum variable.
//!
//! Every basis function has the form `φ_n = P_n(p)√J(p)`. The first
//! [`MACRO_LEN`] functions are the hydrodynamic basis
//! `√J, (p_i/p⁰)√J, p⁰√J, p_i√J, (p_ip_j/p⁰)√J (i ≤ j)`; the remaining ones,
//! `(p⁰)²√J` and `p⁰p_i√J`, give the linearized operator room to act
//! outside that span.

use crate::geometry::FourMomentum;

/// Number of Galerkin basis functions.
pub const BASIS_LEN: usize = 18;
/// Number of hydrodynamic basis functions (the index set `a, ia, c, ic, ij`).
pub const MACRO_LEN: usize = 14;

/// Index of `√J`.
pub const IDX_A: usize = 0;
/// Index of `(p_i/p⁰)√J` is `IDX_IA + i`.
pub const IDX_IA: usize = 1;
/// Index of `p⁰√J`.
pub const IDX_C: usize = 4;
/// Index of `p_i√J` is `IDX_IC + i`.
pub const IDX_IC: usize = 5;
/// First index of `(p_ip_j/p⁰)√J`, ordered `11, 12, 13, 22, 23, 33`.
pub const IDX_IJ: usize = 8;

/// Indices of the collision invariants `√J, p₁√J, p₂√J, p₃√J, p⁰√J`.
pub const NULL_INDICES: [usize; 5] = [IDX_A, IDX_IC, IDX_IC + 1, IDX_IC + 2, IDX_C];

/// Pairs `(i, j)` with `i ≤ j` in the order used by the `ij` block.
pub const IJ_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Position of `(i, j)` (either order) inside the `ij` block.
pub fn ij_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    IJ_PAIRS.iter().position(|&(x, y)| x == a && y == b).expect("indices below 3")
}

/// Human-readable names, in basis order.
pub const NAMES: [&str; BASIS_LEN] = [
    "1", "p1/p0", "p2/p0", "p3/p0", "p0", "p1", "p2", "p3", "p1p1/p0", "p1p2/p0", "p1p3/p0", "p2p2/p0", "p2p3/p0",
    "p3p3/p0", "p0p0", "p0p1", "p0p2", "p0p3",
];

/// Polynomial factors `P_n(p)` of all basis functions.
#[inline]
pub fn polynomials(p: &FourMomentum) -> [f64; BASIS_LEN] {
    let e = p.p0;
    let inv = 1.0 / e;
    let [x, y, z] = p.p;
    [
        1.0,
        x * inv,
        y * inv,
        z * inv,
        e,
        x,
        y,
        z,
        x * x * inv,
        x * y * inv,
        x * z * inv,
        y * y * inv,
        y * z * inv,
        z * z * inv,
        e * e,
        e * x,
        e * y,
        e * z,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_consistent() {
        let p = FourMomentum::on_shell([0.3, -0.4, 1.2]);
        let v = polynomials(&p);
        assert_eq!(v[IDX_A], 1.0);
        assert_eq!(v[IDX_C], p.p0);
        for i in 0..3 {
            assert_eq!(v[IDX_IC + i], p.p[i]);
            assert!((v[IDX_IA + i] - p.p[i] / p.p0).abs() < 1e-15);
            for j in 0..3 {
                assert!((v[IDX_IJ + ij_index(i, j)] - p.p[i] * p.p[j] / p.p0).abs() < 1e-15);
            }
        }
        assert_eq!(NAMES.len(), BASIS_LEN);
    }
}
