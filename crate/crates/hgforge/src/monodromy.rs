//! The three loop operators around 0, 1 and infinity in a basis adapted to
//! the two complete eigenvector flags, the hermitian pairing they all
//! preserve, and the coefficients tying one eigenbasis to the other.
//!
//! Conventions. Continuation along a loop acts on a fundamental matrix on
//! the right, T -> T.M, so the coefficient column of a solution f = T.xi
//! transforms as xi -> M.xi and a composite path multiplies its loop
//! matrices in reverse order; the positively oriented loops around 0, 1 and
//! infinity compose to M_inf M_1 M_0 = Id. Worked m = 2 shapes, writing
//! g_i = e^{2 pi i (b_i + a_2 - c_i)} - 1 and indexing from one:
//!
//!   M_0   = | e^{2 pi i b_1}    e^{2 pi i b_2} g_1 |
//!           | 0                 e^{2 pi i b_2}     |
//!
//!   M_inf = | e^{-2 pi i c_1}              0               |
//!           | e^{-2 pi i (b_2 + a_2)} g_2  e^{-2 pi i c_2} |
//!
//! and M_1 - e^{2 pi i a_2} Id has constant rows, row i being
//! -g_i e^{-2 pi i ((i - 1) a_2 + (b_1 - c_1) + ... + (b_i - c_i))}.
//! Eigenvalues sit on the triangular diagonals: e^{2 pi i b_i} for the loop
//! at zero, e^{-2 pi i c_i} at infinity.

use num_complex::Complex64;

use crate::cauchy::{cauchy_weights, CauchyKind};
use crate::linalg::{
    self, hermitian_signature, CMatrix, Signature, I, ONE, ZERO,
};
use crate::params::{validate_genericity, ExponentSet, RealExponentSet, EPS_INT};
use crate::series::sin_pi;
use crate::{guard_denominator, Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// e^{2 pi i z} with the real part reduced to its nearest integer first, so
/// unimodular factors stay on the circle to full precision even when the
/// exponent sits near 1.
pub fn e2pi(z: Complex64) -> Complex64 {
    Complex64::from_polar((-TAU * z.im).exp(), TAU * (z.re - z.re.round()))
}

/// e^{pi i z}; the reduction is modulo 2 here.
pub fn epi(z: Complex64) -> Complex64 {
    let reduced = z.re - 2.0 * (z.re / 2.0).round();
    Complex64::from_polar((-std::f64::consts::PI * z.im).exp(), std::f64::consts::PI * reduced)
}

/// e^{2 pi i z} - 1 through the half-angle split 2i sin(pi z) e^{pi i z},
/// which keeps full relative accuracy near the zeros.
pub fn e2pi_m1(z: Complex64) -> Complex64 {
    2.0 * I * sin_pi(z) * epi(z)
}

/// The loop operators with their eigenvector systems. Columns of `p` are
/// eigenvectors of `m0` (eigenvalue e^{2 pi i b_i}), columns of `q`
/// eigenvectors of `m_inf` (eigenvalue e^{-2 pi i c_i}), and `r` is the
/// simple eigenvector of `m1` (eigenvalue e^{2 pi i a_1}), normalized so the
/// columns of either triangular system sum to `r`.
#[derive(Clone, Debug)]
pub struct MonodromyTriple {
    pub e: ExponentSet,
    pub m0: CMatrix,
    pub m1: CMatrix,
    pub m_inf: CMatrix,
    pub p: CMatrix,
    pub q: CMatrix,
    pub r: Vec<Complex64>,
}

fn partial_bc(e: &ExponentSet) -> Vec<Complex64> {
    let mut acc = ZERO;
    e.b.iter()
        .zip(&e.c)
        .map(|(bk, ck)| {
            acc += bk - ck;
            acc
        })
        .collect()
}

pub fn build_monodromy(e: &ExponentSet) -> Result<MonodromyTriple> {
    let violations = validate_genericity(e, EPS_INT);
    if let Some(v) = violations.first() {
        return Err(Error::Genericity(format!(
            "{} difference ({}, {}) lies within {} of an integer",
            v.family, v.i, v.j, EPS_INT
        )));
    }
    let m = e.m;
    let bc = partial_bc(e);
    // g_j in the header's notation
    let gap = |j: usize| e2pi_m1(e.b[j] - e.c[j] + e.a2);

    let m0 = CMatrix::from_fn(m, m, |i, j| {
        if i > j {
            ZERO
        } else if i == j {
            e2pi(e.b[i])
        } else {
            let mut s = e.a2 * ((j - i) as f64 - 1.0) + e.b[j];
            for k in (i + 1)..j {
                s += e.b[k] - e.c[k];
            }
            e2pi(s) * gap(i)
        }
    });
    let m_inf = CMatrix::from_fn(m, m, |i, j| {
        if i < j {
            ZERO
        } else if i == j {
            e2pi(-e.c[i])
        } else {
            e2pi(-(e.b[i] + e.a2)) * gap(i)
        }
    });
    let lambda2 = e2pi(e.a2);
    let rows: Vec<Complex64> = (0..m)
        .map(|i| -e2pi(-(e.a2 * i as f64 + bc[i])) * gap(i))
        .collect();
    let m1 = CMatrix::from_fn(m, m, |i, j| rows[i] + if i == j { lambda2 } else { ZERO });

    let mut p = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut val = e2pi(e.a1 - e.a2 + e.b[i] - e.b[j]) * gap(j);
            for k in (j + 1)..m {
                val *= e2pi_m1(e.b[i] - e.c[k] + e.a2);
            }
            for k in j..m {
                if k != i {
                    val /= guard_denominator(e2pi_m1(e.b[i] - e.b[k]), 1.0, "b circle gaps", i, k)?;
                }
            }
            p[(j, i)] = val;
        }
    }
    let mut q = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut val = e2pi(-(e.a2 * (j as f64 + 1.0) + bc[j])) * gap(j);
            for k in 0..j {
                val *= e2pi_m1(e.b[k] - e.c[i] + e.a2);
            }
            for k in 0..=j {
                if k != i {
                    val /= guard_denominator(e2pi_m1(e.c[k] - e.c[i]), 1.0, "c circle gaps", k, i)?;
                }
            }
            q[(j, i)] = val;
        }
    }
    let r: Vec<Complex64> = (0..m)
        .map(|i| e2pi(-(e.a2 * (i as f64 + 1.0) + bc[i])) * gap(i))
        .collect();

    Ok(MonodromyTriple {
        e: e.clone(),
        m0,
        m1,
        m_inf,
        p,
        q,
        r,
    })
}

/// Closed form of the inverse loop at zero; upper triangular, with the
/// off-diagonal entries independent of the column.
pub fn m0_inverse_closed_form(e: &ExponentSet) -> CMatrix {
    CMatrix::from_fn(e.m, e.m, |i, j| {
        if i > j {
            ZERO
        } else if i == j {
            e2pi(-e.b[i])
        } else {
            e2pi(e.a2 - e.c[i]) * e2pi_m1(e.c[i] - e.b[i] - e.a2)
        }
    })
}

impl MonodromyTriple {
    pub fn m(&self) -> usize {
        self.m0.nrows()
    }

    /// Max entry of M_inf M_1 M_0 - Id.
    pub fn product_residual(&self) -> f64 {
        let prod = self.m_inf.mul(&self.m1).mul(&self.m0);
        prod.max_abs_diff(&CMatrix::identity(self.m()))
    }

    /// Worst relative eigenvector residuals, in the order (p system under
    /// the loop at zero, q system under the loop at infinity, r under the
    /// middle loop).
    pub fn eigen_residuals(&self) -> (f64, f64, f64) {
        let m = self.m();
        let mut worst_p = 0.0f64;
        let mut worst_q = 0.0f64;
        for i in 0..m {
            let pi = self.p.col(i);
            let lhs = self.m0.matvec(&pi);
            let rhs = linalg::vec_scale(&pi, e2pi(self.e.b[i]));
            worst_p = worst_p
                .max(linalg::vec_max_abs_diff(&lhs, &rhs) / linalg::vec_max_abs(&pi).max(1e-300));
            let qi = self.q.col(i);
            let lhs = self.m_inf.matvec(&qi);
            let rhs = linalg::vec_scale(&qi, e2pi(-self.e.c[i]));
            worst_q = worst_q
                .max(linalg::vec_max_abs_diff(&lhs, &rhs) / linalg::vec_max_abs(&qi).max(1e-300));
        }
        let lhs = self.m1.matvec(&self.r);
        let rhs = linalg::vec_scale(&self.r, e2pi(self.e.a1));
        let worst_r = linalg::vec_max_abs_diff(&lhs, &rhs) / linalg::vec_max_abs(&self.r).max(1e-300);
        (worst_p, worst_q, worst_r)
    }

    /// Relative defect of the common normalization sum(p_i) = sum(q_i) = r.
    pub fn normalization_residual(&self) -> f64 {
        let ones = vec![ONE; self.m()];
        let sum_p = self.p.matvec(&ones);
        let sum_q = self.q.matvec(&ones);
        let scale = linalg::vec_max_abs(&self.r).max(1e-300);
        (linalg::vec_max_abs_diff(&sum_p, &self.r).max(linalg::vec_max_abs_diff(&sum_q, &self.r)))
            / scale
    }

    /// Closed-form inverse against the numeric one, relative to the larger
    /// of the closed form's scale and one.
    pub fn m0_inverse_residual(&self) -> Result<f64> {
        let closed = m0_inverse_closed_form(&self.e);
        let numeric = linalg::invert(&self.m0)?;
        Ok(closed.max_abs_diff(&numeric) / closed.max_abs().max(1.0))
    }

    /// Closed-form inverse against M_inf M_1, which telescopes to it
    /// entrywise; measured against the scale of the uncancelled product.
    pub fn m0_factorization_residual(&self) -> f64 {
        let closed = m0_inverse_closed_form(&self.e);
        let via_product = self.m_inf.mul(&self.m1);
        let scale = (self.m_inf.max_abs() * self.m1.max_abs()).max(1.0);
        closed.max_abs_diff(&via_product) / scale
    }

    /// Annihilation residual (M_1 - e^{2 pi i a_1})(M_1 - e^{2 pi i a_2});
    /// vanishing makes the middle loop diagonalizable with exactly those two
    /// eigenvalues.
    pub fn m1_spectral_residual(&self) -> f64 {
        let m = self.m();
        let id = CMatrix::identity(m);
        let f1 = self.m1.sub(&id.scaled(e2pi(self.e.a1)));
        let f2 = self.m1.sub(&id.scaled(e2pi(self.e.a2)));
        f1.mul(&f2).max_abs() / self.m1.max_abs().max(1e-300)
    }

    /// Largest 2x2 minor of M_1 - e^{2 pi i a_2} Id relative to its largest
    /// entry squared, plus a check that the shift is not zero outright; both
    /// together pin the rank at one.
    pub fn m1_shift_rank_residual(&self) -> (f64, f64) {
        let m = self.m();
        let shift = self
            .m1
            .sub(&CMatrix::identity(m).scaled(e2pi(self.e.a2)));
        let scale = shift.max_abs();
        let mut worst = 0.0f64;
        for i in 0..m {
            for k in (i + 1)..m {
                for j in 0..m {
                    for l in (j + 1)..m {
                        let minor = shift[(i, j)] * shift[(k, l)] - shift[(i, l)] * shift[(k, j)];
                        worst = worst.max(minor.norm());
                    }
                }
            }
        }
        (worst / (scale * scale).max(1e-300), scale)
    }
}

/// The pairing in which both triangular eigenbases are orthogonal, built as
/// diag(nu2) in the p coordinates and checked to be diag(mu2) in the q
/// coordinates and invariant under all three loops. Residuals are relative
/// to the largest Gram entry.
#[derive(Clone, Debug)]
pub struct TrigForm {
    pub mu2: Vec<f64>,
    pub nu2: Vec<f64>,
    pub gram: CMatrix,
    pub signature: Signature,
    pub hermiticity_residual: f64,
    pub q_diagonality_residual: f64,
    pub invariance_residual: f64,
}

pub fn hermitian_form_trig(e: &RealExponentSet) -> Result<TrigForm> {
    let ec = e.to_complex();
    let t = build_monodromy(&ec)?;
    let weights = cauchy_weights(&CauchyKind::Trigonometric, &ec)?;
    let p_inv = linalg::invert(&t.p)?;
    let raw = p_inv.adjoint().mul(&CMatrix::diag(&weights.nu2)).mul(&p_inv);
    let scale = raw.max_abs().max(1e-300);
    let hermiticity_residual = raw.max_abs_diff(&raw.adjoint()) / scale;
    let gram = raw.add(&raw.adjoint()).scaled(Complex64::new(0.5, 0.0));
    let in_q = t.q.adjoint().mul(&gram).mul(&t.q);
    let q_diagonality_residual =
        in_q.max_abs_diff(&CMatrix::diag(&weights.mu2)) / in_q.max_abs().max(1e-300);
    let invariance_residual = [&t.m0, &t.m1, &t.m_inf]
        .iter()
        .map(|mx| mx.adjoint().mul(&gram).mul(mx).max_abs_diff(&gram))
        .fold(0.0f64, f64::max)
        / scale;
    let signature = hermitian_signature(&gram, 1e-9)?;
    Ok(TrigForm {
        mu2: weights.mu2.iter().map(|z| z.re).collect(),
        nu2: weights.nu2.iter().map(|z| z.re).collect(),
        gram,
        signature,
        hermiticity_residual,
        q_diagonality_residual,
        invariance_residual,
    })
}

/// Coefficient matrix X with p_j = sum_i X_ij q_i, entrywise
/// e^{pi i (a_1 + b_j - c_i)} nu2_j / sin pi(a_2 + b_j - c_i); equivalently
/// P = Q X.
pub fn p_from_q(e: &ExponentSet) -> Result<CMatrix> {
    let w = cauchy_weights(&CauchyKind::Trigonometric, e)?;
    let mut x = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let s = guard_denominator(
                sin_pi(e.a2 + e.b[j] - e.c[i]),
                1.0,
                "sine kernel zeros",
                i,
                j,
            )?;
            x[(i, j)] = epi(e.a1 + e.b[j] - e.c[i]) * w.nu2[j] / s;
        }
    }
    Ok(x)
}

/// P^{-1} Q entrywise as a ratio of circle gap products.
pub fn pinv_q_closed_form(e: &ExponentSet) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let mut val = ONE;
            for k in 0..e.m {
                if k != i {
                    val *= e2pi_m1(e.b[k] - e.c[j] + e.a2);
                }
                if k != j {
                    val /= guard_denominator(e2pi_m1(e.c[k] - e.c[j]), 1.0, "c circle gaps", k, j)?;
                }
            }
            out[(i, j)] = val;
        }
    }
    Ok(out)
}

/// The same matrix through sines: a pure phase e^{-pi i (a_1 + b_i - c_j)}
/// times a real ratio of sine products whenever the exponents are real.
pub fn pinv_q_sine_form(e: &ExponentSet) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let mut val = epi(-(e.a1 + e.b[i] - e.c[j]));
            for k in 0..e.m {
                if k != i {
                    val *= sin_pi(e.b[k] - e.c[j] + e.a2);
                }
                if k != j {
                    val /= guard_denominator(sin_pi(e.c[k] - e.c[j]), 1.0, "c sine gaps", k, j)?;
                }
            }
            out[(i, j)] = val;
        }
    }
    Ok(out)
}

/// How badly the transpose stand-in M^T G M = G fails for each loop when G
/// is built the same way as the hermitian Gram. Unimodular eigenvalues only
/// cancel against a conjugation, so these residuals stay finite; the verify
/// suite reports them next to the hermitian ones for contrast.
pub fn bilinear_invariance_residuals(e: &ExponentSet) -> Result<[f64; 3]> {
    let t = build_monodromy(e)?;
    let w = cauchy_weights(&CauchyKind::Trigonometric, e)?;
    let p_inv = linalg::invert(&t.p)?;
    let g = p_inv.transpose().mul(&CMatrix::diag(&w.nu2)).mul(&p_inv);
    let scale = g.max_abs().max(1e-300);
    Ok([&t.m0, &t.m1, &t.m_inf]
        .map(|mx| mx.transpose().mul(&g).mul(mx).max_abs_diff(&g) / scale))
}

fn hermitian_basis(m: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(m * m);
    for k in 0..m {
        out.push(CMatrix::from_fn(m, m, |i, j| {
            if i == k && j == k {
                ONE
            } else {
                ZERO
            }
        }));
    }
    for k in 0..m {
        for l in (k + 1)..m {
            out.push(CMatrix::from_fn(m, m, |i, j| {
                if (i, j) == (k, l) || (i, j) == (l, k) {
                    ONE
                } else {
                    ZERO
                }
            }));
            out.push(CMatrix::from_fn(m, m, |i, j| {
                if (i, j) == (k, l) {
                    I
                } else if (i, j) == (l, k) {
                    -I
                } else {
                    ZERO
                }
            }));
        }
    }
    out
}

fn hermitian_coords(g: &CMatrix) -> Vec<f64> {
    let m = g.nrows();
    let mut out = Vec::with_capacity(m * m);
    for k in 0..m {
        out.push(g[(k, k)].re);
    }
    for k in 0..m {
        for l in (k + 1)..m {
            out.push(0.5 * (g[(k, l)].re + g[(l, k)].re));
            out.push(0.5 * (g[(k, l)].im - g[(l, k)].im));
        }
    }
    out
}

/// Dimension of the real space of hermitian G preserved by all three loops,
/// from the spectrum of the normal matrix of the stacked invariance
/// equations over the m^2 coordinates of the hermitian space. A generic
/// triple pins the pairing down to a single ray, so the answer is 1.
pub fn invariant_form_dimension(t: &MonodromyTriple) -> Result<usize> {
    let m = t.m();
    let dim = m * m;
    let basis = hermitian_basis(m);
    let mut normal = vec![0.0f64; dim * dim];
    for loop_op in [&t.m0, &t.m1, &t.m_inf] {
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|g| hermitian_coords(&loop_op.adjoint().mul(g).mul(loop_op).sub(g)))
            .collect();
        for p in 0..dim {
            for q in p..dim {
                let dot: f64 = images[p].iter().zip(&images[q]).map(|(x, y)| x * y).sum();
                normal[p * dim + q] += dot;
                if p != q {
                    normal[q * dim + p] += dot;
                }
            }
        }
    }
    let nmat = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(normal[i * dim + j], 0.0));
    let (eigenvalues, _) = linalg::hermitian_eigen(&nmat, 1e-9)?;
    let top = eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if top == 0.0 {
        return Ok(dim);
    }
    Ok(eigenvalues.iter().filter(|l| l.abs() <= 1e-10 * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{cauchy_inverse_closed_form, cauchy_matrix};
    use crate::params::{
        check_positivity_conditions, make_positivity_set, sample_parameters, sample_real,
        PositivityColumn, SampleMode, DELTA_SEP,
    };

    fn sample(m: usize, seed: u64) -> ExponentSet {
        sample_parameters(m, seed, SampleMode::Complex, DELTA_SEP).unwrap()
    }

    #[test]
    fn triple_product_collapses_to_identity() {
        // real exponents keep every factor on the unit circle, so the
        // product residual is honest at absolute scale
        for m in 2usize..=6 {
            for seed in [21u64, 22, 23] {
                let e = sample_real(m, seed, DELTA_SEP).unwrap().to_complex();
                let t = build_monodromy(&e).unwrap();
                assert!(t.product_residual() <= 1e-11, "m = {}", m);
            }
        }
        // complex exponents inflate intermediate entries by e^{2 pi |Im|}
        // sums, so measure against the product of factor scales there
        for (m, seed) in [(2usize, 3u64), (3, 5), (4, 7), (5, 9), (6, 11)] {
            let t = build_monodromy(&sample(m, seed)).unwrap();
            assert!(t.product_residual() <= 1e-11 * t.m0.max_abs().max(1.0)
                * t.m1.max_abs().max(1.0)
                * t.m_inf.max_abs().max(1.0), "m = {}", m);
        }
        // m = 1 scalars: the product is e^{2 pi i (a_1 + b_1 - c_1)} and the
        // balanced a_1 makes it exactly 1
        let e = ExponentSet::new(
            Complex64::new(0.37, 0.0),
            vec![Complex64::new(0.21, 0.0)],
            vec![Complex64::new(0.68, 0.0)],
            ZERO,
            ZERO,
        )
        .unwrap();
        let t = build_monodromy(&e).unwrap();
        assert!(t.product_residual() <= 1e-15);
        assert!((t.m1[(0, 0)] - e2pi(e.a1)).norm() <= 1e-15);
    }

    #[test]
    fn inverse_loop_matches_its_closed_form() {
        for (m, seed) in [(2usize, 13u64), (4, 17), (5, 19)] {
            let t = build_monodromy(&sample(m, seed)).unwrap();
            assert!(t.m0_inverse_residual().unwrap() <= 1e-10);
            assert!(t.m0_factorization_residual() <= 1e-12);
        }
        let e = sample_real(5, 27, DELTA_SEP).unwrap().to_complex();
        let t = build_monodromy(&e).unwrap();
        assert!(t.m0_inverse_residual().unwrap() <= 1e-10);
        assert!(t.m0_factorization_residual() <= 1e-12);
    }

    #[test]
    fn eigenvector_systems_satisfy_their_relations() {
        for (m, seed) in [(2usize, 29u64), (3, 31), (5, 37)] {
            let t = build_monodromy(&sample(m, seed)).unwrap();
            let (rp, rq, rr) = t.eigen_residuals();
            assert!(rp <= 1e-9 && rq <= 1e-9 && rr <= 1e-9, "m = {}", m);
            assert!(t.normalization_residual() <= 1e-9);
            // diagonals carry the eigenvalues verbatim
            for i in 0..m {
                assert_eq!(t.m0[(i, i)], e2pi(t.e.b[i]));
                assert_eq!(t.m_inf[(i, i)], e2pi(-t.e.c[i]));
            }
        }
        let e = sample_real(4, 41, DELTA_SEP).unwrap().to_complex();
        let t = build_monodromy(&e).unwrap();
        let (rp, rq, rr) = t.eigen_residuals();
        assert!(rp <= 1e-9 && rq <= 1e-9 && rr <= 1e-9);
        assert!(t.normalization_residual() <= 1e-9);
    }

    #[test]
    fn middle_loop_is_a_rank_one_shift() {
        let t = build_monodromy(&sample(4, 43)).unwrap();
        let (minors, scale) = t.m1_shift_rank_residual();
        assert!(minors <= 1e-12);
        assert!(scale > 1e-3);
        assert!(t.m1_spectral_residual() <= 1e-11);
    }

    #[test]
    fn invariant_pairing_is_unique_and_signed_by_the_ladder() {
        // first inequality ladder forces a_2 > a_1 and a positive form
        let e = make_positivity_set(3, PositivityColumn::Column1, 47).unwrap();
        assert_eq!(check_positivity_conditions(&e), PositivityColumn::Column1);
        assert!(e.a2 > e.a1);
        let f = hermitian_form_trig(&e).unwrap();
        assert!(f.hermiticity_residual <= 1e-12);
        assert!(f.q_diagonality_residual <= 1e-9);
        assert!(f.invariance_residual <= 1e-9);
        assert!(f.signature.is_definite());
        assert_eq!(
            f.signature,
            Signature { positive: 3, negative: 0, zero: 0 }
        );
        assert!(f.nu2.iter().all(|x| *x > 0.0) && f.mu2.iter().all(|x| *x > 0.0));

        // second ladder forces a_2 < a_1 and a negative form
        let e = make_positivity_set(3, PositivityColumn::Column2, 53).unwrap();
        assert_eq!(check_positivity_conditions(&e), PositivityColumn::Column2);
        assert!(e.a2 < e.a1);
        let f = hermitian_form_trig(&e).unwrap();
        assert!(f.signature.is_definite());
        assert_eq!(
            f.signature,
            Signature { positive: 0, negative: 3, zero: 0 }
        );

        // outside both ladders the signature is mixed
        let e = make_positivity_set(3, PositivityColumn::Neither, 59).unwrap();
        assert_eq!(check_positivity_conditions(&e), PositivityColumn::Neither);
        let f = hermitian_form_trig(&e).unwrap();
        assert!(f.q_diagonality_residual <= 1e-9);
        assert!(f.invariance_residual <= 1e-9);
        assert!(!f.signature.is_definite());

        // the invariant pairing is one ray in the m^2 dimensional space
        let t = build_monodromy(&e.to_complex()).unwrap();
        assert_eq!(invariant_form_dimension(&t).unwrap(), 1);
    }

    #[test]
    fn scalar_case_pairing_is_the_single_sine() {
        let e = RealExponentSet::new(0.3, vec![0.2], vec![0.55], 0.0, 0.0).unwrap();
        let f = hermitian_form_trig(&e).unwrap();
        let t = build_monodromy(&e.to_complex()).unwrap();
        let expected = (std::f64::consts::PI * (e.a2 + e.b[0] - e.c[0])).sin();
        // the form evaluated on the eigenvectors, not the raw standard-basis
        // entry, carries the sine weight
        let on_p = linalg::sesquilinear(&f.gram, &t.p.col(0), &t.p.col(0));
        let on_q = linalg::sesquilinear(&f.gram, &t.q.col(0), &t.q.col(0));
        assert!((on_p - Complex64::new(expected, 0.0)).norm() <= 1e-12);
        assert!((on_q - Complex64::new(expected, 0.0)).norm() <= 1e-12);
        assert!((f.nu2[0] - expected).abs() <= 1e-14);
        assert!((f.mu2[0] - expected).abs() <= 1e-14);
        assert!(f.invariance_residual <= 1e-12);
        // a_2 < a_1 here, so the single diagonal entry is negative
        assert_eq!(
            f.signature,
            Signature { positive: 0, negative: 1, zero: 0 }
        );
        assert_eq!(check_positivity_conditions(&e), PositivityColumn::Column2);
    }

    #[test]
    fn connection_coefficients_link_the_two_eigenbases() {
        for (m, seed) in [(2usize, 61u64), (3, 67), (5, 71)] {
            let e = sample(m, seed);
            let t = build_monodromy(&e).unwrap();
            let x = p_from_q(&e).unwrap();
            let rebuilt = t.q.mul(&x);
            assert!(
                rebuilt.max_abs_diff(&t.p) / t.p.max_abs() <= 1e-9,
                "m = {}",
                m
            );

            // the same coefficients through the sine-kernel inverse
            let w = cauchy_weights(&CauchyKind::Trigonometric, &e).unwrap();
            let dinv = cauchy_inverse_closed_form(&CauchyKind::Trigonometric, &e).unwrap();
            let left = CMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    epi(e.a1 - e.c[i]) / w.mu2[i]
                } else {
                    ZERO
                }
            });
            let right = CMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    epi(e.b[i])
                } else {
                    ZERO
                }
            });
            let x2 = left.mul(&dinv).mul(&right);
            assert!(x.max_abs_diff(&x2) / x.max_abs() <= 1e-12);
        }

        // m = 1 the coefficient collapses to exactly 1
        let e = ExponentSet::new(
            Complex64::new(0.37, 0.0),
            vec![Complex64::new(0.21, 0.0)],
            vec![Complex64::new(0.68, 0.0)],
            ZERO,
            ZERO,
        )
        .unwrap();
        let x = p_from_q(&e).unwrap();
        assert!((x[(0, 0)] - ONE).norm() <= 1e-12);
    }

    #[test]
    fn column_ratio_matrix_matches_both_printed_expressions() {
        let e = sample(4, 73);
        let t = build_monodromy(&e).unwrap();
        let closed = pinv_q_closed_form(&e).unwrap();
        let numeric = linalg::invert(&t.p).unwrap().mul(&t.q);
        assert!(numeric.max_abs_diff(&closed) / closed.max_abs() <= 1e-10);
        let sine = pinv_q_sine_form(&e).unwrap();
        assert!(sine.max_abs_diff(&closed) / closed.max_abs() <= 1e-12);

        // matrix notation: the whole thing is a phase conjugation of the
        // sine-kernel matrix times its column weights
        let w = cauchy_weights(&CauchyKind::Trigonometric, &e).unwrap();
        let d = cauchy_matrix(&CauchyKind::Trigonometric, &e).unwrap();
        let m = e.m;
        let left = CMatrix::from_fn(m, m, |i, j| if i == j { epi(-(e.a1 + e.b[i])) } else { ZERO });
        let right = CMatrix::from_fn(m, m, |i, j| {
            if i == j {
                w.mu2[i] * epi(e.c[i])
            } else {
                ZERO
            }
        });
        let assembled = left.mul(&d).mul(&right);
        assert!(assembled.max_abs_diff(&closed) / closed.max_abs() <= 1e-12);

        // real exponents leave a real matrix after stripping the phase
        let e = sample_real(4, 79, DELTA_SEP).unwrap().to_complex();
        let closed = pinv_q_closed_form(&e).unwrap();
        let scale = closed.max_abs();
        for i in 0..e.m {
            for j in 0..e.m {
                let stripped = closed[(i, j)] * epi(e.a1 + e.b[i] - e.c[j]);
                assert!(stripped.im.abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn bilinear_substitute_fails_where_hermitian_holds() {
        let e = sample_real(3, 83, DELTA_SEP).unwrap();
        let f = hermitian_form_trig(&e).unwrap();
        assert!(f.invariance_residual <= 1e-9);
        let bil = bilinear_invariance_residuals(&e.to_complex()).unwrap();
        assert!(bil.iter().cloned().fold(0.0f64, f64::max) > 1e-3);
    }

    #[test]
    fn frobenius_basis_loops_back_scaled_by_its_exponents() {
        // transport the local fundamental matrix once around zero along an
        // octagon; each column returns multiplied by its diagonal eigenvalue
        let e = crate::series::with_zero_a2(&sample(3, 89)).unwrap();
        let t = crate::residue::build_residue_triple(&e).unwrap();
        let radius = 0.3;
        let start_cols: Vec<Vec<Complex64>> = (0..e.m)
            .map(|i| {
                crate::series::mhgs_frobenius(&t, crate::series::BasePoint::Zero, i, 80)
                    .unwrap()
                    .eval(Complex64::new(radius, 0.0))
                    .unwrap()
            })
            .collect();
        let start = CMatrix::from_cols(&start_cols);
        let vertex = |k: usize| Complex64::from_polar(radius, TAU * k as f64 / 8.0);
        let mut f = start.clone();
        for k in 0..8 {
            let z0 = vertex(k);
            let z1 = if k == 7 { vertex(0) } else { vertex(k + 1) };
            f = crate::series::mhgs_ode_continue(&t, &f, z0, z1, 1200).unwrap();
        }
        let scaled = CMatrix::from_fn(e.m, e.m, |i, j| start[(i, j)] * e2pi(e.b[j]));
        assert!(f.max_abs_diff(&scaled) / start.max_abs() <= 1e-8);
    }

    #[test]
    fn degenerate_parameter_sets_are_rejected() {
        // b collision within the integer guard
        let e = ExponentSet::new(
            Complex64::new(0.4, 0.0),
            vec![Complex64::new(0.2, 0.0), Complex64::new(0.2 + 1e-9, 0.0)],
            vec![Complex64::new(0.5, 0.0), Complex64::new(0.9, 0.0)],
            ZERO,
            ZERO,
        )
        .unwrap();
        assert!(matches!(build_monodromy(&e), Err(Error::Genericity(_))));

        // a_2 tuned to put a sine-kernel argument on an integer; generic for
        // the circle products but fatal for the connection coefficients
        let b = [0.11, 0.43];
        let c = [0.58, 0.86];
        let e = ExponentSet::new(
            Complex64::new(c[0] - b[1], 0.0),
            b.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            c.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            ZERO,
            ZERO,
        )
        .unwrap();
        assert!(build_monodromy(&e).is_ok());
        assert!(matches!(p_from_q(&e), Err(Error::Resonance { .. })));
    }
}
