//! Cauchy-type matrices in three flavors. The kernel is a linear form, a
//! sine, or the elliptic sine; in every flavor the inverse is again a
//! Cauchy-type matrix with explicit weight factors and the determinant
//! factorizes into products of pair differences. For the linear and sine
//! kernels the inverse reuses the kernel itself, both in the weights and
//! entrywise, and N D M is complex orthogonal. The doubly periodic kernel
//! does not close on itself that way: its exact inverse needs the entire
//! lattice factor E in the weights and a dual kernel whose zero set is
//! displaced by the total argument sum S = m a2 + sum(b_k - c_k). When the
//! exponents balance to S = 0 the dual kernel collapses back to 1/sn, and
//! in the wide-lattice limit the displacement dies out entirely, which is
//! why the sine-kernel identity holds verbatim.

use crate::elliptic::{inv_sn, lattice_factor, LatticeSpec};
use crate::linalg::CMatrix;
use crate::params::ExponentSet;
use crate::{guard_denominator, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug)]
pub enum CauchyKind {
    /// Linear kernel x with a constant shift tau added to every
    /// cross argument a2 + b_i - c_j.
    Rational(Complex64),
    /// Kernel sin(pi x), no shift.
    Trigonometric,
    /// Kernel sn(x) on the given lattice, no shift.
    Elliptic(LatticeSpec),
}

impl CauchyKind {
    /// Shift applied to cross arguments only; difference arguments
    /// b_i - b_k, c_k - c_i stay unshifted.
    pub fn shift(&self) -> Complex64 {
        match self {
            CauchyKind::Rational(tau) => *tau,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn kernel(&self, x: Complex64) -> Result<Complex64> {
        match self {
            CauchyKind::Rational(_) => Ok(x),
            CauchyKind::Trigonometric => Ok((PI * x).sin()),
            CauchyKind::Elliptic(l) => Ok(ONE / inv_sn(x, l)?.value),
        }
    }

    fn cross_kernel(&self, x: Complex64) -> Result<Complex64> {
        self.kernel(x + self.shift())
    }

    /// The factor the inverse-side weights are products of. For the linear
    /// and sine kernels this is the kernel itself. For the doubly periodic
    /// kernel it is the entire lattice factor E, not sn: only E-products
    /// make the closed-form inverse exact.
    fn weight_factor(&self, x: Complex64) -> Result<Complex64> {
        match self {
            CauchyKind::Elliptic(l) => Ok(lattice_factor(x, l)),
            _ => self.kernel(x),
        }
    }

    fn cross_weight_factor(&self, x: Complex64) -> Result<Complex64> {
        self.weight_factor(x + self.shift())
    }

    /// Sum of all cross arguments, m*a2 + sum(b_k - c_k); under the trace
    /// condition this equals a2 - a1. The dual kernel's zeros sit at
    /// lattice translates of S + omega2/2.
    fn argument_sum(&self, e: &ExponentSet) -> Complex64 {
        let mut s = (e.m as f64) * (e.a2 + self.shift());
        for k in 0..e.m {
            s += e.b[k] - e.c[k];
        }
        s
    }

    /// The kernel the inverse is built on. Self-dual for the linear and
    /// sine kernels; for the doubly periodic kernel the reciprocal's zero
    /// set shifts by the argument sum s:
    /// K_s(z) = e^{i pi z/omega1} E(s - omega2/2 - z) / (E(s - omega2/2) E(z)).
    /// K_0 is 1/sn again, so balanced exponents are the self-dual case.
    fn dual_kernel_reciprocal(
        &self,
        z: Complex64,
        s: Complex64,
        scale: f64,
    ) -> Result<Complex64> {
        match self {
            CauchyKind::Elliptic(l) => {
                let i = Complex64::i();
                let shifted = s - 0.5 * l.omega2;
                let den = lattice_factor(shifted, l) * lattice_factor(z, l);
                Ok((i * PI * z / l.omega1).exp() * lattice_factor(shifted - z, l)
                    / guard_denominator(den, scale, "dual kernel", 0, 0)?)
            }
            _ => Ok(ONE / guard_denominator(self.kernel(z)?, scale, "dual kernel", 0, 0)?),
        }
    }
}

/// The inverse-side weights mu_i^2 (over rows of the inverse) and nu_j^2
/// (over columns). Products of the kernel for the linear and sine kinds,
/// products of the entire lattice factor for the doubly periodic kind.
#[derive(Clone, Debug)]
pub struct WeightPair {
    pub mu2: Vec<Complex64>,
    pub nu2: Vec<Complex64>,
}

pub fn cauchy_weights(kind: &CauchyKind, e: &ExponentSet) -> Result<WeightPair> {
    let m = e.m;
    let scale = e.scale();
    let mut mu2 = Vec::with_capacity(m);
    let mut nu2 = Vec::with_capacity(m);
    for i in 0..m {
        let mut num = ONE;
        let mut den = ONE;
        for k in 0..m {
            num *= kind.cross_weight_factor(e.a2 + e.b[k] - e.c[i])?;
            if k != i {
                den *= kind.weight_factor(e.c[k] - e.c[i])?;
            }
        }
        mu2.push(num / guard_denominator(den, scale, "cauchy mu denominators", i, i)?);
        let mut num = ONE;
        let mut den = ONE;
        for k in 0..m {
            num *= kind.cross_weight_factor(e.a2 + e.b[i] - e.c[k])?;
            if k != i {
                den *= kind.weight_factor(e.b[i] - e.b[k])?;
            }
        }
        nu2.push(num / guard_denominator(den, scale, "cauchy nu denominators", i, i)?);
    }
    Ok(WeightPair { mu2, nu2 })
}

/// D_ij = 1 / K(a2 + b_i - c_j + shift).
pub fn cauchy_matrix(kind: &CauchyKind, e: &ExponentSet) -> Result<CMatrix> {
    let scale = e.scale();
    let mut d = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let k = kind.cross_kernel(e.a2 + e.b[i] - e.c[j])?;
            d[(i, j)] = ONE / guard_denominator(k, scale, "cauchy kernel", i, j)?;
        }
    }
    Ok(d)
}

/// The inverse in closed form: (D^-1)_ij = mu_i^2 nu_j^2 times the dual
/// kernel reciprocal at the transposed argument a2 + b_j - c_i + shift.
/// For the linear and sine kernels the dual kernel is the kernel itself;
/// for the doubly periodic kernel it carries the argument-sum shift.
pub fn cauchy_inverse_closed_form(kind: &CauchyKind, e: &ExponentSet) -> Result<CMatrix> {
    let w = cauchy_weights(kind, e)?;
    let scale = e.scale();
    let s = kind.argument_sum(e);
    let mut inv = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let z = e.a2 + e.b[j] - e.c[i] + kind.shift();
            inv[(i, j)] = w.mu2[i] * w.nu2[j] * kind.dual_kernel_reciprocal(z, s, scale)?;
        }
    }
    Ok(inv)
}

/// Closed-form determinant of the plain difference matrix 1/K(b_i - c_j):
/// products of pair differences over products of all cross differences,
/// every factor passed through the weight factor. The doubly periodic
/// kernel adds the prefactor -e^{-i pi s/omega1} E(s - omega2/2)/E(omega2/2)
/// with s = sum(b_k - c_k); its wide-lattice limit is 1, and the linear
/// and sine kinds need no prefactor at all.
pub fn cauchy_determinant(e: &ExponentSet, kind: &CauchyKind) -> Result<Complex64> {
    let m = e.m;
    let scale = e.scale();
    let mut num = ONE;
    for i in 0..m {
        for j in i + 1..m {
            num *= kind.weight_factor(e.b[i] - e.b[j])?;
            num *= kind.weight_factor(e.c[j] - e.c[i])?;
        }
    }
    // guard factor by factor: the full product can be legitimately tiny
    let mut den = ONE;
    for i in 0..m {
        for j in 0..m {
            let f = kind.weight_factor(e.b[i] - e.c[j])?;
            den *= guard_denominator(f, scale, "cauchy determinant", i, j)?;
        }
    }
    let pref = match kind {
        CauchyKind::Elliptic(l) => {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..m {
                s += e.b[k] - e.c[k];
            }
            let half = 0.5 * l.omega2;
            -(-Complex64::i() * PI * s / l.omega1).exp() * lattice_factor(s - half, l)
                / lattice_factor(half, l)
        }
        _ => ONE,
    };
    Ok(pref * num / den)
}

/// The matrix whose determinant `cauchy_determinant` factorizes:
/// entries 1/K(b_i - c_j), no shift and no a2.
pub fn difference_kernel_matrix(e: &ExponentSet, kind: &CauchyKind) -> Result<CMatrix> {
    let scale = e.scale();
    let mut d = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let k = kind.kernel(e.b[i] - e.c[j])?;
            d[(i, j)] = ONE / guard_denominator(k, scale, "cauchy kernel", i, j)?;
        }
    }
    Ok(d)
}

/// Residual of the complex-orthogonality form of the inverse identity:
/// with N = diag(nu_i), M = diag(mu_i) (principal roots; any consistent
/// branch cancels), (N D M) (N D* M)^t = Id, where D* is the matrix of
/// dual kernel reciprocals at the plain (untransposed) arguments. The
/// linear and sine kernels are self-dual, so D* = D there and this is the
/// classical statement (N D M)^t = (N D M)^{-1}.
pub fn ndm_orthogonality(e: &ExponentSet, kind: &CauchyKind) -> Result<f64> {
    let d = cauchy_matrix(kind, e)?;
    let w = cauchy_weights(kind, e)?;
    let scale = e.scale();
    let s = kind.argument_sum(e);
    let m = e.m;
    let mut p = CMatrix::zeros(m, m);
    let mut q = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let ni = w.nu2[i].sqrt();
            let mj = w.mu2[j].sqrt();
            p[(i, j)] = ni * d[(i, j)] * mj;
            let z = e.a2 + e.b[i] - e.c[j] + kind.shift();
            q[(i, j)] = ni * kind.dual_kernel_reciprocal(z, s, scale)? * mj;
        }
    }
    Ok(p.mul(&q.transpose()).max_abs_diff(&CMatrix::identity(m)))
}

/// Conditioning margin: the smallest of |K| and 1/|K| over all cross
/// arguments a2 + b_i - c_j (+ shift), so it is small when any argument
/// approaches either a kernel zero or a kernel pole. Closed-form
/// identities hold for any generic set, but f64 residuals degrade as this
/// margin shrinks; samplers redraw below 0.05.
pub fn kernel_margin(kind: &CauchyKind, e: &ExponentSet) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for i in 0..e.m {
        for j in 0..e.m {
            let k = kind.cross_kernel(e.a2 + e.b[i] - e.c[j])?.norm();
            margin = margin.min(k).min(1.0 / k);
        }
    }
    Ok(margin)
}

/// Exponent set with the roles of 0 and infinity switched: b' = -c, c' = -b.
/// The derived a1 and every weight trade places under the swap.
pub fn swap_zero_infinity(e: &ExponentSet) -> Result<ExponentSet> {
    let b: Vec<Complex64> = e.c.iter().map(|x| -x).collect();
    let c: Vec<Complex64> = e.b.iter().map(|x| -x).collect();
    ExponentSet::new(e.a2, b, c, e.k1, e.k2)
}

impl std::fmt::Display for CauchyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CauchyKind::Rational(tau) => write!(f, "rational(tau={tau})"),
            CauchyKind::Trigonometric => write!(f, "trig"),
            CauchyKind::Elliptic(l) => write!(f, "elliptic(omega2={})", l.omega2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{det, invert};
    use crate::params::{sample_parameters, sample_real, SampleMode, DELTA_SEP};
    use crate::residue;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kinds(seed_lattice: f64) -> Vec<CauchyKind> {
        vec![
            CauchyKind::Rational(cx(0.37, 0.11)),
            CauchyKind::Trigonometric,
            CauchyKind::Elliptic(
                LatticeSpec::new(Complex64::new(1.0, 0.0), cx(0.0, seed_lattice)).unwrap(),
            ),
        ]
    }

    #[test]
    fn rational_weights_match_the_residue_module() {
        let e = sample_parameters(3, 11, SampleMode::Complex, DELTA_SEP).unwrap();
        let tau = cx(0.21, -0.05);
        let w = cauchy_weights(&CauchyKind::Rational(tau), &e).unwrap();
        let nu = residue::nu2(&e, tau).unwrap();
        let mu = residue::mu2(&e, tau).unwrap();
        for i in 0..3 {
            assert!((w.nu2[i] - nu[i]).norm() < 1e-12);
            assert!((w.mu2[i] - mu[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_cases_are_forced() {
        // m = 1 rational with kernel argument 2: D = (1/2), inverse = (2)
        let e = ExponentSet::new(
            cx(0.5, 0.0),
            vec![cx(0.9, 0.0)],
            vec![cx(0.2, 0.0)],
            cx(0.3, 0.0),
            cx(0.4, 0.0),
        )
        .unwrap();
        let kind = CauchyKind::Rational(cx(0.8, 0.0));
        let d = cauchy_matrix(&kind, &e).unwrap();
        assert!((d[(0, 0)] - 0.5).norm() < 1e-15);
        let inv = cauchy_inverse_closed_form(&kind, &e).unwrap();
        assert!((inv[(0, 0)] - 2.0).norm() < 1e-15);
        assert!(ndm_orthogonality(&e, &kind).unwrap() < 1e-14);
        // trig kernel at argument 1/2: sin(pi/2) = 1
        let et = ExponentSet::new(
            cx(0.5, 0.0),
            vec![cx(0.3, 0.0)],
            vec![cx(0.3, 0.0)],
            cx(0.0, 0.0),
            cx(0.0, 0.0),
        )
        .unwrap();
        let dt = cauchy_matrix(&CauchyKind::Trigonometric, &et).unwrap();
        assert!((dt[(0, 0)] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn closed_form_inverse_inverts_in_all_flavors() {
        let second = CauchyKind::Elliptic(
            LatticeSpec::new(Complex64::new(1.0, 0.0), cx(1.0, 1.5)).unwrap(),
        );
        for (m, seed, kind, tol) in [
            (3usize, 43u64, kinds(0.8)[0], 1e-11),
            (5, 45, kinds(0.8)[0], 1e-10),
            (5, 42, kinds(0.8)[1], 1e-10),
            (4, 40, kinds(0.8)[2], 1e-10),
            (5, 41, second, 1e-10),
        ] {
            let e = sample_parameters(m, seed, SampleMode::Complex, DELTA_SEP).unwrap();
            assert!(kernel_margin(&kind, &e).unwrap() > 0.05, "margin too small");
            let d = cauchy_matrix(&kind, &e).unwrap();
            let inv = cauchy_inverse_closed_form(&kind, &e).unwrap();
            let r = d.mul(&inv).max_abs_diff(&CMatrix::identity(m));
            assert!(r <= tol, "kind={kind} m={m} residual={r:e}");
            let numeric = invert(&d).unwrap();
            let diff = inv.max_abs_diff(&numeric) / numeric.max_abs();
            assert!(diff <= tol * 10.0, "kind={kind} vs numeric {diff:e}");
        }
    }

    #[test]
    fn balanced_exponents_make_the_kernel_self_dual() {
        // when m a2 + sum(b - c) = 0 the dual kernel is 1/sn itself, so the
        // inverse is weight products over plain kernel values, transposed
        let a2 = cx(0.19, 0.01);
        let b = vec![cx(0.08, 0.02), cx(0.33, -0.04), cx(0.61, 0.01)];
        let mut c = vec![cx(0.22, 0.03), cx(0.49, -0.02), cx(0.0, 0.0)];
        c[2] = 3.0 * a2 + (b[0] + b[1] + b[2]) - c[0] - c[1];
        let e = ExponentSet::new(a2, b, c, cx(0.3, 0.0), cx(0.4, 0.0)).unwrap();
        let l = LatticeSpec::new(Complex64::new(1.0, 0.0), cx(0.0, 0.8)).unwrap();
        let kind = CauchyKind::Elliptic(l);
        assert!(kind.argument_sum(&e).norm() < 1e-14);
        let w = cauchy_weights(&kind, &e).unwrap();
        let d = cauchy_matrix(&kind, &e).unwrap();
        let mut inv = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                inv[(i, j)] =
                    w.mu2[i] * w.nu2[j] * inv_sn(e.a2 + e.b[j] - e.c[i], &l).unwrap().value;
            }
        }
        let r = d.mul(&inv).max_abs_diff(&CMatrix::identity(3));
        assert!(r < 1e-10, "residual={r:e}");
    }

    #[test]
    fn determinants_factorize_through_the_kernel() {
        for (kind, tol) in [
            (kinds(0.8)[0], 1e-9),
            (kinds(0.8)[1], 1e-9),
            (kinds(0.8)[2], 1e-9),
        ] {
            let m = if matches!(kind, CauchyKind::Rational(_)) { 5 } else { 3 };
            let e = sample_parameters(m, 7, SampleMode::Complex, DELTA_SEP).unwrap();
            let closed = cauchy_determinant(&e, &kind).unwrap();
            let lu = det(&difference_kernel_matrix(&e, &kind).unwrap());
            assert!(
                (closed - lu).norm() <= tol * closed.norm(),
                "kind={kind} closed={closed} lu={lu}"
            );
        }
    }

    #[test]
    fn symmetrized_matrix_is_complex_orthogonal() {
        for (kind, tol) in [
            (kinds(0.8)[0], 1e-9),
            (kinds(0.8)[1], 1e-9),
            (kinds(0.8)[2], 1e-9),
        ] {
            let e = sample_parameters(3, 23, SampleMode::Complex, DELTA_SEP).unwrap();
            let r = ndm_orthogonality(&e, &kind).unwrap();
            assert!(r <= tol, "kind={kind} residual={r:e}");
        }
    }

    #[test]
    fn switching_zero_and_infinity_transposes_the_inverse() {
        let e = sample_parameters(4, 31, SampleMode::Complex, DELTA_SEP).unwrap();
        for kind in kinds(0.8) {
            let inv = cauchy_inverse_closed_form(&kind, &e).unwrap();
            let swapped = cauchy_inverse_closed_form(&kind, &swap_zero_infinity(&e).unwrap());
            let swapped = swapped.unwrap();
            let diff = swapped.max_abs_diff(&inv.transpose()) / inv.max_abs();
            assert!(diff < 1e-10, "kind={kind} diff={diff:e}");
        }
    }

    #[test]
    fn elliptic_flavor_degenerates_to_trig() {
        // on a lattice with a huge imaginary period, sn(x) -> sin(pi x)/pi,
        // so pi * (elliptic inverse) -> trig inverse entry by entry
        let e = sample_real(3, 17, DELTA_SEP).unwrap().to_complex();
        let ell = CauchyKind::Elliptic(
            LatticeSpec::new(Complex64::new(1.0, 0.0), cx(0.0, 30.0)).unwrap(),
        );
        let trig = CauchyKind::Trigonometric;
        let a = cauchy_inverse_closed_form(&ell, &e).unwrap().scaled(cx(PI, 0.0));
        let b = cauchy_inverse_closed_form(&trig, &e).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-6);
        let we = cauchy_weights(&ell, &e).unwrap();
        let wt = cauchy_weights(&trig, &e).unwrap();
        for i in 0..3 {
            assert!((we.mu2[i] * PI - wt.mu2[i]).norm() < 1e-6);
            assert!((we.nu2[i] * PI - wt.nu2[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn elliptic_entries_come_from_the_series() {
        let e = sample_parameters(3, 29, SampleMode::Complex, DELTA_SEP).unwrap();
        let l = LatticeSpec::new(Complex64::new(1.0, 0.0), cx(0.0, 0.8)).unwrap();
        let d = cauchy_matrix(&CauchyKind::Elliptic(l), &e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct = inv_sn(e.a2 + e.b[i] - e.c[j], &l).unwrap().value;
                assert!((d[(i, j)] - direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn classical_inverse_is_exact_in_rational_arithmetic() {
        // a2 = tau = 0 with integer b, c: weights and kernel live in Q, and
        // D * D^-1 must be the identity with no rounding at all
        let q = |n: i64| BigRational::from(BigInt::from(n));
        let b: Vec<BigRational> = [1, 3, 7, 12].iter().map(|&n| q(n)).collect();
        let c: Vec<BigRational> = [2, 5, 9, 15].iter().map(|&n| q(n)).collect();
        let m = 4;
        let d: Vec<Vec<BigRational>> = (0..m)
            .map(|i| (0..m).map(|j| q(1) / (&b[i] - &c[j])).collect())
            .collect();
        let mu2: Vec<BigRational> = (0..m)
            .map(|i| {
                let mut v = q(1);
                for k in 0..m {
                    v = v * (&b[k] - &c[i]);
                    if k != i {
                        v = v / (&c[k] - &c[i]);
                    }
                }
                v
            })
            .collect();
        let nu2: Vec<BigRational> = (0..m)
            .map(|j| {
                let mut v = q(1);
                for k in 0..m {
                    v = v * (&b[j] - &c[k]);
                    if k != j {
                        v = v / (&b[j] - &b[k]);
                    }
                }
                v
            })
            .collect();
        for i in 0..m {
            for j in 0..m {
                let mut s = BigRational::from(BigInt::from(0));
                for k in 0..m {
                    s += &d[i][k] * &mu2[k] * &nu2[j] / (&b[j] - &c[k]);
                }
                assert_eq!(s, if i == j { q(1) } else { q(0) }, "entry ({i},{j})");
            }
        }
    }
}
