//! The additive triple (A, B, C) of residue matrices with A + B + C = 0,
//! their triangular eigenvector systems V, W, the distinguished vector u,
//! and the symmetric bilinear form that makes the eigenbases orthogonal.
//!
//! B is upper triangular with diagonal b_i, C lower triangular with diagonal
//! -c_i; both have rank-one-coupled off-diagonals built from a2 + b_i - c_j.
//! A is defined as -(B + C); its spectrum is a1 (simple, eigenvector u) and
//! a2 with multiplicity m - 1.

use crate::linalg::{bilinear, CMatrix, ONE, ZERO};
use crate::params::ExponentSet;
use crate::{guard_denominator, Result};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct ResidueTriple {
    pub e: ExponentSet,
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    /// Columns are the eigenvectors v_i of B (eigenvalue b_i); upper triangular.
    pub v: CMatrix,
    /// Columns are the eigenvectors w_i of C (eigenvalue -c_i); lower triangular.
    pub w: CMatrix,
    /// u_i = b_i - c_i + a2; common eigenvector of A and column sum of V and W.
    pub u: Vec<Complex64>,
}

/// nu^2_i(tau) = prod_k (a2 + b_i - c_k + tau) / prod_{k != i} (b_i - b_k).
pub fn nu2(e: &ExponentSet, tau: Complex64) -> Result<Vec<Complex64>> {
    let scale = e.scale();
    (0..e.m)
        .map(|i| {
            let mut val = ONE;
            for k in 0..e.m {
                val *= e.a2 + e.b[i] - e.c[k] + tau;
                if k != i {
                    val /= guard_denominator(e.b[i] - e.b[k], scale, "b-b", i, k)?;
                }
            }
            Ok(val)
        })
        .collect()
}

/// mu^2_i(tau) = prod_k (a2 + b_k - c_i + tau) / prod_{k != i} (c_k - c_i).
pub fn mu2(e: &ExponentSet, tau: Complex64) -> Result<Vec<Complex64>> {
    let scale = e.scale();
    (0..e.m)
        .map(|i| {
            let mut val = ONE;
            for k in 0..e.m {
                val *= e.a2 + e.b[k] - e.c[i] + tau;
                if k != i {
                    val /= guard_denominator(e.c[k] - e.c[i], scale, "c-c", k, i)?;
                }
            }
            Ok(val)
        })
        .collect()
}

pub fn build_residue_triple(e: &ExponentSet) -> Result<ResidueTriple> {
    let m = e.m;
    let scale = e.scale();
    let b_mat = CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            e.b[i]
        } else if i < j {
            e.a2 + e.b[i] - e.c[i]
        } else {
            ZERO
        }
    });
    // below-diagonal coupling is row-constant (j-free), like B's mirror;
    // forced by A + B + C = 0 together with C w_i = -c_i w_i
    let c_mat = CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            -e.c[i]
        } else if i > j {
            e.a2 + e.b[i] - e.c[i]
        } else {
            ZERO
        }
    });
    let a_mat = b_mat.add(&c_mat).scaled(-ONE);

    let u: Vec<Complex64> = (0..m).map(|i| e.b[i] - e.c[i] + e.a2).collect();

    // v_i has support on components 1..=i, w_i on components i..=m
    let mut v = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut val = e.b[j] - e.c[j] + e.a2;
            for k in j + 1..m {
                val *= e.b[i] - e.c[k] + e.a2;
            }
            for k in j..m {
                if k != i {
                    val /= guard_denominator(e.b[i] - e.b[k], scale, "b-b", i, k)?;
                }
            }
            v[(j, i)] = val;
        }
    }
    let mut w = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut val = e.b[j] - e.c[j] + e.a2;
            for k in 0..j {
                val *= e.b[k] - e.c[i] + e.a2;
            }
            for k in 0..=j {
                if k != i {
                    val /= guard_denominator(e.c[k] - e.c[i], scale, "c-c", k, i)?;
                }
            }
            w[(j, i)] = val;
        }
    }

    Ok(ResidueTriple {
        e: e.clone(),
        a: a_mat,
        b: b_mat,
        c: c_mat,
        v,
        w,
        u,
    })
}

impl ResidueTriple {
    pub fn m(&self) -> usize {
        self.e.m
    }

    /// Largest residual over the defining eigen-relations:
    /// B v_i = b_i v_i, C w_i = -c_i w_i, A u = a1 u, sum v_i = sum w_i = u.
    pub fn eigen_residual(&self) -> f64 {
        let m = self.m();
        let mut worst = (self.a.add(&self.b).add(&self.c)).max_abs();
        let mut sum_v = vec![ZERO; m];
        let mut sum_w = vec![ZERO; m];
        for i in 0..m {
            let vi = self.v.col(i);
            let bv = self.b.matvec(&vi);
            for j in 0..m {
                worst = worst.max((bv[j] - self.e.b[i] * vi[j]).norm());
                sum_v[j] += vi[j];
            }
            let wi = self.w.col(i);
            let cw = self.c.matvec(&wi);
            for j in 0..m {
                worst = worst.max((cw[j] + self.e.c[i] * wi[j]).norm());
                sum_w[j] += wi[j];
            }
        }
        let au = self.a.matvec(&self.u);
        for j in 0..m {
            worst = worst.max((au[j] - self.e.a1 * self.u[j]).norm());
            worst = worst.max((sum_v[j] - self.u[j]).norm());
            worst = worst.max((sum_w[j] - self.u[j]).norm());
        }
        worst
    }

    /// The two eigenbases span opposite full flags: V is upper triangular
    /// with nonzero diagonal, W lower triangular with nonzero diagonal, and
    /// u avoids every coordinate hyperplane.
    pub fn check_flag_general_position(&self) -> bool {
        let m = self.m();
        let scale = self.v.max_abs().max(self.w.max_abs());
        for i in 0..m {
            if self.v[(i, i)].norm() < 1e-12 * scale || self.w[(i, i)].norm() < 1e-12 * scale {
                return false;
            }
            if self.u[i].norm() < 1e-12 * self.e.scale() {
                return false;
            }
            for j in 0..m {
                if i > j && self.v[(i, j)] != ZERO {
                    return false;
                }
                if i < j && self.w[(i, j)] != ZERO {
                    return false;
                }
            }
        }
        true
    }
}

/// The symmetric bilinear form in which both eigenbases are orthogonal:
/// (v_i, v_j) = delta_ij nu^2_i and (w_i, w_j) = delta_ij mu^2_i.
#[derive(Clone, Debug)]
pub struct ResidueForm {
    pub nu2: Vec<Complex64>,
    pub mu2: Vec<Complex64>,
    /// Gram matrix of the form in the standard basis.
    pub gram: CMatrix,
}

pub fn residue_form(t: &ResidueTriple) -> Result<ResidueForm> {
    let nu2 = nu2(&t.e, ZERO)?;
    let mu2 = mu2(&t.e, ZERO)?;
    let v_inv = crate::linalg::invert(&t.v)?;
    let gram = v_inv.transpose().mul(&CMatrix::diag(&nu2)).mul(&v_inv);
    Ok(ResidueForm { nu2, mu2, gram })
}

impl ResidueForm {
    /// Residual of the w-orthogonality W^T G W = diag(mu^2); this is the
    /// nontrivial content of the form (the v side holds by construction).
    pub fn w_orthogonality_residual(&self, t: &ResidueTriple) -> f64 {
        let wgw = t.w.transpose().mul(&self.gram).mul(&t.w);
        wgw.max_abs_diff(&CMatrix::diag(&self.mu2))
    }

    /// Residual of (u, u) = a2 - a1.
    pub fn u_length_residual(&self, t: &ResidueTriple) -> f64 {
        (bilinear(&self.gram, &t.u, &t.u) - (t.e.a2 - t.e.a1)).norm()
    }

    /// Residual of A acting as x -> a2 x - (x, u) u on the whole space,
    /// equivalently A = a2 Id - u (G u)^T.
    pub fn a_reflection_residual(&self, t: &ResidueTriple) -> f64 {
        let m = t.m();
        let gu = self.gram.matvec(&t.u);
        let rank_one = CMatrix::outer(&t.u, &gu);
        let expect = CMatrix::identity(m).scaled(t.e.a2).sub(&rank_one);
        t.a.max_abs_diff(&expect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Signature;
    use crate::params::{
        make_positivity_set, sample_parameters, PositivityColumn, SampleMode, DELTA_SEP,
    };

    fn sample(m: usize, seed: u64) -> ExponentSet {
        sample_parameters(m, seed, SampleMode::Complex, DELTA_SEP).unwrap()
    }

    #[test]
    fn m1_collapses_to_scalars() {
        let e = ExponentSet::new(
            Complex64::new(0.9, 0.0),
            vec![Complex64::new(0.3, 0.0)],
            vec![Complex64::new(0.7, 0.0)],
            ZERO,
            ZERO,
        )
        .unwrap();
        let t = build_residue_triple(&e).unwrap();
        // A = c1 - b1 = 0.4 = a1, B = b1, C = -c1, u = b1 - c1 + a2 = 0.5
        assert!((t.a[(0, 0)] - Complex64::new(0.4, 0.0)).norm() < 1e-15);
        assert!((t.b[(0, 0)] - Complex64::new(0.3, 0.0)).norm() < 1e-15);
        assert!((t.c[(0, 0)] + Complex64::new(0.7, 0.0)).norm() < 1e-15);
        assert!((t.u[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(t.eigen_residual() < 1e-14);
    }

    #[test]
    fn eigen_relations_hold_for_sampled_sets() {
        for m in 1..=6 {
            for seed in 0..6 {
                let t = build_residue_triple(&sample(m, seed)).unwrap();
                let r = t.eigen_residual();
                assert!(r < 1e-10, "m={m} seed={seed}: residual {r:e}");
                assert!(t.check_flag_general_position());
            }
        }
    }

    #[test]
    fn off_diagonal_entries_match_the_printed_pattern() {
        let e = sample(3, 2);
        let t = build_residue_triple(&e).unwrap();
        // spot-check the triangular couplings
        assert!((t.b[(0, 2)] - (e.a2 + e.b[0] - e.c[0])).norm() < 1e-15);
        assert!((t.c[(2, 0)] - (e.a2 + e.b[2] - e.c[2])).norm() < 1e-15);
        assert!(t.b[(2, 0)].norm() < 1e-15);
        assert!(t.c[(0, 2)].norm() < 1e-15);
    }

    #[test]
    fn form_makes_both_bases_orthogonal() {
        for m in 1..=5 {
            for seed in 0..4 {
                let t = build_residue_triple(&sample(m, seed)).unwrap();
                let f = residue_form(&t).unwrap();
                // v side is exact by construction; check it anyway
                let vgv = t.v.transpose().mul(&f.gram).mul(&t.v);
                assert!(vgv.max_abs_diff(&CMatrix::diag(&f.nu2)) < 1e-9);
                assert!(f.w_orthogonality_residual(&t) < 1e-9, "m={m} seed={seed}");
                assert!(f.u_length_residual(&t) < 1e-10);
                assert!(f.a_reflection_residual(&t) < 1e-9);
            }
        }
    }

    #[test]
    fn definiteness_follows_the_positivity_columns() {
        for m in 2..=4 {
            for seed in 0..3 {
                let e1 = make_positivity_set(m, PositivityColumn::Column1, seed).unwrap();
                let t = build_residue_triple(&e1.to_complex()).unwrap();
                let f = residue_form(&t).unwrap();
                // real set: the Gram is real symmetric, signature well defined
                let sig = crate::linalg::hermitian_signature(&f.gram, 1e-9).unwrap();
                assert!(sig.is_definite(), "m={m} seed={seed}: {sig:?}");
                // Column1 forces a2 > a1 and sign matches sign(a2 - a1) > 0
                assert_eq!(
                    sig,
                    Signature {
                        positive: m,
                        negative: 0,
                        zero: 0
                    }
                );

                let e2 = make_positivity_set(m, PositivityColumn::Neither, seed).unwrap();
                let t2 = build_residue_triple(&e2.to_complex()).unwrap();
                let f2 = residue_form(&t2).unwrap();
                let sig2 = crate::linalg::hermitian_signature(&f2.gram, 1e-9).unwrap();
                assert!(!sig2.is_definite(), "m={m} seed={seed}: {sig2:?}");
            }
        }
    }
}
