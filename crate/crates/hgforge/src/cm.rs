//! Rational Calogero-Moser phase space at desk scale.
//!
//! Quadruples (B, X; v, w) subject to the rank-one commutator constraint
//! [B, X] = v (x) w - Id, the GL(m) change-of-frame action, normal forms
//! with distinct node positions, the commuting flows that translate B by
//! powers of X, and the quadratic Hamiltonian in both its particle and
//! trace forms. The flow generator built from an exponent set solves the
//! same commutator equation, which is what ties the many-body picture to
//! the rest of the crate.

use crate::flows::build_flow_operators;
use crate::linalg::{invert, solve, vec_max_abs_diff, CMatrix, ONE, ZERO};
use crate::params::ExponentSet;
use crate::residue::build_residue_triple;
use crate::{guard_denominator, Error, Result};
use num_complex::Complex64;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug)]
pub struct CMQuadruple {
    pub b: CMatrix,
    pub x: CMatrix,
    /// Column vector.
    pub v: Vec<Complex64>,
    /// Row vector; the group acts on it from the right.
    pub w: Vec<Complex64>,
}

impl CMQuadruple {
    pub fn new(b: CMatrix, x: CMatrix, v: Vec<Complex64>, w: Vec<Complex64>) -> Result<Self> {
        let m = v.len();
        if !b.is_square() || !x.is_square() || b.nrows() != m || x.nrows() != m || w.len() != m {
            return Err(Error::InvalidArgument(format!(
                "quadruple dimensions disagree: B {}x{}, X {}x{}, v {}, w {}",
                b.nrows(),
                b.ncols(),
                x.nrows(),
                x.ncols(),
                v.len(),
                w.len()
            )));
        }
        Ok(CMQuadruple { b, x, v, w })
    }

    pub fn m(&self) -> usize {
        self.v.len()
    }

    /// The representative with B = diag(b) and v = w = all ones. On the
    /// constrained set that data forces X_ij = 1/(b_i - b_j) off the
    /// diagonal; the diagonal holds the momenta.
    pub fn normal(b: &[Complex64], p: &[Complex64]) -> Result<Self> {
        let m = b.len();
        if p.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{} node positions but {} momenta",
                m,
                p.len()
            )));
        }
        let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut x = CMatrix::zeros(m, m);
        for i in 0..m {
            x[(i, i)] = p[i];
            for j in 0..m {
                if i != j {
                    x[(i, j)] = ONE / guard_denominator(b[i] - b[j], scale, "node gap", i, j)?;
                }
            }
        }
        Ok(CMQuadruple {
            b: CMatrix::diag(b),
            x,
            v: vec![ONE; m],
            w: vec![ONE; m],
        })
    }

    /// || [B, X] - v (x) w + Id ||.
    pub fn subvariety_residual(&self) -> f64 {
        moment_map(self).add(&CMatrix::identity(self.m())).max_abs()
    }
}

/// [B, X] - v (x) w. Equals -Id exactly on the constrained set.
pub fn moment_map(q: &CMQuadruple) -> CMatrix {
    q.b.commutator(&q.x).sub(&CMatrix::outer(&q.v, &q.w))
}

/// g . (B, X; v, w) = (g B g^{-1}, g X g^{-1}; g v, w g^{-1}).
pub fn gl_action(g: &CMatrix, q: &CMQuadruple) -> Result<CMQuadruple> {
    let m = q.m();
    if !g.is_square() || g.nrows() != m {
        return Err(Error::InvalidArgument(format!(
            "frame is {}x{} but the quadruple has size {}",
            g.nrows(),
            g.ncols(),
            m
        )));
    }
    let g_inv = invert(g)?;
    let v = g.matvec(&q.v);
    let w: Vec<Complex64> = (0..m)
        .map(|j| (0..m).map(|i| q.w[i] * g_inv[(i, j)]).sum())
        .collect();
    Ok(CMQuadruple {
        b: g.mul(&q.b).mul(&g_inv),
        x: g.mul(&q.x).mul(&g_inv),
        v,
        w,
    })
}

/// (B, X; v, w) -> (B + k t X^{k-1}, X; v, w). X commutes with its own
/// powers, so the constraint survives and every tr X^j is conserved.
pub fn cm_flow(q: &CMQuadruple, k: u32, t: Complex64) -> Result<CMQuadruple> {
    if k == 0 {
        return Err(Error::InvalidArgument("flow index starts at 1".into()));
    }
    let mut xpow = CMatrix::identity(q.m());
    for _ in 0..k - 1 {
        xpow = xpow.mul(&q.x);
    }
    Ok(CMQuadruple {
        b: q.b.add(&xpow.scaled(t * re(f64::from(k)))),
        x: q.x.clone(),
        v: q.v.clone(),
        w: q.w.clone(),
    })
}

pub fn half_trace_x2(x: &CMatrix) -> Complex64 {
    x.mul(x).trace() * re(0.5)
}

/// Minus the second Hamiltonian in particle coordinates,
///
///   1/2 sum_k p_k^2 - sum_{j<k} 1/(x_j - x_k)^2,
///
/// cross-checked against 1/2 tr X^2 of the matrix. The two routes agree
/// only in normal-form coordinates, so a mismatch is reported as an error
/// rather than averaged away.
pub fn hamiltonian_h2(
    x: &CMatrix,
    positions: &[Complex64],
    momenta: &[Complex64],
) -> Result<Complex64> {
    let m = positions.len();
    if momenta.len() != m || !x.is_square() || x.nrows() != m {
        return Err(Error::InvalidArgument(format!(
            "{} positions, {} momenta, {}x{} matrix",
            m,
            momenta.len(),
            x.nrows(),
            x.ncols()
        )));
    }
    let scale = positions.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut value = momenta.iter().map(|p| p * p).sum::<Complex64>() * re(0.5);
    for j in 0..m {
        for k in j + 1..m {
            let gap = guard_denominator(positions[j] - positions[k], scale, "particle gap", j, k)?;
            value -= ONE / (gap * gap);
        }
    }
    let trace_route = half_trace_x2(x);
    let h_scale = value.norm().max(trace_route.norm()).max(1.0);
    if (value - trace_route).norm() > 1e-10 * h_scale {
        return Err(Error::InvalidArgument(format!(
            "particle and trace routes disagree by {:.2e}; coordinates are not in normal form",
            (value - trace_route).norm()
        )));
    }
    Ok(value)
}

/// Characteristic polynomial coefficients, monic, highest degree first,
/// by the trace recursion on A (A M + c Id).
fn char_poly(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![ONE];
    let mut mk = CMatrix::identity(n);
    for k in 1..=n {
        mk = a.mul(&mk);
        let ck = -mk.trace() / re(k as f64);
        coeffs.push(ck);
        for i in 0..n {
            mk[(i, i)] += ck;
        }
    }
    coeffs
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(ZERO, |acc, &c| acc * z + c)
}

/// Simultaneous root iteration, all roots corrected against each other in
/// one sweep. Fine at desk degrees. Repeated roots stall into coincident
/// iterates; the caller's gap guard rejects those.
fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let radius = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| seed.powu(i as u32 + 1) * re(radius))
        .collect();
    for _ in 0..500 {
        let mut shift = 0.0f64;
        for i in 0..n {
            let mut den = ONE;
            for j in 0..n {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() < 1e-280 {
                return Err(Error::Genericity("root iterates collided".into()));
            }
            let step = horner(coeffs, z[i]) / den;
            z[i] -= step;
            shift = shift.max(step.norm());
        }
        if shift <= 1e-14 * radius {
            return Ok(z);
        }
    }
    Err(Error::Genericity(
        "characteristic roots did not settle".into(),
    ))
}

/// Eigenvalues and eigenvector columns of a general square matrix with
/// distinct eigenvalues. Roots of the characteristic polynomial, then
/// shifted inverse iteration with a Rayleigh polish per pair. The gap
/// guard is 1e-6 relative, far above anything the polish can absorb.
fn eigen_decompose(a: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    assert!(a.is_square());
    let n = a.nrows();
    if n == 1 {
        return Ok((vec![a[(0, 0)]], CMatrix::identity(1)));
    }
    let scale = a.max_abs().max(1.0);
    let mut lam = poly_roots(&char_poly(a))?;
    for i in 0..n {
        for j in i + 1..n {
            let gap = (lam[i] - lam[j]).norm();
            if gap < 1e-6 * scale {
                return Err(Error::Genericity(format!(
                    "eigenvalues {i} and {j} nearly coincide (gap {gap:.2e})"
                )));
            }
        }
    }
    let mut frame = CMatrix::zeros(n, n);
    for (idx, l) in lam.iter_mut().enumerate() {
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0, 0.25 + 0.1 * i as f64))
            .collect();
        for _pass in 0..3 {
            let shifted = a.sub(&CMatrix::diag(&vec![*l; n]));
            let y = match solve(&shifted, &x) {
                Ok(y) => y,
                Err(_) => {
                    // landed exactly on the spectrum; nudge off and retry
                    *l += re(1e-13 * scale);
                    continue;
                }
            };
            let mut top = 0;
            for (k, c) in y.iter().enumerate() {
                if c.norm() > y[top].norm() {
                    top = k;
                }
            }
            let pivot = y[top];
            if !pivot.is_finite() || pivot == ZERO {
                return Err(Error::Genericity(format!(
                    "inverse iteration broke down at eigenvalue {idx}"
                )));
            }
            x = y.iter().map(|c| c / pivot).collect();
            let ax = a.matvec(&x);
            let num: Complex64 = x.iter().zip(&ax).map(|(xi, axi)| xi.conj() * axi).sum();
            let den: f64 = x.iter().map(|xi| xi.norm_sqr()).sum();
            *l = num / re(den);
        }
        let image = a.matvec(&x);
        let scaled: Vec<Complex64> = x.iter().map(|c| c * *l).collect();
        let resid = vec_max_abs_diff(&image, &scaled);
        if resid > 1e-7 * scale {
            return Err(Error::Genericity(format!(
                "eigenpair {idx} residual {resid:.2e}"
            )));
        }
        frame.set_col(idx, &x);
    }
    Ok((lam, frame))
}

/// Diagonalize B, rescale v to all ones (w follows on the constrained
/// set), sort the node positions lexicographically. The output is built in
/// exact normal shape from the recovered nodes and momenta; inputs whose
/// conjugated X or w stray from that shape were never on the constrained
/// set and are rejected.
pub fn cm_normal_form(q: &CMQuadruple) -> Result<CMQuadruple> {
    let m = q.m();
    let (lam, frame) = eigen_decompose(&q.b)?;
    let qd = gl_action(&invert(&frame)?, q)?;
    let vscale = qd.v.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut rescale = CMatrix::zeros(m, m);
    for i in 0..m {
        // v must be cyclic for the rescale to exist
        rescale[(i, i)] = ONE / guard_denominator(qd.v[i], vscale, "frame v component", i, i)?;
    }
    let qn = gl_action(&rescale, &qd)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        lam[i]
            .re
            .total_cmp(&lam[j].re)
            .then(lam[i].im.total_cmp(&lam[j].im))
    });
    let b_sorted: Vec<Complex64> = order.iter().map(|&i| lam[i]).collect();
    let p_sorted: Vec<Complex64> = order.iter().map(|&i| qn.x[(i, i)]).collect();
    let out = CMQuadruple::normal(&b_sorted, &p_sorted)?;
    let mut dev = qn.w.iter().map(|wi| (wi - ONE).norm()).fold(0.0, f64::max);
    for r in 0..m {
        for c in 0..m {
            if r != c {
                dev = dev.max((qn.x[(order[r], order[c])] - out.x[(r, c)]).norm());
            }
        }
    }
    if dev > 1e-6 * out.x.max_abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "quadruple is off the constrained set by {dev:.2e}"
        )));
    }
    Ok(out)
}

/// || [X, B_d] - (e (x) e - Id) ||. The special solution puts X in the
/// left slot of the bracket, transposed relative to the quadruple
/// convention above.
pub fn link_residual(x: &CMatrix, b: &[Complex64]) -> f64 {
    let ones = vec![ONE; b.len()];
    let target = CMatrix::outer(&ones, &ones).sub(&CMatrix::identity(b.len()));
    x.commutator(&CMatrix::diag(b)).max_abs_diff(&target)
}

/// True when the flow generator X built from the exponent data solves the
/// rank-one commutator equation [X, B_d] = e (x) e - Id, i.e. the pair
/// (B_d, X; e, e) sits on the constrained set in that orientation.
pub fn hypergeometric_link_check(e: &ExponentSet) -> Result<bool> {
    let ops = build_flow_operators(&build_residue_triple(e)?)?;
    let tol = 1e-12 * e.scale().max(1.0) * ops.x.max_abs().max(1.0);
    Ok(link_residual(&ops.x, &e.b) <= tol)
}
