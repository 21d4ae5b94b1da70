//! Conjugation flows of the residue triple. The generators X and Y are
//! rational Calogero-Moser matrices with zero row sums; their one-parameter
//! groups EX(tau) = e^{X tau} and EY(tau) = e^{Y tau} have closed-form
//! entries, as does the family Z(tau) interpolating between W^{-1}V and the
//! exponentials. Under the flows the spectra of B and C move linearly in
//! time while the eigenbases evolve by right multiplication.
//!
//! Also here: the two-time scalar products (one per ordered pair of times,
//! plus the shifted "+" and "-" pairings), the quaternion action on the
//! doubled space, the change of basis bringing EX(tau) to a single Jordan
//! block, and the Vandermonde factorization of e^{tau X}.

use crate::linalg::{bilinear, invert, vec_max_abs, CMatrix, I, ONE, ZERO};
use crate::params::ExponentSet;
use crate::residue::{mu2, nu2, ResidueTriple};
use crate::{guard_denominator, Error, Result};
use num_complex::Complex64;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug)]
pub struct FlowOperators {
    pub x: CMatrix,
    pub y: CMatrix,
    /// S = V X V^{-1} = -W Y W^{-1}; annihilates u.
    pub s: CMatrix,
}

/// X_ij = 1/(b_j - b_i) and Y_ij = 1/(c_i - c_j) off the diagonal; the
/// diagonals make every row sum to zero, so X e = Y e = 0.
pub fn build_flow_operators(t: &ResidueTriple) -> Result<FlowOperators> {
    let e = &t.e;
    let m = e.m;
    let scale = e.scale();
    let mut x = CMatrix::zeros(m, m);
    let mut y = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            x[(i, j)] = ONE / guard_denominator(e.b[j] - e.b[i], scale, "b-b", j, i)?;
            y[(i, j)] = ONE / guard_denominator(e.c[i] - e.c[j], scale, "c-c", i, j)?;
        }
    }
    for i in 0..m {
        let xr: Complex64 = (0..m).filter(|&j| j != i).map(|j| x[(i, j)]).sum();
        let yr: Complex64 = (0..m).filter(|&j| j != i).map(|j| y[(i, j)]).sum();
        x[(i, i)] = -xr;
        y[(i, i)] = -yr;
    }
    let v_inv = invert(&t.v)?;
    let s = t.v.mul(&x).mul(&v_inv);
    Ok(FlowOperators { x, y, s })
}

impl FlowOperators {
    /// Worst residual over [X, B_d] = e (x) e - Id, [Y, C_d] = e (x) e - Id,
    /// and the row sums X e = Y e = 0.
    pub fn moment_map_residual(&self, e: &ExponentSet) -> f64 {
        let m = e.m;
        let b_d = CMatrix::diag(&e.b);
        let c_d = CMatrix::diag(&e.c.iter().map(|c| -c).collect::<Vec<_>>());
        let ones = vec![ONE; m];
        let target = CMatrix::outer(&ones, &ones).sub(&CMatrix::identity(m));
        let mut worst = self.x.commutator(&b_d).max_abs_diff(&target);
        worst = worst.max(self.y.commutator(&c_d).max_abs_diff(&target));
        worst = worst.max(vec_max_abs(&self.x.matvec(&ones)));
        worst.max(vec_max_abs(&self.y.matvec(&ones)))
    }

    /// || S W + W Y ||, i.e. V X V^{-1} = -W Y W^{-1} cleared of the second
    /// inverse.
    pub fn conjugation_residual(&self, t: &ResidueTriple) -> f64 {
        self.s.mul(&t.w).add(&t.w.mul(&self.y)).max_abs()
    }

    /// || S u ||; follows from X e = 0 because V e = u.
    pub fn kills_u_residual(&self, t: &ResidueTriple) -> f64 {
        vec_max_abs(&self.s.matvec(&t.u))
    }
}

/// xi^2_i(tau) = prod_k (b_i - b_k + tau) / prod_{k != i} (b_i - b_k).
/// The k = i numerator factor is tau itself, so xi^2_i(0) = 0.
pub fn xi2(e: &ExponentSet, tau: Complex64) -> Result<Vec<Complex64>> {
    let scale = e.scale();
    (0..e.m)
        .map(|i| {
            let mut val = ONE;
            for k in 0..e.m {
                val *= e.b[i] - e.b[k] + tau;
                if k != i {
                    val /= guard_denominator(e.b[i] - e.b[k], scale, "b-b", i, k)?;
                }
            }
            Ok(val)
        })
        .collect()
}

/// theta^2_i(tau) = prod_k (c_k - c_i + tau) / prod_{k != i} (c_k - c_i).
pub fn theta2(e: &ExponentSet, tau: Complex64) -> Result<Vec<Complex64>> {
    let scale = e.scale();
    (0..e.m)
        .map(|i| {
            let mut val = ONE;
            for k in 0..e.m {
                val *= e.c[k] - e.c[i] + tau;
                if k != i {
                    val /= guard_denominator(e.c[k] - e.c[i], scale, "c-c", k, i)?;
                }
            }
            Ok(val)
        })
        .collect()
}

/// EX(tau)_ij = xi^2_j(tau) / (b_j - b_i + tau). The pole of the printed
/// quotient is removable; entries are computed with it cancelled, which
/// makes EX(0) = Id exact. tau landing on a spectral difference b_i - b_j
/// is still rejected: that is the resonant case where the closed form
/// stops being the matrix exponential's eigenbasis expression.
pub fn ex_matrix(e: &ExponentSet, tau: Complex64) -> Result<CMatrix> {
    closed_exponential(&e.b, tau, e.scale())
}

/// EY(tau)_ij = theta^2_j(tau) / (c_i - c_j + tau), same cancellation.
/// Y is the node exponential generator for -c (the spectrum of C), so this
/// is the b-side kernel evaluated there.
pub fn ey_matrix(e: &ExponentSet, tau: Complex64) -> Result<CMatrix> {
    let neg_c: Vec<Complex64> = e.c.iter().map(|c| -c).collect();
    closed_exponential(&neg_c, tau, e.scale())
}

/// Entries of e^{M tau} over the nodes x_k, where M_ij = 1/(x_j - x_i) off
/// the diagonal with zero row sums.
fn closed_exponential(x: &[Complex64], tau: Complex64, scale: f64) -> Result<CMatrix> {
    let m = x.len();
    let tol_scale = scale + tau.norm();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                guard_denominator(x[j] - x[i] + tau, tol_scale, "node difference + tau", j, i)?;
            }
        }
    }
    let mut out = CMatrix::zeros(m, m);
    for j in 0..m {
        let mut denom = ONE;
        for k in 0..m {
            if k != j {
                denom *= guard_denominator(x[j] - x[k], scale, "node difference", j, k)?;
            }
        }
        for i in 0..m {
            let mut num = if i == j { ONE } else { tau };
            for k in 0..m {
                if k != j && k != i {
                    num *= x[j] - x[k] + tau;
                }
            }
            out[(i, j)] = num / denom;
        }
    }
    Ok(out)
}

/// Z(tau)_ij = nu^2_j(tau) / (a2 + b_j - c_i + tau). Genuine poles here.
pub fn z_matrix(e: &ExponentSet, tau: Complex64) -> Result<CMatrix> {
    let nu = nu2(e, tau)?;
    let scale = e.scale() + tau.norm();
    let mut out = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let d = guard_denominator(e.a2 + e.b[j] - e.c[i] + tau, scale, "a2+b-c+tau", j, i)?;
            out[(i, j)] = nu[j] / d;
        }
    }
    Ok(out)
}

/// Closed-form inverse: Z^{-1}(tau)_ij = mu^2_j(tau) / (a2 + b_i - c_j + tau).
pub fn z_inverse(e: &ExponentSet, tau: Complex64) -> Result<CMatrix> {
    let mu = mu2(e, tau)?;
    let scale = e.scale() + tau.norm();
    let mut out = CMatrix::zeros(e.m, e.m);
    for i in 0..e.m {
        for j in 0..e.m {
            let d = guard_denominator(e.a2 + e.b[i] - e.c[j] + tau, scale, "a2+b-c+tau", i, j)?;
            out[(i, j)] = mu[j] / d;
        }
    }
    Ok(out)
}

/// The triple and its eigen-data pushed to the times (tau1, tau2). Spectra
/// shift linearly: b_i + k1 tau1, -c_i + k2 tau2, and the residual scalars
/// a1, a2 pick up (1 - k - m) and (1 - k) rates respectively.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub b_t: CMatrix,
    pub c_t: CMatrix,
    pub a_t: CMatrix,
    /// Columns v_i(tau1); equals V EX(tau1).
    pub v_t: CMatrix,
    /// Columns w_i(tau2); equals W EY(tau2).
    pub w_t: CMatrix,
    pub a1_t: Complex64,
    pub a2_t: Complex64,
    pub b_eigen: Vec<Complex64>,
    pub c_eigen: Vec<Complex64>,
}

pub fn evolve(t: &ResidueTriple, tau1: Complex64, tau2: Complex64) -> Result<FlowState> {
    let e = &t.e;
    let m = e.m;
    let v_t = t.v.mul(&ex_matrix(e, tau1)?);
    let w_t = t.w.mul(&ey_matrix(e, tau2)?);
    let b_eigen: Vec<Complex64> = (0..m).map(|i| e.b[i] + e.k1 * tau1).collect();
    let c_eigen: Vec<Complex64> = (0..m).map(|i| -e.c[i] + e.k2 * tau2).collect();
    let b_t = v_t.mul(&CMatrix::diag(&b_eigen)).mul(&invert(&v_t)?);
    let c_t = w_t.mul(&CMatrix::diag(&c_eigen)).mul(&invert(&w_t)?);
    let a_t = b_t.add(&c_t).scaled(-ONE);
    let m_f = m as f64;
    let a1_t = e.a1 + (re(1.0 - m_f) - e.k1) * tau1 + (re(1.0 - m_f) - e.k2) * tau2;
    let a2_t = e.a2 + (ONE - e.k1) * tau1 + (ONE - e.k2) * tau2;
    Ok(FlowState {
        tau1,
        tau2,
        b_t,
        c_t,
        a_t,
        v_t,
        w_t,
        a1_t,
        a2_t,
        b_eigen,
        c_eigen,
    })
}

impl FlowState {
    /// Worst residual over B_t v_i(tau1) = (b_i + k1 tau1) v_i(tau1), the
    /// C_t analogue, A_t u = a1(tau1,tau2) u, and the fact that both column
    /// sums still equal the original u.
    pub fn eigen_residual(&self, t: &ResidueTriple) -> f64 {
        let m = t.m();
        let mut worst: f64 = 0.0;
        let mut sum_v = vec![ZERO; m];
        let mut sum_w = vec![ZERO; m];
        for i in 0..m {
            let vi = self.v_t.col(i);
            let bv = self.b_t.matvec(&vi);
            let wi = self.w_t.col(i);
            let cw = self.c_t.matvec(&wi);
            for j in 0..m {
                worst = worst.max((bv[j] - self.b_eigen[i] * vi[j]).norm());
                worst = worst.max((cw[j] - self.c_eigen[i] * wi[j]).norm());
                sum_v[j] += vi[j];
                sum_w[j] += wi[j];
            }
        }
        let au = self.a_t.matvec(&t.u);
        for j in 0..m {
            worst = worst.max((au[j] - self.a1_t * t.u[j]).norm());
            worst = worst.max((sum_v[j] - t.u[j]).norm());
            worst = worst.max((sum_w[j] - t.u[j]).norm());
        }
        worst
    }

    /// A_t = a2(tau1,tau2) Id - u (G u)^T with G the two-time Gram.
    pub fn reflection_residual(&self, t: &ResidueTriple, product: &TauProduct) -> f64 {
        let gu = product.gram.matvec(&t.u);
        let expect = CMatrix::identity(t.m())
            .scaled(self.a2_t)
            .sub(&CMatrix::outer(&t.u, &gu));
        self.a_t.max_abs_diff(&expect)
    }

    /// (u, u) under the two-time Gram equals a2(tau1,tau2) - a1(tau1,tau2).
    pub fn u_pairing_residual(&self, t: &ResidueTriple, product: &TauProduct) -> f64 {
        (bilinear(&product.gram, &t.u, &t.u) - (self.a2_t - self.a1_t)).norm()
    }
}

/// Central difference of the advanced B against the Lax-type equation
/// dB/dtau + [B, S] = k1 Id.
pub fn flow_equation_residual(
    t: &ResidueTriple,
    ops: &FlowOperators,
    tau: Complex64,
    h: f64,
) -> Result<f64> {
    let step = re(h);
    let bp = evolve(t, tau + step, ZERO)?.b_t;
    let bm = evolve(t, tau - step, ZERO)?.b_t;
    let b0 = evolve(t, tau, ZERO)?.b_t;
    let dot = bp.sub(&bm).scaled(re(1.0 / (2.0 * h)));
    let k1_id = CMatrix::identity(t.m()).scaled(t.e.k1);
    Ok(dot.add(&b0.commutator(&ops.s)).sub(&k1_id).max_abs())
}

/// The scalar product attached to an ordered pair of times: v(tau1) is an
/// orthogonal basis with weights nu^2(tau1+tau2), w(tau2) with
/// mu^2(tau1+tau2), and the cross pairings reproduce the Cauchy kernel in
/// the combined time.
#[derive(Clone, Debug)]
pub struct TauProduct {
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub nu2: Vec<Complex64>,
    pub mu2: Vec<Complex64>,
    /// Gram matrix in the standard basis.
    pub gram: CMatrix,
    pub v_t: CMatrix,
    pub w_t: CMatrix,
}

pub fn tau_product(t: &ResidueTriple, tau1: Complex64, tau2: Complex64) -> Result<TauProduct> {
    let e = &t.e;
    let s = tau1 + tau2;
    let nu = nu2(e, s)?;
    let mu = mu2(e, s)?;
    let v_t = t.v.mul(&ex_matrix(e, tau1)?);
    let w_t = t.w.mul(&ey_matrix(e, tau2)?);
    let v_inv = invert(&v_t)?;
    let gram = v_inv.transpose().mul(&CMatrix::diag(&nu)).mul(&v_inv);
    Ok(TauProduct {
        tau1,
        tau2,
        nu2: nu,
        mu2: mu,
        gram,
        v_t,
        w_t,
    })
}

impl TauProduct {
    /// The v side is diagonal by construction; the w side is the content.
    pub fn w_diagonality_residual(&self) -> f64 {
        self.w_t
            .transpose()
            .mul(&self.gram)
            .mul(&self.w_t)
            .max_abs_diff(&CMatrix::diag(&self.mu2))
    }

    /// v_i(tau1) = sum_j nu_i^2/(a2 + b_i - c_j + tau1 + tau2) w_j(tau2),
    /// i.e. V(tau1) = W(tau2) Z(tau1+tau2).
    pub fn basis_change_residual(&self, e: &ExponentSet) -> Result<f64> {
        let z = z_matrix(e, self.tau1 + self.tau2)?;
        Ok(self.v_t.max_abs_diff(&self.w_t.mul(&z)))
    }

    /// (v_i(tau1), w_j(tau2)) = nu_i^2 mu_j^2 / (a2 + b_i - c_j + tau1 + tau2).
    pub fn cross_pairing_residual(&self, e: &ExponentSet) -> Result<f64> {
        let s = self.tau1 + self.tau2;
        let scale = e.scale() + s.norm();
        let mut expect = CMatrix::zeros(e.m, e.m);
        for i in 0..e.m {
            for j in 0..e.m {
                let d = guard_denominator(e.a2 + e.b[i] - e.c[j] + s, scale, "a2+b-c+s", i, j)?;
                expect[(i, j)] = self.nu2[i] * self.mu2[j] / d;
            }
        }
        let actual = self.v_t.transpose().mul(&self.gram).mul(&self.w_t);
        Ok(actual.max_abs_diff(&expect))
    }
}

/// The shifted pairings between solution spaces at two distinct times.
/// The "+" form pairs v(tau1) against v(tau2) with weights xi^2(tau1-tau2)
/// and flips sign with the order; the "-" form does the same for w and
/// theta^2.
#[derive(Clone, Debug)]
pub struct ExtendedForms {
    pub sigma: Complex64,
    pub plus_gram: CMatrix,
    pub minus_gram: CMatrix,
    v1: CMatrix,
    v2: CMatrix,
    w1: CMatrix,
    w2: CMatrix,
    xi_bwd: Vec<Complex64>,
    theta_bwd: Vec<Complex64>,
}

pub fn extended_products(
    t: &ResidueTriple,
    tau1: Complex64,
    tau2: Complex64,
) -> Result<ExtendedForms> {
    let sigma = tau1 - tau2;
    if sigma.norm() < 1e-12 * (1.0 + tau1.norm() + tau2.norm()) {
        return Err(Error::InvalidArgument(
            "shifted pairings need distinct times".into(),
        ));
    }
    let e = &t.e;
    let v1 = t.v.mul(&ex_matrix(e, tau1)?);
    let v2 = t.v.mul(&ex_matrix(e, tau2)?);
    let w1 = t.w.mul(&ey_matrix(e, tau1)?);
    let w2 = t.w.mul(&ey_matrix(e, tau2)?);
    let v1_inv = invert(&v1)?;
    let w1_inv = invert(&w1)?;
    let plus_gram = v1_inv
        .transpose()
        .mul(&CMatrix::diag(&xi2(e, sigma)?))
        .mul(&v1_inv);
    let minus_gram = w1_inv
        .transpose()
        .mul(&CMatrix::diag(&theta2(e, sigma)?))
        .mul(&w1_inv);
    Ok(ExtendedForms {
        sigma,
        plus_gram,
        minus_gram,
        v1,
        v2,
        w1,
        w2,
        xi_bwd: xi2(e, -sigma)?,
        theta_bwd: theta2(e, -sigma)?,
    })
}

impl ExtendedForms {
    /// Diagonality in the v(tau1) basis holds by construction; the content
    /// is the v(tau2) basis picking up the time-reversed weights negated:
    /// V(tau2)^T G+ V(tau2) = -diag(xi^2(tau2-tau1)).
    pub fn plus_residual(&self) -> f64 {
        let lhs = self.v2.transpose().mul(&self.plus_gram).mul(&self.v2);
        let neg: Vec<Complex64> = self.xi_bwd.iter().map(|x| -x).collect();
        lhs.max_abs_diff(&CMatrix::diag(&neg))
    }

    /// W(tau2)^T G- W(tau2) = -diag(theta^2(tau2-tau1)).
    pub fn minus_residual(&self) -> f64 {
        let lhs = self.w2.transpose().mul(&self.minus_gram).mul(&self.w2);
        let neg: Vec<Complex64> = self.theta_bwd.iter().map(|x| -x).collect();
        lhs.max_abs_diff(&CMatrix::diag(&neg))
    }

    /// V(tau1) = V(tau2) EX(tau1-tau2) and W(tau1) = W(tau2) EY(tau1-tau2).
    pub fn transition_residual(&self, e: &ExponentSet) -> Result<f64> {
        let rv = self.v1.max_abs_diff(&self.v2.mul(&ex_matrix(e, self.sigma)?));
        let rw = self.w1.max_abs_diff(&self.w2.mul(&ey_matrix(e, self.sigma)?));
        Ok(rv.max(rw))
    }
}

/// The upper bidiagonal matrix with unit diagonal and unit superdiagonal;
/// the normal form of EX(tau) for tau != 0.
pub fn jordan_block(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| {
        if i == j || j == i + 1 {
            ONE
        } else {
            ZERO
        }
    })
}

/// G(tau)_ij = [sum_{t=0}^{m-i} prod_{l=0}^{t-1}(b_j - b_1 - l tau) / (t! tau^t)]
///             / prod_{k != j} (b_j - b_k); conjugates EX(tau) into the
/// single Jordan block.
pub fn jordan_normalizer(e: &ExponentSet, tau: Complex64) -> Result<CMatrix> {
    if tau.norm() < 1e-12 {
        return Err(Error::InvalidArgument(
            "the Jordan normalizer degenerates at tau = 0".into(),
        ));
    }
    let m = e.m;
    let scale = e.scale();
    let mut out = CMatrix::zeros(m, m);
    for j in 0..m {
        let mut denom = ONE;
        for k in 0..m {
            if k != j {
                denom *= guard_denominator(e.b[j] - e.b[k], scale, "b-b", j, k)?;
            }
        }
        for i in 0..m {
            let mut sum = ZERO;
            let mut term = ONE;
            // terms t = 0 ..= m-i-1 in 0-based rows, advancing by
            // (b_j - b_1 - t tau) / ((t+1) tau) each step
            for t in 0..=(m - i - 1) {
                sum += term;
                term *= (e.b[j] - e.b[0] - re(t as f64) * tau) / (re(t as f64 + 1.0) * tau);
            }
            out[(i, j)] = sum / denom;
        }
    }
    Ok(out)
}

/// det G(tau) = 1 / (1! 2! ... (m-1)! tau^{m(m-1)/2} prod_{i<j} (b_j - b_i)).
pub fn jordan_det_closed_form(e: &ExponentSet, tau: Complex64) -> Result<Complex64> {
    let m = e.m;
    let mut denom = ONE;
    let mut factorial = 1.0;
    for k in 1..m {
        factorial *= k as f64;
        denom *= re(factorial);
    }
    denom *= tau.powu((m * (m - 1) / 2) as u32);
    for i in 0..m {
        for j in i + 1..m {
            denom *= guard_denominator(e.b[j] - e.b[i], e.scale(), "b-b", j, i)?;
        }
    }
    Ok(ONE / denom)
}

/// Vnd(x, tau): row i holds the powers (x_j + tau)^i, i = 0..m-1.
pub fn vandermonde(x: &[Complex64], tau: Complex64) -> CMatrix {
    let m = x.len();
    CMatrix::from_fn(m, m, |i, j| (x[j] + tau).powu(i as u32))
}

/// Conjugating X by d(b) = diag(prod_{k != i}(b_i - b_k)) turns its
/// exponential into a ratio of Vandermonde matrices:
/// e^{tau d^{-1}(b) X d(b)} = Vnd^{-1}(b, 0) Vnd(b, tau). The Y statement
/// lives on the nodes -c_i, the spectrum of C: the conjugator
/// diag(prod_{k != i}(c_k - c_i)) is d evaluated there, and so is the
/// Vandermonde (at the nodes c_i the time direction reverses instead).
/// Returns the worst residual of Vnd(x,0) d^{-1} E(tau) d = Vnd(x,tau)
/// over both node families.
pub fn vandermonde_residual(e: &ExponentSet, tau: Complex64) -> Result<f64> {
    let m = e.m;
    let scale = e.scale();
    let neg_c: Vec<Complex64> = e.c.iter().map(|c| -c).collect();
    let mut worst: f64 = 0.0;
    for nodes in [&e.b, &neg_c] {
        let mut d = vec![ONE; m];
        for i in 0..m {
            for k in 0..m {
                if k != i {
                    d[i] *= guard_denominator(nodes[i] - nodes[k], scale, "node difference", i, k)?;
                }
            }
        }
        let ex = closed_exponential(nodes, tau, scale)?;
        let conj = CMatrix::from_fn(m, m, |i, j| ex[(i, j)] * d[j] / d[i]);
        let lhs = vandermonde(nodes, ZERO).mul(&conj);
        worst = worst.max(lhs.max_abs_diff(&vandermonde(nodes, tau)));
    }
    Ok(worst)
}

pub fn vandermonde_check(e: &ExponentSet, tau: Complex64, tol: f64) -> Result<bool> {
    Ok(vandermonde_residual(e, tau)? <= tol)
}

/// i, j, k acting on the doubled space, built from E+- = e^{+-S (tau1-tau2)}:
/// i = [[0, sqrt(-1) E+], [sqrt(-1) E-, 0]], j = [[0, -E+], [E-, 0]],
/// k = [[sqrt(-1) Id, 0], [0, -sqrt(-1) Id]]. The pairing on the doubled
/// space is the direct sum of the two-time Grams in both orders; j preserves
/// it, i and k negate it.
#[derive(Clone, Debug)]
pub struct QuaternionAction {
    pub qi: CMatrix,
    pub qj: CMatrix,
    pub qk: CMatrix,
    pub gram: CMatrix,
}

fn block2(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let m = tl.nrows();
    CMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => tl[(i, j)],
        (true, false) => tr[(i, j - m)],
        (false, true) => bl[(i - m, j)],
        (false, false) => br[(i - m, j - m)],
    })
}

pub fn quaternion_action(
    t: &ResidueTriple,
    tau1: Complex64,
    tau2: Complex64,
) -> Result<QuaternionAction> {
    let m = t.m();
    let sigma = tau1 - tau2;
    let v_inv = invert(&t.v)?;
    let e_plus = t.v.mul(&ex_matrix(&t.e, sigma)?).mul(&v_inv);
    let e_minus = t.v.mul(&ex_matrix(&t.e, -sigma)?).mul(&v_inv);
    let zero = CMatrix::zeros(m, m);
    let id = CMatrix::identity(m);
    let qi = block2(&zero, &e_plus.scaled(I), &e_minus.scaled(I), &zero);
    let qj = block2(&zero, &e_plus.scaled(-ONE), &e_minus, &zero);
    let qk = block2(&id.scaled(I), &zero, &zero, &id.scaled(-I));
    let g12 = tau_product(t, tau1, tau2)?.gram;
    let g21 = tau_product(t, tau2, tau1)?.gram;
    let gram = block2(&g12, &zero, &zero, &g21);
    Ok(QuaternionAction { qi, qj, qk, gram })
}

impl QuaternionAction {
    /// i^2 = j^2 = k^2 = -Id, ij = k, jk = i, ki = j.
    pub fn algebra_residual(&self) -> f64 {
        let n = self.qi.nrows();
        let neg_id = CMatrix::identity(n).scaled(-ONE);
        let mut worst = self.qi.mul(&self.qi).max_abs_diff(&neg_id);
        worst = worst.max(self.qj.mul(&self.qj).max_abs_diff(&neg_id));
        worst = worst.max(self.qk.mul(&self.qk).max_abs_diff(&neg_id));
        worst = worst.max(self.qi.mul(&self.qj).max_abs_diff(&self.qk));
        worst = worst.max(self.qj.mul(&self.qk).max_abs_diff(&self.qi));
        worst.max(self.qk.mul(&self.qi).max_abs_diff(&self.qj))
    }

    /// Q^T G Q = sign(Q) G with signs (-1, +1, -1) for (i, j, k).
    pub fn gram_action_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (q, sign) in [(&self.qi, -1.0), (&self.qj, 1.0), (&self.qk, -1.0)] {
            let moved = q.transpose().mul(&self.gram).mul(q);
            worst = worst.max(moved.max_abs_diff(&self.gram.scaled(re(sign))));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use crate::params::{sample_parameters, SampleMode, DELTA_SEP};
    use crate::residue::{build_residue_triple, residue_form};

    fn sample(m: usize, seed: u64) -> ResidueTriple {
        let e = sample_parameters(m, seed, SampleMode::Complex, DELTA_SEP).unwrap();
        build_residue_triple(&e).unwrap()
    }

    #[test]
    fn operators_satisfy_the_moment_map_identities() {
        for (m, seed) in [(1, 7), (2, 8), (4, 9)] {
            let t = sample(m, seed);
            let ops = build_flow_operators(&t).unwrap();
            assert!(ops.moment_map_residual(&t.e) < 1e-12, "m={m}");
            assert!(ops.conjugation_residual(&t) < 1e-9, "m={m}");
            assert!(ops.kills_u_residual(&t) < 1e-10, "m={m}");
        }
    }

    #[test]
    fn closed_form_exponentials_match_pade() {
        let t = sample(3, 11);
        let ops = build_flow_operators(&t).unwrap();
        for tau in [re(0.37), Complex64::new(-0.2, 0.45)] {
            let ex = ex_matrix(&t.e, tau).unwrap();
            let ey = ey_matrix(&t.e, tau).unwrap();
            assert!(ex.max_abs_diff(&expm(&ops.x.scaled(tau)).unwrap()) < 1e-9);
            assert!(ey.max_abs_diff(&expm(&ops.y.scaled(tau)).unwrap()) < 1e-9);
            let ones = vec![ONE; 3];
            assert!(vec_max_abs(&crate::linalg::vec_sub(&ex.matvec(&ones), &ones)) < 1e-12);
        }
        assert!(ex_matrix(&t.e, ZERO).unwrap().max_abs_diff(&CMatrix::identity(3)) == 0.0);
    }

    #[test]
    fn exponentials_obey_the_group_law() {
        let t = sample(4, 13);
        let (t1, t2) = (Complex64::new(0.3, -0.1), Complex64::new(-0.7, 0.2));
        let lhs = ex_matrix(&t.e, t1)
            .unwrap()
            .mul(&ex_matrix(&t.e, t2).unwrap());
        assert!(lhs.max_abs_diff(&ex_matrix(&t.e, t1 + t2).unwrap()) < 1e-9);
        let lhs = ey_matrix(&t.e, t1)
            .unwrap()
            .mul(&ey_matrix(&t.e, t2).unwrap());
        assert!(lhs.max_abs_diff(&ey_matrix(&t.e, t1 + t2).unwrap()) < 1e-9);
    }

    #[test]
    fn z_interpolates_between_the_exponentials() {
        let t = sample(4, 17);
        let e = &t.e;
        let m = e.m;
        let (t1, t2) = (re(0.2), re(0.5));
        let z1 = z_matrix(e, t1).unwrap();
        assert!(z1.mul(&z_inverse(e, t1).unwrap()).max_abs_diff(&CMatrix::identity(m)) < 1e-9);
        // Z(0) = W^{-1} V, cleared of the inverse
        assert!(t.w.mul(&z_matrix(e, ZERO).unwrap()).max_abs_diff(&t.v) < 1e-9);
        let st3a = z_inverse(e, t1).unwrap().mul(&z_matrix(e, t2).unwrap());
        assert!(st3a.max_abs_diff(&ex_matrix(e, t2 - t1).unwrap()) < 1e-9);
        let st3b = z_matrix(e, t1).unwrap().mul(&z_inverse(e, t2).unwrap());
        assert!(st3b.max_abs_diff(&ey_matrix(e, t2 - t1).unwrap()) < 1e-9);
        let ones = vec![ONE; m];
        assert!(vec_max_abs(&crate::linalg::vec_sub(&z1.matvec(&ones), &ones)) < 1e-9);
        // m = 1 collapses to the scalar 1
        let t1x = sample(1, 3);
        assert!((z_matrix(&t1x.e, re(0.4)).unwrap()[(0, 0)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn evolution_moves_eigenvalues_linearly() {
        let t = sample(3, 19);
        let (t1, t2) = (Complex64::new(0.4, 0.1), Complex64::new(-0.3, 0.25));
        let state = evolve(&t, t1, t2).unwrap();
        assert!(state.eigen_residual(&t) < 1e-9);
        let product = tau_product(&t, t1, t2).unwrap();
        assert!(state.reflection_residual(&t, &product) < 1e-9);
        assert!(state.u_pairing_residual(&t, &product) < 1e-9);
        // identity flow returns the base triple
        let idle = evolve(&t, ZERO, ZERO).unwrap();
        assert!(idle.b_t.max_abs_diff(&t.b) < 1e-10);
        assert!(idle.c_t.max_abs_diff(&t.c) < 1e-10);
        assert!(idle.a_t.max_abs_diff(&t.a) < 1e-10);
        let ops = build_flow_operators(&t).unwrap();
        assert!(flow_equation_residual(&t, &ops, re(0.3), 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn tau_products_diagonalize_both_bases() {
        let t = sample(4, 23);
        let (t1, t2) = (Complex64::new(0.3, 0.1), re(-0.05));
        let product = tau_product(&t, t1, t2).unwrap();
        assert!(product.w_diagonality_residual() < 1e-9);
        assert!(product.basis_change_residual(&t.e).unwrap() < 1e-9);
        assert!(product.cross_pairing_residual(&t.e).unwrap() < 1e-9);
        // both times zero gives back the one-time form
        let base = residue_form(&t).unwrap();
        let zero = tau_product(&t, ZERO, ZERO).unwrap();
        assert!(zero.gram.max_abs_diff(&base.gram) < 1e-9);
    }

    #[test]
    fn extended_forms_pair_the_shifted_bases() {
        let t = sample(3, 29);
        let (t1, t2) = (Complex64::new(0.45, -0.2), Complex64::new(0.1, 0.3));
        let forms = extended_products(&t, t1, t2).unwrap();
        assert!(forms.plus_residual() < 1e-9);
        assert!(forms.minus_residual() < 1e-9);
        assert!(forms.transition_residual(&t.e).unwrap() < 1e-9);
        // swapping the times negates both forms
        let swapped = extended_products(&t, t2, t1).unwrap();
        assert!(swapped.plus_gram.max_abs_diff(&forms.plus_gram.scaled(-ONE)) < 1e-8);
        assert!(swapped.minus_gram.max_abs_diff(&forms.minus_gram.scaled(-ONE)) < 1e-8);
        assert!(extended_products(&t, t1, t1).is_err());
        // m = 1: xi^2(tau) is tau itself
        let t1x = sample(1, 5);
        assert!((xi2(&t1x.e, re(0.7)).unwrap()[0] - re(0.7)).norm() < 1e-15);
    }

    #[test]
    fn jordan_normalizer_collapses_ex_to_a_single_block() {
        let t = sample(4, 31);
        let tau = Complex64::new(0.6, 0.15);
        let g = jordan_normalizer(&t.e, tau).unwrap();
        let det = crate::linalg::det(&g);
        let closed = jordan_det_closed_form(&t.e, tau).unwrap();
        assert!((det - closed).norm() / closed.norm() < 1e-9);
        let conj = g
            .mul(&ex_matrix(&t.e, tau).unwrap())
            .mul(&invert(&g).unwrap());
        assert!(conj.max_abs_diff(&jordan_block(4)) < 1e-8);
        assert!(jordan_normalizer(&t.e, ZERO).is_err());
        // m = 2 determinant readout: 1 / (tau (b_2 - b_1))
        let t2 = sample(2, 37);
        let d2 = jordan_det_closed_form(&t2.e, re(0.5)).unwrap();
        let expect = ONE / (re(0.5) * (t2.e.b[1] - t2.e.b[0]));
        assert!((d2 - expect).norm() < 1e-12);
    }

    #[test]
    fn vandermonde_ratio_reproduces_the_exponential() {
        let t2 = sample(2, 41);
        assert!(vandermonde_residual(&t2.e, re(0.8)).unwrap() < 1e-12);
        let t5 = sample(5, 43);
        assert!(vandermonde_residual(&t5.e, re(0.2)).unwrap() < 1e-8);
        assert!(vandermonde_check(&t5.e, ZERO, 1e-14).unwrap());
    }

    #[test]
    fn quaternions_act_on_the_doubled_space() {
        let t = sample(3, 47);
        let (t1, t2) = (Complex64::new(0.5, 0.2), Complex64::new(-0.1, -0.3));
        let q = quaternion_action(&t, t1, t2).unwrap();
        assert!(q.algebra_residual() < 1e-10);
        assert!(q.gram_action_residual() < 1e-9);
    }
}
