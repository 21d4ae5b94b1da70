//! Series solutions at the two regular endpoints and the passage between
//! them: hypergeometric partial sums, a complex gamma, the recursive vector
//! coefficients of the first-order system, their scalar hypergeometric
//! closed forms, and the gamma-product connection matrix checked by
//! transporting the infinity basis into the overlap annulus.
//!
//! The vector series live in the traceless case a2 = 0, where coefficient
//! n is the residue eigenvector pushed to integral time n.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cauchy::{cauchy_weights, CauchyKind};
use crate::flows::{ex_matrix, ey_matrix};
use crate::linalg::{det, solve, vec_max_abs, CMatrix, CompensatedSum, ONE, ZERO};
use crate::params::ExponentSet;
use crate::residue::{mu2, nu2, ResidueTriple};
use crate::{guard_denominator, Error, Result};

/// Which regular endpoint a series is anchored to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasePoint {
    Zero,
    Infinity,
}

/// Rising factorial (x)_n.
pub fn pochhammer(x: Complex64, n: usize) -> Complex64 {
    let mut p = ONE;
    for k in 0..n {
        p *= x + Complex64::new(k as f64, 0.0);
    }
    p
}

/// Partial sum together with the magnitude of the first term dropped.
#[derive(Clone, Copy, Debug)]
pub struct SeriesValue {
    pub value: Complex64,
    pub next_term: f64,
}

/// Partial sum of sum_n prod(upper)_n / (prod(lower)_n n!) z^n through
/// n_terms terms. Radius of convergence is 1 when the upper row is longer
/// by one; anything longer than that never converges.
pub fn hyper_pfq(
    upper: &[Complex64],
    lower: &[Complex64],
    z: Complex64,
    n_terms: usize,
) -> Result<SeriesValue> {
    if upper.len() > lower.len() + 1 {
        return Err(Error::InvalidArgument(
            "series with more than one extra upper parameter has zero radius".into(),
        ));
    }
    if upper.len() == lower.len() + 1 && z.norm() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "|z| = {:.6} is outside the unit disc of convergence",
            z.norm()
        )));
    }
    for (j, g) in lower.iter().enumerate() {
        guard_gamma_pole(*g, "lower parameter", j)?;
    }
    let mut term = ONE;
    let mut acc = CompensatedSum::new();
    for n in 0..n_terms {
        acc.add(term);
        let nf = Complex64::new(n as f64, 0.0);
        let mut next = term * z / (nf + ONE);
        for u in upper {
            next *= u + nf;
        }
        for g in lower {
            next /= g + nf;
        }
        term = next;
    }
    Ok(SeriesValue {
        value: acc.value(),
        next_term: term.norm(),
    })
}

// nonpositive integers are poles of the Pochhammer denominators and of gamma
fn guard_gamma_pole(g: Complex64, what: &'static str, idx: usize) -> Result<()> {
    let n = g.re.round();
    if n <= 0.0 && (g - Complex64::new(n, 0.0)).norm() < 1e-9 {
        return Err(Error::Resonance {
            family: what,
            i: idx,
            j: n.abs() as usize,
            value: (g - Complex64::new(n, 0.0)).norm(),
        });
    }
    Ok(())
}

fn guard_off_cut(z: Complex64) -> Result<()> {
    if z == ZERO || (z.re <= 0.0 && z.im.abs() <= 1e-9 * (1.0 + z.re.abs())) {
        return Err(Error::InvalidArgument(
            "z sits on the branch cut along the nonpositive real axis".into(),
        ));
    }
    Ok(())
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// sin(pi z) computed about the nearest integer, so arguments close to the
/// zeros lose no precision to the pi multiplication.
pub fn sin_pi(z: Complex64) -> Complex64 {
    let n = z.re.round();
    let s = (Complex64::new(PI, 0.0) * (z - Complex64::new(n, 0.0))).sin();
    if (n as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

/// Gamma by the nine-term Lanczos sum, reflected onto Re z >= 1/2.
pub fn complex_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        return Complex64::new(PI, 0.0) / (sin_pi(z) * complex_gamma(ONE - z));
    }
    let zm = z - ONE;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (k, coef) in LANCZOS.iter().enumerate().skip(1) {
        acc += *coef / (zm + Complex64::new(k as f64, 0.0));
    }
    let t = zm + Complex64::new(7.5, 0.0);
    (2.0 * PI).sqrt() * t.powc(zm + Complex64::new(0.5, 0.0)) * (-t).exp() * acc
}

/// Upper and lower parameter rows of the scalar basis solution with index j.
fn endpoint_rows(e: &ExponentSet, point: BasePoint, j: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = e.m;
    let mut upper = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m - 1);
    for k in 0..m {
        match point {
            BasePoint::Zero => {
                upper.push(e.b[j] - e.c[k]);
                if k != j {
                    lower.push(e.b[j] - e.b[k] + ONE);
                }
            }
            BasePoint::Infinity => {
                upper.push(e.b[k] - e.c[j]);
                if k != j {
                    lower.push(e.c[k] - e.c[j] + ONE);
                }
            }
        }
    }
    (upper, lower)
}

/// One scalar basis solution of the order-m hypergeometric equation:
/// z^{b_j} times a series in z at zero, z^{c_j} times a series in 1/z at
/// infinity, principal branch for the power.
pub fn ghge_local_basis(
    e: &ExponentSet,
    point: BasePoint,
    j: usize,
    z: Complex64,
    n_terms: usize,
) -> Result<Complex64> {
    guard_off_cut(z)?;
    let (upper, lower) = endpoint_rows(e, point, j);
    match point {
        BasePoint::Zero => Ok(z.powc(e.b[j]) * hyper_pfq(&upper, &lower, z, n_terms)?.value),
        BasePoint::Infinity => {
            Ok(z.powc(e.c[j]) * hyper_pfq(&upper, &lower, ONE / z, n_terms)?.value)
        }
    }
}

/// Derivatives f^(k)(z0) for k = 0..=kmax of a function holomorphic on the
/// closed sampling disc, by the trapezoid rule on its boundary circle.
pub fn contour_derivatives(
    f: impl Fn(Complex64) -> Result<Complex64>,
    z0: Complex64,
    radius: f64,
    samples: usize,
    kmax: usize,
) -> Result<Vec<Complex64>> {
    let mut values = Vec::with_capacity(samples);
    for p in 0..samples {
        let th = 2.0 * PI * p as f64 / samples as f64;
        values.push(f(z0 + Complex64::from_polar(radius, th))?);
    }
    let mut out = Vec::with_capacity(kmax + 1);
    let mut kfact = 1.0;
    for k in 0..=kmax {
        if k > 0 {
            kfact *= k as f64;
        }
        let mut acc = CompensatedSum::new();
        for (p, v) in values.iter().enumerate() {
            let th = 2.0 * PI * (k * p) as f64 / samples as f64;
            acc.add(v * Complex64::from_polar(1.0, -th));
        }
        out.push(acc.value() * (kfact / (samples as f64 * radius.powi(k as i32))));
    }
    Ok(out)
}

fn stirling_second(nmax: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; nmax + 1]; nmax + 1];
    s[0][0] = 1.0;
    for n in 1..=nmax {
        for k in 1..=n {
            s[n][k] = k as f64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    s
}

// coefficients of prod (t - r), lowest power first
fn monic_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![ONE];
    for r in roots {
        let mut next = vec![ZERO; coeffs.len() + 1];
        for (i, co) in coeffs.iter().enumerate() {
            next[i + 1] += *co;
            next[i] -= r * co;
        }
        coeffs = next;
    }
    coeffs
}

/// Residual of the scalar equation in Euler-operator form,
/// z prod(theta - c_k) f - prod(theta - b_k) f, at z0 for basis solution j
/// at zero. Derivatives come from a sampling circle that stays inside the
/// unit disc and off the branch cut; the answer is relative to the largest
/// single term.
pub fn ghge_equation_residual(
    e: &ExponentSet,
    j: usize,
    z0: Complex64,
    n_terms: usize,
) -> Result<f64> {
    let m = e.m;
    guard_off_cut(z0)?;
    let cut_dist = if z0.re > 0.0 { z0.norm() } else { z0.im.abs() };
    let radius = 0.35 * cut_dist.min(1.0 - z0.norm());
    if radius <= 0.0 {
        return Err(Error::InvalidArgument(
            "no room for a sampling circle between z0, the cut, and the unit circle".into(),
        ));
    }
    let derivs = contour_derivatives(
        |zz| ghge_local_basis(e, BasePoint::Zero, j, zz, n_terms),
        z0,
        radius,
        128,
        m,
    )?;
    let s2 = stirling_second(m);
    let mut theta_pow = vec![ZERO; m + 1];
    for (n, slot) in theta_pow.iter_mut().enumerate() {
        let mut acc = ZERO;
        let mut zk = ONE;
        for k in 0..=n {
            if k > 0 {
                zk *= z0;
            }
            acc += s2[n][k] * derivs[k] * zk;
        }
        *slot = acc;
    }
    let pb = monic_from_roots(&e.b);
    let pc = monic_from_roots(&e.c);
    let mut lhs = ZERO;
    let mut rhs = ZERO;
    let mut scale = 0.0f64;
    for n in 0..=m {
        let lt = z0 * pc[n] * theta_pow[n];
        let rt = pb[n] * theta_pow[n];
        lhs += lt;
        rhs += rt;
        scale = scale.max(lt.norm()).max(rt.norm());
    }
    Ok((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE))
}

/// Wronskian of the m scalar basis solutions at zero: determinant of the
/// matrix of derivative orders 0..m-1 at z0.
pub fn ghge_wronskian(e: &ExponentSet, z0: Complex64, n_terms: usize) -> Result<Complex64> {
    let m = e.m;
    guard_off_cut(z0)?;
    let cut_dist = if z0.re > 0.0 { z0.norm() } else { z0.im.abs() };
    let radius = 0.35 * cut_dist.min(1.0 - z0.norm());
    let mut w = CMatrix::zeros(m, m);
    for j in 0..m {
        let derivs = contour_derivatives(
            |zz| ghge_local_basis(e, BasePoint::Zero, j, zz, n_terms),
            z0,
            radius,
            128,
            m - 1,
        )?;
        for (k, d) in derivs.iter().enumerate() {
            w[(k, j)] = *d;
        }
    }
    Ok(det(&w))
}

/// Same spectra with the shared middle exponent dropped to zero and the
/// leading one re-solved from the trace condition; the vector series below
/// exist only there.
pub fn with_zero_a2(e: &ExponentSet) -> Result<ExponentSet> {
    ExponentSet::new(ZERO, e.b.clone(), e.c.clone(), e.k1, e.k2)
}

fn require_zero_a2(e: &ExponentSet) -> Result<()> {
    if e.a2 != ZERO {
        return Err(Error::InvalidArgument(
            "vector series need a2 = 0; map the set through with_zero_a2 first".into(),
        ));
    }
    Ok(())
}

/// Vector series at one endpoint: z^{b_i} sum_n coeffs[n] z^n at zero,
/// z^{c_i} sum_n coeffs[n] z^{-n} at infinity.
#[derive(Clone, Debug)]
pub struct FrobeniusSolution {
    pub base_point: BasePoint,
    pub index: usize,
    pub exponent: Complex64,
    pub coeffs: Vec<Vec<Complex64>>,
}

impl FrobeniusSolution {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn local_parameter(&self, z: Complex64) -> Result<Complex64> {
        guard_off_cut(z)?;
        match self.base_point {
            BasePoint::Zero => {
                if z.norm() >= 1.0 {
                    return Err(Error::InvalidArgument(
                        "outside the unit disc the series at zero diverges".into(),
                    ));
                }
                Ok(z)
            }
            BasePoint::Infinity => {
                if z.norm() <= 1.0 {
                    return Err(Error::InvalidArgument(
                        "inside the unit disc the series at infinity diverges".into(),
                    ));
                }
                Ok(ONE / z)
            }
        }
    }

    /// Series value at z, inside the endpoint's disc of convergence.
    pub fn eval(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let w = self.local_parameter(z)?;
        let m = self.coeffs[0].len();
        let mut acc = vec![ZERO; m];
        for c in self.coeffs.iter().rev() {
            for r in 0..m {
                acc[r] = acc[r] * w + c[r];
            }
        }
        let head = z.powc(self.exponent);
        Ok(acc.iter().map(|x| x * head).collect())
    }

    /// d/dz of the series, term by term.
    pub fn eval_derivative(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let w = self.local_parameter(z)?;
        let sigma = match self.base_point {
            BasePoint::Zero => 1.0,
            BasePoint::Infinity => -1.0,
        };
        let m = self.coeffs[0].len();
        let mut acc = vec![ZERO; m];
        let mut wn = ONE;
        for (n, c) in self.coeffs.iter().enumerate() {
            let weight = (self.exponent + Complex64::new(sigma * n as f64, 0.0)) * wn;
            for r in 0..m {
                acc[r] += weight * c[r];
            }
            wn *= w;
        }
        let head = z.powc(self.exponent - ONE);
        // z^{e + sigma n - 1} = z^{e-1} w^n
        Ok(acc.iter().map(|x| x * head).collect())
    }

    /// Largest violation of the defining recursion over the stored
    /// coefficients, relative to the coefficient scale.
    pub fn recursion_residual(&self, t: &ResidueTriple) -> f64 {
        let m = self.coeffs[0].len();
        let mut running = self.coeffs[0].clone();
        let mut worst = 0.0f64;
        let mut scale = vec_max_abs(&self.coeffs[0]);
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            let rhs = t.a.matvec(&running);
            let lhs = step_matrix(t, self.base_point, self.index, n).matvec(c);
            for r in 0..m {
                worst = worst.max((lhs[r] - rhs[r]).norm());
            }
            for r in 0..m {
                running[r] += c[r];
            }
            scale = scale.max(vec_max_abs(&rhs));
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }
}

// the linear map that pins coefficient n at the given endpoint
fn step_matrix(t: &ResidueTriple, point: BasePoint, i: usize, n: usize) -> CMatrix {
    let m = t.m();
    let nf = Complex64::new(n as f64, 0.0);
    match point {
        BasePoint::Zero => t
            .b
            .add(&CMatrix::identity(m).scaled(-(t.e.b[i] + nf))),
        BasePoint::Infinity => t.c.add(&CMatrix::identity(m).scaled(t.e.c[i] - nf)),
    }
}

/// Vector series solution with index i by the coefficient recursion: each
/// coefficient solves a shifted eigenvalue problem against the running sum
/// of all earlier ones.
pub fn mhgs_frobenius(
    t: &ResidueTriple,
    point: BasePoint,
    i: usize,
    order: usize,
) -> Result<FrobeniusSolution> {
    require_zero_a2(&t.e)?;
    let m = t.m();
    let exponent = match point {
        BasePoint::Zero => t.e.b[i],
        BasePoint::Infinity => t.e.c[i],
    };
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut running = match point {
        BasePoint::Zero => t.v.col(i),
        BasePoint::Infinity => t.w.col(i),
    };
    coeffs.push(running.clone());
    for n in 1..=order {
        let rhs = t.a.matvec(&running);
        let next = solve(&step_matrix(t, point, i, n), &rhs)?;
        for r in 0..m {
            running[r] += next[r];
        }
        coeffs.push(next);
    }
    Ok(FrobeniusSolution {
        base_point: point,
        index: i,
        exponent,
        coeffs,
    })
}

/// Pochhammer-ratio profile of coefficient n along solution i; equals 1 at
/// n = 0 at either endpoint.
pub fn pochhammer_profile(e: &ExponentSet, point: BasePoint, i: usize, n: usize) -> Complex64 {
    let mut val = ONE;
    for k in 0..e.m {
        match point {
            BasePoint::Zero => {
                val *= pochhammer(e.b[i] - e.c[k], n);
                val /= pochhammer(e.b[i] - e.b[k] + ONE, n);
            }
            BasePoint::Infinity => {
                val *= pochhammer(e.b[k] - e.c[i], n);
                val /= pochhammer(e.c[k] - e.c[i] + ONE, n);
            }
        }
    }
    val
}

/// Closed route to coefficient n: the Pochhammer profile times the residue
/// eigenvector pushed by the node exponential to integral time n (time -n
/// on the infinity side).
pub fn frobenius_coefficient_closed_form(
    t: &ResidueTriple,
    point: BasePoint,
    i: usize,
    n: usize,
) -> Result<Vec<Complex64>> {
    require_zero_a2(&t.e)?;
    let tau = Complex64::new(n as f64, 0.0);
    let profile = pochhammer_profile(&t.e, point, i, n);
    let col = match point {
        BasePoint::Zero => t.v.mul(&ex_matrix(&t.e, tau)?).col(i),
        BasePoint::Infinity => t.w.mul(&ey_matrix(&t.e, tau)?).col(i),
    };
    Ok(col.iter().map(|x| x * profile).collect())
}

/// Component j of vector solution i as a single power-times-hypergeometric
/// expression. The leading power is the bare exponent on and below the
/// eigenvector support (i >= j at zero, i <= j at infinity) and picks up
/// one extra order outside it.
pub fn mhgs_component_closed_form(
    t: &ResidueTriple,
    point: BasePoint,
    i: usize,
    j: usize,
    z: Complex64,
    n_terms: usize,
) -> Result<Complex64> {
    require_zero_a2(&t.e)?;
    let e = &t.e;
    let m = e.m;
    let scale = e.scale();
    guard_off_cut(z)?;
    let mut upper = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m - 1);
    match point {
        BasePoint::Zero => {
            if i >= j {
                for k in 0..m {
                    upper.push(e.b[i] - e.c[k] + if k > j { ONE } else { ZERO });
                    if k != i {
                        lower.push(e.b[i] - e.b[k] + if k < j { ZERO } else { ONE });
                    }
                }
                let f = hyper_pfq(&upper, &lower, z, n_terms)?.value;
                Ok(z.powc(e.b[i]) * t.v[(j, i)] * f)
            } else {
                for k in 0..m {
                    upper.push(e.b[i] - e.c[k] + if k > j { ONE + ONE } else { ONE });
                    if k != i {
                        lower.push(e.b[i] - e.b[k] + if k < j { ONE } else { ONE + ONE });
                    }
                }
                let mut pref = (e.b[j] - e.c[j]) * nu2(e, ZERO)?[i];
                for k in j..m {
                    if k > j {
                        pref *= e.b[i] - e.c[k] + ONE;
                    }
                    pref /= guard_denominator(e.b[i] - e.b[k] + ONE, scale, "b-b+1", i, k)?;
                }
                let f = hyper_pfq(&upper, &lower, z, n_terms)?.value;
                Ok(z.powc(e.b[i] + ONE) * pref * f)
            }
        }
        BasePoint::Infinity => {
            if i <= j {
                for k in 0..m {
                    upper.push(e.b[k] - e.c[i] + if k < j { ONE } else { ZERO });
                    if k != i {
                        lower.push(e.c[k] - e.c[i] + if k <= j { ONE } else { ZERO });
                    }
                }
                let f = hyper_pfq(&upper, &lower, ONE / z, n_terms)?.value;
                Ok(z.powc(e.c[i]) * t.w[(j, i)] * f)
            } else {
                for k in 0..m {
                    upper.push(e.b[k] - e.c[i] + if k < j { ONE + ONE } else { ONE });
                    if k != i {
                        lower.push(e.c[k] - e.c[i] + if k <= j { ONE + ONE } else { ONE });
                    }
                }
                let mut pref = (e.b[j] - e.c[j]) * mu2(e, ZERO)?[i];
                for k in 0..=j {
                    if k < j {
                        pref *= e.b[k] - e.c[i] + ONE;
                    }
                    pref /= guard_denominator(e.c[k] - e.c[i] + ONE, scale, "c-c+1", k, i)?;
                }
                let f = hyper_pfq(&upper, &lower, ONE / z, n_terms)?.value;
                Ok(z.powc(e.c[i] - ONE) * pref * f)
            }
        }
    }
}

/// Connection matrix: column j holds the weights writing the zero-side
/// solution j in the infinity-side basis. Gamma products carry one of the
/// two indices each; only the sine denominator couples them.
pub fn connection_coefficients(e: &ExponentSet) -> Result<CMatrix> {
    require_zero_a2(e)?;
    let m = e.m;
    let scale = e.scale();
    let mu_trig = cauchy_weights(&CauchyKind::Trigonometric, e)?.mu2;
    let mut row = vec![ONE; m];
    for i in 0..m {
        for k in 0..m {
            guard_gamma_pole(e.b[k] - e.c[i], "gamma argument b-c", k)?;
            row[i] *= complex_gamma(e.b[k] - e.c[i]);
            if k != i {
                guard_gamma_pole(e.c[k] - e.c[i], "gamma argument c-c", k)?;
                row[i] /= complex_gamma(e.c[k] - e.c[i]);
            }
        }
    }
    let mut col = vec![ONE; m];
    for j in 0..m {
        for k in 0..m {
            guard_gamma_pole(e.b[j] - e.c[k], "gamma argument b-c", k)?;
            col[j] /= complex_gamma(e.b[j] - e.c[k]);
            if k != j {
                guard_gamma_pole(e.b[j] - e.b[k], "gamma argument b-b", k)?;
                col[j] *= complex_gamma(e.b[j] - e.b[k]);
            }
        }
    }
    let ipi = Complex64::new(0.0, PI);
    let mut gamma = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let den = guard_denominator(sin_pi(e.b[j] - e.c[i]), scale, "sin(b-c)", j, i)?;
            gamma[(i, j)] = row[i] * col[j] * (ipi * (e.c[i] - e.b[j])).exp() * mu_trig[i] / den;
        }
    }
    Ok(gamma)
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Transports solution columns along the straight segment from z0 to z1
/// with fixed-step fourth-order integration of the first-order system. The
/// segment must clear both finite singular points.
pub fn mhgs_ode_continue(
    t: &ResidueTriple,
    start: &CMatrix,
    z0: Complex64,
    z1: Complex64,
    steps: usize,
) -> Result<CMatrix> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    for s in [ZERO, ONE] {
        if segment_distance(z0, z1, s) < 0.05 {
            return Err(Error::InvalidArgument(
                "integration path passes too close to a singular point".into(),
            ));
        }
    }
    let two = Complex64::new(2.0, 0.0);
    let h = (z1 - z0) / steps as f64;
    let deriv = |z: Complex64, f: &CMatrix| -> CMatrix {
        t.b.scaled(ONE / z)
            .add(&t.a.scaled(ONE / (z - ONE)))
            .mul(f)
    };
    let mut f = start.clone();
    let mut z = z0;
    for _ in 0..steps {
        let k1 = deriv(z, &f);
        let k2 = deriv(z + 0.5 * h, &f.add(&k1.scaled(0.5 * h)));
        let k3 = deriv(z + 0.5 * h, &f.add(&k2.scaled(0.5 * h)));
        let k4 = deriv(z + h, &f.add(&k3.scaled(h)));
        let incr = k1.add(&k2.scaled(two)).add(&k3.scaled(two)).add(&k4);
        f = f.add(&incr.scaled(h / 6.0));
        z += h;
    }
    Ok(f)
}

/// Scale left over after matching the two sides of the connection identity
/// on sample points, and the worst post-fit mismatch relative to the data.
#[derive(Clone, Copy, Debug)]
pub struct ConnectionFit {
    pub kappa: Complex64,
    pub residual: f64,
}

/// Evaluates the zero-side solutions directly and the infinity-side ones by
/// series on the outer circle |z| = 1.6 followed by transport down the ray,
/// then fits the single free scale of the connection identity by least
/// squares over all points and components.
pub fn connection_functional_fit(
    t: &ResidueTriple,
    points: &[Complex64],
    order_zero: usize,
    order_inf: usize,
    steps: usize,
) -> Result<ConnectionFit> {
    let e = &t.e;
    let m = e.m;
    let gamma = connection_coefficients(e)?;
    let mut zero_sols = Vec::with_capacity(m);
    let mut inf_sols = Vec::with_capacity(m);
    for i in 0..m {
        zero_sols.push(mhgs_frobenius(t, BasePoint::Zero, i, order_zero)?);
        inf_sols.push(mhgs_frobenius(t, BasePoint::Infinity, i, order_inf)?);
    }
    let mut num = ZERO;
    let mut den = ZERO;
    let mut pairs = Vec::with_capacity(points.len() * m);
    for &z in points {
        let z_start = z * (1.6 / z.norm());
        let mut start_cols = Vec::with_capacity(m);
        for sol in &inf_sols {
            start_cols.push(sol.eval(z_start)?);
        }
        let transported = mhgs_ode_continue(t, &CMatrix::from_cols(&start_cols), z_start, z, steps)?;
        for j in 0..m {
            let lhs = zero_sols[j].eval(z)?;
            let mut rhs = vec![ZERO; m];
            for i in 0..m {
                for r in 0..m {
                    rhs[r] += gamma[(i, j)] * transported[(r, i)];
                }
            }
            for r in 0..m {
                num += rhs[r].conj() * lhs[r];
                den += rhs[r].conj() * rhs[r];
            }
            pairs.push((lhs, rhs));
        }
    }
    if den == ZERO {
        return Err(Error::InvalidArgument(
            "all transported values vanished; nothing to fit".into(),
        ));
    }
    let kappa = num / den;
    let mut scale = 0.0f64;
    for (lhs, rhs) in &pairs {
        scale = scale.max(vec_max_abs(lhs)).max(vec_max_abs(rhs));
    }
    let mut worst = 0.0f64;
    for (lhs, rhs) in &pairs {
        for r in 0..lhs.len() {
            worst = worst.max((lhs[r] - kappa * rhs[r]).norm());
        }
    }
    Ok(ConnectionFit {
        kappa,
        residual: worst / scale.max(f64::MIN_POSITIVE),
    })
}

/// Determinant of the matrix whose columns are the m vector solutions at
/// zero evaluated at z.
pub fn mhgs_fundamental_det(t: &ResidueTriple, z: Complex64, order: usize) -> Result<Complex64> {
    let mut cols = Vec::with_capacity(t.m());
    for i in 0..t.m() {
        cols.push(mhgs_frobenius(t, BasePoint::Zero, i, order)?.eval(z)?);
    }
    Ok(det(&CMatrix::from_cols(&cols)))
}

/// Residual of the series in the polynomial form of the system: z f' versus
/// the residue pencil with its geometric factor truncated at the series
/// order. Zero at a true solution up to the shared truncation tail.
pub fn mhgs_series_residual(
    t: &ResidueTriple,
    sol: &FrobeniusSolution,
    z: Complex64,
) -> Result<f64> {
    let f = sol.eval(z)?;
    let fp = sol.eval_derivative(z)?;
    let bf = t.b.matvec(&f);
    let af = t.a.matvec(&f);
    let geom = match sol.base_point {
        BasePoint::Zero => {
            let mut g = ZERO;
            let mut p = ONE;
            for _ in 0..sol.order() {
                p *= z;
                g += p;
            }
            -g
        }
        BasePoint::Infinity => {
            let mut g = ZERO;
            let mut p = ONE;
            for _ in 0..=sol.order() {
                g += p;
                p /= z;
            }
            g
        }
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for r in 0..f.len() {
        let lhs = z * fp[r];
        let rhs = bf[r] + geom * af[r];
        worst = worst.max((lhs - rhs).norm());
        scale = scale.max(lhs.norm()).max(rhs.norm());
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}
