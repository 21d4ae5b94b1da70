//! Dense complex linear algebra sized for this crate: matrices are m x m with
//! m <= 6 (occasionally a few dozen for stacked systems), so everything is
//! plain row-major storage, partial-pivot LU, Jacobi eigensweeps and a
//! direct characteristic-polynomial eigensolver. No external backend.
//!
//! Residual norms throughout the crate are `max_abs`: the maximum absolute
//! entry. Where an operator norm is needed (conditioning, exponential
//! scaling) the row-sum and column-sum norms are used internally.

use crate::{Error, Result};
use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMatrix {
            nrows,
            ncols,
            data: vec![ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let mut m = CMatrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Outer product u w^T (no conjugation).
    pub fn outer(u: &[Complex64], w: &[Complex64]) -> Self {
        CMatrix::from_fn(u.len(), w.len(), |i, j| u[i] * w[j])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Complex64]) {
        for i in 0..self.nrows {
            self[(i, j)] = v[i];
        }
    }

    /// Columns assembled from vectors.
    pub fn from_cols(cols: &[Vec<Complex64>]) -> Self {
        let nrows = cols[0].len();
        let mut m = CMatrix::zeros(nrows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c);
        }
        m
    }

    pub fn transpose(&self) -> Self {
        CMatrix::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        CMatrix::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        m
    }

    pub fn mul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut out = CMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .fold(ZERO, |acc, t| acc + t)
            })
            .collect()
    }

    /// Commutator self*other - other*self.
    pub fn commutator(&self, other: &CMatrix) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// Maximum absolute entry. This is the residual norm used by every
    /// acceptance threshold in the crate.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Operator infinity norm (maximum row sum), for conditioning only.
    pub fn norm_row_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Operator one norm (maximum column sum).
    pub fn norm_col_sum(&self) -> f64 {
        (0..self.ncols)
            .map(|j| (0..self.nrows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).fold(ZERO, |a, b| a + b)
    }

    pub fn pow_squarings(&self, times: u32) -> Self {
        let mut m = self.clone();
        for _ in 0..times {
            m = m.mul(&m);
        }
        m
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.ncols + j]
    }
}

pub fn vec_max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn vec_max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn vec_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

/// Bilinear pairing x^T G y (no conjugation; the residue-type forms are
/// complex symmetric).
pub fn bilinear(g: &CMatrix, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let gy = g.matvec(y);
    x.iter().zip(&gy).map(|(a, b)| a * b).fold(ZERO, |acc, t| acc + t)
}

/// Sesquilinear pairing x^dagger G y.
pub fn sesquilinear(g: &CMatrix, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let gy = g.matvec(y);
    x.iter()
        .zip(&gy)
        .map(|(a, b)| a.conj() * b)
        .fold(ZERO, |acc, t| acc + t)
}

/// Neumaier compensated accumulator for long sums of complex doubles.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    s_re: f64,
    c_re: f64,
    s_im: f64,
    c_im: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        fn step(s: &mut f64, c: &mut f64, x: f64) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
        step(&mut self.s_re, &mut self.c_re, z.re);
        step(&mut self.s_im, &mut self.c_im, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.s_re + self.c_re, self.s_im + self.c_im)
    }
}

/// Partial-pivot LU factorization.
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    parity: f64,
    singular: bool,
}

impl Lu {
    pub fn factor(a: &CMatrix) -> Lu {
        assert!(a.is_square());
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                parity = -parity;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let s = f * lu[(k, j)];
                    lu[(i, j)] -= s;
                }
            }
        }
        Lu {
            lu,
            perm,
            parity,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Smallest pivot magnitude relative to the largest.
    pub fn pivot_ratio(&self) -> f64 {
        let n = self.lu.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let p = self.lu[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub fn det(&self) -> Complex64 {
        if self.singular {
            return ZERO;
        }
        let mut d = Complex64::new(self.parity, 0.0);
        for i in 0..self.lu.nrows() {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.singular {
            return Err(Error::Singular {
                context: "LU solve".into(),
            });
        }
        let n = self.lu.nrows();
        let mut x: Vec<Complex64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 1..n {
            for j in 0..i {
                let s = self.lu[(i, j)] * x[j];
                x[i] -= s;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let s = self.lu[(i, j)] * x[j];
                x[i] -= s;
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_col(j, &self.solve(&b.col(j))?);
        }
        Ok(out)
    }
}

pub fn det(a: &CMatrix) -> Complex64 {
    Lu::factor(a).det()
}

pub fn invert(a: &CMatrix) -> Result<CMatrix> {
    let lu = Lu::factor(a);
    if lu.is_singular() || lu.pivot_ratio() < 1e-14 {
        return Err(Error::Singular {
            context: format!("invert ({}x{}, pivot ratio {:.2e})", a.nrows(), a.ncols(), lu.pivot_ratio()),
        });
    }
    lu.solve_matrix(&CMatrix::identity(a.nrows()))
}

pub fn solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    Lu::factor(a).solve(b)
}

/// Row-sum condition estimate via the explicitly computed inverse.
pub fn condition_estimate(a: &CMatrix) -> f64 {
    match invert(a) {
        Ok(inv) => a.norm_row_sum() * inv.norm_row_sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Eigendecomposition of a hermitian matrix by cyclic complex Jacobi
/// rotations. Returns (ascending real eigenvalues, unitary eigenvector
/// columns). Errors if the input deviates from hermitian by more than
/// `herm_tol` times its magnitude.
pub fn hermitian_eigen(a: &CMatrix, herm_tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    assert!(a.is_square());
    let n = a.nrows();
    let scale = a.max_abs().max(1e-300);
    let dev = a.sub(&a.adjoint()).max_abs();
    if dev > herm_tol * scale {
        return Err(Error::NonHermitian { deviation: dev });
    }
    // work on the hermitian average so roundoff asymmetry cannot drift
    let mut h = a.add(&a.adjoint()).scaled(Complex64::new(0.5, 0.0));
    let mut v = CMatrix::identity(n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(h[(p, q)].norm());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let hpq = h[(p, q)];
                let r = hpq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phi = hpq.arg();
                let alpha = h[(p, p)].re;
                let beta = h[(q, q)].re;
                let theta = 0.5 * (2.0 * r).atan2(alpha - beta);
                let (s, c) = theta.sin_cos();
                let eip = Complex64::from_polar(1.0, phi);
                // U: U_pp=c, U_pq=-s e^{i phi}, U_qp=s e^{-i phi}, U_qq=c
                let upq = -s * eip;
                let uqp = s * eip.conj();
                // H <- U^dagger H U, applied as row then column updates
                for j in 0..n {
                    let hpj = h[(p, j)];
                    let hqj = h[(q, j)];
                    h[(p, j)] = c * hpj + uqp.conj() * hqj;
                    h[(q, j)] = upq.conj() * hpj + c * hqj;
                }
                for i in 0..n {
                    let hip = h[(i, p)];
                    let hiq = h[(i, q)];
                    h[(i, p)] = hip * c + hiq * uqp;
                    h[(i, q)] = hip * upq + hiq * c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * uqp;
                    v[(i, q)] = vip * upq + viq * c;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (h[(i, i)].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eigenvalues: Vec<f64> = pairs.iter().map(|(l, _)| *l).collect();
    let vectors = CMatrix::from_cols(&pairs.iter().map(|(_, i)| v.col(*i)).collect::<Vec<_>>());
    Ok((eigenvalues, vectors))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Signature {
    pub fn is_definite(&self) -> bool {
        self.zero == 0 && (self.positive == 0 || self.negative == 0)
    }
}

/// Inertia of a hermitian matrix; eigenvalues within `zero_tol` times the
/// spectral scale count as zero.
pub fn hermitian_signature(g: &CMatrix, zero_tol: f64) -> Result<Signature> {
    let (eigenvalues, _) = hermitian_eigen(g, 1e-9)?;
    let scale = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max).max(1e-300);
    let mut sig = Signature {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for l in eigenvalues {
        if l.abs() <= zero_tol * scale {
            sig.zero += 1;
        } else if l > 0.0 {
            sig.positive += 1;
        } else {
            sig.negative += 1;
        }
    }
    Ok(sig)
}

/// Characteristic polynomial coefficients by the Faddeev-LeVerrier
/// recurrence: p(x) = x^n + c[0] x^{n-1} + ... + c[n-1].
pub fn char_poly(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = Vec::with_capacity(n);
    let mut m = a.clone();
    for k in 1..=n {
        let c = -m.trace() / k as f64;
        coeffs.push(c);
        if k < n {
            let mut shifted = m;
            for i in 0..n {
                shifted[(i, i)] += c;
            }
            m = a.mul(&shifted);
        }
    }
    coeffs
}

fn poly_eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    let mut v = ONE;
    for c in coeffs {
        v = v * x + c;
    }
    v
}

/// All roots of a monic polynomial by Durand-Kerner iteration. Intended for
/// degree <= 6 with well-separated roots.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return vec![];
    }
    let radius = 1.0
        + coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) * radius / seed.norm().powi(k as i32))
        .collect();
    for _ in 0..400 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = ONE;
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                roots[i] += Complex64::new(1e-6 * radius, 1e-6 * radius);
                max_step = f64::INFINITY;
                continue;
            }
            let step = poly_eval(coeffs, roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= 1e-15 * radius {
            break;
        }
    }
    roots
}

/// Eigenvalues and eigenvectors of a general square matrix with distinct
/// eigenvalues: characteristic polynomial roots plus inverse iteration.
/// Errors if two eigenvalues sit closer than 1e-6 times the matrix scale.
pub fn eigen_distinct(a: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = a.nrows();
    let scale = a.max_abs().max(1.0);
    let coeffs = char_poly(a);
    let mut eigenvalues = poly_roots(&coeffs);
    eigenvalues.sort_by(|x, y| {
        (x.re, x.im)
            .partial_cmp(&(y.re, y.im))
            .unwrap()
    });
    for i in 0..n {
        for j in i + 1..n {
            let gap = (eigenvalues[i] - eigenvalues[j]).norm();
            if gap < 1e-6 * scale {
                return Err(Error::EigenvalueCollision { gap });
            }
        }
    }
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= lambda + Complex64::new(1e-12 * scale, 1e-12 * scale);
        }
        let lu = Lu::factor(&shifted);
        // deterministic pseudo-random start keeps the iteration reproducible
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + (i as f64 * 0.7391).sin(), (i as f64 * 1.133).cos()))
            .collect();
        for _ in 0..3 {
            let y = lu.solve(&x)?;
            let norm = vec_max_abs(&y).max(1e-300);
            x = vec_scale(&y, Complex64::new(1.0 / norm, 0.0));
        }
        // normalize by the largest component for a reproducible phase
        let (mut pivot, mut pivot_abs) = (ONE, 0.0);
        for &v in &x {
            if v.norm() > pivot_abs {
                pivot_abs = v.norm();
                pivot = v;
            }
        }
        x = vec_scale(&x, pivot.inv());
        let residual = vec_max_abs(&vec_sub(&a.matvec(&x), &vec_scale(&x, lambda)));
        if residual > 1e-7 * scale {
            return Err(Error::Singular {
                context: format!("inverse iteration stalled (residual {residual:.2e})"),
            });
        }
        vectors.set_col(k, &x);
    }
    Ok((eigenvalues, vectors))
}

/// Matrix exponential by Pade-13 scaling and squaring. Used as an
/// independent cross-check against closed-form exponentials.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let norm = a.norm_col_sum();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let m = a.scaled(Complex64::new(1.0 / 2f64.powi(s as i32), 0.0));
    let id = CMatrix::identity(n);
    let m2 = m.mul(&m);
    let m4 = m2.mul(&m2);
    let m6 = m2.mul(&m4);
    let re = |x: f64| Complex64::new(x, 0.0);
    let u_inner = m6
        .scaled(re(B[13]))
        .add(&m4.scaled(re(B[11])))
        .add(&m2.scaled(re(B[9])));
    let u = m.mul(
        &m6.mul(&u_inner)
            .add(&m6.scaled(re(B[7])))
            .add(&m4.scaled(re(B[5])))
            .add(&m2.scaled(re(B[3])))
            .add(&id.scaled(re(B[1]))),
    );
    let v_inner = m6
        .scaled(re(B[12]))
        .add(&m4.scaled(re(B[10])))
        .add(&m2.scaled(re(B[8])));
    let v = m6
        .mul(&v_inner)
        .add(&m6.scaled(re(B[6])))
        .add(&m4.scaled(re(B[4])))
        .add(&m2.scaled(re(B[2])))
        .add(&id.scaled(re(B[0])));
    let lhs = v.sub(&u);
    let rhs = v.add(&u);
    let lu = Lu::factor(&lhs);
    let mut r = lu.solve_matrix(&rhs)?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn lu_inverse_round_trip() {
        for seed in 0..20u64 {
            let n = 1 + (seed as usize % 6);
            let a = random_matrix(n, seed);
            let inv = invert(&a).unwrap();
            let resid = a.mul(&inv).max_abs_diff(&CMatrix::identity(n));
            assert!(resid < 1e-11, "seed {seed}: residual {resid:e}");
            let back = invert(&inv).unwrap();
            assert!(back.max_abs_diff(&a) < 1e-10);
        }
    }

    #[test]
    fn determinant_of_triangular_is_diagonal_product() {
        let a = CMatrix::from_fn(3, 3, |i, j| {
            if i <= j {
                Complex64::new((i + j + 1) as f64, 0.5)
            } else {
                ZERO
            }
        });
        let expect = a[(0, 0)] * a[(1, 1)] * a[(2, 2)];
        assert!((det(&a) - expect).norm() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_recovers_known_spectrum() {
        // diag(-1, 2, 5) conjugated by a made-up unitary-ish rotation
        let d = CMatrix::diag(&[
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(5.0, 0.0),
        ]);
        let g = random_matrix(3, 7);
        let q = {
            // Gram-Schmidt on columns of g
            let mut cols: Vec<Vec<Complex64>> = (0..3).map(|j| g.col(j)).collect();
            for j in 0..3 {
                for k in 0..j {
                    let proj = cols[k]
                        .iter()
                        .zip(&cols[j])
                        .map(|(a, b)| a.conj() * b)
                        .fold(ZERO, |acc, t| acc + t);
                    let prev = cols[k].clone();
                    for (x, p) in cols[j].iter_mut().zip(prev) {
                        *x -= proj * p;
                    }
                }
                let norm = cols[j].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                for x in cols[j].iter_mut() {
                    *x /= norm;
                }
            }
            CMatrix::from_cols(&cols)
        };
        let h = q.mul(&d).mul(&q.adjoint());
        let (ev, vecs) = hermitian_eigen(&h, 1e-9).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-10);
        assert!((ev[1] - 2.0).abs() < 1e-10);
        assert!((ev[2] - 5.0).abs() < 1e-10);
        for k in 0..3 {
            let v = vecs.col(k);
            let r = vec_max_abs(&vec_sub(
                &h.matvec(&v),
                &vec_scale(&v, Complex64::new(ev[k], 0.0)),
            ));
            assert!(r < 1e-10);
        }
        let sig = hermitian_signature(&h, 1e-10).unwrap();
        assert_eq!(
            sig,
            Signature {
                positive: 2,
                negative: 1,
                zero: 0
            }
        );
    }

    #[test]
    fn eigen_distinct_recovers_conjugated_diagonal() {
        let lambda = [
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.7, 0.4),
            Complex64::new(1.9, -0.2),
            Complex64::new(0.05, 1.3),
        ];
        let g = random_matrix(4, 11).add(&CMatrix::identity(4).scaled(Complex64::new(3.0, 0.0)));
        let a = g.mul(&CMatrix::diag(&lambda)).mul(&invert(&g).unwrap());
        let (ev, vecs) = eigen_distinct(&a).unwrap();
        let mut expect = lambda.to_vec();
        expect.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
        for (got, want) in ev.iter().zip(&expect) {
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
        for (k, &l) in ev.iter().enumerate() {
            let v = vecs.col(k);
            let r = vec_max_abs(&vec_sub(&a.matvec(&v), &vec_scale(&v, l)));
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn expm_matches_nilpotent_and_diagonal_closed_forms() {
        let n2 = CMatrix::from_fn(2, 2, |i, j| {
            if (i, j) == (0, 1) {
                Complex64::new(3.0, -1.0)
            } else {
                ZERO
            }
        });
        let e = expm(&n2).unwrap();
        assert!((e[(0, 1)] - Complex64::new(3.0, -1.0)).norm() < 1e-13);
        assert!((e[(0, 0)] - ONE).norm() < 1e-13);

        let d = CMatrix::diag(&[Complex64::new(0.2, 1.0), Complex64::new(-2.5, 0.3)]);
        let ed = expm(&d).unwrap();
        assert!((ed[(0, 0)] - d[(0, 0)].exp()).norm() < 1e-12);
        assert!((ed[(1, 1)] - d[(1, 1)].exp()).norm() < 1e-12);
        assert!(ed[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        let mut acc = CompensatedSum::new();
        let big = Complex64::new(1e16, 0.0);
        acc.add(big);
        for _ in 0..10 {
            acc.add(Complex64::new(0.1, 0.0));
        }
        acc.add(-big);
        assert!((acc.value().re - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn det_is_multiplicative(seed_a in 0u64..500, seed_b in 500u64..1000, n in 1usize..5) {
            let a = random_matrix(n, seed_a);
            let b = random_matrix(n, seed_b);
            let lhs = det(&a.mul(&b));
            let rhs = det(&a) * det(&b);
            let scale = lhs.norm().max(rhs.norm()).max(1e-6);
            prop_assert!((lhs - rhs).norm() / scale < 1e-10);
        }
    }
}
