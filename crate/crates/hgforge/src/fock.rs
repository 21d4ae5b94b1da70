//! Lattice-indexed fermion pairs and their Wick calculus. Each lattice site
//! (n1, n2) carries a copy of the doubled space with four families of
//! distinguished vectors built from the flowed eigenbases at the times
//! tau1 = n1 omega1, tau2 = n2 omega2. The product on a site block is the
//! two-time pairing deformed by a zero-mode subtraction proportional to
//! 1/(tau1 + tau2), weighted by the parity of n1; it closes on the four
//! families with rational coefficients, which is what makes vacuum
//! expectations of the generating fields computable as signed lattice sums.
//! Summed in the fixed conditional order those reproduce the doubly
//! periodic reciprocal kernel, and in the wide-lattice limit the cosecant.
//!
//! Also here: the two distinguished bases of the identified field span with
//! their Gram matrices (the closed-form inverse from the kernel module
//! supplies the exact dual-basis statement; the naive weight-product
//! inverse is kept as a reported contrast, it only becomes exact in the
//! wide-lattice limit), and the quaternion action on the four families,
//! realized both site-wise and on the abstract 4m-dimensional span.

use crate::cauchy::{cauchy_inverse_closed_form, cauchy_matrix, swap_zero_infinity, CauchyKind};
use crate::elliptic::{csc_series, euler_accelerate, EllipticValue, LatticeSpec};
use crate::flows::{ex_matrix, ey_matrix, quaternion_action, tau_product};
use crate::linalg::{bilinear, vec_max_abs, vec_max_abs_diff, CMatrix, CompensatedSum, I, ONE, ZERO};
use crate::params::ExponentSet;
use crate::residue::{mu2, nu2, ResidueTriple};
use crate::{guard_denominator, Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FermionKind {
    F0,
    F0Dag,
    FInf,
    FInfDag,
}

/// One letter of a Wick word: a family, an eigenindex, and the lattice
/// site whose times the family is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FermionLabel {
    pub kind: FermionKind,
    pub index: usize,
    pub site: (i64, i64),
}

impl FermionLabel {
    pub fn new(kind: FermionKind, index: usize, site: (i64, i64)) -> Self {
        FermionLabel { kind, index, site }
    }
}

pub type WickWord = Vec<FermionLabel>;

fn site_times(lat: &LatticeSpec, site: (i64, i64)) -> (Complex64, Complex64) {
    (
        (site.0 as f64) * lat.omega1,
        (site.1 as f64) * lat.omega2,
    )
}

/// (-1)^{n1}, the weight the site parity puts on every product in its block.
fn site_sign(site: (i64, i64)) -> f64 {
    if site.0.rem_euclid(2) == 1 {
        -1.0
    } else {
        1.0
    }
}

/// All pair products at one site, in closed form. Same-family products
/// vanish, as do the cross products with matching dagger parity; the three
/// surviving shapes are diagonal-over-weight minus the zero-mode term,
/// and the undaggered-daggered cross pair over the shifted kernel argument.
/// Cross-site pairs are zero by definition.
pub struct PairingKernel<'a> {
    pub triple: &'a ResidueTriple,
    pub lat: LatticeSpec,
}

impl<'a> PairingKernel<'a> {
    pub fn new(triple: &'a ResidueTriple, lat: LatticeSpec) -> Self {
        PairingKernel { triple, lat }
    }

    pub fn value(&self, a: &FermionLabel, b: &FermionLabel) -> Result<Complex64> {
        if a.site != b.site {
            return Ok(ZERO);
        }
        let e = &self.triple.e;
        let (t1, t2) = site_times(&self.lat, a.site);
        let s = t1 + t2;
        let sign = site_sign(a.site);
        // the zero-mode term is absent at the origin, where the product is
        // the plain two-block sum
        let zero_mode = if a.site == (0, 0) { ZERO } else { ONE / s };
        let scale = e.scale() + s.norm();
        use FermionKind::*;
        let val = match (a.kind, b.kind) {
            (F0, F0Dag) | (F0Dag, F0) => {
                let diag = if a.index == b.index {
                    let w = guard_denominator(
                        nu2(e, s)?[a.index],
                        scale,
                        "site weight",
                        a.index,
                        a.index,
                    )?;
                    ONE / w
                } else {
                    ZERO
                };
                diag - zero_mode
            }
            (FInf, FInfDag) | (FInfDag, FInf) => {
                let diag = if a.index == b.index {
                    let w = guard_denominator(
                        mu2(e, s)?[a.index],
                        scale,
                        "site weight",
                        a.index,
                        a.index,
                    )?;
                    ONE / w
                } else {
                    ZERO
                };
                diag - zero_mode
            }
            (F0, FInfDag) | (F0Dag, FInf) => {
                let d = guard_denominator(
                    e.a2 + e.b[a.index] - e.c[b.index] + s,
                    scale,
                    "kernel argument",
                    a.index,
                    b.index,
                )?;
                ONE / d - zero_mode
            }
            (FInfDag, F0) | (FInf, F0Dag) => {
                let d = guard_denominator(
                    e.a2 + e.b[b.index] - e.c[a.index] + s,
                    scale,
                    "kernel argument",
                    b.index,
                    a.index,
                )?;
                ONE / d - zero_mode
            }
            _ => ZERO,
        };
        Ok(val * sign)
    }
}

pub fn pairing(
    a: &FermionLabel,
    b: &FermionLabel,
    triple: &ResidueTriple,
    lat: &LatticeSpec,
) -> Result<Complex64> {
    PairingKernel::new(triple, *lat).value(a, b)
}

/// The four vector families at a site, as length-2m coordinate vectors over
/// the two blocks. The first block of the zero-side families holds the
/// b-eigenvector flowed to tau1, the second the same column flowed to tau2
/// times the imaginary unit (daggering flips that sign); the infinity-side
/// families hold the c-eigenvector columns with the two times swapped.
pub fn fermion_vector(
    label: &FermionLabel,
    triple: &ResidueTriple,
    lat: &LatticeSpec,
) -> Result<Vec<Complex64>> {
    let e = &triple.e;
    let m = e.m;
    let (t1, t2) = site_times(lat, label.site);
    let s = t1 + t2;
    let scale = e.scale() + s.norm();
    let i = label.index;
    let root_half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    use FermionKind::*;
    let (first, second, weight) = match label.kind {
        F0 | F0Dag => (
            triple.v.mul(&ex_matrix(e, t1)?).col(i),
            triple.v.mul(&ex_matrix(e, t2)?).col(i),
            nu2(e, s)?[i],
        ),
        FInf | FInfDag => (
            triple.w.mul(&ey_matrix(e, t2)?).col(i),
            triple.w.mul(&ey_matrix(e, t1)?).col(i),
            mu2(e, s)?[i],
        ),
    };
    let weight = guard_denominator(weight, scale, "site weight", i, i)?;
    let isign = match label.kind {
        F0 | FInf => I,
        F0Dag | FInfDag => -I,
    };
    let factor = root_half / weight;
    let mut out = Vec::with_capacity(2 * m);
    out.extend(first.iter().map(|z| z * factor));
    out.extend(second.iter().map(|z| z * isign * factor));
    Ok(out)
}

/// The site product evaluated from the coordinate vectors instead of the
/// closed table: the two-time pairings of the blocks, minus the zero-mode
/// correction built from the distinguished vector u, all weighted by the
/// site parity. The closed table must agree with this to roundoff.
pub fn pairing_direct(
    a: &FermionLabel,
    b: &FermionLabel,
    triple: &ResidueTriple,
    lat: &LatticeSpec,
) -> Result<Complex64> {
    if a.site != b.site {
        return Ok(ZERO);
    }
    let m = triple.m();
    let (t1, t2) = site_times(lat, a.site);
    let g12 = tau_product(triple, t1, t2)?.gram;
    let g21 = tau_product(triple, t2, t1)?.gram;
    let ga = fermion_vector(a, triple, lat)?;
    let gb = fermion_vector(b, triple, lat)?;
    let u = &triple.u;
    let mut val = bilinear(&g12, &ga[..m], &gb[..m]) + bilinear(&g21, &ga[m..], &gb[m..]);
    if a.site != (0, 0) {
        let s = t1 + t2;
        val -= (bilinear(&g12, u, &ga[..m]) * bilinear(&g12, u, &gb[..m])
            + bilinear(&g21, u, &ga[m..]) * bilinear(&g21, u, &gb[m..]))
            / s;
    }
    Ok(val * site_sign(a.site))
}

const WICK_CAP: usize = 12;

/// Vacuum expectation of a word: one on the empty word, zero on odd
/// lengths, and the signed sum over perfect matchings otherwise. The sign
/// of a matching is the parity of its crossing number.
pub fn wick_vev(word: &[FermionLabel], kernel: &PairingKernel) -> Result<Complex64> {
    let n = word.len();
    if n > WICK_CAP {
        return Err(Error::InvalidArgument(format!(
            "word length {n} exceeds the matching cap {WICK_CAP}"
        )));
    }
    if n == 0 {
        return Ok(ONE);
    }
    if n % 2 == 1 {
        return Ok(ZERO);
    }
    let mut kmat = vec![ZERO; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let v = kernel.value(&word[a], &word[b])?;
            kmat[a * n + b] = v;
            kmat[b * n + a] = v;
        }
    }
    let mut used = vec![false; n];
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n / 2);
    let mut total = CompensatedSum::new();
    enumerate_matchings(&mut used, &mut pairs, &kmat, n, &mut total);
    Ok(total.value())
}

fn enumerate_matchings(
    used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    kmat: &[Complex64],
    n: usize,
    total: &mut CompensatedSum,
) {
    let first = match used.iter().position(|&u| !u) {
        Some(p) => p,
        None => {
            let mut crossings = 0usize;
            for (x, &(a1, b1)) in pairs.iter().enumerate() {
                for &(a2, b2) in &pairs[x + 1..] {
                    if a1 < a2 && a2 < b1 && b1 < b2 {
                        crossings += 1;
                    }
                }
            }
            let mut term = if crossings % 2 == 1 { -ONE } else { ONE };
            for &(a, b) in pairs.iter() {
                term *= kmat[a * n + b];
            }
            total.add(term);
            return;
        }
    };
    used[first] = true;
    for b in first + 1..n {
        if used[b] {
            continue;
        }
        used[b] = true;
        pairs.push((first, b));
        enumerate_matchings(used, pairs, kmat, n, total);
        pairs.pop();
        used[b] = false;
    }
    used[first] = false;
}

/// Independent route: expand along the first letter with alternating signs
/// and recurse on the remainder.
pub fn wick_vev_recursive(word: &[FermionLabel], kernel: &PairingKernel) -> Result<Complex64> {
    let n = word.len();
    if n > WICK_CAP {
        return Err(Error::InvalidArgument(format!(
            "word length {n} exceeds the matching cap {WICK_CAP}"
        )));
    }
    if n == 0 {
        return Ok(ONE);
    }
    if n % 2 == 1 {
        return Ok(ZERO);
    }
    let mut total = ZERO;
    for j in 1..n {
        let sign = if j % 2 == 1 { ONE } else { -ONE };
        let mut rest: Vec<FermionLabel> = Vec::with_capacity(n - 2);
        rest.extend_from_slice(&word[1..j]);
        rest.extend_from_slice(&word[j + 1..]);
        total += sign * kernel.value(&word[0], &word[j])? * wick_vev_recursive(&rest, kernel)?;
    }
    Ok(total)
}

/// Vacuum pairing of two generating fields, with both formal variables at
/// one: the sum of the cross pairing over all sites, inner index summed
/// symmetrically with the alternating tail tightened per slice, outer index
/// extended until the geometric tail clears. The outer slices run in
/// parallel; the reduction is ordered, since the double sum only converges
/// conditionally.
pub fn field_vev_elliptic(
    i: usize,
    j: usize,
    kernel: &PairingKernel,
    accelerate: bool,
) -> Result<EllipticValue> {
    field_vev_elliptic_with((FermionKind::FInfDag, FermionKind::F0), i, j, kernel, accelerate)
}

/// Same sum with the dagger placement swapped between the two families.
pub fn field_vev_elliptic_daggered(
    i: usize,
    j: usize,
    kernel: &PairingKernel,
    accelerate: bool,
) -> Result<EllipticValue> {
    field_vev_elliptic_with((FermionKind::FInf, FermionKind::F0Dag), i, j, kernel, accelerate)
}

fn field_vev_elliptic_with(
    kinds: (FermionKind, FermionKind),
    i: usize,
    j: usize,
    kernel: &PairingKernel,
    accelerate: bool,
) -> Result<EllipticValue> {
    let e = &kernel.triple.e;
    let lat = &kernel.lat;
    let x = e.a2 + e.b[i] - e.c[j];
    let d = lat.lattice_distance(x);
    if d < 1e-6 * lat.omega1.norm() {
        return Err(Error::Singular {
            context: format!("kernel argument within {d:.2e} of a lattice point"),
        });
    }
    let tau = lat.tau();
    let w = x / lat.omega1;
    let reach = ((w.im.abs() + 40.0 / std::f64::consts::PI) / tau.im).ceil() as usize + 1;
    let n2 = lat.n2.max(reach) as i64;
    let inf_label = |site| FermionLabel::new(kinds.0, j, site);
    let zero_label = |site| FermionLabel::new(kinds.1, i, site);
    let term = |site: (i64, i64)| -> Result<Complex64> {
        kernel.value(&inf_label(site), &zero_label(site))
    };
    let rows: Vec<i64> = (-n2..=n2).collect();
    let slices: Vec<(Complex64, f64, f64)> = rows
        .par_iter()
        .map(|&n| -> Result<(Complex64, f64, f64)> {
            let mut acc = CompensatedSum::new();
            let mut partials: Vec<Complex64> = Vec::with_capacity(lat.n1 + 1);
            acc.add(term((0, n))?);
            partials.push(acc.value());
            for k in 1..=lat.n1 as i64 {
                acc.add(term((k, n))? + term((-k, n))?);
                partials.push(acc.value());
            }
            let slice = if accelerate && partials.len() >= 16 {
                let window = partials.len().min(48);
                euler_accelerate(&partials[partials.len() - window..])
            } else {
                *partials.last().unwrap()
            };
            let k1 = lat.n1 as i64 + 1;
            let omitted = (term((k1, n))? + term((-k1, n))?).norm();
            let edge = if n.unsigned_abs() as i64 == n2 {
                slice.norm()
            } else {
                0.0
            };
            Ok((slice, omitted, edge))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = CompensatedSum::new();
    let mut tail_bound = 0.0;
    for (slice, omitted, edge) in slices {
        total.add(slice);
        tail_bound += omitted + edge;
    }
    Ok(EllipticValue {
        value: total.value(),
        tail_bound,
    })
}

/// Degenerate one-row version of the field pairing: the cosecant
/// partial-fraction series at the kernel argument, shared verbatim with
/// the series machinery it converges to.
pub fn field_vev_trig(
    i: usize,
    j: usize,
    e: &ExponentSet,
    n: usize,
    accelerate: bool,
) -> Result<Complex64> {
    csc_series(e.a2 + e.b[i] - e.c[j], n, accelerate)
}

/// The identified field span with its two distinguished bases. The mixed
/// Gram is the reciprocal-kernel matrix; expressing the second basis
/// through the first multiplies it by the weight products on the left.
/// `dual_residual` checks the mixed Gram against the exact closed-form
/// inverse, which is the statement that actually pins the second basis.
/// `printed_residual` measures how far the weight-product transpose route
/// is from being that inverse; for the sine kernel it vanishes, for the
/// doubly periodic kernel it decays with the lattice aspect only.
#[derive(Clone, Debug)]
pub struct HSpaceForm {
    /// Weight products of the kernel over the first-basis arguments; the
    /// first-basis Gram is diag(1/nu2).
    pub nu2: Vec<Complex64>,
    pub mu2: Vec<Complex64>,
    /// Mixed Gram of the two bases, entries 1/kernel(a2 + b_i - c_j).
    pub pairing: CMatrix,
    /// Coefficients of the second basis over the first: nu2_i * pairing_ij.
    pub basis_change: CMatrix,
    pub dual_residual: f64,
    pub printed_residual: f64,
}

fn kernel_weights(kind: &CauchyKind, e: &ExponentSet) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let scale = e.scale();
    let mut nu = Vec::with_capacity(e.m);
    let mut mu = Vec::with_capacity(e.m);
    for i in 0..e.m {
        let mut val = ONE;
        for k in 0..e.m {
            val *= kind.kernel(e.a2 + e.b[i] - e.c[k])?;
            if k != i {
                val /= guard_denominator(kind.kernel(e.b[i] - e.b[k])?, scale, "b gaps", i, k)?;
            }
        }
        nu.push(val);
        let mut val = ONE;
        for k in 0..e.m {
            val *= kind.kernel(e.a2 + e.b[k] - e.c[i])?;
            if k != i {
                val /= guard_denominator(kind.kernel(e.c[k] - e.c[i])?, scale, "c gaps", k, i)?;
            }
        }
        mu.push(val);
    }
    Ok((nu, mu))
}

fn h_form(kind: &CauchyKind, e: &ExponentSet) -> Result<HSpaceForm> {
    let m = e.m;
    let (nu, mu) = kernel_weights(kind, e)?;
    let pairing = cauchy_matrix(kind, e)?;
    let basis_change = CMatrix::from_fn(m, m, |i, j| nu[i] * pairing[(i, j)]);
    let dual_residual = pairing
        .mul(&cauchy_inverse_closed_form(kind, e)?)
        .max_abs_diff(&CMatrix::identity(m));
    let weighted = pairing
        .transpose()
        .mul(&CMatrix::diag(&nu))
        .mul(&pairing);
    let expected: Vec<Complex64> = (0..m)
        .map(|i| Ok(ONE / guard_denominator(mu[i], e.scale(), "weight product", i, i)?))
        .collect::<Result<Vec<_>>>()?;
    let printed_residual =
        weighted.max_abs_diff(&CMatrix::diag(&expected)) / weighted.max_abs().max(1.0);
    Ok(HSpaceForm {
        nu2: nu,
        mu2: mu,
        pairing,
        basis_change,
        dual_residual,
        printed_residual,
    })
}

/// Both identified spans on the doubly periodic kernel; the second is the
/// mirror with the two singular points exchanged.
pub fn h_space_products(e: &ExponentSet, lat: &LatticeSpec) -> Result<(HSpaceForm, HSpaceForm)> {
    let kind = CauchyKind::Elliptic(*lat);
    Ok((h_form(&kind, e)?, h_form(&kind, &swap_zero_infinity(e)?)?))
}

/// The sine-kernel pair, where the weight-product route is the exact
/// inverse and both residuals vanish together.
pub fn h_space_trig(e: &ExponentSet) -> Result<(HSpaceForm, HSpaceForm)> {
    let kind = CauchyKind::Trigonometric;
    Ok((h_form(&kind, e)?, h_form(&kind, &swap_zero_infinity(e)?)?))
}

/// Image of one family under one quaternion generator, read off the closed
/// action table: the generator index is 0, 1, 2 for i, j, k.
fn table_image(kind: FermionKind, generator: usize) -> (FermionKind, Complex64) {
    use FermionKind::*;
    match (generator, kind) {
        (0, F0) => (F0Dag, -ONE),
        (0, F0Dag) => (F0, ONE),
        (0, FInf) => (FInfDag, -ONE),
        (0, FInfDag) => (FInf, ONE),
        (1, F0) => (F0, -I),
        (1, F0Dag) => (F0Dag, I),
        (1, FInf) => (FInf, -I),
        (1, FInfDag) => (FInfDag, I),
        (2, F0) => (F0Dag, I),
        (2, F0Dag) => (F0, I),
        (2, FInf) => (FInfDag, I),
        (2, FInfDag) => (FInf, I),
        _ => unreachable!("generator index out of range"),
    }
}

const FAMILIES: [FermionKind; 4] = [
    FermionKind::F0,
    FermionKind::F0Dag,
    FermionKind::FInf,
    FermionKind::FInfDag,
];

fn family_offset(kind: FermionKind) -> usize {
    FAMILIES.iter().position(|&k| k == kind).unwrap()
}

/// The three generators as matrices on the abstract 4m-dimensional span of
/// the four families, in the family-major basis order.
pub fn field_generators(m: usize) -> [CMatrix; 3] {
    let build = |generator: usize| {
        let mut q = CMatrix::zeros(4 * m, 4 * m);
        for &kind in &FAMILIES {
            let (image, coef) = table_image(kind, generator);
            let from = family_offset(kind) * m;
            let to = family_offset(image) * m;
            for i in 0..m {
                q[(to + i, from + i)] = coef;
            }
        }
        q
    };
    [build(0), build(1), build(2)]
}

#[derive(Clone, Debug)]
pub struct ActionReport {
    /// Defect of i^2 = j^2 = k^2 = -Id, ij = k, jk = i, ki = j on the span.
    pub algebra_residual: f64,
    /// Worst defect of Q^t G Q = sign(Q) G over the sampled sites, with the
    /// site Gram assembled from the pairing table and signs (-1, +1, -1).
    pub gram_sign_residual: f64,
    /// Worst mismatch between the site-wise block action on the coordinate
    /// vectors and the closed table image, relative per vector.
    pub site_residual: f64,
    pub sites: Vec<(i64, i64)>,
}

/// Realizes the action table on the abstract span and checks it against
/// the site-wise block matrices applied to the coordinate vectors at
/// randomly sampled sites.
pub fn quaternion_field_action(
    triple: &ResidueTriple,
    lat: &LatticeSpec,
    seed: u64,
    n_sites: usize,
) -> Result<ActionReport> {
    let m = triple.m();
    let kernel = PairingKernel::new(triple, *lat);
    let [qi, qj, qk] = field_generators(m);

    let neg_id = CMatrix::identity(4 * m).scaled(-ONE);
    let mut algebra = qi.mul(&qi).max_abs_diff(&neg_id);
    algebra = algebra.max(qj.mul(&qj).max_abs_diff(&neg_id));
    algebra = algebra.max(qk.mul(&qk).max_abs_diff(&neg_id));
    algebra = algebra.max(qi.mul(&qj).max_abs_diff(&qk));
    algebra = algebra.max(qj.mul(&qk).max_abs_diff(&qi));
    algebra = algebra.max(qk.mul(&qi).max_abs_diff(&qj));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Vec::with_capacity(n_sites);
    while sites.len() < n_sites {
        let site = (rng.gen_range(-3..=3i64), rng.gen_range(-3..=3i64));
        sites.push(site);
    }

    let mut gram_sign: f64 = 0.0;
    let mut site_resid: f64 = 0.0;
    for &site in &sites {
        let labels: Vec<FermionLabel> = FAMILIES
            .iter()
            .flat_map(|&kind| (0..m).map(move |i| FermionLabel::new(kind, i, site)))
            .collect();
        let gram = CMatrix::from_fn(4 * m, 4 * m, |r, c| {
            kernel.value(&labels[r], &labels[c]).unwrap_or(ZERO)
        });
        let gscale = gram.max_abs().max(1.0);
        for (q, sign) in [(&qi, -1.0), (&qj, 1.0), (&qk, -1.0)] {
            let moved = q.transpose().mul(&gram).mul(q);
            gram_sign = gram_sign
                .max(moved.max_abs_diff(&gram.scaled(Complex64::new(sign, 0.0))) / gscale);
        }

        let (t1, t2) = site_times(lat, site);
        let action = quaternion_action(triple, t1, t2)?;
        let blocks = [&action.qi, &action.qj, &action.qk];
        for &kind in &FAMILIES {
            for i in 0..m {
                let x = fermion_vector(&FermionLabel::new(kind, i, site), triple, lat)?;
                let scale = vec_max_abs(&x).max(1.0);
                for (generator, block) in blocks.iter().enumerate() {
                    let moved = block.matvec(&x);
                    let (image, coef) = table_image(kind, generator);
                    let expect: Vec<Complex64> =
                        fermion_vector(&FermionLabel::new(image, i, site), triple, lat)?
                            .iter()
                            .map(|z| z * coef)
                            .collect();
                    site_resid = site_resid.max(vec_max_abs_diff(&moved, &expect) / scale);
                }
            }
        }
    }

    Ok(ActionReport {
        algebra_residual: algebra,
        gram_sign_residual: gram_sign,
        site_residual: site_resid,
        sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{inv_sn, inv_sn_factored};
    use crate::params::{
        make_positivity_set, sample_real, PositivityColumn, RealExponentSet, DELTA_SEP,
    };
    use crate::residue::build_residue_triple;
    use std::f64::consts::PI;

    fn real_triple(m: usize, seed: u64) -> ResidueTriple {
        let e = sample_real(m, seed, DELTA_SEP).unwrap().to_complex();
        build_residue_triple(&e).unwrap()
    }

    fn lat(omega2: Complex64) -> LatticeSpec {
        LatticeSpec::new(ONE, omega2).unwrap()
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn origin_vectors_collapse_to_the_residue_eigenvectors() {
        let t = real_triple(3, 101);
        let l = lat(Complex64::new(0.0, 0.8));
        let nu0 = nu2(&t.e, ZERO).unwrap();
        let root_half = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..3 {
            let f = fermion_vector(&FermionLabel::new(FermionKind::F0, i, (0, 0)), &t, &l).unwrap();
            let fd =
                fermion_vector(&FermionLabel::new(FermionKind::F0Dag, i, (0, 0)), &t, &l).unwrap();
            let vi = t.v.col(i);
            for j in 0..3 {
                let expect = vi[j] * root_half / nu0[i];
                assert!((f[j] - expect).norm() <= 1e-13 * expect.norm().max(1.0));
                assert!((f[j + 3] - I * expect).norm() <= 1e-13 * expect.norm().max(1.0));
                // daggering flips only the imaginary block
                assert_eq!(f[j], fd[j]);
                assert_eq!(f[j + 3], -fd[j + 3]);
            }
        }
        let far = fermion_vector(&FermionLabel::new(FermionKind::FInf, 1, (2, -3)), &t, &l).unwrap();
        assert!(vec_max_abs(&far).is_finite());
    }

    #[test]
    fn pairing_table_matches_the_direct_evaluation() {
        let t = real_triple(2, 103);
        let l = lat(Complex64::new(0.0, 0.8));
        let kernel = PairingKernel::new(&t, l);
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        for _ in 0..10 {
            let site = (rng.gen_range(-3..=3i64), rng.gen_range(-3..=3i64));
            let labels: Vec<FermionLabel> = FAMILIES
                .iter()
                .flat_map(|&kind| (0..2).map(move |i| FermionLabel::new(kind, i, site)))
                .collect();
            for a in &labels {
                for b in &labels {
                    let table = kernel.value(a, b).unwrap();
                    let direct = pairing_direct(a, b, &t, &l).unwrap();
                    assert!(
                        (table - direct).norm() <= 1e-10 * table.norm().max(1.0),
                        "site {site:?} kinds {:?}/{:?} table {table} direct {direct}",
                        a.kind,
                        b.kind
                    );
                    // the product is complex symmetric by construction
                    assert_eq!(table, kernel.value(b, a).unwrap());
                }
            }
        }
        // cross-site letters never pair
        let a = FermionLabel::new(FermionKind::F0, 0, (1, 0));
        let b = FermionLabel::new(FermionKind::F0Dag, 0, (0, 1));
        assert_eq!(kernel.value(&a, &b).unwrap(), ZERO);
    }

    #[test]
    fn origin_pairing_is_the_rational_kernel() {
        let t = real_triple(3, 107);
        let l = lat(Complex64::new(0.0, 0.8));
        let kernel = PairingKernel::new(&t, l);
        let e = &t.e;
        for i in 0..3 {
            for j in 0..3 {
                let a = FermionLabel::new(FermionKind::F0, i, (0, 0));
                let b = FermionLabel::new(FermionKind::FInfDag, j, (0, 0));
                let expect = ONE / (e.a2 + e.b[i] - e.c[j]);
                assert!((kernel.value(&a, &b).unwrap() - expect).norm() <= 1e-14);
                // no zero-mode term at the origin site
                let aa = FermionLabel::new(FermionKind::F0, i, (0, 0));
                let bb = FermionLabel::new(FermionKind::F0Dag, j, (0, 0));
                let diag = kernel.value(&aa, &bb).unwrap();
                if i == j {
                    assert!((diag - ONE / nu2(e, ZERO).unwrap()[i]).norm() <= 1e-14);
                } else {
                    assert_eq!(diag, ZERO);
                }
            }
        }
    }

    #[test]
    fn wick_routes_agree_and_respect_parity() {
        let t = real_triple(2, 109);
        let l = lat(Complex64::new(0.0, 0.8));
        let kernel = PairingKernel::new(&t, l);
        assert_eq!(wick_vev(&[], &kernel).unwrap(), ONE);

        let mut rng = ChaCha8Rng::seed_from_u64(111);
        let letter = |rng: &mut ChaCha8Rng| {
            FermionLabel::new(
                FAMILIES[rng.gen_range(0..4)],
                rng.gen_range(0..2),
                (rng.gen_range(-2..=2i64), rng.gen_range(-2..=2i64)),
            )
        };
        let odd: Vec<FermionLabel> = (0..3).map(|_| letter(&mut rng)).collect();
        assert_eq!(wick_vev(&odd, &kernel).unwrap(), ZERO);

        let two: Vec<FermionLabel> = (0..2).map(|_| letter(&mut rng)).collect();
        assert_eq!(
            wick_vev(&two, &kernel).unwrap(),
            kernel.value(&two[0], &two[1]).unwrap()
        );

        let four: Vec<FermionLabel> = (0..4).map(|_| letter(&mut rng)).collect();
        let k = |a: usize, b: usize| kernel.value(&four[a], &four[b]).unwrap();
        let explicit = k(0, 1) * k(2, 3) - k(0, 2) * k(1, 3) + k(0, 3) * k(1, 2);
        let matched = wick_vev(&four, &kernel).unwrap();
        assert!((matched - explicit).norm() <= 1e-13 * explicit.norm().max(1.0));

        for len in [6usize, 8] {
            let word: Vec<FermionLabel> = (0..len).map(|_| letter(&mut rng)).collect();
            let a = wick_vev(&word, &kernel).unwrap();
            let b = wick_vev_recursive(&word, &kernel).unwrap();
            assert!(
                (a - b).norm() <= 1e-12 * a.norm().max(1.0),
                "len {len}: {a} vs {b}"
            );
        }

        let long: Vec<FermionLabel> = (0..14).map(|_| letter(&mut rng)).collect();
        assert!(wick_vev(&long, &kernel).is_err());
    }

    #[test]
    fn field_pairing_reproduces_the_periodic_reciprocal() {
        let t = real_triple(3, 113);
        for omega2 in [Complex64::new(0.0, 0.8), Complex64::new(1.0, 1.5)] {
            let l = lat(omega2);
            let kernel = PairingKernel::new(&t, l);
            for i in 0..3 {
                for j in 0..3 {
                    let x = t.e.a2 + t.e.b[i] - t.e.c[j];
                    let sum = field_vev_elliptic(i, j, &kernel, true).unwrap();
                    let reference = inv_sn(x, &l).unwrap();
                    let err = (sum.value - reference.value).norm();
                    let budget = (sum.tail_bound + reference.tail_bound).max(1e-6);
                    assert!(
                        err <= budget,
                        "omega2 {omega2} pair ({i},{j}): err {err:e} budget {budget:e}"
                    );
                    // the theta-quotient route has no truncation at all
                    let exact = inv_sn_factored(x, &l).unwrap();
                    assert!((sum.value - exact).norm() <= 1e-6);
                    // both dagger placements give the same expectation
                    let swapped = field_vev_elliptic_daggered(i, j, &kernel, true).unwrap();
                    assert!((sum.value - swapped.value).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn wide_lattice_degenerates_to_the_cosecant() {
        let e = RealExponentSet::new(0.37, vec![0.21], vec![0.68], 0.0, 0.0)
            .unwrap()
            .to_complex();
        let t = build_residue_triple(&e).unwrap();
        let l = lat(Complex64::new(0.0, 40.0));
        let kernel = PairingKernel::new(&t, l);
        let x = e.a2 + e.b[0] - e.c[0];
        let csc = PI / (PI * x).sin();
        let sum = field_vev_elliptic(0, 0, &kernel, true).unwrap();
        assert!((sum.value - csc).norm() <= 1e-6);
        let trig = field_vev_trig(0, 0, &e, 400, true).unwrap();
        assert!((trig - csc).norm() <= 1e-8);
        assert!((sum.value - trig).norm() <= 1e-6);
        // truncated un-accelerated partial sums are the shared series
        assert_eq!(
            field_vev_trig(0, 0, &e, 250, false).unwrap(),
            crate::elliptic::csc_partial_fraction(x, 250).unwrap()
        );
    }

    #[test]
    fn half_integral_argument_gives_pi() {
        let e = RealExponentSet::new(0.8, vec![0.2], vec![0.5], 0.0, 0.0)
            .unwrap()
            .to_complex();
        let trig = field_vev_trig(0, 0, &e, 400, true).unwrap();
        assert!((trig - re(PI)).norm() <= 1e-10);
    }

    #[test]
    fn dual_bases_close_under_the_exact_inverse() {
        let e = sample_real(3, 115, DELTA_SEP).unwrap().to_complex();
        for omega2 in [Complex64::new(0.0, 0.8), Complex64::new(1.0, 1.5)] {
            let l = lat(omega2);
            let (h, h_mirror) = h_space_products(&e, &l).unwrap();
            assert!(h.dual_residual <= 1e-8, "dual {:e}", h.dual_residual);
            assert!(h_mirror.dual_residual <= 1e-8);
            // the weight-product transpose is visibly not the inverse here
            assert!(h.printed_residual >= 1e-4, "printed {:e}", h.printed_residual);
            // exchanging the singular points transposes the mixed Gram
            let diff = h_mirror.pairing.max_abs_diff(&h.pairing.transpose());
            assert!(diff <= 1e-10 * h.pairing.max_abs());
        }
        // scalar case: single entry, both routes carry the same product
        let e1 = RealExponentSet::new(0.37, vec![0.21], vec![0.68], 0.0, 0.0)
            .unwrap()
            .to_complex();
        let (h1, _) = h_space_products(&e1, &lat(Complex64::new(0.0, 0.8))).unwrap();
        assert!(h1.printed_residual <= 1e-12);
        assert!(h1.dual_residual <= 1e-12);
        let sn = ONE / inv_sn_factored(e1.a2 + e1.b[0] - e1.c[0], &lat(Complex64::new(0.0, 0.8)))
            .unwrap();
        assert!((h1.nu2[0] - sn).norm() <= 1e-12);
        assert!((h1.mu2[0] - sn).norm() <= 1e-12);
    }

    #[test]
    fn sine_kernel_bases_are_simultaneously_orthogonal() {
        let e = sample_real(3, 117, DELTA_SEP).unwrap().to_complex();
        let (h, h_mirror) = h_space_trig(&e).unwrap();
        assert!(h.printed_residual <= 1e-12);
        assert!(h.dual_residual <= 1e-12);
        assert!(h_mirror.printed_residual <= 1e-12);

        // wide-lattice limit: pi-rescaled periodic weights land on the sine
        // weights, and the weight-product route becomes exact
        let l = lat(Complex64::new(0.0, 40.0));
        let (h_ell, _) = h_space_products(&e, &l).unwrap();
        for i in 0..3 {
            let scaled = h_ell.nu2[i] * PI;
            assert!((scaled - h.nu2[i]).norm() <= 1e-6 * h.nu2[i].norm().max(1.0));
            let scaled = h_ell.mu2[i] * PI;
            assert!((scaled - h.mu2[i]).norm() <= 1e-6 * h.mu2[i].norm().max(1.0));
        }
        assert!(h_ell.printed_residual <= 1e-6);
    }

    #[test]
    fn ladder_conditions_fix_the_weight_signs() {
        let l = lat(Complex64::new(0.0, 0.9));
        let signs = |e: &crate::params::ExponentSet| -> (Vec<f64>, Vec<f64>) {
            let (h, _) = h_space_products(e, &l).unwrap();
            let check = |w: &[Complex64]| {
                w.iter()
                    .map(|z| {
                        assert!(z.im.abs() <= 1e-10 * z.norm().max(1.0));
                        z.re.signum()
                    })
                    .collect::<Vec<f64>>()
            };
            (check(&h.nu2), check(&h.mu2))
        };
        let top = make_positivity_set(3, PositivityColumn::Column1, 119)
            .unwrap()
            .to_complex();
        let (nu_signs, mu_signs) = signs(&top);
        assert!(nu_signs.iter().chain(&mu_signs).all(|&s| s > 0.0));

        let bottom = make_positivity_set(3, PositivityColumn::Column2, 121)
            .unwrap()
            .to_complex();
        let (nu_signs, mu_signs) = signs(&bottom);
        assert!(nu_signs.iter().chain(&mu_signs).all(|&s| s < 0.0));

        let neither = make_positivity_set(3, PositivityColumn::Neither, 123)
            .unwrap()
            .to_complex();
        let (nu_signs, mu_signs) = signs(&neither);
        let all: Vec<f64> = nu_signs.into_iter().chain(mu_signs).collect();
        assert!(all.iter().any(|&s| s > 0.0) && all.iter().any(|&s| s < 0.0));
    }

    #[test]
    fn quaternions_act_the_same_on_sites_and_fields() {
        let t = real_triple(3, 125);
        let l = lat(Complex64::new(0.0, 0.8));
        let report = quaternion_field_action(&t, &l, 127, 10).unwrap();
        assert!(report.algebra_residual <= 1e-12);
        assert!(report.gram_sign_residual <= 1e-12);
        assert!(
            report.site_residual <= 1e-9,
            "site residual {:e}",
            report.site_residual
        );
        assert_eq!(report.sites.len(), 10);
    }
}
