//! Exponent-set parameters shared by every module: the scalar a2, the vectors
//! b and c of length m, flow constants k1, k2, and a1 which is never free but
//! always derived from the trace condition
//!
//!     a1 + (m-1) a2 + sum_i (b_i - c_i) = 0.
//!
//! Samplers are deterministic in the seed and enforce genericity: no
//! difference b_i-b_j, c_i-c_j or b_i-c_j may sit near an integer, since
//! every denominator downstream is built from such differences.

use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default margin around integers for genericity checks.
pub const EPS_INT: f64 = 1e-3;
/// Default pairwise separation enforced by the samplers.
pub const DELTA_SEP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentSet {
    pub m: usize,
    pub a1: Complex64,
    pub a2: Complex64,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub k1: Complex64,
    pub k2: Complex64,
}

impl ExponentSet {
    /// Builds a set with a1 derived from the trace condition.
    pub fn new(
        a2: Complex64,
        b: Vec<Complex64>,
        c: Vec<Complex64>,
        k1: Complex64,
        k2: Complex64,
    ) -> Result<Self> {
        if b.is_empty() || b.len() != c.len() {
            return Err(Error::InvalidArgument(format!(
                "need equal nonempty b, c lists (got {} and {})",
                b.len(),
                c.len()
            )));
        }
        let m = b.len();
        let sum_bc: Complex64 = b.iter().zip(&c).map(|(bi, ci)| bi - ci).sum();
        let a1 = -a2 * (m as f64 - 1.0) - sum_bc;
        Ok(ExponentSet {
            m,
            a1,
            a2,
            b,
            c,
            k1,
            k2,
        })
    }

    /// |a1 + (m-1) a2 + sum(b_i - c_i)|, zero up to roundoff by construction.
    pub fn trace_residual(&self) -> f64 {
        let sum_bc: Complex64 = self.b.iter().zip(&self.c).map(|(bi, ci)| bi - ci).sum();
        (self.a1 + self.a2 * (self.m as f64 - 1.0) + sum_bc).norm()
    }

    /// Typical magnitude of the parameters, used to scale resonance guards.
    pub fn scale(&self) -> f64 {
        self.b
            .iter()
            .chain(&self.c)
            .chain([&self.a1, &self.a2])
            .map(|z| z.norm())
            .fold(1.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealExponentSet {
    pub m: usize,
    pub a1: f64,
    pub a2: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
}

impl RealExponentSet {
    pub fn new(a2: f64, b: Vec<f64>, c: Vec<f64>, k1: f64, k2: f64) -> Result<Self> {
        if b.is_empty() || b.len() != c.len() {
            return Err(Error::InvalidArgument("need equal nonempty b, c lists".into()));
        }
        let m = b.len();
        let sum_bc: f64 = b.iter().zip(&c).map(|(bi, ci)| bi - ci).sum();
        let a1 = -a2 * (m as f64 - 1.0) - sum_bc;
        Ok(RealExponentSet {
            m,
            a1,
            a2,
            b,
            c,
            k1,
            k2,
        })
    }

    pub fn to_complex(&self) -> ExponentSet {
        let lift = |x: &f64| Complex64::new(*x, 0.0);
        ExponentSet {
            m: self.m,
            a1: Complex64::new(self.a1, 0.0),
            a2: Complex64::new(self.a2, 0.0),
            b: self.b.iter().map(lift).collect(),
            c: self.c.iter().map(lift).collect(),
            k1: Complex64::new(self.k1, 0.0),
            k2: Complex64::new(self.k2, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    /// All draws real, in [0, 1), b and c sorted ascending.
    Real01,
    /// Real and imaginary parts drawn from [0, 1).
    Complex,
}

/// Distance from a complex number to the nearest (real) integer.
fn dist_to_integer(d: Complex64) -> f64 {
    let n = d.re.round();
    (d - Complex64::new(n, 0.0)).norm()
}

fn generic_enough(a2: Complex64, b: &[Complex64], c: &[Complex64], gap: f64) -> bool {
    let m = b.len();
    for i in 0..m {
        for j in 0..m {
            if i < j
                && (dist_to_integer(b[i] - b[j]) < gap || dist_to_integer(c[i] - c[j]) < gap)
            {
                return false;
            }
            if dist_to_integer(b[i] - c[j]) < gap {
                return false;
            }
            // keeps the shifted Cauchy kernels a2 + b_i - c_j away from
            // poles and zeros; stricter than validate_genericity on purpose
            if dist_to_integer(a2 + b[i] - c[j]) < gap {
                return false;
            }
        }
    }
    true
}

/// Seed-deterministic parameter sampler. `delta_sep` doubles as the
/// genericity margin (the larger of it and [`EPS_INT`] is enforced).
pub fn sample_parameters(
    m: usize,
    seed: u64,
    mode: SampleMode,
    delta_sep: f64,
) -> Result<ExponentSet> {
    match mode {
        SampleMode::Real01 => Ok(sample_real(m, seed, delta_sep)?.to_complex()),
        SampleMode::Complex => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gap = delta_sep.max(EPS_INT);
            let draw = |rng: &mut ChaCha8Rng| {
                Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
            };
            'outer: for _ in 0..2_000 {
                // grow the lists value by value so each rejection is local
                let mut b: Vec<Complex64> = Vec::with_capacity(m);
                let mut c: Vec<Complex64> = Vec::with_capacity(m);
                for pass in 0..2 {
                    for _ in 0..m {
                        let mut placed = false;
                        for _ in 0..500 {
                            let x = draw(&mut rng);
                            let near = |y: &Complex64| dist_to_integer(x - y) < gap;
                            if !b.iter().any(near) && !c.iter().any(near) {
                                if pass == 0 { b.push(x) } else { c.push(x) };
                                placed = true;
                                break;
                            }
                        }
                        if !placed {
                            continue 'outer;
                        }
                    }
                }
                for _ in 0..500 {
                    let a2 = draw(&mut rng);
                    if generic_enough(a2, &b, &c, gap) {
                        let k1 = draw(&mut rng);
                        let k2 = draw(&mut rng);
                        return ExponentSet::new(a2, b, c, k1, k2);
                    }
                }
            }
            Err(Error::SamplingExhausted {
                attempts: 2_000,
                context: format!("complex mode, m={m}, gap={gap}"),
            })
        }
    }
}

/// Real sampler used for positivity and monodromy work: every drawn value in
/// [0, 1), b and c sorted, pairwise separations and genericity enforced.
pub fn sample_real(m: usize, seed: u64, delta_sep: f64) -> Result<RealExponentSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = delta_sep.max(EPS_INT);
    // distance on the circle R/Z, since all draws live in [0,1)
    let circ = |x: f64| (x - x.round()).abs();
    'outer: for _ in 0..2_000 {
        let mut b: Vec<f64> = Vec::with_capacity(m);
        let mut c: Vec<f64> = Vec::with_capacity(m);
        for pass in 0..2 {
            for _ in 0..m {
                let mut placed = false;
                for _ in 0..500 {
                    let x = rng.gen_range(0.0..1.0);
                    let near = |y: &f64| circ(x - y) < gap;
                    if !b.iter().any(near) && !c.iter().any(near) {
                        if pass == 0 { b.push(x) } else { c.push(x) };
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    continue 'outer;
                }
            }
        }
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        c.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for _ in 0..500 {
            let a2 = rng.gen_range(0.0..1.0);
            let kernel_ok = b
                .iter()
                .all(|bi| c.iter().all(|cj| circ(a2 + bi - cj) >= gap));
            if kernel_ok {
                let k1 = rng.gen_range(0.0..1.0);
                let k2 = rng.gen_range(0.0..1.0);
                return RealExponentSet::new(a2, b, c, k1, k2);
            }
        }
    }
    Err(Error::SamplingExhausted {
        attempts: 2_000,
        context: format!("real01 mode, m={m}, gap={gap}"),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericityViolation {
    /// "b-b", "c-c" or "b-c"
    pub family: &'static str,
    pub i: usize,
    pub j: usize,
    pub difference: Complex64,
    pub nearest_integer: i64,
}

/// Lists every difference within `eps_int` of an integer. Empty means the
/// set is generic enough for all closed formulas in this crate.
pub fn validate_genericity(e: &ExponentSet, eps_int: f64) -> Vec<GenericityViolation> {
    let mut out = Vec::new();
    let mut push = |family: &'static str, i: usize, j: usize, d: Complex64| {
        if dist_to_integer(d) < eps_int {
            out.push(GenericityViolation {
                family,
                i,
                j,
                difference: d,
                nearest_integer: d.re.round() as i64,
            });
        }
    };
    for i in 0..e.m {
        for j in 0..e.m {
            if i < j {
                push("b-b", i, j, e.b[i] - e.b[j]);
                push("c-c", i, j, e.c[i] - e.c[j]);
            }
            push("b-c", i, j, e.b[i] - e.c[j]);
        }
    }
    out
}

/// Which interlacing column of inequalities a real set satisfies. The two
/// columns are mutually exclusive chains comparing a2 against c_i - b_j
/// ladders; Column1 forces a2 > a1 and Column2 forces a2 < a1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PositivityColumn {
    Column1,
    Column2,
    Neither,
}

pub fn check_positivity_conditions(e: &RealExponentSet) -> PositivityColumn {
    let m = e.m;
    let (a2, b, c) = (e.a2, &e.b, &e.c);
    let column1 = (0..m.saturating_sub(1))
        .all(|i| c[i] - b[i] < a2 && a2 < c[i + 1] - b[i])
        && c[m - 1] - b[m - 1] < a2;
    let column2 = (1..m).all(|i| c[i - 1] - b[i] < a2 && a2 < c[i] - b[i]) && a2 < c[0] - b[0];
    match (column1, column2) {
        (true, false) => PositivityColumn::Column1,
        (false, true) => PositivityColumn::Column2,
        (false, false) => PositivityColumn::Neither,
        (true, true) => unreachable!("the two inequality chains exclude each other"),
    }
}

/// Constructs a jittered real set satisfying the requested column, or (for
/// `Neither`) violating both chains. Deterministic in the seed.
pub fn make_positivity_set(m: usize, column: PositivityColumn, seed: u64) -> Result<RealExponentSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    for _ in 0..1_000 {
        let mut b = Vec::with_capacity(m);
        let mut x = rng.gen_range(0.02..0.05);
        for _ in 0..m {
            b.push(x);
            x += rng.gen_range(0.06..0.10);
        }
        let d = rng.gen_range(0.15..0.22);
        let c: Vec<f64> = b.iter().map(|bi| bi + d).collect();
        let min_gap = b
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let a2 = match column {
            PositivityColumn::Column1 => d + 0.5 * min_gap.min(d),
            PositivityColumn::Column2 => d - 0.5 * min_gap.min(d),
            PositivityColumn::Neither => d + 2.5 * min_gap.max(d),
        };
        let e = RealExponentSet::new(a2, b, c, rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))?;
        let bc: Vec<Complex64> = e.b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let cc: Vec<Complex64> = e.c.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        if check_positivity_conditions(&e) == column
            && generic_enough(Complex64::new(e.a2, 0.0), &bc, &cc, EPS_INT)
        {
            return Ok(e);
        }
    }
    Err(Error::SamplingExhausted {
        attempts: 1_000,
        context: format!("positivity construction m={m} {column:?}"),
    })
}

// --- parameter file (JSON, complex entries as [re, im]) ---

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    m: usize,
    a1: [f64; 2],
    a2: [f64; 2],
    b: Vec<[f64; 2]>,
    c: Vec<[f64; 2]>,
    k1: [f64; 2],
    k2: [f64; 2],
}

fn pack(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpack(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn params_to_json(e: &ExponentSet) -> String {
    let file = ParamsFile {
        m: e.m,
        a1: pack(e.a1),
        a2: pack(e.a2),
        b: e.b.iter().copied().map(pack).collect(),
        c: e.c.iter().copied().map(pack).collect(),
        k1: pack(e.k1),
        k2: pack(e.k2),
    };
    serde_json::to_string_pretty(&file).expect("params serialize")
}

pub fn params_from_json(text: &str) -> Result<ExponentSet> {
    let file: ParamsFile = serde_json::from_str(text)?;
    if file.b.len() != file.m || file.c.len() != file.m || file.m == 0 {
        return Err(Error::InvalidArgument(format!(
            "parameter file: m={} but |b|={}, |c|={}",
            file.m,
            file.b.len(),
            file.c.len()
        )));
    }
    let e = ExponentSet::new(
        unpack(file.a2),
        file.b.into_iter().map(unpack).collect(),
        file.c.into_iter().map(unpack).collect(),
        unpack(file.k1),
        unpack(file.k2),
    )?;
    // a1 in the file must agree with the trace condition
    let declared = unpack(file.a1);
    if (declared - e.a1).norm() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "parameter file: a1={declared} violates the trace condition (expected {})",
            e.a1
        )));
    }
    Ok(e)
}
