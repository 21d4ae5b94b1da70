//! Batch verification suites and machine-readable reports.
//!
//! Each suite samples seed-deterministic parameter sets, drives one module
//! of the crate, and aggregates worst-case residuals into check records.
//! Identical configuration always produces an identical report, byte for
//! byte, so reports can be diffed or pinned as golden files.

use crate::cauchy::{
    cauchy_determinant, cauchy_inverse_closed_form, cauchy_matrix, cauchy_weights,
    difference_kernel_matrix, kernel_margin, ndm_orthogonality, CauchyKind,
};
use crate::cm::{
    cm_flow, cm_normal_form, gl_action, half_trace_x2, hamiltonian_h2,
    hypergeometric_link_check, link_residual, moment_map, CMQuadruple,
};
use crate::elliptic::{csc_series, inv_sn, inv_sn_factored, LatticeSpec};
use crate::flows::{
    build_flow_operators, evolve, ex_matrix, extended_products, ey_matrix,
    jordan_det_closed_form, jordan_normalizer, quaternion_action, tau_product,
    vandermonde_residual, z_matrix,
};
use crate::fock::{
    field_vev_elliptic, h_space_products, h_space_trig, pairing, pairing_direct,
    quaternion_field_action, wick_vev, wick_vev_recursive, FermionKind, FermionLabel,
    PairingKernel,
};
use crate::linalg::{det, expm, vec_max_abs, vec_max_abs_diff, CMatrix, ONE};
use crate::monodromy::{
    bilinear_invariance_residuals, build_monodromy, hermitian_form_trig,
    invariant_form_dimension, MonodromyTriple,
};
use crate::oracle::{
    canary_detects_corruption, nu_sum_identity, verify_rational_identity, RationalIdentity,
};
use crate::params::{
    check_positivity_conditions, make_positivity_set, params_from_json, params_to_json,
    sample_parameters, sample_real, validate_genericity, ExponentSet, PositivityColumn,
    SampleMode, DELTA_SEP, EPS_INT,
};
use crate::residue::{build_residue_triple, residue_form, ResidueTriple};
use crate::series::{
    connection_functional_fit, frobenius_coefficient_closed_form, hyper_pfq,
    mhgs_component_closed_form, mhgs_frobenius, mhgs_series_residual, sin_pi, with_zero_a2,
    BasePoint,
};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Suite {
    Params,
    Identities,
    Residue,
    Flows,
    Cauchy,
    Elliptic,
    Series,
    Monodromy,
    Fock,
    Cm,
    All,
}

impl Suite {
    pub const SINGLE: [Suite; 10] = [
        Suite::Params,
        Suite::Identities,
        Suite::Residue,
        Suite::Flows,
        Suite::Cauchy,
        Suite::Elliptic,
        Suite::Series,
        Suite::Monodromy,
        Suite::Fock,
        Suite::Cm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Params => "params",
            Suite::Identities => "identities",
            Suite::Residue => "residue",
            Suite::Flows => "flows",
            Suite::Cauchy => "cauchy",
            Suite::Elliptic => "elliptic",
            Suite::Series => "series",
            Suite::Monodromy => "monodromy",
            Suite::Fock => "fock",
            Suite::Cm => "cm",
            Suite::All => "all",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        let all: [Suite; 11] = [
            Suite::Params,
            Suite::Identities,
            Suite::Residue,
            Suite::Flows,
            Suite::Cauchy,
            Suite::Elliptic,
            Suite::Series,
            Suite::Monodromy,
            Suite::Fock,
            Suite::Cm,
            Suite::All,
        ];
        all.into_iter().find(|s| s.name() == name)
    }
}

/// Which difference-quotient kernels the cauchy suite exercises.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KindFilter {
    Rational,
    Trig,
    Elliptic,
}

impl KindFilter {
    pub fn name(&self) -> &'static str {
        match self {
            KindFilter::Rational => "rational",
            KindFilter::Trig => "trig",
            KindFilter::Elliptic => "elliptic",
        }
    }

    pub fn parse(name: &str) -> Option<KindFilter> {
        [KindFilter::Rational, KindFilter::Trig, KindFilter::Elliptic]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Replaces every check's default tolerance when set.
    pub tol: Option<f64>,
    pub omega2: Complex64,
    /// Series order and lattice row count override.
    pub trunc: Option<usize>,
    pub kind: Option<KindFilter>,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        SuiteConfig {
            suite,
            m: 3,
            trials: 5,
            seed: 1,
            tol: None,
            omega2: Complex64::new(0.0, 0.8),
            trunc: None,
            kind: None,
        }
    }

    fn lattice(&self) -> Result<LatticeSpec> {
        match self.trunc {
            Some(n2) => LatticeSpec::with_radii(ONE, self.omega2, 400, n2),
            None => LatticeSpec::new(ONE, self.omega2),
        }
    }

    fn order(&self) -> usize {
        self.trunc.unwrap_or(40).clamp(8, 200)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub paper_ref: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub suite: String,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub tol: Option<f64>,
    pub omega2: [f64; 2],
    pub trunc: Option<usize>,
    pub kind: Option<String>,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
}

/// Loop operators, connection frames, exponent vector, and invariant Gram
/// of one sampled set, entries as [re, im] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyDump {
    pub m0: Vec<Vec<[f64; 2]>>,
    pub m1: Vec<Vec<[f64; 2]>>,
    pub m_inf: Vec<Vec<[f64; 2]>>,
    pub p: Vec<Vec<[f64; 2]>>,
    pub q: Vec<Vec<[f64; 2]>>,
    pub r: Vec<[f64; 2]>,
    pub gram: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<MonodromyDump>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.summary.fail == 0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn emit_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            let c = &report.config;
            let _ = writeln!(
                s,
                "suite {}  m={}  trials={}  seed={}",
                c.suite, c.m, c.trials, c.seed
            );
            for r in &report.checks {
                let _ = writeln!(
                    s,
                    "{:<44} {:>12.3e} {:>9.1e} {}",
                    r.id,
                    r.residual,
                    r.tol,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            let _ = writeln!(
                s,
                "summary: {} passed, {} failed",
                report.summary.pass, report.summary.fail
            );
            s
        }
    }
}

struct Checks {
    list: Vec<CheckRecord>,
    tol_override: Option<f64>,
}

impl Checks {
    fn push(&mut self, id: &str, descriptor: &str, residual: f64, default_tol: f64) {
        let tol = self.tol_override.unwrap_or(default_tol);
        // a non-finite residual is itself a failure; keep the record finite
        let residual = if residual.is_finite() { residual } else { f64::MAX };
        self.list.push(CheckRecord {
            id: id.into(),
            paper_ref: descriptor.into(),
            residual,
            tol,
            pass: residual <= tol,
        });
    }

    fn push_result(&mut self, id: &str, descriptor: &str, r: Result<f64>, default_tol: f64) {
        self.push(id, descriptor, r.unwrap_or(f64::MAX), default_tol);
    }

    fn push_bool(&mut self, id: &str, descriptor: &str, ok: Result<bool>) {
        let residual = match ok {
            Ok(true) => 0.0,
            _ => 1.0,
        };
        self.push(id, descriptor, residual, 0.5);
    }
}

fn child_seed(seed: u64, salt: u64) -> u64 {
    seed ^ (salt.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Worst residual over the configured trials, each on its own child seed.
/// Trial errors surface as an off-scale residual instead of aborting the
/// suite. Trials run in parallel; max is order-free, so the result is
/// deterministic.
fn worst_residual(trials: usize, seed: u64, f: impl Fn(u64) -> Result<f64> + Sync) -> f64 {
    (0..trials.max(1) as u64)
        .into_par_iter()
        .map(|k| f(child_seed(seed, k)).unwrap_or(f64::MAX))
        .reduce(|| 0.0, f64::max)
}

/// Real sample redrawn until the kernel arguments keep a margin of 0.05
/// from the kernel zero set.
fn sample_with_margin(m: usize, seed: u64, kind: &CauchyKind) -> Result<ExponentSet> {
    for attempt in 0..50u64 {
        let e = sample_parameters(
            m,
            seed.wrapping_add(attempt.wrapping_mul(7919)),
            SampleMode::Real01,
            DELTA_SEP,
        )?;
        if kernel_margin(kind, &e)? >= 0.05 {
            return Ok(e);
        }
    }
    Err(Error::SamplingExhausted {
        attempts: 50,
        context: "kernel margin redraw".into(),
    })
}

pub fn run_suite(cfg: &SuiteConfig) -> Report {
    let mut checks = Checks {
        list: Vec::new(),
        tol_override: cfg.tol,
    };
    let mut dump = None;
    let parts: Vec<Suite> = match cfg.suite {
        Suite::All => Suite::SINGLE.to_vec(),
        single => vec![single],
    };
    for part in parts {
        let outcome = match part {
            Suite::Params => suite_params(cfg, &mut checks),
            Suite::Identities => suite_identities(cfg, &mut checks),
            Suite::Residue => suite_residue(cfg, &mut checks),
            Suite::Flows => suite_flows(cfg, &mut checks),
            Suite::Cauchy => suite_cauchy(cfg, &mut checks),
            Suite::Elliptic => suite_elliptic(cfg, &mut checks),
            Suite::Series => suite_series(cfg, &mut checks),
            Suite::Monodromy => suite_monodromy(cfg, &mut checks, &mut dump),
            Suite::Fock => suite_fock(cfg, &mut checks),
            Suite::Cm => suite_cm(cfg, &mut checks),
            Suite::All => unreachable!(),
        };
        if let Err(err) = outcome {
            checks.push(
                &format!("{}.setup", part.name()),
                "suite aborted while building its inputs",
                f64::MAX,
                0.0,
            );
            let _ = err;
        }
    }
    let pass = checks.list.iter().filter(|c| c.pass).count();
    let fail = checks.list.len() - pass;
    Report {
        config: ConfigEcho {
            suite: cfg.suite.name().into(),
            m: cfg.m,
            trials: cfg.trials,
            seed: cfg.seed,
            tol: cfg.tol,
            omega2: [cfg.omega2.re, cfg.omega2.im],
            trunc: cfg.trunc,
            kind: cfg.kind.map(|k| k.name().into()),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        checks: checks.list,
        summary: Summary { pass, fail },
        monodromy: dump,
    }
}

fn real_triple(m: usize, seed: u64) -> Result<ResidueTriple> {
    build_residue_triple(&sample_real(m, seed, DELTA_SEP)?.to_complex())
}

fn suite_params(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.m;
    let trace = worst_residual(cfg.trials, cfg.seed, |s| {
        let real = sample_parameters(m, s, SampleMode::Real01, DELTA_SEP)?;
        let complex = sample_parameters(m, s, SampleMode::Complex, DELTA_SEP)?;
        Ok(real.trace_residual().max(complex.trace_residual()))
    });
    checks.push(
        "params.trace",
        "derived first exponent balances the trace sum",
        trace,
        1e-12,
    );

    let separation = worst_residual(cfg.trials, cfg.seed, |s| {
        let e = sample_real(m, s, DELTA_SEP)?;
        let mut gap = f64::INFINITY;
        for i in 0..m {
            for j in i + 1..m {
                gap = gap.min((e.b[i] - e.b[j]).abs()).min((e.c[i] - e.c[j]).abs());
            }
        }
        Ok((DELTA_SEP - gap).max(0.0))
    });
    checks.push(
        "params.separation",
        "sampled exponent gaps respect the separation floor",
        separation,
        0.0,
    );

    let genericity = worst_residual(cfg.trials, cfg.seed, |s| {
        let e = sample_parameters(m, s, SampleMode::Complex, DELTA_SEP)?;
        Ok(validate_genericity(&e, EPS_INT).len() as f64)
    });
    checks.push(
        "params.genericity",
        "sampled sets clear the integer-distance screen",
        genericity,
        0.0,
    );

    let determinism = worst_residual(cfg.trials, cfg.seed, |s| {
        let a = sample_parameters(m, s, SampleMode::Complex, DELTA_SEP)?;
        let b = sample_parameters(m, s, SampleMode::Complex, DELTA_SEP)?;
        let mut diff = (a.a1 - b.a1).norm().max((a.a2 - b.a2).norm());
        diff = diff.max(vec_max_abs_diff(&a.b, &b.b));
        diff = diff.max(vec_max_abs_diff(&a.c, &b.c));
        Ok(diff)
    });
    checks.push(
        "params.determinism",
        "equal seeds reproduce identical samples",
        determinism,
        0.0,
    );

    let positivity = worst_residual(cfg.trials, cfg.seed, |s| {
        for column in [PositivityColumn::Column1, PositivityColumn::Column2] {
            let e = make_positivity_set(m, column, s)?;
            if check_positivity_conditions(&e) != column {
                return Ok(1.0);
            }
        }
        Ok(0.0)
    });
    checks.push(
        "params.positivity",
        "positivity constructor lands in the requested column",
        positivity,
        0.0,
    );

    let round_trip = worst_residual(cfg.trials, cfg.seed, |s| {
        let e = sample_parameters(m, s, SampleMode::Complex, DELTA_SEP)?;
        let back = params_from_json(&params_to_json(&e))?;
        let mut diff = (e.a1 - back.a1).norm().max((e.a2 - back.a2).norm());
        diff = diff.max(vec_max_abs_diff(&e.b, &back.b));
        diff = diff.max(vec_max_abs_diff(&e.c, &back.c));
        diff = diff.max((e.k1 - back.k1).norm().max((e.k2 - back.k2).norm()));
        Ok(diff)
    });
    checks.push(
        "params.json_round_trip",
        "parameter files survive a write and read back",
        round_trip,
        0.0,
    );
    Ok(())
}

fn identity_descriptor(id: RationalIdentity) -> &'static str {
    match id {
        RationalIdentity::ExGroup => "closed exponential group law at integer points",
        RationalIdentity::JjPrime1 => "vanishing normalization sum, first case",
        RationalIdentity::VanishingSum759 => "degree-deficient Lagrange sum vanishes",
        RationalIdentity::MonicSum760 => "full-degree monic Lagrange sum equals one",
        RationalIdentity::WinvV => "w frame times the zero-time transition recovers v",
        RationalIdentity::ZEx => "transition quotients reduce to node exponentials",
        RationalIdentity::Wd => "row sums give the w-side product form",
        RationalIdentity::FrobStep => "series recursion step closes",
    }
}

fn suite_identities(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    // the exact-arithmetic oracle needs at least two nodes
    let m = cfg.m.clamp(2, 6);
    for id in RationalIdentity::ALL {
        let ok = verify_rational_identity(id, m, cfg.trials.max(1), child_seed(cfg.seed, 11));
        checks.push_bool(
            &format!("identities.{}", id.id_str().to_lowercase()),
            identity_descriptor(id),
            ok,
        );
    }
    checks.push_bool(
        "identities.nu_sum",
        "weight sums telescope to the trace",
        nu_sum_identity(m, cfg.trials.max(1), child_seed(cfg.seed, 13)),
    );
    checks.push_bool(
        "identities.canary",
        "a corrupted identity is caught",
        canary_detects_corruption(m, child_seed(cfg.seed, 17)),
    );
    Ok(())
}

fn suite_residue(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.m;
    let eigen = worst_residual(cfg.trials, cfg.seed, |s| Ok(real_triple(m, s)?.eigen_residual()));
    checks.push(
        "residue.eigen",
        "triangular eigenbases solve their eigen equations",
        eigen,
        1e-9,
    );

    let flag = worst_residual(cfg.trials, cfg.seed, |s| {
        Ok(if real_triple(m, s)?.check_flag_general_position() {
            0.0
        } else {
            1.0
        })
    });
    checks.push(
        "residue.flag",
        "triangular frames are in general position",
        flag,
        0.0,
    );

    let mut w_orth = 0.0f64;
    let mut u_len = 0.0f64;
    let mut reflect = 0.0f64;
    for k in 0..cfg.trials.max(1) as u64 {
        let t = real_triple(m, child_seed(cfg.seed, k))?;
        let form = residue_form(&t)?;
        let g = form.gram.max_abs();
        let um = vec_max_abs(&t.u);
        let wm = t.w.max_abs();
        w_orth = w_orth.max(rel(form.w_orthogonality_residual(&t), wm * wm * g));
        u_len = u_len.max(rel(form.u_length_residual(&t), um * um * g));
        reflect = reflect.max(rel(
            form.a_reflection_residual(&t),
            t.a.max_abs().max(um * um * g),
        ));
    }
    checks.push(
        "residue.w_orthogonality",
        "w columns pair diagonally against the form",
        w_orth,
        1e-9,
    );
    checks.push(
        "residue.u_length",
        "the common column sum has the stated length",
        u_len,
        1e-9,
    );
    checks.push(
        "residue.a_reflection",
        "the form intertwines the connection matrix with its reflection",
        reflect,
        1e-9,
    );
    Ok(())
}

fn trial_taus(seed: u64) -> (Complex64, Complex64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // moderate times: the exponential products lose digits as |tau| grows
    let tau1 = Complex64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
    // keep the two times clearly distinct
    let tau2 = tau1 + Complex64::new(rng.gen_range(0.2..0.45), rng.gen_range(0.2..0.45));
    (tau1, tau2)
}

/// Absolute defect against the magnitude of the intermediate products
/// that produced it. Scales below one floor at one: tiny data cannot
/// excuse a large defect.
fn rel(abs: f64, scale: f64) -> f64 {
    abs / scale.max(1.0)
}

fn suite_flows(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.m;
    let commutator = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let ops = build_flow_operators(&t)?;
        Ok(rel(
            ops.moment_map_residual(&t.e),
            ops.x.max_abs().max(ops.y.max_abs()),
        ))
    });
    checks.push(
        "flows.commutator",
        "flow generators solve the rank-one commutator equation",
        commutator,
        1e-10,
    );

    let conjugation = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let ops = build_flow_operators(&t)?;
        let sm = ops.s.max_abs();
        let conj = rel(ops.conjugation_residual(&t), sm * t.w.max_abs());
        let ku = rel(ops.kills_u_residual(&t), sm * vec_max_abs(&t.u));
        Ok(conj.max(ku))
    });
    checks.push(
        "flows.conjugation",
        "one conjugation carries the x generator to the y side and kills u",
        conjugation,
        1e-9,
    );

    let exponential = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let ops = build_flow_operators(&t)?;
        let (tau1, tau2) = trial_taus(child_seed(s, 3));
        let ex1 = ex_matrix(&t.e, tau1)?;
        let ex2 = ex_matrix(&t.e, tau2)?;
        let ey1 = ey_matrix(&t.e, tau1)?;
        let mut worst = rel(ex1.max_abs_diff(&expm(&ops.x.scaled(tau1))?), ex1.max_abs());
        worst = worst.max(rel(
            ey1.max_abs_diff(&expm(&ops.y.scaled(tau1))?),
            ey1.max_abs(),
        ));
        let joint = ex1.mul(&ex2);
        worst = worst.max(rel(
            joint.max_abs_diff(&ex_matrix(&t.e, tau1 + tau2)?),
            ex1.max_abs() * ex2.max_abs(),
        ));
        Ok(worst)
    });
    checks.push(
        "flows.exponential",
        "closed node exponentials match the matrix exponential and compose",
        exponential,
        1e-9,
    );

    let state = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let (tau1, tau2) = trial_taus(child_seed(s, 5));
        let st = evolve(&t, tau1, tau2)?;
        let product = tau_product(&t, tau1, tau2)?;
        let um = vec_max_abs(&t.u);
        let g = product.gram.max_abs();
        let spectral = (st.b_t.max_abs() * st.v_t.max_abs())
            .max(st.c_t.max_abs() * st.w_t.max_abs())
            .max(st.a_t.max_abs() * um);
        Ok(rel(st.eigen_residual(&t), spectral)
            .max(rel(
                st.reflection_residual(&t, &product),
                st.a_t.max_abs().max(um * um * g),
            ))
            .max(rel(st.u_pairing_residual(&t, &product), um * um * g)))
    });
    checks.push(
        "flows.state",
        "evolved operators keep their eigenvectors and pairings",
        state,
        1e-9,
    );

    let two_time = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let (tau1, tau2) = trial_taus(child_seed(s, 7));
        let product = tau_product(&t, tau1, tau2)?;
        let g = product.gram.max_abs();
        let vm = product.v_t.max_abs();
        let wm = product.w_t.max_abs();
        let zm = z_matrix(&t.e, tau1 + tau2)?.max_abs();
        Ok(rel(product.w_diagonality_residual(), wm * wm * g)
            .max(rel(product.basis_change_residual(&t.e)?, vm + wm * zm))
            .max(rel(product.cross_pairing_residual(&t.e)?, vm * g * wm)))
    });
    checks.push(
        "flows.two_time",
        "two-time pairings are diagonal with the stated weights",
        two_time,
        1e-9,
    );

    let extended = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let (tau1, tau2) = trial_taus(child_seed(s, 9));
        let forms = extended_products(&t, tau1, tau2)?;
        let v2 = t.v.mul(&ex_matrix(&t.e, tau2)?).max_abs();
        let w2 = t.w.mul(&ey_matrix(&t.e, tau2)?).max_abs();
        let exs = ex_matrix(&t.e, forms.sigma)?.max_abs();
        let eys = ey_matrix(&t.e, forms.sigma)?.max_abs();
        Ok(rel(forms.plus_residual(), v2 * v2 * forms.plus_gram.max_abs())
            .max(rel(
                forms.minus_residual(),
                w2 * w2 * forms.minus_gram.max_abs(),
            ))
            .max(rel(
                forms.transition_residual(&t.e)?,
                (v2 * exs).max(w2 * eys),
            )))
    });
    checks.push(
        "flows.extended",
        "shifted pairings produce the plus and minus forms",
        extended,
        1e-9,
    );

    let alternant = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let (tau1, _) = trial_taus(child_seed(s, 11));
        let mut worst = vandermonde_residual(&t.e, tau1)?;
        let jn = jordan_normalizer(&t.e, tau1)?;
        let closed = jordan_det_closed_form(&t.e, tau1)?;
        worst = worst.max((det(&jn) - closed).norm() / closed.norm().max(1.0));
        Ok(worst)
    });
    checks.push(
        "flows.alternant",
        "alternant and normalizer determinants match their product forms",
        alternant,
        1e-9,
    );

    let quaternion = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = real_triple(m, s)?;
        let (tau1, tau2) = trial_taus(child_seed(s, 13));
        let action = quaternion_action(&t, tau1, tau2)?;
        let qm = action
            .qi
            .max_abs()
            .max(action.qj.max_abs())
            .max(action.qk.max_abs());
        Ok(rel(action.algebra_residual(), qm * qm).max(rel(
            action.gram_action_residual(),
            qm * qm * action.gram.max_abs(),
        )))
    });
    checks.push(
        "flows.quaternion",
        "site quaternions satisfy the algebra and flip the form signs",
        quaternion,
        1e-9,
    );
    Ok(())
}

fn suite_cauchy(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let lattice = cfg.lattice()?;
    let kinds: Vec<(KindFilter, CauchyKind)> = [
        (KindFilter::Rational, CauchyKind::Rational(Complex64::new(0.3, 0.15))),
        (KindFilter::Trig, CauchyKind::Trigonometric),
        (KindFilter::Elliptic, CauchyKind::Elliptic(lattice)),
    ]
    .into_iter()
    .filter(|(f, _)| cfg.kind.map_or(true, |want| want == *f))
    .collect();

    for (filter, kind) in kinds {
        let inverse = worst_residual(cfg.trials, cfg.seed, |s| {
            let e = sample_with_margin(cfg.m, s, &kind)?;
            let matrix = cauchy_matrix(&kind, &e)?;
            let inv = cauchy_inverse_closed_form(&kind, &e)?;
            Ok(rel(
                matrix.mul(&inv).max_abs_diff(&CMatrix::identity(cfg.m)),
                matrix.max_abs() * inv.max_abs(),
            ))
        });
        checks.push(
            &format!("cauchy.{}.inverse", filter.name()),
            "closed-form inverse of the difference-quotient matrix",
            inverse,
            1e-10,
        );

        let determinant = worst_residual(cfg.trials, cfg.seed, |s| {
            let e = sample_with_margin(cfg.m, s, &kind)?;
            let closed = cauchy_determinant(&e, &kind)?;
            let direct = det(&difference_kernel_matrix(&e, &kind)?);
            Ok((closed - direct).norm() / closed.norm().max(1e-12))
        });
        checks.push(
            &format!("cauchy.{}.determinant", filter.name()),
            "determinant matches the weight-product closed form",
            determinant,
            1e-8,
        );

        let orthogonality = worst_residual(cfg.trials, cfg.seed, |s| {
            let e = sample_with_margin(cfg.m, s, &kind)?;
            // the sandwich multiplies the weighted kernel by its dual; the
            // conditioning scale is that weighted matrix times its inverse
            let w = cauchy_weights(&kind, &e)?;
            let d = cauchy_matrix(&kind, &e)?;
            let p = CMatrix::from_fn(cfg.m, cfg.m, |i, j| {
                w.nu2[i].sqrt() * d[(i, j)] * w.mu2[j].sqrt()
            });
            let scale = p.max_abs() * crate::linalg::invert(&p)?.max_abs();
            Ok(rel(ndm_orthogonality(&e, &kind)?, scale))
        });
        checks.push(
            &format!("cauchy.{}.orthogonality", filter.name()),
            "difference-kernel sandwich collapses to the identity",
            orthogonality,
            1e-10,
        );

        let margin = worst_residual(cfg.trials, cfg.seed, |s| {
            let e = sample_with_margin(cfg.m, s, &kind)?;
            Ok((0.05 - kernel_margin(&kind, &e)?).max(0.0))
        });
        checks.push(
            &format!("cauchy.{}.margin", filter.name()),
            "kernel arguments keep a margin from the kernel zero set",
            margin,
            0.0,
        );
    }
    Ok(())
}

fn lattice_point(seed: u64, l: &LatticeSpec) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let z = Complex64::new(rng.gen_range(0.05..0.95), rng.gen_range(-0.3..0.3));
        if l.lattice_distance(z) >= 0.1 {
            return z;
        }
    }
    Complex64::new(0.37, 0.11)
}

fn suite_elliptic(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let lattice = cfg.lattice()?;
    let two_routes = worst_residual(cfg.trials, cfg.seed, |s| {
        let z = lattice_point(s, &lattice);
        let summed = inv_sn(z, &lattice)?;
        let factored = inv_sn_factored(z, &lattice)?;
        Ok((summed.value - factored).norm())
    });
    checks.push(
        "elliptic.two_routes",
        "lattice sum and theta quotient agree",
        two_routes,
        1e-8,
    );

    let tail = worst_residual(cfg.trials, cfg.seed, |s| {
        Ok(inv_sn(lattice_point(s, &lattice), &lattice)?.tail_bound)
    });
    checks.push(
        "elliptic.tail",
        "lattice tail bound stays below the floor",
        tail,
        1e-10,
    );

    let antiperiod = worst_residual(cfg.trials, cfg.seed, |s| {
        let z = lattice_point(s, &lattice);
        let here = inv_sn(z, &lattice)?.value;
        let there = inv_sn(z + lattice.omega1, &lattice)?.value;
        Ok((here + there).norm())
    });
    checks.push(
        "elliptic.antiperiod",
        "the periodic reciprocal flips sign across one period",
        antiperiod,
        1e-8,
    );

    let wide = LatticeSpec::new(ONE, Complex64::new(0.0, 40.0))?;
    let trig_limit = worst_residual(cfg.trials, cfg.seed, |s| {
        let z = lattice_point(s, &wide);
        let value = inv_sn(z, &wide)?.value;
        Ok((value - Complex64::new(PI, 0.0) / sin_pi(z)).norm())
    });
    checks.push(
        "elliptic.trig_limit",
        "wide lattices degenerate to the cosecant",
        trig_limit,
        1e-6,
    );

    let cosecant = worst_residual(cfg.trials, cfg.seed, |s| {
        let z = lattice_point(s, &lattice);
        let series = csc_series(z, 400, true)?;
        Ok((series - Complex64::new(PI, 0.0) / sin_pi(z)).norm())
    });
    checks.push(
        "elliptic.cosecant",
        "cosecant partial fractions converge under acceleration",
        cosecant,
        1e-8,
    );
    Ok(())
}

fn suite_series(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let order = cfg.order();
    let m = cfg.m;

    let closed = Complex64::new(-(0.6f64.ln()) / 0.4, 0.0);
    let pfq = hyper_pfq(
        &[ONE, ONE],
        &[Complex64::new(2.0, 0.0)],
        Complex64::new(0.4, 0.0),
        220,
    )
    .map(|v| (v.value - closed).norm());
    checks.push_result(
        "series.pfq",
        "hypergeometric series hits a logarithmic closed form",
        pfq,
        1e-10,
    );

    let zero_a2 = |s: u64| -> Result<ResidueTriple> {
        let e = with_zero_a2(&sample_real(m, s, DELTA_SEP)?.to_complex())?;
        build_residue_triple(&e)
    };

    let recursion = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = zero_a2(s)?;
        let mut worst = 0.0f64;
        for point in [BasePoint::Zero, BasePoint::Infinity] {
            for i in [0, m - 1] {
                worst = worst.max(mhgs_frobenius(&t, point, i, order)?.recursion_residual(&t));
            }
        }
        Ok(worst)
    });
    checks.push(
        "series.recursion",
        "series coefficients satisfy the step recursion",
        recursion,
        1e-9,
    );

    let coefficients = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = zero_a2(s)?;
        let mut worst = 0.0f64;
        for point in [BasePoint::Zero, BasePoint::Infinity] {
            let sol = mhgs_frobenius(&t, point, 0, order)?;
            for n in [order / 2, order] {
                let closed = frobenius_coefficient_closed_form(&t, point, 0, n)?;
                let scale = closed.iter().map(|c| c.norm()).fold(1e-12, f64::max);
                worst = worst.max(vec_max_abs_diff(&closed, &sol.coeffs[n]) / scale.max(1.0));
            }
        }
        Ok(worst)
    });
    checks.push(
        "series.coefficients",
        "recursion coefficients match the closed route",
        coefficients,
        1e-8,
    );

    let components = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = zero_a2(s)?;
        let z = Complex64::new(0.3, 0.05);
        let sol = mhgs_frobenius(&t, BasePoint::Zero, 0, 240)?;
        let direct = sol.eval(z)?;
        let mut worst = 0.0f64;
        for j in 0..m {
            let one_term = mhgs_component_closed_form(&t, BasePoint::Zero, 0, j, z, 240)?;
            worst = worst.max((one_term - direct[j]).norm());
        }
        Ok(worst)
    });
    checks.push(
        "series.components",
        "vector components collapse to single hypergeometric terms",
        components,
        1e-8,
    );

    let ode = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = zero_a2(s)?;
        let inner = mhgs_frobenius(&t, BasePoint::Zero, 0, 240)?;
        let outer = mhgs_frobenius(&t, BasePoint::Infinity, m - 1, 240)?;
        Ok(mhgs_series_residual(&t, &inner, Complex64::new(0.3, 0.0))?
            .max(mhgs_series_residual(&t, &outer, Complex64::new(2.5, 0.0))?))
    });
    checks.push(
        "series.ode",
        "series solutions satisfy the differential system",
        ode,
        1e-8,
    );

    // one trial only: the transport is the slow step. Lower half-plane
    // points keep the closed weights on the principal branch.
    let connection = (|| -> Result<f64> {
        let t = zero_a2(child_seed(cfg.seed, 0))?;
        let points: Vec<Complex64> = [(-0.5f64, 0.72f64), (-1.1, 0.78), (-1.8, 0.84), (-2.4, 0.88)]
            .iter()
            .map(|(angle, radius)| Complex64::from_polar(*radius, *angle))
            .collect();
        let fit = connection_functional_fit(&t, &points, 650, 130, 3000)?;
        Ok(fit.residual.max((fit.kappa - ONE).norm()))
    })();
    checks.push_result(
        "series.connection",
        "transported outer solutions fit the connection scale",
        connection,
        1e-6,
    );
    Ok(())
}

fn mat_entries(a: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| {
            (0..a.ncols())
                .map(|j| {
                    let z = a[(i, j)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

fn suite_monodromy(
    cfg: &SuiteConfig,
    checks: &mut Checks,
    dump: &mut Option<MonodromyDump>,
) -> Result<()> {
    let m = cfg.m;
    let build = |s: u64| -> Result<MonodromyTriple> {
        build_monodromy(&sample_real(m, s, DELTA_SEP)?.to_complex())
    };

    let product = worst_residual(cfg.trials, cfg.seed, |s| Ok(build(s)?.product_residual()));
    checks.push(
        "monodromy.product",
        "the three loops multiply to the identity",
        product,
        1e-10,
    );

    let spectral = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = build(s)?;
        let (e0, e1, einf) = t.eigen_residuals();
        Ok(e0
            .max(e1)
            .max(einf)
            .max(t.m1_spectral_residual())
            .max(t.m1_shift_rank_residual().0))
    });
    checks.push(
        "monodromy.spectra",
        "loop operators have the stated spectra and rank-one shift",
        spectral,
        1e-9,
    );

    let frames = worst_residual(cfg.trials, cfg.seed, |s| {
        let t = build(s)?;
        Ok(t.normalization_residual()
            .max(t.m0_inverse_residual()?)
            .max(t.m0_factorization_residual()))
    });
    checks.push(
        "monodromy.frames",
        "normalized frames factor the loops as stated",
        frames,
        1e-9,
    );

    let invariance = worst_residual(cfg.trials, cfg.seed, |s| {
        let form = hermitian_form_trig(&sample_real(m, s, DELTA_SEP)?)?;
        Ok(form
            .invariance_residual
            .max(form.hermiticity_residual)
            .max(form.q_diagonality_residual))
    });
    checks.push(
        "monodromy.invariance",
        "the hermitian form is loop invariant and diagonal in the q frame",
        invariance,
        1e-9,
    );

    let contrast = worst_residual(cfg.trials, cfg.seed, |s| {
        let r = bilinear_invariance_residuals(&sample_real(m, s, DELTA_SEP)?.to_complex())?;
        let worst = r[0].max(r[1]).max(r[2]);
        Ok(if worst > 1e-3 { 0.0 } else { 1.0 })
    });
    checks.push(
        "monodromy.bilinear_contrast",
        "the transpose substitute for the form visibly fails",
        contrast,
        0.0,
    );

    let dimension = worst_residual(cfg.trials, cfg.seed, |s| {
        Ok(((invariant_form_dimension(&build(s)?)? as f64) - 1.0).abs())
    });
    checks.push(
        "monodromy.dimension",
        "the invariant hermitian space is a line",
        dimension,
        0.0,
    );

    let signature = worst_residual(cfg.trials, cfg.seed, |s| {
        let defect = |column: PositivityColumn, definite: bool| -> Result<f64> {
            let e = make_positivity_set(m, column, s)?;
            let form = hermitian_form_trig(&e)?;
            let sig = form.signature;
            let clean = sig.zero == 0
                && if definite {
                    sig.negative == 0
                } else {
                    sig.positive == 0
                };
            Ok(if clean { 0.0 } else { 1.0 })
        };
        Ok(defect(PositivityColumn::Column1, true)?.max(defect(PositivityColumn::Column2, false)?))
    });
    checks.push(
        "monodromy.signature",
        "form definiteness follows the positivity column",
        signature,
        0.0,
    );

    let e_first = sample_real(m, child_seed(cfg.seed, 0), DELTA_SEP)?;
    let t_first = build_monodromy(&e_first.to_complex())?;
    let gram = hermitian_form_trig(&e_first)?.gram;
    *dump = Some(MonodromyDump {
        m0: mat_entries(&t_first.m0),
        m1: mat_entries(&t_first.m1),
        m_inf: mat_entries(&t_first.m_inf),
        p: mat_entries(&t_first.p),
        q: mat_entries(&t_first.q),
        r: t_first.r.iter().map(|z| [z.re, z.im]).collect(),
        gram: mat_entries(&gram),
    });
    Ok(())
}

fn suite_fock(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.m;
    let lattice = cfg.lattice()?;
    let kind = CauchyKind::Elliptic(lattice);
    let e = sample_with_margin(m, cfg.seed, &kind)?;
    let t = build_residue_triple(&e)?;
    let kernel = PairingKernel::new(&t, lattice);

    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 23));
    let kinds = [
        FermionKind::F0,
        FermionKind::F0Dag,
        FermionKind::FInf,
        FermionKind::FInfDag,
    ];
    let letter = |rng: &mut ChaCha8Rng| {
        FermionLabel::new(
            kinds[rng.gen_range(0..4)],
            rng.gen_range(0..m),
            (rng.gen_range(-2..=2), rng.gen_range(-2..=2)),
        )
    };

    let mut pair_gap = 0.0f64;
    for _ in 0..12 {
        let a = letter(&mut rng);
        let b = letter(&mut rng);
        let table = pairing(&a, &b, &t, &lattice)?;
        let direct = pairing_direct(&a, &b, &t, &lattice)?;
        pair_gap = pair_gap.max(rel((table - direct).norm(), table.norm().max(direct.norm())));
    }
    checks.push(
        "fock.pairing",
        "table pairings match the direct two-time products",
        pair_gap,
        1e-9,
    );

    let word: Vec<FermionLabel> = (0..6).map(|_| letter(&mut rng)).collect();
    let wick = (wick_vev(&word, &kernel)? - wick_vev_recursive(&word, &kernel)?).norm();
    checks.push(
        "fock.wick",
        "matching-sum and recursive vacuum expectations agree",
        wick,
        1e-11,
    );

    let i = 0;
    let j = m - 1;
    let va = field_vev_elliptic(i, j, &kernel, true)?;
    let target = inv_sn(e.a2 + e.b[i] - e.c[j], &lattice)?;
    let vev_gap = (va.value - target.value).norm();
    checks.push(
        "fock.vev",
        "field expectation sums to the periodic reciprocal",
        vev_gap,
        (va.tail_bound + target.tail_bound).max(1e-6),
    );

    let wide = LatticeSpec::new(ONE, Complex64::new(0.0, 40.0))?;
    let wide_kernel = PairingKernel::new(&t, wide);
    let x = e.a2 + e.b[i] - e.c[i];
    let trig_gap = (field_vev_elliptic(i, i, &wide_kernel, true)?.value
        - Complex64::new(PI, 0.0) / sin_pi(x))
    .norm();
    checks.push(
        "fock.vev_trig_limit",
        "wide-lattice expectations degenerate to the cosecant",
        trig_gap,
        1e-6,
    );

    let (near, far) = h_space_products(&e, &lattice)?;
    checks.push(
        "fock.dual_closure",
        "dual bases close under the exact kernel inverse",
        near.dual_residual.max(far.dual_residual),
        1e-8,
    );
    checks.push(
        "fock.weight_contrast",
        "weight-product route reported for contrast, not gated tightly",
        near.printed_residual.max(far.printed_residual),
        1.0,
    );

    let (tnear, tfar) = h_space_trig(&e)?;
    checks.push(
        "fock.trig_orthogonality",
        "sine-kernel bases are simultaneously orthogonal",
        tnear
            .printed_residual
            .max(tfar.printed_residual)
            .max(tnear.dual_residual)
            .max(tfar.dual_residual),
        1e-10,
    );

    let action = quaternion_field_action(&t, &lattice, child_seed(cfg.seed, 29), 6)?;
    checks.push(
        "fock.quaternion_algebra",
        "field quaternions satisfy the algebra and flip the form signs",
        action.algebra_residual.max(action.gram_sign_residual),
        1e-10,
    );
    checks.push(
        "fock.quaternion_sites",
        "site-wise action matches the closed field table",
        action.site_residual,
        1e-5,
    );
    Ok(())
}

fn spread_nodes(m: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut nodes: Vec<Complex64> = Vec::with_capacity(m);
    while nodes.len() < m {
        let z = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        if nodes.iter().all(|n| (n - z).norm() >= 0.2) {
            nodes.push(z);
        }
    }
    nodes.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    nodes
}

fn random_matrix(m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut g = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    g
}

fn suite_cm(cfg: &SuiteConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.m;
    let normal_pair = |s: u64| -> (CMQuadruple, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let b = spread_nodes(m, &mut rng);
        let p: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        (CMQuadruple::normal(&b, &p).expect("spread nodes are distinct"), rng)
    };

    let round_trip = worst_residual(cfg.trials, cfg.seed, |s| {
        let (src, mut rng) = normal_pair(s);
        let hidden = gl_action(&random_matrix(m, &mut rng), &src)?;
        let back = cm_normal_form(&hidden)?;
        let diag = |a: &CMatrix| (0..m).map(|i| a[(i, i)]).collect::<Vec<_>>();
        Ok(vec_max_abs_diff(&diag(&back.b), &diag(&src.b))
            .max(vec_max_abs_diff(&diag(&back.x), &diag(&src.x))))
    });
    checks.push(
        "cm.round_trip",
        "normal form recovers nodes and momenta through a random frame",
        round_trip,
        1e-8,
    );

    let flow_constraint = worst_residual(cfg.trials, cfg.seed, |s| {
        let (src, _) = normal_pair(s);
        let t = Complex64::new(0.4, -0.3);
        let mut worst = 0.0f64;
        for k in [1u32, 2, 3] {
            worst = worst.max(cm_flow(&src, k, t)?.subvariety_residual());
        }
        Ok(worst)
    });
    checks.push(
        "cm.flow_constraint",
        "flows keep the quadruple on the constrained set",
        flow_constraint,
        1e-9,
    );

    let flow_traces = worst_residual(cfg.trials, cfg.seed, |s| {
        let (src, _) = normal_pair(s);
        let flowed = cm_flow(&src, 2, Complex64::new(0.7, 0.2))?;
        let mut worst = 0.0f64;
        let mut a = CMatrix::identity(m);
        let mut b = CMatrix::identity(m);
        for _ in 0..m {
            a = a.mul(&src.x);
            b = b.mul(&flowed.x);
            worst = worst.max((a.trace() - b.trace()).norm());
        }
        Ok(worst)
    });
    checks.push(
        "cm.flow_traces",
        "every spectral trace of X survives the flow untouched",
        flow_traces,
        0.0,
    );

    let additivity = worst_residual(cfg.trials, cfg.seed, |s| {
        let (src, _) = normal_pair(s);
        let (t1, t2) = (Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.45));
        let split = cm_flow(&cm_flow(&src, 3, t1)?, 3, t2)?;
        let joined = cm_flow(&src, 3, t1 + t2)?;
        Ok(split.b.max_abs_diff(&joined.b))
    });
    checks.push(
        "cm.flow_additivity",
        "flows with a fixed index compose additively in time",
        additivity,
        1e-12,
    );

    let hamiltonian = worst_residual(cfg.trials, cfg.seed, |s| {
        let (src, _) = normal_pair(s);
        let diag = |a: &CMatrix| (0..m).map(|i| a[(i, i)]).collect::<Vec<_>>();
        let h = hamiltonian_h2(&src.x, &diag(&src.b), &diag(&src.x))?;
        Ok((h - half_trace_x2(&src.x)).norm())
    });
    checks.push(
        "cm.hamiltonian",
        "particle and trace routes to the quadratic Hamiltonian agree",
        hamiltonian,
        1e-10,
    );

    let equivariance = worst_residual(cfg.trials, cfg.seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(s, 31));
        let q = CMQuadruple::new(
            random_matrix(m, &mut rng),
            random_matrix(m, &mut rng),
            (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
            (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )?;
        let g = random_matrix(m, &mut rng);
        let moved = gl_action(&g, &q)?;
        let conjugated = g.mul(&moment_map(&q)).mul(&crate::linalg::invert(&g)?);
        Ok(moment_map(&moved).max_abs_diff(&conjugated))
    });
    checks.push(
        "cm.equivariance",
        "the moment map intertwines with frame conjugation",
        equivariance,
        1e-10,
    );

    let link = worst_residual(cfg.trials, cfg.seed, |s| {
        let e = sample_real(m, s, DELTA_SEP)?.to_complex();
        Ok(if hypergeometric_link_check(&e)? { 0.0 } else { 1.0 })
    });
    checks.push(
        "cm.link",
        "exponent flow generators sit on the constrained set",
        link,
        0.0,
    );

    let canary = (|| -> Result<f64> {
        let e = sample_real(m, child_seed(cfg.seed, 0), DELTA_SEP)?.to_complex();
        let ops = build_flow_operators(&build_residue_triple(&e)?)?;
        let mut corrupted = ops.x.clone();
        corrupted[(0, 1)] = -corrupted[(0, 1)];
        Ok(if link_residual(&corrupted, &e.b) > 1e-2 {
            0.0
        } else {
            1.0
        })
    })();
    checks.push_result(
        "cm.link_canary",
        "a flipped generator entry breaks the constraint",
        canary,
        0.0,
    );
    Ok(())
}
