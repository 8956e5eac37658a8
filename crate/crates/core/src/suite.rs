//! The acceptance battery.
//!
//! Every criterion draws its random configurations from its own seeded
//! stream, runs the checkers sequentially or through order-preserving
//! parallel maps, and reduces its reports to one [`CriterionOutcome`].
//! Outcomes carry no timings, so the JSON lines are reproducible byte for
//! byte.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cauchy::{cauchy_check_operator, cauchy_check_riemannian, exp_norm_check, SupEnvelope};
use crate::derive::{taylor_data, taylor_data_in, DerivMethod};
use crate::error::{Error, Result};
use crate::extend::{
    cauchy_riemann_residual, path_independence_check, periodicity_check, segment_path, steiner_chain,
    verify_chain, verify_extension, ContinuationOptions,
};
use crate::fields::{catalog, Field};
use crate::group::{registry_get, GroupModel, REGISTRY_NAMES};
use crate::laurent::{laurent_coefficients, laurent_lie_taylor_check};
use crate::linalg::{self, c, CMat, ZERO};
use crate::report::Report;
use crate::riemann::{GroupPath, MetricModel};
use crate::sample::{self, SampleRng};
use crate::taylor::{seminorm_q, taylor_eval, translation_check, Coords};

pub const DEFAULT_SEED: u64 = 20_161_118;

/// Number of criteria.
pub const CRITERIA: usize = 13;

pub const NAMES: [&str; CRITERIA] = [
    "oracle-equivalence",
    "lie-taylor-formula",
    "majorant-closed-form",
    "cauchy-riemann",
    "cauchy-estimates",
    "exp-norm",
    "steiner-chains",
    "extension",
    "path-independence",
    "periodicity",
    "translation",
    "laurent",
    "determinism",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Criteria to run, 1-based; empty runs all of them.
    pub only: Vec<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, only: Vec::new() }
    }
}

impl SuiteConfig {
    fn selected(&self) -> Vec<usize> {
        if self.only.is_empty() {
            (1..=CRITERIA).collect()
        } else {
            let mut v: Vec<usize> = self.only.iter().copied().filter(|k| (1..=CRITERIA).contains(k)).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub criterion: usize,
    pub name: String,
    pub pass: bool,
    pub checks: usize,
    pub failures: usize,
    /// The first failing report, or the passing report closest to its bound.
    pub worst: Option<Report>,
    /// Set when a computation refused or failed; the criterion then fails.
    pub error: Option<String>,
}

impl CriterionOutcome {
    fn from_reports(id: usize, reports: Result<Vec<Report>>) -> Self {
        let name = NAMES[id - 1].to_string();
        match reports {
            Err(e) => Self { criterion: id, name, pass: false, checks: 0, failures: 0, worst: None, error: Some(e.to_string()) },
            Ok(reps) => {
                let failures = reps.iter().filter(|r| !r.pass).count();
                let worst = reps.iter().find(|r| !r.pass).cloned().or_else(|| {
                    reps.iter()
                        .min_by(|a, b| relative_slack(a).total_cmp(&relative_slack(b)))
                        .cloned()
                });
                Self {
                    criterion: id,
                    name,
                    pass: failures == 0 && !reps.is_empty(),
                    checks: reps.len(),
                    failures,
                    worst,
                    error: None,
                }
            }
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcomes are plain data")
    }
}

fn relative_slack(r: &Report) -> f64 {
    r.slack / r.rhs.abs().max(1.0)
}

/// Independent stream per criterion.
pub fn stream(seed: u64, id: usize) -> SampleRng {
    sample::rng(seed ^ (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Runs one criterion (1..=12). Criterion 13 compares whole runs and is
/// handled by [`run_suite`].
pub fn run_criterion(id: usize, seed: u64) -> CriterionOutcome {
    let mut rng = stream(seed, id);
    let reports = match id {
        1 => oracle_equivalence(&mut rng),
        2 => lie_taylor_formula(&mut rng),
        3 => majorant_closed_form(),
        4 => cauchy_riemann(&mut rng),
        5 => cauchy_estimates(&mut rng),
        6 => exp_norm(&mut rng),
        7 => steiner_chains(&mut rng),
        8 => extension(&mut rng),
        9 => path_independence(&mut rng),
        10 => periodicity(&mut rng),
        11 => translation(&mut rng),
        12 => laurent(&mut rng),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    CriterionOutcome::from_reports(id, reports)
}

fn run_plain(cfg: &SuiteConfig) -> Vec<CriterionOutcome> {
    cfg.selected().into_iter().filter(|&k| k != 13).map(|k| run_criterion(k, cfg.seed)).collect()
}

fn lines(outcomes: &[CriterionOutcome]) -> Vec<String> {
    outcomes.iter().map(CriterionOutcome::to_json_line).collect()
}

/// Criterion 13 given the outcomes of a first run: the same criteria run
/// again on a single-threaded pool (or a four-threaded one if the ambient
/// pool has a single thread) and the two outputs are compared line by line.
pub fn determinism(first: &[CriterionOutcome], cfg: &SuiteConfig) -> CriterionOutcome {
    let threads = if rayon::current_num_threads() > 1 { 1 } else { 4 };
    let rerun = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
        .map(|pool| pool.install(|| run_plain(cfg)));
    let reports = rerun.map(|second| {
        let (a, b) = (lines(first), lines(&second));
        let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
        vec![Report::deviation("determinism", json!({ "runs": 2, "lines": a.len() }), differing as f64, 0.0)]
    });
    CriterionOutcome::from_reports(13, reports)
}

/// Runs the selected criteria, with criterion 13 last.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<CriterionOutcome> {
    let mut out = run_plain(cfg);
    if cfg.selected().contains(&13) {
        let d = determinism(&out, cfg);
        out.push(d);
    }
    out
}

fn group(name: &str) -> Result<Arc<GroupModel>> {
    registry_get(name)
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Quadrature against exact data on SL(2,C), orders <= 4 in the three
/// complex span directions, at a random point.
fn oracle_equivalence(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl = group("SL2C")?;
    let points = [sample::element(rng, &sl, 0.4)];
    let mut out = Vec::new();
    for name in ["entry-11", "adjoint"] {
        let f = catalog(name, &sl)?;
        for (p, g) in points.iter().enumerate() {
            let exact = taylor_data_in(&f, g, 4, &DerivMethod::Exact, Coords::ComplexSpan)?;
            let quad = taylor_data_in(&f, g, 4, &DerivMethod::quadrature(), Coords::ComplexSpan)?;
            let mut worst: f64 = 0.0;
            let mut count = 0;
            for (eb, qb) in exact.coeffs.iter().zip(&quad.coeffs) {
                for (e, q) in eb.iter().zip(qb) {
                    worst = worst.max((q - e).norm() / e.norm().max(1.0));
                    count += 1;
                }
            }
            out.push(Report::deviation(
                "oracle-equivalence",
                json!({ "field": name, "point": p, "coefficients": count }),
                worst,
                1e-8,
            ));
        }
    }
    Ok(out)
}

/// Order-12 Lie-Taylor series on SL(2,R) against direct evaluation.
fn lie_taylor_formula(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl = group("SL2R")?;
    let mut sets = Vec::new();
    for name in ["entry-11", "trace", "adjoint"] {
        let f = catalog(name, &sl)?;
        let g = sample::element(rng, &sl, 0.5);
        let data = taylor_data(&f, &g, 12, &DerivMethod::Exact)?;
        sets.push((name, f, g, data));
    }
    let mut out = Vec::new();
    for k in 0..50 {
        let (name, f, g, data) = &sets[k % sets.len()];
        let xi = sample::cube(rng, sl.dim, 0.3);
        let series = taylor_eval(data, &sl.real_to_complex(&xi))?;
        let direct = f.eval(&(g * sl.exp(&xi)?))?;
        out.push(Report::deviation("lie-taylor", json!({ "field": name, "xi": xi }), (series - direct).norm(), 1e-8));
    }
    Ok(out)
}

/// q_1 of z on U(1) is e^{2 pi}.
fn majorant_closed_form() -> Result<Vec<Report>> {
    let u1 = group("U1")?;
    let q = seminorm_q(&catalog("identity", &u1)?, 1.0, 40, &DerivMethod::Exact)?;
    let want = (2.0 * PI).exp();
    Ok(vec![Report::deviation("majorant-closed-form", json!({ "r": 1.0, "N": 40 }), (q - want).abs() / want, 1e-6)])
}

fn cauchy_riemann(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl = group("SL2C")?;
    let holo: Vec<(&str, Field)> = ["entry-11", "trace", "adjoint", "trace-exp"]
        .into_iter()
        .map(|n| Ok((n, catalog(n, &sl)?)))
        .collect::<Result<_>>()?;
    let control = catalog("re-entry-11", &sl)?;
    let mut out = Vec::new();
    for _ in 0..100 {
        let g = sample::element(rng, &sl, 0.5);
        for (name, f) in &holo {
            let r = cauchy_riemann_residual(f, &g)?;
            out.push(Report::deviation("cauchy-riemann", json!({ "field": name }), r, 1e-8));
        }
        // The control must be caught: residual >= 0.5.
        let r = cauchy_riemann_residual(&control, &g)?;
        out.push(Report::inequality("cauchy-riemann-control", json!({ "field": "re-entry-11" }), 0.5, r, 0.0));
    }
    Ok(out)
}

/// Fields with analytic operator-norm envelopes on each complex group.
fn enveloped_fields(g: &Arc<GroupModel>) -> Result<Vec<(String, Field)>> {
    let named = |names: &[&str]| -> Result<Vec<(String, Field)>> {
        names.iter().map(|n| Ok((n.to_string(), catalog(n, g)?))).collect()
    };
    match g.name.as_str() {
        "Ctimes" => named(&["identity", "character:3", "trace-exp", "constant:2"]),
        "SL2C" => named(&["entry-11", "trace", "trace-exp"]),
        _ => {
            let last = g.size - 1;
            let x1 = Field::entry(g.clone(), 0, last)?;
            let mut v = vec![("x1".to_string(), x1.clone()), ("exp-x1".to_string(), Field::exp(x1.clone()))];
            if last >= 2 {
                v.push(("x1-x2".to_string(), Field::product(x1, Field::entry(g.clone(), 1, last)?)?));
            }
            Ok(v)
        }
    }
}

/// One random configuration of both Cauchy estimates for `field`: a base
/// point, xi in K0, n <= 5 unit directions and a radius in units of the
/// metric's op-norm factor (which keeps the envelopes finite on groups with
/// a 2 pi basis scale). An infinite bound counts as a failure.
pub fn cauchy_pair(
    field: &Field,
    metric: &MetricModel,
    envs: &(SupEnvelope, SupEnvelope),
    rng: &mut SampleRng,
) -> Result<[Report; 2]> {
    let g = field.group();
    let base = sample::element(rng, g, 0.5);
    let xi = sample::ball(rng, g.dim, crate::cauchy::K0_RADIUS);
    let n = rng.gen_range(0..=5usize);
    let dirs: Vec<Vec<f64>> = (0..n).map(|_| sample::sphere(rng, g.dim)).collect();
    let r = rng.gen_range(0.2..2.0) / metric.op_norm_factor();
    let mut a = cauchy_check_operator(field, &base, &xi, &dirs, r, &envs.0)?;
    let mut b = cauchy_check_riemannian(field, &base, &xi, &dirs, r, metric, &envs.1)?;
    a.pass &= a.rhs.is_finite();
    b.pass &= b.rhs.is_finite();
    Ok([a, b])
}

/// Both envelopes of a field for [`cauchy_pair`].
pub fn cauchy_envelopes(field: &Field, metric: &MetricModel) -> Result<(SupEnvelope, SupEnvelope)> {
    Ok((SupEnvelope::operator(field)?, SupEnvelope::metric(field, metric)?))
}

/// Both Cauchy estimates on 200 random configurations per complex group.
fn cauchy_estimates(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    for name in ["Ctimes", "C1", "C2", "C3", "SL2C"] {
        let g = group(name)?;
        let metric = MetricModel::standard(g.clone());
        let fields = enveloped_fields(&g)?;
        let envs: Vec<_> = fields.iter().map(|(_, f)| cauchy_envelopes(f, &metric)).collect::<Result<_>>()?;
        for k in 0..200 {
            let (fname, f) = &fields[k % fields.len()];
            for mut rep in cauchy_pair(f, &metric, &envs[k % fields.len()], rng)? {
                rep.params["field"] = json!(fname);
                out.push(rep);
            }
        }
    }
    Ok(out)
}

fn exp_norm(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let mut names: Vec<&str> = REGISTRY_NAMES.to_vec();
    names.extend(["R3", "C3", "SU2"]);
    let mut out = Vec::new();
    for name in names {
        let g = group(name)?;
        let mut worst: Option<Report> = None;
        let mut failures = 0usize;
        for _ in 0..1000 {
            let scale = rng.gen_range(0.01..3.0);
            let x = g.algebra_element(&sample::cube(rng, g.dim, scale));
            let rep = exp_norm_check(&x);
            if !rep.pass {
                failures += 1;
            }
            if worst.as_ref().is_none_or(|w| relative_slack(&rep) < relative_slack(w)) {
                worst = Some(rep);
            }
        }
        // One report per algebra: the tightest sample, failing if any did.
        let mut rep = worst.expect("1000 samples");
        rep.params = json!({ "group": name, "samples": 1000, "violations": failures });
        rep.pass &= failures == 0;
        out.push(rep);
    }
    Ok(out)
}

fn random_segments(rng: &mut SampleRng, dim: usize, max_segments: usize, radius: f64) -> Vec<Vec<f64>> {
    let k = rng.gen_range(1..=max_segments);
    (0..k).map(|_| sample::cube(rng, dim, radius)).collect()
}

fn steiner_chains(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl = group("SL2C")?;
    let metric = MetricModel::standard(sl.clone());
    let mut out = Vec::new();
    for _ in 0..20 {
        let segs = random_segments(rng, sl.dim, 4, 0.5);
        let path = GroupPath::from_segments(&sl, &sl.identity(), &segs, 32)?;
        for r in [0.1, 0.25] {
            let chain = steiner_chain(&path, r, 0.05, &metric)?;
            out.push(verify_chain(&chain, &path, &metric));
        }
    }
    Ok(out)
}

fn random_span(rng: &mut SampleRng, h: usize, radius: f64) -> Vec<Complex64> {
    (0..h).map(|_| cx(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))).collect()
}

/// Random test points for [`verify_extension`]: `samples` elements of the
/// field's group and `targets` products of two exponentials of span
/// coordinates of size <= 0.3 in its complexification.
pub fn extension_points(field: &Field, samples: usize, targets: usize, rng: &mut SampleRng) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let g = field.group();
    let partner = g
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", g.name)))?
        .partner
        .clone();
    let h = partner.complex_dim();
    let mut t = Vec::with_capacity(targets);
    for _ in 0..targets {
        let a = partner.exp_complex(&random_span(rng, h, 0.3))?;
        let b = partner.exp_complex(&random_span(rng, h, 0.3))?;
        t.push(a * b);
    }
    let s = (0..samples).map(|_| sample::element(rng, g, 0.6)).collect();
    Ok((s, t))
}

/// g11 from SL(2,R) into SL(2,C).
fn extension(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl2r = group("SL2R")?;
    let sl2c = group("SL2C")?;
    let f = catalog("entry-11", &sl2r)?;
    let (samples, mut targets) = extension_points(&f, 20, 9, rng)?;
    targets.insert(0, sl2c.exp_complex(&[cx(0.0, 0.4), ZERO, ZERO])? * sl2c.exp_complex(&[ZERO, c(0.3), ZERO])?);
    verify_extension(&f, &samples, &targets, 3, &ContinuationOptions::default())
}

/// Two orderings of the same pair of segments, the second closed by the
/// residual segment to the common target.
fn path_independence(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl2r = group("SL2R")?;
    let sl2c = group("SL2C")?;
    let f = catalog("entry-11", &sl2r)?;
    let opts = ContinuationOptions::default();
    let r = 0.2;
    let mut out = Vec::new();
    for _ in 0..5 {
        let w1 = random_span(rng, 3, 0.3);
        let w2 = random_span(rng, 3, 0.3);
        let target = sl2c.exp_complex(&w1)? * sl2c.exp_complex(&w2)?;
        let swapped = sl2c.exp_complex(&w2)? * sl2c.exp_complex(&w1)?;
        let fix = sl2c.log_complex(&(linalg::inverse(&swapped)? * &target))?;
        let pa = segment_path(&sl2c, &[w1.clone(), w2.clone()], r)?;
        let pb = segment_path(&sl2c, &[w2, w1, fix], r)?;
        out.push(path_independence_check(&f, &target, &pa, &pb, &opts, 1e-6)?);
    }
    Ok(out)
}

fn periodicity(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let u1 = group("U1")?;
    let fields = [catalog("identity", &u1)?, catalog("trig-poly", &u1)?];
    let opts = ContinuationOptions::default();
    let mut out = Vec::new();
    for k in 0..10 {
        let z = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..=0.3));
        let mut rep = periodicity_check(&fields[k % 2], z, 1, &opts, 1e-8)?;
        rep.params["field"] = json!(if k % 2 == 0 { "identity" } else { "trig-poly" });
        out.push(rep);
    }
    Ok(out)
}

fn translation(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let sl = group("SL2R")?;
    let u1 = group("U1")?;
    let r2 = group("R2")?;
    let mut fields = Vec::new();
    for n in ["entry-11", "trace", "adjoint"] {
        fields.push((n, catalog(n, &sl)?));
    }
    for n in ["identity", "trig-poly", "trace-exp"] {
        fields.push((n, catalog(n, &u1)?));
    }
    fields.push(("x1", Field::entry(r2.clone(), 0, 2)?));
    let mut out = Vec::new();
    for k in 0..50 {
        let (name, f) = &fields[k % fields.len()];
        let g = f.group();
        let base = sample::element(rng, g, 0.5);
        let xi = sample::cube(rng, g.dim, 0.25);
        let r = rng.gen_range(0.05..=1.0);
        let mut rep = translation_check(f, &base, &xi, r, 8, 4, &DerivMethod::Exact, None)?;
        rep.params["field"] = json!(name);
        // Nonnegative slack up to 1e-12, absolute.
        rep.pass = rep.lhs.is_finite() && rep.slack >= -1e-12;
        out.push(rep);
    }
    Ok(out)
}

/// Random trig polynomials sum_{|n| <= 2} a_n z^n on U(1).
fn laurent(rng: &mut SampleRng) -> Result<Vec<Report>> {
    let u1 = group("U1")?;
    let mut out = Vec::new();
    for _ in 0..10 {
        let a: Vec<Complex64> = (0..5).map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let terms = (-2i32..=2)
            .zip(&a)
            .map(|(n, an)| Ok((*an, catalog(&format!("character:{n}"), &u1)?)))
            .collect::<Result<Vec<_>>>()?;
        let f = Field::linear_combination(terms)?;
        let data = laurent_coefficients(&f, 4, 4, 32)?;
        let mut dev: f64 = 0.0;
        for n in -4i64..=4 {
            let want = if n.abs() <= 2 { a[(n + 2) as usize] } else { ZERO };
            dev = dev.max((data.coeff(n) - want).norm());
        }
        out.push(Report::deviation("laurent-coefficients", json!({ "a": a, "nodes": 32 }), dev, 1e-12));
        let mut rep = laurent_lie_taylor_check(&f, 6, &data)?;
        rep.params["a"] = json!(a);
        out.push(rep);
    }
    Ok(out)
}
