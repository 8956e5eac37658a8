use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use lie_taylor::derive::{taylor_data, DerivMethod};
use lie_taylor::error::Error;
use lie_taylor::extend::{
    continue_along_path, default_path, effective_radius, extend_value, segment_path, steiner_chain, verify_chain,
    verify_extension, ContinuationOptions,
};
use lie_taylor::fields::{catalog, Field, FieldDescriptor};
use lie_taylor::group::{pairs_to_matrix, registry_get, GroupModel};
use lie_taylor::laurent::{laurent_coefficients, laurent_lie_taylor_check};
use lie_taylor::linalg::CMat;
use lie_taylor::report::Report;
use lie_taylor::riemann::{curve_length, distance_upper_bound, GroupPath, MetricModel};
use lie_taylor::sample;
use lie_taylor::suite::{self, SuiteConfig};
use lie_taylor::taylor::{entirety_heuristic, majorant_coefficients, majorant_eval, seminorm_q, taylor_eval};

use crate::config::{Command, ConfigError, Format, RunConfig};

pub enum Failure {
    Config(ConfigError),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

type Res<T> = std::result::Result<T, Failure>;

/// Rendered output and whether every check in it passed.
pub struct Output {
    pub text: String,
    pub all_passed: bool,
}

/// 2 for errors in what the user supplied, 3 for refusals.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::NotFound(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Config(ConfigError::Invalid(msg.into()))
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn render(format: Format, lines: Vec<Value>, table: impl FnOnce() -> Table, all_passed: bool) -> Res<Output> {
    let text = match format {
        Format::Json => {
            let mut s = String::new();
            for l in lines {
                s.push_str(&serde_json::to_string(&l).map_err(Error::from)?);
                s.push('\n');
            }
            s
        }
        Format::Csv => {
            let t = table();
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| invalid(format!("csv: {e}"));
            w.write_record(&t.header).map_err(io)?;
            for r in &t.rows {
                w.write_record(r).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| invalid(format!("csv: {e}")))?;
            String::from_utf8(bytes).map_err(|e| invalid(format!("csv: {e}")))?
        }
    };
    Ok(Output { text, all_passed })
}

fn to_value<T: Serialize>(x: &T) -> Res<Value> {
    Ok(serde_json::to_value(x).map_err(Error::from)?)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn report_table(reps: &[Report]) -> Table {
    Table {
        header: vec!["check", "lhs", "rhs", "slack", "pass"],
        rows: reps
            .iter()
            .map(|r| vec![r.check.clone(), num(r.lhs), num(r.rhs), num(r.slack), r.pass.to_string()])
            .collect(),
    }
}

fn reports(cfg: &RunConfig, reps: Vec<Report>) -> Res<Output> {
    let pass = reps.iter().all(|r| r.pass);
    let lines = reps.iter().map(to_value).collect::<Res<Vec<_>>>()?;
    render(cfg.format, lines, || report_table(&reps), pass)
}

fn default_group(cmd: Command) -> &'static str {
    match cmd {
        Command::Seminorm | Command::Laurent => "U1",
        Command::CauchyCheck | Command::Steiner => "SL2C",
        _ => "SL2R",
    }
}

fn default_field(cmd: Command) -> &'static str {
    match cmd {
        Command::Laurent => "trig-poly",
        _ => "identity",
    }
}

fn group_of(cmd: Command, cfg: &RunConfig) -> Res<Arc<GroupModel>> {
    Ok(registry_get(cfg.group.as_deref().unwrap_or(default_group(cmd)))?)
}

fn field_of(cmd: Command, cfg: &RunConfig) -> Res<(Field, String)> {
    match &cfg.field {
        None | Some(Value::String(_)) => {
            let name = match &cfg.field {
                Some(Value::String(s)) => s.clone(),
                _ => default_field(cmd).to_string(),
            };
            let g = group_of(cmd, cfg)?;
            Ok((catalog(&name, &g)?, name))
        }
        Some(v) => {
            let d: FieldDescriptor =
                serde_json::from_value(v.clone()).map_err(|e| invalid(format!("field descriptor: {e}")))?;
            let f = d.build()?;
            if let Some(g) = &cfg.group {
                if *g != f.group().name {
                    return Err(invalid(format!("--group {g} disagrees with the descriptor's group {}", f.group().name)));
                }
            }
            Ok((f, "descriptor".into()))
        }
    }
}

fn method_of(cfg: &RunConfig) -> Res<DerivMethod> {
    Ok(match cfg.method.as_deref().unwrap_or("exact") {
        "exact" => DerivMethod::Exact,
        "quadrature" | "cauchy-quadrature" => DerivMethod::quadrature(),
        "finite-difference" | "fd" => DerivMethod::finite_difference(),
        other => return Err(invalid(format!("unknown method '{other}'"))),
    })
}

fn radii(cfg: &RunConfig, default: &[f64]) -> Res<Vec<f64>> {
    let r = cfg.radius.clone().unwrap_or_else(|| default.to_vec());
    if r.is_empty() || r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("radii must be finite and nonnegative"));
    }
    Ok(r)
}

fn complex(v: &Value) -> Res<Complex64> {
    match v {
        Value::Number(n) => Ok(Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(p) if p.len() == 2 => {
            let re = p[0].as_f64().ok_or_else(|| invalid("pair entries must be numbers"))?;
            let im = p[1].as_f64().ok_or_else(|| invalid("pair entries must be numbers"))?;
            Ok(Complex64::new(re, im))
        }
        _ => Err(invalid(format!("expected a number or an [re, im] pair, got {v}"))),
    }
}

fn complex_list(v: &Value) -> Res<Vec<Complex64>> {
    v.as_array().ok_or_else(|| invalid("expected a list of coordinates"))?.iter().map(complex).collect()
}

/// A matrix in `group`: rows of entries, a flat row-major list, or
/// {"exp": coordinates} (span coordinates on complex groups, real ones
/// otherwise).
fn matrix_in(group: &GroupModel, v: &Value) -> Res<CMat> {
    if let Some(w) = v.get("exp") {
        let w = complex_list(w)?;
        return Ok(if group.is_complex {
            group.exp_complex(&w)?
        } else {
            group.exp(&w.iter().map(|z| z.re).collect::<Vec<_>>())?
        });
    }
    let rows = v.as_array().ok_or_else(|| invalid("a target is a matrix or {\"exp\": [...]}"))?;
    let flat: Vec<Complex64> = if rows.first().is_some_and(|r| r.as_array().is_some_and(|x| x.iter().all(|e| e.is_array()) && !x.is_empty())) {
        rows.iter().map(complex_list).collect::<Res<Vec<_>>>()?.concat()
    } else {
        complex_list(v)?
    };
    let pairs: Vec<[f64; 2]> = flat.iter().map(|z| [z.re, z.im]).collect();
    let m = pairs_to_matrix(group.size, &pairs)?;
    if !group.contains(&m) {
        return Err(invalid(format!("target is not an element of {}", group.name)));
    }
    Ok(m)
}

fn target_in(group: &GroupModel, cfg: &RunConfig) -> Res<Option<CMat>> {
    cfg.target.as_ref().map(|v| matrix_in(group, v)).transpose()
}

fn segments(cfg: &RunConfig) -> Res<Option<Vec<Vec<Complex64>>>> {
    match &cfg.path {
        None => Ok(None),
        Some(v) => {
            let segs = v.as_array().ok_or_else(|| invalid("a path is a list of segments"))?;
            Ok(Some(segs.iter().map(complex_list).collect::<Res<_>>()?))
        }
    }
}

fn partner(g: &GroupModel) -> Res<Arc<GroupModel>> {
    Ok(g.complexification
        .as_ref()
        .ok_or_else(|| invalid(format!("{} has no complexification", g.name)))?
        .partner
        .clone())
}

fn continuation_options(cfg: &RunConfig) -> ContinuationOptions {
    let d = ContinuationOptions::default();
    ContinuationOptions {
        radius: cfg.radius.as_ref().and_then(|r| r.first().copied()),
        order: cfg.order.unwrap_or(d.order),
        shift_order: cfg.shift_order.unwrap_or(d.shift_order),
        ..d
    }
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(suite::DEFAULT_SEED)
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    match cmd {
        Command::Derive => derive(cmd, cfg),
        Command::Taylor => taylor(cmd, cfg),
        Command::Majorant => majorant(cmd, cfg),
        Command::Seminorm => seminorm(cmd, cfg),
        Command::EntireCheck => entire_check(cmd, cfg),
        Command::Riemann => riemann(cmd, cfg),
        Command::CauchyCheck => cauchy_check(cmd, cfg),
        Command::Steiner => steiner(cmd, cfg),
        Command::Continue => continuation(cmd, cfg),
        Command::Extend => extend(cmd, cfg),
        Command::VerifyExtension => verify(cmd, cfg),
        Command::Laurent => laurent(cmd, cfg),
        Command::Suite => run_suite(cfg),
    }
}

fn base_point(field: &Field, cfg: &RunConfig) -> Res<CMat> {
    let g = field.group();
    Ok(target_in(g, cfg)?.unwrap_or_else(|| g.identity()))
}

fn derive(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let at = base_point(&field, cfg)?;
    let t = taylor_data(&field, &at, cfg.order.unwrap_or(4), &method_of(cfg)?)?;
    let table = || {
        let mut rows = Vec::new();
        for (n, block) in t.coeffs.iter().enumerate() {
            for (idx, z) in block.iter().enumerate() {
                let word: Vec<String> =
                    lie_taylor::fields::decode_index(idx, n, t.dim).iter().map(|a| (a + 1).to_string()).collect();
                rows.push(vec![n.to_string(), word.join("."), num(z.re), num(z.im), num(t.errors[n])]);
            }
        }
        Table { header: vec!["order", "word", "re", "im", "error"], rows }
    };
    render(cfg.format, vec![to_value(&t)?], table, true)
}

fn taylor(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, name) = field_of(cmd, cfg)?;
    let g = field.group();
    let target = target_in(g, cfg)?.ok_or_else(|| invalid("taylor needs --target"))?;
    let xi = g.log(&target)?;
    let n = cfg.order.unwrap_or(12);
    let t = taylor_data(&field, &g.identity(), n, &method_of(cfg)?)?;
    let series = taylor_eval(&t, &g.real_to_complex(&xi))?;
    let direct = field.eval(&target)?;
    let dev = (series - direct).norm();
    let line = json!({
        "group": g.name, "field": name, "order": n, "xi": xi,
        "series": series, "direct": direct, "deviation": dev,
    });
    let table = || Table {
        header: vec!["order", "series_re", "series_im", "direct_re", "direct_im", "deviation"],
        rows: vec![vec![n.to_string(), num(series.re), num(series.im), num(direct.re), num(direct.im), num(dev)]],
    };
    render(cfg.format, vec![line], table, true)
}

fn majorant(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let at = base_point(&field, cfg)?;
    let t = taylor_data(&field, &at, cfg.order.unwrap_or(12), &method_of(cfg)?)?;
    let m = majorant_coefficients(&t, 0.0);
    let mut evals = Vec::new();
    for r in radii(cfg, &[0.5, 1.0, 2.0])? {
        evals.push((r, majorant_eval(&m, r, None)?));
    }
    let line = json!({
        "group": field.group().name,
        "order": m.order,
        "coeffs": m.coeffs,
        "evaluations": evals.iter().map(|(r, v)| json!({ "r": r, "value": v.value, "tail": v.tail })).collect::<Vec<_>>(),
    });
    let table = || Table {
        header: vec!["r", "value", "tail"],
        rows: evals.iter().map(|(r, v)| vec![num(*r), num(v.value), num(v.tail.bound())]).collect(),
    };
    render(cfg.format, vec![line], table, true)
}

fn seminorm(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let n = cfg.order.unwrap_or(40);
    let method = method_of(cfg)?;
    let mut vals = Vec::new();
    for r in radii(cfg, &[1.0])? {
        vals.push((r, seminorm_q(&field, r, n, &method)?));
    }
    let lines = vals
        .iter()
        .map(|(r, v)| json!({ "group": field.group().name, "r": r, "N": n, "value": v }))
        .collect();
    let table = || Table {
        header: vec!["r", "N", "value"],
        rows: vals.iter().map(|(r, v)| vec![num(*r), n.to_string(), num(*v)]).collect(),
    };
    render(cfg.format, lines, table, true)
}

fn entire_check(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    // The largest order whose top block stays near a million coefficients.
    let n = cfg.order.unwrap_or(match field.group().dim {
        1 => 40,
        2 => 20,
        3 => 12,
        _ => 8,
    });
    let t = taylor_data(&field, &field.group().identity(), n, &method_of(cfg)?)?;
    let ev = entirety_heuristic(&majorant_coefficients(&t, 0.0))?;
    let line = json!({ "group": field.group().name, "order": n, "evidence": ev });
    let table = || Table {
        header: vec!["verdict", "alpha", "beta"],
        rows: vec![vec![
            to_value(&ev.verdict).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
            ev.fit.map(|f| num(f.alpha)).unwrap_or_default(),
            ev.fit.map(|f| num(f.beta)).unwrap_or_default(),
        ]],
    };
    render(cfg.format, vec![line], table, true)
}

fn path_in(group: &GroupModel, segs: &[Vec<Complex64>]) -> Res<GroupPath> {
    Ok(if group.is_complex {
        GroupPath::from_complex_segments(group, &group.identity(), segs, 64)?
    } else {
        let real: Vec<Vec<f64>> = segs.iter().map(|w| w.iter().map(|z| z.re).collect()).collect();
        GroupPath::from_segments(group, &group.identity(), &real, 64)?
    })
}

fn riemann(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let g = group_of(cmd, cfg)?;
    let metric = MetricModel::standard(g.clone());
    let target = target_in(&g, cfg)?;
    let segs = segments(cfg)?;
    if target.is_none() && segs.is_none() {
        return Err(invalid("riemann needs --target or --path"));
    }
    let (mut dist, mut log_len, mut path_len) = (None, None, None);
    if let Some(t) = &target {
        dist = Some(distance_upper_bound(&g.identity(), t, &metric)?);
        log_len = metric.log_length(t);
    }
    if let Some(s) = &segs {
        path_len = Some(curve_length(&path_in(&g, s)?, &metric)?);
    }
    let line = json!({
        "group": g.name,
        "distance_upper_bound": dist,
        "log_length": log_len,
        "path_length": path_len,
    });
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let table = || Table {
        header: vec!["distance_upper_bound", "log_length", "path_length"],
        rows: vec![vec![opt(dist), opt(log_len), opt(path_len)]],
    };
    render(cfg.format, vec![line], table, true)
}

fn cauchy_check(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, name) = field_of(cmd, cfg)?;
    let metric = MetricModel::standard(field.group().clone());
    let envs = suite::cauchy_envelopes(&field, &metric)?;
    let mut rng = sample::rng(seed(cfg));
    let count = cfg.order.unwrap_or(20);
    let mut out = Vec::new();
    for _ in 0..count {
        for mut rep in suite::cauchy_pair(&field, &metric, &envs, &mut rng)? {
            rep.params["field"] = json!(name);
            out.push(rep);
        }
    }
    reports(cfg, out)
}

fn steiner(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let g = group_of(cmd, cfg)?;
    let segs = segments(cfg)?.ok_or_else(|| invalid("steiner needs --path"))?;
    let path = path_in(&g, &segs)?;
    let metric = MetricModel::standard(g.clone());
    let r = radii(cfg, &[0.25])?[0];
    let chain = steiner_chain(&path, r, 0.05, &metric)?;
    let rep = verify_chain(&chain, &path, &metric);
    let pass = rep.pass;
    let line = json!({ "chain": chain, "report": rep });
    let table = || Table {
        header: vec!["center", "time", "sample"],
        rows: chain
            .times
            .iter()
            .zip(&chain.indices)
            .enumerate()
            .map(|(k, (t, i))| vec![k.to_string(), num(*t), i.to_string()])
            .collect(),
    };
    render(cfg.format, vec![line], table, pass)
}

fn continuation_path(field: &Field, cfg: &RunConfig, opts: &ContinuationOptions) -> Res<(GroupPath, Option<CMat>)> {
    let p = partner(field.group())?;
    let target = target_in(&p, cfg)?;
    let r = effective_radius(field, opts)?;
    match (segments(cfg)?, &target) {
        (Some(s), _) => Ok((segment_path(&p, &s, r)?, target)),
        (None, Some(t)) => Ok((default_path(&p, t, r)?, target)),
        (None, None) => Err(invalid("continuation needs --path or --target")),
    }
}

fn continuation(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let opts = continuation_options(cfg);
    let (path, _) = continuation_path(&field, cfg, &opts)?;
    let state = continue_along_path(&field, &path, &opts)?;
    let table = || Table {
        header: vec!["step", "xi_norm", "re", "im", "error_estimate"],
        rows: state
            .steps
            .iter()
            .map(|s| vec![s.step.to_string(), num(s.xi_norm), num(s.value.re), num(s.value.im), num(s.error_estimate)])
            .collect(),
    };
    render(cfg.format, vec![to_value(&state)?], table, true)
}

fn extend(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, name) = field_of(cmd, cfg)?;
    let opts = continuation_options(cfg);
    let p = partner(field.group())?;
    let target = target_in(&p, cfg)?.ok_or_else(|| invalid("extend needs --target"))?;
    let path = match segments(cfg)? {
        Some(s) => Some(segment_path(&p, &s, effective_radius(&field, &opts)?)?),
        None => None,
    };
    let ext = extend_value(&field, &target, path.as_ref(), &opts)?;
    let line = json!({
        "group": field.group().name,
        "partner": p.name,
        "field": name,
        "value": ext.value,
        "error_estimate": ext.error_estimate,
        "steps": ext.state.steps.len(),
    });
    let table = || Table {
        header: vec!["re", "im", "error_estimate", "steps"],
        rows: vec![vec![num(ext.value.re), num(ext.value.im), num(ext.error_estimate), ext.state.steps.len().to_string()]],
    };
    render(cfg.format, vec![line], table, true)
}

fn verify(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let mut rng = sample::rng(seed(cfg));
    let (samples, targets) = suite::extension_points(&field, 10, 5, &mut rng)?;
    let reps = verify_extension(&field, &samples, &targets, cfg.order.unwrap_or(3), &continuation_options(cfg))?;
    reports(cfg, reps)
}

fn laurent(cmd: Command, cfg: &RunConfig) -> Res<Output> {
    let (field, _) = field_of(cmd, cfg)?;
    let n = cfg.order.unwrap_or(4);
    let nodes = (4 * (n + 1)).next_power_of_two().max(32);
    let data = laurent_coefficients(&field, n, n, nodes)?;
    let identity = laurent_lie_taylor_check(&field, n.min(6), &data)?;
    let pass = identity.pass;
    let line = json!({ "data": data, "identity": identity });
    let table = || Table {
        header: vec!["n", "re", "im"],
        rows: data.indices().map(|k| vec![k.to_string(), num(data.coeff(k).re), num(data.coeff(k).im)]).collect(),
    };
    render(cfg.format, vec![line], table, pass)
}

fn run_suite(cfg: &RunConfig) -> Res<Output> {
    let outcomes = suite::run_suite(&SuiteConfig { seed: seed(cfg), only: Vec::new() });
    let pass = outcomes.iter().all(|o| o.pass);
    let lines = outcomes.iter().map(to_value).collect::<Res<Vec<_>>>()?;
    let table = || Table {
        header: vec!["criterion", "name", "pass", "checks", "failures"],
        rows: outcomes
            .iter()
            .map(|o| vec![o.criterion.to_string(), o.name.clone(), o.pass.to_string(), o.checks.to_string(), o.failures.to_string()])
            .collect(),
    };
    render(cfg.format, lines, table, pass)
}
