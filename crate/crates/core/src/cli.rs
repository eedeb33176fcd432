//! The `ruelle` command line: one subcommand per experiment.
//!
//! Flags and config files share the key tables in [`crate::config`]. Each run
//! writes `manifest.json` plus its outputs into `output_dir` and exits with
//! 0 (all checks passed), 1 (a check failed), 2 (bad config) or 3 (the grid
//! does not resolve the requested packets).

use crate::bracket_metric::{MetricParams, PhasePoint};
use crate::config::{ExperimentConfig, Kind, SCHEMAS};
use crate::error::{Error, Result};
use crate::escape::{
    fitted_decay_rate, order_estimate, predicted_order, weight, DirectionKind, DualCoords, DualSplitting, EscapeConfig,
    Variant,
};
use crate::fractal_count::{alpha_grid, optimal_alpha, synth_holder};
use crate::quantize::{microlocality_probe, standard_probes, FlowModel, WeightedSpace};
use crate::shift_model::{finite_section_report, Membership, ShiftModel};
use crate::suspension::{default_probes, full_spectrum, wavefront_profile, MappingTorus};
use crate::verify;
use crate::wavepackets::{band_limited_random, resolution_residual, Bargmann, PhaseGrid, TorusGrid};
use clap::{Arg, ArgAction, ArgMatches, Command};
use num_complex::Complex64;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::f64::consts::TAU;
use std::fs;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOLUTION: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "RUELLE_THREADS";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        // a fit with too few samples is a sweep chosen too small
        Error::Config(_) | Error::InvalidParams(_) | Error::Json(_) | Error::DegenerateFit(_) => EXIT_CONFIG,
        Error::Resolution(_) => EXIT_RESOLUTION,
        _ => EXIT_ASSERTION,
    }
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut cmd = Command::new("ruelle")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Reproducible experiments on Ruelle-Pollicott resonances")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for schema in SCHEMAS {
        let mut sub = Command::new(schema.command).about(schema.about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat key = value config file; flags override it"),
        );
        for key in schema.all_keys() {
            let hint = match key.kind {
                Kind::Real => "REAL",
                Kind::Int => "INT",
                Kind::UInt => "N",
                Kind::Text => "TEXT",
                Kind::Choice(_) => "CHOICE",
            };
            let help = if key.default.is_empty() {
                key.help.to_string()
            } else {
                format!("{} [default: {}]", key.help, key.default)
            };
            sub = sub.arg(
                Arg::new(key.name)
                    .long(flag_name(key.name))
                    .value_name(hint)
                    .help(help)
                    .allow_negative_numbers(true)
                    .action(ArgAction::Set),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn resolve(name: &str, m: &ArgMatches) -> Result<ExperimentConfig> {
    let schema = crate::config::schema(name)?;
    let file = match m.get_one::<String>("config") {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?),
        None => None,
    };
    let overrides: Vec<(String, String)> = schema
        .all_keys()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    ExperimentConfig::resolve(name, file.as_deref(), &overrides)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Parses `args` (including the program name), runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let outcome = resolve(name, sub).and_then(|cfg| {
        let pool = thread_pool()?;
        pool.install(|| run(&cfg))
    });
    match outcome {
        Ok(run) => {
            for line in &run.lines {
                println!("{line}");
            }
            println!("wrote {} file(s) to {}", run.files.len(), run.dir.display());
            if run.ok {
                EXIT_OK
            } else {
                eprintln!("{name}: checks failed");
                EXIT_ASSERTION
            }
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            exit_code(&e)
        }
    }
}

/// Result of one experiment run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub ok: bool,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Human-readable summary, printed to stdout.
    pub lines: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    json: bool,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = cfg.output_dir()?;
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, json: cfg.json_output(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn bytes(&mut self, name: &str, body: Vec<u8>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn value(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// A table as `stem.csv` or `stem.json` depending on `format`.
    fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        if self.json {
            let v = t.to_json();
            self.value(&format!("{stem}.json"), &v)
        } else {
            let s = t.to_csv();
            self.text(&format!("{stem}.csv"), &s)
        }
    }
}

/// A header and rows of JSON scalars.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: &Value| match v {
            Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        };
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.header.iter().map(|h| h.to_string()).zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

/// Runs the experiment described by `cfg` and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut w = Writer::new(cfg)?;
    let mut manifest = cfg.manifest_json()?;
    manifest.push('\n');
    w.text("manifest.json", &manifest)?;
    let (ok, lines) = match cfg.command.as_str() {
        "toy" => toy(cfg, &mut w)?,
        "resolution-check" => resolution_check(cfg, &mut w)?,
        "quantize-probes" => quantize_probes(cfg, &mut w)?,
        "escape-sweep" => escape_sweep(cfg, &mut w)?,
        "suspension" => suspension(cfg, &mut w)?,
        "weyl-boxes" => weyl_boxes(cfg, &mut w)?,
        "verify-all" => verify_all(cfg, &mut w)?,
        other => return Err(Error::Config(format!("unknown command '{other}'"))),
    };
    Ok(RunOutcome { ok, dir: w.dir, files: w.files, lines })
}

fn metric(cfg: &ExperimentConfig) -> Result<MetricParams> {
    MetricParams::new(cfg.f64("delta0")?, cfg.f64("alpha_perp")?, cfg.f64("alpha_par")?)
}

fn membership_str(m: Membership) -> &'static str {
    match m {
        Membership::Member => "member",
        Membership::NotMember => "not_member",
        Membership::Boundary => "boundary",
    }
}

fn toy(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let w0 = Complex64::new(cfg.f64("w0")?, cfg.f64("w0_im")?);
    let w1 = Complex64::new(cfg.f64("w1")?, cfg.f64("w1_im")?);
    let r = cfg.f64("r")?;
    let half = cfg.i64("window")?;
    let model = ShiftModel::new(w0, w1, r, (-half, half))?;
    let ess = (-r).exp();
    let degenerate = w0 == w1;
    let (m0, m1) = (model.membership_w0(), model.membership_w1());
    // Expected verdicts; for w0 = w1 both eigenvectors are finitely supported.
    let expect = |member: bool, m: Membership| m == Membership::Boundary || (m == Membership::Member) == member;
    let ok0 = expect(degenerate || w0.norm() > ess, m0);
    let ok1 = expect(degenerate || w1.norm() < ess, m1);
    let res_u = model.eigen_residual(&model.eigvec_u(Complex64::new(1.0, 0.0)), w0)?;
    let res_v = model.eigen_residual(&model.eigvec_v(Complex64::new(1.0, 0.0)), w1)?;
    let res_inv = model.inverse_residual();
    let section_n = cfg.usize("section_n")?;
    let section = if section_n > 0 { serde_json::to_value(finite_section_report(&model, section_n)?)? } else { Value::Null };
    let ok = ok0 && ok1 && res_u <= 1e-12 && res_v <= 1e-12 && res_inv <= 1e-14;
    w.value(
        "membership.json",
        &json!({
            "memberships": {
                "w0": membership_str(m0),
                "w1": membership_str(m1),
                "essential_radius": ess,
                "degenerate": degenerate,
                "agrees_with_lemma": ok0 && ok1,
            },
            "eigencheck_residuals": {"u": res_u, "v": res_v, "inverse": res_inv},
            "section_eigs": section,
        }),
    )?;
    let lines = vec![
        format!("w0: {} (|w0| = {:.4}, e^-r = {ess:.4})", membership_str(m0), w0.norm()),
        format!("w1: {} (|w1| = {:.4})", membership_str(m1), w1.norm()),
        format!("residuals: LU {res_u:.1e}, LV {res_v:.1e}, L L^-1 {res_inv:.1e}"),
    ];
    Ok((ok, lines))
}

fn resolution_check(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let p = metric(cfg)?;
    let g = TorusGrid::cube(cfg.usize("dim")?, cfg.usize("grid")?, TAU)?;
    let band = cfg.i64("band")?;
    let eta_max = cfg.f64("eta_max")?;
    let base = cfg.usize("base")?;
    let levels: Vec<usize> = cfg.list("refinements")?;
    if levels.is_empty() {
        return Err(Error::Config("refinements must not be empty".into()));
    }
    let u = band_limited_random(&g, band, cfg.seed()?)?;
    let mut t = Table::new(&["refine", "phase_points", "residual"]);
    let mut res = Vec::new();
    let mut last = None;
    for &refine in &levels {
        let b = Bargmann::new(PhaseGrid::new(&g, base, refine, eta_max)?, &p)?;
        let r = resolution_residual(&b, &u)?;
        t.push(vec![json!(refine), json!(b.phase.len()), json!(r)]);
        res.push(r);
        last = Some(b);
    }
    w.table("residuals", &t)?;
    if let (1, Some(b)) = (g.dim(), last) {
        let mut buf = Vec::new();
        b.forward(&u)?.write_csv(&b.phase.base, &mut buf)?;
        w.bytes("field.csv", buf)?;
    }
    let decreasing = res.windows(2).all(|p| p[1] < p[0]);
    let ok = res.iter().all(|&r| r <= 1e-3) && decreasing;
    let lines = levels.iter().zip(&res).map(|(l, r)| format!("refine {l}: ||B*Bu - u||/||u|| = {r:.3e}")).collect();
    Ok((ok, lines))
}

fn quantize_probes(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let p = metric(cfg)?;
    let g = TorusGrid::cube(1, cfg.usize("grid")?, TAU)?;
    let phase = PhaseGrid::new(&g, cfg.usize("base")?, cfg.usize("refine")?, cfg.f64("eta_max")?)?;
    let bg = Bargmann::new(phase, &p)?;
    let sp = WeightedSpace::bracket_omega(cfg.f64("weight_r")?);
    let reports = standard_probes(&bg, &sp, cfg.i64("band")?)?;
    w.value("probes.json", &serde_json::to_value(&reports)?)?;

    // micro-locality needs packets that fit the grid at |omega| = 8
    let mg = TorusGrid::cube(1, 256, TAU)?;
    let rho = PhasePoint::new(vec![], 1.0, vec![], 8.0)?;
    let ds: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let micro = microlocality_probe(&mg, &p, &rho, 0.7, &FlowModel::CircleRotation, &ds, 5.0)?;
    let mut t = Table::new(&["distance", "magnitude"]);
    for s in &micro.samples {
        t.push(vec![json!(s.distance), json!(s.magnitude)]);
    }
    w.table("microlocality", &t)?;

    let mut lines: Vec<String> = reports
        .iter()
        .map(|r| {
            format!("{} {}: {:.3e} vs bound {:.3e} {}", r.probe, r.params, r.residual, r.bound, if r.pass { "ok" } else { "FAIL" })
        })
        .collect();
    lines.push(format!(
        "micro-locality: fitted N {:.2} (>= 4), on/off-graph ratio {:.0} at distance {}",
        micro.n_fit, micro.ratio, micro.off_distance
    ));
    let ok = reports.iter().all(|r| r.pass) && micro.n_fit >= 4.0;
    Ok((ok, lines))
}

fn escape_config(cfg: &ExperimentConfig) -> Result<EscapeConfig> {
    let variant = match cfg.text("variant")? {
        "w2" => Variant::W2 { r: cfg.f64("w2_r")?, t_avg: cfg.f64("t_avg")? },
        _ => Variant::Lemma42,
    };
    EscapeConfig::new(cfg.f64("r_u")?, cfg.f64("r_s")?, cfg.f64("gamma")?, cfg.f64("gamma_prime")?, cfg.f64("h0")?, variant)
}

fn escape_sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let p = metric(cfg)?;
    let esc = escape_config(cfg)?;
    let split = DualSplitting::cat_map();
    let mut ok = true;
    let mut lines = Vec::new();

    let mut orders = Table::new(&["direction", "fitted", "predicted", "error"]);
    for kind in [DirectionKind::Flow, DirectionKind::Unstable, DirectionKind::Stable, DirectionKind::Transverse] {
        let fitted = order_estimate(&kind.representative(), &split, &esc, &p)?;
        let predicted = predicted_order(kind, &esc, &p);
        let name = serde_json::to_value(kind)?;
        if predicted.is_nan() {
            orders.push(vec![name, json!(fitted), Value::Null, Value::Null]);
            continue;
        }
        let err = (fitted - predicted).abs();
        ok &= err <= 0.05;
        lines.push(format!("order along {}: {fitted:.3} (predicted {predicted:.3})", name.as_str().unwrap_or("?")));
        orders.push(vec![name, json!(fitted), json!(predicted), json!(err)]);
    }
    w.table("orders", &orders)?;

    let mut decay = Table::new(&["xi_u", "xi_s", "omega", "fitted_rate", "lambda"]);
    if let Variant::Lemma42 = esc.variant {
        let lam = esc.decay_rate(&split, &p);
        for start in [DualCoords::new(1024.0, 0.0, 0.0), DualCoords::new(0.0, 1e6, 0.0)] {
            let fit = fitted_decay_rate(&start, cfg.f64("t_max")?, &split, &esc, &p)?;
            ok &= (fit - lam).abs() <= 0.1 * lam;
            lines.push(format!("decay from ({}, {}, {}): {fit:.4} (Lambda {lam:.4})", start.u, start.s, start.omega));
            decay.push(vec![json!(start.u), json!(start.s), json!(start.omega), json!(fit), json!(lam)]);
        }
    }
    w.table("decay", &decay)?;

    let n = cfg.usize("field_size")?.max(2);
    let ext = cfg.f64("field_extent")?;
    let omega = cfg.f64("omega")?;
    let mut field = Table::new(&["xi_u", "xi_s", "omega", "W"]);
    for i in 0..n {
        for j in 0..n {
            let at = |k: usize| -ext + 2.0 * ext * k as f64 / (n - 1) as f64;
            let c = DualCoords::new(at(i), at(j), omega);
            field.push(vec![json!(c.u), json!(c.s), json!(c.omega), json!(weight(&c, &split, &esc, &p))]);
        }
    }
    w.table("weight_field", &field)?;
    Ok((ok, lines))
}

fn suspension(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let p = metric(cfg)?;
    let torus = MappingTorus::default();
    let r = cfg.f64("R")?;
    let esc = EscapeConfig::new(r, r, cfg.f64("gamma")?, 0.0, 1.0, Variant::Lemma42)?;
    let k_max = cfg.usize("k_max")?;
    let spec = full_spectrum(&torus, k_max, cfg.i64("nu_max")?, &esc, &p, cfg.f64("threshold")?)?;
    let mut body = spec.spectrum_json()?;
    body.push('\n');
    w.text("spectrum.json", &body)?;
    let mut certs = Table::new(&["nu1", "nu2", "norm_bound", "pass"]);
    for c in &spec.certificates {
        certs.push(vec![json!(c.nu[0]), json!(c.nu[1]), json!(c.norm_bound), json!(c.pass)]);
    }
    w.table("certificates", &certs)?;

    let wf_k = cfg.i64("wf_k")?;
    if wf_k != 0 {
        let w0 = TAU * wf_k as f64;
        let offsets: Vec<f64> = (-12..=12).map(f64::from).collect();
        let probes = default_probes(&torus, w0, &offsets, &[0.0, 1.0, 4.0, 16.0, 64.0]);
        let recs = wavefront_profile(&torus, w0, &probes, &p, &esc)?;
        let mut t = Table::new(&["x1", "x2", "z", "xi1", "xi2", "omega", "magnitude", "oracle", "weight", "in_vicinity"]);
        for r in &recs {
            let q = &r.probe;
            t.push(vec![
                json!(q.x[0]),
                json!(q.x[1]),
                json!(q.z),
                json!(q.xi[0]),
                json!(q.xi[1]),
                json!(q.omega),
                json!(r.magnitude),
                json!(r.oracle),
                json!(r.weight),
                json!(r.in_vicinity),
            ]);
        }
        w.table("wavefront", &t)?;
    }
    let all_pass = spec.certificates.iter().all(|c| c.pass);
    let count_ok = spec.points.len() == 2 * k_max + 1;
    let ok = all_pass && count_ok && spec.max_recovery_error <= 1e-10;
    let lines = vec![
        format!("{} eigenvalues (expected {}), recovery error {:.1e}", spec.points.len(), 2 * k_max + 1, spec.max_recovery_error),
        format!(
            "{} of {} orbit certificates pass",
            spec.certificates.iter().filter(|c| c.pass).count(),
            spec.certificates.len()
        ),
    ];
    Ok((ok, lines))
}

fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("alpha_grid must be lo:hi:step, got '{s}'")))?;
    match parts[..] {
        [lo, hi, step] if step > 0.0 && lo <= hi && lo > 0.0 && hi <= 1.0 => Ok(alpha_grid(lo, hi, step)),
        _ => Err(Error::Config(format!("alpha_grid must be lo:hi:step with 0 < lo <= hi <= 1, got '{s}'"))),
    }
}

fn weyl_boxes(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let beta0 = cfg.f64("beta0")?;
    let n = cfg.usize("n")?;
    let form = synth_holder(beta0, cfg.seed()?, n)?;
    let (lo, hi) = (cfg.f64("omega_min")?, cfg.f64("omega_max")?);
    if !(lo >= 1.0 && hi >= 2.0 * lo) {
        return Err(Error::Config(format!("need 1 <= omega_min and omega_max >= 2 omega_min, got {lo}, {hi}")));
    }
    let omegas: Vec<f64> = std::iter::successors(Some(lo), |o| Some(o * 2.0)).take_while(|&o| o <= hi).collect();
    let alphas = parse_alpha_grid(cfg.text("alpha_grid")?)?;
    let opt = optimal_alpha(&form, &omegas, &alphas)?;
    let mut t = Table::new(&["omega", "alpha", "count"]);
    for r in &opt.reports {
        t.push(vec![json!(r.omega), json!(r.alpha), json!(r.box_count)]);
    }
    w.table("counts", &t)?;
    let target = n as f64 / (1.0 + beta0);
    let alpha_target = 1.0 / (1.0 + beta0);
    w.value(
        "summary.json",
        &json!({
            "alpha_star": opt.alpha_star,
            "exponent_star": opt.exponent_star,
            "predicted_alpha_star": alpha_target,
            "predicted_exponent_star": target,
            "curve": opt.curve.iter().map(|&(a, e)| json!({"alpha": a, "exponent": e})).collect::<Vec<_>>(),
        }),
    )?;
    let ok = (opt.alpha_star - alpha_target).abs() <= 0.05 && (opt.exponent_star - target).abs() <= 0.05;
    let lines = vec![format!(
        "alpha* {:.3} (predicted {alpha_target:.3}), E* {:.3} (predicted {target:.3})",
        opt.alpha_star, opt.exponent_star
    )];
    Ok((ok, lines))
}

fn verify_all(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Vec<String>)> {
    let mut ids: Vec<u8> = cfg.list("only")?;
    if ids.is_empty() {
        ids = (1..=verify::CRITERIA).collect();
    }
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > verify::CRITERIA) {
        return Err(Error::Config(format!("no criterion {bad}")));
    }
    let mut lines = Vec::new();
    let mut results = Vec::new();
    for id in ids {
        let r = verify::run(id);
        // print as we go: the full suite takes minutes
        println!("{}", r.line());
        lines.extend(r.details.iter().map(|d| format!("    {d}")));
        results.push(r);
    }
    let mut buf = Vec::new();
    verify::write_report_csv(&mut buf, &results)?;
    w.bytes("acceptance.csv", buf)?;
    let passed = results.iter().filter(|r| r.pass).count();
    lines.push(format!("{passed}/{} criteria pass", results.len()));
    Ok((passed == results.len(), lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_csv_and_json() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![json!(0.5), json!("x,y")]);
        t.push(vec![json!(-2), Value::Null]);
        assert_eq!(t.to_csv(), "a,b\n0.5,\"x,y\"\n-2,\n");
        assert_eq!(t.to_json()[0]["b"], "x,y");
    }

    #[test]
    fn every_key_has_a_flag() {
        let cmd = command();
        for schema in SCHEMAS {
            let sub = cmd.find_subcommand(schema.command).unwrap();
            for key in schema.all_keys() {
                let arg = sub.get_arguments().find(|a| a.get_id() == key.name).unwrap();
                assert_eq!(arg.get_long().unwrap(), flag_name(key.name));
            }
        }
        command().debug_assert();
    }

    #[test]
    fn alpha_grid_parsing() {
        assert_eq!(parse_alpha_grid("0.5:0.6:0.05").unwrap().len(), 3);
        assert!(parse_alpha_grid("0.5:0.6").is_err());
        assert!(parse_alpha_grid("0.7:0.6:0.1").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Resolution("x".into())), EXIT_RESOLUTION);
        assert_eq!(exit_code(&Error::DegenerateFit("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), EXIT_ASSERTION);
    }
}
