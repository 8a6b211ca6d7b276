use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use misspec_core::estimators::{estimate as fit_and_compromise, risk_table_estimators, AEstimator};
use misspec_core::mcstudy::{coverage_study, finite_sample_mse, kappa_by_simulation, CoverageRow, KappaEstimate};
use misspec_core::models::{build_model, information_at_null, ModelOptions, SharedModel, CATALOGUE_NAMES};
use misspec_core::risk::{grid, l1_loss_fn, l1_tolerance, limit_geometry, risk_profile, write_profiles_csv, Loss};
use misspec_core::tolerance::{
    aic_narrow_prob, detection_power_ncp, narrow_better, schwarz_narrow_prob, tolerance_report,
};

use crate::config::{parse_study, StudyKind};
use crate::data::parse_data;
use crate::failure::{CliResult, Failure};
use crate::{EstimateArgs, L1Args, ModelArgs, RiskArgs, SelectArgs, SimulateArgs, ToleranceArgs};

/// The normalized settings of a run, echoed to standard error so that the
/// output can always be traced back to its inputs.
struct RunConfig {
    subcommand: &'static str,
    entries: Vec<(&'static str, String)>,
}

impl RunConfig {
    fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            entries: Vec::new(),
        }
    }

    fn set(mut self, key: &'static str, value: impl ToString) -> Self {
        self.entries.push((key, value.to_string()));
        self
    }

    fn echo(&self) {
        let mut s = format!("# misspec {}\n", self.subcommand);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k} = {v}");
        }
        eprint!("{s}");
    }
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn options(args: &ModelArgs) -> ModelOptions {
    ModelOptions {
        theta0: args.theta0.clone(),
        spread: args.spread,
        first_group_fraction: args.group_fraction,
    }
}

fn with_model_options(mut cfg: RunConfig, args: &ModelArgs) -> RunConfig {
    cfg = cfg.set("model", &args.model);
    if let Some(t) = &args.theta0 {
        cfg = cfg.set("theta0", list(t));
    }
    if let Some(b) = args.spread {
        cfg = cfg.set("spread", b);
    }
    if let Some(r) = args.group_fraction {
        cfg = cfg.set("group_fraction", r);
    }
    cfg
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn parse_estimators(specs: &[String], default: impl FnOnce() -> Vec<AEstimator>) -> CliResult<Vec<AEstimator>> {
    if specs.is_empty() {
        return Ok(default());
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for s in specs {
        match AEstimator::parse(s) {
            Ok(e) => out.push(e),
            Err(e) => bad.push(e.to_string()),
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Failure::usage(bad.join("; ")))
    }
}

pub fn models() -> CliResult<()> {
    let mut out = String::new();
    for name in CATALOGUE_NAMES {
        let m = build_model(name, &ModelOptions::default())?;
        let estimands: Vec<String> = m.estimands().into_iter().map(|e| e.name).collect();
        let _ = writeln!(out, "{name}  (p = {}, q = {})", m.p(), m.q());
        let _ = writeln!(out, "    {}", m.description());
        let _ = writeln!(out, "    theta0 = {:?}, gamma0 = {:?}", m.theta0(), m.gamma0());
        let _ = writeln!(out, "    estimands: {}", estimands.join(", "));
    }
    print!("{out}");
    Ok(())
}

pub fn tolerance(args: &ToleranceArgs) -> CliResult<()> {
    let mut opts = options(&args.model);
    let total = match args.m {
        Some(m) => {
            if args.model.model != "two-sample" {
                return Err(Failure::usage("--m only applies to the two-sample model"));
            }
            if args.model.group_fraction.is_some() {
                return Err(Failure::usage("give either --m or --group-fraction, not both"));
            }
            if m == 0 || args.n == 0 {
                return Err(Failure::usage("group sizes must be positive"));
            }
            opts.first_group_fraction = Some(m as f64 / (m + args.n) as f64);
            m + args.n
        }
        None => args.n,
    };
    if total == 0 {
        return Err(Failure::usage("n must be at least 1"));
    }
    let mut cfg = with_model_options(RunConfig::new("tolerance"), &args.model).set("n", args.n);
    if let Some(m) = args.m {
        cfg = cfg.set("m", m).set("total", total);
    }
    if let Some(e) = &args.estimand {
        cfg = cfg.set("estimand", e);
    }
    if let Some(d) = &args.delta {
        cfg = cfg.set("delta", list(d));
    }
    cfg.echo();

    let model = build_model(&args.model.model, &opts)?;
    let estimand = args.estimand.as_deref().map(|e| model.estimand(e)).transpose()?;
    if let Some(d) = &args.delta {
        if d.len() != model.q() {
            return Err(Failure::usage(format!("--delta needs {} values, got {}", model.q(), d.len())));
        }
    }
    let design = model.default_design(total);
    let report = tolerance_report(model.as_ref(), &design)?;
    let mut rows = report.entries();
    let info = information_at_null(model.as_ref(), &design)?;
    let geom = estimand
        .as_ref()
        .map(|e| limit_geometry(&info, e, model.as_ref()))
        .transpose()?;
    if let Some(g) = &geom {
        for (i, b) in g.b.iter().enumerate() {
            let key = if g.b.len() == 1 { "b".to_string() } else { format!("b[{}]", i + 1) };
            rows.push((key, *b));
        }
        rows.push(("tau0_sq".into(), g.tau0_sq));
        rows.push(("tau_sq".into(), g.tau_sq()));
        rows.push(("band_bound".into(), g.bias_variance_scale()));
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "model {} (p = {}, q = {}), n = {}",
        report.model, report.p, report.q, report.n
    );
    for (k, v) in &rows {
        let _ = writeln!(out, "{k:<26} {v:.6}");
    }
    let gamma0 = model.gamma0();
    if report.q == 1 {
        let _ = writeln!(
            out,
            "narrow beats wide iff |gamma - {}| <= {:.6}  (|delta| <= kappa)",
            gamma0[0], report.radius[0]
        );
    } else {
        let _ = writeln!(
            out,
            "narrow beats wide for every estimand iff delta' (J^22)^-1 delta <= 1, delta = sqrt(n) (gamma - gamma0)"
        );
        if let (Some(g), Some(e)) = (&geom, &args.estimand) {
            let _ = writeln!(
                out,
                "narrow beats wide for {e} iff (b' delta)^2 <= {:.6}",
                g.bias_variance_scale()
            );
        }
    }
    if let Some(d) = &args.delta {
        let better = narrow_better(&info, d, geom.as_ref().map(|g| g.b.as_slice()))?;
        let _ = writeln!(
            out,
            "at delta = [{}]: narrow is {}",
            list(d),
            if better { "at least as good" } else { "worse" }
        );
    }
    print!("{out}");

    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::usage(e.to_string());
        w.write_record(["quantity", "value"]).map_err(io)?;
        for (k, v) in &rows {
            w.write_record([k.clone(), format!("{v:.16e}")]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
        write_file(path, &bytes)?;
    }
    Ok(())
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::usage(format!("grid '{spec}' is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (lo, hi, step) = (v[0], v[1], v[2]);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
        return Err(Failure::usage(format!("grid '{spec}' needs finite lo <= hi and step > 0")));
    }
    if (hi - lo) / step > 1e6 {
        return Err(Failure::usage(format!("grid '{spec}' has more than a million points")));
    }
    Ok(grid(lo, hi, step))
}

pub fn risk(args: &RiskArgs) -> CliResult<()> {
    let ests = parse_estimators(&args.estimators, risk_table_estimators)?;
    let loss = Loss::parse(&args.loss)?;
    let g = parse_grid(&args.grid)?;
    let mut cfg = RunConfig::new("risk")
        .set("estimators", list(&ests))
        .set("grid", &args.grid)
        .set("loss", loss);
    if let Some(p) = &args.out {
        cfg = cfg.set("out", p.display());
    }
    cfg.echo();
    let profiles = ests
        .iter()
        .map(|e| risk_profile(e, &g, loss).map_err(|err| Failure::from(err).context(e)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_profiles_csv(&profiles, &mut buf)?;
    match &args.out {
        Some(p) => write_file(p, &buf),
        None => Ok(io::stdout().write_all(&buf)?),
    }
}

pub fn l1(args: &L1Args) -> CliResult<()> {
    if let Some(r) = args.rho.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Failure::usage(format!("rho = {r} must be finite and non-negative")));
    }
    RunConfig::new("l1").set("rho", list(&args.rho)).echo();
    let mut out = format!("# L(0) = E|N| = {:.16e}\nrho,a0\n", l1_loss_fn(0.0));
    for r in &args.rho {
        let _ = writeln!(out, "{r},{:.16e}", l1_tolerance(*r));
    }
    print!("{out}");
    Ok(())
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let ncp = match (args.a, args.ncp) {
        (Some(a), _) => a * a,
        (_, Some(c)) => c,
        _ => unreachable!("clap requires one of --a and --ncp"),
    };
    if !(ncp >= 0.0 && ncp.is_finite()) {
        return Err(Failure::usage(format!("noncentrality {ncp} must be finite and non-negative")));
    }
    if args.q.contains(&0) {
        return Err(Failure::usage("q must be at least 1"));
    }
    if let Some(l) = args.level.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Failure::usage(format!("level {l} is not in (0, 1)")));
    }
    if let Some(n) = args.n {
        if n.is_nan() || n < 2.0 {
            return Err(Failure::usage(format!("n = {n}: the Schwarz column needs n >= 2")));
        }
    }
    let mut cfg = RunConfig::new("select").set("ncp", ncp).set("q", list(&args.q));
    if let Some(n) = args.n {
        cfg = cfg.set("n", n);
    }
    cfg.set("level", list(&args.level)).echo();

    let mut header = vec!["q".to_string(), "ncp".into(), "aic_narrow".into()];
    if args.n.is_some() {
        header.push("schwarz_narrow".into());
    }
    header.extend(args.level.iter().map(|l| format!("power@{l}")));
    let mut out = header.join(",") + "\n";
    for &q in &args.q {
        let mut row = vec![q.to_string(), format!("{ncp}"), format!("{:.6}", aic_narrow_prob(ncp, q)?)];
        if let Some(n) = args.n {
            row.push(format!("{:.6}", schwarz_narrow_prob(ncp, q, n)?));
        }
        for &l in &args.level {
            row.push(format!("{:.6}", detection_power_ncp(ncp, l, q)?));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> CliResult<()> {
    let ests = parse_estimators(&args.estimators, || {
        ["narrow", "wide", "eb"]
            .iter()
            .map(|s| AEstimator::parse(s).expect("built-in spec"))
            .collect()
    })?;
    let model: SharedModel = build_model(&args.model.model, &options(&args.model))?;
    let estimand = model.estimand(&args.estimand)?;
    let text = fs::read_to_string(&args.data)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.data.display())))?;
    let (ys, design) = parse_data(&text, model.as_ref()).map_err(|f| f.context(args.data.display()))?;
    with_model_options(RunConfig::new("estimate"), &args.model)
        .set("data", args.data.display())
        .set("n", ys.len())
        .set("estimand", &args.estimand)
        .set("estimators", list(&ests))
        .echo();

    let r = fit_and_compromise(model.as_ref(), &ys, &design, &estimand, &ests)?;
    let mut out = String::new();
    let _ = writeln!(out, "model {}, estimand {}, n = {}", model.name(), r.estimand, ys.len());
    let _ = writeln!(out, "narrow fit    theta = {:?} ({} iterations)", r.narrow.theta, r.narrow.iterations);
    let _ = writeln!(
        out,
        "wide fit      theta = {:?}, gamma = {:?} ({} iterations)",
        r.wide.theta, r.wide.gamma, r.wide.iterations
    );
    let _ = writeln!(out, "mu_narrow     {:.8}", r.mu_narrow);
    let _ = writeln!(out, "mu_wide       {:.8}", r.mu_wide);
    let _ = writeln!(out, "kappa_hat     {:.6}", r.kappa_hat);
    let _ = writeln!(out, "Z_n           {:.6}", r.zn);
    let _ = writeln!(
        out,
        "verdict       {}",
        if r.narrow_within_tolerance {
            "|Z_n| <= 1: estimated departure is inside the tolerance radius"
        } else {
            "|Z_n| > 1: estimated departure is outside the tolerance radius"
        }
    );
    let _ = writeln!(out, "{:<28} {:>12} {:>16}", "estimator", "c(Z_n)", "mu*");
    for (name, c, mu) in &r.compromises {
        let _ = writeln!(out, "{name:<28} {c:>12.6} {mu:>16.8}");
    }
    print!("{out}");

    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::usage(e.to_string());
        w.write_record(["estimator", "weight", "estimate"]).map_err(io)?;
        for (name, c, mu) in &r.compromises {
            w.write_record([name.clone(), format!("{c:.16e}"), format!("{mu:.16e}")])
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
        write_file(path, &bytes)?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.config.display())))?;
    let file = parse_study(&text, args.seed).map_err(|f| f.context(args.config.display()))?;
    let dir = args
        .out
        .clone()
        .or(file.output_dir.clone())
        .unwrap_or_else(|| "misspec-out".into());
    let manifest = format!(
        "study = {}\n{}output = {}\n",
        file.kind,
        file.study.manifest(),
        dir.display()
    );
    for line in manifest.lines() {
        eprintln!("# {line}");
    }
    fs::create_dir_all(&dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;

    let mut buf = Vec::new();
    match file.kind {
        StudyKind::Mse => finite_sample_mse(&file.study)?.write_csv(&mut buf)?,
        StudyKind::Kappa => KappaEstimate::write_csv(&kappa_by_simulation(&file.study)?, &mut buf)?,
        StudyKind::Coverage => CoverageRow::write_csv(&coverage_study(&file.study)?, &mut buf)?,
    }
    let csv_path = dir.join(format!("{}.csv", file.kind));
    write_file(&csv_path, &buf)?;
    write_file(&dir.join("manifest.txt"), manifest.as_bytes())?;
    println!("wrote {} and {}", csv_path.display(), dir.join("manifest.txt").display());
    Ok(())
}
