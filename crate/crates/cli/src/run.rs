use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use galerkin_gcn::cases::{self, Case, CaseInfo, CaseRun, ModeKind, CASES, DEFAULT_LAMBDA, ORDERINGS};
use galerkin_gcn::checkpoint::{load_checkpoint, save_checkpoint};
use galerkin_gcn::oracle::{self, NewtonOptions};
use galerkin_gcn::problem::ProblemSpec;
use galerkin_gcn::report::{loss_csv, write_fields, RunSummary, REPORT_VERSION};
use galerkin_gcn::training::{relative_error, TrainConfig, TrainReport, Trainer};
use galerkin_gcn::{Error, Result};
use serde::Serialize;

use crate::config::{RunConfig, TrainOverrides};
use crate::{Failure, RunArgs, VerifyArgs};

/// Iteration budget of custom problems when the config gives none.
const CUSTOM_ITERATIONS: usize = 3000;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Forward,
    Inverse,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Train(ModeKind),
    Oracle,
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::Train(m) => m.label(),
            Mode::Oracle => "oracle",
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    if s == "oracle" {
        return Ok(Mode::Oracle);
    }
    ModeKind::parse(s).map(Mode::Train).ok_or_else(|| {
        Error::Config(format!(
            "unknown mode `{s}`; expected forward, inverse-soft, inverse-hard, soft, hard or oracle"
        ))
    })
}

/// Config file (or an empty one) with the command-line flags folded in, so
/// the snapshot written next to the results reproduces the run.
fn setup(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base) = match &args.config {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(path)?, base)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    if cfg.version == 0 {
        cfg.version = crate::config::CONFIG_VERSION;
    }
    if let Some(c) = &args.case {
        if cfg.problem.is_some() {
            return Err(Error::Config("--case conflicts with the [problem] table of the config".into()));
        }
        cfg.case = Some(c.clone());
    }
    if let Some(m) = &args.mode {
        cfg.mode = Some(m.clone());
    }
    if let Some(l) = args.lambda {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::Config(format!("lambda = {l} must be finite and non-negative")));
        }
        cfg.lambda = Some(l);
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if args.iters.is_some() {
        cfg.train.iterations = args.iters;
    }
    if args.seed.is_some() {
        cfg.train.seed = args.seed;
    }
    if args.lr.is_some() {
        cfg.train.learning_rate = args.lr;
    }
    if let Some(case) = &cfg.case {
        cfg.case = Some(resolve_case(case)?.name.to_string());
    }
    Ok((cfg, base))
}

/// Exact name, or the single case the text is a prefix of.
pub fn resolve_case(name: &str) -> Result<&'static CaseInfo> {
    if let Ok(info) = cases::info(name) {
        return Ok(info);
    }
    let hits: Vec<&'static CaseInfo> = CASES.iter().filter(|c| c.name.starts_with(name)).collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => cases::info(name),
        many => {
            let names: Vec<&str> = many.iter().map(|c| c.name).collect();
            Err(Error::Config(format!("case `{name}` is ambiguous: {}", names.join(", "))))
        }
    }
}

enum Target {
    Registered(Box<Case>),
    Custom(ProblemSpec),
}

impl Target {
    fn load(cfg: &RunConfig, base: &Path) -> Result<Target> {
        match (&cfg.case, &cfg.problem) {
            (Some(name), _) => Ok(Target::Registered(Box::new(Case::build(name)?))),
            (None, Some(p)) => Ok(Target::Custom(p.build(base)?)),
            (None, None) => Err(Error::Config(
                "no problem given; pass --case NAME or a config with `case` or a [problem] table".into(),
            )),
        }
    }

    fn name(&self) -> &str {
        match self {
            Target::Registered(c) => c.info.name,
            Target::Custom(_) => "custom",
        }
    }

    fn spec(&self) -> &ProblemSpec {
        match self {
            Target::Registered(c) => &c.spec,
            Target::Custom(s) => s,
        }
    }
}

fn out_dir(cfg: &RunConfig, name: &str, mode: Mode) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{name}-{}", mode.label())))
}

fn snapshot(cfg: &RunConfig, tc: &TrainConfig, mode: Mode) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.mode = Some(mode.label().to_string());
    cfg.train = TrainOverrides {
        iterations: Some(tc.iterations),
        learning_rate: Some(tc.learning_rate),
        unknowns_learning_rate: Some(tc.unknowns_learning_rate),
        seed: Some(tc.seed),
        tolerance: tc.tolerance,
        decay_at: Some(tc.decay_at.clone()),
        decay_factor: Some(tc.decay_factor),
        cheb_order: Some(tc.cheb_order),
        hidden: Some(tc.hidden.clone()),
    };
    cfg
}

fn progress(quiet: bool, total: usize) -> impl FnMut(usize, f64) {
    let every = (total / 20).max(1);
    move |it, loss| {
        if !quiet && (it % every == 0 || it == total) {
            eprintln!("iteration {it:>6}  loss {loss:.4e}");
        }
    }
}

pub fn list(filter: Option<&str>) {
    println!("{:<24} {:<26} {:>6}  targets (reported / accepted)", "case", "modes", "iters");
    for info in CASES.iter().filter(|c| filter.is_none_or(|f| c.name.contains(f))) {
        let modes: Vec<&str> = info.modes.iter().map(|m| m.label()).collect();
        let targets: Vec<String> = info
            .targets
            .iter()
            .map(|t| {
                let reported = t.reported.map_or("-".to_string(), |r| format!("{r:.1e}"));
                let accept = if t.accept.is_finite() {
                    format!("{:.1e}", t.accept)
                } else {
                    "any".to_string()
                };
                format!("{} {} {reported}/{accept}", short(t.mode), t.metric)
            })
            .collect();
        println!("{:<24} {:<26} {:>6}  {}", info.name, modes.join(","), info.iterations, targets.join("; "));
        println!("    {}", info.description);
    }
}

fn short(mode: ModeKind) -> &'static str {
    match mode {
        ModeKind::Forward => "fwd",
        ModeKind::InverseSoft => "soft",
        ModeKind::InverseHard => "hard",
    }
}

fn resolve_mode(cfg: &RunConfig, family: Family) -> Result<Mode> {
    let mode = match cfg.mode.as_deref() {
        Some(m) => parse_mode(m)?,
        None => match family {
            Family::Forward => Mode::Train(ModeKind::Forward),
            Family::Inverse => Mode::Train(ModeKind::InverseHard),
        },
    };
    match (family, mode) {
        (_, Mode::Oracle) | (Family::Forward, Mode::Train(ModeKind::Forward)) => Ok(mode),
        (Family::Inverse, Mode::Train(m)) if m != ModeKind::Forward => Ok(mode),
        (Family::Forward, _) => Err(Error::Config(format!(
            "mode `{}` is an inverse mode; use the `inverse` command",
            mode.label()
        ))),
        (Family::Inverse, _) => Err(Error::Config("the `inverse` command takes --mode hard or soft".into())),
    }
}

pub fn train(args: &RunArgs, family: Family) -> std::result::Result<(), Failure> {
    let (cfg, base) = setup(args)?;
    let mode = match resolve_mode(&cfg, family)? {
        Mode::Oracle => return run_oracle(cfg, &base),
        Mode::Train(m) => m,
    };
    let lambda = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
    let target = Target::load(&cfg, &base)?;
    let mut tc = match &target {
        Target::Registered(case) => case.config(),
        Target::Custom(_) => TrainConfig::new(CUSTOM_ITERATIONS),
    };
    cfg.train.apply(&mut tc);
    let mut trainer = match &target {
        Target::Registered(case) => case.trainer(mode, lambda, tc.clone())?,
        Target::Custom(spec) => Trainer::new(spec, mode.assimilation(lambda), tc.clone())?,
    };
    if let Some(path) = &args.resume {
        load_checkpoint(trainer.params_mut(), path)?;
    }
    let report = trainer.train_with(progress(args.quiet, tc.iterations))?;
    let (summary, report) = match &target {
        Target::Registered(case) => {
            let run = case.score(mode, report)?;
            (run.summary(case, tc.seed), run.report)
        }
        Target::Custom(spec) => (custom_summary(spec, mode, tc.seed, &report)?, report),
    };
    let dir = out_dir(&cfg, target.name(), Mode::Train(mode));
    write_training(&dir, &snapshot(&cfg, &tc, Mode::Train(mode)), &target, &trainer, &summary, &report)?;
    print_summary(&summary);
    println!("results in {}", dir.display());
    Ok(())
}

/// Field errors against an oracle solve when the problem is fully known.
fn custom_summary(spec: &ProblemSpec, mode: ModeKind, seed: u64, report: &TrainReport) -> Result<RunSummary> {
    let mut metrics = Vec::new();
    if !spec.has_unknowns() {
        let asm = spec.assembler()?;
        let reference = oracle::solve(&asm, &spec.param_values(), NewtonOptions::default())?.state;
        metrics = group_errors(spec, &asm, &report.state, &reference)?;
    }
    Ok(RunSummary {
        version: REPORT_VERSION,
        case: "custom".into(),
        mode: mode.label().into(),
        seed,
        iterations: report.iterations,
        best_iteration: report.best_iteration,
        best_loss: report.best_loss,
        wall_time_s: report.wall_time_s,
        param_names: spec.model.param_names().iter().map(|s| s.to_string()).collect(),
        params: report.params.clone(),
        metrics,
        checks: Vec::new(),
        identifiability_warning: report.identifiability_warning.clone(),
    })
}

fn group_errors(
    spec: &ProblemSpec,
    asm: &galerkin_gcn::residual::Assembler,
    state: &[f64],
    reference: &[f64],
) -> Result<Vec<(String, f64)>> {
    let groups = spec.model.field_groups(spec.dim());
    let mut out = Vec::new();
    for g in &groups {
        let (mut pred, mut refv) = (Vec::new(), Vec::new());
        for &c in &g.components {
            let r = asm.component_range(c);
            pred.extend_from_slice(&state[r.clone()]);
            refv.extend_from_slice(&reference[r]);
        }
        let name = if groups.len() == 1 {
            "e".to_string()
        } else {
            format!("e_{}", g.name)
        };
        out.push((name, relative_error(&pred, &refv)?));
    }
    Ok(out)
}

fn write_training(
    dir: &Path,
    cfg: &RunConfig,
    target: &Target,
    trainer: &Trainer,
    summary: &RunSummary,
    report: &TrainReport,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(summary)?)?;
    let spec = target.spec();
    std::fs::write(dir.join("loss.csv"), loss_csv(report, spec.model))?;
    write_fields(dir, "field_", &spec.mesh, trainer.assembler(), &report.state)?;
    if let Target::Registered(case) = target {
        let asm = case.truth.assembler()?;
        write_fields(dir, "reference_", &case.truth.mesh, &asm, &case.reference)?;
    }
    save_checkpoint(trainer.params(), &dir.join("params.ckpt"))?;
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!(
        "{} {}: best loss {:.4e} at iteration {} of {} ({:.1} s)",
        s.case, s.mode, s.best_loss, s.best_iteration, s.iterations, s.wall_time_s
    );
    let params: Vec<String> = s
        .param_names
        .iter()
        .zip(&s.params)
        .map(|(n, v)| format!("{n} = {v:.6}"))
        .collect();
    println!("  parameters: {}", params.join(", "));
    for (name, value) in &s.metrics {
        println!("  {name:<14} {value:.4e}");
    }
    for (metric, value, accept, passed) in &s.checks {
        println!(
            "  {} {metric} = {value:.4e} (accepted up to {accept:.2e})",
            if *passed { "PASS" } else { "FAIL" }
        );
    }
    if let Some(w) = &s.identifiability_warning {
        println!("  warning: {w}");
    }
}

#[derive(Serialize)]
struct OracleReport {
    version: u32,
    case: String,
    newton_iterations: usize,
    residual_history: Vec<f64>,
    /// Oracle solution against the case reference (zero unless the
    /// reference is analytic).
    metrics: Vec<(String, f64)>,
    wall_time_s: f64,
}

pub fn oracle(args: &RunArgs) -> std::result::Result<(), Failure> {
    let (cfg, base) = setup(args)?;
    if let Some(m) = &cfg.mode {
        if parse_mode(m)? != Mode::Oracle && args.mode.is_some() {
            return Err(Error::Config(format!("the `oracle` command does not take --mode {m}")).into());
        }
    }
    run_oracle(cfg, &base)
}

fn run_oracle(mut cfg: RunConfig, base: &Path) -> std::result::Result<(), Failure> {
    cfg.mode = Some("oracle".into());
    let target = Target::load(&cfg, base)?;
    let (spec, reference) = match &target {
        Target::Registered(case) => (&case.truth, Some(&case.reference)),
        Target::Custom(spec) => {
            if spec.has_unknowns() {
                return Err(Error::Config("the oracle needs a problem without trainable parameters".into()).into());
            }
            (spec, None)
        }
    };
    let start = Instant::now();
    let asm = spec.assembler()?;
    let sol = oracle::solve(&asm, &spec.param_values(), NewtonOptions::default())?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let metrics = match reference {
        Some(r) => group_errors(spec, &asm, &sol.state, r)?,
        None => Vec::new(),
    };
    let report = OracleReport {
        version: REPORT_VERSION,
        case: target.name().to_string(),
        newton_iterations: sol.iterations(),
        residual_history: sol.history.clone(),
        metrics,
        wall_time_s,
    };
    let dir = out_dir(&cfg, target.name(), Mode::Oracle);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    cfg.train = TrainOverrides::default();
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(Error::from)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report).map_err(Error::from)?)
        .map_err(Error::from)?;
    write_fields(&dir, "reference_", &spec.mesh, &asm, &sol.state)?;
    println!(
        "{} oracle: {} Newton iterations, final residual {:.3e} ({:.2} s)",
        report.case,
        report.newton_iterations,
        sol.history.last().copied().unwrap_or(f64::NAN),
        wall_time_s
    );
    for (name, value) in &report.metrics {
        println!("  {name:<14} {value:.4e}");
    }
    println!("results in {}", dir.display());
    Ok(())
}

struct Job {
    info: &'static CaseInfo,
    mode: ModeKind,
}

pub fn verify(args: &VerifyArgs) -> std::result::Result<(), Failure> {
    let (cfg, _) = setup(&args.run)?;
    if cfg.problem.is_some() {
        return Err(Error::Config("verify runs registered cases only".into()).into());
    }
    let only = match cfg.mode.as_deref() {
        Some(m) => match parse_mode(m)? {
            Mode::Train(k) => Some(k),
            Mode::Oracle => return Err(Error::Config("verify trains; mode `oracle` is not checked".into()).into()),
        },
        None => None,
    };
    let mut infos: Vec<&'static CaseInfo> = Vec::new();
    if args.all {
        infos.extend(CASES.iter());
    }
    for name in args.cases.iter().chain(cfg.case.iter()) {
        let info = resolve_case(name)?;
        if !infos.iter().any(|i| i.name == info.name) {
            infos.push(info);
        }
    }
    if infos.is_empty() {
        return Err(Error::Config("name the cases to verify or pass --all".into()).into());
    }
    let jobs: Vec<Job> = infos
        .iter()
        .flat_map(|&info| {
            info.modes
                .iter()
                .filter(move |m| only.is_none_or(|o| o == **m))
                .map(move |&mode| Job { info, mode })
        })
        .collect();
    if jobs.is_empty() {
        return Err(Error::Config("no selected case runs in the requested mode".into()).into());
    }

    let results: Vec<Mutex<Option<Result<CaseRun>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = args.jobs.clamp(1, jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let outcome = verify_one(job, &cfg, args.run.quiet);
                *results[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });

    let mut failed = false;
    let mut first_error = None;
    let mut done: Vec<(&Job, CaseRun)> = Vec::new();
    for (job, slot) in jobs.iter().zip(results) {
        match slot.into_inner().expect("result slot").expect("every job ran") {
            Ok(run) => {
                for c in &run.checks {
                    println!(
                        "{} {} {} {} = {:.4e} (accepted up to {:.2e})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.case,
                        c.mode.label(),
                        c.metric,
                        c.value,
                        c.accept
                    );
                }
                failed |= !run.passed();
                done.push((job, run));
            }
            Err(e) => {
                println!("ERROR {} {}: {e}", job.info.name, job.mode.label());
                first_error.get_or_insert(e);
            }
        }
    }
    for &(case, metric, better, worse) in ORDERINGS {
        let value = |mode: ModeKind| {
            done.iter()
                .find(|(j, _)| j.info.name == case && j.mode == mode)
                .and_then(|(_, r)| r.metrics.iter().find(|m| m.name == metric))
                .map(|m| m.value)
        };
        if let (Some(a), Some(b)) = (value(better), value(worse)) {
            let ok = a < b;
            failed |= !ok;
            println!(
                "{} {case} {metric}: {} {a:.4e} < {} {b:.4e}",
                if ok { "PASS" } else { "FAIL" },
                better.label(),
                worse.label()
            );
        }
    }
    if let Some(e) = first_error {
        return Err(e.into());
    }
    if failed {
        return Err(Failure::Acceptance);
    }
    Ok(())
}

fn verify_one(job: &Job, cfg: &RunConfig, quiet: bool) -> Result<CaseRun> {
    let case = Case::build(job.info.name)?;
    let mut tc = case.config();
    cfg.train.apply(&mut tc);
    let lambda = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
    let mut trainer = case.trainer(job.mode, lambda, tc.clone())?;
    let report = trainer.train()?;
    let run = case.score(job.mode, report)?;
    if !quiet {
        eprintln!(
            "{} {}: {} iterations in {:.1} s",
            job.info.name,
            job.mode.label(),
            run.report.iterations,
            run.report.wall_time_s
        );
    }
    if let Some(root) = &cfg.out {
        let dir = root.join(format!("{}-{}", job.info.name, job.mode.label()));
        let summary = run.summary(&case, tc.seed);
        let target = Target::Registered(Box::new(case));
        write_training(&dir, &snapshot(cfg, &tc, Mode::Train(job.mode)), &target, &trainer, &summary, &run.report)?;
    }
    Ok(run)
}
