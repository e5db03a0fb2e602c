//! `bvloc`: reproducible runs of the impulsive-control example with CSV artifacts.

mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use bvloc_core::approx::{
    build_approx_sequence, check_cbvl, mollify_clock, wellposedness_report, write_convergence_csv, ApproxOptions,
    CbvlTerm,
};
use bvloc_core::completion::{build_completion, verify_feasibility, CompletionResult};
use bvloc_core::ode::{arc_length_grid, caratheodory, gc_solution, integrate_spacetime, refine, TerminalRule, MAX_CELLS};
use bvloc_core::scenarios::{
    clipped_spiral, ex1f1_stc, example_dynamics, example_ii_control, extended_payoff, one_jump_control, payoff_run, spiral_clip_time,
    spiral_control,
};
use bvloc_core::verify::{verify, VerifyOptions};
use bvloc_core::{ApproxSequence, ControlPath, ControlSet, Error, OrdinaryControl, Result, SpaceTimeControl};

use config::{RunConfig, TEMPLATE};

#[derive(Debug, Parser)]
#[command(name = "bvloc", version, about = "Graph-completion runs for impulsive control systems")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// artifact directory, overrides `out_dir`
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// print the documented default configuration and exit
    #[arg(long)]
    emit_template: bool,
    /// seed of the randomized property samples in `verify`
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Trajectory CSVs of the scenario
    Simulate,
    /// Completion CSV, segment ledger and feasibility report
    Complete,
    /// Convergence table, smoothed clocks and terminal certificate
    Approximate,
    /// Full invariant suite with one PASS/FAIL line per criterion
    Verify,
    /// Payoff table
    Payoff,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    message: String,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// artifacts written, but a check failed
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.emit_template {
        print!("{TEMPLATE}");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        report_error(&Error::Config("no command given (try --help)".into()));
        return ExitCode::from(2);
    };
    match run(&cli, command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            report_error(&e);
            ExitCode::from(2)
        }
    }
}

fn report_error(e: &Error) {
    let rec = ErrorRecord {
        kind: e.kind(),
        message: e.to_string(),
    };
    eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
}

fn run(cli: &Cli, command: Command) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut out = Artifacts::new(&cfg.out_dir);
    let outcome = match command {
        Command::Simulate => simulate(&cfg, &mut out)?,
        Command::Complete => complete(&cfg, &mut out)?,
        Command::Approximate => approximate(&cfg, &mut out)?,
        Command::Verify => run_verify(cli.seed, &mut out)?,
        Command::Payoff => payoff(&cfg, &mut out)?,
    };
    for f in &out.written {
        println!("{}", f.display());
    }
    Ok(outcome)
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        f(BufWriter::new(File::create(&path)?))?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }
}

fn x0() -> Vec<f64> {
    vec![1.0, 0.0, 1.0]
}

/// Control paths of the scenario, labelled for file names.
fn controls(cfg: &RunConfig) -> Result<Vec<(String, ControlPath)>> {
    let t = cfg.horizon;
    Ok(match cfg.scenario.as_str() {
        "spiral" => vec![("spiral".into(), spiral_control(t)?)],
        "one_jump" => vec![("one_jump".into(), one_jump_control(t)?)],
        "example_ii" => cfg
            .example_ii_k
            .iter()
            .map(|&k| Ok((format!("example_ii_k{k}"), example_ii_control(t, k)?)))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    })
}

fn ex1f1(cfg: &RunConfig) -> Result<SpaceTimeControl> {
    ex1f1_stc(cfg.horizon, cfg.s_max - cfg.horizon, cfg.grid.ds)
}

fn completion(cfg: &RunConfig, u: &ControlPath) -> Result<CompletionResult> {
    let v = OrdinaryControl::none(cfg.horizon);
    build_completion(u, &v, &cfg.partition, &cfg.completion_options())
}

fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let dyn_ = example_dynamics();
    if cfg.scenario == "ex1f1" {
        let xi = integrate_spacetime(&dyn_, &x0(), &ex1f1(cfg)?)?;
        out.csv("ex1f1_xi.csv", |w| xi.write_csv(w))?;
        return Ok(Outcome::Ok);
    }
    let v = OrdinaryControl::none(cfg.horizon);
    for (label, u) in controls(cfg)? {
        let c = completion(cfg, &u)?;
        let xi = integrate_spacetime(&dyn_, &x0(), &c.stc)?;
        let grid = cfg.output_grid(c.clock.t_end());
        let x = gc_solution(&xi, &c.clock, &grid, &TerminalRule::for_completion(&c))?;
        out.csv(&format!("{label}_xi.csv"), |w| xi.write_csv(w))?;
        out.csv(&format!("{label}_x.csv"), |w| x.trajectory.write_csv(w))?;
        let before_t = &grid[..grid.len() - 1];
        out.csv(&format!("{label}_control.csv"), |w| u.write_csv(before_t, w))?;
        if !u.has_jumps() && u.total_variation(0.0, cfg.horizon)?.is_finite() {
            // Carathéodory cross-check on the arc-length grid, refined to the RK tolerance
            let (x, _) = refine(
                |cells| caratheodory(&dyn_, &x0(), &u, &v, &arc_length_grid(&u, 0.0, cfg.horizon, cells)?),
                cfg.grid.cells,
                cfg.tolerances.rk,
                MAX_CELLS,
            )?;
            out.csv(&format!("{label}_caratheodory.csv"), |w| x.write_csv(w))?;
        }
    }
    Ok(Outcome::Ok)
}

fn feasibility_text(cfg: &RunConfig, stc: &SpaceTimeControl) -> (String, bool) {
    let rep = verify_feasibility(stc, cfg.tolerances.unit_speed);
    let ids_ok = rep.ids_residual <= cfg.tolerances.ids;
    let mut text = rep.render();
    let _ = writeln!(text, "ids_tolerance: {:e}\nids: {}", cfg.tolerances.ids, if ids_ok { "PASS" } else { "FAIL" });
    (text, rep.passed && ids_ok)
}

fn complete(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let mut failed = Vec::new();
    if cfg.scenario == "ex1f1" {
        let stc = ex1f1(cfg)?;
        out.csv("ex1f1_completion.csv", |w| stc.write_csv(w))?;
        let (text, ok) = feasibility_text(cfg, &stc);
        out.text("ex1f1_feasibility.txt", &text)?;
        if !ok {
            failed.push("ex1f1".to_string());
        }
    }
    for (label, u) in controls(cfg)? {
        let c = completion(cfg, &u)?;
        out.csv(&format!("{label}_completion.csv"), |w| c.stc.write_csv(w))?;
        out.text(&format!("{label}_ledger.txt"), &c.ledger_text())?;
        let (text, ok) = feasibility_text(cfg, &c.stc);
        out.text(&format!("{label}_feasibility.txt"), &text)?;
        if !ok {
            failed.push(label);
        }
    }
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Err(Error::Diagnostic(format!("feasibility tolerances violated: {}", failed.join(", "))))
    }
}

/// Terms `(t_j + Var_[0,t_j](u), j, e^{-t_j/(T(T-t_j))})` at the spiral clip
/// times, for powers of two `j` below the largest certificate index.
fn spiral_terms(cfg: &RunConfig, u: &ControlPath) -> Result<Vec<CbvlTerm>> {
    let t = cfg.horizon;
    let top = *cfg.certificate_indices.last().unwrap();
    let mut terms = Vec::new();
    let mut j = 1;
    while j < top {
        let tj = spiral_clip_time(t, j);
        terms.push(CbvlTerm {
            s_tilde: tj + u.total_variation(0.0, tj)?,
            k_j: j,
            bound: (-tj / (t * (t - tj))).exp(),
        });
        j *= 2;
    }
    Ok(terms)
}

fn approximate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    if !matches!(cfg.scenario.as_str(), "spiral" | "one_jump") {
        return Err(Error::Config(format!(
            "approximate needs a control with a completion clock (spiral or one_jump), got '{}'",
            cfg.scenario
        )));
    }
    let dyn_ = example_dynamics();
    let v = OrdinaryControl::none(cfg.horizon);
    let (label, u) = controls(cfg)?.remove(0);
    let c = completion(cfg, &u)?;
    let grid = cfg.output_grid(c.clock.t_end());
    let xi = integrate_spacetime(&dyn_, &x0(), &c.stc)?;
    let x = gc_solution(&xi, &c.clock, &grid, &TerminalRule::for_completion(&c))?;
    let opts = ApproxOptions {
        cells: cfg.grid.cells,
        ..Default::default()
    };
    let seq = build_approx_sequence(&c, &ControlSet::unit_disc(), &dyn_, &x0(), &v, &cfg.indices, &opts)?;
    let rows = wellposedness_report(&x.trajectory, &seq)?;
    out.csv(&format!("{label}_convergence.csv"), |w| write_convergence_csv(&rows, w))?;

    for &h in &cfg.mollifier_scales {
        let s = mollify_clock(&c.clock, h, &opts.smoothing)?;
        out.csv(&format!("{label}_clock_h{h}.csv"), |w| {
            let mut w = csv::Writer::from_writer(w);
            w.write_record(["t", "sigma", "sigma_h"])?;
            for &t in &grid[..grid.len() - 1] {
                w.write_record([t.to_string(), c.clock.eval(t)?.to_string(), s.eval(t).to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "members: {}", seq.members.len());
    let _ = writeln!(summary, "equibounded: {}", seq.equibounded());
    let envelope = seq.envelope_holds()?;
    let _ = writeln!(summary, "envelope: {envelope}");
    for m in &seq.members {
        if let Some(sc) = &m.scale {
            let _ = writeln!(summary, "k={} h={} certified={}", m.k, sc.h, sc.certified);
        }
    }
    let mut pass = seq.equibounded() && envelope;
    if cfg.scenario == "spiral" {
        let clipped = cfg
            .certificate_indices
            .iter()
            .map(|&k| Ok((k, clipped_spiral(cfg.horizon, k)?)))
            .collect::<Result<Vec<_>>>()?;
        let seq = ApproxSequence::from_controls(&dyn_, &x0(), &v, clipped, cfg.grid.cells)?;
        let rows = wellposedness_report(&x.trajectory, &seq)?;
        out.csv(&format!("{label}_clipped_convergence.csv"), |w| write_convergence_csv(&rows, w))?;
        let cert = check_cbvl(&seq, &spiral_terms(cfg, &u)?, cfg.tolerances.certification)?;
        out.text(&format!("{label}_certificate.txt"), &cert.render())?;
        pass &= cert.pass();
    }
    let _ = writeln!(summary, "status: {}", if pass { "PASS" } else { "FAIL" });
    out.text(&format!("{label}_approximation.txt"), &summary)?;
    Ok(if pass { Outcome::Ok } else { Outcome::Failed })
}

fn run_verify(seed: Option<u64>, out: &mut Artifacts) -> Result<Outcome> {
    let mut opts = VerifyOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = verify(&opts);
    let text = report.render();
    print!("{text}");
    out.text("verify_report.txt", &text)?;
    Ok(if report.all_passed() { Outcome::Ok } else { Outcome::Failed })
}

fn payoff(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let dyn_ = example_dynamics();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut pass = true;
    if cfg.scenario == "ex1f1" {
        let stc = ex1f1(cfg)?;
        let xi = integrate_spacetime(&dyn_, &x0(), &stc)?;
        let top = cfg.s_max - cfg.horizon;
        let mut prev = f64::NEG_INFINITY;
        for cut in [5.0, 10.0, 20.0].into_iter().filter(|&c| c <= top) {
            let j = extended_payoff(&stc, &xi, cfg.horizon + cut)?;
            pass &= j > prev;
            prev = j;
            rows.push(vec![(cfg.horizon + cut).to_string(), j.to_string()]);
        }
        out.csv("ex1f1_payoff.csv", |w| table(w, &["s_cut", "extended_payoff"], &rows))?;
        return Ok(if pass { Outcome::Ok } else { Outcome::Failed });
    }
    for (i, (label, u)) in controls(cfg)?.into_iter().enumerate() {
        if u.has_jumps() {
            // jumps are priced through the completion
            let c = completion(cfg, &u)?;
            let xi = integrate_spacetime(&dyn_, &x0(), &c.stc)?;
            let j = extended_payoff(&c.stc, &xi, c.s_end())?;
            rows.push(vec![label, j.to_string(), String::new(), "false".into()]);
            continue;
        }
        let r = payoff_run(&dyn_, &x0(), &u, cfg.grid.ds, 1.0 / 400.0, 1e6)?;
        let mut row = vec![label.clone(), r.payoff.to_string(), r.cost_state.to_string(), r.divergent.to_string()];
        if cfg.scenario == "example_ii" {
            let hi = 1.0 + 3.0 / cfg.example_ii_k[i] as f64;
            let ok = r.payoff >= 1.0 - 1e-4 && r.payoff <= hi + 1e-4;
            pass &= ok;
            row.push(hi.to_string());
            row.push(ok.to_string());
        }
        rows.push(row);
    }
    let mut header = vec!["control", "J", "x4_T", "divergent"];
    if cfg.scenario == "example_ii" {
        header.extend(["upper_bound", "in_bracket"]);
    }
    out.csv(&format!("{}_payoff.csv", cfg.scenario), |w| table(w, &header, &rows))?;
    Ok(if pass { Outcome::Ok } else { Outcome::Failed })
}

fn table<W: std::io::Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
