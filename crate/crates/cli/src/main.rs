//! `chainrand` command-line tool.
//!
//! Exit codes: 0 success, 2 a check failed or nothing was certified,
//! 3 solver failure, 4 bad input.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use chainrand::bellcat::{
    build_c3, build_c3_double_prime, build_c3_prime, builtin, load_functional_file, BellFunctional,
    C3_DOUBLE_PRIME_PENALTY_CELLS, C3_PRIME_PENALTY_CELLS, C3_QUANTUM_BOUND,
};
use chainrand::npa::{
    build_bound_problem, build_moment_problem, linear_grid, quantum_bound, randomness_curve,
    solvable_violation, solver_by_name, write_sdpa, CurveOptions, CurveRow, Level, PairPolicy,
    ViolationMode, CSV_HEADER,
};
use chainrand::qcore::{
    behavior_from_realization, Behavior, HermitianOperator, Measurement, Party, PauliCoefficients,
    ProbabilityCell,
};
use chainrand::randomness::{certify_global, certify_local, CertifiedRandomness};
use chainrand::selftest::{
    certify_povm, reference_realization_c3, reference_realization_global,
    reference_realization_local,
};
use chainrand::{Error, Execution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "chainrand",
    version,
    about = "Randomness certification with chained Bell inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the maximal-violation realization and both three-outcome POVMs.
    Verify(VerifyArgs),
    /// Certify local or global randomness of a behavior.
    Certify(CertifyArgs),
    /// Guessing probability and min-entropy along a line of violations.
    Sweep(SweepArgs),
    /// Maximum over deterministic strategies.
    ClassicalBound(BoundArgs),
    /// Maximum over the second-level moment relaxation.
    QuantumBound(QuantumArgs),
}

#[derive(Args)]
struct Penalties {
    /// Weight of Alice's POVM penalty terms.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight of Bob's POVM penalty terms.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct InequalityArgs {
    /// Built-in name (c3, c3', c3'', chsh) or path to an inequality file.
    #[arg(long, default_value = "c3")]
    inequality: String,
    #[command(flatten)]
    penalties: Penalties,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    penalties: Penalties,
    /// POVM file replacing one party's fourth input.
    #[arg(long)]
    povm: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Local,
    Global,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(value_enum)]
    mode: Mode,
    /// Behavior file; the built-in reference behavior otherwise.
    #[arg(long)]
    behavior: Option<PathBuf>,
    #[command(flatten)]
    penalties: Penalties,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    inequality: InequalityArgs,
    /// start:stop:steps
    #[arg(long, default_value = "0.70:1.00:16")]
    grid: String,
    /// One-based input pair `i,j`, or `best`.
    #[arg(long, default_value = "best")]
    pair: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "ipm")]
    solver: String,
    /// Write the SDP of the last grid point in SDPA sparse format.
    #[arg(long)]
    export_sdpa: Option<PathBuf>,
    /// Solve grid points one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    inequality: InequalityArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct QuantumArgs {
    #[command(flatten)]
    inequality: InequalityArgs,
    #[arg(long, default_value = "ipm")]
    solver: String,
    #[arg(long)]
    export_sdpa: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

enum Failure {
    Check(String),
    Solver(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(m) => Failure::Solver(m),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn input<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Input(msg.into()))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Outcome {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve(args: &InequalityArgs) -> Result<BellFunctional, Failure> {
    let Penalties { alpha, beta } = args.penalties;
    if let Some(f) = builtin(&args.inequality, alpha, beta)? {
        return Ok(f);
    }
    let path = PathBuf::from(&args.inequality);
    if !path.exists() {
        return input(format!(
            "`{}` is neither a built-in inequality nor a file",
            args.inequality
        ));
    }
    Ok(load_functional_file(&path)?)
}

fn check_tol(tol: f64) -> Outcome {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        input(format!("--tol must be positive, got {tol}"))
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, steps] = parts[..] else {
        return input(format!("--grid expects start:stop:steps, got `{spec}`"));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::Input(format!("bad grid value `{s}`")))
    };
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| Failure::Input(format!("bad step count `{steps}`")))?;
    Ok(linear_grid(num(start)?, num(stop)?, steps)?)
}

fn parse_pair(spec: &str, f: &BellFunctional) -> Result<PairPolicy, Failure> {
    if spec == "best" {
        return Ok(PairPolicy::BestPair);
    }
    let bad = || Failure::Input(format!("--pair expects `i,j` or `best`, got `{spec}`"));
    let (i, j) = spec.split_once(',').ok_or_else(bad)?;
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let j: usize = j.trim().parse().map_err(|_| bad())?;
    let s = f.scenario();
    if i == 0 || j == 0 || i > s.alice_inputs() || j > s.bob_inputs() {
        return input(format!("pair ({i}, {j}) outside the {} scenario", f.name()));
    }
    Ok(PairPolicy::Fixed(i - 1, j - 1))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectDocument {
    weight: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmDocument {
    /// "A" or "B"; Alice by default.
    #[serde(default)]
    party: Option<String>,
    effects: Vec<EffectDocument>,
}

fn load_povm(path: &PathBuf) -> Result<(Party, Measurement), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let doc: PovmDocument = serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let party = match doc.party.as_deref() {
        None | Some("A") | Some("a") => Party::Alice,
        Some("B") | Some("b") => Party::Bob,
        Some(other) => return input(format!("unknown party `{other}`")),
    };
    let effects = doc
        .effects
        .iter()
        .map(|e| {
            HermitianOperator::from_pauli(PauliCoefficients {
                identity: e.weight,
                x: e.x,
                y: e.y,
                z: e.z,
            })
        })
        .collect();
    Ok((party, Measurement::povm(effects)?))
}

struct Report {
    text: String,
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, name: &str, value: String, ok: bool) {
        writeln!(
            self.text,
            "{:<32} {:<40} {}",
            name,
            value,
            if ok { "ok" } else { "FAIL" }
        )
        .unwrap();
        if !ok {
            self.failed.push(name.to_string());
        }
    }
}

fn verify(args: &VerifyArgs) -> Outcome {
    check_tol(args.tol)?;
    let Penalties { alpha, beta } = args.penalties;
    let mut global = reference_realization_global();
    if let Some(path) = &args.povm {
        let (party, m) = load_povm(path)?;
        if m.outcome_count() != 3 {
            return input("the POVM file must hold three effects");
        }
        match party {
            Party::Alice => global.alice[3] = m,
            Party::Bob => global.bob[3] = m,
        }
    }
    let mut report = Report {
        text: String::new(),
        failed: Vec::new(),
    };

    let c3 = build_c3().evaluate(&behavior_from_realization(&reference_realization_c3())?)?;
    report.line(
        "C3",
        format!("{c3:.9}"),
        (c3 - C3_QUANTUM_BOUND).abs() <= args.tol,
    );

    let b = behavior_from_realization(&global)?;
    let c3p = build_c3_prime(alpha)?.lift(b.scenario())?.evaluate(&b)?;
    report.line(
        &format!("C3' (alpha = {alpha})"),
        format!("{c3p:.9}"),
        (c3p - C3_QUANTUM_BOUND).abs() <= args.tol,
    );
    let c3pp = build_c3_double_prime(alpha, beta)?.evaluate(&b)?;
    report.line(
        &format!("C3'' (alpha = {alpha}, beta = {beta})"),
        format!("{c3pp:.9}"),
        (c3pp - C3_QUANTUM_BOUND).abs() <= args.tol,
    );

    for (party, targets) in [
        (Party::Alice, &C3_PRIME_PENALTY_CELLS),
        (Party::Bob, &C3_DOUBLE_PRIME_PENALTY_CELLS),
    ] {
        let cert = certify_povm(&global, party, 3, targets)?;
        let residual = cert.antialignment_residual.unwrap_or(f64::INFINITY);
        report.line(
            &format!("{party}4 antialignment residual"),
            format!("{residual:.3e}"),
            residual <= 1e-12,
        );
        report.line(
            &format!("{party}4 extremal"),
            format!(
                "ranks {:?}, sigma_min {:.3e}",
                cert.rank_profile, cert.smallest_singular_value
            ),
            cert.extremal,
        );
        for (k, &label) in global.measurement(party, 3)?.labels().iter().enumerate() {
            let m = match party {
                Party::Alice => b.alice_marginal(3, 0, label)?,
                Party::Bob => b.bob_marginal(0, 3, label)?,
            };
            report.line(
                &format!("p({}|{party}4)", k + 1),
                format!("{m:.12}"),
                (m - 1.0 / 3.0).abs() <= args.tol,
            );
        }
    }
    print!("{}", report.text);
    if report.failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "failed: {}",
            report.failed.join(", ")
        )))
    }
}

fn certify(args: &CertifyArgs) -> Outcome {
    check_tol(args.tol)?;
    let Penalties { alpha, beta } = args.penalties;
    let behavior = match &args.behavior {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Behavior::from_json(&text)?
        }
        None => behavior_from_realization(&match args.mode {
            Mode::Local => reference_realization_local(),
            Mode::Global => reference_realization_global(),
        })?,
    };
    let result: CertifiedRandomness = match args.mode {
        Mode::Local => certify_local(&behavior, &build_c3_prime(alpha)?, args.tol)?,
        Mode::Global => certify_global(&behavior, &build_c3_double_prime(alpha, beta)?, args.tol)?,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&result).expect("serializable") + "\n",
        Format::Csv => format!(
            "mode,certified,guessing_probability,min_entropy_bits,violation_gap\n{},{},{},{},{}\n",
            serde_json::to_value(result.mode).expect("serializable").as_str().unwrap_or_default(),
            result.certified,
            result.guessing_probability,
            result.min_entropy_bits,
            result.violation_gap
        ),
        Format::Text => format!(
            "observed value        {:.12}\nviolation gap         {:.3e}\ncertified             {}\nguessing probability  {:.12}\nmin-entropy           {:.6} bits\n",
            result.observed_value,
            result.violation_gap,
            result.certified,
            result.guessing_probability,
            result.min_entropy_bits
        ),
    };
    emit(&text, args.out.as_ref())?;
    if result.certified {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "not certified: violation gap {:.3e} exceeds {}",
            result.violation_gap, args.tol
        )))
    }
}

fn csv(rows: &[CurveRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.p, r.violation, r.guessing_probability, r.min_entropy_bits, r.solver_status
        )
        .unwrap();
    }
    out
}

fn sweep(args: &SweepArgs) -> Outcome {
    let f = resolve(&args.inequality)?;
    let grid = parse_grid(&args.grid)?;
    let policy = parse_pair(&args.pair, &f)?;
    let solver = solver_by_name(&args.solver)?;
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let options = CurveOptions {
        execution,
        ..CurveOptions::default()
    };
    let rows = randomness_curve(&f, &grid, policy, &options, solver.as_ref())?;

    if let Some(path) = &args.export_sdpa {
        let last = rows.last().expect("grid has at least two points");
        let (i, j) = match policy {
            PairPolicy::Fixed(i, j) => (i, j),
            PairPolicy::BestPair => (0, 0),
        };
        let qmax = quantum_bound(&f, Level::Two, solver.as_ref())?.achievable;
        let problem = build_moment_problem(
            &f,
            solvable_violation(last.violation, qmax),
            ProbabilityCell::new(1, 1, i, j),
            ViolationMode::Equal,
            Level::Two,
        )?;
        let title = format!("{} p = {} p(1,1|A{},B{})", f.name(), last.p, i + 1, j + 1);
        emit(&write_sdpa(&problem.to_sdp(), &title), Some(path))?;
    }

    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("serializable") + "\n",
        Format::Csv | Format::Text => csv(&rows),
    };
    emit(&text, args.out.as_ref())?;
    match rows.iter().find(|r| !r.solver_status.is_accepted()) {
        Some(r) => Err(Failure::Solver(format!(
            "solver status {} at p = {}",
            r.solver_status, r.p
        ))),
        None => Ok(()),
    }
}

fn classical_bound(args: &BoundArgs) -> Outcome {
    let f = resolve(&args.inequality)?;
    let best = f.classical_optimum(Execution::Parallel)?;
    let one_based = |v: &[usize]| v.iter().map(|x| x + 1).collect::<Vec<_>>();
    let text = match args.format {
        Format::Json => {
            let value = serde_json::json!({
                "name": f.name(),
                "classical_bound": best.value,
                "alice_outcome_indices": one_based(&best.alice),
                "bob_outcome_indices": one_based(&best.bob),
            });
            serde_json::to_string_pretty(&value).expect("serializable") + "\n"
        }
        Format::Csv => format!("name,classical_bound\n{},{}\n", f.name(), best.value),
        Format::Text => format!("{}\n", best.value),
    };
    emit(&text, None)
}

fn quantum(args: &QuantumArgs) -> Outcome {
    let f = resolve(&args.inequality)?;
    let solver = solver_by_name(&args.solver)?;
    if let Some(path) = &args.export_sdpa {
        let problem = build_bound_problem(&f, Level::Two)?;
        emit(
            &write_sdpa(
                &problem.to_sdp(),
                &format!("{} relaxation maximum", f.name()),
            ),
            Some(path),
        )?;
    }
    let bound = quantum_bound(&f, Level::Two, solver.as_ref())?;
    let text = match args.format {
        Format::Json => {
            let value = serde_json::json!({
                "name": f.name(),
                "upper_bound": bound.upper,
                "attained": bound.achievable,
                "solver_status": bound.status,
            });
            serde_json::to_string_pretty(&value).expect("serializable") + "\n"
        }
        Format::Csv => format!(
            "name,upper_bound,attained,solver_status\n{},{},{},{}\n",
            f.name(),
            bound.upper,
            bound.achievable,
            bound.status
        ),
        Format::Text => format!("{}\n", bound.upper),
    };
    emit(&text, None)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => verify(a),
        Command::Certify(a) => certify(a),
        Command::Sweep(a) => sweep(a),
        Command::ClassicalBound(a) => classical_bound(a),
        Command::QuantumBound(a) => quantum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("chainrand: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("chainrand: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Input(m)) => {
            eprintln!("chainrand: {m}");
            ExitCode::from(4)
        }
    }
}
