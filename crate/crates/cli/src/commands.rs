use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use corrbox::criteria::{self, REPORT_CSV_HEADER};
use corrbox::fmt::g12;
use corrbox::game::{self, BiasPair, GameConfig, GameMode, GameResult};
use corrbox::slices::{self, MixtureFamily, DEFAULT_RESOLUTION, DEFAULT_TOL};
use corrbox::{suites, CorrelatorVector, CriteriaReport, JointBox, Vertex};

use crate::output::{emit, to_json, Format};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_RAYS: usize = 100;
const DEFAULT_FAMILY: &str = "NL000+NL010";

#[derive(Debug, Parser)]
#[command(
    name = "corrbox",
    version,
    about = "Criteria and games for two-input two-output correlation boxes"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Criteria table for all 24 vertices of the non-signalling polytope
    Vertices(VerticesArgs),
    /// Evaluate every criterion on one box
    Eval(EvalArgs),
    /// Classify a (lambda, eta) grid of a mixture family
    Sweep(SweepArgs),
    /// Criterion transition radii along rays of a mixture family
    Boundary(RayArgs),
    /// Largest gap between the quantum and information-causality boundaries
    Merge(RayArgs),
    /// Play the information-causality game, exactly or by Monte Carlo
    Game(GameArgs),
    /// Smallest level count at which a box violates information causality
    Scan(ScanArgs),
    /// Run the randomized property suites
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to PATH (atomically) instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn format(&self, default: Format, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if !allowed.contains(&f) {
            bail!("format {f:?} is not available for this command");
        }
        Ok(f)
    }

    fn emit(&self, content: &str) -> Result<()> {
        emit(self.out.as_deref(), content)
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct BoxArgs {
    /// Vertex name (NL000, L0101, PR, ...) or path to a box JSON file
    #[arg(long = "box", value_name = "SPEC")]
    spec: Option<String>,
    /// Unbiased box from correlators C00,C01,C10,C11
    #[arg(
        long,
        value_name = "C00,C01,C10,C11",
        value_delimiter = ',',
        num_args = 1,
        allow_hyphen_values = true
    )]
    c: Option<Vec<f64>>,
}

impl BoxArgs {
    fn resolve(&self) -> Result<JointBox> {
        resolve_box(self.spec.as_deref(), self.c.as_deref())
    }
}

fn resolve_box(spec: Option<&str>, c: Option<&[f64]>) -> Result<JointBox> {
    if let Some(c) = c {
        let c: [f64; 4] = c
            .try_into()
            .map_err(|_| anyhow::anyhow!("--c needs exactly 4 values, got {}", c.len()))?;
        return Ok(JointBox::from_correlators(CorrelatorVector::from_array(c))?);
    }
    let spec = spec.context("no box given")?;
    if spec.eq_ignore_ascii_case("pr") {
        return Ok(JointBox::pr());
    }
    if let Ok(v) = spec.parse::<Vertex>() {
        return Ok(v.to_box());
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!("{spec:?} is neither a vertex name nor an existing file");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {spec}"))?;
    let (b, _) = JointBox::from_json(&text).with_context(|| format!("invalid box file {spec}"))?;
    Ok(b)
}

#[derive(Debug, Args)]
struct VerticesArgs {
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    source: BoxArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Mixture family: NL000+NL010, NL000+L0000, or a lone NL vertex (noise)
    #[arg(long, value_name = "SPEC", default_value = DEFAULT_FAMILY)]
    family: String,
    /// Grid points per axis
    #[arg(long, value_name = "N", default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct RayArgs {
    /// Mixture family: NL000+NL010, NL000+L0000, or a lone NL vertex (noise)
    #[arg(long, value_name = "SPEC", default_value = DEFAULT_FAMILY)]
    family: String,
    /// Number of rays over [0, pi/2]
    #[arg(long, value_name = "N", default_value_t = DEFAULT_RAYS)]
    rays: usize,
    /// Bisection tolerance on the radius
    #[arg(long, value_name = "FLOAT", default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct GameArgs {
    #[command(flatten)]
    source: BoxArgs,
    /// Protocol levels; 2^n data bits
    #[arg(long, value_name = "LEVELS", default_value_t = 2)]
    n: usize,
    /// Monte Carlo trials; exact evaluation when omitted
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Seed of the per-trial random streams
    #[arg(long, value_name = "U64", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Also write the Monte Carlo transcript as JSON
    #[arg(long, value_name = "PATH", requires = "trials")]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Vertex name or box JSON file; scans an isotropic bias grid when no box is given
    #[arg(long = "box", value_name = "SPEC", conflicts_with = "c")]
    spec: Option<String>,
    /// Unbiased box from correlators C00,C01,C10,C11
    #[arg(
        long,
        value_name = "C00,C01,C10,C11",
        value_delimiter = ',',
        num_args = 1,
        allow_hyphen_values = true
    )]
    c: Option<Vec<f64>>,
    /// Largest level count tried
    #[arg(long, value_name = "LEVELS", default_value_t = 14)]
    n: usize,
    /// Bias spacing of the isotropic grid
    #[arg(long, value_name = "FLOAT", default_value_t = 0.05)]
    step: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite to run
    #[arg(long, default_value = "all", value_parser = suite_parser())]
    suite: String,
    /// Samples per suite; each suite has its own default
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    /// Seed of the sample generator
    #[arg(long, value_name = "U64", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn suite_parser() -> PossibleValuesParser {
    PossibleValuesParser::new(std::iter::once("all").chain(suites::suite_names()))
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Vertices(a) => vertices(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Boundary(a) => boundary(a),
        Command::Merge(a) => merge(a),
        Command::Game(a) => game(a),
        Command::Scan(a) => scan(a),
        Command::Verify(a) => return verify(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VertexRow {
    vertex: String,
    #[serde(flatten)]
    report: CriteriaReport,
}

fn vertices(a: VerticesArgs) -> Result<()> {
    let fmt = a.out.format(Format::Csv, &[Format::Csv, Format::Json])?;
    let rows = Vertex::all()
        .map(|v| {
            Ok(VertexRow {
                vertex: v.to_string(),
                report: criteria::full_report(&v.to_box())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let content = match fmt {
        Format::Json => to_json(&rows)?,
        _ => {
            let mut s = format!("vertex,{REPORT_CSV_HEADER}\n");
            for r in &rows {
                writeln!(s, "{},{}", r.vertex, r.report.csv_row())?;
            }
            s
        }
    };
    a.out.emit(&content)
}

fn eval(a: EvalArgs) -> Result<()> {
    let fmt = a.out.format(Format::Json, &[Format::Csv, Format::Json])?;
    let report = criteria::full_report(&a.source.resolve()?)?;
    let content = match fmt {
        Format::Json => to_json(&report)?,
        _ => format!("{REPORT_CSV_HEADER}\n{}\n", report.csv_row()),
    };
    a.out.emit(&content)
}

fn parse_family(s: &str) -> Result<MixtureFamily> {
    Ok(s.parse::<MixtureFamily>()?)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let fmt = a
        .out
        .format(Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let grid = slices::sweep(&parse_family(&a.family)?, a.resolution)?;
    let content = match fmt {
        Format::Csv => grid.to_csv(),
        Format::Json => to_json(&grid)?,
        Format::Svg => grid.to_svg(),
    };
    a.out.emit(&content)
}

fn boundary(a: RayArgs) -> Result<()> {
    let fmt = a.out.format(Format::Csv, &[Format::Csv, Format::Json])?;
    let report = slices::merge_report(&parse_family(&a.family)?, a.rays, a.tol)?;
    let content = match fmt {
        Format::Json => to_json(&report.rays)?,
        _ => report.to_csv(),
    };
    a.out.emit(&content)
}

#[derive(Serialize)]
struct MergeSummary {
    family: String,
    rays: usize,
    tol: f64,
    max_discrepancy: f64,
    worst_theta: f64,
}

fn merge(a: RayArgs) -> Result<()> {
    let fmt = a.out.format(Format::Json, &[Format::Csv, Format::Json])?;
    let report = slices::merge_report(&parse_family(&a.family)?, a.rays, a.tol)?;
    let summary = MergeSummary {
        family: report.family.to_string(),
        rays: report.rays.len(),
        tol: report.tol,
        max_discrepancy: report.max_discrepancy,
        worst_theta: report.worst_theta,
    };
    let content = match fmt {
        Format::Json => to_json(&summary)?,
        _ => format!(
            "family,rays,tol,max_discrepancy,worst_theta\n{},{},{},{},{}\n",
            summary.family,
            summary.rays,
            g12(summary.tol),
            g12(summary.max_discrepancy),
            g12(summary.worst_theta)
        ),
    };
    a.out.emit(&content)
}

fn game(a: GameArgs) -> Result<()> {
    let fmt = a.out.format(Format::Json, &[Format::Csv, Format::Json])?;
    let resource = a.source.resolve()?;
    let result = match a.trials {
        None => game::exact_total_information(&GameConfig::new(a.n, resource, GameMode::Exact)?)?,
        Some(trials) => {
            let mode = GameMode::MonteCarlo {
                trials,
                seed: a.seed,
            };
            let (result, transcript) =
                game::monte_carlo_game(&GameConfig::new(a.n, resource, mode)?)?;
            if let Some(path) = &a.transcript {
                let mut json = transcript.to_json();
                json.push('\n');
                emit(Some(path), &json)?;
            }
            result
        }
    };
    let content = match fmt {
        Format::Json => to_json(&result)?,
        _ => game_csv(&result),
    };
    a.out.emit(&content)
}

fn game_csv(r: &GameResult) -> String {
    let opt = |x: Option<String>| x.unwrap_or_default();
    match &r.per_k {
        Some(rows) => {
            let mut s = String::from("K,bias,P,I,trials,stderr\n");
            for b in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    b.k,
                    g12(b.bias),
                    g12(b.p),
                    g12(b.info),
                    opt(b.trials.map(|t| t.to_string())),
                    opt(b.stderr.map(g12))
                );
            }
            s
        }
        None => {
            let mut s = String::from("ones,multiplicity,bias,P,I\n");
            for c in &r.classes {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    c.ones,
                    c.multiplicity,
                    g12(c.bias),
                    g12(c.p),
                    g12(c.info)
                );
            }
            s
        }
    }
}

#[derive(Serialize)]
struct ScanRow {
    e_i: f64,
    e_ii: f64,
    s_ic: f64,
    n_star: Option<usize>,
}

fn scan(a: ScanArgs) -> Result<()> {
    let fmt = a.out.format(Format::Csv, &[Format::Csv, Format::Json])?;
    if a.n > game::MAX_LEVELS {
        bail!(
            "--n {} exceeds the limit of {} levels",
            a.n,
            game::MAX_LEVELS
        );
    }
    let biases: Vec<BiasPair> = if a.spec.is_some() || a.c.is_some() {
        let b = resolve_box(a.spec.as_deref(), a.c.as_deref())?;
        b.validate().into_result()?;
        vec![BiasPair::from_correlators(&b.correlators())]
    } else {
        if !(a.step > 0.0 && a.step <= 1.0) {
            bail!("--step must lie in (0, 1]");
        }
        let steps = (1.0 / a.step).round() as usize;
        (0..=steps)
            .map(|k| BiasPair::isotropic((k as f64 * a.step).min(1.0)))
            .collect()
    };
    let rows: Vec<ScanRow> = biases
        .into_iter()
        .map(|b| ScanRow {
            e_i: b.e_i,
            e_ii: b.e_ii,
            s_ic: b.s_ic(),
            n_star: game::threshold_for_biases(b, a.n),
        })
        .collect();
    let content = match fmt {
        Format::Json => to_json(&rows)?,
        _ => {
            let mut s = String::from("e_I,e_II,s_ic,n_star\n");
            for r in &rows {
                let n = r.n_star.map(|n| n.to_string()).unwrap_or_default();
                writeln!(s, "{},{},{},{}", g12(r.e_i), g12(r.e_ii), g12(r.s_ic), n)?;
            }
            s
        }
    };
    a.out.emit(&content)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let fmt = a.out.format(Format::Csv, &[Format::Csv, Format::Json])?;
    let names: Vec<&str> = if a.suite == "all" {
        suites::suite_names().collect()
    } else {
        vec![a.suite.as_str()]
    };
    let outcomes: Vec<_> = names
        .iter()
        .map(|name| {
            suites::run_suite(name, a.samples, a.seed).expect("suite names come from the registry")
        })
        .collect();
    let content = match fmt {
        Format::Json => to_json(&outcomes)?,
        _ => {
            let mut s = String::from("suite,checked,violations,status,detail\n");
            for o in &outcomes {
                let status = if o.passed() { "pass" } else { "FAIL" };
                writeln!(
                    s,
                    "{},{},{},{},{}",
                    o.name,
                    o.checked,
                    o.violations,
                    status,
                    o.detail.replace(',', ";")
                )?;
            }
            s
        }
    };
    a.out.emit(&content)?;
    Ok(ExitCode::from(verify_status(&outcomes)))
}

/// 0 when every suite passed, 1 otherwise.
fn verify_status(outcomes: &[suites::SuiteOutcome]) -> u8 {
    u8::from(!outcomes.iter().all(|o| o.passed()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(violations: usize) -> suites::SuiteOutcome {
        suites::SuiteOutcome {
            name: "x",
            checked: 10,
            violations,
            detail: String::new(),
        }
    }

    #[test]
    fn any_violation_fails_verify() {
        assert_eq!(verify_status(&[]), 0);
        assert_eq!(verify_status(&[outcome(0), outcome(0)]), 0);
        assert_eq!(verify_status(&[outcome(0), outcome(3)]), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
