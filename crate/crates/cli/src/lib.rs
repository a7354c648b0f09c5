//! The `mfdx` command line and its embedded HTTP service.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mfdx_core::io::parse_project;
use mfdx_core::*;

pub mod service;

pub use service::{router, AppState, ApiError};

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutput {
    fn ok(stdout: String) -> Self {
        CliOutput {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(stderr: String) -> Self {
        CliOutput {
            exit_code: 1,
            stdout: String::new(),
            stderr,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mfdx", version, about = "Modular Function Deployment workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Pugh,
    Numeric,
}

impl From<Mode> for EvaluationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Pugh => EvaluationMode::Pugh,
            Mode::Numeric => EvaluationMode::Numeric,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a project file and list every finding.
    Validate { file: PathBuf },
    /// Render the full report, or one matrix as CSV.
    Report {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        /// Matrix to export with --format csv.
        #[arg(long, default_value = "msasm")]
        matrix: String,
        /// Concept evaluation mode used in the report.
        #[arg(long, value_enum, default_value = "pugh")]
        mode: Mode,
    },
    /// Propose a module partition.
    Cluster {
        file: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        pair_cost: Option<f64>,
        #[arg(long)]
        max_blocks: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Module set scores, bands and bottlenecks.
    Msasm {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Assembly issues and the suggested sequence.
    Adcd {
        file: PathBuf,
        /// Print the graph in Graphviz dot syntax instead.
        #[arg(long)]
        dot: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Rank concepts.
    Concepts {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "pugh")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Serve the project over HTTP on loopback.
    Serve {
        file: PathBuf,
        #[arg(long, env = "MFDX_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

/// Runs one invocation. `args` excludes the program name.
pub fn run_cli<I, S>(args: I) -> CliOutput
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("mfdx".to_string()).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutput {
                    exit_code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutput::ok(text)
            };
        }
    };
    match execute(cli.command) {
        Ok(out) => out,
        Err(msg) => CliOutput::fail(msg),
    }
}

fn load(file: &Path) -> Result<Project, String> {
    read_project_file(file).map_err(|e| format!("{}: {e}\n", file.display()))
}

fn json_text(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn execute(command: Command) -> Result<CliOutput, String> {
    match command {
        Command::Validate { file } => {
            let bytes = std::fs::read(&file).map_err(|e| format!("{}: {e}\n", file.display()))?;
            let project = parse_project(&bytes).map_err(|e| format!("{}: {e}\n", file.display()))?;
            let report = validate_project(&project);
            let text = report.to_string();
            let summary = format!(
                "{}: {} error(s), {} warning(s)\n",
                file.display(),
                report.errors().count(),
                report.warnings().count()
            );
            if report.has_errors() {
                Ok(CliOutput {
                    exit_code: 1,
                    stdout: String::new(),
                    stderr: text + &summary,
                })
            } else {
                Ok(CliOutput::ok(text + &summary))
            }
        }
        Command::Report { file, format, matrix, mode } => {
            let project = load(&file)?;
            match format {
                ReportFormat::Md => {
                    let mut text = render_report(&project, &analyze(&project, mode.into()));
                    text.push('\n');
                    Ok(CliOutput::ok(text))
                }
                ReportFormat::Csv => {
                    let bytes = export_csv(&matrix, &project).map_err(|e| format!("{e}\n"))?;
                    Ok(CliOutput::ok(String::from_utf8(bytes).expect("csv is utf-8")))
                }
            }
        }
        Command::Cluster {
            file,
            lambda,
            pair_cost,
            max_blocks,
            seed,
            format,
        } => {
            let project = load(&file)?;
            if max_blocks == Some(0) {
                return Err("--max-blocks must be at least 1\n".into());
            }
            let req = service::ClusterRequest {
                lambda,
                pair_cost,
                max_blocks,
                seed,
                partition: None,
            };
            let result = service::cluster(&project, &req).map_err(|e| format!("{e}\n"))?;
            match format {
                OutputFormat::Json => Ok(CliOutput::ok(json_text(&result))),
                OutputFormat::Text => {
                    let mut text = String::new();
                    let partition: Partition = serde_json::from_value(result["partition"].clone()).expect("partition");
                    let _ = writeln!(
                        text,
                        "objective {} (current modules {}), lambda {}, pair cost {}, seed {seed}",
                        result["objective"], result["current_objective"], result["weights"]["lambda"], result["weights"]["pair_cost"]
                    );
                    for (i, block) in partition.blocks().iter().enumerate() {
                        let members: Vec<&str> = block.iter().map(String::as_str).collect();
                        let _ = writeln!(text, "block {}: {}", i + 1, members.join(", "));
                    }
                    Ok(CliOutput::ok(text))
                }
            }
        }
        Command::Msasm { file, format } => {
            let project = load(&file)?;
            let report = project.msasm_report().map_err(|e| format!("{e}\n"))?;
            match format {
                OutputFormat::Json => Ok(CliOutput::ok(json_text(&report))),
                OutputFormat::Text => Ok(CliOutput::ok(msasm_text(&report))),
            }
        }
        Command::Adcd { file, dot, format } => {
            let project = load(&file)?;
            if dot {
                return Ok(CliOutput::ok(to_dot(&project.adcd)));
            }
            let summary = service::adcd_summary(&project);
            match format {
                OutputFormat::Json => Ok(CliOutput::ok(json_text(&summary))),
                OutputFormat::Text => Ok(CliOutput::ok(adcd_text(&project))),
            }
        }
        Command::Concepts { file, mode, format } => {
            let project = load(&file)?;
            let ranking = service::concept_ranking(&project, mode.into()).map_err(|e| format!("{e}\n"))?;
            match format {
                OutputFormat::Json => Ok(CliOutput::ok(json_text(&ranking))),
                OutputFormat::Text => {
                    let rows = ranking["ranking"].as_array().cloned().unwrap_or_default();
                    if rows.is_empty() {
                        return Ok(CliOutput::ok("none evaluated\n".into()));
                    }
                    let mut text = String::new();
                    for (i, r) in rows.iter().enumerate() {
                        let score = r.get("net").or_else(|| r.get("total")).cloned().unwrap_or_default();
                        let datum = if r["is_datum"] == true { " (datum)" } else { "" };
                        let _ = writeln!(text, "{}. {}{datum} {score}", i + 1, r["concept"].as_str().unwrap_or_default());
                    }
                    Ok(CliOutput::ok(text))
                }
            }
        }
        Command::Serve { file, port } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| format!("{e}\n"))?;
            runtime.block_on(service::serve(&file, port)).map_err(|e| format!("{e}\n"))?;
            Ok(CliOutput::ok(String::new()))
        }
    }
}

fn msasm_text(report: &MsasmReport) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "criteria: {}", report.criteria.join(", "));
    for a in &report.aggregates {
        let scores: Vec<String> = report
            .criteria
            .iter()
            .map(|c| a.scores.get(c).map_or_else(|| "-".to_string(), |v| v.to_string()))
            .collect();
        let _ = writeln!(
            text,
            "{}  [{}]  total {}  mean {:.2}  {} ({})",
            a.set,
            scores.join(" "),
            a.total,
            a.mean,
            a.band,
            a.colour
        );
        if !a.missing_criteria.is_empty() {
            let _ = writeln!(text, "    missing: {}", a.missing_criteria.join(", "));
        }
    }
    if !report.bottlenecks.is_empty() {
        let ranked: Vec<String> = report.bottlenecks.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(text, "bottlenecks: {}", ranked.join(" > "));
    }
    if !report.unscored.is_empty() {
        let sets: Vec<String> = report.unscored.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(text, "unscored: {}", sets.join(", "));
    }
    text
}

fn adcd_text(project: &Project) -> String {
    let mut text = String::new();
    if !project.adcd.nodes.is_empty() {
        match optimal_sequence(&project.adcd) {
            Ok(seq) => {
                let steps: Vec<String> = seq.steps.iter().map(|s| format!("{} {}", s.module, s.direction)).collect();
                let _ = writeln!(text, "sequence: {}", steps.join(" -> "));
                let _ = writeln!(
                    text,
                    "reorientations: {}{}",
                    seq.reorientations,
                    if seq.exact { "" } else { " (heuristic)" }
                );
            }
            Err(e) => {
                let _ = writeln!(text, "sequence: unavailable ({e})");
            }
        }
    }
    let issues = detect_assembly_issues(&project.adcd).into_iter().chain(detect_dfd_issues(
        &project.adcd,
        &project.config.reusable_modules,
        project.config.diversity_threshold,
    ));
    let mut any = false;
    for i in issues {
        any = true;
        let _ = writeln!(text, "{}: {} at {}: {}", i.severity.as_str(), i.kind.as_str(), i.location, i.message);
    }
    if !any {
        text.push_str("no issues\n");
    }
    text
}
