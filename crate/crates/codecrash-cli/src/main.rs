//! Command-line driver for the codecrash pipeline.
//!
//! Stages are externally sequential: standardize -> perturb -> validate
//! -> run -> grade -> report. Every stage writes durable artifacts into
//! the run directory, so any stage can be re-run independently. A
//! declarative run-plan file supplies defaults; flags override it.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use codecrash::analytics;
use codecrash::gateway::CassetteMode;
use codecrash::pipeline::{self, RunPlan};
use codecrash::protocol::InferenceMode;
use codecrash::structural::PerturbationKind;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "codecrash",
    about = "Perturbation engine and robustness-evaluation harness for Python code-reasoning tasks",
    long_about = None,
    after_help = FILE_SCHEMAS
)]
struct Cli {
    /// Declarative run-plan file (JSON); flags override its fields.
    #[arg(long, global = true)]
    plan: Option<PathBuf>,

    #[command(flatten)]
    overrides: PlanOverrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PlanOverrides {
    /// Corpus record file (one JSON object per line).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Run directory for stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for all deterministic draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Deterministically keep only the first N instances.
    #[arg(long, global = true)]
    limit: Option<usize>,
    /// Oracle worker processes.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Oracle wall timeout in seconds (validation stages).
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Execute every instance's ground-truth assertion at load.
    #[arg(long, global = true)]
    verify: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and re-render every instance into the vanilla form.
    Standardize {
        /// Input corpus (defaults to the plan corpus).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output path (defaults to <out>/vanilla.jsonl).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate perturbed corpora.
    Perturb {
        /// Kinds to generate: van|ren|rtf|gbc|all|mdc|mps|mhc (repeatable).
        #[arg(long = "kind", value_parser = parse_kind)]
        kinds: Vec<PerturbationKind>,
        /// Injection probability for MDC/MPS.
        #[arg(long)]
        p: Option<f64>,
        /// Garbage insertion counts as "g,s,f" (fixed) or "g0-g1,s0-s1,f0-f1".
        #[arg(long)]
        counts: Option<String>,
        /// Message bank file (defaults to the bundled bank).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Hint generator: offline, or model:<provider:name>.
        #[arg(long = "hint-generator")]
        hint_generator: Option<String>,
    },
    /// Execute perturbed corpora against the vanilla forms.
    Validate,
    /// Build prompts and query models.
    Run {
        /// Model id, provider-prefixed (e.g. mock:echo, openai:gpt-4o-mini).
        #[arg(long = "model")]
        models: Vec<String>,
        /// Inference mode: direct or cot (repeatable).
        #[arg(long = "mode", value_parser = parse_mode)]
        modes: Vec<InferenceMode>,
        /// Cassette file for record/replay.
        #[arg(long)]
        cassette: Option<PathBuf>,
        /// Cassette mode: record, replay, or off.
        #[arg(long = "cassette-mode", value_parser = parse_cassette_mode)]
        cassette_mode: Option<CassetteMode>,
        /// Append the comment-ignoring instruction to every prompt.
        #[arg(long = "ignore-comments")]
        ignore_comments: bool,
        /// Override the per-mode max_tokens.
        #[arg(long = "max-tokens")]
        max_tokens: Option<u32>,
        /// Override the per-mode candidate count.
        #[arg(long = "n-candidates")]
        n_candidates: Option<u32>,
    },
    /// Grade recorded responses against the vanilla code.
    Grade,
    /// Aggregate grades into degradation tables.
    Report {
        /// Grade ledger path (defaults to <out>/grades.jsonl).
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Weighting scheme: paper (1/2,1/8,1/8,1/4) or uniform.
        #[arg(long, default_value = "paper")]
        weights: String,
    },
    /// Density stress test over an MDC probability grid.
    Stress {
        /// Comma-separated probability grid.
        #[arg(long = "p-grid", default_value = "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        p_grid: String,
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long = "mode", value_parser = parse_mode)]
        modes: Vec<InferenceMode>,
        #[arg(long)]
        cassette: Option<PathBuf>,
        #[arg(long = "cassette-mode", value_parser = parse_cassette_mode)]
        cassette_mode: Option<CassetteMode>,
    },
    /// Cumulative confusion-word trend of a reasoning trace.
    TraceAnalyze {
        /// Trace text file.
        path: PathBuf,
        /// Comma-separated lexicon override.
        #[arg(long)]
        lexicon: Option<String>,
    },
}

fn parse_kind(s: &str) -> Result<PerturbationKind, String> {
    PerturbationKind::parse(s).ok_or_else(|| format!("unknown perturbation kind '{}'", s))
}

fn parse_mode(s: &str) -> Result<InferenceMode, String> {
    InferenceMode::parse(s).ok_or_else(|| format!("unknown inference mode '{}'", s))
}

fn parse_cassette_mode(s: &str) -> Result<CassetteMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "record" => Ok(CassetteMode::Record),
        "replay" => Ok(CassetteMode::Replay),
        "off" => Ok(CassetteMode::Off),
        _ => Err(format!("unknown cassette mode '{}'", s)),
    }
}

fn parse_counts(s: &str) -> Result<pipeline::GarbageCountsPlan> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("--counts expects three comma-separated entries: globals,statements,functions");
    }
    let parse_range = |part: &str| -> Result<(usize, usize)> {
        if let Some((lo, hi)) = part.split_once('-') {
            Ok((lo.trim().parse()?, hi.trim().parse()?))
        } else {
            let n: usize = part.trim().parse()?;
            Ok((n, n))
        }
    };
    Ok(pipeline::GarbageCountsPlan {
        globals: parse_range(parts[0])?,
        dead_statements: parse_range(parts[1])?,
        dead_functions: parse_range(parts[2])?,
    })
}

fn parse_p_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad probability '{}'", p))
        })
        .collect()
}

fn build_plan(cli: &Cli) -> Result<RunPlan> {
    let mut plan = match &cli.plan {
        Some(path) => RunPlan::load(path)
            .with_context(|| format!("cannot load run plan {}", path.display()))?,
        None => RunPlan::new("corpus.jsonl", "runs/default"),
    };
    let o = &cli.overrides;
    if let Some(c) = &o.corpus {
        plan.corpus = c.clone();
    }
    if let Some(out) = &o.out {
        plan.output_dir = out.clone();
    }
    if let Some(seed) = o.seed {
        plan.seed = seed;
    }
    if let Some(limit) = o.limit {
        plan.limit = Some(limit);
    }
    if let Some(jobs) = o.jobs {
        plan.jobs = jobs;
    }
    if let Some(timeout) = o.timeout {
        plan.timeout = timeout;
    }
    if o.verify {
        plan.verify = true;
    }
    Ok(plan)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            std::process::exit(1);
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut plan = build_plan(&cli)?;
    match &cli.command {
        Command::Standardize { input, output } => {
            let input = input.clone().unwrap_or_else(|| plan.corpus.clone());
            let output = output.clone().unwrap_or_else(|| plan.vanilla_path());
            if plan.verify {
                codecrash::corpus::load_corpus(&input, true, None)?;
            }
            let n = pipeline::cmd_standardize(&input, &output)?;
            println!("standardized {} instances -> {}", n, output.display());
            Ok(0)
        }
        Command::Perturb {
            kinds,
            p,
            counts,
            bank,
            hint_generator,
        } => {
            if !kinds.is_empty() {
                plan.kinds = kinds.clone();
            }
            if let Some(p) = p {
                plan.p = *p;
            }
            if let Some(counts) = counts {
                plan.counts = parse_counts(counts)?;
            }
            if let Some(bank) = bank {
                plan.bank = Some(bank.clone());
            }
            if let Some(hg) = hint_generator {
                plan.hint_generator = hg.clone();
            }
            let written = pipeline::cmd_perturb(&plan)?;
            for (kind, count) in written {
                println!(
                    "{}: {} records -> {}",
                    kind,
                    count,
                    plan.perturbed_path(kind).display()
                );
            }
            Ok(0)
        }
        Command::Validate => {
            let report = pipeline::cmd_validate(&plan)?;
            for (kind, v) in &report.per_kind {
                println!(
                    "{}: {}/{} equivalent, {}/{} dead-injection ok",
                    kind, v.equivalent, v.checked, v.dead_ok, v.dead_checked
                );
                for id in &v.failed_ids {
                    println!("  FAILED {}", id);
                }
            }
            if report.failures > 0 {
                eprintln!("{} instances failed validation", report.failures);
                return Ok(2);
            }
            println!("all perturbed instances validated");
            Ok(0)
        }
        Command::Run {
            models,
            modes,
            cassette,
            cassette_mode,
            ignore_comments,
            max_tokens,
            n_candidates,
        } => {
            if !models.is_empty() {
                plan.models = models.clone();
            }
            if !modes.is_empty() {
                plan.modes = modes.clone();
            }
            if let Some(c) = cassette {
                plan.cassette = Some(c.clone());
            }
            if let Some(m) = cassette_mode {
                plan.cassette_mode = *m;
            }
            if *ignore_comments {
                plan.ignore_comments = true;
            }
            plan.max_tokens_override = max_tokens.or(plan.max_tokens_override);
            plan.n_candidates_override = n_candidates.or(plan.n_candidates_override);
            if plan.models.is_empty() {
                bail!("no models; pass --model or set models in the plan");
            }
            let n = pipeline::cmd_run(&plan)?;
            println!("recorded {} responses -> {}", n, plan.responses_path().display());
            Ok(0)
        }
        Command::Grade => {
            let ledger = pipeline::cmd_grade(&plan)?;
            println!(
                "graded {} responses -> {}",
                ledger.rows.len(),
                plan.grades_path().display()
            );
            let breakdown = analytics::error_breakdown(&ledger);
            for (class, count) in breakdown {
                println!("  {}: {}", class, count);
            }
            Ok(0)
        }
        Command::Report { ledger, weights } => {
            if let Some(ledger) = ledger {
                if ledger != &plan.grades_path() {
                    std::fs::create_dir_all(&plan.output_dir)?;
                    std::fs::copy(ledger, plan.grades_path())?;
                }
            }
            let weights = match weights.as_str() {
                "paper" => analytics::paper_weights(),
                "uniform" => analytics::uniform_weights(),
                other => bail!("unknown weighting scheme '{}'", other),
            };
            let rows = pipeline::cmd_report(&plan, &weights)?;
            print!("{}", analytics::render_table(&rows));
            println!("written to {}", plan.output_dir.join("report.csv").display());
            Ok(0)
        }
        Command::Stress {
            p_grid,
            models,
            modes,
            cassette,
            cassette_mode,
        } => {
            if !models.is_empty() {
                plan.models = models.clone();
            }
            if !modes.is_empty() {
                plan.modes = modes.clone();
            }
            if let Some(c) = cassette {
                plan.cassette = Some(c.clone());
            }
            if let Some(m) = cassette_mode {
                plan.cassette_mode = *m;
            }
            if plan.models.is_empty() {
                bail!("no models; pass --model or set models in the plan");
            }
            let grid = parse_p_grid(p_grid)?;
            let rows = pipeline::cmd_stress(&plan, &grid)?;
            println!("p,pass_at_1,mean_reasoning_tokens");
            for r in rows {
                println!(
                    "{},{:.2},{}",
                    r.p,
                    r.pass_at_1,
                    r.mean_reasoning_tokens
                        .map(|v| format!("{:.1}", v))
                        .unwrap_or_default()
                );
            }
            Ok(0)
        }
        Command::TraceAnalyze { path, lexicon } => {
            let lexicon = match lexicon {
                Some(l) => l.split(',').map(|w| w.trim().to_string()).collect(),
                None => analytics::default_lexicon(),
            };
            let analysis = pipeline::cmd_trace_analyze(path, &lexicon)?;
            println!(
                "tokens: {}  confusion hits: {}",
                analysis.tokens, analysis.final_count
            );
            println!(
                "quadratic fit: y = {:.6}x^2 + {:.6}x + {:.6}  (R^2 = {:.4})",
                analysis.coeffs.0, analysis.coeffs.1, analysis.coeffs.2, analysis.r_squared
            );
            Ok(0)
        }
    }
}

const FILE_SCHEMAS: &str = "\
FILE SCHEMAS
  Corpus record (one JSON object per line):
    {\"id\": str, \"task\": \"output_prediction\"|\"input_prediction\",
     \"code\": str, \"call_expr\": str OR \"input\": str (argument list),
     \"expected_output\": str, \"function_name\": str (optional; default:
     sole top-level function), \"dataset\": \"CRUX\"|\"LCB\"|\"CUSTOM\" (optional),
     \"tags\": {str: str} (optional)}

  Perturbed record: corpus fields plus
    {\"perturbation\": {\"kind\", \"seed\", \"injected_spans\": [[start,end]],
     \"rename_map\": {\"variables\": [{\"original\",\"renamed\"}], ...},
     \"rewritten_call\": str}}

  Message bank: {\"node_messages\": {kind: [templates]},
                 \"op_messages\": {operation: [templates]}}
    with {variable}/{function} placeholders.

  Cassette: append-only JSONL of {\"hash\", \"model_id\", \"responses\"}.

  Grade ledger row: {\"instance_id\", \"kind\", \"mode\", \"model_id\",
    \"candidate_index\", \"grade\": {\"pass\", \"error_class\", ...}, token counts}.

  Report CSV header: kind,model,mode,pass_at_1,absolute_pp,relative_pct,weighted

ENVIRONMENT
  CODECRASH_PYTHON                 reference interpreter (default python3)
  CODECRASH_API_KEY_<PROVIDER>     provider API key
  CODECRASH_BASE_URL_<PROVIDER>    provider base URL (OpenAI-compatible)
";
