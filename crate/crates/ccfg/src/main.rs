//! Command-line front end: generate, validate, fuzz, eval, metrics, and
//! pipeline subcommands over grammar files and problem bundles.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ccfg::bundle::{self, ProblemBundle};
use ccfg::fuzzer;
use ccfg::generator::{self, Limits};
use ccfg::grammar::{self, Grammar};
use ccfg::metrics::{self, EvalReport};
use ccfg::pipeline::{self, write_atomic};
use ccfg::runner::{self, RunOutcome};
use ccfg::seed;
use ccfg::validator;

#[derive(Parser)]
#[command(name = "ccfg", version, about = "Grammar-based test generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stratified test suite from a grammar file
    Generate {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on bytes per generated case
        #[arg(long)]
        max_bytes: Option<usize>,
        /// Cap on derivation steps per case
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Parse test files against a grammar and report validity
    Validate {
        #[arg(long)]
        grammar: PathBuf,
        /// Test file or directory of .txt files
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Mutate existing test files token-by-token
    Fuzz {
        #[arg(long)]
        tests: PathBuf,
        #[arg(long, default_value_t = fuzzer::DEFAULT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Drop type preservation when mutating tokens
        #[arg(long)]
        chaotic: bool,
    },
    /// Run a bundle's solutions on existing tests and score effectiveness
    Eval {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Compare a candidate grammar against the ground truth
    Metrics {
        #[arg(long)]
        ground: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Bundle supplying the problem name
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-truth samples for the generality estimate
        #[arg(long, default_value_t = 30)]
        samples: usize,
    },
    /// Full evaluation of one problem bundle
    Pipeline {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Directory for the generated test files
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_grammar_file(path: &Path) -> Result<Grammar, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: grammar::GrammarFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    grammar::load_grammar(&file.grammar, &file.constraints).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        format!("{}: {}", path.display(), lines.join("; "))
    })
}

/// A single test file, or every `.txt` file of a directory in name order.
fn collect_tests(path: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|e| format!("cannot read {}: {e}", p.display()))
    };
    if path.is_file() {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok(vec![(name, read(path)?)]);
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(format!("no .txt test files under {}", path.display()));
    }
    entries
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, read(&p)?))
        })
        .collect()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    write_atomic(path, format!("{json}\n").as_bytes()).map_err(|e| e.to_string())
}

fn cmd_generate(
    grammar: &Path,
    out: &Path,
    master_seed: u64,
    max_bytes: Option<usize>,
    max_steps: Option<u64>,
) -> Result<(), String> {
    let g = load_grammar_file(grammar)?;
    let mut limits = Limits::default();
    if let Some(b) = max_bytes {
        limits.max_bytes = b;
    }
    if let Some(s) = max_steps {
        limits.max_steps = s;
    }
    let name = grammar
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "grammar".to_string());
    let suite =
        generator::generate_suite(&g, &name, master_seed, limits).map_err(|e| e.to_string())?;
    for failure in &suite.failures {
        eprintln!("warning: {failure}");
    }
    pipeline::write_suite(out, &suite).map_err(|e| e.to_string())?;
    println!("wrote {} cases to {}", suite.cases.len(), out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct TestVerdict {
    file: String,
    accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(serde::Serialize)]
struct ValidateReport {
    element_validity: f64,
    set_validity: u8,
    tests: Vec<TestVerdict>,
}

fn cmd_validate(grammar: &Path, tests: &Path, report: &Path) -> Result<(), String> {
    let g = load_grammar_file(grammar)?;
    let files = collect_tests(tests)?;
    let texts: Vec<Vec<u8>> = files.iter().map(|(_, t)| t.clone()).collect();
    let verdicts: Vec<TestVerdict> = files
        .iter()
        .map(|(name, text)| {
            let r = validator::parse_testcase(&g, text);
            TestVerdict {
                file: name.clone(),
                accepted: r.accepted,
                error: r.failure.map(|f| f.to_string()),
            }
        })
        .collect();
    let element = validator::element_validity(&g, &texts).map_err(|e| e.to_string())?;
    let set = validator::set_validity(&g, &texts).map_err(|e| e.to_string())?;
    let doc = ValidateReport {
        element_validity: *element.numer() as f64 / *element.denom() as f64,
        set_validity: set,
        tests: verdicts,
    };
    write_json(report, &doc)?;
    println!(
        "element validity {}, set validity {set}",
        metrics::render_2dp(element)
    );
    Ok(())
}

fn cmd_fuzz(
    tests: &Path,
    ratio: f64,
    master_seed: u64,
    out: &Path,
    chaotic: bool,
) -> Result<(), String> {
    let files = collect_tests(tests)?;
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    for (slot, (name, text)) in files.iter().enumerate() {
        let tokenized = fuzzer::tokenize_case(text);
        let mut rng = seed::rng_from(seed::subseed(master_seed, 7, slot as u64));
        let mutated = fuzzer::mutate_case(&tokenized, ratio, chaotic, &mut rng)
            .map_err(|e| format!("{name}: {e}"))?;
        write_atomic(&out.join(name), &mutated).map_err(|e| e.to_string())?;
    }
    println!("fuzzed {} cases into {}", files.len(), out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalDoc {
    problem: String,
    element_effectiveness: Option<f64>,
    set_effectiveness: Option<f64>,
    tests: Vec<String>,
}

fn cmd_eval(problem: &Path, tests: &Path, report: &Path) -> Result<(), String> {
    let bundle = bundle::ingest_bundle(problem).map_err(|e| e.to_string())?;
    let files = collect_tests(tests)?;
    let texts: Vec<Vec<u8>> = files.iter().map(|(_, t)| t.clone()).collect();
    let (element, set) = effectiveness_on(&bundle, &texts)?;
    let doc = EvalDoc {
        problem: bundle.name.clone(),
        element_effectiveness: element,
        set_effectiveness: set,
        tests: files.into_iter().map(|(n, _)| n).collect(),
    };
    write_json(report, &doc)?;
    match (element, set) {
        (Some(e), Some(s)) => println!("effectiveness element {e:.2}, set {s:.2}"),
        _ => println!("effectiveness skipped (no incorrect solutions)"),
    }
    Ok(())
}

/// Effectiveness of given tests against the bundle's solutions; `None` when
/// the bundle is excluded from evaluation.
fn effectiveness_on(
    bundle: &ProblemBundle,
    texts: &[Vec<u8>],
) -> Result<(Option<f64>, Option<f64>), String> {
    let correct = bundle.correct_solutions();
    if bundle.eval_excluded || correct.is_empty() {
        return Ok((None, None));
    }
    let correct_cmds: Vec<Vec<String>> = correct.iter().map(|s| s.cmd.clone()).collect();
    let matrix =
        runner::run_matrix(&correct_cmds, texts, bundle.timeout).map_err(|e| e.to_string())?;
    let references: Vec<RunOutcome> = (0..texts.len())
        .map(|t| {
            let column: Vec<RunOutcome> = matrix.iter().map(|row| row[t].clone()).collect();
            runner::oracle_output(&column)
        })
        .collect();
    let incorrect_cmds: Vec<Vec<String>> = bundle
        .incorrect_solutions()
        .iter()
        .map(|s| s.cmd.clone())
        .collect();
    let incorrect =
        runner::run_matrix(&incorrect_cmds, texts, bundle.timeout).map_err(|e| e.to_string())?;
    let elt =
        metrics::effectiveness_element(&incorrect, &references, true).map_err(|e| e.to_string())?;
    let set =
        metrics::effectiveness_set(&incorrect, &references, true).map_err(|e| e.to_string())?;
    let f = |r: num_rational::Rational64| *r.numer() as f64 / *r.denom() as f64;
    Ok((Some(f(elt)), Some(f(set))))
}

fn cmd_metrics(
    ground_path: &Path,
    candidate_path: &Path,
    problem: Option<&Path>,
    report: &Path,
    master_seed: u64,
    samples: usize,
) -> Result<(), String> {
    let ground = load_grammar_file(ground_path)?;
    let candidate = load_grammar_file(candidate_path)?;
    let name = match problem {
        Some(p) => bundle::ingest_bundle(p).map_err(|e| e.to_string())?.name,
        None => candidate_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "candidate".to_string()),
    };

    let suite = generator::generate_suite(&candidate, &name, master_seed, Limits::default())
        .map_err(|e| e.to_string())?;
    let texts: Vec<Vec<u8>> = suite.cases.into_iter().map(|c| c.text).collect();
    let element_validity =
        validator::element_validity(&ground, &texts).map_err(|e| e.to_string())?;
    let set_validity = validator::set_validity(&ground, &texts).map_err(|e| e.to_string())?;
    let gen = metrics::generality(&candidate, &ground, samples, master_seed)
        .map_err(|e| e.to_string())?;
    let sem = set_validity == 1 && gen.set == 1;
    let syn = metrics::syntactic_equivalence(&candidate, &ground);

    let f = |r: num_rational::Rational64| *r.numer() as f64 / *r.denom() as f64;
    let doc = EvalReport {
        problem: name,
        element_validity: f(element_validity),
        set_validity,
        element_generality: Some(f(gen.element)),
        set_generality: Some(gen.set),
        element_effectiveness: None,
        set_effectiveness: None,
        semantically_equivalent: Some(sem),
        syntactically_equivalent: Some(syn),
    };
    write_json(report, &doc)?;
    println!(
        "validity {}/{set_validity} generality {}/{} semantic {sem} syntactic {syn}",
        metrics::render_2dp(element_validity),
        metrics::render_2dp(gen.element),
        gen.set
    );
    Ok(())
}

fn cmd_pipeline(
    bundle_path: &Path,
    master_seed: u64,
    report: &Path,
    out: Option<&Path>,
) -> Result<(), String> {
    let bundle = bundle::ingest_bundle(bundle_path).map_err(|e| e.to_string())?;
    let full =
        pipeline::run_pipeline(&bundle, master_seed, out, Some(report)).map_err(|e| e.to_string())?;
    println!(
        "{}: set_validity {} element_effectiveness {:?}",
        full.report.problem, full.report.set_validity, full.report.element_effectiveness
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate {
            grammar,
            out,
            seed,
            max_bytes,
            max_steps,
        } => cmd_generate(grammar, out, *seed, *max_bytes, *max_steps),
        Command::Validate {
            grammar,
            tests,
            report,
        } => cmd_validate(grammar, tests, report),
        Command::Fuzz {
            tests,
            ratio,
            seed,
            out,
            chaotic,
        } => cmd_fuzz(tests, *ratio, *seed, out, *chaotic),
        Command::Eval {
            problem,
            tests,
            report,
        } => cmd_eval(problem, tests, report),
        Command::Metrics {
            ground,
            candidate,
            problem,
            report,
            seed,
            samples,
        } => cmd_metrics(ground, candidate, problem.as_deref(), report, *seed, *samples),
        Command::Pipeline {
            bundle,
            seed,
            report,
            out,
        } => cmd_pipeline(bundle, *seed, report, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
