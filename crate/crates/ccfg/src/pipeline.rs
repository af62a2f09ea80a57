//! End-to-end evaluation of one problem bundle: generate a suite from the
//! ground-truth grammar, pick the evaluation subset, run the solutions,
//! and assemble an [`EvalReport`].
//!
//! Every random decision flows from the single master seed, so reruns with
//! the same seed produce byte-identical reports and test files.

use std::path::Path;

use num_rational::Rational64;
use sha2::Digest;

use crate::bundle::ProblemBundle;
use crate::generator::{self, Limits, TestSuite};
use crate::metrics::{self, EvalReport};
use crate::runner::{self, RunOutcome};
use crate::validator;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("bundle has no ground-truth grammar")]
    MissingGrammar,
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

fn stage(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Full report document: the per-problem metrics plus provenance fields.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FullReport {
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the ground-truth grammar and constraint lines.
    pub grammar_sha256: Option<String>,
    pub report: EvalReport,
}

#[derive(Debug, serde::Serialize)]
struct ManifestCase {
    file: String,
    class: generator::LengthClass,
    mode: generator::SampleMode,
    seed: u64,
}

#[derive(Debug, serde::Serialize)]
struct Manifest {
    grammar: String,
    seed: u64,
    cases: Vec<ManifestCase>,
}

fn ratio_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Writes `bytes` to `path` via a temporary file in the same directory, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Writes suite cases as `case_<class>_<idx>.txt` plus a `manifest.json`.
pub fn write_suite(dir: &Path, suite: &TestSuite) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut counters = std::collections::HashMap::new();
    let mut manifest_cases = Vec::with_capacity(suite.cases.len());
    for case in &suite.cases {
        let idx = counters.entry(case.length_class).or_insert(0usize);
        let file = format!("case_{}_{:02}.txt", case.length_class.as_str(), *idx);
        *idx += 1;
        write_atomic(&dir.join(&file), &case.text)?;
        manifest_cases.push(ManifestCase {
            file,
            class: case.length_class,
            mode: case.mode_used,
            seed: case.seed,
        });
    }
    let manifest = Manifest {
        grammar: suite.grammar_name.clone(),
        seed: suite.master_seed,
        cases: manifest_cases,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), format!("{json}\n").as_bytes())
}

fn grammar_hash(bundle: &ProblemBundle) -> Option<String> {
    bundle.ground_source.as_ref().map(|(g, c)| {
        let mut hasher = sha2::Sha256::new();
        for line in g.iter().chain(c) {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        format!("{:x}", hasher.finalize())
    })
}

/// Runs the whole evaluation for one bundle. `out_dir`, when given,
/// receives the generated test files; `report_path`, when given, receives
/// the report JSON (written atomically).
pub fn run_pipeline(
    bundle: &ProblemBundle,
    seed: u64,
    out_dir: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<FullReport, PipelineError> {
    let ground = bundle.ground.as_ref().ok_or(PipelineError::MissingGrammar)?;

    let suite = generator::generate_suite(ground, &bundle.name, seed, Limits::default())
        .map_err(|e| stage("generate")(&e))?;
    if let Some(dir) = out_dir {
        write_suite(dir, &suite)?;
    }

    let eval_cases = generator::select_for_eval(&suite);
    let texts: Vec<Vec<u8>> = eval_cases.iter().map(|c| c.text.clone()).collect();

    let element_validity =
        validator::element_validity(ground, &texts).map_err(|e| stage("validity")(&e))?;
    let set_validity =
        validator::set_validity(ground, &texts).map_err(|e| stage("validity")(&e))?;

    let correct = bundle.correct_solutions();
    let incorrect = bundle.incorrect_solutions();
    let (element_effectiveness, set_effectiveness) = if bundle.eval_excluded || correct.is_empty()
    {
        (None, None)
    } else {
        let correct_cmds: Vec<Vec<String>> = correct.iter().map(|s| s.cmd.clone()).collect();
        let correct_matrix = runner::run_matrix(&correct_cmds, &texts, bundle.timeout)
            .map_err(|e| stage("oracle")(&e))?;
        let references: Vec<RunOutcome> = (0..texts.len())
            .map(|t| {
                let column: Vec<RunOutcome> =
                    correct_matrix.iter().map(|row| row[t].clone()).collect();
                runner::oracle_output(&column)
            })
            .collect();

        let incorrect_cmds: Vec<Vec<String>> = incorrect.iter().map(|s| s.cmd.clone()).collect();
        let incorrect_matrix = runner::run_matrix(&incorrect_cmds, &texts, bundle.timeout)
            .map_err(|e| stage("effectiveness")(&e))?;
        let valid = set_validity == 1;
        let elt = metrics::effectiveness_element(&incorrect_matrix, &references, valid)
            .map_err(|e| stage("effectiveness")(&e))?;
        let set = metrics::effectiveness_set(&incorrect_matrix, &references, valid)
            .map_err(|e| stage("effectiveness")(&e))?;
        (Some(ratio_f64(elt)), Some(ratio_f64(set)))
    };

    let (element_generality, set_generality, semantically_equivalent, syntactically_equivalent) =
        match bundle.candidates.first() {
            Some(candidate) => {
                let gen = metrics::generality(&candidate.grammar, ground, 30, seed)
                    .map_err(|e| stage("generality")(&e))?;
                let sem = metrics::semantic_equivalence(&candidate.grammar, ground, 30, seed)
                    .map_err(|e| stage("equivalence")(&e))?;
                let syn = metrics::syntactic_equivalence(&candidate.grammar, ground);
                (
                    Some(ratio_f64(gen.element)),
                    Some(gen.set),
                    Some(sem),
                    Some(syn),
                )
            }
            None => (None, None, None, None),
        };

    let full = FullReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        grammar_sha256: grammar_hash(bundle),
        report: EvalReport {
            problem: bundle.name.clone(),
            element_validity: ratio_f64(element_validity),
            set_validity,
            element_generality,
            set_generality,
            element_effectiveness,
            set_effectiveness,
            semantically_equivalent,
            syntactically_equivalent,
        },
    };

    if let Some(path) = report_path {
        let json = serde_json::to_string_pretty(&full).expect("report serializes");
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ingest_bundle;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) {
        let mut f = std::fs::File::create(dir.join(name)).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
    }

    fn toy_bundle(dir: &Path) -> ProblemBundle {
        // echo problem: read one integer, print it; buggy variant adds 1
        write_file(dir, "good.sh", "#!/bin/sh\nread x; echo \"$x\"\n");
        write_file(dir, "bad.sh", "#!/bin/sh\nread x; echo $((x + 1))\n");
        write_file(
            dir,
            "bundle.json",
            r#"{
                "name": "echo-int",
                "timeout_ms": 2000,
                "grammar": ["<S> -> x"],
                "constraints": ["1<=x<=50"],
                "candidates": [{"name": "same", "grammar": ["<S> -> y"], "constraints": ["1<=y<=50"]}],
                "solutions": [
                    {"id": "good", "verdict": "correct", "cmd": ["sh", "good.sh"]},
                    {"id": "bad", "verdict": "incorrect", "cmd": ["sh", "bad.sh"]}
                ]
            }"#,
        );
        ingest_bundle(&dir.join("bundle.json")).unwrap()
    }

    #[test]
    fn end_to_end_toy_problem() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = toy_bundle(dir.path());
        let out = dir.path().join("suite");
        let report_path = dir.path().join("report.json");
        let full = run_pipeline(&bundle, 42, Some(&out), Some(&report_path)).unwrap();
        assert_eq!(full.report.set_validity, 1);
        assert_eq!(full.report.element_validity, 1.0);
        // the off-by-one solution is distinguished on every test
        assert_eq!(full.report.element_effectiveness, Some(1.0));
        assert_eq!(full.report.set_effectiveness, Some(1.0));
        assert_eq!(full.report.semantically_equivalent, Some(true));
        assert_eq!(full.report.syntactically_equivalent, Some(true));
        assert!(full.grammar_sha256.is_some());
        assert!(report_path.is_file());
        assert!(out.join("manifest.json").is_file());
        // 30 cases + manifest
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 31);
    }

    #[test]
    fn identical_seeds_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = toy_bundle(dir.path());
        let (o1, r1) = (dir.path().join("s1"), dir.path().join("r1.json"));
        let (o2, r2) = (dir.path().join("s2"), dir.path().join("r2.json"));
        run_pipeline(&bundle, 7, Some(&o1), Some(&r1)).unwrap();
        run_pipeline(&bundle, 7, Some(&o2), Some(&r2)).unwrap();
        assert_eq!(
            std::fs::read(&r1).unwrap(),
            std::fs::read(&r2).unwrap()
        );
        for entry in std::fs::read_dir(&o1).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                std::fs::read(o1.join(&name)).unwrap(),
                std::fs::read(o2.join(&name)).unwrap(),
                "{name:?} differs"
            );
        }
    }

    #[test]
    fn eval_excluded_bundle_reports_null_effectiveness() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "bundle.json",
            r#"{
                "name": "no-bugs",
                "timeout_ms": 1000,
                "grammar": ["<S> -> x"],
                "constraints": ["1<=x<=5"],
                "solutions": [{"id": "good", "verdict": "correct", "cmd": ["cat"]}]
            }"#,
        );
        let bundle = ingest_bundle(&dir.path().join("bundle.json")).unwrap();
        let full = run_pipeline(&bundle, 1, None, None).unwrap();
        assert_eq!(full.report.element_effectiveness, None);
        assert_eq!(full.report.set_effectiveness, None);
        assert_eq!(full.report.set_validity, 1);
    }

    #[test]
    fn missing_grammar_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "t.txt", "1\n");
        write_file(
            dir.path(),
            "bundle.json",
            r#"{"name": "x", "timeout_ms": 1000, "tests": {"public": ["t.txt"]}}"#,
        );
        let bundle = ingest_bundle(&dir.path().join("bundle.json")).unwrap();
        assert!(matches!(
            run_pipeline(&bundle, 1, None, None),
            Err(PipelineError::MissingGrammar)
        ));
    }
}
