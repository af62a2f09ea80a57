//! Problem bundles: a JSON description of one problem's ground-truth
//! grammar, test files, and runnable solutions.
//!
//! Test entries are file paths resolved relative to the bundle file; they
//! must exist at load time.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::grammar::{self, Grammar, LoadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    pub id: String,
    pub verdict: Verdict,
    pub cmd: Vec<String>,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
struct TestsRaw {
    #[serde(default)]
    public: Vec<String>,
    #[serde(default)]
    private: Vec<String>,
    #[serde(default)]
    generated: Vec<String>,
}

#[derive(Debug, Clone, serde::Deserialize)]
struct CandidateRaw {
    name: Option<String>,
    grammar: Vec<String>,
    #[serde(default)]
    constraints: Vec<String>,
}

#[derive(Debug, Clone, serde::Deserialize)]
struct BundleRaw {
    name: String,
    timeout_ms: u64,
    grammar: Option<Vec<String>>,
    #[serde(default)]
    constraints: Vec<String>,
    #[serde(default)]
    candidates: Vec<CandidateRaw>,
    #[serde(default)]
    tests: TestsRaw,
    #[serde(default)]
    solutions: Vec<Solution>,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub grammar: Grammar,
}

/// Resolved test file paths, grouped as in the bundle.
#[derive(Debug, Clone, Default)]
pub struct TestFiles {
    pub public: Vec<PathBuf>,
    pub private: Vec<PathBuf>,
    pub generated: Vec<PathBuf>,
}

impl TestFiles {
    pub fn all(&self) -> impl Iterator<Item = &PathBuf> {
        self.public
            .iter()
            .chain(&self.private)
            .chain(&self.generated)
    }

    pub fn is_empty(&self) -> bool {
        self.all().next().is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub name: String,
    pub timeout: Duration,
    /// Ground-truth grammar, when the bundle carries one. Without it,
    /// validity and generality metrics are disabled.
    pub ground: Option<Grammar>,
    /// Raw grammar and constraint lines as they appeared in the bundle,
    /// kept for provenance hashing.
    pub ground_source: Option<(Vec<String>, Vec<String>)>,
    pub candidates: Vec<Candidate>,
    pub tests: TestFiles,
    pub solutions: Vec<Solution>,
    /// Set when the bundle has no incorrect solutions; effectiveness
    /// metrics are skipped for such problems.
    pub eval_excluded: bool,
}

impl ProblemBundle {
    pub fn correct_solutions(&self) -> Vec<&Solution> {
        self.solutions
            .iter()
            .filter(|s| s.verdict == Verdict::Correct)
            .collect()
    }

    pub fn incorrect_solutions(&self) -> Vec<&Solution> {
        self.solutions
            .iter()
            .filter(|s| s.verdict == Verdict::Incorrect)
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Malformed JSON or a field of the wrong shape, located by a JSON
    /// pointer into the bundle document.
    #[error("bundle schema error at {pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("test file {path} (at {pointer}) does not exist")]
    MissingTestFile { path: PathBuf, pointer: String },
    #[error("bundle must provide a grammar or at least one test")]
    Empty,
    #[error("bad grammar at {pointer}: {}", format_load_errors(.errors))]
    Grammar {
        pointer: String,
        errors: Vec<LoadError>,
    },
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for segment in path.iter() {
        use serde_path_to_error::Segment;
        match segment {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn resolve_tests(
    base: &Path,
    group: &str,
    entries: &[String],
) -> Result<Vec<PathBuf>, SchemaError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let path = base.join(entry);
            if path.is_file() {
                Ok(path)
            } else {
                Err(SchemaError::MissingTestFile {
                    path,
                    pointer: format!("/tests/{group}/{i}"),
                })
            }
        })
        .collect()
}

fn format_load_errors(errors: &[LoadError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn assemble_grammar(
    pointer: &str,
    grammar_lines: &[String],
    constraint_lines: &[String],
) -> Result<Grammar, SchemaError> {
    grammar::load_grammar(grammar_lines, constraint_lines).map_err(|errors| {
        SchemaError::Grammar {
            pointer: pointer.to_string(),
            errors,
        }
    })
}

pub fn ingest_bundle(path: &Path) -> Result<ProblemBundle, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let raw: BundleRaw = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        SchemaError::Invalid {
            pointer: json_pointer(e.path()),
            message: e.inner().to_string(),
        }
    })?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let tests = TestFiles {
        public: resolve_tests(base, "public", &raw.tests.public)?,
        private: resolve_tests(base, "private", &raw.tests.private)?,
        generated: resolve_tests(base, "generated", &raw.tests.generated)?,
    };

    let ground_source = raw
        .grammar
        .as_ref()
        .map(|g| (g.clone(), raw.constraints.clone()));
    let ground = match &raw.grammar {
        Some(lines) => Some(assemble_grammar("/grammar", lines, &raw.constraints)?),
        None => None,
    };
    if ground.is_none() && tests.is_empty() {
        return Err(SchemaError::Empty);
    }

    let candidates = raw
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let grammar =
                assemble_grammar(&format!("/candidates/{i}"), &c.grammar, &c.constraints)?;
            Ok(Candidate {
                name: c.name.clone().unwrap_or_else(|| format!("candidate_{i}")),
                grammar,
            })
        })
        .collect::<Result<Vec<_>, SchemaError>>()?;

    let mut solutions = raw.solutions;
    // let bundles refer to solution scripts next to the bundle file
    for sol in &mut solutions {
        for arg in &mut sol.cmd {
            let candidate = base.join(&*arg);
            if candidate.is_file() {
                *arg = candidate.to_string_lossy().into_owned();
            }
        }
    }

    let eval_excluded = !solutions.iter().any(|s| s.verdict == Verdict::Incorrect);
    Ok(ProblemBundle {
        name: raw.name,
        timeout: Duration::from_millis(raw.timeout_ms),
        ground,
        ground_source,
        candidates,
        tests,
        solutions,
        eval_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        p
    }

    fn minimal_bundle(extra: &str) -> String {
        format!(
            r#"{{
                "name": "toy",
                "timeout_ms": 1000,
                "grammar": ["<S> -> n"],
                "constraints": ["1<=n<=5"]{extra}
            }}"#
        )
    }

    #[test]
    fn loads_minimal_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "b.json", &minimal_bundle(""));
        let b = ingest_bundle(&p).unwrap();
        assert_eq!(b.name, "toy");
        assert!(b.ground.is_some());
        assert!(b.eval_excluded, "no incorrect solutions");
    }

    #[test]
    fn eval_excluded_clears_with_incorrect_solution() {
        let dir = tempfile::tempdir().unwrap();
        let extra = r#",
            "solutions": [
                {"id": "good", "verdict": "correct", "cmd": ["cat"]},
                {"id": "bad", "verdict": "incorrect", "cmd": ["false"]}
            ]"#;
        let p = write_file(dir.path(), "b.json", &minimal_bundle(extra));
        let b = ingest_bundle(&p).unwrap();
        assert!(!b.eval_excluded);
        assert_eq!(b.correct_solutions().len(), 1);
        assert_eq!(b.incorrect_solutions().len(), 1);
    }

    #[test]
    fn missing_grammar_without_tests_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "b.json",
            r#"{"name": "x", "timeout_ms": 100}"#,
        );
        assert!(matches!(ingest_bundle(&p), Err(SchemaError::Empty)));
    }

    #[test]
    fn grammarless_bundle_with_tests_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "t1.txt", "1\n");
        let p = write_file(
            dir.path(),
            "b.json",
            r#"{"name": "x", "timeout_ms": 100, "tests": {"public": ["t1.txt"]}}"#,
        );
        let b = ingest_bundle(&p).unwrap();
        assert!(b.ground.is_none());
        assert_eq!(b.tests.public.len(), 1);
    }

    #[test]
    fn malformed_json_reports_pointer() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "b.json",
            r#"{"name": "x", "timeout_ms": "fast"}"#,
        );
        match ingest_bundle(&p) {
            Err(SchemaError::Invalid { pointer, .. }) => assert_eq!(pointer, "/timeout_ms"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_test_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let raw = minimal_bundle(r#", "tests": {"private": ["nope.txt"]}"#);
        let p = write_file(dir.path(), "b.json", &raw);
        match ingest_bundle(&p) {
            Err(SchemaError::MissingTestFile { pointer, .. }) => {
                assert_eq!(pointer, "/tests/private/0");
            }
            other => panic!("expected missing file error, got {other:?}"),
        }
    }

    #[test]
    fn bad_grammar_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let raw = r#"{"name": "x", "timeout_ms": 100, "grammar": ["no arrow here"]}"#;
        let p = write_file(dir.path(), "b.json", raw);
        assert!(matches!(
            ingest_bundle(&p),
            Err(SchemaError::Grammar { .. })
        ));
    }
}
