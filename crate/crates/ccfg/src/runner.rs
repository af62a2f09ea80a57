//! Runs candidate solutions against test inputs and builds a majority-vote
//! reference output per test.
//!
//! A solution that crashes, exits nonzero, exceeds the output cap, or runs
//! past twice the base time limit produces [`RunOutcome::Bottom`]. Bottom is
//! distinguishable from every concrete output, including the empty one.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

/// Maximum bytes of stdout kept per run.
pub const OUTPUT_CAP: usize = 8 * 1024 * 1024;

/// Timeout slack: a run is cut off at this multiple of the base limit.
pub const TIMEOUT_FACTOR: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RunOutcome {
    /// Normalized stdout of a successful run.
    Output(Vec<u8>),
    /// Timeout, crash, nonzero exit, or output overflow.
    Bottom,
}

impl RunOutcome {
    pub fn is_bottom(&self) -> bool {
        matches!(self, RunOutcome::Bottom)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The command could not be started at all (missing binary, bad path).
    /// Unlike [`RunOutcome::Bottom`] this reports a harness problem, not a
    /// solution failure.
    #[error("failed to spawn {command:?}: {source}")]
    SpawnFailure {
        command: String,
        source: std::io::Error,
    },
    #[error("empty command line")]
    EmptyCommand,
}

/// Strips trailing whitespace from every line and trailing blank lines, so
/// cosmetic differences don't split the vote.
pub fn normalize_output(raw: &[u8]) -> Vec<u8> {
    let mut lines: Vec<&[u8]> = raw.split(|&b| b == b'\n').collect();
    let mut trimmed: Vec<&[u8]> = lines
        .drain(..)
        .map(|line| {
            let end = line
                .iter()
                .rposition(|&b| !(b == b' ' || b == b'\t' || b == b'\r'))
                .map_or(0, |i| i + 1);
            &line[..end]
        })
        .collect();
    while trimmed.last().is_some_and(|l| l.is_empty()) {
        trimmed.pop();
    }
    trimmed.join(&b'\n')
}

/// Runs `cmd` with `input` on stdin, cutting off at [`TIMEOUT_FACTOR`] times
/// `timeout_base`.
pub fn run_solution(
    cmd: &[String],
    input: &[u8],
    timeout_base: Duration,
) -> Result<RunOutcome, RunError> {
    let (program, args) = cmd.split_first().ok_or(RunError::EmptyCommand)?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| RunError::SpawnFailure {
            command: cmd.join(" "),
            source,
        })?;

    let mut stdin = child.stdin.take().expect("stdin was piped");
    let input = input.to_vec();
    let writer = std::thread::spawn(move || {
        // the child may close stdin early; that's fine
        let _ = stdin.write_all(&input);
    });

    let mut stdout = child.stdout.take().expect("stdout was piped");
    let (tx, rx) = mpsc::channel();
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 64 * 1024];
        loop {
            match stdout.read(&mut chunk) {
                Ok(0) => break,
                Ok(n) => {
                    buf.extend_from_slice(&chunk[..n]);
                    if buf.len() > OUTPUT_CAP {
                        let _ = tx.send(None);
                        return;
                    }
                }
                Err(_) => break,
            }
        }
        let _ = tx.send(Some(buf));
    });

    let deadline = Instant::now() + timeout_base * TIMEOUT_FACTOR;
    let mut early: Option<Option<Vec<u8>>> = None;
    let status = loop {
        if early.is_none() {
            if let Ok(v) = rx.try_recv() {
                if v.is_none() {
                    // output cap exceeded: no point letting it run on
                    let _ = child.kill();
                }
                early = Some(v);
            }
        }
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
        }
    };
    if !matches!(&status, Some(s) if s.success()) {
        // don't wait on the reader: an orphaned grandchild may keep the
        // stdout pipe open long after the kill
        return Ok(RunOutcome::Bottom);
    }
    let output = match early {
        Some(v) => v,
        None => rx.recv_timeout(Duration::from_secs(10)).ok().flatten(),
    };
    let _ = writer.join();
    let _ = reader.join();
    match output {
        Some(raw) => Ok(RunOutcome::Output(normalize_output(&raw))),
        None => Ok(RunOutcome::Bottom),
    }
}

/// Majority vote over non-Bottom outputs; ties go to the first-seen output.
/// All-Bottom yields Bottom.
pub fn oracle_output(outcomes: &[RunOutcome]) -> RunOutcome {
    let mut counts: HashMap<&Vec<u8>, usize> = HashMap::new();
    let mut best: Option<(&Vec<u8>, usize)> = None;
    for o in outcomes {
        if let RunOutcome::Output(bytes) = o {
            let c = counts.entry(bytes).or_insert(0);
            *c += 1;
            match best {
                Some((_, n)) if *c <= n => {}
                _ => best = Some((bytes, *c)),
            }
        }
    }
    match best {
        Some((bytes, _)) => RunOutcome::Output(bytes.clone()),
        None => RunOutcome::Bottom,
    }
}

/// Worker count: `CCFG_WORKERS` when set and positive, else available
/// parallelism, else 1.
pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var("CCFG_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every solution on every test with a bounded thread pool. The result
/// is indexed `[solution][test]`; spawn failures surface as errors rather
/// than Bottom.
pub fn run_matrix(
    commands: &[Vec<String>],
    tests: &[Vec<u8>],
    timeout_base: Duration,
) -> Result<Vec<Vec<RunOutcome>>, RunError> {
    let jobs: Vec<(usize, usize)> = (0..commands.len())
        .flat_map(|s| (0..tests.len()).map(move |t| (s, t)))
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<RunOutcome, RunError>>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();

    let workers = worker_count().min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(s, t)) = jobs.get(i) else { break };
                let outcome = run_solution(&commands[s], &tests[t], timeout_base);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut matrix = vec![Vec::with_capacity(tests.len()); commands.len()];
    for (&(s, _), cell) in jobs.iter().zip(results) {
        matrix[s].push(cell.into_inner().unwrap().expect("job ran")?);
    }
    Ok(matrix)
}
