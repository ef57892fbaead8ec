//! Client for the external execution oracle.
//!
//! The oracle is a separate program that runs an original function and its
//! swapped counterpart on the same inputs and reports whether observable
//! behavior matches. Each check spawns the oracle once, writes one JSON
//! request to its stdin and reads one JSON verdict from its stdout.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::ClassificationExample;
use crate::transform::render_swap_statement;

pub const SCHEMA_VERSION: &str = "swapbench-oracle/1";
pub const DEFAULT_CALL_TIMEOUT_MS: u64 = 2000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CallSpec {
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default)]
    pub kwargs: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCase {
    /// Function definition without the swap statement.
    pub original_program: String,
    /// Swap statement followed by the swapped definition.
    pub swapped_program: String,
    /// Name of the function both programs define.
    pub entry: String,
    pub call_specs: Vec<CallSpec>,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaseError {
    #[error("a case needs at least one call spec")]
    NoCalls,
    #[error("prompt does not start with the swap statement {0:?}")]
    PromptShape(String),
}

impl EquivalenceCase {
    /// Pairs the bad (original) and good (swapped) programs of an example.
    /// `prelude` goes before both, ahead of the swap statement; toplevel
    /// swaps need it to define the swapped functions.
    pub fn from_example(
        ex: &ClassificationExample,
        entry: &str,
        prelude: &str,
        call_specs: Vec<CallSpec>,
    ) -> Result<Self, CaseError> {
        if call_specs.is_empty() {
            return Err(CaseError::NoCalls);
        }
        let statement = render_swap_statement(&ex.swap);
        let head = ex
            .prompt
            .strip_prefix(&statement)
            .ok_or_else(|| CaseError::PromptShape(statement.clone()))?;
        Ok(Self {
            original_program: format!("{prelude}{head}{}", ex.bad),
            swapped_program: format!("{prelude}{}{}", ex.prompt, ex.good),
            entry: entry.to_owned(),
            call_specs,
            timeout_ms: DEFAULT_CALL_TIMEOUT_MS,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallOutcome {
    Equal,
    DifferentValue,
    DifferentExceptionType,
    Timeout,
    Crash,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub schema: String,
    pub outcomes: Vec<CallOutcome>,
    pub equivalent: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<Value>,
}

#[derive(Serialize)]
struct Request<'a> {
    schema: &'static str,
    case: &'a EquivalenceCase,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle command {0:?} not found; install the oracle or pass its command explicitly")]
    Missing(String),
    #[error("invalid case: {0}")]
    Case(#[from] CaseError),
    #[error("oracle i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),
    #[error("oracle reply is not a verdict: {0}")]
    Protocol(String),
    #[error("oracle speaks schema {found:?}, expected {SCHEMA_VERSION:?}")]
    Schema { found: String },
}

/// Spawns `program args...` once per case.
#[derive(Clone, Debug)]
pub struct OracleClient {
    program: String,
    args: Vec<String>,
    /// Added to the per-call budget for interpreter start-up.
    pub slack: Duration,
}

impl OracleClient {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
            slack: Duration::from_secs(5),
        }
    }

    /// Parses a shell-style command line split on whitespace.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace();
        let program = parts.next()?;
        Some(Self::new(program, parts))
    }

    pub fn run_pair(&self, case: &EquivalenceCase) -> Result<EquivalenceVerdict, OracleError> {
        if case.call_specs.is_empty() {
            return Err(CaseError::NoCalls.into());
        }
        let request = serde_json::to_vec(&Request {
            schema: SCHEMA_VERSION,
            case,
        })
        .expect("case serializes");
        let mut child = match Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
        {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(OracleError::Missing(self.program.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut stdin = child.stdin.take().expect("piped");
        let writer = std::thread::spawn(move || stdin.write_all(&request));
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut out = Vec::new();
            stdout.read_to_end(&mut out).map(|_| out)
        });
        let err_reader = std::thread::spawn(move || {
            let mut err = String::new();
            let _ = stderr.read_to_string(&mut err);
            err
        });

        let budget = Duration::from_millis(case.timeout_ms.saturating_mul(case.call_specs.len() as u64 * 2))
            + self.slack;
        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() > budget {
                let _ = child.kill();
                let _ = child.wait();
                return Err(OracleError::Timeout(budget));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        // A closed pipe just means the oracle stopped reading early.
        let _ = writer.join().expect("writer thread");
        let out = reader.join().expect("reader thread")?;
        let err = err_reader.join().expect("stderr thread");
        if !status.success() {
            return Err(OracleError::Failed {
                status: status.to_string(),
                stderr: err.trim().to_owned(),
            });
        }
        parse_verdict(&out, case.call_specs.len())
    }
}

/// Decodes and checks a verdict: schema, one outcome per call, and
/// `equivalent` agreeing with the outcomes.
pub fn parse_verdict(bytes: &[u8], calls: usize) -> Result<EquivalenceVerdict, OracleError> {
    let v: EquivalenceVerdict =
        serde_json::from_slice(bytes).map_err(|e| OracleError::Protocol(e.to_string()))?;
    if v.schema != SCHEMA_VERSION {
        return Err(OracleError::Schema { found: v.schema });
    }
    if v.outcomes.len() != calls {
        return Err(OracleError::Protocol(format!(
            "{} outcomes for {calls} calls",
            v.outcomes.len()
        )));
    }
    let all_equal = v.outcomes.iter().all(|o| *o == CallOutcome::Equal);
    if v.equivalent != all_equal {
        return Err(OracleError::Protocol("equivalent disagrees with the outcomes".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{SwapMode, SwapSpec};
    use serde_json::json;

    fn shell(script: &str) -> OracleClient {
        OracleClient::new("sh", ["-c", script])
    }

    fn case() -> EquivalenceCase {
        EquivalenceCase {
            original_program: "def f(x):\n    \"d\"\n    return len(x)\n".into(),
            swapped_program: "len, print = print, len\ndef f(x):\n    \"d\"\n    return print(x)\n".into(),
            entry: "f".into(),
            call_specs: vec![
                CallSpec {
                    args: vec![json!("abc")],
                    ..Default::default()
                },
                CallSpec {
                    args: vec![json!([1, 2])],
                    ..Default::default()
                },
            ],
            timeout_ms: 100,
        }
    }

    #[test]
    fn request_goes_to_stdin_and_verdict_comes_back() {
        let dir = tempfile::tempdir().unwrap();
        let seen = dir.path().join("req.json");
        let script = format!(
            "cat > {}; echo '{{\"schema\":\"{SCHEMA_VERSION}\",\"outcomes\":[\"equal\",\"equal\"],\"equivalent\":true}}'",
            seen.display()
        );
        let v = shell(&script).run_pair(&case()).unwrap();
        assert!(v.equivalent);
        let sent: Value = serde_json::from_str(&std::fs::read_to_string(seen).unwrap()).unwrap();
        assert_eq!(sent["schema"], SCHEMA_VERSION);
        assert_eq!(sent["case"]["entry"], "f");
        assert_eq!(sent["case"]["call_specs"][1]["args"][0], json!([1, 2]));
    }

    #[test]
    fn inconsistent_verdicts_are_rejected() {
        let bad = format!(r#"{{"schema":"{SCHEMA_VERSION}","outcomes":["equal","timeout"],"equivalent":true}}"#);
        assert!(matches!(parse_verdict(bad.as_bytes(), 2), Err(OracleError::Protocol(_))));
        let short = format!(r#"{{"schema":"{SCHEMA_VERSION}","outcomes":["equal"],"equivalent":true}}"#);
        assert!(matches!(parse_verdict(short.as_bytes(), 2), Err(OracleError::Protocol(_))));
        let old = r#"{"schema":"other/0","outcomes":["equal"],"equivalent":true}"#;
        assert!(matches!(parse_verdict(old.as_bytes(), 1), Err(OracleError::Schema { .. })));
        let mixed = format!(r#"{{"schema":"{SCHEMA_VERSION}","outcomes":["equal","different-value"],"equivalent":false}}"#);
        let v = parse_verdict(mixed.as_bytes(), 2).unwrap();
        assert_eq!(v.outcomes[1], CallOutcome::DifferentValue);
    }

    #[test]
    fn missing_interpreter_is_an_environment_error() {
        let client = OracleClient::new("swapbench-no-such-oracle", Vec::<String>::new());
        assert!(matches!(client.run_pair(&case()), Err(OracleError::Missing(_))));
    }

    #[test]
    fn failures_and_hangs() {
        let e = shell("cat >/dev/null; echo boom >&2; exit 3").run_pair(&case()).unwrap_err();
        assert!(matches!(&e, OracleError::Failed { stderr, .. } if stderr == "boom"), "{e}");
        let mut slow = shell("sleep 5");
        slow.slack = Duration::from_millis(50);
        let mut c = case();
        c.timeout_ms = 10;
        assert!(matches!(slow.run_pair(&c), Err(OracleError::Timeout(_))));
        c.call_specs.clear();
        assert!(matches!(slow.run_pair(&c), Err(OracleError::Case(CaseError::NoCalls))));
    }

    #[test]
    fn case_from_example() {
        let ex = ClassificationExample {
            id: "x".into(),
            prompt: "len, print = print, len\ndef f(x):\n    \"d\"\n".into(),
            bad: "    return len(x)\n".into(),
            good: "    return print(x)\n".into(),
            swap: SwapSpec::new("len", "print", 0).unwrap(),
            mode: SwapMode::Builtin,
            origin: Default::default(),
            function_index: 0,
            answer_index: 0,
            dynamic_access: Default::default(),
        };
        let c = EquivalenceCase::from_example(&ex, "f", "", vec![CallSpec::default()]).unwrap();
        assert_eq!(c.original_program, case().original_program);
        assert_eq!(c.swapped_program, case().swapped_program);
        assert!(EquivalenceCase::from_example(&ex, "f", "", vec![]).is_err());
    }
}
