//! Load, validate, and address task instances from line-delimited record
//! files and the bundled demo corpus.

use crate::oracle::{ExecutionLimits, ExecutionStatus, OraclePool};
use crate::pyast;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Demo corpus transcribed from published listings; ships in-repo so the
/// pipeline runs end-to-end without dataset downloads.
pub const DEMO_CORPUS: &str = include_str!("../data/demo_corpus.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub enum Dataset {
    #[serde(rename = "CRUX", alias = "crux")]
    Crux,
    #[serde(rename = "LCB", alias = "lcb")]
    Lcb,
    #[serde(rename = "CUSTOM", alias = "custom")]
    #[default]
    Custom,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    OutputPrediction,
    InputPrediction,
}

/// One code-reasoning problem: source, call expression, expected output
/// literal, task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    #[serde(default)]
    pub dataset: Dataset,
    pub task: TaskKind,
    pub code: String,
    pub function_name: String,
    pub call_expr: String,
    pub expected_output: String,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub tags: std::collections::BTreeMap<String, String>,
}

impl TaskInstance {
    /// The ground-truth assertion `assert {call_expr} == {expected_output}`.
    pub fn canonical_assertion(&self) -> String {
        format!("assert {} == {}", self.call_expr, self.expected_output)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub instances: Vec<TaskInstance>,
    pub source_path: String,
    pub format_version: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TaskInstance> {
        self.instances.iter().find(|i| i.id == id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("ground-truth mismatch for '{id}': observed {observed}, expected {expected}")]
    GroundTruthMismatch {
        id: String,
        observed: String,
        expected: String,
    },
    #[error("parse failure in '{id}': {source}")]
    ParseFailure {
        id: String,
        #[source]
        source: pyast::ParseError,
    },
    #[error("duplicate instance id '{0}'")]
    DuplicateId(String),
    #[error("oracle failure: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("cannot read corpus file: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw on-disk record. `input` is the CRUX-style alias carrying only the
/// argument list, which is wrapped as `{function_name}({input})`.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    dataset: Option<Dataset>,
    task: TaskKind,
    code: String,
    #[serde(default)]
    function_name: Option<String>,
    #[serde(default)]
    call_expr: Option<String>,
    #[serde(default)]
    input: Option<String>,
    expected_output: String,
    #[serde(default)]
    tags: std::collections::BTreeMap<String, String>,
}

/// Load a corpus from a line-delimited record file. With `verify`, every
/// instance's ground-truth assertion is executed and confirmed true.
pub fn load_corpus(
    path: &Path,
    verify: bool,
    oracle: Option<&OraclePool>,
) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut corpus = parse_corpus(&text, &path.display().to_string())?;
    if verify {
        let pool_storage;
        let pool = match oracle {
            Some(p) => p,
            None => {
                pool_storage = OraclePool::new(default_jobs())?;
                &pool_storage
            }
        };
        verify_corpus(&corpus, pool, &ExecutionLimits::default())?;
    }
    corpus.source_path = path.display().to_string();
    Ok(corpus)
}

/// The bundled demo corpus.
pub fn demo_corpus() -> Corpus {
    parse_corpus(DEMO_CORPUS, "<bundled demo corpus>").expect("bundled corpus is well-formed")
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(2)
}

/// Parse records from text, one JSON object per line.
pub fn parse_corpus(text: &str, source_path: &str) -> Result<Corpus, CorpusError> {
    let mut instances = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_trim = line.trim();
        if line_trim.is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line_trim).map_err(|e| CorpusError::MalformedRecord {
                line: lineno + 1,
                detail: e.to_string(),
            })?;
        let instance = normalize_record(raw, lineno + 1)?;
        if !seen.insert(instance.id.clone()) {
            return Err(CorpusError::DuplicateId(instance.id));
        }
        instances.push(instance);
    }
    Ok(Corpus {
        instances,
        source_path: source_path.to_string(),
        format_version: "1".to_string(),
    })
}

fn normalize_record(raw: RawRecord, line: usize) -> Result<TaskInstance, CorpusError> {
    let module = pyast::parse(&raw.code).map_err(|e| CorpusError::ParseFailure {
        id: raw.id.clone(),
        source: e,
    })?;

    let function_name = match raw.function_name {
        Some(n) => n,
        None => sole_top_level_function(&module).ok_or_else(|| CorpusError::MalformedRecord {
            line,
            detail: format!(
                "record '{}' omits function_name and the code does not define exactly one top-level function",
                raw.id
            ),
        })?,
    };

    let call_expr = match (raw.call_expr, raw.input) {
        (Some(c), _) => c,
        (None, Some(args)) => format!("{}({})", function_name, args),
        (None, None) => {
            return Err(CorpusError::MalformedRecord {
                line,
                detail: format!("record '{}' has neither call_expr nor input", raw.id),
            })
        }
    };

    // The call must be a single expression whose callee is function_name.
    let call = pyast::parse_expression(&call_expr).map_err(|e| CorpusError::ParseFailure {
        id: raw.id.clone(),
        source: e,
    })?;
    match callee_name(&call) {
        Some(callee) if callee == function_name => {}
        _ => {
            return Err(CorpusError::MalformedRecord {
                line,
                detail: format!(
                    "record '{}': call_expr callee does not match function '{}'",
                    raw.id, function_name
                ),
            })
        }
    }
    pyast::parse_expression(&raw.expected_output).map_err(|e| CorpusError::ParseFailure {
        id: raw.id.clone(),
        source: e,
    })?;

    Ok(TaskInstance {
        id: raw.id,
        dataset: raw.dataset.unwrap_or_default(),
        task: raw.task,
        code: raw.code,
        function_name,
        call_expr,
        expected_output: raw.expected_output,
        tags: raw.tags,
    })
}

/// Name of the sole top-level function definition, if there is exactly one.
pub fn sole_top_level_function(module: &pyast::Module) -> Option<String> {
    let mut names = module.body.iter().filter_map(|s| match &s.kind {
        pyast::StmtKind::FunctionDef { name, .. } => Some(name.clone()),
        _ => None,
    });
    let first = names.next()?;
    if names.next().is_some() {
        None
    } else {
        Some(first)
    }
}

/// The callee identifier of a call expression, if the callee is a name.
pub fn callee_name(expr: &pyast::Expr) -> Option<&str> {
    match &expr.kind {
        pyast::ExprKind::Call { func, .. } => match &func.kind {
            pyast::ExprKind::Name(n) => Some(n),
            _ => None,
        },
        _ => None,
    }
}

/// Execute every instance's ground-truth assertion; the vanilla run must
/// come back OK, anything else is a corpus error.
pub fn verify_corpus(
    corpus: &Corpus,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<(), CorpusError> {
    for instance in &corpus.instances {
        verify_instance(instance, oracle, limits)?;
    }
    Ok(())
}

pub fn verify_instance(
    instance: &TaskInstance,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<(), CorpusError> {
    let run = oracle.run_call(&instance.code, &instance.call_expr, limits)?;
    if run.status != ExecutionStatus::Ok {
        return Err(CorpusError::GroundTruthMismatch {
            id: instance.id.clone(),
            observed: format!("{:?}", run.status),
            expected: instance.expected_output.clone(),
        });
    }
    let expected = oracle.eval_literal(&instance.expected_output, limits)?;
    if expected.status != ExecutionStatus::Ok {
        return Err(CorpusError::GroundTruthMismatch {
            id: instance.id.clone(),
            observed: "expected_output does not evaluate".to_string(),
            expected: instance.expected_output.clone(),
        });
    }
    if run.value_repr != expected.value_repr {
        return Err(CorpusError::GroundTruthMismatch {
            id: instance.id.clone(),
            observed: run.value_repr.unwrap_or_default(),
            expected: expected.value_repr.unwrap_or_default(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_assertion_substitutes_directly() {
        let inst = TaskInstance {
            id: "t".into(),
            dataset: Dataset::Custom,
            task: TaskKind::OutputPrediction,
            code: "def f(n):\n    return n\n".into(),
            function_name: "f".into(),
            call_expr: "f(17)".into(),
            expected_output: "17".into(),
            tags: Default::default(),
        };
        assert_eq!(inst.canonical_assertion(), "assert f(17) == 17");
    }

    #[test]
    fn input_alias_wraps_argument_list() {
        let text = r#"{"id": "a", "task": "output_prediction", "code": "def f(n):\n    return n\n", "input": "17", "expected_output": "17"}"#;
        let corpus = parse_corpus(text, "<mem>").unwrap();
        assert_eq!(corpus.instances[0].call_expr, "f(17)");
        assert_eq!(corpus.instances[0].function_name, "f");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let rec = r#"{"id": "a", "task": "output_prediction", "code": "def f(n):\n    return n\n", "call_expr": "f(1)", "expected_output": "1"}"#;
        let text = format!("{}\n{}", rec, rec);
        assert!(matches!(
            parse_corpus(&text, "<mem>"),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn callee_mismatch_is_malformed() {
        let text = r#"{"id": "a", "task": "output_prediction", "code": "def f(n):\n    return n\n", "call_expr": "g(1)", "expected_output": "1"}"#;
        assert!(matches!(
            parse_corpus(text, "<mem>"),
            Err(CorpusError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn demo_corpus_loads_with_unique_ids() {
        let corpus = demo_corpus();
        assert!(corpus.len() >= 12, "demo corpus has {} instances", corpus.len());
    }

    #[test]
    fn verify_detects_wrong_expected_output() {
        let pool = OraclePool::new(2).unwrap();
        let good = TaskInstance {
            id: "ok".into(),
            dataset: Dataset::Custom,
            task: TaskKind::OutputPrediction,
            code: "def f(n):\n    return n\n".into(),
            function_name: "f".into(),
            call_expr: "f(17)".into(),
            expected_output: "17".into(),
            tags: Default::default(),
        };
        verify_instance(&good, &pool, &ExecutionLimits::default()).unwrap();
        let mut bad = good.clone();
        bad.expected_output = "18".into();
        assert!(matches!(
            verify_instance(&bad, &pool, &ExecutionLimits::default()),
            Err(CorpusError::GroundTruthMismatch { .. })
        ));
    }
}

#[cfg(test)]
mod oracle_tests {
    use super::*;

    #[test]
    fn demo_corpus_ground_truth_verifies() {
        let corpus = demo_corpus();
        let pool = OraclePool::new(4).unwrap();
        verify_corpus(&corpus, &pool, &ExecutionLimits::default()).unwrap();
    }
}

#[cfg(test)]
mod verify_property_tests {
    use super::*;
    use crate::textual::pyvalue;

    #[test]
    fn sole_function_default_requires_exactly_one_def() {
        let two = r#"{"id": "a", "task": "output_prediction", "code": "def f(n):\n    return n\n\ndef g(n):\n    return n", "call_expr": "f(1)", "expected_output": "1"}"#;
        assert!(matches!(
            parse_corpus(two, "<mem>"),
            Err(CorpusError::MalformedRecord { .. })
        ));
        let with_name = r#"{"id": "a", "task": "output_prediction", "code": "def f(n):\n    return n\n\ndef g(n):\n    return n", "function_name": "f", "call_expr": "f(1)", "expected_output": "1"}"#;
        assert_eq!(parse_corpus(with_name, "<mem>").unwrap().len(), 1);
    }

    /// Verify accepts exactly the records whose assertion holds: any
    /// mutation of a known-good expected output must be rejected.
    #[test]
    fn verify_rejects_mutated_expected_outputs() {
        let pool = OraclePool::new(4).unwrap();
        let limits = ExecutionLimits::default();
        for inst in demo_corpus().instances {
            let Some(lit) = pyvalue::parse_literal_text(&inst.expected_output) else {
                continue;
            };
            let mut rng = crate::rng::Rng::new(41);
            let mutated = pyvalue::mutate(&lit, &mut rng);
            let rendered = pyvalue::render(&mutated);
            if rendered == pyvalue::render(&lit) {
                continue; // degenerate mutation (empty container)
            }
            let mut bad = inst.clone();
            bad.expected_output = rendered;
            assert!(
                matches!(
                    verify_instance(&bad, &pool, &limits),
                    Err(CorpusError::GroundTruthMismatch { .. })
                ),
                "{}: mutated expected output passed verify",
                inst.id
            );
        }
    }

    /// Standardization preserves behavior: the oracle value of the call
    /// is identical on raw and vanilla forms.
    #[test]
    fn standardize_preserves_oracle_value() {
        let pool = OraclePool::new(4).unwrap();
        let limits = ExecutionLimits::default();
        for inst in demo_corpus().instances {
            let vanilla = crate::pyast::standardize(&inst.code).unwrap();
            let equal = pool
                .check_equivalence(
                    &inst.code,
                    &vanilla.text,
                    &inst.call_expr,
                    &inst.call_expr,
                    &limits,
                )
                .unwrap();
            assert!(equal, "{}: standardization changed behavior", inst.id);
        }
    }
}
