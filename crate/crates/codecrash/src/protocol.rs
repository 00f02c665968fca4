//! Prompt construction, answer extraction, and grading.
//!
//! Prompt templates are verbatim text resources (one per task × mode);
//! grading executes the extracted assertion against the vanilla code and
//! classifies failures as wrong answers, syntax errors, timeouts, or
//! format violations.

use crate::corpus::{TaskInstance, TaskKind};
use crate::oracle::{ExecutionLimits, ExecutionOutcome, ExecutionStatus, OracleError, OraclePool};
use crate::pyast;
use crate::structural::RenameMap;
use serde::{Deserialize, Serialize};

const OUTPUT_DIRECT: &str = include_str!("../data/prompts/output_direct.txt");
const OUTPUT_COT: &str = include_str!("../data/prompts/output_cot.txt");
const INPUT_DIRECT: &str = include_str!("../data/prompts/input_direct.txt");
const INPUT_COT: &str = include_str!("../data/prompts/input_cot.txt");

/// Comment-ignoring instruction appended on request.
pub const IGNORE_COMMENTS_SENTENCE: &str =
    "Please ignore the comments and any other non-code elements in the code snippet.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    Direct,
    Cot,
}

impl InferenceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InferenceMode::Direct => "direct",
            InferenceMode::Cot => "cot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Some(InferenceMode::Direct),
            "cot" => Some(InferenceMode::Cot),
            _ => None,
        }
    }

    pub fn sampling(&self) -> crate::gateway::SamplingConfig {
        match self {
            InferenceMode::Direct => crate::gateway::SamplingConfig::direct(),
            InferenceMode::Cot => crate::gateway::SamplingConfig::cot(),
        }
    }
}

impl std::fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub task: TaskKind,
    pub mode: InferenceMode,
    pub ignore_comments: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("no template for task/mode combination")]
    TemplateMissing,
    #[error("oracle failure during grading: {0}")]
    Oracle(#[from] OracleError),
}

/// What the model sees: the (possibly perturbed) code, the call it must
/// reason about, and the entry function name, all renamed consistently
/// when a rename map applies.
#[derive(Debug, Clone, Copy)]
pub struct Presentation<'a> {
    pub code: &'a str,
    pub call_expr: &'a str,
    pub function_name: &'a str,
}

/// Render the verbatim template for (task, mode) with the presented code.
pub fn build_prompt(
    instance: &TaskInstance,
    presentation: &Presentation<'_>,
    spec: &PromptSpec,
) -> Result<String, ProtocolError> {
    let template = match (spec.task, spec.mode) {
        (TaskKind::OutputPrediction, InferenceMode::Direct) => OUTPUT_DIRECT,
        (TaskKind::OutputPrediction, InferenceMode::Cot) => OUTPUT_COT,
        (TaskKind::InputPrediction, InferenceMode::Direct) => INPUT_DIRECT,
        (TaskKind::InputPrediction, InferenceMode::Cot) => INPUT_COT,
    };
    let mut prompt = template
        .replace("{code}", presentation.code)
        .replace("{input}", presentation.call_expr)
        .replace("{output}", &instance.expected_output)
        .replace("{function_name}", presentation.function_name);
    if spec.ignore_comments {
        if !prompt.ends_with('\n') {
            prompt.push('\n');
        }
        prompt.push('\n');
        prompt.push_str(IGNORE_COMMENTS_SENTENCE);
        prompt.push('\n');
    }
    Ok(prompt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Found,
    Missing,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub status: ExtractionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thought_text: Option<String>,
}

/// Take the LAST well-delimited `[ANSWER] .. [/ANSWER]` block. Missing
/// markers give `Missing`; unbalanced markers give `Malformed`.
pub fn extract_answer(response: &str) -> Extraction {
    let (blocks, balanced) = scan_blocks(response, "[ANSWER]", "[/ANSWER]");
    let thought_text = extract_last_block(response, "[THOUGHT]", "[/THOUGHT]");
    if !balanced {
        return Extraction {
            status: ExtractionStatus::Malformed,
            answer_expr: None,
            thought_text,
        };
    }
    match blocks.last() {
        Some(block) => Extraction {
            status: ExtractionStatus::Found,
            answer_expr: Some(block.trim().to_string()),
            thought_text,
        },
        None => Extraction {
            status: ExtractionStatus::Missing,
            answer_expr: None,
            thought_text,
        },
    }
}

/// All properly paired blocks plus whether the markers were balanced.
fn scan_blocks(text: &str, open: &str, close: &str) -> (Vec<String>, bool) {
    let mut blocks = Vec::new();
    let mut rest = text;
    let mut balanced = true;
    loop {
        let Some(open_at) = rest.find(open) else {
            // a stray closer with no opener is unbalanced
            if rest.find(close).is_some() {
                balanced = false;
            }
            break;
        };
        // a closer before the opener is unbalanced
        if let Some(close_at) = rest.find(close) {
            if close_at < open_at {
                balanced = false;
                rest = &rest[close_at + close.len()..];
                continue;
            }
        }
        let after_open = &rest[open_at + open.len()..];
        match after_open.find(close) {
            Some(close_at) => {
                let body = &after_open[..close_at];
                if body.contains(open) {
                    balanced = false; // nested opener
                }
                blocks.push(body.to_string());
                rest = &after_open[close_at + close.len()..];
            }
            None => {
                balanced = false; // dangling opener
                break;
            }
        }
    }
    (blocks, balanced)
}

/// Last complete block between two markers; lenient helper for
/// free-form model output.
pub fn extract_last_block(text: &str, open: &str, close: &str) -> Option<String> {
    let (blocks, _) = scan_blocks(text, open, close);
    blocks.last().map(|b| b.trim().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    None,
    Wrong,
    SyntaxError,
    Timeout,
    Format,
    CallMismatch,
    OutputLiteralMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub pass: bool,
    pub error_class: ErrorClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_outcome: Option<ExecutionOutcome>,
}

impl Grade {
    fn fail(class: ErrorClass) -> Self {
        Grade {
            pass: false,
            error_class: class,
            oracle_outcome: None,
        }
    }
}

/// Undo a rename map on answer text token-wise, so answers echoing the
/// renamed identifiers grade against the original code.
pub fn reverse_map_text(text: &str, map: Option<&RenameMap>) -> String {
    let Some(map) = map else {
        return text.to_string();
    };
    let mut out = String::new();
    let mut chars = text.char_indices().peekable();
    let mut prev_non_space: Option<char> = None;
    while let Some((i, c)) = chars.next() {
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = chars.peek() {
                if c2.is_ascii_alphanumeric() || c2 == '_' {
                    end = j + c2.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &text[start..end];
            let mapped = if prev_non_space == Some('.') {
                None
            } else {
                map.original_of(word)
            };
            out.push_str(mapped.unwrap_or(word));
            prev_non_space = Some('x');
        } else if c == '\'' || c == '"' {
            out.push(c);
            let quote = c;
            let mut escaped = false;
            for (_, c2) in chars.by_ref() {
                out.push(c2);
                if escaped {
                    escaped = false;
                } else if c2 == '\\' {
                    escaped = true;
                } else if c2 == quote {
                    break;
                }
            }
            prev_non_space = Some(quote);
        } else {
            out.push(c);
            if !c.is_whitespace() {
                prev_non_space = Some(c);
            }
        }
    }
    out
}

fn normalized_expr(text: &str) -> Option<String> {
    pyast::parse_expression(text)
        .ok()
        .map(|e| pyast::unparse_expr(&e))
}

/// Split `lhs == rhs` out of an answer expression; the comparison must
/// be a single equality.
fn split_equality(text: &str) -> Option<(String, String)> {
    let expr = pyast::parse_expression(text).ok()?;
    if let pyast::ExprKind::Compare {
        left,
        ops,
        comparators,
    } = &expr.kind
    {
        if ops.len() == 1 && ops[0] == pyast::CmpOp::Eq {
            return Some((
                pyast::unparse_expr(left),
                pyast::unparse_expr(&comparators[0]),
            ));
        }
    }
    None
}

fn grade_from_outcome(outcome: ExecutionOutcome) -> Grade {
    let (pass, class) = match outcome.status {
        ExecutionStatus::Ok => (true, ErrorClass::None),
        ExecutionStatus::AssertFail => (false, ErrorClass::Wrong),
        ExecutionStatus::Exception => (false, ErrorClass::Wrong),
        ExecutionStatus::SyntaxError => (false, ErrorClass::SyntaxError),
        ExecutionStatus::Timeout => (false, ErrorClass::Timeout),
    };
    Grade {
        pass,
        error_class: class,
        oracle_outcome: Some(outcome),
    }
}

/// Grade an output-prediction answer. The left side must normalize to
/// the instance's call (after undoing any renames); the assertion runs
/// against the vanilla code.
pub fn grade_output_prediction(
    instance: &TaskInstance,
    extraction: &Extraction,
    rename_map: Option<&RenameMap>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<Grade, ProtocolError> {
    if extraction.status != ExtractionStatus::Found {
        return Ok(Grade::fail(ErrorClass::Format));
    }
    let answer = reverse_map_text(extraction.answer_expr.as_ref().unwrap(), rename_map);
    if pyast::parse_expression(&answer).is_err() {
        return Ok(Grade::fail(ErrorClass::SyntaxError));
    }
    let Some((lhs, rhs)) = split_equality(&answer) else {
        return Ok(Grade::fail(ErrorClass::CallMismatch));
    };
    let expected_call = normalized_expr(&instance.call_expr).unwrap_or_default();
    if lhs != expected_call {
        return Ok(Grade::fail(ErrorClass::CallMismatch));
    }
    let assertion = format!("assert {} == {}", instance.call_expr, rhs);
    let outcome = oracle.assert_expr(&instance.code, &assertion, limits)?;
    Ok(grade_from_outcome(outcome))
}

/// Grade an input-prediction answer. Any input is accepted as long as
/// the right side equals the expected output under the oracle and the
/// assertion holds against the vanilla code.
pub fn grade_input_prediction(
    instance: &TaskInstance,
    extraction: &Extraction,
    rename_map: Option<&RenameMap>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<Grade, ProtocolError> {
    if extraction.status != ExtractionStatus::Found {
        return Ok(Grade::fail(ErrorClass::Format));
    }
    let answer = reverse_map_text(extraction.answer_expr.as_ref().unwrap(), rename_map);
    if pyast::parse_expression(&answer).is_err() {
        return Ok(Grade::fail(ErrorClass::SyntaxError));
    }
    let Some((lhs, rhs)) = split_equality(&answer) else {
        return Ok(Grade::fail(ErrorClass::CallMismatch));
    };
    // The predicted call must target the instance's function.
    match pyast::parse_expression(&lhs)
        .ok()
        .as_ref()
        .and_then(crate::corpus::callee_name)
    {
        Some(callee) if callee == instance.function_name => {}
        _ => return Ok(Grade::fail(ErrorClass::CallMismatch)),
    }
    // Right side must be oracle-equal to the expected output.
    let rhs_value = oracle.eval_literal(&rhs, limits)?;
    let expected_value = oracle.eval_literal(&instance.expected_output, limits)?;
    if rhs_value.status != ExecutionStatus::Ok
        || expected_value.status != ExecutionStatus::Ok
        || rhs_value.value_repr != expected_value.value_repr
    {
        return Ok(Grade::fail(ErrorClass::OutputLiteralMismatch));
    }
    let assertion = format!("assert {} == {}", lhs, rhs);
    let outcome = oracle.assert_expr(&instance.code, &assertion, limits)?;
    Ok(grade_from_outcome(outcome))
}

/// Grade one model response end to end: truncated or over-budget
/// responses are discarded as format failures before extraction.
pub fn grade_response(
    instance: &TaskInstance,
    response: &crate::gateway::ModelResponse,
    max_tokens: u32,
    rename_map: Option<&RenameMap>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<Grade, ProtocolError> {
    if response.truncated || response.completion_tokens > max_tokens as u64 {
        return Ok(Grade::fail(ErrorClass::Format));
    }
    let extraction = extract_answer(&response.text);
    match instance.task {
        TaskKind::OutputPrediction => {
            grade_output_prediction(instance, &extraction, rename_map, oracle, limits)
        }
        TaskKind::InputPrediction => {
            grade_input_prediction(instance, &extraction, rename_map, oracle, limits)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::demo_corpus;

    fn spec(task: TaskKind, mode: InferenceMode) -> PromptSpec {
        PromptSpec {
            task,
            mode,
            ignore_comments: false,
        }
    }

    #[test]
    fn direct_output_prompt_embeds_both_examples() {
        let corpus = demo_corpus();
        let inst = corpus.get("prompt_direct_1").unwrap();
        let prompt = build_prompt(
            inst,
            &Presentation {
                code: &inst.code,
                call_expr: &inst.call_expr,
                function_name: &inst.function_name,
            },
            &spec(TaskKind::OutputPrediction, InferenceMode::Direct),
        )
        .unwrap();
        assert!(prompt.contains("The output value for `f(17)` is 17"));
        assert!(prompt.contains("[ANSWER] f(\"x9j\") == \"x9ja\" [/ANSWER]"));
        assert!(prompt.contains("Do NOT output any extra information."));
        assert!(prompt.contains("Ensure the provided expression syntax is correct!"));
    }

    #[test]
    fn cot_output_prompt_has_thought_example() {
        let corpus = demo_corpus();
        let inst = corpus.get("prompt_direct_1").unwrap();
        let prompt = build_prompt(
            inst,
            &Presentation {
                code: &inst.code,
                call_expr: &inst.call_expr,
                function_name: &inst.function_name,
            },
            &spec(TaskKind::OutputPrediction, InferenceMode::Cot),
        )
        .unwrap();
        assert!(prompt.contains("[THOUGHT]"));
        assert!(prompt.contains("\"bhihia\""));
    }

    #[test]
    fn input_direct_prompt_has_list_example() {
        let corpus = demo_corpus();
        let inst = corpus.get("prompt_input_2").unwrap();
        let prompt = build_prompt(
            inst,
            &Presentation {
                code: &inst.code,
                call_expr: &inst.call_expr,
                function_name: &inst.function_name,
            },
            &spec(TaskKind::InputPrediction, InferenceMode::Direct),
        )
        .unwrap();
        assert!(prompt.contains("[ANSWER] f([\"mq\", \"px\", \"zy\"]) == 3 [/ANSWER]"));
        assert!(prompt.contains("There may be multiple answers, but you should only output one."));
    }

    #[test]
    fn ignore_comments_appends_sentence() {
        let corpus = demo_corpus();
        let inst = corpus.get("prompt_direct_1").unwrap();
        let mut s = spec(TaskKind::OutputPrediction, InferenceMode::Direct);
        s.ignore_comments = true;
        let prompt = build_prompt(
            inst,
            &Presentation {
                code: &inst.code,
                call_expr: &inst.call_expr,
                function_name: &inst.function_name,
            },
            &s,
        )
        .unwrap();
        assert!(prompt.trim_end().ends_with(IGNORE_COMMENTS_SENTENCE));
    }

    #[test]
    fn extraction_takes_last_block() {
        let e = extract_answer("junk [ANSWER] f(17) == 17 [/ANSWER]");
        assert_eq!(e.status, ExtractionStatus::Found);
        assert_eq!(e.answer_expr.as_deref(), Some("f(17) == 17"));
        let e = extract_answer("[ANSWER] a == 1 [/ANSWER] then [ANSWER] b == 2 [/ANSWER]");
        assert_eq!(e.answer_expr.as_deref(), Some("b == 2"));
    }

    #[test]
    fn extraction_handles_missing_and_malformed() {
        assert_eq!(extract_answer("no markers here").status, ExtractionStatus::Missing);
        assert_eq!(
            extract_answer("[ANSWER] dangling").status,
            ExtractionStatus::Malformed
        );
        assert_eq!(
            extract_answer("text [/ANSWER] stray").status,
            ExtractionStatus::Malformed
        );
    }

    #[test]
    fn extraction_keeps_empty_rhs_for_downstream_syntax_grading() {
        let e = extract_answer("[ANSWER] f(\"a\") ==  [/ANSWER]");
        assert_eq!(e.status, ExtractionStatus::Found);
        assert_eq!(e.answer_expr.as_deref(), Some("f(\"a\") =="));
    }

    #[test]
    fn thought_text_is_captured() {
        let e = extract_answer("[THOUGHT] step 1 [/THOUGHT] [ANSWER] f(1) == 1 [/ANSWER]");
        assert_eq!(e.thought_text.as_deref(), Some("step 1"));
    }
}

#[cfg(test)]
mod grading_tests {
    use super::*;
    use crate::corpus::demo_corpus;
    use crate::gateway::ModelResponse;
    use crate::oracle::OraclePool;

    fn response(text: &str, truncated: bool, completion_tokens: u64) -> ModelResponse {
        ModelResponse {
            text: text.to_string(),
            prompt_tokens: 1,
            completion_tokens,
            reasoning_tokens: None,
            latency: 0.0,
            truncated,
        }
    }

    #[test]
    fn over_budget_responses_are_discarded_as_format() {
        let pool = OraclePool::new(2).unwrap();
        let lim = ExecutionLimits::default();
        let corpus = demo_corpus();
        let inst = corpus.get("prompt_direct_1").unwrap();
        let good = "[ANSWER] f(17) == 17 [/ANSWER]";
        let grade =
            grade_response(inst, &response(good, false, 10), 200, None, &pool, &lim).unwrap();
        assert!(grade.pass);
        let grade =
            grade_response(inst, &response(good, true, 10), 200, None, &pool, &lim).unwrap();
        assert_eq!(grade.error_class, ErrorClass::Format);
        let grade =
            grade_response(inst, &response(good, false, 999), 200, None, &pool, &lim).unwrap();
        assert_eq!(grade.error_class, ErrorClass::Format);
    }

    #[test]
    fn grading_against_vanilla_equals_grading_against_perturbed() {
        // Spot check of the validator guarantee: for behavior-preserving
        // perturbations the assertion verdict is the same whichever form
        // executes it.
        let pool = OraclePool::new(2).unwrap();
        let lim = ExecutionLimits::default();
        let corpus = demo_corpus();
        let inst = corpus.get("lcb_36").unwrap();
        let van = crate::pyast::standardize(&inst.code).unwrap();
        let ren = crate::structural::rename_entities(&van, &inst.call_expr, 0).unwrap();
        for rhs in ["2", "3"] {
            let vanilla_verdict = pool
                .assert_expr(
                    &van.text,
                    &format!("assert {} == {}", inst.call_expr, rhs),
                    &lim,
                )
                .unwrap();
            let perturbed_verdict = pool
                .assert_expr(
                    &ren.source.text,
                    &format!("assert {} == {}", ren.rewritten_call.as_deref().unwrap(), rhs),
                    &lim,
                )
                .unwrap();
            assert_eq!(vanilla_verdict.status, perturbed_verdict.status);
        }
    }
}
