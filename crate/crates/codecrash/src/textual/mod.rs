//! Textual perturbations: misleading descriptive comments (MDC),
//! misleading print statements (MPS), and plausible-but-wrong hint
//! comments (MHC).

pub mod pyvalue;

use crate::corpus::{TaskInstance, TaskKind};
use crate::gateway::{Gateway, SamplingConfig};
use crate::oracle::{ExecutionLimits, ExecutionStatus, OracleError, OraclePool};
use crate::pyast::{self, Expr, ExprKind, Module, SourceText, Stmt, StmtKind};
use crate::rng::Rng;
use crate::structural::{EditRecord, PerturbationKind, PerturbationResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Data-structure operations recognized as their own node kind.
pub const DATA_STRUCTURE_OPS: &[&str] = &[
    "append", "extend", "insert", "remove", "pop", "sort", "reverse", "update", "add", "split",
    "join", "replace", "lower", "upper", "capitalize", "swapcase",
];

/// The eight eligible node kinds, bank-key spelling.
pub const NODE_KINDS: &[&str] = &[
    "function-def",
    "return",
    "for",
    "while",
    "if",
    "assignment",
    "aug-assignment",
    "data-structure-op",
];

const BUNDLED_BANK: &str = include_str!("../../data/message_bank.json");
const HINT_OUTPUT_PROMPT: &str = include_str!("../../data/prompts/hint_output.txt");
const HINT_INPUT_PROMPT: &str = include_str!("../../data/prompts/hint_input.txt");

#[derive(Debug, thiserror::Error)]
pub enum TextualError {
    #[error("parse failure: {0}")]
    Parse(#[from] pyast::ParseError),
    #[error("message bank has no templates for key '{0}'")]
    EmptyBankKey(String),
    #[error("injection probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("oracle error: {0}")]
    Oracle(#[from] OracleError),
    #[error("oracle could not decide hint ({0}); hint rejected")]
    OracleFailure(String),
    #[error("no incorrect candidate found for '{0}' after retries")]
    GenerationExhausted(String),
    #[error("output hint needs a return statement")]
    NoReturnStatement,
    #[error("invalid hint: {0}")]
    InvalidHint(String),
    #[error("hint model error: {0}")]
    Gateway(#[from] crate::gateway::GatewayError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageBank {
    pub node_messages: BTreeMap<String, Vec<String>>,
    pub op_messages: BTreeMap<String, Vec<String>>,
}

impl MessageBank {
    pub fn bundled() -> Self {
        let bank: MessageBank =
            serde_json::from_str(BUNDLED_BANK).expect("bundled bank is well-formed");
        bank.validate().expect("bundled bank is complete");
        bank
    }

    pub fn load(path: &Path) -> Result<Self, TextualError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            TextualError::InvalidHint(format!("cannot read bank {}: {}", path.display(), e))
        })?;
        let bank: MessageBank = serde_json::from_str(&text)
            .map_err(|e| TextualError::InvalidHint(format!("bad bank file: {}", e)))?;
        bank.validate()?;
        Ok(bank)
    }

    /// Every listed key must carry at least one template.
    pub fn validate(&self) -> Result<(), TextualError> {
        for key in NODE_KINDS {
            if self.node_messages.get(*key).is_none_or(|v| v.is_empty()) {
                return Err(TextualError::EmptyBankKey((*key).to_string()));
            }
        }
        for op in DATA_STRUCTURE_OPS {
            if self.op_messages.get(*op).is_none_or(|v| v.is_empty()) {
                return Err(TextualError::EmptyBankKey((*op).to_string()));
            }
        }
        Ok(())
    }

    /// Templates for an eligible node: operation key first, then the
    /// generic data-structure-op list, then the node-kind list.
    fn templates_for(&self, node: &EligibleNode) -> Result<&[String], TextualError> {
        if node.node_kind == "data-structure-op" {
            if let Some(v) = self.op_messages.get(&node.key) {
                if !v.is_empty() {
                    return Ok(v);
                }
            }
            if let Some(v) = self.node_messages.get("data-structure-op") {
                if !v.is_empty() {
                    return Ok(v);
                }
            }
            return Err(TextualError::EmptyBankKey(node.key.clone()));
        }
        self.node_messages
            .get(node.node_kind)
            .filter(|v| !v.is_empty())
            .map(|v| v.as_slice())
            .ok_or_else(|| TextualError::EmptyBankKey(node.node_kind.to_string()))
    }
}

/// Per-node injection probability and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionPolicy {
    pub p: f64,
    pub seed: u64,
}

impl InjectionPolicy {
    pub fn new(p: f64, seed: u64) -> Result<Self, TextualError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(TextualError::InvalidProbability(p));
        }
        Ok(InjectionPolicy { p, seed })
    }

    /// The default evaluation density saturates every eligible node.
    pub fn saturating(seed: u64) -> Self {
        InjectionPolicy { p: 1.0, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageAnchor {
    /// Trailing comment on the node's header line.
    Trailing,
    /// Whole-line comment immediately above (loops).
    LeadingAbove,
}

#[derive(Debug, Clone)]
pub struct EligibleNode {
    pub path: Vec<u32>,
    /// One of the eight node kinds.
    pub node_kind: &'static str,
    /// Bank key: the node kind, or the operation name for
    /// data-structure-op nodes.
    pub key: String,
    pub variable: Option<String>,
    pub function: Option<String>,
    pub anchor: MessageAnchor,
    pub is_elif_arm: bool,
}

/// Enumerate eligible nodes in document order.
pub fn eligible_nodes(module: &Module) -> Vec<EligibleNode> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    for (i, stmt) in module.body.iter().enumerate() {
        path.push(i as u32);
        walk(stmt, &mut path, None, false, &mut out);
        path.pop();
    }
    out
}

fn walk(
    stmt: &Stmt,
    path: &mut Vec<u32>,
    enclosing_fn: Option<&str>,
    is_elif_arm: bool,
    out: &mut Vec<EligibleNode>,
) {
    classify(stmt, path, enclosing_fn, is_elif_arm, out);
    match &stmt.kind {
        StmtKind::FunctionDef { name, body, .. } => {
            for (i, s) in body.iter().enumerate() {
                path.push(i as u32);
                walk(s, path, Some(name), false, out);
                path.pop();
            }
        }
        StmtKind::If { body, orelse, .. } => {
            for (i, s) in body.iter().enumerate() {
                path.push(i as u32);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
            }
            let elif_chain = orelse.len() == 1 && matches!(orelse[0].kind, StmtKind::If { .. });
            for (i, s) in orelse.iter().enumerate() {
                path.push((body.len() + i) as u32);
                walk(s, path, enclosing_fn, elif_chain, out);
                path.pop();
            }
        }
        StmtKind::For { body, orelse, .. } | StmtKind::While { body, orelse, .. } => {
            for (i, s) in body.iter().enumerate() {
                path.push(i as u32);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
            }
            for (i, s) in orelse.iter().enumerate() {
                path.push((body.len() + i) as u32);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
            }
        }
        StmtKind::With { body, .. } => {
            for (i, s) in body.iter().enumerate() {
                path.push(i as u32);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
            }
        }
        StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        } => {
            let mut offset = 0u32;
            for s in body.iter() {
                path.push(offset);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
                offset += 1;
            }
            for h in handlers {
                for s in &h.body {
                    path.push(offset);
                    walk(s, path, enclosing_fn, false, out);
                    path.pop();
                    offset += 1;
                }
            }
            for s in orelse.iter().chain(finalbody.iter()) {
                path.push(offset);
                walk(s, path, enclosing_fn, false, out);
                path.pop();
                offset += 1;
            }
        }
        _ => {}
    }
}

fn classify(
    stmt: &Stmt,
    path: &[u32],
    enclosing_fn: Option<&str>,
    is_elif_arm: bool,
    out: &mut Vec<EligibleNode>,
) {
    let function = enclosing_fn.map(|s| s.to_string());
    let push = |out: &mut Vec<EligibleNode>,
                node_kind: &'static str,
                key: String,
                variable: Option<String>,
                function: Option<String>,
                anchor: MessageAnchor| {
        out.push(EligibleNode {
            path: path.to_vec(),
            node_kind,
            key,
            variable,
            function,
            anchor,
            is_elif_arm,
        });
    };
    match &stmt.kind {
        StmtKind::FunctionDef { name, params, .. } => {
            let variable = params.names().first().map(|s| s.to_string());
            push(
                out,
                "function-def",
                "function-def".into(),
                variable,
                Some(name.clone()),
                MessageAnchor::Trailing,
            );
        }
        StmtKind::Return(value) => {
            let variable = value.as_ref().and_then(first_name);
            push(
                out,
                "return",
                "return".into(),
                variable,
                function,
                MessageAnchor::Trailing,
            );
        }
        StmtKind::For { target, .. } => {
            push(
                out,
                "for",
                "for".into(),
                first_name(target),
                function,
                MessageAnchor::LeadingAbove,
            );
        }
        StmtKind::While { test, .. } => {
            push(
                out,
                "while",
                "while".into(),
                first_name(test),
                function,
                MessageAnchor::LeadingAbove,
            );
        }
        StmtKind::If { test, .. } => {
            push(
                out,
                "if",
                "if".into(),
                first_name(test),
                function,
                MessageAnchor::Trailing,
            );
        }
        StmtKind::Expr(e) => {
            if let Some((op, receiver)) = find_ds_op(e) {
                push(
                    out,
                    "data-structure-op",
                    op,
                    Some(receiver),
                    function,
                    MessageAnchor::Trailing,
                );
            }
        }
        StmtKind::Assign { targets, value } => {
            if let Some((op, receiver)) = find_ds_op(value) {
                push(
                    out,
                    "data-structure-op",
                    op,
                    Some(receiver),
                    function,
                    MessageAnchor::Trailing,
                );
                return;
            }
            // Variable assignments need a plain-name target.
            if let Some(name) = targets.iter().find_map(first_plain_target) {
                push(
                    out,
                    "assignment",
                    "assignment".into(),
                    Some(name),
                    function,
                    MessageAnchor::Trailing,
                );
            }
        }
        StmtKind::AnnAssign {
            target,
            value: Some(value),
            ..
        } => {
            if let Some((op, receiver)) = find_ds_op(value) {
                push(
                    out,
                    "data-structure-op",
                    op,
                    Some(receiver),
                    function,
                    MessageAnchor::Trailing,
                );
                return;
            }
            if let Some(name) = first_plain_target(target) {
                push(
                    out,
                    "assignment",
                    "assignment".into(),
                    Some(name),
                    function,
                    MessageAnchor::Trailing,
                );
            }
        }
        StmtKind::AugAssign { target, value, .. } => {
            if let Some((op, receiver)) = find_ds_op(value) {
                push(
                    out,
                    "data-structure-op",
                    op,
                    Some(receiver),
                    function,
                    MessageAnchor::Trailing,
                );
                return;
            }
            if let Some(name) = first_plain_target(target) {
                push(
                    out,
                    "aug-assignment",
                    "aug-assignment".into(),
                    Some(name),
                    function,
                    MessageAnchor::Trailing,
                );
            }
        }
        _ => {}
    }
}

fn first_name(expr: &Expr) -> Option<String> {
    if let ExprKind::Name(n) = &expr.kind {
        return Some(n.clone());
    }
    for c in pyast::expr_children(expr) {
        if let Some(n) = first_name(c) {
            return Some(n);
        }
    }
    None
}

fn first_plain_target(target: &Expr) -> Option<String> {
    match &target.kind {
        ExprKind::Name(n) => Some(n.clone()),
        ExprKind::Tuple(elts) | ExprKind::List(elts) => elts.iter().find_map(first_plain_target),
        ExprKind::Starred(inner) => first_plain_target(inner),
        _ => None,
    }
}

/// First data-structure method call in an expression, document order:
/// (operation name, receiver text).
fn find_ds_op(expr: &Expr) -> Option<(String, String)> {
    if let ExprKind::Call { func, .. } = &expr.kind {
        if let ExprKind::Attribute { value, attr } = &func.kind {
            if DATA_STRUCTURE_OPS.contains(&attr.as_str()) {
                return Some((attr.clone(), pyast::unparse_expr(value)));
            }
        }
    }
    for c in pyast::expr_children(expr) {
        if let Some(hit) = find_ds_op(c) {
            return Some(hit);
        }
    }
    None
}

fn instantiate_message(template: &str, node: &EligibleNode) -> String {
    let mut msg = template.to_string();
    if let Some(v) = &node.variable {
        msg = msg.replace("{variable}", v);
    }
    if let Some(f) = &node.function {
        msg = msg.replace("{function}", f);
    }
    msg
}

/// Templates whose placeholders the node can satisfy.
fn usable_templates<'a>(templates: &'a [String], node: &EligibleNode) -> Vec<&'a String> {
    templates
        .iter()
        .filter(|t| {
            (!t.contains("{variable}") || node.variable.is_some())
                && (!t.contains("{function}") || node.function.is_some())
        })
        .collect()
}

struct Draw {
    node: EligibleNode,
    message: String,
}

/// Document-order Bernoulli(p) draws over the eligible nodes.
fn draw_messages(
    module: &Module,
    policy: &InjectionPolicy,
    bank: &MessageBank,
    label: &str,
) -> Result<Vec<Draw>, TextualError> {
    let mut rng = Rng::derive(policy.seed, label);
    let mut draws = Vec::new();
    for node in eligible_nodes(module) {
        if !rng.bernoulli(policy.p) {
            continue;
        }
        let templates = bank.templates_for(&node)?;
        let usable = usable_templates(templates, &node);
        if usable.is_empty() {
            return Err(TextualError::EmptyBankKey(node.key.clone()));
        }
        let template = usable[rng.below(usable.len())];
        let message = instantiate_message(template, &node);
        draws.push(Draw { node, message });
    }
    Ok(draws)
}

/// Walk to the block holding the statement addressed by `path`.
fn locate_block_mut<'a>(module: &'a mut Module, path: &[u32]) -> (&'a mut Vec<Stmt>, usize) {
    let mut block: &'a mut Vec<Stmt> = &mut module.body;
    let mut idx = path[0] as usize;
    for &comp in &path[1..] {
        let stmt = &mut block[idx];
        let (b, i) = child_block_mut(stmt, comp as usize);
        block = b;
        idx = i;
    }
    (block, idx)
}

fn child_block_mut(stmt: &mut Stmt, flat: usize) -> (&mut Vec<Stmt>, usize) {
    match &mut stmt.kind {
        StmtKind::FunctionDef { body, .. } | StmtKind::With { body, .. } => (body, flat),
        StmtKind::For { body, orelse, .. }
        | StmtKind::While { body, orelse, .. }
        | StmtKind::If { body, orelse, .. } => {
            if flat < body.len() {
                (body, flat)
            } else {
                (orelse, flat - body.len())
            }
        }
        StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        } => {
            let mut f = flat;
            if f < body.len() {
                return (body, f);
            }
            f -= body.len();
            for h in handlers {
                if f < h.body.len() {
                    return (&mut h.body, f);
                }
                f -= h.body.len();
            }
            if f < orelse.len() {
                return (orelse, f);
            }
            f -= orelse.len();
            (finalbody, f)
        }
        _ => unreachable!("path descends through a block statement"),
    }
}

/// Misleading descriptive comments: an independent Bernoulli(p) draw per
/// eligible node; successes attach a bank message as a trailing comment
/// on the node's header line, or a whole-line comment immediately above
/// for loops. p = 0 reproduces the vanilla text byte for byte.
pub fn insert_misleading_comments(
    vanilla: &SourceText,
    policy: &InjectionPolicy,
    bank: &MessageBank,
) -> Result<PerturbationResult, TextualError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let draws = draw_messages(&module, policy, bank, "mdc")?;
    if draws.is_empty() {
        return Ok(PerturbationResult {
            source: SourceText::perturbed(vanilla.text.clone()),
            kind: PerturbationKind::Mdc,
            seed: policy.seed,
            rename_map: None,
            injected_spans: Vec::new(),
            rewritten_call: None,
            edits: Vec::new(),
        });
    }
    let mut edits = Vec::new();
    for draw in &draws {
        let (block, idx) = locate_block_mut(&mut module, &draw.node.path);
        match draw.node.anchor {
            MessageAnchor::Trailing => block[idx].trailing_comment = Some(draw.message.clone()),
            MessageAnchor::LeadingAbove => block[idx].leading_comments.push(draw.message.clone()),
        }
        edits.push(EditRecord {
            op: format!("mdc:{}", draw.node.node_kind),
            detail: draw.message.clone(),
        });
    }
    let (text, span_list) = pyast::unparse_with_spans(&module);
    let span_map: std::collections::HashMap<Vec<u32>, pyast::Span> =
        span_list.into_iter().collect();
    let mut injected = Vec::new();
    for draw in &draws {
        if let Some(span) = span_map.get(&draw.node.path) {
            let line = match draw.node.anchor {
                MessageAnchor::Trailing => span.start.line,
                MessageAnchor::LeadingAbove => span.start.line.saturating_sub(1),
            };
            injected.push((line, line));
        }
    }
    injected.sort_unstable();
    Ok(PerturbationResult {
        source: SourceText::perturbed(text),
        kind: PerturbationKind::Mdc,
        seed: policy.seed,
        rename_map: None,
        injected_spans: injected,
        rewritten_call: None,
        edits,
    })
}

/// Misleading print statements: same node selection as MDC; messages are
/// injected as print calls immediately before the selected statement.
/// Function definitions (and elif arms, which have no before-slot) get
/// the print as the first statement of their body.
pub fn insert_misleading_prints(
    vanilla: &SourceText,
    policy: &InjectionPolicy,
    bank: &MessageBank,
) -> Result<PerturbationResult, TextualError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let mut draws = draw_messages(&module, policy, bank, "mps")?;
    if draws.is_empty() {
        return Ok(PerturbationResult {
            source: SourceText::perturbed(vanilla.text.clone()),
            kind: PerturbationKind::Mps,
            seed: policy.seed,
            rename_map: None,
            injected_spans: Vec::new(),
            rewritten_call: None,
            edits: Vec::new(),
        });
    }
    // Apply bottom-up so earlier insertions cannot shift later paths.
    draws.sort_by(|a, b| b.node.path.cmp(&a.node.path));
    let mut edits = Vec::new();
    for draw in &draws {
        let print_stmt = Stmt::synthetic(StmtKind::Expr(Expr::call(
            Expr::name("print"),
            vec![Expr::string(&draw.message)],
        )));
        let inside_body =
            draw.node.node_kind == "function-def" || (draw.node.node_kind == "if" && draw.node.is_elif_arm);
        if inside_body {
            let (block, idx) = locate_block_mut(&mut module, &draw.node.path);
            match &mut block[idx].kind {
                StmtKind::FunctionDef { body, .. } | StmtKind::If { body, .. } => {
                    body.insert(0, print_stmt);
                }
                _ => unreachable!(),
            }
        } else {
            let (block, idx) = locate_block_mut(&mut module, &draw.node.path);
            block.insert(idx, print_stmt);
        }
        edits.push(EditRecord {
            op: format!("mps:{}", draw.node.node_kind),
            detail: draw.message.clone(),
        });
    }
    edits.reverse(); // report in document order
    let (text, spans) = crate::structural::render_with_synthetic_spans(&module);
    Ok(PerturbationResult {
        source: SourceText::perturbed(text),
        kind: PerturbationKind::Mps,
        seed: policy.seed,
        rename_map: None,
        injected_spans: spans,
        rewritten_call: None,
        edits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HintKind {
    OutputHint,
    InputHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HintAnchor {
    ReturnLine,
    DefLine,
}

/// A misleading hint comment, carrying the incorrect literal (output
/// hints) or the incorrect call expression (input hints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintSpec {
    pub kind: HintKind,
    pub text: String,
    pub anchor: HintAnchor,
    pub wrong_literal: String,
}

/// `# The return value is {wrong_literal}` on the last return line.
/// Callers must pass the spec through [`verify_hint`] before use.
pub fn make_output_hint(_instance: &TaskInstance, wrong_literal: &str) -> HintSpec {
    HintSpec {
        kind: HintKind::OutputHint,
        text: format!("The return value is {}", wrong_literal),
        anchor: HintAnchor::ReturnLine,
        wrong_literal: wrong_literal.to_string(),
    }
}

/// `# The function call is {wrong_call}` on the entry def line.
pub fn make_input_hint(
    instance: &TaskInstance,
    wrong_call: &str,
) -> Result<HintSpec, TextualError> {
    let expr = pyast::parse_expression(wrong_call)?;
    match crate::corpus::callee_name(&expr) {
        Some(callee) if callee == instance.function_name => {}
        _ => {
            return Err(TextualError::InvalidHint(format!(
                "wrong call '{}' does not call '{}'",
                wrong_call, instance.function_name
            )))
        }
    }
    Ok(HintSpec {
        kind: HintKind::InputHint,
        text: format!("The function call is {}", wrong_call),
        anchor: HintAnchor::DefLine,
        wrong_literal: wrong_call.to_string(),
    })
}

/// True iff the hinted assertion is incorrect under the oracle: the
/// assertion evaluates false or raises. Timeouts and syntax errors
/// reject the hint conservatively.
pub fn verify_hint(
    instance: &TaskInstance,
    hint: &HintSpec,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<bool, TextualError> {
    let assertion = match hint.kind {
        HintKind::OutputHint => format!("assert {} == {}", instance.call_expr, hint.wrong_literal),
        HintKind::InputHint => format!("assert {} == {}", hint.wrong_literal, instance.expected_output),
    };
    let outcome = oracle.assert_expr(&instance.code, &assertion, limits)?;
    match outcome.status {
        ExecutionStatus::AssertFail | ExecutionStatus::Exception => Ok(true),
        ExecutionStatus::Ok => Ok(false),
        ExecutionStatus::Timeout => Err(TextualError::OracleFailure("timeout".into())),
        ExecutionStatus::SyntaxError => Err(TextualError::OracleFailure("syntax error".into())),
    }
}

/// Attach a verified hint as a comment; code semantics are untouched.
pub fn attach_hint(
    vanilla: &SourceText,
    hint: &HintSpec,
) -> Result<PerturbationResult, TextualError> {
    let mut module = pyast::parse(&vanilla.text)?;
    // The entry function is the last top-level definition.
    let def_index = module
        .body
        .iter()
        .rposition(|s| matches!(s.kind, StmtKind::FunctionDef { .. }))
        .ok_or(TextualError::NoReturnStatement)?;
    let hinted_path: Vec<u32> = match hint.anchor {
        HintAnchor::DefLine => {
            module.body[def_index].trailing_comment = Some(hint.text.clone());
            vec![def_index as u32]
        }
        HintAnchor::ReturnLine => {
            let mut path = vec![def_index as u32];
            let found = last_return_path(&module.body[def_index], &mut path);
            if !found {
                return Err(TextualError::NoReturnStatement);
            }
            let (block, idx) = locate_block_mut(&mut module, &path);
            block[idx].trailing_comment = Some(hint.text.clone());
            path
        }
    };
    let (text, span_list) = pyast::unparse_with_spans(&module);
    let span_map: std::collections::HashMap<Vec<u32>, pyast::Span> =
        span_list.into_iter().collect();
    let line = span_map
        .get(&hinted_path)
        .map(|s| s.start.line)
        .unwrap_or(1);
    Ok(PerturbationResult {
        source: SourceText::perturbed(text),
        kind: PerturbationKind::Mhc,
        seed: 0,
        rename_map: None,
        injected_spans: vec![(line, line)],
        rewritten_call: None,
        edits: vec![EditRecord {
            op: "mhc".to_string(),
            detail: hint.text.clone(),
        }],
    })
}

/// Path of the last return statement (document order) within a
/// statement's subtree; returns false when there is none.
fn last_return_path(stmt: &Stmt, path: &mut Vec<u32>) -> bool {
    let children = pyast::stmt_child_stmts(stmt);
    for (i, child) in children.iter().enumerate().rev() {
        path.push(i as u32);
        if matches!(child.kind, StmtKind::Return(_)) {
            return true;
        }
        if last_return_path(child, path) {
            return true;
        }
        path.pop();
    }
    false
}

/// Hint candidate source: offline deterministic mutation, or a model
/// prompted with the published hint-rewriting instructions.
pub enum HintGenerator<'a> {
    Offline,
    Model {
        gateway: &'a Gateway,
        model_id: String,
    },
}

/// Generate a verified-incorrect hint for the instance.
///
/// Offline mode mutates the expected output literal (output prediction)
/// or the call arguments (input prediction; escalating to type swaps and
/// arity changes), retrying up to eight times per side until
/// [`verify_hint`] accepts. Output-side exhaustion falls back to the
/// input side before giving up.
pub fn generate_wrong_literal(
    instance: &TaskInstance,
    generator: &HintGenerator<'_>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
    seed: u64,
) -> Result<HintSpec, TextualError> {
    match generator {
        HintGenerator::Offline => generate_offline(instance, oracle, limits, seed),
        HintGenerator::Model { gateway, model_id } => {
            generate_model(instance, gateway, model_id, oracle, limits)
        }
    }
}

const MAX_ATTEMPTS: u64 = 8;

fn generate_offline(
    instance: &TaskInstance,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
    seed: u64,
) -> Result<HintSpec, TextualError> {
    if instance.task == TaskKind::OutputPrediction {
        if let Some(lit) = pyvalue::parse_literal_text(&instance.expected_output) {
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = Rng::derive(seed, &format!("mhc-out-{}", attempt));
                let candidate = pyvalue::mutate(&lit, &mut rng);
                let wrong = pyvalue::render(&candidate);
                let hint = make_output_hint(instance, &wrong);
                match verify_hint(instance, &hint, oracle, limits) {
                    Ok(true) => return Ok(hint),
                    Ok(false) => continue,
                    Err(TextualError::OracleFailure(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    // Input side: mutate the call arguments.
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = Rng::derive(seed, &format!("mhc-in-{}", attempt));
        let Some(wrong_call) = mutate_call(&instance.call_expr, attempt, &mut rng) else {
            continue;
        };
        if wrong_call == instance.call_expr {
            continue;
        }
        let hint = make_input_hint(instance, &wrong_call)?;
        match verify_hint(instance, &hint, oracle, limits) {
            Ok(true) => return Ok(hint),
            Ok(false) => continue,
            Err(TextualError::OracleFailure(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(TextualError::GenerationExhausted(instance.id.clone()))
}

/// Mutate one argument of a call. Early attempts change literal values;
/// later attempts escalate to type swaps and arity changes, which force
/// failure even for constant functions.
fn mutate_call(call: &str, attempt: u64, rng: &mut Rng) -> Option<String> {
    let expr = pyast::parse_expression(call).ok()?;
    let ExprKind::Call {
        func,
        mut args,
        mut keywords,
    } = expr.kind
    else {
        return None;
    };

    let mut literal_slots: Vec<(bool, usize)> = Vec::new(); // (is_keyword, index)
    for (i, a) in args.iter().enumerate() {
        if pyvalue::parse_literal(a).is_some() {
            literal_slots.push((false, i));
        }
    }
    for (i, k) in keywords.iter().enumerate() {
        if pyvalue::parse_literal(&k.value).is_some() {
            literal_slots.push((true, i));
        }
    }

    if attempt < 4 {
        // Value-level mutation.
        if literal_slots.is_empty() {
            return None;
        }
        let (is_kw, idx) = literal_slots[rng.below(literal_slots.len())];
        let slot = if is_kw { &mut keywords[idx].value } else { &mut args[idx] };
        let lit = pyvalue::parse_literal(slot)?;
        let mutated = pyvalue::mutate(&lit, rng);
        *slot = pyast::parse_expression(&pyvalue::render(&mutated)).ok()?;
    } else {
        // Escalation: type swap, argument addition/removal, order swap.
        let mut options: Vec<u32> = vec![1]; // add argument always possible
        if !literal_slots.is_empty() {
            options.push(0);
        }
        if !args.is_empty() || !keywords.is_empty() {
            options.push(2);
        }
        if args.len() >= 2 {
            options.push(3);
        }
        match options[rng.below(options.len())] {
            0 => {
                let (is_kw, idx) = literal_slots[rng.below(literal_slots.len())];
                let slot = if is_kw { &mut keywords[idx].value } else { &mut args[idx] };
                let lit = pyvalue::parse_literal(slot)?;
                let swapped = pyvalue::type_swap(&lit);
                *slot = pyast::parse_expression(&pyvalue::render(&swapped)).ok()?;
            }
            1 => args.push(Expr::number(&rng.range_inclusive(0, 9).to_string())),
            2 => {
                if args.is_empty() {
                    keywords.pop();
                } else {
                    args.pop();
                }
            }
            _ => args.swap(0, 1),
        }
    }

    let rebuilt = Expr::new(ExprKind::Call {
        func,
        args,
        keywords,
    });
    Some(pyast::unparse_expr(&rebuilt))
}

fn generate_model(
    instance: &TaskInstance,
    gateway: &Gateway,
    model_id: &str,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<HintSpec, TextualError> {
    let (template, modifies_output) = match instance.task {
        TaskKind::OutputPrediction => (HINT_OUTPUT_PROMPT, true),
        TaskKind::InputPrediction => (HINT_INPUT_PROMPT, false),
    };
    let prompt = template
        .replace("{code}", &instance.code)
        .replace("{expression}", &instance.canonical_assertion())
        .replace("{programming_language}", "python");
    let config = SamplingConfig {
        max_tokens: 2000,
        ..SamplingConfig::direct()
    };
    let responses = gateway.complete(model_id, &prompt, &config)?;
    for response in &responses {
        let Some(block) = crate::protocol::extract_last_block(&response.text, "[EXPRESSION]", "[/EXPRESSION]")
        else {
            continue;
        };
        let Some(assertion) = block.trim().strip_prefix("assert ") else {
            continue;
        };
        let Ok(expr) = pyast::parse_expression(assertion.trim()) else {
            continue;
        };
        let ExprKind::Compare {
            left,
            ops,
            comparators,
        } = &expr.kind
        else {
            continue;
        };
        if ops.len() != 1 || ops[0] != pyast::CmpOp::Eq {
            continue;
        }
        let hint = if modifies_output {
            // The call must stay intact; the right side is the wrong value.
            let lhs = pyast::unparse_expr(left);
            let original = pyast::parse_expression(&instance.call_expr)
                .map(|e| pyast::unparse_expr(&e))
                .unwrap_or_default();
            if lhs != original {
                continue;
            }
            make_output_hint(instance, &pyast::unparse_expr(&comparators[0]))
        } else {
            match make_input_hint(instance, &pyast::unparse_expr(left)) {
                Ok(h) => h,
                Err(_) => continue,
            }
        };
        if verify_hint(instance, &hint, oracle, limits).unwrap_or(false) {
            return Ok(hint);
        }
    }
    Err(TextualError::GenerationExhausted(instance.id.clone()))
}

/// Full MHC pipeline step: generate a verified hint and attach it.
pub fn perturb_mhc(
    instance: &TaskInstance,
    vanilla: &SourceText,
    generator: &HintGenerator<'_>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
    seed: u64,
) -> Result<PerturbationResult, TextualError> {
    let hint = generate_wrong_literal(instance, generator, oracle, limits, seed)?;
    let mut result = attach_hint(vanilla, &hint)?;
    result.seed = seed;
    Ok(result)
}

#[cfg(test)]
mod tests;
