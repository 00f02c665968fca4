//! Stage orchestration: each stage reads durable artifacts from the run
//! directory and writes its own, so any stage can be re-run
//! independently and byte-identically given the same seeds and cassette.
//!
//! Layout of a run directory:
//!   vanilla.jsonl        standardized corpus
//!   perturbed/KIND.jsonl perturbed corpora with perturbation metadata
//!   validation.json      equivalence/dead-ness results
//!   responses.jsonl      raw model responses
//!   grades.jsonl         graded ledger rows
//!   report.csv/.txt      degradation tables
//!   stress.csv           density sweep table
//!   manifest.json        seeds and artifact hashes

use crate::analytics::{self, DensityRow, GradeLedger, LedgerRow};
use crate::corpus::{self, Corpus, TaskInstance, TaskKind};
use crate::gateway::{Cassette, CassetteMode, Gateway, ModelResponse, SamplingConfig};
use crate::oracle::{ExecutionLimits, OraclePool};
use crate::protocol::{self, InferenceMode, Presentation, PromptSpec};
use crate::pyast::{self, SourceText};
use crate::rng::derive_seed;
use crate::structural::{
    self, GarbageCounts, PerturbationKind, PerturbationResult, RenameMap,
};
use crate::textual::{self, HintGenerator, InjectionPolicy, MessageBank};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("corpus error: {0}")]
    Corpus(#[from] corpus::CorpusError),
    #[error("structural perturbation error: {0}")]
    Structural(#[from] structural::StructuralError),
    #[error("textual perturbation error: {0}")]
    Textual(#[from] textual::TextualError),
    #[error("oracle error: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("gateway error: {0}")]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error("protocol error: {0}")]
    Protocol(#[from] protocol::ProtocolError),
    #[error("analytics error: {0}")]
    Analytics(#[from] analytics::AnalyticsError),
    #[error("parse failure: {0}")]
    Parse(#[from] pyast::ParseError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad artifact {path}: {detail}")]
    BadArtifact { path: String, detail: String },
    #[error("{0} validation failures")]
    ValidationFailed(usize),
}

fn default_p() -> f64 {
    1.0
}
fn default_timeout() -> f64 {
    5.0
}
fn default_grading_timeout() -> f64 {
    10.0
}
fn default_jobs() -> usize {
    corpus::default_jobs()
}
fn default_kinds() -> Vec<PerturbationKind> {
    PerturbationKind::all_kinds().to_vec()
}
fn default_modes() -> Vec<InferenceMode> {
    vec![InferenceMode::Direct]
}
fn default_hint_generator() -> String {
    "offline".to_string()
}
fn default_cassette_mode() -> CassetteMode {
    CassetteMode::Off
}

/// Declarative run configuration; flags override plan fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunPlan {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<PerturbationKind>,
    #[serde(default)]
    pub seed: u64,
    /// Injection probability for MDC/MPS.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default = "default_modes")]
    pub modes: Vec<InferenceMode>,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub verify: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_grading_timeout")]
    pub grading_timeout: f64,
    #[serde(default)]
    pub counts: GarbageCountsPlan,
    #[serde(default)]
    pub bank: Option<PathBuf>,
    #[serde(default = "default_hint_generator")]
    pub hint_generator: String,
    #[serde(default)]
    pub cassette: Option<PathBuf>,
    #[serde(default = "default_cassette_mode")]
    pub cassette_mode: CassetteMode,
    #[serde(default)]
    pub ignore_comments: bool,
    #[serde(default)]
    pub max_tokens_override: Option<u32>,
    #[serde(default)]
    pub n_candidates_override: Option<u32>,
}

/// Serializable mirror of the garbage insertion counts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GarbageCountsPlan {
    pub globals: (usize, usize),
    pub dead_statements: (usize, usize),
    pub dead_functions: (usize, usize),
}

impl Default for GarbageCountsPlan {
    fn default() -> Self {
        let c = GarbageCounts::default();
        GarbageCountsPlan {
            globals: c.globals,
            dead_statements: c.dead_statements,
            dead_functions: c.dead_functions,
        }
    }
}

impl From<GarbageCountsPlan> for GarbageCounts {
    fn from(p: GarbageCountsPlan) -> Self {
        GarbageCounts {
            globals: p.globals,
            dead_statements: p.dead_statements,
            dead_functions: p.dead_functions,
        }
    }
}

impl RunPlan {
    pub fn new(corpus: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunPlan {
            corpus: corpus.into(),
            output_dir: output_dir.into(),
            kinds: default_kinds(),
            seed: 0,
            p: default_p(),
            models: Vec::new(),
            modes: default_modes(),
            limit: None,
            verify: false,
            jobs: default_jobs(),
            timeout: default_timeout(),
            grading_timeout: default_grading_timeout(),
            counts: GarbageCountsPlan::default(),
            bank: None,
            hint_generator: default_hint_generator(),
            cassette: None,
            cassette_mode: default_cassette_mode(),
            ignore_comments: false,
            max_tokens_override: None,
            n_candidates_override: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    fn exec_limits(&self) -> ExecutionLimits {
        ExecutionLimits {
            wall_timeout: self.timeout,
            ..Default::default()
        }
    }

    fn grading_limits(&self) -> ExecutionLimits {
        ExecutionLimits {
            wall_timeout: self.grading_timeout,
            ..Default::default()
        }
    }

    fn bank(&self) -> Result<MessageBank, PipelineError> {
        match &self.bank {
            Some(path) => Ok(MessageBank::load(path)?),
            None => Ok(MessageBank::bundled()),
        }
    }

    fn gateway(&self) -> Result<Gateway, PipelineError> {
        let cassette = match (&self.cassette, self.cassette_mode) {
            (Some(path), mode) if mode != CassetteMode::Off => {
                Some(Cassette::open(path, mode)?)
            }
            _ => None,
        };
        Ok(Gateway::new(cassette))
    }

    pub fn vanilla_path(&self) -> PathBuf {
        self.output_dir.join("vanilla.jsonl")
    }

    pub fn perturbed_path(&self, kind: PerturbationKind) -> PathBuf {
        self.output_dir.join("perturbed").join(format!("{}.jsonl", kind))
    }

    pub fn responses_path(&self) -> PathBuf {
        self.output_dir.join("responses.jsonl")
    }

    pub fn grades_path(&self) -> PathBuf {
        self.output_dir.join("grades.jsonl")
    }
}

/// Per-instance, per-kind perturbation metadata carried in the perturbed
/// corpus records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMeta {
    pub kind: PerturbationKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injected_spans: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rename_map: Option<RenameMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten_call: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedRecord {
    pub id: String,
    pub task: TaskKind,
    /// Presented (perturbed) source text.
    pub code: String,
    /// Presented entry-function name (renamed under REN/ALL).
    pub function_name: String,
    /// Presented call expression (rewritten under REN/ALL).
    pub call_expr: String,
    pub expected_output: String,
    pub perturbation: PerturbationMeta,
}

/// Standardize every instance into the vanilla form.
pub fn cmd_standardize(input: &Path, output: &Path) -> Result<usize, PipelineError> {
    let corpus = corpus::load_corpus(input, false, None)?;
    let mut out = String::new();
    for mut inst in corpus.instances {
        inst.code = pyast::standardize(&inst.code)
            .map_err(PipelineError::Parse)?
            .text;
        out.push_str(&serde_json::to_string(&inst).expect("instance serializes"));
        out.push('\n');
    }
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(output, &out)?;
    Ok(count_lines(&out))
}

fn count_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

fn load_vanilla(plan: &RunPlan) -> Result<Corpus, PipelineError> {
    let path = plan.vanilla_path();
    if !path.exists() {
        return Err(PipelineError::BadArtifact {
            path: path.display().to_string(),
            detail: "vanilla corpus missing; run the standardize stage first".into(),
        });
    }
    let mut corpus = corpus::load_corpus(&path, false, None)?;
    if let Some(limit) = plan.limit {
        corpus.instances.truncate(limit);
    }
    Ok(corpus)
}

/// Deterministic per-instance seed for a perturbation kind.
pub fn instance_seed(master: u64, kind: PerturbationKind, instance_id: &str) -> u64 {
    derive_seed(master, &format!("{}:{}", kind, instance_id))
}

/// Apply one perturbation kind to one vanilla instance.
#[allow(clippy::too_many_arguments)]
pub fn perturb_instance(
    instance: &TaskInstance,
    kind: PerturbationKind,
    seed: u64,
    p: f64,
    counts: &GarbageCounts,
    bank: &MessageBank,
    generator: &HintGenerator<'_>,
    oracle: &OraclePool,
    limits: &ExecutionLimits,
) -> Result<PerturbationResult, PipelineError> {
    let vanilla = SourceText::vanilla(instance.code.clone());
    let result = match kind {
        PerturbationKind::Van => PerturbationResult {
            source: vanilla.clone(),
            kind: PerturbationKind::Van,
            seed,
            rename_map: None,
            injected_spans: Vec::new(),
            rewritten_call: None,
            edits: Vec::new(),
        },
        PerturbationKind::Ren => structural::rename_entities(&vanilla, &instance.call_expr, seed)?,
        PerturbationKind::Rtf => structural::reformat_conditionals(&vanilla, seed)?,
        PerturbationKind::Gbc => structural::insert_garbage(&vanilla, seed, counts)?,
        PerturbationKind::All => {
            structural::aggregate_all(&vanilla, &instance.call_expr, seed, counts)?
        }
        PerturbationKind::Mdc => {
            let policy = InjectionPolicy::new(p, seed).map_err(PipelineError::Textual)?;
            textual::insert_misleading_comments(&vanilla, &policy, bank)?
        }
        PerturbationKind::Mps => {
            let policy = InjectionPolicy::new(p, seed).map_err(PipelineError::Textual)?;
            textual::insert_misleading_prints(&vanilla, &policy, bank)?
        }
        PerturbationKind::Mhc => {
            textual::perturb_mhc(instance, &vanilla, generator, oracle, limits, seed)?
        }
    };
    Ok(result)
}

fn presented_record(
    instance: &TaskInstance,
    result: &PerturbationResult,
) -> PerturbedRecord {
    let function_name = result
        .rename_map
        .as_ref()
        .and_then(|m| m.renamed_function(&instance.function_name))
        .unwrap_or(&instance.function_name)
        .to_string();
    let call_expr = result
        .rewritten_call
        .clone()
        .unwrap_or_else(|| instance.call_expr.clone());
    PerturbedRecord {
        id: instance.id.clone(),
        task: instance.task,
        code: result.source.text.clone(),
        function_name,
        call_expr,
        expected_output: instance.expected_output.clone(),
        perturbation: PerturbationMeta {
            kind: result.kind,
            seed: result.seed,
            injected_spans: result.injected_spans.clone(),
            rename_map: result.rename_map.clone(),
            rewritten_call: result.rewritten_call.clone(),
        },
    }
}

/// Generate perturbed corpora for every kind in the plan. Instances the
/// hint generator cannot make a verified-incorrect hint for are skipped
/// and reported.
pub fn cmd_perturb(plan: &RunPlan) -> Result<BTreeMap<PerturbationKind, usize>, PipelineError> {
    let corpus = load_vanilla(plan)?;
    let bank = plan.bank()?;
    let counts: GarbageCounts = plan.counts.into();
    let oracle = OraclePool::new(plan.jobs)?;
    let limits = plan.exec_limits();
    let gateway_holder;
    let generator = if let Some(model_id) = plan.hint_generator.strip_prefix("model:") {
        gateway_holder = plan.gateway()?;
        HintGenerator::Model {
            gateway: &gateway_holder,
            model_id: model_id.to_string(),
        }
    } else {
        HintGenerator::Offline
    };

    std::fs::create_dir_all(plan.output_dir.join("perturbed"))?;
    let mut written = BTreeMap::new();
    for &kind in &plan.kinds {
        let mut out = String::new();
        let mut count = 0usize;
        for instance in &corpus.instances {
            let seed = instance_seed(plan.seed, kind, &instance.id);
            let result = match perturb_instance(
                instance, kind, seed, plan.p, &counts, &bank, &generator, &oracle, &limits,
            ) {
                Ok(r) => r,
                Err(PipelineError::Textual(textual::TextualError::GenerationExhausted(id))) => {
                    log::warn!("{}: no incorrect hint found; instance skipped for MHC", id);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let record = presented_record(instance, &result);
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
            count += 1;
        }
        std::fs::write(plan.perturbed_path(kind), &out)?;
        written.insert(kind, count);
    }
    update_manifest(plan)?;
    Ok(written)
}

/// Kinds from the plan whose perturbed artifacts exist on disk.
pub fn kinds_available(plan: &RunPlan) -> Vec<PerturbationKind> {
    plan.kinds
        .iter()
        .copied()
        .filter(|&k| plan.perturbed_path(k).exists())
        .collect()
}

fn load_perturbed(
    plan: &RunPlan,
    kind: PerturbationKind,
) -> Result<Vec<PerturbedRecord>, PipelineError> {
    let path = plan.perturbed_path(kind);
    let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::BadArtifact {
        path: path.display().to_string(),
        detail: "perturbed corpus missing; run the perturb stage first".into(),
    })?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| PipelineError::BadArtifact {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub per_kind: BTreeMap<String, KindValidation>,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KindValidation {
    pub checked: usize,
    pub equivalent: usize,
    pub dead_checked: usize,
    pub dead_ok: usize,
    pub failed_ids: Vec<String>,
}

/// Execute every perturbed instance against its vanilla form; GBC/ALL
/// also get the dead-injection trace check.
pub fn cmd_validate(plan: &RunPlan) -> Result<ValidationReport, PipelineError> {
    let corpus = load_vanilla(plan)?;
    let oracle = OraclePool::new(plan.jobs)?;
    let limits = plan.exec_limits();
    let kinds = kinds_available(plan);
    if kinds.is_empty() {
        return Err(PipelineError::BadArtifact {
            path: plan.output_dir.join("perturbed").display().to_string(),
            detail: "no perturbed corpora on disk; run the perturb stage first".into(),
        });
    }
    let mut report = ValidationReport {
        per_kind: BTreeMap::new(),
        failures: 0,
    };
    for kind in kinds {
        if kind == PerturbationKind::Van {
            continue;
        }
        let records = load_perturbed(plan, kind)?;
        let entry = report.per_kind.entry(kind.to_string()).or_default();
        for record in &records {
            let Some(instance) = corpus.get(&record.id) else {
                continue;
            };
            entry.checked += 1;
            let equal = oracle.check_equivalence(
                &instance.code,
                &record.code,
                &instance.call_expr,
                &record.call_expr,
                &limits,
            )?;
            let mut ok = equal;
            if equal {
                entry.equivalent += 1;
            }
            if matches!(kind, PerturbationKind::Gbc | PerturbationKind::All) {
                entry.dead_checked += 1;
                let dead = oracle.check_dead_injection(
                    &record.code,
                    &record.call_expr,
                    &record.perturbation.injected_spans,
                    &limits,
                )?;
                if dead {
                    entry.dead_ok += 1;
                } else {
                    ok = false;
                }
            }
            if !ok {
                entry.failed_ids.push(record.id.clone());
                report.failures += 1;
            }
        }
    }
    std::fs::write(
        plan.output_dir.join("validation.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    update_manifest(plan)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub instance_id: String,
    pub kind: PerturbationKind,
    pub mode: InferenceMode,
    pub model_id: String,
    pub candidate_index: u32,
    pub request_hash: String,
    pub response: ModelResponse,
}

fn sampling_for(plan: &RunPlan, mode: InferenceMode) -> SamplingConfig {
    let mut config = mode.sampling();
    if let Some(m) = plan.max_tokens_override {
        config.max_tokens = m;
    }
    if let Some(n) = plan.n_candidates_override {
        config.n_candidates = n;
    }
    config
}

/// Issue every (model, mode, kind, instance) completion and write the
/// raw responses.
pub fn cmd_run(plan: &RunPlan) -> Result<usize, PipelineError> {
    let gateway = plan.gateway()?;
    let kinds = kinds_available(plan);
    if kinds.is_empty() {
        return Err(PipelineError::BadArtifact {
            path: plan.output_dir.join("perturbed").display().to_string(),
            detail: "no perturbed corpora on disk; run the perturb stage first".into(),
        });
    }
    let mut rows: Vec<ResponseRow> = Vec::new();
    for model_id in &plan.models {
        for &mode in &plan.modes {
            let config = sampling_for(plan, mode);
            for &kind in &kinds {
                let records = load_perturbed(plan, kind)?;
                for record in &records {
                    let spec = PromptSpec {
                        task: record.task,
                        mode,
                        ignore_comments: plan.ignore_comments,
                    };
                    let instance_view = TaskInstance {
                        id: record.id.clone(),
                        dataset: Default::default(),
                        task: record.task,
                        code: record.code.clone(),
                        function_name: record.function_name.clone(),
                        call_expr: record.call_expr.clone(),
                        expected_output: record.expected_output.clone(),
                        tags: Default::default(),
                    };
                    let prompt = protocol::build_prompt(
                        &instance_view,
                        &Presentation {
                            code: &record.code,
                            call_expr: &record.call_expr,
                            function_name: &record.function_name,
                        },
                        &spec,
                    )?;
                    let hash = crate::gateway::request_hash(model_id, &prompt, &config);
                    let responses = gateway.complete(model_id, &prompt, &config)?;
                    for (i, response) in responses.into_iter().enumerate() {
                        rows.push(ResponseRow {
                            instance_id: record.id.clone(),
                            kind,
                            mode,
                            model_id: model_id.clone(),
                            candidate_index: i as u32,
                            request_hash: hash.clone(),
                            response,
                        });
                    }
                }
            }
        }
    }
    let mut out = String::new();
    for row in &rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    std::fs::write(plan.responses_path(), &out)?;
    update_manifest(plan)?;
    Ok(rows.len())
}

/// Grade every recorded response against the vanilla code.
pub fn cmd_grade(plan: &RunPlan) -> Result<GradeLedger, PipelineError> {
    let corpus = load_vanilla(plan)?;
    let oracle = OraclePool::new(plan.jobs)?;
    let limits = plan.grading_limits();
    let text = std::fs::read_to_string(plan.responses_path()).map_err(|_| {
        PipelineError::BadArtifact {
            path: plan.responses_path().display().to_string(),
            detail: "responses missing; run the run stage first".into(),
        }
    })?;

    // Rename maps per (kind, instance) for reverse-mapping answers.
    let mut rename_maps: BTreeMap<(PerturbationKind, String), RenameMap> = BTreeMap::new();
    for kind in kinds_available(plan) {
        if let Ok(records) = load_perturbed(plan, kind) {
            for r in records {
                if let Some(map) = r.perturbation.rename_map {
                    rename_maps.insert((kind, r.id), map);
                }
            }
        }
    }

    let mut ledger = GradeLedger::default();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ResponseRow =
            serde_json::from_str(line).map_err(|e| PipelineError::BadArtifact {
                path: plan.responses_path().display().to_string(),
                detail: e.to_string(),
            })?;
        let Some(instance) = corpus.get(&row.instance_id) else {
            continue;
        };
        let config = sampling_for(plan, row.mode);
        let rename_map = rename_maps.get(&(row.kind, row.instance_id.clone()));
        let grade = protocol::grade_response(
            instance,
            &row.response,
            config.max_tokens,
            rename_map,
            &oracle,
            &limits,
        )?;
        ledger.push(LedgerRow {
            instance_id: row.instance_id,
            kind: row.kind,
            mode: row.mode,
            model_id: row.model_id,
            candidate_index: row.candidate_index,
            grade,
            prompt_tokens: row.response.prompt_tokens,
            completion_tokens: row.response.completion_tokens,
            reasoning_tokens: row.response.reasoning_tokens,
        });
    }
    std::fs::write(plan.grades_path(), ledger.to_jsonl())?;
    update_manifest(plan)?;
    Ok(ledger)
}

/// Aggregate the grade ledger into degradation tables.
pub fn cmd_report(
    plan: &RunPlan,
    weights: &BTreeMap<PerturbationKind, f64>,
) -> Result<Vec<analytics::ReportRow>, PipelineError> {
    let text = std::fs::read_to_string(plan.grades_path()).map_err(|_| {
        PipelineError::BadArtifact {
            path: plan.grades_path().display().to_string(),
            detail: "grade ledger missing; run the grade stage first".into(),
        }
    })?;
    let ledger = GradeLedger::from_jsonl(&text).map_err(|e| PipelineError::BadArtifact {
        path: plan.grades_path().display().to_string(),
        detail: e.to_string(),
    })?;
    let rows = analytics::degradation_report(&ledger, weights)?;
    std::fs::write(plan.output_dir.join("report.csv"), analytics::render_csv(&rows))?;
    std::fs::write(
        plan.output_dir.join("report.txt"),
        analytics::render_table(&rows),
    )?;
    update_manifest(plan)?;
    Ok(rows)
}

/// Density stress test: for each p, generate MDC corpora, run the
/// evaluation, and aggregate score plus reasoning-token usage.
pub fn cmd_stress(plan: &RunPlan, p_grid: &[f64]) -> Result<Vec<DensityRow>, PipelineError> {
    let base = plan.clone();
    let rows = analytics::density_sweep(p_grid, |p| -> Result<DensityRow, PipelineError> {
        let mut sub = base.clone();
        sub.p = p;
        sub.kinds = vec![PerturbationKind::Mdc];
        sub.output_dir = base.output_dir.join(format!("stress_p{:.2}", p));
        std::fs::create_dir_all(&sub.output_dir)?;
        // Derive per-p seeds so densities stay independent.
        sub.seed = derive_seed(base.seed, &format!("stress:{:.4}", p));
        std::fs::copy(base.vanilla_path(), sub.vanilla_path())?;
        cmd_perturb(&sub)?;
        cmd_run(&sub)?;
        let ledger = cmd_grade(&sub)?;
        let mut score_acc = 0.0;
        let mut groups = 0usize;
        let mut reasoning: Vec<f64> = Vec::new();
        for model in &sub.models {
            for &mode in &sub.modes {
                let g = analytics::Group {
                    kind: PerturbationKind::Mdc,
                    model_id: model.clone(),
                    mode,
                };
                score_acc += analytics::pass_at_1(&ledger, &g)?;
                groups += 1;
            }
        }
        for row in &ledger.rows {
            if let Some(r) = row.reasoning_tokens {
                reasoning.push(r as f64);
            }
        }
        Ok(DensityRow {
            p,
            pass_at_1: if groups > 0 { score_acc / groups as f64 } else { 0.0 },
            mean_reasoning_tokens: if reasoning.is_empty() {
                None
            } else {
                Some(reasoning.iter().sum::<f64>() / reasoning.len() as f64)
            },
        })
    })?;
    let mut csv = String::from("p,pass_at_1,mean_reasoning_tokens\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.4},{}\n",
            r.p,
            r.pass_at_1,
            r.mean_reasoning_tokens
                .map(|v| format!("{:.2}", v))
                .unwrap_or_default()
        ));
    }
    std::fs::write(plan.output_dir.join("stress.csv"), csv)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub tokens: usize,
    pub final_count: u64,
    pub coeffs: (f64, f64, f64),
    pub r_squared: f64,
}

/// Confusion-word trend over a reasoning trace plus its quadratic fit;
/// the cumulative series goes to a plot-data file next to the trace.
pub fn cmd_trace_analyze(
    trace_path: &Path,
    lexicon: &[String],
) -> Result<TraceAnalysis, PipelineError> {
    let trace = std::fs::read_to_string(trace_path)?;
    let series = analytics::confusion_trend(&trace, lexicon);
    let series_f: Vec<f64> = series.iter().map(|&c| c as f64).collect();
    let fit = analytics::quadratic_fit(&series_f)?;
    let mut plot = String::from("token_index,cumulative_count\n");
    for (i, c) in series.iter().enumerate() {
        plot.push_str(&format!("{},{}\n", i + 1, c));
    }
    std::fs::write(trace_path.with_extension("trend.csv"), plot)?;
    Ok(TraceAnalysis {
        tokens: series.len(),
        final_count: series.last().copied().unwrap_or(0),
        coeffs: fit.coeffs,
        r_squared: fit.r_squared,
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    kinds: Vec<String>,
    artifacts: BTreeMap<String, String>,
}

/// Record seeds and artifact hashes for reproducibility checks.
fn update_manifest(plan: &RunPlan) -> Result<(), PipelineError> {
    let mut manifest = Manifest {
        seed: plan.seed,
        kinds: plan.kinds.iter().map(|k| k.to_string()).collect(),
        artifacts: BTreeMap::new(),
    };
    let mut paths: Vec<PathBuf> = vec![
        plan.vanilla_path(),
        plan.responses_path(),
        plan.grades_path(),
        plan.output_dir.join("validation.json"),
        plan.output_dir.join("report.csv"),
        plan.output_dir.join("report.txt"),
    ];
    for kind in PerturbationKind::all_kinds() {
        paths.push(plan.perturbed_path(kind));
    }
    for path in paths {
        if path.exists() {
            let bytes = std::fs::read(&path)?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest = hasher.finalize();
            let hex: String = digest.iter().map(|b| format!("{:02x}", b)).collect();
            let rel = path
                .strip_prefix(&plan.output_dir)
                .unwrap_or(&path)
                .display()
                .to_string();
            manifest.artifacts.insert(rel, hex);
        }
    }
    std::fs::create_dir_all(&plan.output_dir)?;
    std::fs::write(
        plan.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}
