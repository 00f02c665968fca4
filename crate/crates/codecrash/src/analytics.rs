//! Pass@1 aggregation, degradation metrics, weighted robustness, density
//! sweeps, and confusion-trend fits.

use crate::protocol::{ErrorClass, Grade, InferenceMode};
use crate::structural::PerturbationKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalyticsError {
    #[error("no ledger rows for the requested group")]
    EmptyGroup,
    #[error("relative degradation undefined for a zero vanilla score")]
    ZeroBaseline,
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("series is degenerate (fewer than 3 points or constant)")]
    DegenerateSeries,
}

/// One graded candidate response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub instance_id: String,
    pub kind: PerturbationKind,
    pub mode: InferenceMode,
    pub model_id: String,
    pub candidate_index: u32,
    pub grade: Grade,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradeLedger {
    pub rows: Vec<LedgerRow>,
}

impl GradeLedger {
    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut rows = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(line)?);
        }
        Ok(GradeLedger { rows })
    }

    /// Keys are unique per (instance, kind, mode, model, candidate).
    pub fn keys_unique(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.rows.iter().all(|r| {
            seen.insert((
                r.instance_id.clone(),
                r.kind,
                r.mode,
                r.model_id.clone(),
                r.candidate_index,
            ))
        })
    }
}

/// Group selector for aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Group {
    pub kind: PerturbationKind,
    pub model_id: String,
    pub mode: InferenceMode,
}

/// Pass@1 for a group: per instance, the fraction of its candidates that
/// pass; the score is the mean over instances times 100.
pub fn pass_at_1(ledger: &GradeLedger, group: &Group) -> Result<f64, AnalyticsError> {
    let mut per_instance: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for row in &ledger.rows {
        if row.kind == group.kind && row.mode == group.mode && row.model_id == group.model_id {
            let slot = per_instance.entry(&row.instance_id).or_insert((0, 0));
            slot.1 += 1;
            if row.grade.pass {
                slot.0 += 1;
            }
        }
    }
    if per_instance.is_empty() {
        return Err(AnalyticsError::EmptyGroup);
    }
    let sum: f64 = per_instance
        .values()
        .map(|(passed, total)| *passed as f64 / *total as f64)
        .sum();
    Ok(sum / per_instance.len() as f64 * 100.0)
}

/// Absolute (percentage points) and relative (percent) degradation.
pub fn degradation(
    vanilla_score: f64,
    perturbed_score: f64,
) -> (f64, Result<f64, AnalyticsError>) {
    let absolute = perturbed_score - vanilla_score;
    let relative = if vanilla_score == 0.0 {
        Err(AnalyticsError::ZeroBaseline)
    } else {
        Ok(absolute / vanilla_score * 100.0)
    };
    (absolute, relative)
}

/// The published weighting: 1/2 ALL, 1/8 MDC, 1/8 MPS, 1/4 MHC.
pub fn paper_weights() -> BTreeMap<PerturbationKind, f64> {
    BTreeMap::from([
        (PerturbationKind::All, 0.5),
        (PerturbationKind::Mdc, 0.125),
        (PerturbationKind::Mps, 0.125),
        (PerturbationKind::Mhc, 0.25),
    ])
}

/// Uniform weighting over the same four kinds.
pub fn uniform_weights() -> BTreeMap<PerturbationKind, f64> {
    BTreeMap::from([
        (PerturbationKind::All, 0.25),
        (PerturbationKind::Mdc, 0.25),
        (PerturbationKind::Mps, 0.25),
        (PerturbationKind::Mhc, 0.25),
    ])
}

/// Weighted mean of relative degradations.
pub fn weighted_robustness(
    relatives: &BTreeMap<PerturbationKind, f64>,
    weights: &BTreeMap<PerturbationKind, f64>,
) -> Result<f64, AnalyticsError> {
    let total: f64 = weights.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(AnalyticsError::WeightMismatch(format!(
            "weights sum to {}, not 1",
            total
        )));
    }
    let mut acc = 0.0;
    for (kind, w) in weights {
        let rel = relatives.get(kind).ok_or_else(|| {
            AnalyticsError::WeightMismatch(format!("no relative degradation for {}", kind))
        })?;
        acc += w * rel;
    }
    Ok(acc)
}

/// One row of the degradation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: PerturbationKind,
    pub model_id: String,
    pub mode: InferenceMode,
    pub pass_at_1: f64,
    pub absolute_pp: Option<f64>,
    pub relative_pct: Option<f64>,
    pub weighted: Option<f64>,
}

/// Aggregate a ledger into per-(kind, model, mode) rows with degradation
/// against the VAN baseline and a weighted robustness value where all
/// four weighted kinds are present.
pub fn degradation_report(
    ledger: &GradeLedger,
    weights: &BTreeMap<PerturbationKind, f64>,
) -> Result<Vec<ReportRow>, AnalyticsError> {
    let mut groups: Vec<Group> = Vec::new();
    for row in &ledger.rows {
        let g = Group {
            kind: row.kind,
            model_id: row.model_id.clone(),
            mode: row.mode,
        };
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    groups.sort();

    let mut scores: BTreeMap<(String, InferenceMode, PerturbationKind), f64> = BTreeMap::new();
    for g in &groups {
        let score = pass_at_1(ledger, g)?;
        scores.insert((g.model_id.clone(), g.mode, g.kind), score);
    }

    let mut out = Vec::new();
    for g in &groups {
        let score = scores[&(g.model_id.clone(), g.mode, g.kind)];
        let baseline = scores
            .get(&(g.model_id.clone(), g.mode, PerturbationKind::Van))
            .copied();
        let (absolute_pp, relative_pct) = match (g.kind, baseline) {
            (PerturbationKind::Van, _) => (Some(0.0), Some(0.0)),
            (_, Some(base)) => {
                let (abs, rel) = degradation(base, score);
                (Some(abs), rel.ok())
            }
            (_, None) => (None, None),
        };
        // Weighted robustness for this model/mode when every weighted
        // kind has a relative value.
        let mut relatives = BTreeMap::new();
        for kind in weights.keys() {
            if let (Some(base), Some(s)) = (
                baseline,
                scores.get(&(g.model_id.clone(), g.mode, *kind)).copied(),
            ) {
                if base > 0.0 {
                    relatives.insert(*kind, (s - base) / base * 100.0);
                }
            }
        }
        let weighted = weighted_robustness(&relatives, weights).ok();
        out.push(ReportRow {
            kind: g.kind,
            model_id: g.model_id.clone(),
            mode: g.mode,
            pass_at_1: score,
            absolute_pp,
            relative_pct,
            weighted,
        });
    }
    Ok(out)
}

/// Machine-readable table: fixed header, one row per group.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("kind,model,mode,pass_at_1,absolute_pp,relative_pct,weighted\n");
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{:.4}", x)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.4},{},{},{}\n",
            r.kind,
            r.model_id,
            r.mode,
            r.pass_at_1,
            fmt_opt(r.absolute_pp),
            fmt_opt(r.relative_pct),
            fmt_opt(r.weighted),
        ));
    }
    out
}

/// Aligned human-readable table.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:<24} {:<8} {:>9} {:>9} {:>9} {:>9}\n",
        "kind", "model", "mode", "pass@1", "abs pp", "rel %", "weighted"
    ));
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{:+.2}", x)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<6} {:<24} {:<8} {:>9.2} {:>9} {:>9} {:>9}\n",
            r.kind.as_str(),
            r.model_id,
            r.mode.as_str(),
            r.pass_at_1,
            fmt_opt(r.absolute_pp),
            fmt_opt(r.relative_pct),
            fmt_opt(r.weighted),
        ));
    }
    out
}

/// Count of failures per error class, for diagnostics.
pub fn error_breakdown(ledger: &GradeLedger) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for row in &ledger.rows {
        if row.grade.error_class != ErrorClass::None {
            *out.entry(format!("{:?}", row.grade.error_class)).or_insert(0) += 1;
        }
    }
    out
}

/// One density-sweep row: injection probability, Pass@1, and mean
/// reasoning-token usage when the provider reports it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub p: f64,
    pub pass_at_1: f64,
    pub mean_reasoning_tokens: Option<f64>,
}

/// Evaluate a p-grid in listed order through a caller-supplied pipeline
/// handle (generate MDC corpora, run, grade, aggregate).
pub fn density_sweep<E>(
    p_grid: &[f64],
    mut evaluate: impl FnMut(f64) -> Result<DensityRow, E>,
) -> Result<Vec<DensityRow>, E> {
    let mut out = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        out.push(evaluate(p)?);
    }
    Ok(out)
}

/// Cumulative count of lexicon hits along a token stream, sampled at
/// every token index. Whole-word, case-insensitive matching.
pub fn confusion_trend(trace: &str, lexicon: &[String]) -> Vec<u64> {
    let lexicon: Vec<String> = lexicon.iter().map(|w| w.to_lowercase()).collect();
    let mut series = Vec::new();
    let mut count = 0u64;
    for token in trace
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|t| !t.is_empty())
    {
        if lexicon.iter().any(|w| w == &token.to_lowercase()) {
            count += 1;
        }
        series.push(count);
    }
    series
}

/// The default hesitation lexicon.
pub fn default_lexicon() -> Vec<String> {
    ["hmm", "wait", "but", "perhaps", "mistake"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    /// (a, b, c) of y = a·x² + b·x + c.
    pub coeffs: (f64, f64, f64),
    pub r_squared: f64,
}

/// Least-squares quadratic fit over y at x = 1..n. The x values are
/// centered internally for conditioning and the coefficients shifted
/// back, so exact quadratics recover their coefficients to machine
/// precision.
pub fn quadratic_fit(series: &[f64]) -> Result<TrendFit, AnalyticsError> {
    let n = series.len();
    if n < 3 {
        return Err(AnalyticsError::DegenerateSeries);
    }
    let mean_y = series.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = series.iter().map(|y| (y - mean_y).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(AnalyticsError::DegenerateSeries);
    }

    let mean_x = (n as f64 + 1.0) / 2.0;
    // Normal equations over t = x - mean_x.
    let mut s = [0.0f64; 5]; // sums of t^0..t^4
    let mut b = [0.0f64; 3]; // sums of y*t^0..y*t^2
    for (i, &y) in series.iter().enumerate() {
        let t = (i as f64 + 1.0) - mean_x;
        let t2 = t * t;
        s[0] += 1.0;
        s[1] += t;
        s[2] += t2;
        s[3] += t2 * t;
        s[4] += t2 * t2;
        b[0] += y;
        b[1] += y * t;
        b[2] += y * t2;
    }
    // Solve [[s4,s3,s2],[s3,s2,s1],[s2,s1,s0]] [a,bt,ct] = [b2,b1,b0].
    let m = [
        [s[4], s[3], s[2], b[2]],
        [s[3], s[2], s[1], b[1]],
        [s[2], s[1], s[0], b[0]],
    ];
    let sol = solve3(m).ok_or(AnalyticsError::DegenerateSeries)?;
    let (a, bt, ct) = (sol[0], sol[1], sol[2]);
    // Shift back to y = a x^2 + b x + c.
    let bcoef = bt - 2.0 * a * mean_x;
    let ccoef = ct - bt * mean_x + a * mean_x * mean_x;

    let mut ss_res = 0.0;
    for (i, &y) in series.iter().enumerate() {
        let x = i as f64 + 1.0;
        let pred = a * x * x + bcoef * x + ccoef;
        ss_res += (y - pred).powi(2);
    }
    Ok(TrendFit {
        coeffs: (a, bcoef, ccoef),
        r_squared: 1.0 - ss_res / ss_tot,
    })
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                let pivot_row = m[col];
                for (k, cell) in m[row].iter_mut().enumerate().skip(col) {
                    *cell -= factor * pivot_row[k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, kind: PerturbationKind, candidate: u32, pass: bool) -> LedgerRow {
        LedgerRow {
            instance_id: id.to_string(),
            kind,
            mode: InferenceMode::Direct,
            model_id: "mock:echo".to_string(),
            candidate_index: candidate,
            grade: Grade {
                pass,
                error_class: if pass { ErrorClass::None } else { ErrorClass::Wrong },
                oracle_outcome: None,
            },
            prompt_tokens: 0,
            completion_tokens: 0,
            reasoning_tokens: None,
        }
    }

    fn group(kind: PerturbationKind) -> Group {
        Group {
            kind,
            model_id: "mock:echo".to_string(),
            mode: InferenceMode::Direct,
        }
    }

    #[test]
    fn pass_at_1_is_mean_of_candidate_fractions() {
        let mut ledger = GradeLedger::default();
        ledger.push(row("a", PerturbationKind::Van, 0, true));
        ledger.push(row("a", PerturbationKind::Van, 1, false));
        ledger.push(row("a", PerturbationKind::Van, 2, false));
        let score = pass_at_1(&ledger, &group(PerturbationKind::Van)).unwrap();
        assert!((score - 33.333333).abs() < 1e-3);

        // Two instances with fractions 1.0 and 0.0 average to 50.
        let mut ledger = GradeLedger::default();
        ledger.push(row("a", PerturbationKind::Van, 0, true));
        ledger.push(row("b", PerturbationKind::Van, 0, false));
        assert_eq!(pass_at_1(&ledger, &group(PerturbationKind::Van)).unwrap(), 50.0);
    }

    #[test]
    fn pass_at_1_full_marks_and_empty_group() {
        let mut ledger = GradeLedger::default();
        for i in 0..10 {
            ledger.push(row(&format!("i{}", i), PerturbationKind::Van, 0, true));
        }
        assert_eq!(pass_at_1(&ledger, &group(PerturbationKind::Van)).unwrap(), 100.0);
        assert_eq!(
            pass_at_1(&ledger, &group(PerturbationKind::All)),
            Err(AnalyticsError::EmptyGroup)
        );
    }

    #[test]
    fn degradation_sign_convention() {
        let (abs, rel) = degradation(60.0, 60.0);
        assert_eq!(abs, 0.0);
        assert_eq!(rel.unwrap(), 0.0);
        let (abs, rel) = degradation(50.0, 25.0);
        assert_eq!(abs, -25.0);
        assert_eq!(rel.unwrap(), -50.0);
        let (abs, rel) = degradation(0.0, 10.0);
        assert_eq!(abs, 10.0);
        assert!(rel.is_err());
    }

    #[test]
    fn weighted_robustness_reproduces_published_row() {
        let relatives = BTreeMap::from([
            (PerturbationKind::All, -29.37),
            (PerturbationKind::Mdc, -35.51),
            (PerturbationKind::Mps, -24.99),
            (PerturbationKind::Mhc, -23.83),
        ]);
        let weighted = weighted_robustness(&relatives, &paper_weights()).unwrap();
        assert!((weighted - (-28.20)).abs() <= 0.01, "got {}", weighted);
        let uniform = weighted_robustness(&relatives, &uniform_weights()).unwrap();
        assert!((uniform - (-28.42)).abs() <= 0.01, "got {}", uniform);
        let zeros = BTreeMap::from([
            (PerturbationKind::All, 0.0),
            (PerturbationKind::Mdc, 0.0),
            (PerturbationKind::Mps, 0.0),
            (PerturbationKind::Mhc, 0.0),
        ]);
        assert_eq!(weighted_robustness(&zeros, &paper_weights()).unwrap(), 0.0);
    }

    #[test]
    fn weight_mismatch_is_rejected() {
        let relatives = BTreeMap::from([(PerturbationKind::All, -1.0)]);
        let mut weights = BTreeMap::new();
        weights.insert(PerturbationKind::All, 0.9);
        assert!(matches!(
            weighted_robustness(&relatives, &weights),
            Err(AnalyticsError::WeightMismatch(_))
        ));
    }

    #[test]
    fn confusion_trend_counts_whole_words() {
        let series = confusion_trend("wait, but wait", &default_lexicon());
        assert_eq!(series, vec![1, 2, 3]);
        let series = confusion_trend("button buttons rebut", &default_lexicon());
        assert_eq!(series, vec![0, 0, 0]);
        let series = confusion_trend("all calm here", &default_lexicon());
        assert_eq!(series, vec![0, 0, 0]);
    }

    #[test]
    fn confusion_trend_is_monotone() {
        let trace = "hmm x wait y but z";
        let series = confusion_trend(trace, &default_lexicon());
        assert!(series.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*series.last().unwrap(), 3);
    }

    #[test]
    fn quadratic_fit_recovers_exact_polynomial() {
        let series: Vec<f64> = (1..=50).map(|x| 2.0 * (x * x) as f64 + 3.0).collect();
        let fit = quadratic_fit(&series).unwrap();
        assert!((fit.coeffs.0 - 2.0).abs() < 1e-9);
        assert!(fit.coeffs.1.abs() < 1e-9);
        assert!((fit.coeffs.2 - 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_fit_handles_linear_series() {
        let series: Vec<f64> = (1..=20).map(|x| x as f64).collect();
        let fit = quadratic_fit(&series).unwrap();
        assert!(fit.coeffs.0.abs() < 1e-9);
        assert!((fit.coeffs.1 - 1.0).abs() < 1e-9);
        assert!(fit.coeffs.2.abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_fit_rejects_degenerate_series() {
        assert_eq!(
            quadratic_fit(&[1.0, 2.0]),
            Err(AnalyticsError::DegenerateSeries)
        );
        assert_eq!(
            quadratic_fit(&[5.0, 5.0, 5.0, 5.0]),
            Err(AnalyticsError::DegenerateSeries)
        );
    }

    #[test]
    fn quadratic_fit_with_noise_stays_tight() {
        let mut rng = crate::rng::Rng::new(99);
        let series: Vec<f64> = (1..=1000)
            .map(|x| {
                let clean = 2.0 * (x * x) as f64 + 3.0;
                let noise = 1.0 + (rng.gen_f64() - 0.5) * 0.02; // ±1%
                clean * noise
            })
            .collect();
        let fit = quadratic_fit(&series).unwrap();
        assert!(fit.r_squared >= 0.999, "R² = {}", fit.r_squared);
    }

    #[test]
    fn ledger_round_trips_jsonl() {
        let mut ledger = GradeLedger::default();
        ledger.push(row("a", PerturbationKind::Van, 0, true));
        ledger.push(row("a", PerturbationKind::All, 0, false));
        let text = ledger.to_jsonl();
        let back = GradeLedger::from_jsonl(&text).unwrap();
        assert_eq!(ledger, back);
        assert!(ledger.keys_unique());
    }

    #[test]
    fn report_rows_join_baseline() {
        let mut ledger = GradeLedger::default();
        for kind in [
            PerturbationKind::Van,
            PerturbationKind::All,
            PerturbationKind::Mdc,
            PerturbationKind::Mps,
            PerturbationKind::Mhc,
        ] {
            for (i, pass) in [(0, true), (1, kind == PerturbationKind::Van)] {
                ledger.push(row(&format!("i{}", i), kind, 0, pass));
            }
        }
        let rows = degradation_report(&ledger, &paper_weights()).unwrap();
        let van = rows.iter().find(|r| r.kind == PerturbationKind::Van).unwrap();
        assert_eq!(van.pass_at_1, 100.0);
        assert_eq!(van.absolute_pp, Some(0.0));
        let all = rows.iter().find(|r| r.kind == PerturbationKind::All).unwrap();
        assert_eq!(all.pass_at_1, 50.0);
        assert_eq!(all.absolute_pp, Some(-50.0));
        assert_eq!(all.relative_pct, Some(-50.0));
        assert_eq!(all.weighted, Some(-50.0));
        let csv = render_csv(&rows);
        assert!(csv.starts_with("kind,model,mode,pass_at_1,absolute_pp,relative_pct,weighted\n"));
    }
}
