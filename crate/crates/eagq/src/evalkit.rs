//! Evaluation: per-value precision/recall/F-measure reports for
//! attribute inference, and normalized answer accuracy for query
//! answering, with aligned-table and machine-readable renderings.
//!
//! Answer normalization rules, applied to both predictions and
//! references before comparison (listed exhaustively so scores are
//! reproducible): lowercase; trim and collapse whitespace runs to one
//! space; strip trailing `.`/`,`/`!`/`?`/`;`/`:` characters; rewrite
//! any whitespace-separated token spelling a number from "one" to
//! "ten" as its digits.

use crate::matcher::Answer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn validation(msg: impl Into<String>) -> EvalError {
    EvalError::Validation(msg.into())
}

/// Harmonic mean of precision and recall, the inference-quality
/// score. Both arguments zero is defined as 0 rather than 0/0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision == 0.0 && recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// Per-value tallies underlying an inference report. Rates derived
/// from a zero denominator are undefined and reported as absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueScores {
    /// Instances whose gold label is this value and were inferred as it.
    pub true_value_inferred: u64,
    /// Instances whose gold label is this value.
    pub true_value_instance: u64,
    /// Instances inferred as this value.
    pub inferred_instance: u64,
}

impl ValueScores {
    pub fn precision(&self) -> Option<f64> {
        (self.inferred_instance > 0)
            .then(|| self.true_value_inferred as f64 / self.inferred_instance as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.true_value_instance > 0)
            .then(|| self.true_value_inferred as f64 / self.true_value_instance as f64)
    }

    /// F-measure of precision and recall, absent when either is.
    pub fn accuracy(&self) -> Option<f64> {
        Some(f_measure(self.precision()?, self.recall()?))
    }
}

/// Per-value inference quality over a gold/predicted label pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceReport {
    values: BTreeMap<String, ValueScores>,
    instances: u64,
}

/// Tallies gold against predicted labels, position by position.
pub fn inference_report(
    gold: &[impl AsRef<str>],
    predicted: &[impl AsRef<str>],
) -> Result<InferenceReport, EvalError> {
    if gold.len() != predicted.len() {
        return Err(validation(format!(
            "{} gold labels against {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let mut values: BTreeMap<String, ValueScores> = BTreeMap::new();
    fn entry<'a>(
        values: &'a mut BTreeMap<String, ValueScores>,
        v: &str,
    ) -> &'a mut ValueScores {
        values.entry(v.to_string()).or_insert(ValueScores {
            true_value_inferred: 0,
            true_value_instance: 0,
            inferred_instance: 0,
        })
    }
    for (g, p) in gold.iter().zip(predicted) {
        let (g, p) = (g.as_ref(), p.as_ref());
        entry(&mut values, g).true_value_instance += 1;
        entry(&mut values, p).inferred_instance += 1;
        if g == p {
            entry(&mut values, g).true_value_inferred += 1;
        }
    }
    Ok(InferenceReport {
        values,
        instances: gold.len() as u64,
    })
}

impl InferenceReport {
    /// Per-value tallies, keyed by label.
    pub fn values(&self) -> &BTreeMap<String, ValueScores> {
        &self.values
    }

    /// Number of scored instances.
    pub fn instances(&self) -> u64 {
        self.instances
    }

    /// Aligned percent table, one row per value labeled
    /// `attribute="value"`, undefined rates shown as `-`.
    pub fn render_table(&self, attribute: &str) -> String {
        let cell = |x: Option<f64>| match x {
            Some(x) => format!("{:.2}", x * 100.0),
            None => "-".to_string(),
        };
        let rows: Vec<(String, String, String, String)> = self
            .values
            .iter()
            .map(|(value, s)| {
                (
                    format!("{attribute}=\"{value}\""),
                    cell(s.precision()),
                    cell(s.recall()),
                    cell(s.accuracy()),
                )
            })
            .collect();
        let label_w = rows
            .iter()
            .map(|r| r.0.len())
            .chain([attribute.len()])
            .max()
            .unwrap_or(0);
        let col_w = |pick: fn(&(String, String, String, String)) -> &String, head: &str| {
            rows.iter()
                .map(|r| pick(r).len())
                .chain([head.len()])
                .max()
                .unwrap_or(0)
        };
        let (pw, rw, aw) = (
            col_w(|r| &r.1, "precision"),
            col_w(|r| &r.2, "recall"),
            col_w(|r| &r.3, "Acc"),
        );
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>pw$}  {:>rw$}  {:>aw$}",
            attribute, "precision", "recall", "Acc"
        );
        for (label, p, r, a) in &rows {
            let _ = writeln!(out, "{label:<label_w$}  {p:>pw$}  {r:>rw$}  {a:>aw$}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("reports always serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Canonicalizes an answer string for comparison; see the module
/// documentation for the exhaustive rule list.
pub fn normalize_answer(text: &str) -> String {
    const NUMBER_WORDS: [(&str, &str); 10] = [
        ("one", "1"),
        ("two", "2"),
        ("three", "3"),
        ("four", "4"),
        ("five", "5"),
        ("six", "6"),
        ("seven", "7"),
        ("eight", "8"),
        ("nine", "9"),
        ("ten", "10"),
    ];
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed.trim_end_matches(['.', ',', '!', '?', ';', ':']);
    stripped
        .split(' ')
        .map(|token| {
            NUMBER_WORDS
                .iter()
                .find(|(word, _)| *word == token)
                .map_or(token, |(_, digits)| digits)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// One scored question: a predicted answer and the acceptable
/// human-provided reference strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRecord {
    pub scene_id: String,
    pub query_id: String,
    pub predicted: Answer,
    pub references: Vec<String>,
}

impl AnswerRecord {
    pub fn new(
        scene_id: impl Into<String>,
        query_id: impl Into<String>,
        predicted: Answer,
        references: Vec<String>,
    ) -> Result<Self, EvalError> {
        let record = AnswerRecord {
            scene_id: scene_id.into(),
            query_id: query_id.into(),
            predicted,
            references,
        };
        record.check()?;
        Ok(record)
    }

    fn check(&self) -> Result<(), EvalError> {
        if self.references.is_empty() {
            return Err(validation(format!(
                "record {}/{} has no reference answers",
                self.scene_id, self.query_id
            )));
        }
        Ok(())
    }

    /// Whether the prediction matches any reference, after
    /// normalization of both sides.
    pub fn is_correct(&self) -> bool {
        let predicted = normalize_answer(&self.predicted.render());
        self.references
            .iter()
            .any(|r| normalize_answer(r) == predicted)
    }
}

/// Accuracy of a record batch: per-query means and the overall mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    per_query: BTreeMap<String, QueryAccuracy>,
    overall: f64,
    records: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryAccuracy {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

/// Scores every record: 1 when the normalized prediction equals any
/// normalized reference, 0 otherwise; accuracies are plain means.
pub fn answer_accuracy(records: &[AnswerRecord]) -> Result<AccuracyReport, EvalError> {
    if records.is_empty() {
        return Err(validation("no records to score"));
    }
    let mut per_query: BTreeMap<String, QueryAccuracy> = BTreeMap::new();
    let mut correct_total = 0u64;
    for record in records {
        record.check()?;
        let q = per_query
            .entry(record.query_id.clone())
            .or_insert(QueryAccuracy {
                correct: 0,
                total: 0,
                accuracy: 0.0,
            });
        q.total += 1;
        if record.is_correct() {
            q.correct += 1;
            correct_total += 1;
        }
    }
    for q in per_query.values_mut() {
        q.accuracy = q.correct as f64 / q.total as f64;
    }
    Ok(AccuracyReport {
        per_query,
        overall: correct_total as f64 / records.len() as f64,
        records: records.len() as u64,
    })
}

impl AccuracyReport {
    pub fn per_query(&self) -> &BTreeMap<String, QueryAccuracy> {
        &self.per_query
    }

    pub fn overall(&self) -> f64 {
        self.overall
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Aligned percent table, one row per query plus an overall row.
    pub fn render_table(&self) -> String {
        let rows: Vec<(String, String, String)> = self
            .per_query
            .iter()
            .map(|(id, q)| {
                (
                    id.clone(),
                    format!("{}/{}", q.correct, q.total),
                    format!("{:.2}", q.accuracy * 100.0),
                )
            })
            .collect();
        let overall_count: u64 = self.per_query.values().map(|q| q.correct).sum();
        let overall = (
            "overall".to_string(),
            format!("{}/{}", overall_count, self.records),
            format!("{:.2}", self.overall * 100.0),
        );
        let w = |pick: fn(&(String, String, String)) -> &String, head: &str| {
            rows.iter()
                .chain([&overall])
                .map(|r| pick(r).len())
                .chain([head.len()])
                .max()
                .unwrap_or(0)
        };
        let (qw, cw, aw) = (w(|r| &r.0, "query"), w(|r| &r.1, "correct"), w(|r| &r.2, "Acc"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<qw$}  {:>cw$}  {:>aw$}", "query", "correct", "Acc");
        for (id, c, a) in rows.iter().chain([&overall]) {
            let _ = writeln!(out, "{id:<qw$}  {c:>cw$}  {a:>aw$}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("reports always serialize");
        text.push('\n');
        text
    }
}

// ---------------------------------------------------------------------------
// Prediction and gold files: one JSON record per line.

/// A predicted answer for one scene/query pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub query_id: String,
    pub answer: Answer,
}

/// The reference answers for one scene/query pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub scene_id: String,
    pub query_id: String,
    pub references: Vec<String>,
}

/// A gold label for one entity, keyed `scene/entity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub id: String,
    pub label: String,
}

/// Parses a line-per-record JSON file, reporting 1-based line numbers.
pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Renders records one JSON object per line, in input order.
pub fn render_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

/// Joins predictions with gold references on (scene, query). The two
/// sides must cover exactly the same pairs.
pub fn join_records(
    predictions: &[PredictionRecord],
    gold: &[GoldRecord],
) -> Result<Vec<AnswerRecord>, EvalError> {
    let mut references: BTreeMap<(String, String), &GoldRecord> = BTreeMap::new();
    for g in gold {
        let key = (g.scene_id.clone(), g.query_id.clone());
        if references.insert(key, g).is_some() {
            return Err(validation(format!(
                "duplicate gold record for {}/{}",
                g.scene_id, g.query_id
            )));
        }
    }
    let mut out = Vec::with_capacity(predictions.len());
    let mut seen = 0usize;
    for p in predictions {
        let key = (p.scene_id.clone(), p.query_id.clone());
        let g = references.get(&key).ok_or_else(|| {
            validation(format!(
                "prediction {}/{} has no gold record",
                p.scene_id, p.query_id
            ))
        })?;
        seen += 1;
        out.push(AnswerRecord::new(
            p.scene_id.clone(),
            p.query_id.clone(),
            p.answer.clone(),
            g.references.clone(),
        )?);
    }
    if seen != references.len() {
        let missing = references
            .values()
            .find(|g| {
                !predictions
                    .iter()
                    .any(|p| p.scene_id == g.scene_id && p.query_id == g.query_id)
            })
            .expect("some gold record is unmatched");
        return Err(validation(format!(
            "gold record {}/{} has no prediction",
            missing.scene_id, missing.query_id
        )));
    }
    Ok(out)
}

/// Joins gold labels with predicted labels on id, yielding aligned
/// label lists for `inference_report`.
pub fn join_labels(
    gold: &[LabelRecord],
    predicted: &[LabelRecord],
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    for p in predicted {
        if by_id.insert(&p.id, &p.label).is_some() {
            return Err(validation(format!("duplicate predicted label for {}", p.id)));
        }
    }
    let mut gold_out = Vec::with_capacity(gold.len());
    let mut pred_out = Vec::with_capacity(gold.len());
    let mut seen_gold: BTreeMap<&str, ()> = BTreeMap::new();
    for g in gold {
        if seen_gold.insert(&g.id, ()).is_some() {
            return Err(validation(format!("duplicate gold label for {}", g.id)));
        }
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| validation(format!("no predicted label for {}", g.id)))?;
        gold_out.push(g.label.clone());
        pred_out.push(p.to_string());
    }
    if by_id.len() != gold.len() {
        let extra = predicted
            .iter()
            .find(|p| !gold.iter().any(|g| g.id == p.id))
            .expect("some prediction is unmatched");
        return Err(validation(format!("no gold label for {}", extra.id)));
    }
    Ok((gold_out, pred_out))
}
