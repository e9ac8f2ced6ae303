//! Exact-match and character-level scoring, strict split success, and
//! benchmark tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DerivationRecord, Direction, SuffixCategory};
use crate::seq2seq::{parse_split, SplitPrediction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {golds} gold entries")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("reference table line {line}: {reason}")]
    Reference { line: usize, reason: String },
}

/// Successes out of a total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub successes: usize,
    pub total: usize,
}

impl Score {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.successes as f64 / self.total as f64
        }
    }

    /// Percentage with two decimals, rounded half up in exact integer
    /// arithmetic.
    pub fn percent(&self) -> String {
        if self.total == 0 {
            return "0.00".to_string();
        }
        let (s, t) = (self.successes as u128, self.total as u128);
        let hundredths = (s * 20_000 + t) / (2 * t);
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} ({}%)", self.successes, self.total, self.percent())
    }
}

fn check_lengths(predictions: usize, golds: usize) -> Result<(), EvalError> {
    if predictions != golds {
        return Err(EvalError::LengthMismatch { predictions, golds });
    }
    Ok(())
}

/// Count of predictions equal to their gold string, codepoint for codepoint.
pub fn exact_match_accuracy<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], golds: &[G]) -> Result<Score, EvalError> {
    check_lengths(predictions.len(), golds.len())?;
    let successes = predictions.iter().zip(golds).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(Score { successes, total: golds.len() })
}

/// How characters of a prediction are matched against the gold string.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharAlignment {
    /// Same position; the shorter string is padded with non-matching slots.
    #[default]
    Positional,
    /// One minus edit distance, over the longer length.
    Levenshtein,
}

impl std::str::FromStr for CharAlignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positional" => Ok(Self::Positional),
            "levenshtein" => Ok(Self::Levenshtein),
            other => Err(format!("unknown alignment {other:?} (expected positional or levenshtein)")),
        }
    }
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Character accuracy of one prediction; two empty strings score 1.
pub fn char_accuracy_pair(prediction: &str, gold: &str, alignment: CharAlignment) -> f64 {
    let p: Vec<char> = prediction.chars().collect();
    let g: Vec<char> = gold.chars().collect();
    let longest = p.len().max(g.len());
    if longest == 0 {
        return 1.0;
    }
    let correct = match alignment {
        CharAlignment::Positional => p.iter().zip(&g).filter(|(a, b)| a == b).count(),
        CharAlignment::Levenshtein => longest - levenshtein(&p, &g),
    };
    correct as f64 / longest as f64
}

/// Mean per-pair character accuracy; 0 for empty input.
pub fn char_accuracy<P: AsRef<str>, G: AsRef<str>>(
    predictions: &[P],
    golds: &[G],
    alignment: CharAlignment,
) -> Result<f64, EvalError> {
    check_lengths(predictions.len(), golds.len())?;
    if golds.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 =
        predictions.iter().zip(golds).map(|(p, g)| char_accuracy_pair(p.as_ref(), g.as_ref(), alignment)).sum();
    Ok(sum / golds.len() as f64)
}

/// Both stem and suffix exactly right. Outputs without `+` never succeed.
pub fn split_success(predicted: &SplitPrediction, gold_stem: &str, gold_suffix: &str) -> bool {
    !predicted.malformed && predicted.stem == gold_stem && predicted.suffix == gold_suffix
}

/// Which model output a report scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub direction: Direction,
    /// `None` when both categories are scored together.
    pub category: Option<SuffixCategory>,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.category {
            Some(c) => write!(f, "{c} {}", self.direction),
            None => write!(f, "all {}", self.direction),
        }
    }
}

/// Scores of one model on one test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub model: String,
    pub score: Score,
    /// Mean character accuracy over every test item.
    pub char_accuracy: f64,
    /// Mean character accuracy over the failed items only.
    pub char_accuracy_failures: Option<f64>,
    pub alignment: CharAlignment,
    /// Split outputs that lacked a `+`.
    pub malformed: usize,
    pub per_suffix: BTreeMap<String, Score>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.score.ratio()
    }
}

/// Scores `predictions` (raw model outputs, one per record) against the
/// records. Formation compares against the pada; split parses the output at
/// its first `+` and needs both parts right.
pub fn evaluate(
    records: &[DerivationRecord],
    predictions: &[String],
    task: Task,
    model: &str,
    alignment: CharAlignment,
) -> Result<EvalReport, EvalError> {
    check_lengths(predictions.len(), records.len())?;
    let mut per_suffix: BTreeMap<String, Score> = BTreeMap::new();
    let mut score = Score { successes: 0, total: records.len() };
    let mut malformed = 0;
    let mut char_sum = 0.0;
    let mut failure_sum = 0.0;
    for (record, prediction) in records.iter().zip(predictions) {
        let (gold, ok) = match task.direction {
            Direction::Formation => (record.pada.clone(), *prediction == record.pada),
            Direction::Split => {
                let parsed = parse_split(prediction);
                malformed += usize::from(parsed.malformed);
                (record.joined(), split_success(&parsed, &record.stem, &record.suffix))
            }
        };
        let chars = char_accuracy_pair(prediction, &gold, alignment);
        char_sum += chars;
        let entry = per_suffix.entry(record.suffix.clone()).or_default();
        entry.total += 1;
        if ok {
            score.successes += 1;
            entry.successes += 1;
        } else {
            failure_sum += chars;
        }
    }
    let failures = score.total - score.successes;
    Ok(EvalReport {
        task,
        model: model.to_string(),
        score,
        char_accuracy: if score.total == 0 { 0.0 } else { char_sum / score.total as f64 },
        char_accuracy_failures: (failures > 0).then(|| failure_sum / failures as f64),
        alignment,
        malformed,
        per_suffix,
    })
}

/// A published result, displayed exactly as printed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub direction: Direction,
    pub category: SuffixCategory,
    pub model: String,
    pub result: String,
}

const REFERENCE_TSV: &str = include_str!("../../data/reference_results.tsv");

/// Parses `direction<TAB>category<TAB>model<TAB>result` lines; `#` starts a
/// comment line.
pub fn parse_reference_rows(text: &str) -> Result<Vec<ReferenceRow>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| EvalError::Reference { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        let [direction, category, model, result] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        rows.push(ReferenceRow {
            direction: direction.parse().map_err(|e: String| err(e))?,
            category: category.parse().map_err(|e: String| err(e))?,
            model: model.to_string(),
            result: result.to_string(),
        });
    }
    Ok(rows)
}

/// The published rows shipped with the library.
pub fn reference_rows() -> Vec<ReferenceRow> {
    parse_reference_rows(REFERENCE_TSV).expect("bundled reference table parses")
}

const REPORT_HEADER: [&str; 4] = ["task", "model", "result", "source"];

/// Aligned text table of measured rows followed by the published rows for
/// the same tasks.
pub fn benchmark_report(reports: &[EvalReport], references: &[ReferenceRow]) -> String {
    let mut rows: Vec<[String; 4]> = Vec::new();
    for r in reports {
        rows.push([r.task.to_string(), r.model.clone(), r.score.to_string(), "measured".into()]);
    }
    for r in references {
        if reports.iter().any(|m| m.task.direction == r.direction && m.task.category == Some(r.category)) {
            let task = Task { direction: r.direction, category: Some(r.category) };
            rows.push([task.to_string(), r.model.clone(), r.result.clone(), "published".into()]);
        }
    }
    let mut widths = REPORT_HEADER.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string() + "\n"
    };
    let mut out = line(REPORT_HEADER);
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out
}

/// One tab-separated row per report plus one per suffix.
pub fn report_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::from("direction\tcategory\tmodel\tsuffix\tsuccesses\ttotal\tpercent\tchar_accuracy\n");
    for r in reports {
        let category = r.task.category.map_or_else(|| "all".to_string(), |c| c.to_string());
        let head = format!("{}\t{category}\t{}", r.task.direction, r.model);
        out.push_str(&format!(
            "{head}\t*\t{}\t{}\t{}\t{:.4}\n",
            r.score.successes,
            r.score.total,
            r.score.percent(),
            r.char_accuracy
        ));
        for (suffix, s) in &r.per_suffix {
            out.push_str(&format!("{head}\t{suffix}\t{}\t{}\t{}\t-\n", s.successes, s.total, s.percent()));
        }
    }
    out
}

/// Per-suffix breakdown of one report as aligned text.
pub fn per_suffix_table(report: &EvalReport) -> String {
    let width = report.per_suffix.keys().map(|k| k.chars().count()).max().unwrap_or(0).max("suffix".len());
    let mut out = format!("{:<width$}  result\n", "suffix");
    for (suffix, s) in &report.per_suffix {
        out.push_str(&format!("{suffix:<width$}  {s}\n"));
    }
    out
}
