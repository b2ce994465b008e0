//! Scoring of human evaluation sheets and side-by-side system comparison.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DartError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub relation: String,
    pub verdicts: [bool; 3],
}

/// Three evaluators' correct/incorrect judgements per relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSheet {
    pub rows: Vec<SheetRow>,
}

fn parse_verdict(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "correct" => Some(true),
        "incorrect" => Some(false),
        _ => None,
    }
}

impl EvaluationSheet {
    /// `relation<TAB>v1<TAB>v2<TAB>v3` with verdicts `correct` / `incorrect`.
    /// Blank lines, `#` comments and a leading `relation` header are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if rows.is_empty() && fields[0].trim().eq_ignore_ascii_case("relation") {
                continue;
            }
            if fields.len() != 4 {
                return Err(DartError::parse(
                    origin,
                    line_no,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let mut verdicts = [false; 3];
            for (slot, raw) in verdicts.iter_mut().zip(&fields[1..]) {
                *slot = parse_verdict(raw).ok_or_else(|| {
                    DartError::parse(origin, line_no, format!("verdict `{}` is not correct/incorrect", raw.trim()))
                })?;
            }
            rows.push(SheetRow {
                relation: fields[0].trim().to_string(),
                verdicts,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub num_correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    /// Accuracy as reported: two decimals.
    pub fn rounded(&self) -> f64 {
        (self.accuracy * 100.0).round() / 100.0
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} & {:.2}", self.num_correct, self.accuracy)
    }
}

/// A relation counts as correct only when all three evaluators agree it is.
pub fn evaluate_accuracy(sheet: &EvaluationSheet) -> Result<Accuracy> {
    if sheet.rows.is_empty() {
        return Err(DartError::Data("evaluation sheet has no rows".into()));
    }
    let num_correct = sheet.rows.iter().filter(|r| r.verdicts.iter().all(|&v| v)).count();
    let total = sheet.rows.len();
    Ok(Accuracy {
        num_correct,
        total,
        accuracy: num_correct as f64 / total as f64,
    })
}

/// The class pair a run was made for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPair {
    pub d1: String,
    pub d2: String,
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.d1, self.d2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub classes: ClassPair,
    pub rows: Vec<SystemScore>,
}

impl ComparisonTable {
    /// `Languages, Countries & 22 & 0.63 & 7 & 0.54`
    pub fn table_row(&self) -> String {
        let mut out = self.classes.to_string();
        for r in &self.rows {
            out.push_str(&format!(" & {}", r.accuracy));
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("system\tclasses\tcorrect\ttotal\taccuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.2}\n",
                r.system, self.classes, r.accuracy.num_correct, r.accuracy.total, r.accuracy.accuracy
            ));
        }
        out
    }
}

/// Scores both systems' sheets for the same class pair.
pub fn compare_runs(
    dart_classes: &ClassPair,
    baseline_classes: &ClassPair,
    dart_sheet: &EvaluationSheet,
    baseline_sheet: &EvaluationSheet,
) -> Result<ComparisonTable> {
    if dart_classes != baseline_classes {
        return Err(DartError::Data(format!(
            "runs are for different class pairs: ({dart_classes}) vs ({baseline_classes})"
        )));
    }
    Ok(ComparisonTable {
        classes: dart_classes.clone(),
        rows: vec![
            SystemScore {
                system: "dart".into(),
                accuracy: evaluate_accuracy(dart_sheet)?,
            },
            SystemScore {
                system: "baseline".into(),
                accuracy: evaluate_accuracy(baseline_sheet)?,
            },
        ],
    })
}
