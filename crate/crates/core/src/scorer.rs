//! Answer parsing, accuracy reports and letter-bias statistics.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::catalog::{render_template, ScenarioCategory};
use crate::questgen::{letter, BenchmarkDoc, QuestionOption};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("question `{0}` answered more than once")]
    DuplicateAnswer(String),
    #[error("answer for unknown question `{0}`")]
    UnknownQuestion(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerLine {
    pub question_id: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub raw_text: String,
    pub parsed_letter: Option<String>,
}

/// First standalone option letter in `raw`. Upper-case letters count
/// anywhere; lower-case ones only when followed by `.` or `)` or when they
/// are the whole answer, so that articles in prose are not read as "a".
pub fn parse_letter(raw: &str, k: usize) -> Option<String> {
    let chars: Vec<char> = raw.chars().collect();
    let whole = raw.trim();
    let in_range = |c: char| c.is_ascii_uppercase() && ((c as u8 - b'A') as usize) < k;
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_alphabetic() {
            continue;
        }
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        if before.is_some_and(|b| b.is_alphanumeric()) || after.is_some_and(|a| a.is_alphanumeric()) {
            continue;
        }
        if c.is_ascii_uppercase() {
            if in_range(c) {
                return Some(c.to_string());
            }
        } else {
            let up = c.to_ascii_uppercase();
            let marked = matches!(after, Some('.') | Some(')'));
            if in_range(up) && (marked || whole.len() == 1) {
                return Some(up.to_string());
            }
        }
    }
    None
}

/// Lower-cased words with agent mentions (`Agent 1`, `Object 1`, `c1`,
/// `<c1,CAM,u,v>`) collapsed to `#1`.
fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    let mut out: Vec<String> = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let w = words[i];
        let digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
        if matches!(w, "agent" | "object") && words.get(i + 1).is_some_and(|n| digits(n)) {
            out.push(format!("#{}", words[i + 1]));
            i += 2;
            continue;
        }
        if let Some(n) = w.strip_prefix('c').filter(|n| digits(n)) {
            out.push(format!("#{n}"));
            // drop the camera and pixel fields of a bracketed referral
            if text.contains(&format!("<c{n},")) {
                let mut j = i + 1;
                let mut skipped = 0;
                while j < words.len() && skipped < 3 && (words[j].starts_with("cam") || digits(words[j])) {
                    j += 1;
                    skipped += 1;
                }
                i = j;
                continue;
            }
            i += 1;
            continue;
        }
        out.push(w.to_string());
        i += 1;
    }
    out.join(" ")
}

/// Letter of the option whose text appears in `raw`; the longest match
/// wins and an equally long match for a different option means no answer.
fn match_option_text(raw: &str, options: &[QuestionOption]) -> Option<String> {
    let hay = format!(" {} ", normalize(raw));
    let mut best: Option<(usize, &str)> = None;
    let mut tied = false;
    for o in options {
        let needle = normalize(&render_template(&o.text, &["Agent 1", "Agent 2"]));
        if needle.is_empty() || !hay.contains(&format!(" {needle} ")) {
            continue;
        }
        match best {
            Some((len, _)) if needle.len() < len => {}
            Some((len, _)) if needle.len() == len => tied = true,
            _ => {
                best = Some((needle.len(), &o.letter));
                tied = false;
            }
        }
    }
    if tied {
        None
    } else {
        best.map(|b| b.1.to_string())
    }
}

/// Letter answer if present, else option-text match, else `None`.
pub fn parse_answer(raw: &str, options: &[QuestionOption]) -> Option<String> {
    parse_letter(raw, options.len()).or_else(|| match_option_text(raw, options))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.n += 1;
        self.correct += ok as usize;
    }

    fn finish(&mut self) {
        self.accuracy = if self.n == 0 { 0.0 } else { self.correct as f64 / self.n as f64 };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub questions: usize,
    pub per_scenario: BTreeMap<String, Tally>,
    /// Total correct over total questions of the category.
    pub per_category: BTreeMap<ScenarioCategory, Tally>,
    /// Unweighted mean of the non-empty category accuracies; the headline
    /// number.
    pub overall: f64,
    /// Correct over all questions.
    pub overall_micro: f64,
    pub unparsable: usize,
    /// Predicted letters; unparsable answers are not counted.
    pub letter_histogram: BTreeMap<String, usize>,
    pub answers: Vec<AnswerRecord>,
}

/// Mean of category accuracies.
pub fn macro_overall(category_accuracies: &[f64]) -> f64 {
    if category_accuracies.is_empty() {
        return 0.0;
    }
    category_accuracies.iter().sum::<f64>() / category_accuracies.len() as f64
}

fn index_answers<'a>(doc: &BenchmarkDoc, answers: &'a [AnswerLine]) -> Result<HashMap<&'a str, &'a AnswerLine>, ScoreError> {
    let known: HashSet<&str> = doc.questions.iter().map(|q| q.question_id.as_str()).collect();
    let mut by_id = HashMap::with_capacity(answers.len());
    for a in answers {
        if !known.contains(a.question_id.as_str()) {
            return Err(ScoreError::UnknownQuestion(a.question_id.clone()));
        }
        if by_id.insert(a.question_id.as_str(), a).is_some() {
            return Err(ScoreError::DuplicateAnswer(a.question_id.clone()));
        }
    }
    Ok(by_id)
}

fn max_options(doc: &BenchmarkDoc) -> usize {
    doc.questions.iter().map(|q| q.options.len()).max().unwrap_or(doc.options).max(doc.options)
}

/// Scores answers against a benchmark. Missing answers count as unparsable
/// and wrong. Independent of answer order.
pub fn score(doc: &BenchmarkDoc, answers: &[AnswerLine]) -> Result<ScoreReport, ScoreError> {
    let by_id = index_answers(doc, answers)?;
    let mut r = ScoreReport {
        questions: doc.questions.len(),
        letter_histogram: (0..max_options(doc)).map(|i| (letter(i), 0)).collect(),
        ..Default::default()
    };
    let mut total_correct = 0;
    for q in &doc.questions {
        let raw = by_id.get(q.question_id.as_str()).map(|a| a.raw_text.clone()).unwrap_or_default();
        let parsed = if by_id.contains_key(q.question_id.as_str()) { parse_answer(&raw, &q.options) } else { None };
        let ok = parsed.as_deref() == Some(q.correct_letter.as_str());
        match &parsed {
            Some(l) => *r.letter_histogram.entry(l.clone()).or_default() += 1,
            None => r.unparsable += 1,
        }
        total_correct += ok as usize;
        let t = q.correct_type().unwrap_or("unknown").to_string();
        r.per_scenario.entry(t).or_default().add(ok);
        r.per_category.entry(q.category).or_default().add(ok);
        r.answers.push(AnswerRecord { question_id: q.question_id.clone(), raw_text: raw, parsed_letter: parsed });
    }
    r.per_scenario.values_mut().for_each(Tally::finish);
    r.per_category.values_mut().for_each(Tally::finish);
    let cats: Vec<f64> = r.per_category.values().filter(|t| t.n > 0).map(|t| t.accuracy).collect();
    r.overall = macro_overall(&cats);
    r.overall_micro = if r.questions == 0 { 0.0 } else { total_correct as f64 / r.questions as f64 };
    Ok(r)
}

/// Answers that are exactly the benchmark's correct letters.
pub fn ground_truth_answers(doc: &BenchmarkDoc) -> Vec<AnswerLine> {
    doc.questions
        .iter()
        .map(|q| AnswerLine { question_id: q.question_id.clone(), raw_text: q.correct_letter.clone() })
        .collect()
}

/// Pearson χ² statistic and upper-tail p-value of `observed` against
/// `expected` counts; cells with zero expectation are skipped.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize, f64) {
    let cells: Vec<(f64, f64)> = observed.iter().zip(expected).filter(|(_, e)| **e > 0.0).map(|(o, e)| (*o, *e)).collect();
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    if dof == 0 {
        return (stat, 0, 1.0);
    }
    let p = ChiSquared::new(dof as f64).map_or(f64::NAN, |d| 1.0 - d.cdf(stat));
    (stat, dof, p)
}

pub fn chi_square_uniform(counts: &[usize]) -> (f64, usize, f64) {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len().max(1) as f64;
    let obs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    chi_square(&obs, &vec![e; counts.len()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub predicted: BTreeMap<String, usize>,
    pub ground_truth: BTreeMap<String, usize>,
    /// Predicted letters against the ground-truth letter proportions.
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub unparsable: usize,
}

pub fn bias_report(doc: &BenchmarkDoc, answers: &[AnswerLine]) -> Result<BiasReport, ScoreError> {
    let r = score(doc, answers)?;
    let mut gt: BTreeMap<String, usize> = (0..max_options(doc)).map(|i| (letter(i), 0)).collect();
    for q in &doc.questions {
        *gt.entry(q.correct_letter.clone()).or_default() += 1;
    }
    let parsed: usize = r.letter_histogram.values().sum();
    let gt_total: usize = gt.values().sum();
    let obs: Vec<f64> = r.letter_histogram.values().map(|&c| c as f64).collect();
    let exp: Vec<f64> = gt
        .values()
        .map(|&c| if gt_total == 0 { 0.0 } else { parsed as f64 * c as f64 / gt_total as f64 })
        .collect();
    let (chi, dof, p) = chi_square(&obs, &exp);
    Ok(BiasReport { predicted: r.letter_histogram, ground_truth: gt, chi_square: chi, dof, p_value: p, unparsable: r.unparsable })
}

/// Plain-text accuracy table: one column per category plus the overall
/// macro mean, in percent.
pub fn format_table(r: &ScoreReport, model: &str) -> String {
    let mut head = format!("{:<16}", "Model");
    let mut row = format!("{:<16}", model);
    for c in ScenarioCategory::ALL {
        head.push_str(&format!(" | {:>11}", c.label()));
        let cell = r.per_category.get(&c).filter(|t| t.n > 0).map_or("-".to_string(), |t| format!("{:.2}", t.accuracy * 100.0));
        row.push_str(&format!(" | {:>11}", cell));
    }
    head.push_str(&format!(" | {:>8}", "Overall"));
    row.push_str(&format!(" | {:>8.2}", r.overall * 100.0));
    let rule = "-".repeat(head.len());
    format!("{head}\n{rule}\n{row}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(texts: &[&str]) -> Vec<QuestionOption> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| QuestionOption { letter: letter(i), text: t.to_string(), scenario_type: format!("t{i}") })
            .collect()
    }

    #[test]
    fn letters() {
        assert_eq!(parse_letter("B", 5).as_deref(), Some("B"));
        assert_eq!(parse_letter("A. Decelerating", 5).as_deref(), Some("A"));
        assert_eq!(parse_letter("The answer is (c).", 5).as_deref(), Some("C"));
        assert_eq!(parse_letter("e", 5).as_deref(), Some("E"));
        assert_eq!(parse_letter("F", 5), None);
        assert_eq!(parse_letter("a car is ahead", 5), None);
        assert_eq!(parse_letter("Because", 5), None);
    }

    #[test]
    fn option_text_fallback() {
        let o = opts(&["{AGENT1} is passing {AGENT2}", "{AGENT1} is overtaking {AGENT2}", "Ego is stopping"]);
        assert_eq!(parse_answer("Object 1 is overtaking Object 2.", &o).as_deref(), Some("B"));
        assert_eq!(parse_answer("c1 is passing c2", &o).as_deref(), Some("A"));
        assert_eq!(parse_answer("<c1,CAM_FRONT,45,56> is passing <c2,CAM_BACK,1,2>", &o).as_deref(), Some("A"));
        assert_eq!(parse_answer("no idea", &o), None);
    }

    #[test]
    fn macro_mean_of_table_rows() {
        assert!((macro_overall(&[63.63, 75.75, 45.59, 43.38]) - 57.0875).abs() < 1e-9);
        assert!((macro_overall(&[16.63, 19.73, 13.87, 21.84]) - 18.0175).abs() < 1e-9);
        assert_eq!(macro_overall(&[]), 0.0);
    }

    #[test]
    fn chi_square_of_exact_uniform() {
        let (s, dof, p) = chi_square_uniform(&[10, 10, 10, 10]);
        assert_eq!((s, dof), (0.0, 3));
        assert!((p - 1.0).abs() < 1e-12);
    }
}
