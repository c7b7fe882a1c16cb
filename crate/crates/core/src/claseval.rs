//! Confusion matrices, class coarsening and exact precision/recall.
//!
//! Rows are the true class, columns the predicted class. Metrics are kept as
//! exact fractions and only turned into decimals for output, so identities
//! such as "micro-averaged recall equals accuracy" hold exactly.

use std::collections::BTreeMap;
use std::io;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

pub type Fraction = Ratio<u64>;

#[derive(Debug, Error)]
pub enum ClassEvalError {
    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("counts must form a {0}x{0} matrix")]
    Shape(usize),
    #[error("mapping does not cover label {0:?}")]
    Unmapped(String),
    #[error("unknown class mapping {0:?}")]
    UnknownMapping(String),
    #[error("predictions: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, ClassEvalError> {
        check_unique(&labels)?;
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|row| row.len() != n) {
            return Err(ClassEvalError::Shape(n));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn zeros(labels: Vec<String>) -> Result<Self, ClassEvalError> {
        let n = labels.len();
        Self::new(labels, vec![vec![0; n]; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    fn index(&self, label: &str) -> Result<usize, ClassEvalError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ClassEvalError::UnknownLabel(label.to_string()))
    }

    pub fn count(&self, truth: &str, predicted: &str) -> Result<u64, ClassEvalError> {
        Ok(self.counts[self.index(truth)?][self.index(predicted)?])
    }
}

fn check_unique(labels: &[String]) -> Result<(), ClassEvalError> {
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(ClassEvalError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Tally `(true, predicted)` pairs over a fixed label order.
pub fn build_confusion<S: AsRef<str>>(
    pairs: &[(S, S)],
    labels: &[String],
) -> Result<ConfusionMatrix, ClassEvalError> {
    let mut m = ConfusionMatrix::zeros(labels.to_vec())?;
    for (truth, predicted) in pairs {
        let i = m.index(truth.as_ref())?;
        let j = m.index(predicted.as_ref())?;
        m.counts[i][j] += 1;
    }
    Ok(m)
}

/// Total map from fine labels to coarse labels. Coarse labels are ordered by
/// first appearance when walking the fine labels in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMapping {
    name: String,
    mapping: BTreeMap<String, String>,
}

impl ClassMapping {
    pub fn new<I, A, B>(name: &str, pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        ClassMapping {
            name: name.to_string(),
            mapping: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    pub fn identity(labels: &[String]) -> Self {
        Self::new("identity", labels.iter().map(|l| (l.clone(), l.clone())))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, fine: &str) -> Option<&str> {
        self.mapping.get(fine).map(String::as_str)
    }

    /// The fine labels this mapping knows, sorted.
    pub fn fine_labels(&self) -> Vec<String> {
        self.mapping.keys().cloned().collect()
    }

    /// Coarse labels reached from `fine`, in first-appearance order.
    pub fn coarse_labels(&self, fine: &[String]) -> Result<Vec<String>, ClassEvalError> {
        let mut out: Vec<String> = Vec::new();
        for label in fine {
            let coarse = self
                .get(label)
                .ok_or_else(|| ClassEvalError::Unmapped(label.clone()))?;
            if !out.iter().any(|c| c == coarse) {
                out.push(coarse.to_string());
            }
        }
        Ok(out)
    }
}

/// Bee groups used by the shipped mappings: one invasive class and five
/// native groups.
pub const INVASIVE: &str = "apis_mellifera";
pub const SIX_CLASS_LABELS: [&str; 6] = [
    INVASIVE,
    "mason_bee",
    "carpenter_bee",
    "leafcutter_bee",
    "bumble_bee",
    "sweat_bee",
];

pub fn six_class_labels() -> Vec<String> {
    SIX_CLASS_LABELS.iter().map(|s| s.to_string()).collect()
}

/// `six_class` (identity), `three_class` (invasive, stout natives: mason and
/// carpenter, banded natives: leafcutter, bumble and sweat) and `two_class`
/// (invasive vs native).
pub fn named_mapping(name: &str) -> Result<ClassMapping, ClassEvalError> {
    let labels = six_class_labels();
    let coarse = |f: &dyn Fn(&str) -> &'static str| {
        ClassMapping::new(name, labels.iter().map(|l| (l.clone(), f(l).to_string())))
    };
    match name {
        "six_class" => Ok(ClassMapping::new(name, labels.iter().map(|l| (l.clone(), l.clone())))),
        "three_class" => Ok(coarse(&|l| match l {
            INVASIVE => INVASIVE,
            "mason_bee" | "carpenter_bee" => "native_stout",
            _ => "native_banded",
        })),
        "two_class" => Ok(coarse(&|l| if l == INVASIVE { INVASIVE } else { "native" })),
        other => Err(ClassEvalError::UnknownMapping(other.to_string())),
    }
}

pub const MAPPING_NAMES: [&str; 3] = ["six_class", "three_class", "two_class"];

/// Sum counts into coarse cells on both axes.
pub fn coarsen_confusion(m: &ConfusionMatrix, f: &ClassMapping) -> Result<ConfusionMatrix, ClassEvalError> {
    let coarse = f.coarse_labels(&m.labels)?;
    let target: Vec<usize> = m
        .labels
        .iter()
        .map(|l| {
            let c = f.get(l).expect("checked by coarse_labels");
            coarse.iter().position(|x| x == c).expect("coarse label present")
        })
        .collect();
    let mut out = ConfusionMatrix::zeros(coarse)?;
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            out.counts[target[i]][target[j]] += n;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMetrics {
    pub label: String,
    pub true_positive: u64,
    pub true_count: u64,
    pub predicted_count: u64,
    /// `None` when the class is never predicted.
    pub precision: Option<Fraction>,
    /// `None` when the class has no true instances.
    pub recall: Option<Fraction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsReport {
    pub accuracy: Fraction,
    pub total: u64,
    pub classes: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Pooled TP / (TP + FN) over all classes.
    pub fn micro_recall(&self) -> Fraction {
        let tp: u64 = self.classes.iter().map(|c| c.true_positive).sum();
        let support: u64 = self.classes.iter().map(|c| c.true_count).sum();
        Fraction::new(tp, support)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,value\n");
        out.push_str(&format!("accuracy,,{}\n", decimal(Some(self.accuracy))));
        for c in &self.classes {
            out.push_str(&format!("precision,{},{}\n", c.label, decimal(c.precision)));
            out.push_str(&format!("recall,{},{}\n", c.label, decimal(c.recall)));
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct ClassJson<'a> {
            label: &'a str,
            true_count: u64,
            predicted_count: u64,
            precision: Option<f64>,
            precision_exact: Option<String>,
            recall: Option<f64>,
            recall_exact: Option<String>,
        }
        #[derive(Serialize)]
        struct ReportJson<'a> {
            accuracy: f64,
            accuracy_exact: String,
            total: u64,
            classes: Vec<ClassJson<'a>>,
        }
        let json = ReportJson {
            accuracy: to_f64(self.accuracy),
            accuracy_exact: self.accuracy.to_string(),
            total: self.total,
            classes: self
                .classes
                .iter()
                .map(|c| ClassJson {
                    label: &c.label,
                    true_count: c.true_count,
                    predicted_count: c.predicted_count,
                    precision: c.precision.map(to_f64),
                    precision_exact: c.precision.map(|r| r.to_string()),
                    recall: c.recall.map(to_f64),
                    recall_exact: c.recall.map(|r| r.to_string()),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&json).expect("plain data serialises");
        text.push('\n');
        text
    }
}

pub fn to_f64(r: Fraction) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn decimal(r: Option<Fraction>) -> String {
    r.map(|r| format!("{:.4}", to_f64(r))).unwrap_or_default()
}

pub fn compute_metrics(m: &ConfusionMatrix) -> Result<MetricsReport, ClassEvalError> {
    let total = m.total();
    if total == 0 {
        return Err(ClassEvalError::EmptyMatrix);
    }
    let n = m.labels.len();
    let classes = (0..n)
        .map(|k| {
            let tp = m.counts[k][k];
            let true_count: u64 = m.counts[k].iter().sum();
            let predicted_count: u64 = m.counts.iter().map(|row| row[k]).sum();
            ClassMetrics {
                label: m.labels[k].clone(),
                true_positive: tp,
                true_count,
                predicted_count,
                precision: (predicted_count > 0).then(|| Fraction::new(tp, predicted_count)),
                recall: (true_count > 0).then(|| Fraction::new(tp, true_count)),
            }
        })
        .collect();
    Ok(MetricsReport {
        accuracy: Fraction::new(m.trace(), total),
        total,
        classes,
    })
}

/// Read `true_label,predicted_label` rows. A header row is expected.
pub fn read_prediction_pairs<R: io::Read>(reader: R) -> Result<Vec<(String, String)>, ClassEvalError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut pairs = Vec::new();
    for row in csv.deserialize() {
        let (truth, predicted): (String, String) = row?;
        pairs.push((truth, predicted));
    }
    Ok(pairs)
}
