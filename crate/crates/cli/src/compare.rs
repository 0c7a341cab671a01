//! Field-by-field comparison of two result directories of one scenario.
//!
//! Fields are the numeric leaves of the summary `results`, the columns of
//! every CSV report and the data blocks of every VTK file. Each field gets
//! `max |a - b| / max(max |a|, max |b|)`; a shape or text mismatch counts
//! as an infinite difference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::artifacts::SUMMARY_FILE;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDiff {
    pub field: String,
    pub relative: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub tolerance: f64,
    pub fields: Vec<FieldDiff>,
    pub passed: bool,
}

impl CompareReport {
    pub fn failures(&self) -> impl Iterator<Item = &FieldDiff> {
        self.fields.iter().filter(|f| !f.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.fields {
            let mark = if f.passed { "ok" } else { "DIFF" };
            writeln!(s, "{:<60} {:>10.3e}  {mark}", f.field, f.relative).unwrap();
        }
        let failed = self.failures().count();
        writeln!(
            s,
            "compare {}: {} ({failed} of {} fields above tolerance {:e})",
            self.scenario,
            if self.passed { "PASS" } else { "FAIL" },
            self.fields.len(),
            self.tolerance
        )
        .unwrap();
        s
    }
}

/// One entry of a field: a number, or text compared verbatim.
#[derive(Clone, Debug, PartialEq)]
enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn parse(s: &str) -> Self {
        s.trim().parse().map(Entry::Number).unwrap_or_else(|_| Entry::Text(s.trim().to_string()))
    }
}

fn relative_difference(a: &[Entry], b: &[Entry]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (Entry::Number(x), Entry::Number(y)) => {
                if x.is_nan() || y.is_nan() {
                    if x.is_nan() != y.is_nan() {
                        return f64::INFINITY;
                    }
                    continue;
                }
                if x != y {
                    diff = diff.max((x - y).abs());
                }
                scale = scale.max(x.abs()).max(y.abs());
            }
            (x, y) if x == y => {}
            _ => return f64::INFINITY,
        }
    }
    if diff == 0.0 {
        0.0
    } else if scale.is_finite() {
        diff / scale
    } else {
        f64::INFINITY
    }
}

type Fields = BTreeMap<String, Vec<Entry>>;

fn json_leaves(v: &Value, path: &str, out: &mut Fields) {
    let entry = |e: Entry| vec![e];
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                json_leaves(child, &format!("{path}.{k}"), out);
            }
        }
        Value::Array(items) => {
            if items.iter().all(Value::is_number) {
                out.insert(path.to_string(), items.iter().map(|x| Entry::Number(x.as_f64().unwrap())).collect());
            } else {
                out.insert(format!("{path}.len"), entry(Entry::Number(items.len() as f64)));
                for (i, child) in items.iter().enumerate() {
                    json_leaves(child, &format!("{path}[{i}]"), out);
                }
            }
        }
        Value::Number(n) => {
            out.insert(path.to_string(), entry(Entry::Number(n.as_f64().unwrap())));
        }
        Value::Null => {
            out.insert(path.to_string(), entry(Entry::Number(f64::NAN)));
        }
        other => {
            out.insert(path.to_string(), entry(Entry::Text(other.to_string())));
        }
    }
}

fn csv_fields(name: &str, text: &str, out: &mut Fields) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let Some(header) = lines.next() else { return };
    let columns: Vec<&str> = header.split(',').collect();
    let mut data: Vec<Vec<Entry>> = vec![Vec::new(); columns.len()];
    let mut rows = 0usize;
    for line in lines {
        rows += 1;
        let cells: Vec<&str> = line.split(',').collect();
        for (c, col) in data.iter_mut().enumerate() {
            col.push(cells.get(c).map_or(Entry::Text(String::new()), |s| Entry::parse(s)));
        }
    }
    out.insert(format!("{name}:rows"), vec![Entry::Number(rows as f64)]);
    for (c, col) in columns.iter().zip(data) {
        out.insert(format!("{name}:{c}"), col);
    }
}

/// Numeric blocks of a legacy VTK file, keyed by their section header.
fn vtk_fields(name: &str, text: &str, out: &mut Fields) {
    let mut current: Option<String> = None;
    for line in text.lines().skip(4) {
        let head = line.split_whitespace().next().unwrap_or("");
        match head {
            "POINTS" | "CELLS" | "CELL_TYPES" => current = Some(head.to_string()),
            "SCALARS" | "VECTORS" => {
                let field = line.split_whitespace().nth(1).unwrap_or("");
                current = Some(format!("{} {field}", head.to_lowercase()));
            }
            "LOOKUP_TABLE" | "CELL_DATA" | "POINT_DATA" => {}
            _ => {
                if let Some(key) = &current {
                    out.entry(format!("{name}:{key}"))
                        .or_default()
                        .extend(line.split_whitespace().map(Entry::parse));
                }
            }
        }
    }
}

fn read(path: PathBuf) -> Result<String, CliError> {
    fs::read_to_string(&path).map_err(|e| CliError::Input {
        path,
        reason: e.to_string(),
    })
}

fn load_dir(dir: &Path) -> Result<(String, Fields), CliError> {
    let text = read(dir.join(SUMMARY_FILE))?;
    let summary: Value = serde_json::from_str(&text).map_err(|e| CliError::Input {
        path: dir.join(SUMMARY_FILE),
        reason: e.to_string(),
    })?;
    let scenario = summary["scenario"].as_str().unwrap_or_default().to_string();
    let mut fields = Fields::new();
    json_leaves(&summary["status"], "summary.status", &mut fields);
    json_leaves(&summary["results"], "summary.results", &mut fields);
    let artifacts: Vec<String> = summary["artifacts"]
        .as_object()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    for name in artifacts {
        let text = read(dir.join(&name))?;
        if name.ends_with(".csv") {
            csv_fields(&name, &text, &mut fields);
        } else if name.ends_with(".vtk") {
            vtk_fields(&name, &text, &mut fields);
        } else {
            // opaque artifact: equal content or a full difference
            let lines: Vec<Entry> = text.lines().filter(|l| !l.starts_with('#')).map(Entry::parse).collect();
            fields.insert(name, lines);
        }
    }
    Ok((scenario, fields))
}

pub fn compare_dirs(a: &Path, b: &Path, tolerance: f64) -> Result<CompareReport, CliError> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(CliError::config("tolerance", format!("must be non-negative, got {tolerance}")));
    }
    let (scenario_a, fields_a) = load_dir(a)?;
    let (scenario_b, fields_b) = load_dir(b)?;
    if scenario_a != scenario_b {
        return Err(CliError::config(
            "scenario",
            format!("result directories hold different scenarios ({scenario_a} vs {scenario_b})"),
        ));
    }
    let names: BTreeSet<&String> = fields_a.keys().chain(fields_b.keys()).collect();
    let fields: Vec<FieldDiff> = names
        .into_iter()
        .map(|name| {
            let relative = match (fields_a.get(name), fields_b.get(name)) {
                (Some(x), Some(y)) => relative_difference(x, y),
                _ => f64::INFINITY,
            };
            FieldDiff {
                field: name.clone(),
                relative,
                passed: relative <= tolerance,
            }
        })
        .collect();
    let passed = fields.iter().all(|f| f.passed);
    Ok(CompareReport {
        scenario: scenario_a,
        tolerance,
        fields,
        passed,
    })
}
