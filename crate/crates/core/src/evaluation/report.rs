//! Result tables in Markdown and CSV, with the best value of each column
//! marked.

use serde::{Deserialize, Serialize};

use super::classification::ClassificationReport;
use super::correlation::CorrelationReport;

pub const CORRELATION_COLUMNS: [&str; 3] = ["Pearson", "Kendall", "Spearman"];
pub const CLASSIFICATION_COLUMNS: [&str; 5] = ["Accuracy", "Precision", "Recall", "F_beta", "Matthews"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    /// Free-text notes printed under the title.
    #[serde(default)]
    pub notes: Vec<String>,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "NaN".into(),
    }
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![], notes: vec![] }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.columns.len(), "row width must match the header");
        self.rows.push(TableRow { name: name.into(), values });
    }

    pub fn push_correlation(&mut self, name: impl Into<String>, r: &CorrelationReport) {
        self.push(name, vec![r.pearson, r.kendall, r.spearman]);
    }

    pub fn push_classification(&mut self, name: impl Into<String>, r: &ClassificationReport) {
        self.push(name, [r.accuracy, r.precision, r.recall, r.f_beta, r.matthews].map(Some).to_vec());
    }

    /// For each column, the rows holding its maximum (all of them on a tie).
    /// Values compare at the printed precision.
    pub fn best(&self) -> Vec<Vec<usize>> {
        (0..self.columns.len())
            .map(|c| {
                let shown: Vec<Option<f64>> =
                    self.rows.iter().map(|r| r.values[c].map(|v| (v * 1e4).round() / 1e4)).collect();
                let max = shown.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                shown.iter().enumerate().filter(|(_, v)| **v == Some(max)).map(|(i, _)| i).collect()
            })
            .collect()
    }

    /// Aligned Markdown with the best cell of each column in bold.
    pub fn to_markdown(&self) -> String {
        let best = self.best();
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("Model Name".to_string()).chain(self.columns.iter().cloned()).collect()];
        for (i, r) in self.rows.iter().enumerate() {
            let mut line = vec![r.name.clone()];
            for (c, v) in r.values.iter().enumerate() {
                let s = cell(*v);
                line.push(if best[c].contains(&i) { format!("**{s}**") } else { s });
            }
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..grid[0].len()).map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
        let fmt_row = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            format!("| {} |\n", cells.join(" | "))
        };
        let mut out = format!("## {}\n\n", self.title);
        for n in &self.notes {
            out.push_str(&format!("{n}\n\n"));
        }
        out.push_str(&fmt_row(&grid[0]));
        let rule: Vec<String> =
            widths.iter().enumerate().map(|(c, &w)| if c == 0 { "-".repeat(w) } else { format!("{}:", "-".repeat(w - 1)) }).collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
        for row in &grid[1..] {
            out.push_str(&fmt_row(row));
        }
        out
    }

    /// CSV with a trailing `best` column naming the columns a row leads.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let best = self.best();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Model Name".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("best".into());
        w.write_record(&header)?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.name.clone()];
            rec.extend(r.values.iter().map(|v| cell(*v)));
            let leads: Vec<&str> =
                self.columns.iter().enumerate().filter(|(c, _)| best[*c].contains(&i)).map(|(_, n)| n.as_str()).collect();
            rec.push(leads.join(";"));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["A", "B"]);
        t.push("m1", vec![Some(0.5), None]);
        t.push("m2", vec![Some(0.25), Some(0.1)]);
        t.push("m3", vec![Some(0.5), Some(-0.2)]);
        t
    }

    #[test]
    fn ties_are_all_marked() {
        assert_eq!(sample().best(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn markdown_layout() {
        let md = sample().to_markdown();
        let lines: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(lines[0], "| Model Name |          A |          B |");
        assert_eq!(lines[2], "| m1         | **0.5000** |        NaN |");
        assert!(lines.iter().all(|l| l.chars().count() == lines[0].chars().count()));
    }

    #[test]
    fn csv_has_best_column() {
        let csv = sample().to_csv().unwrap();
        assert_eq!(csv.lines().nth(2).unwrap(), "m2,0.2500,0.1000,B");
    }
}
