use std::collections::BTreeMap;

use super::{EvalReport, Strategy};
use crate::dataset::TestSetId;
use crate::{Error, Result};

/// Provenance lines written above every grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportHeader {
    pub entries: BTreeMap<String, String>,
}

impl ReportHeader {
    pub fn new(config_hash: &str, seed: u64, test_set_seed: u64) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("config_hash".into(), config_hash.to_string());
        entries.insert("seed".into(), seed.to_string());
        entries.insert("test_set_seed".into(), test_set_seed.to_string());
        entries.insert("code_version".into(), env!("CARGO_PKG_VERSION").to_string());
        Self { entries }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub strategy: Strategy,
    /// One accuracy per grid column.
    pub accuracies: Vec<f64>,
}

/// Strategies × test sets accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub header: ReportHeader,
    pub columns: Vec<TestSetId>,
    pub rows: Vec<GridRow>,
}

fn parse_err(detail: String) -> Error {
    Error::Parameter(format!("malformed report: {detail}"))
}

impl Grid {
    pub fn new(header: ReportHeader) -> Self {
        Self {
            header,
            columns: TestSetId::all(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, strategy: Strategy, report: &EvalReport) -> Result<()> {
        let accuracies = self
            .columns
            .iter()
            .map(|id| {
                report
                    .accuracy(*id)
                    .ok_or_else(|| Error::Parameter(format!("report for {strategy} lacks test set {id}")))
            })
            .collect::<Result<_>>()?;
        self.rows.push(GridRow { strategy, accuracies });
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(|r| r.accuracies.len()).sum()
    }

    fn title_cells(&self) -> Vec<String> {
        let mut t = vec!["strategy".to_string(), "regularization".into(), "training_set".into()];
        t.extend(self.columns.iter().map(|c| c.to_string()));
        t
    }

    fn row_cells(row: &GridRow) -> Vec<String> {
        let s = row.strategy;
        let mut cells = vec![s.id().to_string(), s.regularization().to_string(), s.training_set().to_string()];
        cells.extend(row.accuracies.iter().map(|a| format!("{a:.4}")));
        cells
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header.entries {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.title_cells().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&Self::row_cells(row).join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header.entries {
            out.push_str(&format!("<!-- {k}: {v} -->\n"));
        }
        let title = self.title_cells();
        out.push_str(&format!("| {} |\n", title.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(title.len())));
        for row in &self.rows {
            out.push_str(&format!("| {} |\n", Self::row_cells(row).join(" | ")));
        }
        out
    }

    fn from_table(header: ReportHeader, table: Vec<Vec<String>>) -> Result<Self> {
        let mut lines = table.into_iter();
        let title = lines.next().ok_or_else(|| parse_err("no column header".into()))?;
        if title.len() < 3 || title[0] != "strategy" {
            return Err(parse_err(format!("unexpected column header {title:?}")));
        }
        let columns = title[3..].iter().map(|c| c.parse()).collect::<Result<Vec<TestSetId>>>()?;
        let rows = lines
            .map(|cells| {
                if cells.len() != columns.len() + 3 {
                    return Err(parse_err(format!("row {cells:?} has {} cells", cells.len())));
                }
                let strategy: Strategy = cells[0].parse()?;
                let accuracies = cells[3..]
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|_| parse_err(format!("bad accuracy {c:?}"))))
                    .collect::<Result<_>>()?;
                Ok(GridRow { strategy, accuracies })
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, columns, rows })
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut header = ReportHeader::default();
        let mut table = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv.split_once(": ").ok_or_else(|| parse_err(format!("header line {line:?}")))?;
                header.entries.insert(k.into(), v.into());
            } else {
                table.push(line.split(',').map(|c| c.trim().to_string()).collect());
            }
        }
        Self::from_table(header, table)
    }

    pub fn parse_markdown(text: &str) -> Result<Self> {
        let mut header = ReportHeader::default();
        let mut table = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(kv) = line.strip_prefix("<!-- ").and_then(|l| l.strip_suffix(" -->")) {
                let (k, v) = kv.split_once(": ").ok_or_else(|| parse_err(format!("header line {line:?}")))?;
                header.entries.insert(k.into(), v.into());
            } else if line.starts_with("|---") {
                continue;
            } else if let Some(inner) = line.strip_prefix('|').and_then(|l| l.strip_suffix('|')) {
                table.push(inner.split('|').map(|c| c.trim().to_string()).collect());
            }
        }
        Self::from_table(header, table)
    }
}
