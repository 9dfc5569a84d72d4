//! Result tables and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub labels: Vec<String>,
    /// Row-major; every row has `labels.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Header line, then one line per row; values keep 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ResultTable, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let labels: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("row {k}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != labels.len() {
                return Err(format!("row {k} has {} cells, expected {}", row.len(), labels.len()));
            }
            rows.push(row);
        }
        Ok(ResultTable { labels, rows })
    }
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(table.to_csv().as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
