use std::io::Write;

use crate::args::Output;
use crate::Failure;

/// Rows of one result set, rendered as a table or as CSV.
pub struct Report {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Report { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn table(&self) -> String {
        let mut width: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &mut dyn Iterator<Item = &str>| {
            let padded: Vec<String> = cells.zip(&width).map(|(c, &w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut text = line(&mut self.columns.iter().copied());
        for row in &self.rows {
            text += &line(&mut row.iter().map(String::as_str));
        }
        text
    }

    pub fn emit(&self, output: &Output) -> Result<(), Failure> {
        let io = |e: std::io::Error| Failure::io("stdout", e);
        match output {
            Output::Table => std::io::stdout().write_all(self.table().as_bytes()).map_err(io),
            Output::Csv => self.csv(std::io::stdout().lock()).map_err(|e| Failure::io("stdout", e.into())),
            Output::CsvFile(path) => {
                let file = std::fs::File::create(path).map_err(|e| Failure::io(path.display(), e))?;
                self.csv(file).map_err(|e| Failure::io(path.display(), e.into()))?;
                std::io::stdout().write_all(self.table().as_bytes()).map_err(io)
            }
        }
    }
}

pub fn seconds(elapsed: std::time::Duration, no_timing: bool) -> String {
    if no_timing {
        "0.000".to_string()
    } else {
        format!("{:.3}", elapsed.as_secs_f64())
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn number(x: f64) -> String {
    format!("{x}")
}
