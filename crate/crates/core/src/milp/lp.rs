use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{count_stats, MilpError, MilpModel};

/// Continuation lines start once a row passes this width.
const WRAP: usize = 200;

/// `%.17g`: integers print plainly, everything else with 17 significant
/// digits, trailing zeros trimmed, exponent form outside `[1e-4, 1e17)`.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let fixed = format!("{:.*}", (16 - exp) as usize, v);
    trim_zeros(&fixed).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Line<'w, W: Write> {
    out: &'w mut W,
    width: usize,
}

impl<W: Write> Line<'_, W> {
    fn start(&mut self, text: &str) -> io::Result<()> {
        self.width = text.len();
        self.out.write_all(text.as_bytes())
    }

    fn push(&mut self, text: &str) -> io::Result<()> {
        if self.width + text.len() > WRAP {
            self.out.write_all(b"\n  ")?;
            self.width = 2;
        }
        self.width += text.len();
        self.out.write_all(text.as_bytes())
    }

    fn terms(&mut self, model: &MilpModel, terms: &[(usize, f64)]) -> io::Result<()> {
        let kept: Vec<&(usize, f64)> = terms.iter().filter(|(_, c)| *c != 0.0).collect();
        if kept.is_empty() {
            // LP syntax needs a variable on every row
            return self.push(&format!(" 0 {}", model.var_name(0)));
        }
        for (i, &&(v, c)) in kept.iter().enumerate() {
            let sign = match (i, c < 0.0) {
                (0, false) => "",
                (0, true) => "-",
                (_, false) => "+ ",
                (_, true) => "- ",
            };
            self.push(&format!(" {sign}{} {}", format_number(c.abs()), model.var_name(v)))?;
        }
        Ok(())
    }
}

/// Writes the model in CPLEX LP syntax. Output depends only on the model.
pub fn write_lp<W: Write>(model: &MilpModel, out: &mut W) -> io::Result<()> {
    let stats = count_stats(model);
    writeln!(out, "\\ decoy-reachability MILP")?;
    writeln!(out, "\\ vars: {} constraints: {}", stats.num_vars, stats.num_constraints)?;
    writeln!(out, "Maximize")?;
    writeln!(out, " obj: {}", model.var_name(model.objective()))?;
    writeln!(out, "Subject To")?;
    for row in model.rows() {
        let mut line = Line { out: &mut *out, width: 0 };
        line.start(&format!(" {}:", model.row_name(row.kind)))?;
        line.terms(model, &row.terms)?;
        line.push(&format!(" {} {}", row.sense.symbol(), format_number(row.rhs)))?;
        out.write_all(b"\n")?;
    }
    writeln!(out, "Bounds")?;
    for v in model.num_x()..model.num_vars() {
        let ub = model.upper_bound(v);
        if ub == 0.0 {
            writeln!(out, " {} = 0", model.var_name(v))?;
        } else {
            writeln!(out, " 0 <= {} <= {}", model.var_name(v), format_number(ub))?;
        }
    }
    writeln!(out, "Binary")?;
    for v in 0..model.num_x() {
        writeln!(out, " {}", model.var_name(v))?;
    }
    writeln!(out, "End")?;
    Ok(())
}

pub fn export_lp(model: &MilpModel, path: &Path) -> Result<(), MilpError> {
    let io_err = |source| MilpError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_lp(model, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}
