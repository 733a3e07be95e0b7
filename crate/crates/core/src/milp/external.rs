use std::path::{Path, PathBuf};
use std::process::Command;

use super::{export_lp, MilpError, MilpModel};
use crate::model::Alteration;

/// A solution read back from an external solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolution {
    /// One value per model variable; variables the solver did not list are 0.
    pub values: Vec<f64>,
    pub objective: f64,
    pub alteration: Option<Alteration>,
}

/// Parses `name value` lines. Blank lines and lines starting with `#` are
/// skipped; unknown names and malformed lines are errors.
pub fn parse_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>, MilpError> {
    let index = model.name_index();
    let mut values = vec![0.0; model.num_vars()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MilpError::Solution { line: i + 1, message };
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `name value`, got `{line}`")));
        };
        let &v = index.get(name).ok_or_else(|| err(format!("unknown variable `{name}`")))?;
        values[v] = value.parse().map_err(|_| err(format!("bad value `{value}`")))?;
    }
    Ok(values)
}

fn scratch_dir() -> std::io::Result<PathBuf> {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    let dir = std::env::temp_dir().join(format!("decoyforge-{}-{nanos}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Exports the model, runs `command` through `sh -c` and reads the solution
/// file back. `{lp}` and `{sol}` in the command are replaced by the two
/// paths; without placeholders they are appended as arguments.
pub fn solve_external(model: &MilpModel, command: &str) -> Result<ExternalSolution, MilpError> {
    let dir = scratch_dir().map_err(|source| MilpError::Io { path: std::env::temp_dir(), source })?;
    let result = run_in(model, command, &dir);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn run_in(model: &MilpModel, command: &str, dir: &Path) -> Result<ExternalSolution, MilpError> {
    let lp = dir.join("model.lp");
    let sol = dir.join("model.sol");
    export_lp(model, &lp)?;
    let script = if command.contains("{lp}") || command.contains("{sol}") {
        command.replace("{lp}", &quote(&lp)).replace("{sol}", &quote(&sol))
    } else {
        format!("{command} {} {}", quote(&lp), quote(&sol))
    };
    let fail = |message: String| MilpError::Solver { command: command.to_string(), message };
    let output = Command::new("sh").arg("-c").arg(&script).output().map_err(|e| fail(e.to_string()))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let last = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string();
        return Err(fail(format!("{} {last}", output.status)));
    }
    let text = std::fs::read_to_string(&sol).map_err(|source| MilpError::Io { path: sol.clone(), source })?;
    let values = parse_solution(model, &text)?;
    Ok(ExternalSolution { objective: values[model.objective()], alteration: model.decode_alteration(&values), values })
}
