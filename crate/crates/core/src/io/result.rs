use std::path::Path;

use serde_json::Value;

use super::problem::{matrix_json, number_json, parse_matrix, Mode};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::operator::Matrix;
use crate::riccati::TraceRow;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Solver output. Contains no timestamps, so equal inputs give equal files.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultFile {
    pub name: Option<String>,
    pub mode: Mode,
    pub p: Matrix,
    pub k: Option<Matrix>,
    /// `|F(P)|_F` of the equation solved.
    pub residual: f64,
    /// `residual / (1 + |Q|_F + |A|_F |P|_F)`.
    pub relative_residual: f64,
    pub iterations: usize,
    pub kappa: Option<f64>,
    pub closed_loop_abscissa: f64,
    pub trace: Vec<TraceRow>,
    pub config: SolverConfig,
}

fn opt_number(x: Option<f64>) -> String {
    x.map(number_json).unwrap_or_else(|| "null".into())
}

impl ResultFile {
    pub fn to_json(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let mut entries = vec![
            format!("  \"version\": \"{VERSION}\""),
            format!(
                "  \"name\": {}",
                self.name.as_ref().map(|s| Value::String(s.clone()).to_string()).unwrap_or_else(|| "null".into())
            ),
            format!("  \"mode\": \"{}\"", self.mode.as_str()),
            format!("  \"seed\": {}", self.config.seed),
            format!("  \"config\": {config}"),
            format!("  \"P\": {}", matrix_json(&self.p, "  ")),
        ];
        entries.push(match &self.k {
            Some(k) => format!("  \"K\": {}", matrix_json(k, "  ")),
            None => "  \"K\": null".into(),
        });
        entries.push(format!("  \"residual\": {}", number_json(self.residual)));
        entries.push(format!("  \"relativeResidual\": {}", number_json(self.relative_residual)));
        entries.push(format!("  \"iterations\": {}", self.iterations));
        entries.push(format!("  \"kappa\": {}", opt_number(self.kappa)));
        entries.push(format!("  \"closedLoopAbscissa\": {}", number_json(self.closed_loop_abscissa)));
        let rows: Vec<String> = self
            .trace
            .iter()
            .map(|r| {
                format!(
                    "    {{\"step\": {}, \"residual\": {}, \"stepGap\": {}, \"abscissa\": {}, \"errorToOracle\": {}}}",
                    r.step,
                    number_json(r.residual),
                    opt_number(r.step_gap),
                    number_json(r.abscissa),
                    opt_number(r.error_to_oracle)
                )
            })
            .collect();
        if rows.is_empty() {
            entries.push("  \"trace\": []".into());
        } else {
            entries.push(format!("  \"trace\": [\n{}\n  ]", rows.join(",\n")));
        }
        format!("{{\n{}\n}}\n", entries.join(",\n"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// `P` and the echoed configuration of a written result.
pub fn read_result(text: &str) -> Result<(Matrix, SolverConfig)> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let config: SolverConfig = serde_json::from_value(v.get("config").cloned().ok_or_else(|| Error::MissingField("config".into()))?)
        .map_err(|e| Error::Parse(format!("field \"config\": {e}")))?;
    let p = v.get("P").ok_or_else(|| Error::MissingField("P".into()))?;
    let n = p.as_array().map_or(0, Vec::len);
    Ok((parse_matrix("P", p, n, n)?, config))
}
