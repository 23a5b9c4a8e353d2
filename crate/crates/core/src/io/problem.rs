use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::operator::{relative_asymmetry, Matrix};
use crate::riccati::StateSpaceSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Riccati,
    Lyapunov,
    Sqrt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Riccati => "riccati",
            Mode::Lyapunov => "lyapunov",
            Mode::Sqrt => "sqrt",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riccati" => Ok(Mode::Riccati),
            "lyapunov" => Ok(Mode::Lyapunov),
            "sqrt" => Ok(Mode::Sqrt),
            other => Err(Error::Parse(format!(
                "field \"mode\": unknown mode {other:?} (expected riccati, lyapunov or sqrt)"
            ))),
        }
    }
}

/// A validated problem file.
///
/// Required fields by mode: riccati needs `m`, `p`, `A`, `B`, `C`;
/// lyapunov needs `A` and either `Q` or `p` with `C`; sqrt needs `a`, `N`, `Q`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemFile {
    pub name: Option<String>,
    pub mode: Mode,
    pub n: usize,
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub a: Option<Matrix>,
    pub b: Option<Matrix>,
    pub c: Option<Matrix>,
    pub k0: Option<Matrix>,
    /// Regularization `a` of the sqrt mode.
    pub reg: Option<f64>,
    pub n_mat: Option<Matrix>,
    pub q: Option<Matrix>,
}

const FIELDS: [&str; 12] = ["name", "mode", "n", "m", "p", "A", "B", "C", "K0", "a", "N", "Q"];

fn missing(field: &str) -> Error {
    Error::MissingField(field.to_string())
}

fn dim_error(field: &str, detail: String) -> Error {
    Error::FieldDimension {
        field: field.to_string(),
        detail,
    }
}

fn get_usize(obj: &Map<String, Value>, field: &str) -> Result<Option<usize>> {
    match obj.get(field) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| Error::Parse(format!("field \"{field}\": expected a nonnegative integer, found {v}"))),
    }
}

/// Reads an `rows x cols` matrix given as nested row arrays or as one flat
/// row-major array.
pub fn parse_matrix(field: &str, v: &Value, rows: usize, cols: usize) -> Result<Matrix> {
    let Value::Array(items) = v else {
        return Err(Error::Parse(format!("field \"{field}\": expected an array")));
    };
    let number = |x: &Value| {
        x.as_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| Error::Parse(format!("field \"{field}\": expected a finite number, found {x}")))
    };
    let nested = items.first().is_some_and(Value::is_array);
    let mut data = Vec::with_capacity(rows * cols);
    if nested {
        if items.len() != rows {
            return Err(dim_error(field, format!("expected {rows}x{cols}, found {} rows", items.len())));
        }
        for (i, row) in items.iter().enumerate() {
            let Value::Array(row) = row else {
                return Err(Error::Parse(format!("field \"{field}\": row {i} is not an array")));
            };
            if row.len() != cols {
                return Err(dim_error(
                    field,
                    format!("expected {rows}x{cols}, row {i} has {} entries", row.len()),
                ));
            }
            for x in row {
                data.push(number(x)?);
            }
        }
    } else {
        if items.len() != rows * cols {
            return Err(dim_error(
                field,
                format!("expected {rows}x{cols} = {} entries, found {}", rows * cols, items.len()),
            ));
        }
        for x in items {
            data.push(number(x)?);
        }
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

fn matrix_field(obj: &Map<String, Value>, field: &str, rows: usize, cols: usize) -> Result<Option<Matrix>> {
    obj.get(field).map(|v| parse_matrix(field, v, rows, cols)).transpose()
}

fn require<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| missing(field))
}

fn require_symmetric(field: &str, m: &Matrix) -> Result<()> {
    let asym = relative_asymmetry(m);
    if asym > 1e-12 {
        return Err(Error::Parse(format!(
            "field \"{field}\": matrix is not symmetric (relative asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

impl ProblemFile {
    /// Riccati-mode file for a state-space system.
    pub fn riccati(name: Option<String>, sys: &StateSpaceSystem) -> Self {
        ProblemFile {
            name,
            mode: Mode::Riccati,
            n: sys.n(),
            m: Some(sys.m()),
            p: Some(sys.p()),
            a: Some(sys.a().clone()),
            b: Some(sys.b().clone()),
            c: Some(sys.c().clone()),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(Error::Parse("top level must be a JSON object".into()));
        };
        if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown field \"{k}\"")));
        }
        let name = match obj.get("name") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => return Err(Error::Parse(format!("field \"name\": expected a string, found {v}"))),
        };
        let mode = match obj.get("mode") {
            None => Mode::Riccati,
            Some(Value::String(s)) => s.parse()?,
            Some(v) => return Err(Error::Parse(format!("field \"mode\": expected a string, found {v}"))),
        };
        let n = require(get_usize(&obj, "n")?, "n")?;
        let m = get_usize(&obj, "m")?;
        let p = get_usize(&obj, "p")?;
        let a = matrix_field(&obj, "A", n, n)?;
        let b = match (obj.get("B"), m) {
            (Some(_), None) => return Err(missing("m")),
            (_, Some(m)) => matrix_field(&obj, "B", n, m)?,
            (None, None) => None,
        };
        let c = match (obj.get("C"), p) {
            (Some(_), None) => return Err(missing("p")),
            (_, Some(p)) => matrix_field(&obj, "C", p, n)?,
            (None, None) => None,
        };
        let k0 = match (obj.get("K0"), m) {
            (Some(_), None) => return Err(missing("m")),
            (_, Some(m)) => matrix_field(&obj, "K0", m, n)?,
            (None, None) => None,
        };
        let reg = match obj.get("a") {
            None => None,
            Some(v) => Some(
                v.as_f64()
                    .ok_or_else(|| Error::Parse(format!("field \"a\": expected a number, found {v}")))?,
            ),
        };
        let n_mat = matrix_field(&obj, "N", n, n)?;
        let q = matrix_field(&obj, "Q", n, n)?;

        let problem = ProblemFile {
            name,
            mode,
            n,
            m,
            p,
            a,
            b,
            c,
            k0,
            reg,
            n_mat,
            q,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Mode-specific presence checks and symmetry of `N` and `Q`.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Riccati => {
                require(self.m, "m")?;
                require(self.p, "p")?;
                require(self.a.as_ref(), "A")?;
                require(self.b.as_ref(), "B")?;
                require(self.c.as_ref(), "C")?;
            }
            Mode::Lyapunov => {
                require(self.a.as_ref(), "A")?;
                if self.q.is_none() {
                    require(self.c.as_ref(), "C")?;
                }
            }
            Mode::Sqrt => {
                require(self.reg, "a")?;
                require(self.n_mat.as_ref(), "N")?;
                require(self.q.as_ref(), "Q")?;
            }
        }
        for (field, m) in [("N", &self.n_mat), ("Q", &self.q)] {
            if let Some(m) = m {
                require_symmetric(field, m)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let mut entries: Vec<String> = Vec::new();
        if let Some(name) = &self.name {
            entries.push(format!("  \"name\": {}", Value::String(name.clone())));
        }
        entries.push(format!("  \"mode\": \"{}\"", self.mode.as_str()));
        entries.push(format!("  \"n\": {}", self.n));
        for (key, v) in [("m", self.m), ("p", self.p)] {
            if let Some(v) = v {
                entries.push(format!("  \"{key}\": {v}"));
            }
        }
        for (key, m) in [("A", &self.a), ("B", &self.b), ("C", &self.c), ("K0", &self.k0)] {
            if let Some(m) = m {
                entries.push(format!("  \"{key}\": {}", matrix_json(m, "  ")));
            }
        }
        if let Some(a) = self.reg {
            entries.push(format!("  \"a\": {}", number_json(a)));
        }
        for (key, m) in [("N", &self.n_mat), ("Q", &self.q)] {
            if let Some(m) = m {
                entries.push(format!("  \"{key}\": {}", matrix_json(m, "  ")));
            }
        }
        out.push_str(&entries.join(",\n"));
        out.push_str("\n}\n");
        out
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ProblemFile::from_json(&text)
}

pub fn write_problem(path: &Path, problem: &ProblemFile) -> Result<()> {
    std::fs::write(path, problem.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// 17 significant digits; `null` for non-finite values.
pub fn number_json(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Nested row arrays, one row per line.
pub fn matrix_json(m: &Matrix, indent: &str) -> String {
    if m.nrows() == 0 {
        return "[]".into();
    }
    let mut out = String::from("[\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| number_json(x)).collect();
        let sep = if i + 1 < m.nrows() { "," } else { "" };
        let _ = writeln!(out, "{indent}  [{}]{sep}", row.join(", "));
    }
    out.push_str(indent);
    out.push(']');
    out
}
