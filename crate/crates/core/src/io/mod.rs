//! Problem files, result files and bundled problem generators.
//!
//! Matrices are nested row arrays; numbers are written with 17 significant
//! digits so doubles survive a write and reload exactly.

mod heat;
mod problem;
mod result;

pub use heat::{heat_default_nodes, heat_demo, heat_shift_for_abscissa, heat_top_eigenvalue};
pub use problem::{load_problem, matrix_json, number_json, parse_matrix, write_problem, Mode, ProblemFile};
pub use result::{read_result, ResultFile, VERSION};
