//! Grid geometry, nodal fields and the expression language used to
//! describe prestrains and displacements on the midplate.

mod expr;
mod field;
mod grid;
mod jet;
mod spline;

pub use expr::{eval_jet, parse_expression, BinOp, EvalError, Expr, FieldExpr, Func, ParseError};
pub use field::{
    read_csv, sym2_slot, sym3_slot, write_csv, CsvError, SampleError, ScalarGridField, SymExpr3, SymField3,
    SymGridField2, VectorGridField2,
};
pub use grid::{Grid2, GridError};
pub use jet::{Jet2, Jet3};
pub use spline::Spline2;
