//! Nodal fields on a [`Grid2`] and their expression-valued counterparts.

use super::expr::{EvalError, FieldExpr, ParseError};
use super::grid::Grid2;
use super::jet::Jet3;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation failed at node {node} (i={i}, j={j}): {source}")]
pub struct SampleError {
    pub node: usize,
    pub i: usize,
    pub j: usize,
    #[source]
    pub source: EvalError,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv layout: {0}")]
    Layout(String),
}

/// Upper-triangle slot of entry (a, b) of a symmetric 2×2 matrix.
pub fn sym2_slot(a: usize, b: usize) -> usize {
    a.min(b) + a.max(b)
}

/// Upper-triangle slot of entry (a, b) of a symmetric 3×3 matrix,
/// ordering 11, 12, 13, 22, 23, 33.
pub fn sym3_slot(a: usize, b: usize) -> usize {
    const SLOT: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    SLOT[a][b]
}

fn sample_with<const K: usize>(
    grid: &Grid2,
    exprs: [&FieldExpr; K],
) -> Result<Vec<[f64; K]>, SampleError> {
    (0..grid.len())
        .map(|k| {
            let (x, y) = grid.point(k);
            let mut out = [0.0; K];
            for (c, e) in exprs.iter().enumerate() {
                out[c] = e.eval(x, y).map_err(|source| {
                    let (i, j) = grid.ij(k);
                    SampleError { node: k, i, j, source }
                })?;
            }
            Ok(out)
        })
        .collect()
}

macro_rules! grid_field_common {
    ($name:ident, $elem:ty) => {
        impl $name {
            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn max_abs(&self) -> f64 {
                self.flat().fold(0.0, |m, v: f64| m.max(v.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.flat().all(|v: f64| v.is_finite())
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = $elem;
            fn index(&self, k: usize) -> &$elem {
                &self.values[k]
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGridField {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridField2 {
    pub grid: Grid2,
    pub values: Vec<[f64; 2]>,
}

/// Symmetric 2×2 field; each node stores (F11, F12, F22).
#[derive(Debug, Clone, PartialEq)]
pub struct SymGridField2 {
    pub grid: Grid2,
    pub values: Vec<[f64; 3]>,
}

/// Symmetric 3×3 field; each node stores (S11, S12, S13, S22, S23, S33).
#[derive(Debug, Clone, PartialEq)]
pub struct SymField3 {
    pub grid: Grid2,
    pub values: Vec<[f64; 6]>,
}

grid_field_common!(ScalarGridField, f64);
grid_field_common!(VectorGridField2, [f64; 2]);
grid_field_common!(SymGridField2, [f64; 3]);
grid_field_common!(SymField3, [f64; 6]);

impl ScalarGridField {
    pub fn zeros(grid: Grid2) -> Self {
        ScalarGridField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| { let (x, y) = grid.point(k); f(x, y) }).collect();
        ScalarGridField { grid, values }
    }

    pub fn from_values(grid: Grid2, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarGridField { grid, values }
    }

    pub fn sample(expr: &FieldExpr, grid: &Grid2) -> Result<Self, SampleError> {
        let v = sample_with(grid, [expr])?;
        Ok(ScalarGridField { grid: *grid, values: v.into_iter().map(|[a]| a).collect() })
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarGridField { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), CsvError> {
        write_csv_file(path, &self.grid, &["value"], |k| vec![self.values[k]])
    }

    pub fn from_csv(path: &Path, grid: &Grid2) -> Result<Self, CsvError> {
        let rows = read_csv(std::fs::File::open(path)?, grid, 1)?;
        Ok(ScalarGridField { grid: *grid, values: rows.into_iter().map(|r| r[0]).collect() })
    }
}

impl VectorGridField2 {
    pub fn zeros(grid: Grid2) -> Self {
        VectorGridField2 { grid, values: vec![[0.0; 2]; grid.len()] }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let values = (0..grid.len()).map(|k| { let (x, y) = grid.point(k); f(x, y) }).collect();
        VectorGridField2 { grid, values }
    }

    pub fn from_components(a: &ScalarGridField, b: &ScalarGridField) -> Self {
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| [x, y]).collect();
        VectorGridField2 { grid: a.grid, values }
    }

    pub fn sample(exprs: &[FieldExpr; 2], grid: &Grid2) -> Result<Self, SampleError> {
        Ok(VectorGridField2 { grid: *grid, values: sample_with(grid, [&exprs[0], &exprs[1]])? })
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flat_map(|v| v.iter().copied())
    }

    pub fn component(&self, c: usize) -> ScalarGridField {
        ScalarGridField { grid: self.grid, values: self.values.iter().map(|v| v[c]).collect() }
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), CsvError> {
        write_csv_file(path, &self.grid, &["c1", "c2"], |k| self.values[k].to_vec())
    }

    pub fn from_csv(path: &Path, grid: &Grid2) -> Result<Self, CsvError> {
        let rows = read_csv(std::fs::File::open(path)?, grid, 2)?;
        Ok(VectorGridField2 { grid: *grid, values: rows.into_iter().map(|r| [r[0], r[1]]).collect() })
    }
}

impl SymGridField2 {
    pub fn zeros(grid: Grid2) -> Self {
        SymGridField2 { grid, values: vec![[0.0; 3]; grid.len()] }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let values = (0..grid.len()).map(|k| { let (x, y) = grid.point(k); f(x, y) }).collect();
        SymGridField2 { grid, values }
    }

    pub fn sample(exprs: &[FieldExpr; 3], grid: &Grid2) -> Result<Self, SampleError> {
        Ok(SymGridField2 { grid: *grid, values: sample_with(grid, [&exprs[0], &exprs[1], &exprs[2]])? })
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flat_map(|v| v.iter().copied())
    }

    pub fn entry(&self, k: usize, a: usize, b: usize) -> f64 {
        self.values[k][sym2_slot(a, b)]
    }

    pub fn component(&self, c: usize) -> ScalarGridField {
        ScalarGridField { grid: self.grid, values: self.values.iter().map(|v| v[c]).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymGridField2 { grid: self.grid, values: self.values.iter().map(|v| v.map(|x| c * x)).collect() }
    }

    /// self + c · other.
    pub fn add_scaled(&self, other: &SymGridField2, c: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]])
            .collect();
        SymGridField2 { grid: self.grid, values }
    }

    /// Pointwise Frobenius norm squared (off-diagonal counted twice).
    pub fn frob2(&self, k: usize) -> f64 {
        let m = self.values[k];
        m[0] * m[0] + 2.0 * m[1] * m[1] + m[2] * m[2]
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), CsvError> {
        write_csv_file(path, &self.grid, &["f11", "f12", "f22"], |k| self.values[k].to_vec())
    }

    pub fn from_csv(path: &Path, grid: &Grid2) -> Result<Self, CsvError> {
        let rows = read_csv(std::fs::File::open(path)?, grid, 3)?;
        Ok(SymGridField2 { grid: *grid, values: rows.into_iter().map(|r| [r[0], r[1], r[2]]).collect() })
    }
}

impl SymField3 {
    pub fn zeros(grid: Grid2) -> Self {
        SymField3 { grid, values: vec![[0.0; 6]; grid.len()] }
    }

    pub fn sample(exprs: &SymExpr3, grid: &Grid2) -> Result<Self, SampleError> {
        let e = &exprs.entries;
        Ok(SymField3 { grid: *grid, values: sample_with(grid, [&e[0], &e[1], &e[2], &e[3], &e[4], &e[5]])? })
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flat_map(|v| v.iter().copied())
    }

    pub fn entry(&self, k: usize, a: usize, b: usize) -> f64 {
        self.values[k][sym3_slot(a, b)]
    }

    /// The in-plane 2×2 block.
    pub fn block22(&self) -> SymGridField2 {
        SymGridField2 { grid: self.grid, values: self.values.iter().map(|v| [v[0], v[1], v[3]]).collect() }
    }

    /// The mixed column (S31, S32).
    pub fn col3(&self) -> VectorGridField2 {
        VectorGridField2 { grid: self.grid, values: self.values.iter().map(|v| [v[2], v[4]]).collect() }
    }

    pub fn component33(&self) -> ScalarGridField {
        ScalarGridField { grid: self.grid, values: self.values.iter().map(|v| v[5]).collect() }
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), CsvError> {
        write_csv_file(path, &self.grid, &["s11", "s12", "s13", "s22", "s23", "s33"], |k| self.values[k].to_vec())
    }

    pub fn from_csv(path: &Path, grid: &Grid2) -> Result<Self, CsvError> {
        let rows = read_csv(std::fs::File::open(path)?, grid, 6)?;
        let values = rows.into_iter().map(|r| [r[0], r[1], r[2], r[3], r[4], r[5]]).collect();
        Ok(SymField3 { grid: *grid, values })
    }
}

/// A symmetric 3×3 matrix of expressions, stored as its upper triangle
/// (11, 12, 13, 22, 23, 33).
#[derive(Debug, Clone, PartialEq)]
pub struct SymExpr3 {
    pub entries: [FieldExpr; 6],
}

impl SymExpr3 {
    pub fn zero() -> Self {
        SymExpr3 { entries: std::array::from_fn(|_| FieldExpr::constant(0.0)) }
    }

    pub fn parse(upper: [&str; 6]) -> Result<Self, ParseError> {
        let mut entries = Vec::with_capacity(6);
        for s in upper {
            entries.push(s.parse::<FieldExpr>()?);
        }
        Ok(SymExpr3 { entries: entries.try_into().unwrap() })
    }

    /// Builds the matrix from (row, col, source) triples; unlisted entries are 0.
    pub fn from_entries(list: &[(usize, usize, &str)]) -> Result<Self, ParseError> {
        let mut m = SymExpr3::zero();
        for &(a, b, s) in list {
            m.entries[sym3_slot(a, b)] = s.parse()?;
        }
        Ok(m)
    }

    pub fn entry(&self, a: usize, b: usize) -> &FieldExpr {
        &self.entries[sym3_slot(a, b)]
    }

    pub fn is_zero_literal(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero_literal())
    }

    /// Third-order jets of all six entries at a point.
    pub fn jets(&self, x1: f64, x2: f64) -> Result<[Jet3; 6], EvalError> {
        let mut out = [Jet3::default(); 6];
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval_jet3(x1, x2)?;
        }
        Ok(out)
    }

    pub fn sample(&self, grid: &Grid2) -> Result<SymField3, SampleError> {
        SymField3::sample(self, grid)
    }
}

fn write_csv_file(
    path: &Path,
    grid: &Grid2,
    names: &[&str],
    row: impl Fn(usize) -> Vec<f64>,
) -> Result<(), CsvError> {
    let f = std::fs::File::create(path)?;
    write_csv(f, grid, names, row)
}

/// Writes one row per node in flat-index order with header `x1,x2,<names>`.
pub fn write_csv<W: Write>(
    w: W,
    grid: &Grid2,
    names: &[&str],
    row: impl Fn(usize) -> Vec<f64>,
) -> Result<(), CsvError> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["x1", "x2"];
    header.extend_from_slice(names);
    wr.write_record(&header)?;
    for k in 0..grid.len() {
        let (x, y) = grid.point(k);
        let mut rec = vec![format!("{x:?}"), format!("{y:?}")];
        rec.extend(row(k).iter().map(|v| format!("{v:?}")));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `ncomp` component columns; node coordinates must match the grid.
pub fn read_csv<R: Read>(r: R, grid: &Grid2, ncomp: usize) -> Result<Vec<Vec<f64>>, CsvError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.len() != 2 + ncomp || &headers[0] != "x1" || &headers[1] != "x2" {
        return Err(CsvError::Layout(format!(
            "expected header x1,x2 plus {ncomp} component columns, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let tol = 1e-9 * (grid.x_max - grid.x_min).abs().max((grid.y_max - grid.y_min).abs());
    let mut rows = Vec::with_capacity(grid.len());
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        if k >= grid.len() {
            return Err(CsvError::Layout(format!("more than {} rows", grid.len())));
        }
        let nums: Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| CsvError::Layout(format!("row {k}: {e}")))?;
        let (x, y) = grid.point(k);
        if (nums[0] - x).abs() > tol || (nums[1] - y).abs() > tol {
            return Err(CsvError::Layout(format!(
                "row {k}: coordinates ({}, {}) do not match grid node ({x}, {y})",
                nums[0], nums[1]
            )));
        }
        if nums[2..].iter().any(|v| !v.is_finite()) {
            return Err(CsvError::Layout(format!("row {k}: non-finite value")));
        }
        rows.push(nums[2..].to_vec());
    }
    if rows.len() != grid.len() {
        return Err(CsvError::Layout(format!("expected {} rows, found {}", grid.len(), rows.len())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sampling() {
        let g = Grid2::unit_square(5).unwrap();
        let f = ScalarGridField::sample(&"1".parse().unwrap(), &g).unwrap();
        assert_eq!(f.values, vec![1.0; 25]);
    }

    #[test]
    fn coordinate_sampling() {
        let g = Grid2::unit_square(11).unwrap();
        let f = ScalarGridField::sample(&"x1".parse().unwrap(), &g).unwrap();
        for j in 0..11 {
            for i in 0..11 {
                assert_eq!(f[g.idx(i, j)], i as f64 / 10.0);
            }
        }
    }

    #[test]
    fn symmetric_sampling_shares_entries() {
        let g = Grid2::unit_square(5).unwrap();
        let m = SymExpr3::from_entries(&[(0, 2, "x2")]).unwrap();
        let s = m.sample(&g).unwrap();
        for k in 0..g.len() {
            assert_eq!(s.entry(k, 0, 2), s.entry(k, 2, 0));
            assert_eq!(s.entry(k, 2, 0), g.point(k).1);
        }
    }

    #[test]
    fn sampling_error_reports_node() {
        let g = Grid2::unit_square(5).unwrap();
        let err = ScalarGridField::sample(&"log(x1)".parse().unwrap(), &g).unwrap_err();
        assert_eq!(err.node, 0);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid2::new(-1.0, 1.0, 0.0, 2.0, 6, 5).unwrap();
        let f = SymGridField2::from_fn(g, |x, y| [x, x * y, y.sin()]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &g, &["a", "b", "c"], |k| f.values[k].to_vec()).unwrap();
        let rows = read_csv(buf.as_slice(), &g, 3).unwrap();
        for k in 0..g.len() {
            assert_eq!(rows[k], f.values[k].to_vec());
        }
        assert!(read_csv(buf.as_slice(), &g, 2).is_err());
    }
}
