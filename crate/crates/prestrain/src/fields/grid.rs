use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 5 nodes per axis, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    Degenerate { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

/// Uniform tensor-product grid on an axis-aligned rectangle.
/// Node (i, j) has flat index `j * nx + i` (x1 fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Grid2, GridError> {
        if nx < 5 || ny < 5 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(GridError::Degenerate { x_min, x_max, y_min, y_max });
        }
        Ok(Grid2 { x_min, x_max, y_min, y_max, nx, ny })
    }

    pub fn unit_square(n: usize) -> Result<Grid2, GridError> {
        Grid2::new(0.0, 1.0, 0.0, 1.0, n, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Composite trapezoid weights; they sum to the rectangle's area.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let (dx, dy) = (self.dx(), self.dy());
        let edge = |i: usize, n: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        (0..self.len())
            .map(|k| {
                let (i, j) = self.ij(k);
                edge(i, self.nx) * edge(j, self.ny) * dx * dy
            })
            .collect()
    }

    /// Nodes at least `margin` layers away from the boundary.
    pub fn inner_nodes(&self, margin: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nx <= 2 * margin || self.ny <= 2 * margin {
            return out;
        }
        for j in margin..self.ny - margin {
            for i in margin..self.nx - margin {
                out.push(self.idx(i, j));
            }
        }
        out
    }

    pub fn is_inner(&self, k: usize, margin: usize) -> bool {
        let (i, j) = self.ij(k);
        i >= margin && j >= margin && i + margin < self.nx && j + margin < self.ny
    }

    /// Grid with twice the resolution (2n - 1 nodes per axis) on the same rectangle.
    pub fn refined(&self) -> Grid2 {
        Grid2 { nx: 2 * self.nx - 1, ny: 2 * self.ny - 1, ..*self }
    }

    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Grid2, GridError> {
        Grid2::new(self.x_min, self.x_max, self.y_min, self.y_max, nx, ny)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(Grid2::unit_square(4).is_err());
        assert!(Grid2::new(0.0, 0.0, 0.0, 1.0, 5, 5).is_err());
    }

    #[test]
    fn weights_sum_to_area() {
        let g = Grid2::new(-1.0, 2.0, 0.0, 0.5, 7, 9).unwrap();
        let s: f64 = g.trapezoid_weights().iter().sum();
        assert!((s - 1.5).abs() < 1e-14);
    }

    #[test]
    fn node_coordinates() {
        let g = Grid2::unit_square(11).unwrap();
        assert_eq!(g.point(g.idx(3, 10)), (0.3, 1.0));
        assert_eq!(g.inner_nodes(2).len(), 49);
    }
}
