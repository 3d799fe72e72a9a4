//! Dense kernels for the small matrices that appear along a sensitivity
//! path: LU determinant and solves, adjugate, cyclic Jacobi eigenvalues,
//! Gram-based singular values and the mininorm.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let s: f64 = (0..self.rows).map(|r| self[(r, i)] * self[(r, j)]).sum();
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> Self {
        let n = self.rows - 1;
        let mut data = Vec::with_capacity(n * (self.cols - 1));
        for r in (0..self.rows).filter(|&r| r != skip_row) {
            for c in (0..self.cols).filter(|&c| c != skip_col) {
                data.push(self[(r, c)]);
            }
        }
        Self {
            rows: n,
            cols: self.cols - 1,
            data,
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// LU factorisation with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        a.require_square("LU factorisation")?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, lu[(r, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for c in 0..n {
                    lu.data.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for r in k + 1..n {
                let f = lu[(r, k)] / d;
                lu[(r, k)] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        lu[(r, c)] -= f * lu[(k, c)];
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            singular,
        })
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.lu.rows).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::InvalidInput("right-hand side length mismatch".into()));
        }
        if self.singular {
            return Err(Error::NumericalDegeneracy("solve with a singular matrix".into()));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[(i, k)] * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.lu[(i, k)] * x[k]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(b.rows, b.cols);
        let mut col = vec![0.0; b.rows];
        for c in 0..b.cols {
            for r in 0..b.rows {
                col[r] = b[(r, c)];
            }
            let x = self.solve(&col)?;
            for r in 0..b.rows {
                out[(r, c)] = x[r];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve_matrix(&Matrix::identity(self.lu.rows))
    }
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    if a.rows == 0 {
        a.require_square("determinant")?;
        return Ok(1.0);
    }
    Ok(Lu::new(a)?.determinant())
}

/// Transposed cofactor matrix. Defined for singular input as well.
pub fn adjugate(a: &Matrix) -> Result<Matrix> {
    a.require_square("adjugate")?;
    let n = a.rows;
    if n == 1 {
        return Ok(Matrix::identity(1));
    }
    let mut adj = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(c, r)] = sign * determinant(&a.minor(r, c))?;
        }
    }
    Ok(adj)
}

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_TOL: f64 = 1e-14;
const SYMMETRY_TOL: f64 = 1e-10;
const PSD_CLAMP_REL: f64 = 1e-12;

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations,
/// ascending. Eigenvalues in `[-1e-12·‖B‖, 0)` are clamped to zero.
pub fn sym_eigenvalues(b: &Matrix) -> Result<Vec<f64>> {
    b.require_square("symmetric eigenvalues")?;
    let n = b.rows;
    let scale = b.frobenius_norm();
    for i in 0..n {
        for j in i + 1..n {
            if (b[(i, j)] - b[(j, i)]).abs() > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut a = b.clone();
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_REL_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let clamp = PSD_CLAMP_REL * scale;
    let mut eig: Vec<f64> = (0..n)
        .map(|i| {
            let v = a[(i, i)];
            if v < 0.0 && v >= -clamp {
                0.0
            } else {
                v
            }
        })
        .collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// The `min(rows, cols)` singular values, ascending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let g = if a.rows >= a.cols {
        a.gram()
    } else {
        a.transpose().gram()
    };
    sym_eigenvalues(&g)
        .expect("Gram matrices are square and symmetric")
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// `min_{|v|=1} |Av|`, the smallest singular value (zero for wide matrices).
pub fn mininorm(a: &Matrix) -> f64 {
    if a.cols > a.rows {
        return 0.0;
    }
    if a.cols == 0 {
        return 0.0;
    }
    singular_values(a)[0]
}

/// Largest singular value (spectral norm).
pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}
