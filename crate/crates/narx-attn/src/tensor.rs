//! Dense vectors and row-major matrices with the handful of operations the
//! models are built from.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A non-empty dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Wraps a buffer; empty input is a shape error.
    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Shape("vector must be non-empty (got length 0)".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Self {
            data: vec![T::zero(); len],
        }
    }

    /// Entries drawn uniformly from `[-1/sqrt(len), 1/sqrt(len)]`.
    pub fn random_fan_in<R: Rng>(rng: &mut R, len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        let bound = 1.0 / (len as f64).sqrt();
        let data = (0..len)
            .map(|_| T::lit(rng.random_range(-bound..=bound)))
            .collect();
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }
}

impl<T> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, index: usize) -> &T {
        &self.data[index]
    }
}

/// A row-major matrix with positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> Matrix<T> {
    /// Wraps a row-major buffer of exactly `rows * cols` entries.
    pub fn from_flat(data: Vec<T>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive (got {rows}x{cols})"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix buffer of length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    /// Builds from rows; all rows must share one length.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::Shape("matrix must have at least one row".into()));
        }
        let ncols = rows[0].len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Shape(format!(
                    "row {i} has length {} but row 0 has length {ncols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(data, nrows, ncols)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            data: vec![T::zero(); rows * cols],
            rows,
            cols,
        }
    }

    /// Entries drawn uniformly from `[-1/sqrt(cols), 1/sqrt(cols)]`, i.e.
    /// fan-in scaled per row.
    pub fn random_fan_in<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let bound = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| T::lit(rng.random_range(-bound..=bound)))
            .collect();
        Self { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies row `i` out as a vector.
    pub fn row_vector(&self, i: usize) -> Vector<T> {
        Vector {
            data: self.row(i).to_vec(),
        }
    }

    /// Copies column `j` out as a vector.
    pub fn col_vector(&self, j: usize) -> Vector<T> {
        Vector {
            data: (0..self.rows).map(|i| self[(i, j)]).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `A x` for `A: r x c`, `x: c`.
pub fn matvec<T: Scalar>(a: &Matrix<T>, x: &Vector<T>) -> Result<Vector<T>> {
    if a.cols() != x.len() {
        return Err(Error::Shape(format!(
            "matvec: matrix {}x{} against vector of length {}",
            a.rows(),
            a.cols(),
            x.len()
        )));
    }
    let data = (0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x.iter())
                .fold(T::zero(), |acc, (&aij, &xj)| acc + aij * xj)
        })
        .collect();
    Ok(Vector { data })
}

fn zip_check<T: Scalar>(op: &str, a: &Vector<T>, b: &Vector<T>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "{op}: vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn add<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<Vector<T>> {
    zip_check("add", a, b)?;
    Ok(Vector {
        data: a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect(),
    })
}

pub fn sub<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<Vector<T>> {
    zip_check("sub", a, b)?;
    Ok(Vector {
        data: a.iter().zip(b.iter()).map(|(&x, &y)| x - y).collect(),
    })
}

/// Element-wise product.
pub fn mul<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<Vector<T>> {
    zip_check("mul", a, b)?;
    Ok(Vector {
        data: a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect(),
    })
}

pub fn dot<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<T> {
    zip_check("dot", a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y))
}

pub fn tanh<T: Scalar>(x: &Vector<T>) -> Vector<T> {
    Vector {
        data: x.iter().map(|&v| v.tanh()).collect(),
    }
}

pub(crate) fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

pub fn sigmoid<T: Scalar>(x: &Vector<T>) -> Vector<T> {
    Vector {
        data: x.iter().map(|&v| sigmoid_scalar(v)).collect(),
    }
}

/// Max-shifted softmax; stable for entries of any magnitude.
pub fn softmax<T: Scalar>(z: &Vector<T>) -> Vector<T> {
    let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |acc, &e| acc + e);
    Vector {
        data: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// Concatenates vectors in order.
pub fn concat<T: Scalar>(parts: &[&Vector<T>]) -> Result<Vector<T>> {
    if parts.is_empty() {
        return Err(Error::Shape("concat of zero vectors".into()));
    }
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for part in parts {
        data.extend_from_slice(part.as_slice());
    }
    Ok(Vector { data })
}
