//! Named parameter storage with gradient slots and a plain-text snapshot
//! format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{full_precision, Scalar};
use crate::tensor::{Matrix, Vector};

/// A parameter value: either a vector or a matrix. Scalars are length-1
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Vector(Vector<T>),
    Matrix(Matrix<T>),
}

impl<T: Scalar> Value<T> {
    pub fn len(&self) -> usize {
        match self {
            Value::Vector(v) => v.len(),
            Value::Matrix(m) => m.rows() * m.cols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(rows, cols)` with vectors reported as `(len, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Value::Vector(v) => (v.len(), 1),
            Value::Matrix(m) => (m.rows(), m.cols()),
        }
    }

    pub fn as_slice(&self) -> &[T] {
        match self {
            Value::Vector(v) => v.as_slice(),
            Value::Matrix(m) => m.as_slice(),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        match self {
            Value::Vector(v) => v.as_mut_slice(),
            Value::Matrix(m) => m.as_mut_slice(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Value::Vector(v) => Value::Vector(Vector::zeros(v.len())),
            Value::Matrix(m) => Value::Matrix(Matrix::zeros(m.rows(), m.cols())),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry<T> {
    value: Value<T>,
    gradient: Value<T>,
}

/// All learnable weights of one model, addressable by name, with a gradient
/// slot of matching shape per entry. Iteration order is the sorted name
/// order, which keeps serialization and optimizer updates deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore<T> {
    entries: BTreeMap<String, Entry<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    fn insert(&mut self, name: &str, value: Value<T>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Argument(format!(
                "parameter {name:?} registered twice"
            )));
        }
        let gradient = value.zeros_like();
        self.entries.insert(name.to_string(), Entry { value, gradient });
        Ok(())
    }

    pub fn insert_vector(&mut self, name: &str, vector: Vector<T>) -> Result<()> {
        self.insert(name, Value::Vector(vector))
    }

    pub fn insert_matrix(&mut self, name: &str, matrix: Matrix<T>) -> Result<()> {
        self.insert(name, Value::Matrix(matrix))
    }

    /// Scalars are stored as length-1 vectors.
    pub fn insert_scalar(&mut self, name: &str, value: T) -> Result<()> {
        self.insert(name, Value::Vector(Vector::from_vec(vec![value])?))
    }

    fn entry(&self, name: &str) -> Result<&Entry<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Argument(format!("unknown parameter {name:?}")))
    }

    pub fn value(&self, name: &str) -> Result<&Value<T>> {
        Ok(&self.entry(name)?.value)
    }

    pub fn gradient(&self, name: &str) -> Result<&Value<T>> {
        Ok(&self.entry(name)?.gradient)
    }

    pub fn vector(&self, name: &str) -> Result<&Vector<T>> {
        match self.value(name)? {
            Value::Vector(v) => Ok(v),
            Value::Matrix(m) => Err(Error::Shape(format!(
                "parameter {name:?} is a {}x{} matrix, expected a vector",
                m.rows(),
                m.cols()
            ))),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<&Matrix<T>> {
        match self.value(name)? {
            Value::Matrix(m) => Ok(m),
            Value::Vector(v) => Err(Error::Shape(format!(
                "parameter {name:?} is a vector of length {}, expected a matrix",
                v.len()
            ))),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Sorted parameter names.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    /// Adds `delta` into the gradient slot of `name`.
    pub fn accumulate_gradient(&mut self, name: &str, delta: &[T]) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::Argument(format!("unknown parameter {name:?}")))?;
        let grad = entry.gradient.as_mut_slice();
        if grad.len() != delta.len() {
            return Err(Error::Shape(format!(
                "gradient for {name:?} has {} entries, delta has {}",
                grad.len(),
                delta.len()
            )));
        }
        for (g, &d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
        Ok(())
    }

    pub fn clear_gradients(&mut self) {
        for entry in self.entries.values_mut() {
            for g in entry.gradient.as_mut_slice() {
                *g = T::zero();
            }
        }
    }

    /// Mutable value slice together with the read-only gradient, for the
    /// optimizer update.
    pub fn entries_mut(&mut self) -> impl Iterator<Item = (&str, &mut Value<T>, &Value<T>)> {
        self.entries.iter_mut().map(|(name, entry)| {
            let Entry { value, gradient } = entry;
            (name.as_str(), value, &*gradient)
        })
    }

    /// Reads one scalar slot.
    pub fn scalar_at(&self, name: &str, index: usize) -> Result<T> {
        let slice = self.entry(name)?.value.as_slice();
        slice.get(index).copied().ok_or_else(|| {
            Error::Argument(format!(
                "parameter {name:?} has {} entries, index {index} out of range",
                slice.len()
            ))
        })
    }

    /// Overwrites one scalar slot; used by the finite-difference checker to
    /// probe and then restore values exactly.
    pub fn set_scalar_at(&mut self, name: &str, index: usize, value: T) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::Argument(format!("unknown parameter {name:?}")))?;
        let slice = entry.value.as_mut_slice();
        if index >= slice.len() {
            return Err(Error::Argument(format!(
                "parameter {name:?} has {} entries, index {index} out of range",
                slice.len()
            )));
        }
        slice[index] = value;
        Ok(())
    }

    /// Writes the snapshot text format: a header block of `# name rows cols`
    /// lines followed by one `name[index]<TAB>value` line per scalar, values
    /// with 17 significant digits. Vectors serialize with `cols = 1`; the
    /// architectures in this crate never create single-column matrices, so
    /// the encoding is unambiguous.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (name, entry) in &self.entries {
            let (rows, cols) = entry.value.shape();
            writeln!(out, "# {name} {rows} {cols}")?;
        }
        for (name, entry) in &self.entries {
            for (i, &v) in entry.value.as_slice().iter().enumerate() {
                writeln!(out, "{name}[{i}]\t{}", full_precision(v))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("snapshot text is ASCII")
    }

    /// Parses the snapshot text format. Every declared slot must be assigned
    /// exactly once.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut shapes: Vec<(String, usize, usize)> = Vec::new();
        let mut values: BTreeMap<String, Vec<Option<T>>> = BTreeMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let mut parts = rest.split_whitespace();
                let (name, rows, cols) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(n), Some(r), Some(c)) => (n, r, c),
                    _ => {
                        return Err(Error::Format(format!(
                            "line {}: malformed shape header {line:?}",
                            lineno + 1
                        )))
                    }
                };
                let rows: usize = rows.parse().map_err(|_| {
                    Error::Format(format!("line {}: bad row count in {line:?}", lineno + 1))
                })?;
                let cols: usize = cols.parse().map_err(|_| {
                    Error::Format(format!("line {}: bad column count in {line:?}", lineno + 1))
                })?;
                if rows == 0 || cols == 0 {
                    return Err(Error::Format(format!(
                        "line {}: zero dimension in {line:?}",
                        lineno + 1
                    )));
                }
                if values.contains_key(name) {
                    return Err(Error::Format(format!(
                        "line {}: duplicate shape header for {name:?}",
                        lineno + 1
                    )));
                }
                shapes.push((name.to_string(), rows, cols));
                values.insert(name.to_string(), vec![None; rows * cols]);
                continue;
            }
            let (slot, text) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("line {}: expected TAB separator", lineno + 1))
            })?;
            let (name, idx) = slot
                .strip_suffix(']')
                .and_then(|s| s.split_once('['))
                .ok_or_else(|| {
                    Error::Format(format!("line {}: malformed slot {slot:?}", lineno + 1))
                })?;
            let idx: usize = idx.parse().map_err(|_| {
                Error::Format(format!("line {}: bad index in {slot:?}", lineno + 1))
            })?;
            let parsed: f64 = text.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: unparseable value {text:?}", lineno + 1))
            })?;
            let slots = values.get_mut(name).ok_or_else(|| {
                Error::Format(format!(
                    "line {}: value for undeclared parameter {name:?}",
                    lineno + 1
                ))
            })?;
            if idx >= slots.len() {
                return Err(Error::Format(format!(
                    "line {}: index {idx} out of range for {name:?} ({} slots)",
                    lineno + 1,
                    slots.len()
                )));
            }
            if slots[idx].is_some() {
                return Err(Error::Format(format!(
                    "line {}: duplicate value for {name}[{idx}]",
                    lineno + 1
                )));
            }
            slots[idx] = Some(T::lit(parsed));
        }

        let mut store = Self::new();
        for (name, rows, cols) in shapes {
            let slots = values.remove(&name).expect("declared above");
            let mut data = Vec::with_capacity(slots.len());
            for (i, slot) in slots.into_iter().enumerate() {
                data.push(slot.ok_or_else(|| {
                    Error::Format(format!("missing value for {name}[{i}]"))
                })?);
            }
            if cols == 1 {
                store.insert_vector(&name, Vector::from_vec(data)?)?;
            } else {
                store.insert_matrix(&name, Matrix::from_flat(data, rows, cols)?)?;
            }
        }
        Ok(store)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> ParameterStore<f64> {
        let mut store = ParameterStore::new();
        store
            .insert_matrix(
                "layer.weight",
                Matrix::from_rows(vec![vec![0.1, -2.0 / 3.0], vec![1e-17, 42.0]]).unwrap(),
            )
            .unwrap();
        store
            .insert_vector("layer.bias", Vector::from_vec(vec![0.25, -0.5]).unwrap())
            .unwrap();
        store.insert_scalar("head.offset", std::f64::consts::PI).unwrap();
        store
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut store = ParameterStore::<f64>::new();
        store.insert_scalar("a", 1.0).unwrap();
        assert!(store.insert_scalar("a", 2.0).is_err());
    }

    #[test]
    fn gradient_shape_matches_value() {
        let store = sample_store();
        for name in ["layer.weight", "layer.bias", "head.offset"] {
            assert_eq!(
                store.value(name).unwrap().shape(),
                store.gradient(name).unwrap().shape()
            );
        }
    }

    #[test]
    fn text_round_trip_is_value_exact() {
        let store = sample_store();
        let text = store.to_text();
        let back = ParameterStore::<f64>::from_text(&text).unwrap();
        assert_eq!(store.names().collect::<Vec<_>>(), back.names().collect::<Vec<_>>());
        for name in store.names() {
            let a = store.value(name).unwrap();
            let b = back.value(name).unwrap();
            assert_eq!(a.shape(), b.shape(), "{name}");
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits(), "{name}");
            }
        }
    }

    #[test]
    fn accumulate_adds_across_calls() {
        let mut store = sample_store();
        store.accumulate_gradient("layer.bias", &[1.0, 2.0]).unwrap();
        store.accumulate_gradient("layer.bias", &[0.5, -1.0]).unwrap();
        assert_eq!(store.gradient("layer.bias").unwrap().as_slice(), &[1.5, 1.0]);
        store.clear_gradients();
        assert_eq!(store.gradient("layer.bias").unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn missing_value_line_is_rejected() {
        let text = "# w 1 2\nw[0]\t1.0\n";
        assert!(ParameterStore::<f64>::from_text(text).is_err());
    }
}
