//! Reverse-mode differentiation over a dynamically built computation graph.
//!
//! The tape records vector-level primitives eagerly: every builder method
//! computes its output value immediately and appends one node, so inputs
//! always reference earlier nodes and a single reverse sweep visits each node
//! exactly once. Matrices appear only as leaves feeding [`Tape::matvec`];
//! every other node is a vector, with scalars as length-1 vectors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{ParameterStore, Value};
use crate::tensor::{self, Matrix, Vector};

/// Handle to a node on one tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Payload<T> {
    Vector(Vector<T>),
    Matrix(Matrix<T>),
}

impl<T: Scalar> Payload<T> {
    fn len(&self) -> usize {
        match self {
            Payload::Vector(v) => v.len(),
            Payload::Matrix(m) => m.rows() * m.cols(),
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatVec { matrix: NodeId, vector: NodeId },
    Add { lhs: NodeId, rhs: NodeId },
    Sub { lhs: NodeId, rhs: NodeId },
    Mul { lhs: NodeId, rhs: NodeId },
    Scale { input: NodeId, factor: T },
    Tanh { input: NodeId },
    Sigmoid { input: NodeId },
    Softmax { input: NodeId },
    Concat { parts: Vec<NodeId> },
    Dot { lhs: NodeId, rhs: NodeId },
    WeightedSum { weights: NodeId, items: Vec<NodeId> },
    SumElems { input: NodeId },
}

#[derive(Debug)]
struct Node<T> {
    value: Payload<T>,
    op: Op<T>,
    /// Set on leaves registered from a parameter store; backward adds the
    /// node's gradient into that entry.
    param: Option<String>,
}

/// Append-only record of one forward computation, replayed in reverse by
/// [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, value: Payload<T>, op: Op<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        id
    }

    fn vector(&self, id: NodeId) -> Result<&Vector<T>> {
        match &self.nodes[id.0].value {
            Payload::Vector(v) => Ok(v),
            Payload::Matrix(m) => Err(Error::Shape(format!(
                "node {} is a {}x{} matrix, expected a vector",
                id.0,
                m.rows(),
                m.cols()
            ))),
        }
    }

    fn matrix(&self, id: NodeId) -> Result<&Matrix<T>> {
        match &self.nodes[id.0].value {
            Payload::Matrix(m) => Ok(m),
            Payload::Vector(v) => Err(Error::Shape(format!(
                "node {} is a vector of length {}, expected a matrix",
                id.0,
                v.len()
            ))),
        }
    }

    /// The vector value computed at `id`.
    pub fn value(&self, id: NodeId) -> Result<&Vector<T>> {
        self.vector(id)
    }

    /// The value of a length-1 node.
    pub fn scalar_value(&self, id: NodeId) -> Result<T> {
        let v = self.vector(id)?;
        if v.len() != 1 {
            return Err(Error::Shape(format!(
                "node {} has length {}, expected a scalar",
                id.0,
                v.len()
            )));
        }
        Ok(v[0])
    }

    // ── Leaves ──────────────────────────────────────────────────────────

    pub fn leaf_vector(&mut self, vector: Vector<T>) -> NodeId {
        self.push(Payload::Vector(vector), Op::Leaf)
    }

    pub fn leaf_matrix(&mut self, matrix: Matrix<T>) -> NodeId {
        self.push(Payload::Matrix(matrix), Op::Leaf)
    }

    pub fn leaf_scalar(&mut self, value: T) -> NodeId {
        self.leaf_vector(Vector::from_vec(vec![value]).expect("length 1"))
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.leaf_vector(Vector::zeros(len))
    }

    /// Registers a parameter from the store as a leaf; its gradient flows
    /// back into the store on [`Tape::backward`]. The value is snapshotted.
    pub fn param(&mut self, store: &ParameterStore<T>, name: &str) -> Result<NodeId> {
        let payload = match store.value(name)? {
            Value::Vector(v) => Payload::Vector(v.clone()),
            Value::Matrix(m) => Payload::Matrix(m.clone()),
        };
        let id = self.push(payload, Op::Leaf);
        self.nodes[id.0].param = Some(name.to_string());
        Ok(id)
    }

    // ── Primitives ──────────────────────────────────────────────────────

    pub fn matvec(&mut self, matrix: NodeId, vector: NodeId) -> Result<NodeId> {
        let out = tensor::matvec(self.matrix(matrix)?, self.vector(vector)?)?;
        Ok(self.push(Payload::Vector(out), Op::MatVec { matrix, vector }))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let out = tensor::add(self.vector(lhs)?, self.vector(rhs)?)?;
        Ok(self.push(Payload::Vector(out), Op::Add { lhs, rhs }))
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let out = tensor::sub(self.vector(lhs)?, self.vector(rhs)?)?;
        Ok(self.push(Payload::Vector(out), Op::Sub { lhs, rhs }))
    }

    pub fn mul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let out = tensor::mul(self.vector(lhs)?, self.vector(rhs)?)?;
        Ok(self.push(Payload::Vector(out), Op::Mul { lhs, rhs }))
    }

    pub fn scale(&mut self, input: NodeId, factor: T) -> Result<NodeId> {
        let out = Vector::from_vec(self.vector(input)?.iter().map(|&v| v * factor).collect())?;
        Ok(self.push(Payload::Vector(out), Op::Scale { input, factor }))
    }

    pub fn tanh(&mut self, input: NodeId) -> Result<NodeId> {
        let out = tensor::tanh(self.vector(input)?);
        Ok(self.push(Payload::Vector(out), Op::Tanh { input }))
    }

    pub fn sigmoid(&mut self, input: NodeId) -> Result<NodeId> {
        let out = tensor::sigmoid(self.vector(input)?);
        Ok(self.push(Payload::Vector(out), Op::Sigmoid { input }))
    }

    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId> {
        let out = tensor::softmax(self.vector(input)?);
        Ok(self.push(Payload::Vector(out), Op::Softmax { input }))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vectors = parts
            .iter()
            .map(|&p| self.vector(p))
            .collect::<Result<Vec<_>>>()?;
        let out = tensor::concat(&vectors)?;
        Ok(self.push(
            Payload::Vector(out),
            Op::Concat {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Inner product; the output is a length-1 node.
    pub fn dot(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let out = tensor::dot(self.vector(lhs)?, self.vector(rhs)?)?;
        Ok(self.push(
            Payload::Vector(Vector::from_vec(vec![out])?),
            Op::Dot { lhs, rhs },
        ))
    }

    /// `sum_i weights[i] * items[i]` for equally sized item vectors.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId> {
        let w = self.vector(weights)?;
        if w.len() != items.len() {
            return Err(Error::Shape(format!(
                "weighted_sum: {} weights against {} items",
                w.len(),
                items.len()
            )));
        }
        let first = self.vector(items[0])?;
        let mut acc = vec![T::zero(); first.len()];
        for (i, &item) in items.iter().enumerate() {
            let item = self.vector(item)?;
            if item.len() != acc.len() {
                return Err(Error::Shape(format!(
                    "weighted_sum: item 0 has length {}, item {i} has length {}",
                    acc.len(),
                    item.len()
                )));
            }
            let wi = self.vector(weights)?[i];
            for (a, &v) in acc.iter_mut().zip(item.iter()) {
                *a += wi * v;
            }
        }
        Ok(self.push(
            Payload::Vector(Vector::from_vec(acc)?),
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
        ))
    }

    /// Sum of all components; the output is a length-1 node.
    pub fn sum_elems(&mut self, input: NodeId) -> Result<NodeId> {
        let out = self.vector(input)?.sum();
        Ok(self.push(
            Payload::Vector(Vector::from_vec(vec![out])?),
            Op::SumElems { input },
        ))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss node. Gradients of parameter leaves
    /// are **added** into the store's gradient slots, so parameters shared
    /// across time steps (and across windows recorded on one tape)
    /// accumulate correctly. A tape supports exactly one backward pass.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParameterStore<T>) -> Result<()> {
        if self.consumed {
            return Err(Error::State(
                "backward already ran on this tape; record a new forward pass first".into(),
            ));
        }
        if self.nodes.is_empty() {
            return Err(Error::State("backward on an empty tape".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State(format!(
                "loss node {} is not on this tape ({} nodes)",
                loss.0,
                self.nodes.len()
            )));
        }
        let loss_len = self.vector(loss)?.len();
        if loss_len != 1 {
            return Err(Error::Shape(format!(
                "loss node has length {loss_len}, expected a scalar"
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..self.nodes.len()).rev() {
            // Inputs always precede outputs, so splitting at idx gives the
            // output gradient (read) and all input slots (write) disjointly.
            let (input_grads, rest) = grads.split_at_mut(idx);
            let out_grad = match &rest[0] {
                Some(g) => g.as_slice(),
                None => continue,
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatVec { matrix, vector } => {
                    let a = match &self.nodes[matrix.0].value {
                        Payload::Matrix(m) => m,
                        Payload::Vector(_) => unreachable!("validated at record time"),
                    };
                    let x = match &self.nodes[vector.0].value {
                        Payload::Vector(v) => v,
                        Payload::Matrix(_) => unreachable!("validated at record time"),
                    };
                    {
                        let da = ensure(&mut input_grads[matrix.0], a.rows() * a.cols());
                        for i in 0..a.rows() {
                            let g = out_grad[i];
                            for j in 0..a.cols() {
                                da[i * a.cols() + j] += g * x[j];
                            }
                        }
                    }
                    let dx = ensure(&mut input_grads[vector.0], x.len());
                    for i in 0..a.rows() {
                        let g = out_grad[i];
                        for (j, d) in dx.iter_mut().enumerate() {
                            *d += a[(i, j)] * g;
                        }
                    }
                }
                Op::Add { lhs, rhs } => {
                    accumulate(&mut input_grads[lhs.0], out_grad, T::one());
                    accumulate(&mut input_grads[rhs.0], out_grad, T::one());
                }
                Op::Sub { lhs, rhs } => {
                    accumulate(&mut input_grads[lhs.0], out_grad, T::one());
                    accumulate(&mut input_grads[rhs.0], out_grad, -T::one());
                }
                Op::Mul { lhs, rhs } => {
                    let a = value_slice(&self.nodes[lhs.0].value);
                    let b = value_slice(&self.nodes[rhs.0].value);
                    {
                        let dl = ensure(&mut input_grads[lhs.0], a.len());
                        for ((d, &g), &bv) in dl.iter_mut().zip(out_grad).zip(b) {
                            *d += g * bv;
                        }
                    }
                    let dr = ensure(&mut input_grads[rhs.0], b.len());
                    for ((d, &g), &av) in dr.iter_mut().zip(out_grad).zip(a) {
                        *d += g * av;
                    }
                }
                Op::Scale { input, factor } => {
                    accumulate(&mut input_grads[input.0], out_grad, *factor);
                }
                Op::Tanh { input } => {
                    let y = value_slice(&node.value);
                    let dx = ensure(&mut input_grads[input.0], y.len());
                    for ((d, &g), &yv) in dx.iter_mut().zip(out_grad).zip(y) {
                        *d += g * (T::one() - yv * yv);
                    }
                }
                Op::Sigmoid { input } => {
                    let y = value_slice(&node.value);
                    let dx = ensure(&mut input_grads[input.0], y.len());
                    for ((d, &g), &yv) in dx.iter_mut().zip(out_grad).zip(y) {
                        *d += g * yv * (T::one() - yv);
                    }
                }
                Op::Softmax { input } => {
                    let y = value_slice(&node.value);
                    let weighted = y
                        .iter()
                        .zip(out_grad)
                        .fold(T::zero(), |acc, (&yv, &g)| acc + yv * g);
                    let dx = ensure(&mut input_grads[input.0], y.len());
                    for ((d, &g), &yv) in dx.iter_mut().zip(out_grad).zip(y) {
                        *d += yv * (g - weighted);
                    }
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &part in parts {
                        let len = self.nodes[part.0].value.len();
                        accumulate(
                            &mut input_grads[part.0],
                            &out_grad[offset..offset + len],
                            T::one(),
                        );
                        offset += len;
                    }
                }
                Op::Dot { lhs, rhs } => {
                    let g = out_grad[0];
                    let a = value_slice(&self.nodes[lhs.0].value);
                    let b = value_slice(&self.nodes[rhs.0].value);
                    {
                        let dl = ensure(&mut input_grads[lhs.0], a.len());
                        for (d, &bv) in dl.iter_mut().zip(b) {
                            *d += g * bv;
                        }
                    }
                    let dr = ensure(&mut input_grads[rhs.0], b.len());
                    for (d, &av) in dr.iter_mut().zip(a) {
                        *d += g * av;
                    }
                }
                Op::WeightedSum { weights, items } => {
                    let w = value_slice(&self.nodes[weights.0].value);
                    for (i, &item) in items.iter().enumerate() {
                        let iv = value_slice(&self.nodes[item.0].value);
                        let contribution = iv
                            .iter()
                            .zip(out_grad)
                            .fold(T::zero(), |acc, (&v, &g)| acc + v * g);
                        {
                            let dw = ensure(&mut input_grads[weights.0], w.len());
                            dw[i] += contribution;
                        }
                        let di = ensure(&mut input_grads[item.0], iv.len());
                        for (d, &g) in di.iter_mut().zip(out_grad) {
                            *d += w[i] * g;
                        }
                    }
                }
                Op::SumElems { input } => {
                    let g = out_grad[0];
                    let len = self.nodes[input.0].value.len();
                    let dx = ensure(&mut input_grads[input.0], len);
                    for d in dx.iter_mut() {
                        *d += g;
                    }
                }
            }
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if let Some(name) = &node.param {
                if let Some(grad) = &grads[idx] {
                    store.accumulate_gradient(name, grad)?;
                }
            }
        }
        Ok(())
    }
}

fn value_slice<T: Scalar>(payload: &Payload<T>) -> &[T] {
    match payload {
        Payload::Vector(v) => v.as_slice(),
        Payload::Matrix(m) => m.as_slice(),
    }
}

fn ensure<T: Scalar>(slot: &mut Option<Vec<T>>, len: usize) -> &mut [T] {
    slot.get_or_insert_with(|| vec![T::zero(); len])
}

fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, grad: &[T], factor: T) {
    let dst = ensure(slot, grad.len());
    for (d, &g) in dst.iter_mut().zip(grad) {
        *d += factor * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(entries: &[(&str, &[f64])]) -> ParameterStore<f64> {
        let mut store = ParameterStore::new();
        for (name, data) in entries {
            store
                .insert_vector(name, Vector::from_vec(data.to_vec()).unwrap())
                .unwrap();
        }
        store
    }

    #[test]
    fn square_gradient() {
        let mut store = store_with(&[("x", &[3.0])]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let loss = tape.mul(x, x).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.gradient("x").unwrap().as_slice(), &[6.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut store = store_with(&[("x", &[3.0]), ("p", &[7.0])]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let _p = tape.param(&store, "p").unwrap();
        let loss = tape.mul(x, x).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.gradient("p").unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn second_backward_is_a_state_error() {
        let mut store = store_with(&[("x", &[2.0])]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let loss = tape.mul(x, x).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert!(matches!(
            tape.backward(loss, &mut store),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut store = store_with(&[("x", &[1.0, 2.0])]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let y = tape.tanh(x).unwrap();
        assert!(matches!(tape.backward(y, &mut store), Err(Error::Shape(_))));
    }

    #[test]
    fn shared_parameter_accumulates() {
        // loss = dot(x, x) + sum(x) uses x three times.
        let mut store = store_with(&[("x", &[1.0, -2.0])]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let d = tape.dot(x, x).unwrap();
        let s = tape.sum_elems(x).unwrap();
        let loss = tape.add(d, s).unwrap();
        tape.backward(loss, &mut store).unwrap();
        // d/dx (x.x + sum x) = 2x + 1
        assert_eq!(store.gradient("x").unwrap().as_slice(), &[3.0, -3.0]);
    }

    #[test]
    fn matvec_gradients() {
        let mut store = ParameterStore::new();
        store
            .insert_matrix(
                "a",
                Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            )
            .unwrap();
        store
            .insert_vector("x", Vector::from_vec(vec![5.0, -1.0]).unwrap())
            .unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, "a").unwrap();
        let x = tape.param(&store, "x").unwrap();
        let y = tape.matvec(a, x).unwrap();
        let loss = tape.sum_elems(y).unwrap();
        tape.backward(loss, &mut store).unwrap();
        // d sum(Ax) / dA = 1 xᵀ per row, d/dx = Aᵀ 1 = column sums.
        assert_eq!(
            store.gradient("a").unwrap().as_slice(),
            &[5.0, -1.0, 5.0, -1.0]
        );
        assert_eq!(store.gradient("x").unwrap().as_slice(), &[4.0, 6.0]);
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let build = || {
            let mut store = store_with(&[("x", &[0.3, -0.7, 1.9]), ("w", &[0.01, 0.2, -3.0])]);
            let mut tape = Tape::new();
            let x = tape.param(&store, "x").unwrap();
            let w = tape.param(&store, "w").unwrap();
            let xs = tape.softmax(x).unwrap();
            let prod = tape.mul(xs, w).unwrap();
            let t = tape.tanh(prod).unwrap();
            let loss = tape.dot(t, t).unwrap();
            tape.backward(loss, &mut store).unwrap();
            (
                store.gradient("x").unwrap().as_slice().to_vec(),
                store.gradient("w").unwrap().as_slice().to_vec(),
            )
        };
        let (gx1, gw1) = build();
        let (gx2, gw2) = build();
        for (a, b) in gx1.iter().zip(&gx2).chain(gw1.iter().zip(&gw2)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn scalar_value_requires_length_one() {
        let mut tape = Tape::<f64>::new();
        let v = tape.leaf_vector(Vector::from_vec(vec![1.0, 2.0]).unwrap());
        assert!(tape.scalar_value(v).is_err());
        let s = tape.leaf_scalar(4.5);
        assert_eq!(tape.scalar_value(s).unwrap(), 4.5);
    }
}
