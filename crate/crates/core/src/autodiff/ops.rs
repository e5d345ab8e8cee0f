//! Elementwise, reduction, and matrix operations on [`Var`].

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::graph::Var;
use crate::error::{Error, Result};
use crate::tensor::{gemm, Element, Layout, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    /// Last-axis softmax.
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }
}

pub(crate) fn sigmoid<T: Element>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn zip_map<T: Element>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    Tensor::raw(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
}

/// Softmax over the last axis of a flat buffer, in place.
pub(crate) fn softmax_rows<T: Element>(data: &mut [T], width: usize) {
    for row in data.chunks_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        let inv = T::one() / total;
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
}

/// Gradient of a row softmax given its output `y` and upstream `g`.
pub(crate) fn softmax_rows_backward<T: Element>(y: &[T], g: &[T], width: usize) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    for ((yr, gr), or) in y
        .chunks(width)
        .zip(g.chunks(width))
        .zip(out.chunks_mut(width))
    {
        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for ((o, &yv), &gv) in or.iter_mut().zip(yr).zip(gr) {
            *o = yv * (gv - dot);
        }
    }
    out
}

// Fallible elementwise ops share names with the operator traits on purpose.
#[allow(clippy::should_implement_trait)]
impl<'g, T: Element> Var<'g, T> {
    fn expect_same_shape(&self, other: &Var<'g, T>, op: &str) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(Error::shape(format!("{op}: shapes {a:?} and {b:?} differ")));
        }
        Ok(())
    }

    pub fn add(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.expect_same_shape(&other, "add")?;
        let out = zip_map(&self.value(), &other.value(), |a, b| a + b);
        Ok(self.graph.record(out, &[self, other], |g, _| {
            vec![Some(g.clone()), Some(g.clone())]
        }))
    }

    pub fn sub(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.expect_same_shape(&other, "sub")?;
        let out = zip_map(&self.value(), &other.value(), |a, b| a - b);
        Ok(self.graph.record(out, &[self, other], |g, _| {
            vec![Some(g.clone()), Some(g.map(|x| -x))]
        }))
    }

    pub fn mul(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.expect_same_shape(&other, "mul")?;
        let (a, b) = (self.value(), other.value());
        let out = zip_map(&a, &b, |x, y| x * y);
        Ok(self.graph.record(out, &[self, other], move |g, needs| {
            vec![
                needs[0].then(|| zip_map(g, &b, |u, v| u * v)),
                needs[1].then(|| zip_map(g, &a, |u, v| u * v)),
            ]
        }))
    }

    /// Adds a `[n]` bias along the last axis.
    pub fn add_bias(self, bias: Var<'g, T>) -> Result<Var<'g, T>> {
        let x = self.value();
        let b = bias.value();
        let n = x.last_dim();
        if b.shape() != [n] {
            return Err(Error::shape(format!(
                "bias {:?} does not match last axis of {:?}",
                b.shape(),
                x.shape()
            )));
        }
        let mut out = x.data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        let out = Tensor::raw(x.shape().to_vec(), out);
        Ok(self.graph.record(out, &[self, bias], move |g, needs| {
            let db = needs[1].then(|| column_sums(g.data(), n));
            vec![needs[0].then(|| g.clone()), db]
        }))
    }

    pub fn scale(self, factor: f64) -> Var<'g, T> {
        let s = T::of(factor);
        let out = self.value().map(|x| x * s);
        self.graph
            .record(out, &[self], move |g, _| vec![Some(g.map(|x| x * s))])
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(self) -> Var<'g, T> {
        let x = self.value();
        let shape = x.shape().to_vec();
        let out = Tensor::scalar(x.sum());
        self.graph.record(out, &[self], move |g, _| {
            vec![Some(Tensor::filled(&shape, g.data()[0]))]
        })
    }

    pub fn mean(self) -> Var<'g, T> {
        let n = self.value().len();
        self.sum().scale(1.0 / n as f64)
    }

    /// Sum of squared elements, as a `[1]` tensor.
    pub fn sum_squares(self) -> Var<'g, T> {
        let x = self.value();
        let out = Tensor::scalar(x.data().iter().map(|&v| v * v).sum());
        self.graph.record(out, &[self], move |g, _| {
            let two_g = g.data()[0] + g.data()[0];
            vec![Some(x.map(|v| v * two_g))]
        })
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let x = self.value();
        let old = x.shape().to_vec();
        let out = Tensor::clone(&x).reshape(shape)?;
        Ok(self.graph.record(out, &[self], move |g, _| {
            vec![Some(Tensor::raw(old.clone(), g.data().to_vec()))]
        }))
    }

    /// `[..., k] x [k, n] -> [..., n]`; leading axes of the left operand are
    /// treated as a batch sharing the right operand.
    pub fn matmul(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        let a = self.value();
        let b = other.value();
        let k = a.last_dim();
        let (k2, n) = match b.shape() {
            &[k2, n] => (k2, n),
            s => {
                return Err(Error::shape(format!(
                    "matmul right operand must be 2-D, got {s:?}"
                )))
            }
        };
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner extents differ: {:?} x {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let m = a.len() / k;
        let mut out = vec![T::zero(); m * n];
        gemm(
            m,
            k,
            n,
            T::one(),
            a.data(),
            Layout::rows(0, k),
            b.data(),
            Layout::rows(0, n),
            T::zero(),
            &mut out,
            Layout::rows(0, n),
        );
        let mut shape = a.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let out = Tensor::raw(shape, out);
        Ok(self.graph.record(out, &[self, other], move |g, needs| {
            let da = needs[0].then(|| {
                let mut da = vec![T::zero(); m * k];
                gemm(
                    m,
                    n,
                    k,
                    T::one(),
                    g.data(),
                    Layout::rows(0, n),
                    b.data(),
                    Layout::rows(0, n).t(),
                    T::zero(),
                    &mut da,
                    Layout::rows(0, k),
                );
                Tensor::raw(a.shape().to_vec(), da)
            });
            let db = needs[1].then(|| {
                let mut db = vec![T::zero(); k * n];
                gemm(
                    k,
                    m,
                    n,
                    T::one(),
                    a.data(),
                    Layout::rows(0, k).t(),
                    g.data(),
                    Layout::rows(0, n),
                    T::zero(),
                    &mut db,
                    Layout::rows(0, n),
                );
                Tensor::raw(vec![k, n], db)
            });
            vec![da, db]
        }))
    }

    pub fn activation(self, kind: Activation) -> Var<'g, T> {
        match kind {
            Activation::Relu => self.relu(),
            Activation::Tanh => self.tanh(),
            Activation::Sigmoid => self.sigmoid(),
            Activation::Softmax => self.softmax(),
        }
    }

    /// ReLU; the gradient at exactly zero is zero.
    pub fn relu(self) -> Var<'g, T> {
        let x = self.value();
        let out = x.map(|v| v.max(T::zero()));
        self.graph.record(out, &[self], move |g, _| {
            vec![Some(zip_map(g, &x, |gv, xv| {
                if xv > T::zero() {
                    gv
                } else {
                    T::zero()
                }
            }))]
        })
    }

    pub fn tanh(self) -> Var<'g, T> {
        let y = Rc::new(self.value().map(|v| v.tanh()));
        let saved = y.clone();
        self.graph.record(Tensor::clone(&y), &[self], move |g, _| {
            vec![Some(zip_map(g, &saved, |gv, yv| gv * (T::one() - yv * yv)))]
        })
    }

    pub fn sigmoid(self) -> Var<'g, T> {
        let y = Rc::new(self.value().map(sigmoid));
        let saved = y.clone();
        self.graph.record(Tensor::clone(&y), &[self], move |g, _| {
            vec![Some(zip_map(g, &saved, |gv, yv| gv * yv * (T::one() - yv)))]
        })
    }

    /// Elementwise map with a caller-supplied derivative `df(x, f(x))`.
    pub fn map_unary(self, f: impl Fn(T) -> T, df: impl Fn(T, T) -> T + 'static) -> Var<'g, T> {
        let x = self.value();
        let y = Rc::new(x.map(f));
        let saved = y.clone();
        self.graph.record(Tensor::clone(&y), &[self], move |g, _| {
            let data = g
                .data()
                .iter()
                .zip(x.data().iter().zip(saved.data()))
                .map(|(&gv, (&xv, &yv))| gv * df(xv, yv))
                .collect();
            vec![Some(Tensor::raw(g.shape().to_vec(), data))]
        })
    }

    /// Numerically stable softmax over the last axis.
    pub fn softmax(self) -> Var<'g, T> {
        let x = self.value();
        let n = x.last_dim();
        let mut data = x.data().to_vec();
        softmax_rows(&mut data, n);
        let y = Rc::new(Tensor::raw(x.shape().to_vec(), data));
        let saved = y.clone();
        self.graph.record(Tensor::clone(&y), &[self], move |g, _| {
            let dx = softmax_rows_backward(saved.data(), g.data(), n);
            vec![Some(Tensor::raw(g.shape().to_vec(), dx))]
        })
    }
}

pub(crate) fn column_sums<T: Element>(data: &[T], n: usize) -> Tensor<T> {
    let mut out = vec![T::zero(); n];
    for row in data.chunks(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::raw(vec![n], out)
}

/// Concatenates along the last axis; all leading extents must agree.
pub fn concat_last<'g, T: Element>(parts: &[Var<'g, T>]) -> Result<Var<'g, T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat of zero tensors"))?;
    let values: Vec<Rc<Tensor<T>>> = parts.iter().map(|p| p.value()).collect();
    let lead = &values[0].shape()[..values[0].shape().len() - 1];
    for v in &values[1..] {
        if &v.shape()[..v.shape().len() - 1] != lead {
            return Err(Error::shape(format!(
                "concat: leading extents differ between {:?} and {:?}",
                values[0].shape(),
                v.shape()
            )));
        }
    }
    let widths: Vec<usize> = values.iter().map(|v| v.last_dim()).collect();
    let total: usize = widths.iter().sum();
    let rows = values[0].len() / widths[0];
    let mut out = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (v, &w) in values.iter().zip(&widths) {
            out.extend_from_slice(&v.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    let out = Tensor::raw(shape, out);
    let lead = lead.to_vec();
    Ok(first.graph.record(out, parts, move |g, needs| {
        let mut grads = Vec::with_capacity(widths.len());
        let mut col = 0;
        for (i, &w) in widths.iter().enumerate() {
            if needs[i] {
                let mut d = Vec::with_capacity(rows * w);
                for r in 0..rows {
                    d.extend_from_slice(&g.data()[r * total + col..r * total + col + w]);
                }
                let mut shape = lead.clone();
                shape.push(w);
                grads.push(Some(Tensor::raw(shape, d)));
            } else {
                grads.push(None);
            }
            col += w;
        }
        grads
    }))
}
