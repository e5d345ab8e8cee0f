//! Fused neural-network operations.
//!
//! Sequence inputs are `[batch, time, features]`; the rank-2 form
//! `[time, features]` is accepted as a batch of one and returns rank-2
//! results. Each op computes its whole backward pass in one node, which
//! keeps the tape short for recurrent layers.

use std::rc::Rc;

use super::graph::{Graph, Var};
use super::ops::{column_sums, sigmoid, softmax_rows, softmax_rows_backward};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{gemm, Element, Layout, Tensor};

/// Probability floor applied before the logarithm in [`Var::sparse_cce`].
pub const PROBABILITY_FLOOR: f64 = 1e-7;

/// Row-major matrix of token ids, one sequence per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMatrix {
    rows: usize,
    cols: usize,
    ids: Vec<u32>,
}

impl IdMatrix {
    pub fn new(rows: usize, cols: usize, ids: Vec<u32>) -> Result<Self> {
        if rows * cols != ids.len() || cols == 0 {
            return Err(Error::shape(format!(
                "{rows}x{cols} id matrix cannot hold {} ids",
                ids.len()
            )));
        }
        Ok(IdMatrix { rows, cols, ids })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("id rows have unequal lengths"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.cols..(i + 1) * self.cols]
    }

    /// New matrix holding the selected rows in the given order.
    pub fn gather(&self, rows: &[usize]) -> IdMatrix {
        let mut ids = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            ids.extend_from_slice(self.row(r));
        }
        IdMatrix {
            rows: rows.len(),
            cols: self.cols,
            ids,
        }
    }

    pub fn max_id(&self) -> Option<u32> {
        self.ids.iter().copied().max()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LstmOptions {
    /// Process time in reverse; outputs stay aligned with input positions.
    pub reverse: bool,
    /// Emit every hidden state instead of only the last one.
    pub return_sequences: bool,
}

fn seq_dims(shape: &[usize], op: &str) -> Result<(usize, usize, usize, bool)> {
    match *shape {
        [t, c] => Ok((1, t, c, false)),
        [b, t, c] => Ok((b, t, c, true)),
        _ => Err(Error::shape(format!(
            "{op} expects [time, features] or [batch, time, features], got {shape:?}"
        ))),
    }
}

fn seq_shape(b: usize, t: usize, c: usize, batched: bool) -> Vec<usize> {
    if batched {
        vec![b, t, c]
    } else {
        vec![t, c]
    }
}

fn check_param_shape(name: &str, actual: &[usize], expected: &[usize]) -> Result<()> {
    if actual != expected {
        return Err(Error::shape(format!(
            "{name} has shape {actual:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

impl<T: Element> Graph<T> {
    /// Row lookup `[rows, cols] -> [rows, cols, dim]`; the gradient
    /// scatters into the looked-up table rows only.
    pub fn embedding<'g>(&'g self, ids: &IdMatrix, table: Var<'g, T>) -> Result<Var<'g, T>> {
        let tv = table.value();
        let (vocab, dim) = match *tv.shape() {
            [v, d] => (v, d),
            ref s => {
                return Err(Error::shape(format!(
                    "embedding table must be 2-D, got {s:?}"
                )))
            }
        };
        if let Some(bad) = ids.ids().iter().find(|&&i| i as usize >= vocab) {
            return Err(Error::Index(format!(
                "token id {bad} outside embedding table of {vocab} rows"
            )));
        }
        let mut out = Vec::with_capacity(ids.ids().len() * dim);
        for &i in ids.ids() {
            let i = i as usize;
            out.extend_from_slice(&tv.data()[i * dim..(i + 1) * dim]);
        }
        let out = Tensor::raw(vec![ids.rows(), ids.cols(), dim], out);
        let ids = ids.ids().to_vec();
        Ok(self.record(out, &[table], move |g, _| {
            let mut dt = vec![T::zero(); vocab * dim];
            for (pos, &i) in ids.iter().enumerate() {
                let i = i as usize;
                let src = &g.data()[pos * dim..(pos + 1) * dim];
                for (d, &s) in dt[i * dim..(i + 1) * dim].iter_mut().zip(src) {
                    *d += s;
                }
            }
            vec![Some(Tensor::raw(vec![vocab, dim], dt))]
        }))
    }
}

impl<'g, T: Element> Var<'g, T> {
    /// Adds the first `time` rows of a `[maxlen, d]` position table to every
    /// sequence of a `[batch, time, d]` input.
    pub fn add_positions(self, positions: Var<'g, T>) -> Result<Var<'g, T>> {
        let x = self.value();
        let p = positions.value();
        let (b, t, d, batched) = seq_dims(x.shape(), "add_positions")?;
        let (maxlen, pd) = match *p.shape() {
            [l, pd] => (l, pd),
            ref s => {
                return Err(Error::shape(format!(
                    "position table must be 2-D, got {s:?}"
                )))
            }
        };
        if pd != d {
            return Err(Error::shape(format!(
                "position width {pd} differs from embedding width {d}"
            )));
        }
        if t > maxlen {
            return Err(Error::Length {
                len: t,
                max: maxlen,
            });
        }
        let mut out = x.data().to_vec();
        for seq in out.chunks_mut(t * d) {
            for (o, &pv) in seq.iter_mut().zip(&p.data()[..t * d]) {
                *o += pv;
            }
        }
        let out = Tensor::raw(seq_shape(b, t, d, batched), out);
        Ok(self.graph.record(out, &[self, positions], move |g, needs| {
            let dp = needs[1].then(|| {
                let mut dp = vec![T::zero(); maxlen * d];
                for seq in g.data().chunks(t * d) {
                    for (o, &gv) in dp.iter_mut().zip(seq) {
                        *o += gv;
                    }
                }
                Tensor::raw(vec![maxlen, d], dp)
            });
            vec![needs[0].then(|| g.clone()), dp]
        }))
    }

    /// Valid-padding 1-D convolution with a `[width, in, out]` kernel.
    pub fn conv1d(self, kernel: Var<'g, T>, bias: Var<'g, T>, stride: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let kv = kernel.value();
        let bv = bias.value();
        let (b, t, c, batched) = seq_dims(x.shape(), "conv1d")?;
        let (k, o) = match *kv.shape() {
            [k, kc, o] if kc == c => (k, o),
            ref s => {
                return Err(Error::shape(format!(
                    "conv1d kernel {s:?} does not match {c} input channels"
                )))
            }
        };
        check_param_shape("conv1d bias", bv.shape(), &[o])?;
        if stride == 0 {
            return Err(Error::Config("conv1d stride must be positive".into()));
        }
        if t < k {
            return Err(Error::shape(format!(
                "conv1d input of {t} steps is shorter than kernel width {k}"
            )));
        }
        let t_out = (t - k) / stride + 1;
        let mut out = Vec::with_capacity(b * t_out * o);
        for _ in 0..b * t_out {
            out.extend_from_slice(bv.data());
        }
        for bi in 0..b {
            for j in 0..k {
                gemm(
                    t_out,
                    c,
                    o,
                    T::one(),
                    x.data(),
                    Layout::strided(bi * t * c + j * c, stride * c),
                    kv.data(),
                    Layout::rows(j * c * o, o),
                    T::one(),
                    &mut out,
                    Layout::rows(bi * t_out * o, o),
                );
            }
        }
        let out = Tensor::raw(seq_shape(b, t_out, o, batched), out);
        Ok(self
            .graph
            .record(out, &[self, kernel, bias], move |g, needs| {
                let dx = needs[0].then(|| {
                    let mut dx = vec![T::zero(); b * t * c];
                    for bi in 0..b {
                        for j in 0..k {
                            gemm(
                                t_out,
                                o,
                                c,
                                T::one(),
                                g.data(),
                                Layout::rows(bi * t_out * o, o),
                                kv.data(),
                                Layout::rows(j * c * o, o).t(),
                                T::one(),
                                &mut dx,
                                Layout::strided(bi * t * c + j * c, stride * c),
                            );
                        }
                    }
                    Tensor::raw(x.shape().to_vec(), dx)
                });
                let dk = needs[1].then(|| {
                    let mut dk = vec![T::zero(); k * c * o];
                    for j in 0..k {
                        for bi in 0..b {
                            gemm(
                                c,
                                t_out,
                                o,
                                T::one(),
                                x.data(),
                                Layout::strided(bi * t * c + j * c, stride * c).t(),
                                g.data(),
                                Layout::rows(bi * t_out * o, o),
                                T::one(),
                                &mut dk,
                                Layout::rows(j * c * o, o),
                            );
                        }
                    }
                    Tensor::raw(vec![k, c, o], dk)
                });
                let db = needs[2].then(|| column_sums(g.data(), o));
                vec![dx, dk, db]
            }))
    }

    /// Channel-wise max over sliding windows; ties go to the first index.
    pub fn maxpool1d(self, window: usize, stride: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let (b, t, c, batched) = seq_dims(x.shape(), "maxpool1d")?;
        if window == 0 || stride == 0 {
            return Err(Error::Config(
                "pool window and stride must be positive".into(),
            ));
        }
        if t < window {
            return Err(Error::shape(format!(
                "maxpool1d input of {t} steps is shorter than window {window}"
            )));
        }
        let t_out = (t - window) / stride + 1;
        let mut out = Vec::with_capacity(b * t_out * c);
        let mut argmax = Vec::with_capacity(b * t_out * c);
        let xd = x.data();
        for bi in 0..b {
            for to in 0..t_out {
                let start = bi * t * c + to * stride * c;
                for ch in 0..c {
                    let mut best = start + ch;
                    for w in 1..window {
                        let idx = start + w * c + ch;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    out.push(xd[best]);
                    argmax.push(best);
                }
            }
        }
        let in_shape = x.shape().to_vec();
        let out = Tensor::raw(seq_shape(b, t_out, c, batched), out);
        Ok(self.graph.record(out, &[self], move |g, _| {
            let mut dx = vec![T::zero(); b * t * c];
            for (&src, &gv) in argmax.iter().zip(g.data()) {
                dx[src] += gv;
            }
            vec![Some(Tensor::raw(in_shape.clone(), dx))]
        }))
    }

    /// Mean over the time axis: `[batch, time, ch] -> [batch, ch]`.
    pub fn global_avg_pool1d(self) -> Result<Var<'g, T>> {
        let x = self.value();
        let (b, t, c, batched) = seq_dims(x.shape(), "global_avg_pool1d")?;
        let inv = T::one() / T::of(t as f64);
        let mut out = vec![T::zero(); b * c];
        for bi in 0..b {
            let acc = &mut out[bi * c..(bi + 1) * c];
            for row in x.data()[bi * t * c..(bi + 1) * t * c].chunks(c) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            for a in acc.iter_mut() {
                *a *= inv;
            }
        }
        let out_shape = if batched { vec![b, c] } else { vec![c] };
        let in_shape = x.shape().to_vec();
        Ok(self
            .graph
            .record(Tensor::raw(out_shape, out), &[self], move |g, _| {
                let mut dx = Vec::with_capacity(b * t * c);
                for bi in 0..b {
                    let gr = &g.data()[bi * c..(bi + 1) * c];
                    for _ in 0..t {
                        dx.extend(gr.iter().map(|&v| v * inv));
                    }
                }
                vec![Some(Tensor::raw(in_shape.clone(), dx))]
            }))
    }

    /// Normalizes the last axis to zero mean and unit variance, then applies
    /// `gain` and `bias`.
    pub fn layer_norm(
        self,
        gain: Var<'g, T>,
        bias: Var<'g, T>,
        epsilon: f64,
    ) -> Result<Var<'g, T>> {
        let x = self.value();
        let d = x.last_dim();
        let gv = gain.value();
        let bv = bias.value();
        check_param_shape("layer_norm gain", gv.shape(), &[d])?;
        check_param_shape("layer_norm bias", bv.shape(), &[d])?;
        let eps = T::of(epsilon);
        let inv_d = T::one() / T::of(d as f64);
        let rows = x.len() / d;
        let mut xhat = Vec::with_capacity(x.len());
        let mut inv_std = Vec::with_capacity(rows);
        for row in x.data().chunks(d) {
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let inv = T::one() / (var + eps).sqrt();
            inv_std.push(inv);
            xhat.extend(row.iter().map(|&v| (v - mean) * inv));
        }
        let mut out = Vec::with_capacity(x.len());
        for row in xhat.chunks(d) {
            for ((&h, &gn), &bs) in row.iter().zip(gv.data()).zip(bv.data()) {
                out.push(gn * h + bs);
            }
        }
        let shape = x.shape().to_vec();
        let out = Tensor::raw(shape.clone(), out);
        Ok(self
            .graph
            .record(out, &[self, gain, bias], move |g, needs| {
                let dx = needs[0].then(|| {
                    let mut dx = Vec::with_capacity(g.len());
                    let mut dxhat = vec![T::zero(); d];
                    for ((gr, hr), &inv) in g.data().chunks(d).zip(xhat.chunks(d)).zip(&inv_std) {
                        for ((o, &gval), &gn) in dxhat.iter_mut().zip(gr).zip(gv.data()) {
                            *o = gval * gn;
                        }
                        let mean_dxhat = dxhat.iter().copied().sum::<T>() * inv_d;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(hr).map(|(&a, &h)| a * h).sum::<T>() * inv_d;
                        dx.extend(
                            dxhat
                                .iter()
                                .zip(hr)
                                .map(|(&a, &h)| inv * (a - mean_dxhat - h * mean_dxhat_xhat)),
                        );
                    }
                    Tensor::raw(shape.clone(), dx)
                });
                let dgain = needs[1].then(|| {
                    let mut dg = vec![T::zero(); d];
                    for (gr, hr) in g.data().chunks(d).zip(xhat.chunks(d)) {
                        for ((o, &gval), &h) in dg.iter_mut().zip(gr).zip(hr) {
                            *o += gval * h;
                        }
                    }
                    Tensor::raw(vec![d], dg)
                });
                let dbias = needs[2].then(|| column_sums(g.data(), d));
                vec![dx, dgain, dbias]
            }))
    }

    /// Inverted dropout. Evaluation mode (or `rate == 0`) returns the input
    /// unchanged; training mode zeroes each element with probability `rate`
    /// and scales survivors by `1 / (1 - rate)`.
    pub fn dropout(self, rate: f64, training: bool, rng: &mut RngStream) -> Result<Var<'g, T>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(self);
        }
        let keep_scale = T::of(1.0 / (1.0 - rate));
        let x = self.value();
        let mask: Vec<T> = (0..x.len())
            .map(|_| {
                if rng.bernoulli(rate) {
                    T::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let out = Tensor::raw(
            x.shape().to_vec(),
            x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
        );
        Ok(self.graph.record(out, &[self], move |g, _| {
            vec![Some(Tensor::raw(
                g.shape().to_vec(),
                g.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
            ))]
        }))
    }

    /// Single-direction LSTM over `[batch, time, in]` with zero initial
    /// state. Gates are packed input, forget, cell, output along the `4h`
    /// axis of `kernel [in, 4h]`, `recurrent [h, 4h]` and `bias [4h]`.
    pub fn lstm(
        self,
        kernel: Var<'g, T>,
        recurrent: Var<'g, T>,
        bias: Var<'g, T>,
        options: LstmOptions,
    ) -> Result<Var<'g, T>> {
        let x = self.value();
        let wx = kernel.value();
        let wh = recurrent.value();
        let bv = bias.value();
        let (b, t, input, batched) = seq_dims(x.shape(), "lstm")?;
        let h = match *wh.shape() {
            [h, g4] if g4 == 4 * h => h,
            ref s => {
                return Err(Error::shape(format!(
                    "recurrent kernel {s:?} is not [h, 4h]"
                )))
            }
        };
        let g4 = 4 * h;
        check_param_shape("lstm kernel", wx.shape(), &[input, g4])?;
        check_param_shape("lstm bias", bv.shape(), &[g4])?;

        // Input projections for every time step in one product.
        let mut xw = Vec::with_capacity(b * t * g4);
        for _ in 0..b * t {
            xw.extend_from_slice(bv.data());
        }
        gemm(
            b * t,
            input,
            g4,
            T::one(),
            x.data(),
            Layout::rows(0, input),
            wx.data(),
            Layout::rows(0, g4),
            T::one(),
            &mut xw,
            Layout::rows(0, g4),
        );

        let time_at = move |s: usize| if options.reverse { t - 1 - s } else { s };
        // Per step s: activated gates [b, 4h], cell [b, h], hidden [b, h].
        let mut gates = vec![T::zero(); t * b * g4];
        let mut cells = vec![T::zero(); t * b * h];
        let mut hiddens = vec![T::zero(); t * b * h];
        for s in 0..t {
            let tt = time_at(s);
            let z = &mut gates[s * b * g4..(s + 1) * b * g4];
            for bi in 0..b {
                let src = (bi * t + tt) * g4;
                z[bi * g4..(bi + 1) * g4].copy_from_slice(&xw[src..src + g4]);
            }
            if s > 0 {
                gemm(
                    b,
                    h,
                    g4,
                    T::one(),
                    &hiddens,
                    Layout::rows((s - 1) * b * h, h),
                    wh.data(),
                    Layout::rows(0, g4),
                    T::one(),
                    z,
                    Layout::rows(0, g4),
                );
            }
            for bi in 0..b {
                let zr = &mut z[bi * g4..(bi + 1) * g4];
                let (zi, rest) = zr.split_at_mut(h);
                let (zf, rest) = rest.split_at_mut(h);
                let (zg, zo) = rest.split_at_mut(h);
                let c_base = s * b * h + bi * h;
                for u in 0..h {
                    let i = sigmoid(zi[u]);
                    let f = sigmoid(zf[u]);
                    let gg = zg[u].tanh();
                    let o = sigmoid(zo[u]);
                    zi[u] = i;
                    zf[u] = f;
                    zg[u] = gg;
                    zo[u] = o;
                    let c_prev = if s > 0 {
                        cells[c_base - b * h + u]
                    } else {
                        T::zero()
                    };
                    let c = f * c_prev + i * gg;
                    cells[c_base + u] = c;
                    hiddens[c_base + u] = o * c.tanh();
                }
            }
        }

        let out = if options.return_sequences {
            let mut out = vec![T::zero(); b * t * h];
            for s in 0..t {
                let tt = time_at(s);
                for bi in 0..b {
                    let src = s * b * h + bi * h;
                    let dst = (bi * t + tt) * h;
                    out[dst..dst + h].copy_from_slice(&hiddens[src..src + h]);
                }
            }
            Tensor::raw(seq_shape(b, t, h, batched), out)
        } else {
            let last = hiddens[(t - 1) * b * h..].to_vec();
            Tensor::raw(if batched { vec![b, h] } else { vec![h] }, last)
        };

        let in_shape = x.shape().to_vec();
        Ok(self
            .graph
            .record(out, &[self, kernel, recurrent, bias], move |g, needs| {
                let gd = g.data();
                let mut dz_all = vec![T::zero(); b * t * g4];
                let mut dwh = needs[2].then(|| vec![T::zero(); h * g4]);
                let mut dh_next = vec![T::zero(); b * h];
                let mut dc_next = vec![T::zero(); b * h];
                for s in (0..t).rev() {
                    let tt = time_at(s);
                    for bi in 0..b {
                        let upstream: Option<&[T]> = if options.return_sequences {
                            Some(&gd[(bi * t + tt) * h..(bi * t + tt + 1) * h])
                        } else if s == t - 1 {
                            Some(&gd[bi * h..(bi + 1) * h])
                        } else {
                            None
                        };
                        let gate = &gates[s * b * g4 + bi * g4..s * b * g4 + (bi + 1) * g4];
                        let c_base = s * b * h + bi * h;
                        let dz = &mut dz_all[(bi * t + tt) * g4..(bi * t + tt + 1) * g4];
                        for u in 0..h {
                            let dh = dh_next[bi * h + u] + upstream.map_or(T::zero(), |up| up[u]);
                            let (i, f, gg, o) =
                                (gate[u], gate[h + u], gate[2 * h + u], gate[3 * h + u]);
                            let c = cells[c_base + u];
                            let tc = c.tanh();
                            let dc = dc_next[bi * h + u] + dh * o * (T::one() - tc * tc);
                            let c_prev = if s > 0 {
                                cells[c_base - b * h + u]
                            } else {
                                T::zero()
                            };
                            dz[u] = dc * gg * i * (T::one() - i);
                            dz[h + u] = dc * c_prev * f * (T::one() - f);
                            dz[2 * h + u] = dc * i * (T::one() - gg * gg);
                            dz[3 * h + u] = dh * tc * o * (T::one() - o);
                            dc_next[bi * h + u] = dc * f;
                        }
                    }
                    let dz_step = Layout::strided(tt * g4, t * g4);
                    if s > 0 {
                        if let Some(dwh) = dwh.as_mut() {
                            gemm(
                                h,
                                b,
                                g4,
                                T::one(),
                                &hiddens,
                                Layout::rows((s - 1) * b * h, h).t(),
                                &dz_all,
                                dz_step,
                                T::one(),
                                dwh,
                                Layout::rows(0, g4),
                            );
                        }
                    }
                    gemm(
                        b,
                        g4,
                        h,
                        T::one(),
                        &dz_all,
                        dz_step,
                        wh.data(),
                        Layout::rows(0, g4).t(),
                        T::zero(),
                        &mut dh_next,
                        Layout::rows(0, h),
                    );
                }
                let dx = needs[0].then(|| {
                    let mut dx = vec![T::zero(); b * t * input];
                    gemm(
                        b * t,
                        g4,
                        input,
                        T::one(),
                        &dz_all,
                        Layout::rows(0, g4),
                        wx.data(),
                        Layout::rows(0, g4).t(),
                        T::zero(),
                        &mut dx,
                        Layout::rows(0, input),
                    );
                    Tensor::raw(in_shape.clone(), dx)
                });
                let dwx = needs[1].then(|| {
                    let mut dwx = vec![T::zero(); input * g4];
                    gemm(
                        input,
                        b * t,
                        g4,
                        T::one(),
                        x.data(),
                        Layout::rows(0, input).t(),
                        &dz_all,
                        Layout::rows(0, g4),
                        T::zero(),
                        &mut dwx,
                        Layout::rows(0, g4),
                    );
                    Tensor::raw(vec![input, g4], dwx)
                });
                let db = needs[3].then(|| column_sums(&dz_all, g4));
                vec![dx, dwx, dwh.map(|d| Tensor::raw(vec![h, g4], d)), db]
            }))
    }

    /// Scaled dot-product attention over packed heads.
    ///
    /// `q`, `k`, `v` are `[batch, time, heads * key_width]`; head `i` reads
    /// columns `i * key_width .. (i + 1) * key_width`. Returns the attended
    /// values in the same layout plus the attention weights
    /// `[batch, heads, time, time]`.
    pub fn attention(
        self,
        key: Var<'g, T>,
        value: Var<'g, T>,
        heads: usize,
    ) -> Result<(Var<'g, T>, Rc<Tensor<T>>)> {
        let q = self.value();
        let k = key.value();
        let v = value.value();
        let (b, t, width, batched) = seq_dims(q.shape(), "attention")?;
        if k.shape() != q.shape() || v.shape() != q.shape() {
            return Err(Error::shape(format!(
                "attention q/k/v shapes differ: {:?} {:?} {:?}",
                q.shape(),
                k.shape(),
                v.shape()
            )));
        }
        if heads == 0 || width % heads != 0 {
            return Err(Error::shape(format!(
                "attention width {width} is not divisible by {heads} heads"
            )));
        }
        let kw = width / heads;
        let scale = T::of(1.0 / (kw as f64).sqrt());
        let head_view =
            move |bi: usize, hi: usize| Layout::strided(bi * t * width + hi * kw, width);
        let prob_off = move |bi: usize, hi: usize| (bi * heads + hi) * t * t;

        let mut probs = vec![T::zero(); b * heads * t * t];
        let mut out = vec![T::zero(); b * t * width];
        for bi in 0..b {
            for hi in 0..heads {
                let p_off = prob_off(bi, hi);
                gemm(
                    t,
                    kw,
                    t,
                    scale,
                    q.data(),
                    head_view(bi, hi),
                    k.data(),
                    head_view(bi, hi).t(),
                    T::zero(),
                    &mut probs,
                    Layout::rows(p_off, t),
                );
                softmax_rows(&mut probs[p_off..p_off + t * t], t);
                gemm(
                    t,
                    t,
                    kw,
                    T::one(),
                    &probs,
                    Layout::rows(p_off, t),
                    v.data(),
                    head_view(bi, hi),
                    T::zero(),
                    &mut out,
                    head_view(bi, hi),
                );
            }
        }
        let probs = Rc::new(Tensor::raw(vec![b, heads, t, t], probs));
        let saved = probs.clone();
        let out = Tensor::raw(seq_shape(b, t, width, batched), out);
        let shape = q.shape().to_vec();
        let var = self.graph.record(out, &[self, key, value], move |g, _| {
            let p = saved.data();
            let mut dq = vec![T::zero(); b * t * width];
            let mut dk = vec![T::zero(); b * t * width];
            let mut dv = vec![T::zero(); b * t * width];
            let mut dp = vec![T::zero(); t * t];
            for bi in 0..b {
                for hi in 0..heads {
                    let p_off = prob_off(bi, hi);
                    let view = head_view(bi, hi);
                    gemm(
                        t,
                        t,
                        kw,
                        T::one(),
                        p,
                        Layout::rows(p_off, t).t(),
                        g.data(),
                        view,
                        T::zero(),
                        &mut dv,
                        view,
                    );
                    gemm(
                        t,
                        kw,
                        t,
                        T::one(),
                        g.data(),
                        view,
                        v.data(),
                        view.t(),
                        T::zero(),
                        &mut dp,
                        Layout::rows(0, t),
                    );
                    let ds = softmax_rows_backward(&p[p_off..p_off + t * t], &dp, t);
                    gemm(
                        t,
                        t,
                        kw,
                        scale,
                        &ds,
                        Layout::rows(0, t),
                        k.data(),
                        view,
                        T::zero(),
                        &mut dq,
                        view,
                    );
                    gemm(
                        t,
                        t,
                        kw,
                        scale,
                        &ds,
                        Layout::rows(0, t).t(),
                        q.data(),
                        view,
                        T::zero(),
                        &mut dk,
                        view,
                    );
                }
            }
            vec![
                Some(Tensor::raw(shape.clone(), dq)),
                Some(Tensor::raw(shape.clone(), dk)),
                Some(Tensor::raw(shape.clone(), dv)),
            ]
        });
        Ok((var, probs))
    }

    /// Mean sparse categorical cross-entropy of `[batch, classes]`
    /// probability rows against integer labels.
    pub fn sparse_cce(self, labels: &[usize]) -> Result<Var<'g, T>> {
        let p = self.value();
        let (rows, classes) = match *p.shape() {
            [r, c] => (r, c),
            [c] => (1, c),
            ref s => {
                return Err(Error::shape(format!(
                    "loss expects [batch, classes], got {s:?}"
                )))
            }
        };
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "{} labels for {rows} probability rows",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Index(format!(
                "label {bad} outside {classes} classes"
            )));
        }
        let floor = T::of(PROBABILITY_FLOOR);
        let inv_n = T::one() / T::of(rows as f64);
        let total: T = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -p.data()[i * classes + l].max(floor).ln())
            .sum();
        let labels = labels.to_vec();
        let shape = p.shape().to_vec();
        Ok(self
            .graph
            .record(Tensor::scalar(total * inv_n), &[self], move |g, _| {
                let mut dp = vec![T::zero(); rows * classes];
                let scale = g.data()[0] * inv_n;
                for (i, &l) in labels.iter().enumerate() {
                    let pv = p.data()[i * classes + l];
                    if pv > floor {
                        dp[i * classes + l] = -scale / pv;
                    }
                }
                vec![Some(Tensor::raw(shape.clone(), dp))]
            }))
    }
}
