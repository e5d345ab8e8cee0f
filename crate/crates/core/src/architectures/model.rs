use std::rc::Rc;

use super::graph::{ModelGraph, NodeId};
use crate::autodiff::{Graph, IdMatrix, Var};
use crate::error::{Error, Result};
use crate::layers::{
    layer_forward, BoundParams, InputSource, LayerInput, LayerKind, ParamCount, ParamSpec,
};
use crate::rng::RngStream;
use crate::tensor::{Element, Tensor};

/// Token-id batches for the model's input nodes.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelInputs<'a> {
    pub chars: Option<&'a IdMatrix>,
    pub words: Option<&'a IdMatrix>,
}

impl<'a> ModelInputs<'a> {
    pub fn chars(ids: &'a IdMatrix) -> Self {
        ModelInputs {
            chars: Some(ids),
            words: None,
        }
    }

    pub fn words(ids: &'a IdMatrix) -> Self {
        ModelInputs {
            chars: None,
            words: Some(ids),
        }
    }

    pub fn both(chars: &'a IdMatrix, words: &'a IdMatrix) -> Self {
        ModelInputs {
            chars: Some(chars),
            words: Some(words),
        }
    }

    fn get(&self, source: InputSource) -> Option<&'a IdMatrix> {
        match source {
            InputSource::Chars => self.chars,
            InputSource::Words => self.words,
        }
    }
}

/// Whether dropout is active; training mode draws masks from the stream.
pub enum ForwardMode<'r> {
    Train(&'r mut RngStream),
    Eval,
}

pub struct ModelOutput<'g, T: Element> {
    /// Class probabilities `[batch, classes]`.
    pub probs: Var<'g, T>,
    /// Sum of the L2 activity and bias penalties, if any layer has one.
    pub penalty: Option<Var<'g, T>>,
}

/// A model graph with materialized parameters.
#[derive(Clone, Debug)]
pub struct Model<T: Element> {
    graph: ModelGraph,
    params: Vec<Rc<Tensor<T>>>,
    offsets: Vec<usize>,
}

impl<T: Element> Model<T> {
    /// Samples every declared parameter from its initializer, in node order.
    pub fn init(graph: ModelGraph, rng: &mut RngStream) -> Result<Self> {
        let mut params = Vec::new();
        for node in graph.nodes() {
            for p in &node.params.params {
                params.push(Rc::new(p.init.sample::<T>(&p.shape, rng)?));
            }
        }
        let offsets = graph.param_offsets();
        Ok(Model {
            graph,
            params,
            offsets,
        })
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    pub fn parameters(&self) -> &[Rc<Tensor<T>>] {
        &self.params
    }

    /// Declarations aligned with `parameters()`.
    pub fn param_specs(&self) -> impl Iterator<Item = (NodeId, &ParamSpec)> {
        self.graph
            .nodes()
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.params.params.iter().map(move |p| (NodeId(i), p)))
    }

    pub fn param_index(&self, layer: &str, role: &str) -> Option<usize> {
        let node = self.graph.find(layer)?;
        let slot = self.graph.node(node).params.position(role)?;
        Some(self.offsets[node.0] + slot)
    }

    pub fn parameter(&self, layer: &str, role: &str) -> Option<&Tensor<T>> {
        self.param_index(layer, role).map(|i| &*self.params[i])
    }

    /// Mutable access to a parameter; clones it first if a graph still
    /// holds a reference.
    pub fn parameter_mut(&mut self, index: usize) -> &mut Tensor<T> {
        Rc::make_mut(&mut self.params[index])
    }

    pub fn set_parameter(&mut self, layer: &str, role: &str, value: Tensor<T>) -> Result<()> {
        let index = self
            .param_index(layer, role)
            .ok_or_else(|| Error::Build(format!("no parameter `{role}` on layer `{layer}`")))?;
        let expected = &self
            .param_specs()
            .nth(index)
            .expect("index in range")
            .1
            .shape;
        if value.shape() != expected.as_slice() {
            return Err(Error::Build(format!(
                "{layer}/{role}: expected shape {expected:?}, got {:?}",
                value.shape()
            )));
        }
        self.params[index] = Rc::new(value);
        Ok(())
    }

    /// Parameter totals tallied from the materialized tensors.
    pub fn runtime_counts(&self) -> ParamCount {
        self.param_specs()
            .zip(&self.params)
            .map(|((_, spec), t)| ParamCount::of(t.len() as u64, spec.trainable))
            .sum()
    }

    pub fn to_precision<U: Element>(&self) -> Model<U> {
        Model {
            graph: self.graph.clone(),
            params: self
                .params
                .iter()
                .map(|t| Rc::new(t.to_precision()))
                .collect(),
            offsets: self.offsets.clone(),
        }
    }

    /// Registers parameters on `graph`: trainable ones as gradient leaves,
    /// frozen ones as constants.
    pub fn bind<'g>(&self, graph: &'g Graph<T>) -> Vec<Var<'g, T>> {
        self.param_specs()
            .zip(&self.params)
            .map(|((_, spec), t)| {
                if spec.trainable {
                    graph.leaf_rc(Rc::clone(t))
                } else {
                    graph.constant_rc(Rc::clone(t))
                }
            })
            .collect()
    }

    /// Binds every parameter as a constant.
    pub fn bind_constants<'g>(&self, graph: &'g Graph<T>) -> Vec<Var<'g, T>> {
        self.params
            .iter()
            .map(|t| graph.constant_rc(Rc::clone(t)))
            .collect()
    }

    pub fn forward<'g>(
        &self,
        graph: &'g Graph<T>,
        bound: &[Var<'g, T>],
        inputs: ModelInputs<'_>,
        mode: ForwardMode<'_>,
    ) -> Result<ModelOutput<'g, T>> {
        if bound.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "{} bound parameters for a model with {}",
                bound.len(),
                self.params.len()
            )));
        }
        let mut scratch;
        let (training, rng) = match mode {
            ForwardMode::Train(rng) => (true, rng),
            ForwardMode::Eval => {
                scratch = RngStream::new(0);
                (false, &mut scratch)
            }
        };
        self.batch_size(inputs)?;
        let mut values: Vec<LayerInput<'_, 'g, T>> = Vec::with_capacity(self.graph.nodes().len());
        let mut penalty: Option<Var<'g, T>> = None;
        for (i, node) in self.graph.nodes().iter().enumerate() {
            let params =
                BoundParams::new(&node.params, &bound[self.offsets[i]..self.offsets[i + 1]]);
            let args: Vec<LayerInput<'_, 'g, T>> = match node.spec.kind {
                LayerKind::Input { source, .. } => {
                    vec![LayerInput::Ids(
                        inputs.get(source).expect("checked by batch_size"),
                    )]
                }
                _ => node.inputs.iter().map(|id| values[id.0]).collect(),
            };
            let out = layer_forward(graph, &node.spec, &args, &params, training, rng)?;
            if let Some(p) = out.penalty {
                penalty = Some(match penalty {
                    Some(acc) => acc.add(p)?,
                    None => p,
                });
            }
            values.push(out.value);
        }
        match values[self.graph.output().0] {
            LayerInput::Dense(probs) => Ok(ModelOutput { probs, penalty }),
            LayerInput::Ids(_) => Err(Error::Contract("model output is an input node".into())),
        }
    }

    /// Class probabilities with dropout disabled and no gradient tape.
    pub fn predict(&self, inputs: ModelInputs<'_>) -> Result<Tensor<T>> {
        let graph = Graph::new();
        let bound = self.bind_constants(&graph);
        let out = self.forward(&graph, &bound, inputs, ForwardMode::Eval)?;
        Ok((*out.probs.value()).clone())
    }

    fn batch_size(&self, inputs: ModelInputs<'_>) -> Result<usize> {
        let mut batch = None;
        for (_, source, length) in self.graph.inputs() {
            let ids = inputs.get(source).ok_or_else(|| {
                Error::Contract(format!("{} requires {source:?} input", self.graph.name()))
            })?;
            if ids.cols() > length {
                return Err(Error::Length {
                    len: ids.cols(),
                    max: length,
                });
            }
            if ids.cols() != length {
                return Err(Error::shape(format!(
                    "{source:?} input has {} positions, model expects {length}",
                    ids.cols()
                )));
            }
            match batch {
                Some(b) if b != ids.rows() => {
                    return Err(Error::shape(format!(
                        "input batches differ: {b} vs {}",
                        ids.rows()
                    )))
                }
                _ => batch = Some(ids.rows()),
            }
        }
        batch.ok_or_else(|| Error::Contract("model has no inputs".into()))
    }
}
