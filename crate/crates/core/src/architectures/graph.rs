use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{infer, InputSource, LayerKind, LayerSpec, ParamCount, ParameterBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelNode {
    pub spec: LayerSpec,
    pub inputs: Vec<NodeId>,
    /// Per-example output shape (no batch axis).
    pub output_shape: Vec<usize>,
    pub params: ParameterBundle,
    /// Parallel branch this node belongs to, if any.
    pub branch: Option<String>,
}

/// Topologically ordered layer graph with up to two input branches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    name: String,
    nodes: Vec<ModelNode>,
    output: Option<NodeId>,
}

impl ModelGraph {
    pub fn new(name: impl Into<String>) -> Self {
        ModelGraph {
            name: name.into(),
            nodes: Vec::new(),
            output: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[ModelNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &ModelNode {
        &self.nodes[id.0]
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.spec.name == name)
            .map(NodeId)
    }

    pub fn input(
        &mut self,
        name: impl Into<String>,
        source: InputSource,
        length: usize,
    ) -> Result<NodeId> {
        self.add(
            LayerSpec::new(name, LayerKind::Input { source, length }),
            &[],
        )
    }

    /// Appends a layer fed by `inputs`, inferring its output shape and
    /// declaring its parameters.
    pub fn add(&mut self, spec: LayerSpec, inputs: &[NodeId]) -> Result<NodeId> {
        self.add_in_branch(spec, inputs, None)
    }

    pub fn add_in_branch(
        &mut self,
        spec: LayerSpec,
        inputs: &[NodeId],
        branch: Option<&str>,
    ) -> Result<NodeId> {
        if self.find(&spec.name).is_some() {
            return Err(Error::Build(format!(
                "duplicate layer name `{}`",
                spec.name
            )));
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::Build(format!(
                "{spec} refers to unknown node {}",
                bad.0
            )));
        }
        let shapes: Vec<&[usize]> = inputs
            .iter()
            .map(|id| self.nodes[id.0].output_shape.as_slice())
            .collect();
        let (output_shape, params) = infer(&spec, &shapes)?;
        self.nodes.push(ModelNode {
            spec,
            inputs: inputs.to_vec(),
            output_shape,
            params,
            branch: branch.map(str::to_owned),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn set_output(&mut self, id: NodeId) {
        self.output = Some(id);
    }

    pub fn output(&self) -> NodeId {
        self.output
            .unwrap_or_else(|| NodeId(self.nodes.len().saturating_sub(1)))
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.node(self.output()).output_shape
    }

    /// Input nodes in declaration order.
    pub fn inputs(&self) -> Vec<(NodeId, InputSource, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.spec.kind {
                LayerKind::Input { source, length } => Some((NodeId(i), source, length)),
                _ => None,
            })
            .collect()
    }

    /// Sum of declared parameters over all nodes.
    pub fn counts(&self) -> ParamCount {
        self.nodes.iter().map(|n| n.params.count()).sum()
    }

    pub fn branch_counts(&self, branch: &str) -> ParamCount {
        self.nodes
            .iter()
            .filter(|n| n.branch.as_deref() == Some(branch))
            .map(|n| n.params.count())
            .sum()
    }

    /// Flat index of each node's first parameter, plus the total.
    pub(crate) fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.nodes.len() + 1);
        let mut at = 0;
        for n in &self.nodes {
            offsets.push(at);
            at += n.params.params.len();
        }
        offsets.push(at);
        offsets
    }
}
