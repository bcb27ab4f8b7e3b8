//! Chebyshev spectral graph convolutional network.
//!
//! Each layer computes `ReLU(sum_k T_k(L) X Theta_k + b)` with the
//! Chebyshev basis obtained from the three-term recursion on the scaled
//! Laplacian `L`. The K weight blocks of a layer are stored stacked as one
//! `(K * in) x out` parameter so the sum over k is a single product with the
//! column-stacked basis.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamSet, SparseOp, Tape, Tensor, Var};

/// Hidden node-feature widths used for every case.
pub const HIDDEN_WIDTHS: [usize; 7] = [32, 64, 128, 256, 128, 64, 32];

/// Chebyshev polynomial order used for every case.
pub const DEFAULT_ORDER: usize = 10;

#[derive(Clone, Debug)]
pub struct ChebLayer {
    pub order: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    weight: ParamId,
    bias: ParamId,
}

impl ChebLayer {
    pub fn new(params: &mut ParamSet, name: &str, order: usize, in_dim: usize, out_dim: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::Config("Chebyshev order must be at least 1".into()));
        }
        let weight = params.insert(
            format!("{name}.weight"),
            Tensor::zeros(&[order * in_dim, out_dim]),
        )?;
        let bias = params.insert(format!("{name}.bias"), Tensor::zeros(&[out_dim]))?;
        Ok(ChebLayer {
            order,
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    /// Bound of the uniform initializer, `sqrt(6 / fan_in)` with the fan-in
    /// counting every Chebyshev block.
    pub fn init_bound(&self) -> f64 {
        (6.0 / (self.order * self.in_dim) as f64).sqrt()
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        lhat: &Arc<SparseOp>,
        x: Var,
        activate: bool,
    ) -> Result<Var> {
        let width = tape.value(x).cols();
        if width != self.in_dim {
            return Err(Error::Shape {
                op: "cheb_layer",
                lhs: vec![self.in_dim],
                rhs: tape.shape(x).to_vec(),
            });
        }
        let basis = tape.cheb_basis(lhat, x, self.order)?;
        let mixed = tape.matmul(basis, bound[self.weight.index()])?;
        let out = tape.add_row(mixed, bound[self.bias.index()])?;
        Ok(if activate { tape.relu(out) } else { out })
    }
}

/// Stack of Chebyshev layers with a linear output layer.
#[derive(Clone, Debug)]
pub struct GcnNet {
    layers: Vec<ChebLayer>,
}

impl GcnNet {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        order: usize,
    ) -> Result<Self> {
        let mut widths = vec![in_dim];
        widths.extend_from_slice(hidden);
        widths.push(out_dim);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| ChebLayer::new(params, &format!("{name}.layer{l}"), order, w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(GcnNet { layers })
    }

    pub fn layers(&self) -> &[ChebLayer] {
        &self.layers
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], lhat: &Arc<SparseOp>, features: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut x = features;
        for (l, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, bound, lhat, x, l < last)?;
        }
        Ok(x)
    }
}

/// Input graph of one sub-network: scaled Laplacian plus node features.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub lhat: Arc<SparseOp>,
    pub features: Tensor,
}

impl GraphInput {
    /// Uses node coordinates as features, shifted to zero mean and scaled so
    /// each coordinate column has maximum magnitude one.
    pub fn from_coordinates(lhat: Arc<SparseOp>, coords: &[Vec<f64>]) -> Result<Self> {
        let n = coords.len();
        if n != lhat.nrows() {
            return Err(Error::Shape {
                op: "graph_input",
                lhs: vec![lhat.nrows()],
                rhs: vec![n],
            });
        }
        let d = coords.first().map_or(0, |c| c.len());
        let mut data = vec![0.0; n * d];
        for j in 0..d {
            let mean = coords.iter().map(|c| c[j]).sum::<f64>() / n as f64;
            let scale = coords.iter().map(|c| (c[j] - mean).abs()).fold(0.0, f64::max);
            let scale = if scale > 0.0 { scale } else { 1.0 };
            for (i, c) in coords.iter().enumerate() {
                data[i * d + j] = (c[j] - mean) / scale;
            }
        }
        Ok(GraphInput {
            lhat,
            features: Tensor::matrix(n, d, data)?,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// One network per solution component, each attached to one of the input
/// graphs (for mixed discretizations components live on different graphs).
#[derive(Clone, Debug)]
pub struct SubNetBundle {
    nets: Vec<GcnNet>,
    graph_of: Vec<usize>,
    graphs: Vec<GraphInput>,
}

impl SubNetBundle {
    pub fn new(
        params: &mut ParamSet,
        graphs: Vec<GraphInput>,
        graph_of: Vec<usize>,
        hidden: &[usize],
        order: usize,
    ) -> Result<Self> {
        let mut nets = Vec::with_capacity(graph_of.len());
        for (c, &g) in graph_of.iter().enumerate() {
            let graph = graphs
                .get(g)
                .ok_or_else(|| Error::Config(format!("component {c} refers to missing graph {g}")))?;
            nets.push(GcnNet::new(
                params,
                &format!("net{c}"),
                graph.features.cols(),
                hidden,
                1,
                order,
            )?);
        }
        Ok(SubNetBundle {
            nets,
            graph_of,
            graphs,
        })
    }

    pub fn nets(&self) -> &[GcnNet] {
        &self.nets
    }

    pub fn graphs(&self) -> &[GraphInput] {
        &self.graphs
    }

    pub fn graph_of(&self, component: usize) -> usize {
        self.graph_of[component]
    }

    /// Draws every weight uniformly in `[-b, b]` with `b = sqrt(6 / fan_in)`
    /// and zeroes every bias.
    pub fn init_weights(&self, params: &mut ParamSet, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for net in &self.nets {
            for layer in &net.layers {
                let bound = layer.init_bound();
                for w in params.get_mut(layer.weight).data_mut() {
                    *w = rng.gen_range(-bound..bound);
                }
                for b in params.get_mut(layer.bias).data_mut() {
                    *b = 0.0;
                }
            }
        }
    }

    /// Nodal output of every component network, each of shape `[n_nodes]`.
    pub fn forward(&self, tape: &mut Tape, bound: &[Var]) -> Result<Vec<Var>> {
        let inputs: Vec<Var> = self
            .graphs
            .iter()
            .map(|g| tape.constant(g.features.clone()))
            .collect();
        let mut out = Vec::with_capacity(self.nets.len());
        for (net, &g) in self.nets.iter().zip(&self.graph_of) {
            let y = net.forward(tape, bound, &self.graphs[g].lhat, inputs[g])?;
            out.push(tape.flatten(y));
        }
        Ok(out)
    }
}
