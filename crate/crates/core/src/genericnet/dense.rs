use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};

/// Fully connected network, `tanh` on hidden layers and a linear output.
///
/// The network only describes the architecture; parameters live in a flat
/// slice laid out layer by layer as the row-major `in × out` weight matrix
/// followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseNet {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
}

impl DenseNet {
    /// `hidden` hidden layers of width `width`.
    pub fn new(input: usize, hidden: usize, width: usize, output: usize) -> Self {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(width, hidden));
        widths.push(output);
        Self { widths }
    }

    pub fn input(&self) -> usize {
        self.widths[0]
    }

    pub fn output(&self) -> usize {
        *self.widths.last().expect("at least one layer")
    }

    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| (i + 1) * o).sum()
    }

    /// Shapes of the parameter blocks in layout order.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers().flat_map(|(i, o)| [(i, o), (1, o)]).collect()
    }

    /// Uniform `±√(6/(in + out))` weights, zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) {
        for (i, o) in self.layers() {
            let a = (6.0 / (i + o) as f64).sqrt();
            out.extend((0..i * o).map(|_| rng.random_range(-a..a)));
            out.extend(std::iter::repeat_n(0.0, o));
        }
    }

    /// Network output at a single point.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let mut off = 0;
        let last = self.widths.len() - 2;
        for (l, (i, o)) in self.layers().enumerate() {
            let (w, b) = (&params[off..off + i * o], &params[off + i * o..off + (i + 1) * o]);
            let mut next = b.to_vec();
            for (r, hr) in h.iter().enumerate() {
                for (c, nc) in next.iter_mut().enumerate() {
                    *nc += hr * w[r * o + c];
                }
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            h = next;
            off += (i + 1) * o;
        }
        h
    }

    /// Value and input gradient of a scalar-output network at one point.
    pub fn value_grad(&self, params: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(self.output(), 1, "value_grad needs a scalar network");
        let mut acts = vec![x.to_vec()];
        let mut offsets = Vec::new();
        let mut off = 0;
        let last = self.widths.len() - 2;
        for (l, (i, o)) in self.layers().enumerate() {
            offsets.push(off);
            let h = acts.last().expect("input");
            let (w, b) = (&params[off..off + i * o], &params[off + i * o..off + (i + 1) * o]);
            let mut next = b.to_vec();
            for (r, hr) in h.iter().enumerate() {
                for (c, nc) in next.iter_mut().enumerate() {
                    *nc += hr * w[r * o + c];
                }
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(next);
            off += (i + 1) * o;
        }
        let value = acts.last().expect("output")[0];
        let mut g = vec![1.0];
        for (l, (i, o)) in self.layers().enumerate().collect::<Vec<_>>().into_iter().rev() {
            if l < last {
                for (gc, a) in g.iter_mut().zip(&acts[l + 1]) {
                    *gc *= 1.0 - a * a;
                }
            }
            let w = &params[offsets[l]..offsets[l] + i * o];
            g = (0..i).map(|r| (0..o).map(|c| w[r * o + c] * g[c]).sum()).collect();
        }
        (value, g)
    }

    /// Output for every row of `x` (`N × input`), given the parameter leaves
    /// in [`DenseNet::shapes`] order.
    pub fn forward_tape(&self, t: &mut Tape, leaves: &[Var], x: Var) -> Var {
        let last = self.widths.len() - 2;
        let mut h = x;
        for l in 0..=last {
            let z = t.matmul(h, leaves[2 * l]);
            h = t.add_row(z, leaves[2 * l + 1]);
            if l < last {
                h = t.tanh(h);
            }
        }
        h
    }
}

/// Leaves for `params` split into blocks of the given shapes.
pub(crate) fn leaves_for(t: &mut Tape, shapes: &[(usize, usize)], params: &[f64]) -> Vec<Var> {
    let mut off = 0;
    shapes
        .iter()
        .map(|&(r, c)| {
            let v = Array2::from_shape_vec((r, c), params[off..off + r * c].to_vec()).expect("block size");
            off += r * c;
            t.leaf(v)
        })
        .collect()
}
