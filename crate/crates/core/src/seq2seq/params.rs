//! Flat parameter storage with a named, shaped layout.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, NdFloat};
use rand::Rng;

use super::S2SConfig;

// Tensor ids, in storage order.
pub(crate) const EMB: usize = 0;
pub(crate) const ENC_F_W: usize = 1;
pub(crate) const ENC_F_B: usize = 2;
pub(crate) const ENC_B_W: usize = 3;
pub(crate) const ENC_B_B: usize = 4;
pub(crate) const INIT_W: usize = 5;
pub(crate) const INIT_B: usize = 6;
pub(crate) const LABEL_EMB: usize = 7;
pub(crate) const DEC_W: usize = 8;
pub(crate) const DEC_B: usize = 9;
pub(crate) const ATT_W: usize = 10;
pub(crate) const ATT_U: usize = 11;
pub(crate) const ATT_B: usize = 12;
pub(crate) const ATT_V: usize = 13;
pub(crate) const ATT_POS: usize = 14;
pub(crate) const OUT_W: usize = 15;
pub(crate) const OUT_B: usize = 16;

const NAMES: [&str; 17] = [
    "embedding",
    "encoder.fwd.weight",
    "encoder.fwd.bias",
    "encoder.bwd.weight",
    "encoder.bwd.bias",
    "decoder.init.weight",
    "decoder.init.bias",
    "decoder.label_embedding",
    "decoder.lstm.weight",
    "decoder.lstm.bias",
    "attention.query",
    "attention.key",
    "attention.bias",
    "attention.score",
    "attention.position",
    "output.weight",
    "output.bias",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Names, shapes and offsets of every tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    tensors: Vec<TensorSpec>,
    total: usize,
}

impl Layout {
    pub fn new(config: &S2SConfig, vocab_len: usize) -> Self {
        let (e, h, l) = (config.embedding_size, config.hidden_size, config.label_embedding_size);
        let a = h;
        let shapes: [Vec<usize>; 17] = [
            vec![vocab_len, e],
            vec![4 * h, e + h],
            vec![4 * h],
            vec![4 * h, e + h],
            vec![4 * h],
            vec![h, 2 * h],
            vec![h],
            vec![2, l],
            vec![4 * h, l + 2 * h + h],
            vec![4 * h],
            vec![a, h],
            vec![a, 2 * h],
            vec![a],
            vec![a],
            vec![2 * config.position_window + 1],
            vec![2, 3 * h],
            vec![2],
        ];
        let mut offset = 0;
        let tensors = NAMES
            .iter()
            .zip(shapes)
            .map(|(&name, shape)| {
                let spec = TensorSpec { name, shape, offset };
                offset += spec.len();
                spec
            })
            .collect();
        Layout { tensors, total: offset }
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn get(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub(crate) fn range(&self, id: usize) -> std::ops::Range<usize> {
        let t = &self.tensors[id];
        t.offset..t.offset + t.len()
    }

    pub(crate) fn view1<'a, F>(&self, data: &'a [F], id: usize) -> ArrayView1<'a, F> {
        ArrayView1::from(&data[self.range(id)])
    }

    pub(crate) fn view2<'a, F>(&self, data: &'a [F], id: usize) -> ArrayView2<'a, F> {
        let s = &self.tensors[id].shape;
        ArrayView2::from_shape((s[0], s[1]), &data[self.range(id)]).unwrap()
    }

    /// Mutable views of every tensor at once (1-D and 2-D as stored).
    pub(crate) fn split_mut<'a, F>(&self, data: &'a mut [F]) -> Vec<TensorMut<'a, F>> {
        let mut out = Vec::with_capacity(self.tensors.len());
        let mut rest = data;
        for t in &self.tensors {
            let (head, tail) = rest.split_at_mut(t.len());
            rest = tail;
            out.push(match t.shape.as_slice() {
                [r, c] => TensorMut::Two(ArrayViewMut2::from_shape((*r, *c), head).unwrap()),
                _ => TensorMut::One(ArrayViewMut1::from(head)),
            });
        }
        out
    }
}

pub(crate) enum TensorMut<'a, F> {
    One(ArrayViewMut1<'a, F>),
    Two(ArrayViewMut2<'a, F>),
}

impl<'a, F> TensorMut<'a, F> {
    pub(crate) fn one(&mut self) -> &mut ArrayViewMut1<'a, F> {
        match self {
            TensorMut::One(v) => v,
            TensorMut::Two(_) => panic!("expected a vector"),
        }
    }

    pub(crate) fn two(&mut self) -> &mut ArrayViewMut2<'a, F> {
        match self {
            TensorMut::Two(v) => v,
            TensorMut::One(_) => panic!("expected a matrix"),
        }
    }
}

/// Uniform(-0.1, 0.1) weights, zero biases except the LSTM forget gates (1).
pub(crate) fn initialize<F: NdFloat>(layout: &Layout, config: &S2SConfig, rng: &mut impl Rng) -> Vec<F> {
    let mut data = vec![F::zero(); layout.total()];
    let h = config.hidden_size;
    for (id, t) in layout.tensors().iter().enumerate() {
        let slice = &mut data[layout.range(id)];
        match id {
            ENC_F_B | ENC_B_B | DEC_B => {
                for v in &mut slice[h..2 * h] {
                    *v = F::one();
                }
            }
            INIT_B | ATT_B | ATT_POS | OUT_B => {}
            _ => {
                for v in slice.iter_mut() {
                    *v = F::from(rng.gen_range(-0.1f64..0.1)).unwrap();
                }
            }
        }
        debug_assert_eq!(slice.len(), t.len());
    }
    data
}
