//! Forward and backward passes, generic over the float type.
//!
//! Encoder: forward and backward LSTMs over the token embeddings; the state
//! for token k is `[hf_k; hb_k]`. The decoder starts from
//! `tanh(W [hf_last; hb_0] + b)` and at step t reads the previous label's
//! embedding (zeros at t = 0) and an attention context computed from its
//! previous state:
//!
//! ```text
//! e_tk = v . tanh(W s_{t-1} + U h_k + b) + pos[clamp(k - t, -R, R)]
//! ctx_t = sum_k softmax(e_t)_k h_k
//! s_t = LSTM([label_{t-1}; ctx_t], s_{t-1})
//! p_t = softmax(W_o [s_t; ctx_t] + b_o)
//! ```

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, NdFloat};

use super::params::*;

fn sigmoid<F: NdFloat>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn cat<F: NdFloat>(parts: &[ArrayView1<'_, F>]) -> Array1<F> {
    concatenate(Axis(0), parts).unwrap()
}

fn add_outer<F: NdFloat>(g: &mut ArrayViewMut2<'_, F>, left: &Array1<F>, right: &Array1<F>) {
    for (mut row, &l) in g.rows_mut().into_iter().zip(left) {
        if l != F::zero() {
            row.scaled_add(l, right);
        }
    }
}

/// Dropout multipliers (0 or 1/(1-p)); absent at inference.
#[derive(Debug, Clone)]
pub(crate) struct Masks<F> {
    /// `n x E`, applied to token embeddings.
    pub emb: Array2<F>,
    /// `n x 3H`, applied to the output layer input.
    pub out: Array2<F>,
}

#[derive(Debug, Clone)]
struct LstmStep<F> {
    x: Array1<F>,
    i: Array1<F>,
    f: Array1<F>,
    g: Array1<F>,
    o: Array1<F>,
    c_prev: Array1<F>,
    tc: Array1<F>,
    c: Array1<F>,
    h: Array1<F>,
}

fn lstm_step<F: NdFloat>(w: ArrayView2<'_, F>, b: ArrayView1<'_, F>, x: Array1<F>, c_prev: &Array1<F>) -> LstmStep<F> {
    let hs = b.len() / 4;
    let z = w.dot(&x) + b;
    let i = z.slice(s![..hs]).mapv(sigmoid);
    let f = z.slice(s![hs..2 * hs]).mapv(sigmoid);
    let g = z.slice(s![2 * hs..3 * hs]).mapv(|v| v.tanh());
    let o = z.slice(s![3 * hs..]).mapv(sigmoid);
    let c = &f * c_prev + &i * &g;
    let tc = c.mapv(|v| v.tanh());
    let h = &o * &tc;
    LstmStep {
        x,
        i,
        f,
        g,
        o,
        c_prev: c_prev.clone(),
        tc,
        c,
        h,
    }
}

/// Returns `(d input, d c_prev)` and accumulates weight gradients.
fn lstm_back<F: NdFloat>(
    st: &LstmStep<F>,
    dh: &Array1<F>,
    dc_next: &Array1<F>,
    w: ArrayView2<'_, F>,
    gw: &mut ArrayViewMut2<'_, F>,
    gb: &mut ArrayViewMut1<'_, F>,
) -> (Array1<F>, Array1<F>) {
    let one = F::one();
    let hs = dh.len();
    let d_o = dh * &st.tc;
    let dc = dc_next + &(dh * &st.o * &st.tc.mapv(|t| one - t * t));
    let di = &dc * &st.g;
    let dg = &dc * &st.i;
    let df = &dc * &st.c_prev;
    let dc_prev = &dc * &st.f;
    let mut dz = Array1::zeros(4 * hs);
    dz.slice_mut(s![..hs]).assign(&(&di * &st.i.mapv(|v| v * (one - v))));
    dz.slice_mut(s![hs..2 * hs])
        .assign(&(&df * &st.f.mapv(|v| v * (one - v))));
    dz.slice_mut(s![2 * hs..3 * hs])
        .assign(&(&dg * &st.g.mapv(|v| one - v * v)));
    dz.slice_mut(s![3 * hs..])
        .assign(&(&d_o * &st.o.mapv(|v| v * (one - v))));
    add_outer(gw, &dz, &st.x);
    *gb += &dz;
    (w.t().dot(&dz), dc_prev)
}

#[derive(Debug, Clone)]
pub(crate) struct Encoded<F> {
    emb: Array2<F>,
    fwd: Vec<LstmStep<F>>,
    bwd: Vec<LstmStep<F>>,
    /// `n x 2H`.
    pub states: Array2<F>,
    init_q: Array1<F>,
    /// Initial decoder state.
    pub summary: Array1<F>,
}

impl<F: NdFloat> Encoded<F> {
    pub fn forward_states(&self) -> Array2<F> {
        let h = self.summary.len();
        self.states.slice(s![.., ..h]).to_owned()
    }

    pub fn backward_states(&self) -> Array2<F> {
        let h = self.summary.len();
        self.states.slice(s![.., h..]).to_owned()
    }
}

#[derive(Debug, Clone)]
struct DecStep<F> {
    sp: Array1<F>,
    prev_label: Option<usize>,
    a: Array2<F>,
    alpha: Array1<F>,
    lstm: LstmStep<F>,
    out_in: Array1<F>,
    probs: [F; 2],
    log_probs: [F; 2],
}

/// Decoder output for one sequence.
#[derive(Debug, Clone)]
pub(crate) struct Decoded<F> {
    steps: Vec<DecStep<F>>,
    pub labels: Vec<usize>,
}

impl<F: NdFloat> Decoded<F> {
    pub fn probabilities(&self) -> Vec<[F; 2]> {
        self.steps.iter().map(|s| s.probs).collect()
    }

    /// `steps x input length`.
    pub fn attention(&self) -> Array2<F> {
        let n = self.steps.first().map_or(0, |s| s.alpha.len());
        let mut a = Array2::zeros((self.steps.len(), n));
        for (t, st) in self.steps.iter().enumerate() {
            a.row_mut(t).assign(&st.alpha);
        }
        a
    }
}

pub(crate) struct Net<'a, F> {
    layout: &'a Layout,
    p: &'a [F],
    window: usize,
}

impl<'a, F: NdFloat> Net<'a, F> {
    pub fn new(layout: &'a Layout, p: &'a [F], window: usize) -> Self {
        assert_eq!(p.len(), layout.total());
        Net { layout, p, window }
    }

    fn m(&self, id: usize) -> ArrayView2<'a, F> {
        self.layout.view2(self.p, id)
    }

    fn v(&self, id: usize) -> ArrayView1<'a, F> {
        self.layout.view1(self.p, id)
    }

    fn hidden(&self) -> usize {
        self.v(INIT_B).len()
    }

    pub fn encode(&self, ids: &[u32], masks: Option<&Masks<F>>) -> Encoded<F> {
        let n = ids.len();
        let h = self.hidden();
        let table = self.m(EMB);
        let mut emb = Array2::zeros((n, table.ncols()));
        for (k, &id) in ids.iter().enumerate() {
            let mut row = emb.row_mut(k);
            row.assign(&table.row(id as usize));
            if let Some(m) = masks {
                row *= &m.emb.row(k);
            }
        }
        let zero = Array1::zeros(h);
        let mut fwd: Vec<LstmStep<F>> = Vec::with_capacity(n);
        for k in 0..n {
            let (hp, cp) = match fwd.last() {
                Some(s) => (s.h.view(), &s.c),
                None => (zero.view(), &zero),
            };
            let x = cat(&[emb.row(k), hp]);
            let st = lstm_step(self.m(ENC_F_W), self.v(ENC_F_B), x, cp);
            fwd.push(st);
        }
        let mut bwd_rev: Vec<LstmStep<F>> = Vec::with_capacity(n);
        for k in (0..n).rev() {
            let (hp, cp) = match bwd_rev.last() {
                Some(s) => (s.h.view(), &s.c),
                None => (zero.view(), &zero),
            };
            let x = cat(&[emb.row(k), hp]);
            let st = lstm_step(self.m(ENC_B_W), self.v(ENC_B_B), x, cp);
            bwd_rev.push(st);
        }
        bwd_rev.reverse();
        let bwd = bwd_rev;
        let mut states = Array2::zeros((n, 2 * h));
        for k in 0..n {
            states.slice_mut(s![k, ..h]).assign(&fwd[k].h);
            states.slice_mut(s![k, h..]).assign(&bwd[k].h);
        }
        let init_q = cat(&[fwd[n - 1].h.view(), bwd[0].h.view()]);
        let summary = (self.m(INIT_W).dot(&init_q) + self.v(INIT_B)).mapv(|v| v.tanh());
        Encoded {
            emb,
            fwd,
            bwd,
            states,
            init_q,
            summary,
        }
    }

    /// Runs the decoder. With `gold` the previous gold label is fed back
    /// (teacher forcing); otherwise the previous greedy prediction is.
    pub fn decode(&self, enc: &Encoded<F>, gold: Option<&[usize]>, masks: Option<&Masks<F>>) -> Decoded<F> {
        let n = enc.states.nrows();
        let h = self.hidden();
        let r = self.window as isize;
        let keys = enc.states.dot(&self.m(ATT_U).t()) + self.v(ATT_B);
        let (att_w, att_v, pos) = (self.m(ATT_W), self.v(ATT_V), self.v(ATT_POS));
        let label_emb = self.m(LABEL_EMB);
        let mut sp = enc.summary.clone();
        let mut cp = Array1::zeros(h);
        let mut steps = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for t in 0..n {
            let prev_label = if t == 0 {
                None
            } else {
                Some(match gold {
                    Some(g) => g[t - 1],
                    None => labels[t - 1],
                })
            };
            let label_in = match prev_label {
                Some(y) => label_emb.row(y).to_owned(),
                None => Array1::zeros(label_emb.ncols()),
            };
            let q = att_w.dot(&sp);
            let a = (&keys + &q).mapv(|v| v.tanh());
            let mut scores = a.dot(&att_v);
            for (k, sc) in scores.iter_mut().enumerate() {
                let off = (k as isize - t as isize).clamp(-r, r) + r;
                *sc += pos[off as usize];
            }
            let mx = scores.fold(F::neg_infinity(), |m, &v| m.max(v));
            let mut alpha = scores.mapv(|v| (v - mx).exp());
            let z = alpha.sum();
            alpha /= z;
            let ctx = enc.states.t().dot(&alpha);
            let x = cat(&[label_in.view(), ctx.view(), sp.view()]);
            let lstm = lstm_step(self.m(DEC_W), self.v(DEC_B), x, &cp);
            let mut out_in = cat(&[lstm.h.view(), ctx.view()]);
            if let Some(m) = masks {
                out_in *= &m.out.row(t);
            }
            let logits = self.m(OUT_W).dot(&out_in) + self.v(OUT_B);
            let mx = logits[0].max(logits[1]);
            let lse = mx + ((logits[0] - mx).exp() + (logits[1] - mx).exp()).ln();
            let log_probs = [logits[0] - lse, logits[1] - lse];
            let probs = [log_probs[0].exp(), log_probs[1].exp()];
            labels.push(if probs[1] > probs[0] { 1 } else { 0 });
            let prev_sp = std::mem::replace(&mut sp, lstm.h.clone());
            cp = lstm.c.clone();
            steps.push(DecStep {
                sp: prev_sp,
                prev_label,
                a,
                alpha,
                lstm,
                out_in,
                probs,
                log_probs,
            });
        }
        Decoded { steps, labels }
    }

    /// Teacher-forced negative log-likelihood of `gold`; adds
    /// `scale * gradient` into `grad`.
    pub fn loss_and_grad(&self, ids: &[u32], gold: &[usize], masks: Option<&Masks<F>>, grad: &mut [F], scale: F) -> F {
        let enc = self.encode(ids, masks);
        let dec = self.decode(&enc, Some(gold), masks);
        let loss = dec
            .steps
            .iter()
            .zip(gold)
            .fold(F::zero(), |acc, (st, &y)| acc - st.log_probs[y]);
        self.backward(ids, gold, &enc, &dec, masks, grad, scale);
        loss
    }

    /// Negative log-likelihood without gradients.
    pub fn loss(&self, ids: &[u32], gold: &[usize], masks: Option<&Masks<F>>) -> F {
        let enc = self.encode(ids, masks);
        let dec = self.decode(&enc, Some(gold), masks);
        dec.steps
            .iter()
            .zip(gold)
            .fold(F::zero(), |acc, (st, &y)| acc - st.log_probs[y])
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        ids: &[u32],
        gold: &[usize],
        enc: &Encoded<F>,
        dec: &Decoded<F>,
        masks: Option<&Masks<F>>,
        grad: &mut [F],
        scale: F,
    ) {
        let one = F::one();
        let n = ids.len();
        let h = self.hidden();
        let lsize = self.m(LABEL_EMB).ncols();
        let r = self.window as isize;
        // Storage order: see the tensor ids in `params`.
        let Ok(
            [mut g_emb, mut g_ef_w, mut g_ef_b, mut g_eb_w, mut g_eb_b, mut g_init_w, mut g_init_b, mut g_lab, mut g_dec_w, mut g_dec_b, mut g_att_w, mut g_att_u, mut g_att_b, mut g_att_v, mut g_pos, mut g_out_w, mut g_out_b],
        ) = <[TensorMut<'_, F>; 17]>::try_from(self.layout.split_mut(grad))
        else {
            unreachable!("layout has 17 tensors")
        };

        let (att_w, att_v, out_w) = (self.m(ATT_W), self.v(ATT_V), self.m(OUT_W));
        // Gradient w.r.t. encoder states and attention keys.
        let mut d_states: Array2<F> = Array2::zeros((n, 2 * h));
        let mut d_keys: Array2<F> = Array2::zeros((n, h));
        let mut ds_carry: Array1<F> = Array1::zeros(h);
        let mut dc_carry: Array1<F> = Array1::zeros(h);
        for t in (0..n).rev() {
            let st = &dec.steps[t];
            let mut dlogits = Array1::from(vec![st.probs[0], st.probs[1]]);
            dlogits[gold[t]] -= one;
            dlogits *= scale;
            add_outer(g_out_w.two(), &dlogits, &st.out_in);
            *g_out_b.one() += &dlogits;
            let mut d_out_in = out_w.t().dot(&dlogits);
            if let Some(m) = masks {
                d_out_in *= &m.out.row(t);
            }
            let ds = &ds_carry + &d_out_in.slice(s![..h]);
            let mut dctx = d_out_in.slice(s![h..]).to_owned();

            let (dx, dc_prev) = lstm_back(&st.lstm, &ds, &dc_carry, self.m(DEC_W), g_dec_w.two(), g_dec_b.one());
            if let Some(y) = st.prev_label {
                g_lab.two().row_mut(y).scaled_add(one, &dx.slice(s![..lsize]));
            }
            dctx += &dx.slice(s![lsize..lsize + 2 * h]);
            let mut dsp = dx.slice(s![lsize + 2 * h..]).to_owned();

            // Attention.
            let dalpha = enc.states.dot(&dctx);
            d_states.scaled_add_rows(&st.alpha, &dctx);
            let dot = st.alpha.dot(&dalpha);
            let dscore = &st.alpha * &dalpha.mapv(|v| v - dot);
            for (k, &dsc) in dscore.iter().enumerate() {
                let off = (k as isize - t as isize).clamp(-r, r) + r;
                g_pos.one()[off as usize] += dsc;
            }
            *g_att_v.one() += &st.a.t().dot(&dscore);
            // d pre-activation, n x A.
            let mut dpre = st.a.mapv(|v| one - v * v);
            for (mut row, &dsc) in dpre.rows_mut().into_iter().zip(&dscore) {
                row.zip_mut_with(&att_v, |d, &v| *d = *d * dsc * v);
            }
            d_keys += &dpre;
            let dq = dpre.sum_axis(Axis(0));
            add_outer(g_att_w.two(), &dq, &st.sp);
            dsp += &att_w.t().dot(&dq);

            ds_carry = dsp;
            dc_carry = dc_prev;
        }
        // Keys: U h_k + b.
        *g_att_b.one() += &d_keys.sum_axis(Axis(0));
        {
            let gu = g_att_u.two();
            gu.scaled_add(one, &d_keys.t().dot(&enc.states));
        }
        d_states += &d_keys.dot(&self.m(ATT_U));

        // Initial decoder state.
        let dpre = &ds_carry * &enc.summary.mapv(|v| one - v * v);
        add_outer(g_init_w.two(), &dpre, &enc.init_q);
        *g_init_b.one() += &dpre;
        let dq = self.m(INIT_W).t().dot(&dpre);
        let mut dhf = d_states.slice(s![.., ..h]).to_owned();
        let mut dhb = d_states.slice(s![.., h..]).to_owned();
        {
            let mut r = dhf.row_mut(n - 1);
            r += &dq.slice(s![..h]);
        }
        {
            let mut r = dhb.row_mut(0);
            r += &dq.slice(s![h..]);
        }

        let e = enc.emb.ncols();
        let mut d_emb: Array2<F> = Array2::zeros((n, e));
        let mut dh_carry: Array1<F> = Array1::zeros(h);
        let mut dc: Array1<F> = Array1::zeros(h);
        for k in (0..n).rev() {
            let dh = &dhf.row(k) + &dh_carry;
            let (dx, dcp) = lstm_back(&enc.fwd[k], &dh, &dc, self.m(ENC_F_W), g_ef_w.two(), g_ef_b.one());
            let mut row = d_emb.row_mut(k);
            row += &dx.slice(s![..e]);
            dh_carry = dx.slice(s![e..]).to_owned();
            dc = dcp;
        }
        dh_carry.fill(F::zero());
        dc.fill(F::zero());
        for k in 0..n {
            let dh = &dhb.row(k) + &dh_carry;
            let (dx, dcp) = lstm_back(&enc.bwd[k], &dh, &dc, self.m(ENC_B_W), g_eb_w.two(), g_eb_b.one());
            let mut row = d_emb.row_mut(k);
            row += &dx.slice(s![..e]);
            dh_carry = dx.slice(s![e..]).to_owned();
            dc = dcp;
        }
        let table = g_emb.two();
        for (k, &id) in ids.iter().enumerate() {
            let mut d = d_emb.row(k).to_owned();
            if let Some(m) = masks {
                d *= &m.emb.row(k);
            }
            table.row_mut(id as usize).scaled_add(one, &d);
        }
    }
}

trait ScaledAddRows<F> {
    fn scaled_add_rows(&mut self, weights: &Array1<F>, v: &Array1<F>);
}

impl<F: NdFloat> ScaledAddRows<F> for Array2<F> {
    /// `self[k] += weights[k] * v` for every row.
    fn scaled_add_rows(&mut self, weights: &Array1<F>, v: &Array1<F>) {
        for (mut row, &w) in self.rows_mut().into_iter().zip(weights) {
            row.scaled_add(w, v);
        }
    }
}
