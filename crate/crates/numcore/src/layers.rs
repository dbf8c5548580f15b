//! Layers shared by the sequence models: dense, embedding lookup, character
//! CNN with max-pooling, and LSTM/BiLSTM encoders. Each layer registers its
//! parameters in a [`ParamSet`] and records its forward pass on a [`Tape`],
//! so gradients come out of the tape's reverse pass with no per-layer code.

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamSet};
use crate::tape::{NodeId, Tape};

/// Character alphabet: printable ASCII plus a reserved UNK slot at index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharAlphabet;

impl CharAlphabet {
    pub const UNK: usize = 0;

    pub const fn size() -> usize {
        96 // 95 printable ASCII characters + UNK
    }

    pub fn index(c: char) -> usize {
        let v = c as u32;
        if (0x20..=0x7e).contains(&v) {
            (v - 0x20) as usize + 1
        } else {
            Self::UNK
        }
    }

    pub fn encode(text: &str) -> Vec<usize> {
        text.chars().map(Self::index).collect()
    }
}

/// Fully connected layer `W·x + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let w = ps.add_glorot(&format!("{name}.w"), vec![out_dim, in_dim]);
        let b = ps.add_zeros(&format!("{name}.b"), vec![out_dim]);
        Dense {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let wx = tape.mat_vec(w, x)?;
        tape.add(wx, b)
    }
}

/// Row-lookup embedding table.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(ps: &mut ParamSet, name: &str, vocab: usize, dim: usize) -> Self {
        let table = ps.add_glorot(name, vec![vocab, dim]);
        Embedding { table, vocab, dim }
    }

    pub fn forward(&self, tape: &mut Tape, index: usize) -> Result<NodeId> {
        tape.row(self.table, index)
    }
}

/// 1-D convolution over a character sequence followed by elementwise max over
/// positions. Characters are one-hot, so each kernel application reduces to
/// gathering one kernel row per window offset; windows running past the end
/// of the token see zero padding.
#[derive(Debug, Clone)]
pub struct CharCnn {
    /// Per kernel width: (width, kernel `[width * alphabet, filters]`, bias).
    kernels: Vec<(usize, ParamId, ParamId)>,
    pub alphabet: usize,
    pub out_dim: usize,
}

impl CharCnn {
    /// Distributes `total_filters` across `widths`, widest remainder first.
    pub fn new(ps: &mut ParamSet, name: &str, widths: &[usize], total_filters: usize) -> Self {
        assert!(!widths.is_empty() && total_filters >= widths.len());
        let alphabet = CharAlphabet::size();
        let base = total_filters / widths.len();
        let extra = total_filters % widths.len();
        let mut kernels = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            let filters = base + usize::from(i < extra);
            let k = ps.add_glorot(&format!("{name}.k{w}"), vec![w * alphabet, filters]);
            let b = ps.add_zeros(&format!("{name}.b{w}"), vec![filters]);
            kernels.push((w, k, b));
        }
        CharCnn {
            kernels,
            alphabet,
            out_dim: total_filters,
        }
    }

    pub fn forward(&self, tape: &mut Tape, chars: &[usize]) -> Result<NodeId> {
        if chars.is_empty() {
            return Err(Error::EmptyInput { op: "char_cnn" });
        }
        let mut pooled = Vec::with_capacity(self.kernels.len());
        for &(width, kernel, bias) in &self.kernels {
            let positions = chars.len().saturating_sub(width - 1).max(1);
            let bias_node = tape.param(bias);
            let mut responses = Vec::with_capacity(positions);
            for pos in 0..positions {
                let mut terms = vec![bias_node];
                for offset in 0..width {
                    if let Some(&c) = chars.get(pos + offset) {
                        terms.push(tape.row(kernel, offset * self.alphabet + c)?);
                    }
                }
                responses.push(tape.add_n(terms)?);
            }
            pooled.push(tape.max_n(responses)?);
        }
        tape.concat(pooled)
    }
}

/// Standard gated LSTM cell (input/forget/output gates, tanh candidate,
/// no peepholes). The forget-gate bias starts at 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    w_i: ParamId,
    u_i: ParamId,
    b_i: ParamId,
    w_f: ParamId,
    u_f: ParamId,
    b_f: ParamId,
    w_g: ParamId,
    u_g: ParamId,
    b_g: ParamId,
    w_o: ParamId,
    u_o: ParamId,
    b_o: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmCell {
    pub fn new(ps: &mut ParamSet, name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let mut gate = |g: &str, forget: bool| {
            let w = ps.add_glorot(&format!("{name}.w_{g}"), vec![hidden_dim, input_dim]);
            let u = ps.add_glorot(&format!("{name}.u_{g}"), vec![hidden_dim, hidden_dim]);
            let b = ps.add_const(
                &format!("{name}.b_{g}"),
                vec![hidden_dim],
                if forget { 1.0 } else { 0.0 },
            );
            (w, u, b)
        };
        let (w_i, u_i, b_i) = gate("i", false);
        let (w_f, u_f, b_f) = gate("f", true);
        let (w_g, u_g, b_g) = gate("g", false);
        let (w_o, u_o, b_o) = gate("o", false);
        LstmCell {
            w_i,
            u_i,
            b_i,
            w_f,
            u_f,
            b_f,
            w_g,
            u_g,
            b_g,
            w_o,
            u_o,
            b_o,
            input_dim,
            hidden_dim,
        }
    }

    fn preact(
        &self,
        tape: &mut Tape,
        w: ParamId,
        u: ParamId,
        b: ParamId,
        x: NodeId,
        h_prev: Option<NodeId>,
    ) -> Result<NodeId> {
        let wn = tape.param(w);
        let bn = tape.param(b);
        let wx = tape.mat_vec(wn, x)?;
        let mut terms = vec![wx, bn];
        if let Some(h) = h_prev {
            let un = tape.param(u);
            terms.push(tape.mat_vec(un, h)?);
        }
        tape.add_n(terms)
    }

    /// One recurrence step; `prev` of `None` stands for zero initial state.
    pub fn step(&self, tape: &mut Tape, x: NodeId, prev: Option<&LstmState>) -> Result<LstmState> {
        let h_prev = prev.map(|s| s.h);
        let i_pre = self.preact(tape, self.w_i, self.u_i, self.b_i, x, h_prev)?;
        let f_pre = self.preact(tape, self.w_f, self.u_f, self.b_f, x, h_prev)?;
        let g_pre = self.preact(tape, self.w_g, self.u_g, self.b_g, x, h_prev)?;
        let o_pre = self.preact(tape, self.w_o, self.u_o, self.b_o, x, h_prev)?;
        let i = tape.sigmoid(i_pre);
        let f = tape.sigmoid(f_pre);
        let g = tape.tanh(g_pre);
        let o = tape.sigmoid(o_pre);
        let ig = tape.mul(i, g)?;
        let c = match prev {
            Some(s) => {
                let fc = tape.mul(f, s.c)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Run the cell left-to-right over a sequence, returning all hidden states.
    pub fn run(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput { op: "lstm" });
        }
        let mut hidden = Vec::with_capacity(inputs.len());
        let mut state: Option<LstmState> = None;
        for &x in inputs {
            let next = self.step(tape, x, state.as_ref())?;
            hidden.push(next.h);
            state = Some(next);
        }
        Ok(hidden)
    }
}

/// Output of a BiLSTM pass.
pub struct BiLstmOut {
    /// Per-position concatenation of forward and backward hidden states.
    pub hidden: Vec<NodeId>,
    pub final_fwd: NodeId,
    pub final_bwd: NodeId,
}

/// Two LSTMs run in opposite directions over the same sequence.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
    pub hidden_dim: usize,
}

impl BiLstm {
    pub fn new(ps: &mut ParamSet, name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        BiLstm {
            fwd: LstmCell::new(ps, &format!("{name}.fwd"), input_dim, hidden_dim),
            bwd: LstmCell::new(ps, &format!("{name}.bwd"), input_dim, hidden_dim),
            hidden_dim,
        }
    }

    /// Per-position hidden width is `2 * hidden_dim`.
    pub fn encode(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<BiLstmOut> {
        let fwd = self.fwd.run(tape, inputs)?;
        let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
        let bwd_rev = self.bwd.run(tape, &reversed)?;
        // bwd_rev[k] corresponds to original position len-1-k.
        let n = inputs.len();
        let mut hidden = Vec::with_capacity(n);
        for t in 0..n {
            hidden.push(tape.concat(vec![fwd[t], bwd_rev[n - 1 - t]])?);
        }
        Ok(BiLstmOut {
            hidden,
            final_fwd: fwd[n - 1],
            final_bwd: bwd_rev[n - 1],
        })
    }
}
