//! Word + character BiLSTM text encoder shared by the predicate models:
//! token embeddings concatenated with char-CNN features, run through one or
//! more stacked BiLSTM layers, summarized by the concatenated final states.

use serde::{Deserialize, Serialize};

use numcore::{BiLstm, CharAlphabet, CharCnn, Embedding, NodeId, ParamSet, Tape};

use crate::error::{Error, Result};
use crate::spanner::WordVocab;
use crate::wordvec::WordVectors;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub word_dim: usize,
    pub char_filters: usize,
    pub char_widths: Vec<usize>,
    pub lstm_dim: usize,
    pub lstm_layers: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_dim: 100,
            char_filters: 100,
            char_widths: vec![2, 3, 4],
            lstm_dim: 200,
            lstm_layers: 1,
        }
    }
}

pub struct TextEncoder {
    pub config: EncoderConfig,
    pub vocab: WordVocab,
    word_emb: Embedding,
    char_cnn: CharCnn,
    lstm_stack: Vec<BiLstm>,
}

impl TextEncoder {
    pub fn new(params: &mut ParamSet, name: &str, config: EncoderConfig, vocab: WordVocab) -> Self {
        let word_emb = Embedding::new(params, &format!("{name}.word_emb"), vocab.len(), config.word_dim);
        let char_cnn = CharCnn::new(
            params,
            &format!("{name}.char_cnn"),
            &config.char_widths,
            config.char_filters,
        );
        let mut lstm_stack = Vec::with_capacity(config.lstm_layers);
        let mut input_dim = config.word_dim + config.char_filters;
        for layer in 0..config.lstm_layers.max(1) {
            lstm_stack.push(BiLstm::new(
                params,
                &format!("{name}.bilstm{layer}"),
                input_dim,
                config.lstm_dim,
            ));
            input_dim = 2 * config.lstm_dim;
        }
        TextEncoder {
            config,
            vocab,
            word_emb,
            char_cnn,
            lstm_stack,
        }
    }

    pub fn init_word_vectors(
        &self,
        params: &mut ParamSet,
        vectors: &WordVectors,
    ) -> Result<()> {
        vectors.initialize_embedding(params, self.word_emb.table, &self.vocab, self.config.word_dim)
    }

    /// Output width of [`TextEncoder::encode_final`].
    pub fn output_dim(&self) -> usize {
        2 * self.config.lstm_dim
    }

    /// Concatenated final forward/backward states of the top BiLSTM layer.
    pub fn encode_final(&self, tape: &mut Tape, tokens: &[String]) -> Result<NodeId> {
        if tokens.is_empty() {
            return Err(Error::Data("cannot encode an empty token sequence".to_string()));
        }
        let mut inputs = Vec::with_capacity(tokens.len());
        for token in tokens {
            let w = self.word_emb.forward(tape, self.vocab.id(token))?;
            let c = self.char_cnn.forward(tape, &CharAlphabet::encode(token))?;
            inputs.push(tape.concat(vec![w, c])?);
        }
        let mut out = self.lstm_stack[0].encode(tape, &inputs)?;
        for lstm in &self.lstm_stack[1..] {
            out = lstm.encode(tape, &out.hidden)?;
        }
        Ok(tape.concat(vec![out.final_fwd, out.final_bwd])?)
    }
}
