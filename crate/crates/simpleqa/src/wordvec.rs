//! Pre-trained word vector loading: text format, one token per line, the
//! token followed by space-separated floats.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use numcore::{ParamId, ParamSet};

use crate::error::{Error, Result};
use crate::spanner::WordVocab;

#[derive(Debug, Clone)]
pub struct WordVectors {
    pub dim: usize,
    map: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = std::io::BufReader::new(file);
        let mut map = HashMap::new();
        let mut dim = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| Error::parse(path, idx + 1, "missing token"))?;
            let values: std::result::Result<Vec<f64>, _> =
                fields.map(str::parse::<f64>).collect();
            let values = values
                .map_err(|e| Error::parse(path, idx + 1, format!("bad float: {e}")))?;
            if values.is_empty() {
                return Err(Error::parse(path, idx + 1, "token has no vector"));
            }
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("vector has {} dims, expected {dim}", values.len()),
                ));
            }
            map.insert(token.to_string(), values);
        }
        Ok(WordVectors { dim, map })
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.map.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Overwrite embedding rows for vocabulary words that have a pre-trained
    /// vector; the rest keep their seeded initialization.
    pub fn initialize_embedding(
        &self,
        params: &mut ParamSet,
        table: ParamId,
        vocab: &WordVocab,
        dim: usize,
    ) -> Result<()> {
        if self.dim != dim {
            return Err(Error::Config(format!(
                "word vectors have dimension {}, model expects {dim}",
                self.dim
            )));
        }
        for (row, word) in vocab.words.iter().enumerate() {
            if let Some(vec) = self.get(word) {
                let tensor = params.get_mut(table);
                tensor.values_mut()[row * dim..(row + 1) * dim].copy_from_slice(vec);
            }
        }
        Ok(())
    }
}
