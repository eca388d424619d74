use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{real, Encoder, NnError, ParamStore, Real};

pub const UNK: &str = "<unk>";

/// Lowercased token vocabulary with the unknown token at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab {
            tokens: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
        };
        for t in tokens {
            v.insert(&t.to_lowercase());
        }
        v
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Copies pretrained vectors into the encoder's embedding rows for known
    /// tokens; returns how many rows were replaced.
    pub fn apply_embeddings<T: Real>(
        &self,
        vectors: &HashMap<String, Vec<f32>>,
        encoder: &Encoder,
        store: &mut ParamStore<T>,
    ) -> Result<usize, NnError> {
        let table = store.get_mut(encoder.word_embeddings());
        if table.rows() != self.len() {
            return Err(super::shape_error(
                "embedding rows",
                &[self.len()],
                &[table.rows()],
            ));
        }
        let mut replaced = 0;
        for (id, token) in self.tokens.iter().enumerate() {
            if let Some(v) = vectors.get(token) {
                if v.len() != table.cols() {
                    return Err(super::shape_error(
                        format!("embedding for {token}"),
                        &[table.cols()],
                        &[v.len()],
                    ));
                }
                for (dst, &src) in table.row_mut(id).iter_mut().zip(v) {
                    *dst = real(src as f64);
                }
                replaced += 1;
            }
        }
        Ok(replaced)
    }
}

impl Serialize for Vocab {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(serde::de::Error::custom(
                "vocabulary must start with the unknown token",
            ));
        }
        let mut v = Vocab::from_tokens([]);
        for t in &tokens[1..] {
            v.insert(t);
        }
        if v.len() != tokens.len() {
            return Err(serde::de::Error::custom("duplicate vocabulary entry"));
        }
        Ok(v)
    }
}

/// Reads whitespace-separated `word v1 … vd` lines, keeping words accepted
/// by `keep` (lowercased).
pub fn load_embeddings(
    path: impl AsRef<Path>,
    dim: usize,
    keep: impl Fn(&str) -> bool,
) -> Result<HashMap<String, Vec<f32>>, NnError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let word = word.to_lowercase();
        if !keep(&word) || out.contains_key(&word) {
            continue;
        }
        let values: Result<Vec<f32>, _> = fields.map(str::parse::<f32>).collect();
        let values =
            values.map_err(|e| NnError::Checkpoint(format!("embeddings line {}: {e}", n + 1)))?;
        if values.len() != dim {
            return Err(super::shape_error(
                format!("embeddings line {}", n + 1),
                &[dim],
                &[values.len()],
            ));
        }
        out.insert(word, values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_maps_unknowns_to_zero() {
        let v = Vocab::from_tokens(["The", "cat", "the"]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("THE"), v.id("the"));
        assert_eq!(v.id("dog"), 0);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<unk>","the","cat"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
        assert!(serde_json::from_str::<Vocab>(r#"["the"]"#).is_err());
    }

    #[test]
    fn reads_glove_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "the 0.1 0.2\nCat 1 2\nzebra 3 4\n").unwrap();
        let vocab = Vocab::from_tokens(["the", "cat"]);
        let got = load_embeddings(&path, 2, |w| vocab.id(w) != 0).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got["cat"], vec![1.0, 2.0]);
        assert!(load_embeddings(&path, 3, |_| true).is_err());
    }
}
