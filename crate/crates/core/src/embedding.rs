use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{format_float, write_atomic};

/// Per-plan coordinates in a `dim`-dimensional space, stored row-major in
/// insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    dim: usize,
    seed: u64,
    ids: Vec<String>,
    coords: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Embedding {
    pub fn new(dim: usize, seed: u64) -> Self {
        Embedding {
            dim,
            seed,
            ids: Vec::new(),
            coords: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_parts(dim: usize, seed: u64, ids: Vec<String>, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if coords.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dim,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Embedding {
            dim,
            seed,
            ids,
            coords,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|k| self.point(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .zip(self.coords.chunks(self.dim))
            .map(|(id, c)| (id.as_str(), c))
    }

    pub fn push(&mut self, id: impl Into<String>, coord: &[f64]) -> Result<()> {
        let id = id.into();
        if coord.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coord.len(),
            });
        }
        if coord.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.coords.extend_from_slice(coord);
        Ok(())
    }

    pub fn header(&self) -> String {
        format!("# dim={} seed={}", self.dim, self.seed)
    }
}

pub fn coord_line(id: &str, coord: &[f64]) -> String {
    let mut line = id.to_string();
    for c in coord {
        line.push('\t');
        line.push_str(&format_float(*c));
    }
    line.push('\n');
    line
}

pub fn embedding_to_tsv(embedding: &Embedding) -> String {
    let mut text = embedding.header();
    text.push('\n');
    for (id, c) in embedding.iter() {
        text.push_str(&coord_line(id, c));
    }
    text
}

pub fn write_embedding(embedding: &Embedding, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), embedding_to_tsv(embedding).as_bytes())
}

pub fn parse_embedding(text: &str, path: &Path) -> Result<Embedding> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| parse_err(1, "missing header".into()))?;
    let mut dim = None;
    let mut seed = None;
    for field in header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "header must start with '#'".into()))?
        .split_whitespace()
    {
        match field.split_once('=') {
            Some(("dim", v)) => dim = v.parse::<usize>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            _ => {}
        }
    }
    let dim = dim
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(1, "header lacks a valid dim".into()))?;
    let mut embedding = Embedding::new(dim, seed.unwrap_or(0));
    for (n, line) in lines {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        if id.is_empty() {
            return Err(parse_err(lineno, "empty id".into()));
        }
        let coord = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        embedding
            .push(id, &coord)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
    }
    Ok(embedding)
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embedding(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_rows() {
        let mut e = Embedding::new(2, 7);
        e.push("a", &[0.5, -1.0]).unwrap();
        e.push("b", &[0.1, 3.0]).unwrap();
        let text = embedding_to_tsv(&e);
        assert_eq!(text, "# dim=2 seed=7\na\t0.5\t-1\nb\t0.10000000000000001\t3\n");
        assert!(e.push("a", &[0.0, 0.0]).is_err());
        assert!(e.push("c", &[0.0]).is_err());
    }

    #[test]
    fn rejects_wrong_width() {
        let err = parse_embedding("# dim=3 seed=0\na\t1\t2\n", Path::new("e.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_embedding("a\t1\n", Path::new("e.tsv")).is_err());
    }

    proptest! {
        #[test]
        fn tsv_round_trip(rows in prop::collection::vec(prop::array::uniform3(-1e6f64..1e6), 0..20), seed in any::<u64>()) {
            let ids: Vec<String> = (0..rows.len()).map(|k| format!("p{k}")).collect();
            let coords: Vec<f64> = rows.iter().flatten().copied().collect();
            let e = Embedding::from_parts(3, seed, ids, coords).unwrap();
            let back = parse_embedding(&embedding_to_tsv(&e), Path::new("e.tsv")).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
