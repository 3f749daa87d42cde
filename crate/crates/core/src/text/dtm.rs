use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NGRAM_JOINER: &str = ".";

/// Token counts sorted by token.
pub type NgramCounts = Vec<(String, u32)>;

/// Counts 1..=`ngram_max`-grams inside each sentence. N-grams never span
/// two sentences.
pub fn count_ngrams(sentences: &[Vec<String>], ngram_max: usize) -> NgramCounts {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for sentence in sentences {
        for n in 1..=ngram_max {
            for gram in sentence.windows(n) {
                *counts.entry(gram.join(NGRAM_JOINER)).or_default() += 1;
            }
        }
    }
    counts.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sector: String,
    pub counts: NgramCounts,
}

/// Sparse counts in compressed-row form. Column indices within a row are
/// ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DocumentTermMatrix {
    pub rows: Vec<String>,
    pub vocabulary: Vec<String>,
    pub sector_of_row: Vec<String>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    counts: Vec<u32>,
}

impl DocumentTermMatrix {
    /// Keeps the `top_n` tokens with the largest corpus frequency, ties by
    /// token. The vocabulary is ordered by that ranking.
    pub fn build(docs: &[Document], top_n: usize) -> Self {
        let mut totals: HashMap<&str, u64> = HashMap::new();
        for d in docs {
            for (tok, c) in &d.counts {
                *totals.entry(tok.as_str()).or_default() += u64::from(*c);
            }
        }
        let mut ranked: Vec<(&str, u64)> = totals.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if ranked.len() < top_n {
            log::warn!("only {} distinct tokens, fewer than top_n = {top_n}; keeping all", ranked.len());
        }
        ranked.truncate(top_n);
        let vocab: Vec<String> = ranked.into_iter().map(|(t, _)| t.to_string()).collect();
        Self::project(docs, &vocab)
    }

    /// Counts of `docs` over a fixed vocabulary; unknown tokens are dropped.
    pub fn project(docs: &[Document], vocabulary: &[String]) -> Self {
        let lookup: HashMap<&str, usize> =
            vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut m = DocumentTermMatrix {
            vocabulary: vocabulary.to_vec(),
            indptr: vec![0],
            ..Default::default()
        };
        for d in docs {
            let mut row: Vec<(usize, u32)> = d
                .counts
                .iter()
                .filter_map(|(t, c)| lookup.get(t.as_str()).map(|&j| (j, *c)))
                .filter(|&(_, c)| c > 0)
                .collect();
            row.sort_unstable();
            m.push_row(d.id.clone(), d.sector.clone(), &row);
        }
        m
    }

    fn push_row(&mut self, id: String, sector: String, row: &[(usize, u32)]) {
        self.rows.push(id);
        self.sector_of_row.push(sector);
        for &(j, c) in row {
            self.indices.push(j);
            self.counts.push(c);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[u32]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.counts[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        let (idx, cnt) = self.row(r);
        idx.binary_search(&c).map(|k| cnt[k]).unwrap_or(0)
    }

    pub fn column_index(&self, token: &str) -> Option<usize> {
        self.vocabulary.iter().position(|t| t == token)
    }

    pub fn column_dense(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| f64::from(self.get(r, c))).collect()
    }

    /// Column-major copy: for each column, its (row, count) entries.
    pub fn columns(&self) -> Vec<Vec<(usize, u32)>> {
        let mut cols = vec![Vec::new(); self.n_cols()];
        for r in 0..self.n_rows() {
            let (idx, cnt) = self.row(r);
            for (&j, &c) in idx.iter().zip(cnt) {
                cols[j].push((r, c));
            }
        }
        cols
    }

    pub fn column_totals(&self) -> Vec<u64> {
        let mut t = vec![0u64; self.n_cols()];
        for (&j, &c) in self.indices.iter().zip(&self.counts) {
            t[j] += u64::from(c);
        }
        t
    }

    /// Same rows over a new vocabulary; tokens absent from `self` become
    /// empty columns.
    pub fn restrict_columns(&self, tokens: &[String]) -> Self {
        let old: HashMap<&str, usize> =
            self.vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut map = vec![None; self.n_cols()];
        for (new, t) in tokens.iter().enumerate() {
            if let Some(&o) = old.get(t.as_str()) {
                map[o] = Some(new);
            }
        }
        let mut m = DocumentTermMatrix { vocabulary: tokens.to_vec(), indptr: vec![0], ..Default::default() };
        for r in 0..self.n_rows() {
            let (idx, cnt) = self.row(r);
            let mut row: Vec<(usize, u32)> =
                idx.iter().zip(cnt).filter_map(|(&j, &c)| map[j].map(|n| (n, c))).collect();
            row.sort_unstable();
            m.push_row(self.rows[r].clone(), self.sector_of_row[r].clone(), &row);
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m =
            DocumentTermMatrix { vocabulary: self.vocabulary.clone(), indptr: vec![0], ..Default::default() };
        for &r in rows {
            let (idx, cnt) = self.row(r);
            let row: Vec<(usize, u32)> = idx.iter().copied().zip(cnt.iter().copied()).collect();
            m.push_row(self.rows[r].clone(), self.sector_of_row[r].clone(), &row);
        }
        m
    }

    /// Sparse triplets `call_id,token,count`.
    pub fn write_triplets<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["call_id", "token", "count"])?;
        for r in 0..self.n_rows() {
            let (idx, cnt) = self.row(r);
            for (&j, &c) in idx.iter().zip(cnt) {
                w.write_record([self.rows[r].as_str(), self.vocabulary[j].as_str(), &c.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::Io { path: "<triplets>".into(), source: e })?;
        Ok(())
    }

    /// Vocabulary in column order, `token,total`.
    pub fn write_vocabulary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["token", "total"])?;
        for (t, n) in self.vocabulary.iter().zip(self.column_totals()) {
            w.write_record([t.as_str(), &n.to_string()])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<vocabulary>".into(), source: e })?;
        Ok(())
    }

    /// Row labels `call_id,sector`, which keeps empty rows representable.
    pub fn write_rows<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["call_id", "sector"])?;
        for (id, s) in self.rows.iter().zip(&self.sector_of_row) {
            w.write_record([id, s])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<rows>".into(), source: e })?;
        Ok(())
    }

    /// Reassembles a matrix from the three files written above.
    pub fn read_parts<R1: Read, R2: Read, R3: Read>(rows: R1, vocabulary: R2, triplets: R3) -> Result<Self> {
        let mut ids = Vec::new();
        let mut sectors = Vec::new();
        for rec in csv::Reader::from_reader(rows).records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            sectors.push(rec.get(1).unwrap_or("").to_string());
        }
        let mut vocab = Vec::new();
        for rec in csv::Reader::from_reader(vocabulary).records() {
            vocab.push(rec?[0].to_string());
        }
        let row_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let col_of: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut entries: Vec<Vec<(usize, u32)>> = vec![Vec::new(); ids.len()];
        for rec in csv::Reader::from_reader(triplets).records() {
            let rec = rec?;
            let r = *row_of
                .get(&rec[0])
                .ok_or_else(|| Error::validation(format!("triplet row {:?} not in row list", &rec[0])))?;
            let c = *col_of
                .get(&rec[1])
                .ok_or_else(|| Error::validation(format!("triplet token {:?} not in vocabulary", &rec[1])))?;
            let n: u32 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("bad count {:?}", &rec[2])))?;
            entries[r].push((c, n));
        }
        let mut m = DocumentTermMatrix { vocabulary: vocab, indptr: vec![0], ..Default::default() };
        for ((id, s), mut row) in ids.into_iter().zip(sectors).zip(entries) {
            row.sort_unstable();
            m.push_row(id, s, &row);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, sector: &str, sentences: &[&[&str]]) -> Document {
        let s: Vec<Vec<String>> =
            sentences.iter().map(|s| s.iter().map(|t| t.to_string()).collect()).collect();
        Document { id: id.into(), sector: sector.into(), counts: count_ngrams(&s, 3) }
    }

    #[test]
    fn hand_counted_ngrams() {
        let d = doc("c1", "x", &[&["a", "b", "a"]]);
        let m = DocumentTermMatrix::build(&[d], 10);
        assert_eq!(m.vocabulary, vec!["a", "a.b", "a.b.a", "b", "b.a"]);
        let got: Vec<u32> = (0..m.n_cols()).map(|c| m.get(0, c)).collect();
        assert_eq!(got, vec![2, 1, 1, 1, 1]);
    }

    #[test]
    fn ngrams_stay_inside_sentences() {
        let d = doc("c1", "x", &[&["a"], &["b"]]);
        assert_eq!(d.counts, vec![("a".to_string(), 1), ("b".to_string(), 1)]);
    }

    #[test]
    fn empty_corpus_and_identical_docs() {
        let m = DocumentTermMatrix::build(&[], 5);
        assert_eq!((m.n_rows(), m.n_cols()), (0, 0));
        let a = doc("1", "x", &[&["p", "q"]]);
        let b = doc("2", "x", &[&["p", "q"]]);
        let m = DocumentTermMatrix::build(&[a, b], 5);
        assert_eq!(m.row(0), m.row(1));
    }

    #[test]
    fn top_n_breaks_ties_by_token() {
        let d = doc("1", "x", &[&["z", "y", "x"]]);
        let m = DocumentTermMatrix::build(&[d], 2);
        assert_eq!(m.vocabulary, vec!["x", "y"]);
    }

    #[test]
    fn file_round_trip() {
        let docs = vec![doc("1", "e", &[&["a", "b"]]), doc("2", "f", &[&[]]), doc("3", "e", &[&["b"]])];
        let m = DocumentTermMatrix::build(&docs, 10);
        let (mut r, mut v, mut t) = (Vec::new(), Vec::new(), Vec::new());
        m.write_rows(&mut r).unwrap();
        m.write_vocabulary(&mut v).unwrap();
        m.write_triplets(&mut t).unwrap();
        let back = DocumentTermMatrix::read_parts(r.as_slice(), v.as_slice(), t.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn restrict_and_select() {
        let docs = vec![doc("1", "e", &[&["a", "b"]]), doc("2", "f", &[&["b", "b"]])];
        let m = DocumentTermMatrix::build(&docs, 10);
        let r = m.restrict_columns(&["b".to_string(), "zz".to_string()]);
        assert_eq!(r.column_dense(0), vec![1.0, 2.0]);
        assert_eq!(r.column_dense(1), vec![0.0, 0.0]);
        let s = m.select_rows(&[1]);
        assert_eq!(s.rows, vec!["2"]);
        assert_eq!(s.get(0, m.column_index("b.b").unwrap()), 1);
    }
}
