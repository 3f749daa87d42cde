//! A small column-oriented table keyed by (entity, month).
//!
//! Missing values are explicit `None`s. CSV cells that are empty or `NA`
//! read back as missing.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::time::Month;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub entity: Vec<String>,
    pub month: Vec<Month>,
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl Frame {
    pub fn new(entity: Vec<String>, month: Vec<Month>) -> Result<Self> {
        if entity.len() != month.len() {
            return Err(Error::validation("entity and month keys differ in length"));
        }
        Ok(Frame { entity, month, names: Vec::new(), columns: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[Option<f64>]> {
        self.column(name).ok_or_else(|| Error::validation(format!("column {name:?} not found")))
    }

    /// Adds a column, replacing any existing column of the same name.
    pub fn set_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::validation(format!(
                "column {name:?} has {} rows, frame has {}",
                values.len(),
                self.len()
            )));
        }
        match self.names.iter().position(|n| *n == name) {
            Some(i) => self.columns[i] = values,
            None => {
                self.names.push(name);
                self.columns.push(values);
            }
        }
        Ok(())
    }

    /// Row index keyed by (entity, month). Later duplicates win.
    pub fn key_index(&self) -> HashMap<(String, Month), usize> {
        self.entity
            .iter()
            .cloned()
            .zip(self.month.iter().copied())
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect()
    }

    /// Left join of `other`'s columns onto the rows of `self`.
    pub fn left_join(&mut self, other: &Frame, columns: &[&str]) -> Result<()> {
        let idx = other.key_index();
        for &name in columns {
            let src = other.require(name)?;
            let values = self
                .entity
                .iter()
                .zip(&self.month)
                .map(|(e, m)| idx.get(&(e.clone(), *m)).and_then(|&i| src[i]))
                .collect();
            self.set_column(name, values)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["entity_id".to_string(), "month".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec = vec![self.entity[r].clone(), self.month[r].to_string()];
            rec.extend(self.columns.iter().map(|c| c[r].map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "entity_id" || &headers[1] != "month" {
            return Err(Error::validation("frame CSV must start with entity_id,month"));
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut entity = Vec::new();
        let mut month = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            entity.push(rec[0].to_string());
            month.push(rec[1].parse()?);
            for (j, col) in columns.iter_mut().enumerate() {
                col.push(parse_cell(rec.get(j + 2).unwrap_or(""))?);
            }
        }
        Ok(Frame { entity, month, names, columns })
    }
}

pub fn parse_cell(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::validation(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_missing() {
        let m = Month::new(2020, 1).unwrap();
        let mut f = Frame::new(vec!["a".into(), "b".into()], vec![m, m.offset(1)]).unwrap();
        f.set_column("x", vec![Some(1.5), None]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = Frame::read_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn left_join_matches_on_keys() {
        let m = Month::new(2020, 1).unwrap();
        let mut f = Frame::new(vec!["a".into(), "b".into()], vec![m, m]).unwrap();
        let mut g = Frame::new(vec!["b".into()], vec![m]).unwrap();
        g.set_column("y", vec![Some(2.0)]).unwrap();
        f.left_join(&g, &["y"]).unwrap();
        assert_eq!(f.column("y").unwrap(), &[None, Some(2.0)]);
    }
}
