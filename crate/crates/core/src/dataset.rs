//! Row-major sample matrices over `{-1, +1}` or `[k]`.
//!
//! Entries are stored as symbols. Binary data uses `0` for `-1` and `1`
//! for `+1`; categorical data uses `0..k`. On disk, binary entries are
//! written as `-1`/`1` and categorical entries as `1..=k`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::spin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alphabet {
    /// `{-1, +1}`.
    Binary,
    /// `{1, ..., k}` on disk, `0..k` in memory.
    Categorical(usize),
}

impl Alphabet {
    pub fn size(self) -> usize {
        match self {
            Alphabet::Binary => 2,
            Alphabet::Categorical(k) => k,
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    alphabet: Alphabet,
    rows: Vec<u8>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Wraps row-major symbols, checking every entry against the alphabet.
    pub fn new(p: usize, alphabet: Alphabet, rows: Vec<u8>) -> Result<Self> {
        if p == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if rows.len() % p != 0 {
            return Err(invalid(format!("{} entries do not fill rows of length {p}", rows.len())));
        }
        let k = alphabet.size();
        if let Some(bad) = rows.iter().find(|&&s| s as usize >= k) {
            return Err(invalid(format!("symbol {bad} outside an alphabet of size {k}")));
        }
        Ok(Dataset { p, alphabet, rows, meta: DatasetMeta::default() })
    }

    /// Binary dataset from ±1 rows.
    pub fn from_spins(p: usize, spins: &[i8]) -> Result<Self> {
        let rows = spins
            .iter()
            .map(|&s| match s {
                1 => Ok(1),
                -1 => Ok(0),
                other => Err(invalid(format!("{other} is not ±1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Dataset::new(p, Alphabet::Binary, rows)
    }

    pub fn empty(p: usize, alphabet: Alphabet) -> Self {
        Dataset { p, alphabet, rows: Vec::new(), meta: DatasetMeta::default() }
    }

    pub fn with_meta(mut self, generator: impl Into<String>, seed: Option<u64>) -> Self {
        self.meta = DatasetMeta { generator: generator.into(), seed };
        self
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.alphabet == Alphabet::Binary
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[u8] {
        &self.rows[m * self.p..(m + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.rows.chunks_exact(self.p)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.rows
    }

    /// Row `m` as ±1 values. Only meaningful for binary data.
    pub fn spins(&self, m: usize) -> Vec<i8> {
        self.row(m).iter().map(|&s| spin(s)).collect()
    }

    /// Rows `range` as a new dataset with the same metadata.
    pub fn slice(&self, range: Range<usize>) -> Dataset {
        Dataset {
            p: self.p,
            alphabet: self.alphabet,
            rows: self.rows[range.start * self.p..range.end * self.p].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Reinterprets binary data as categorical data over two symbols:
    /// `-1` becomes symbol 0 and `+1` symbol 1.
    pub fn to_categorical(&self) -> Dataset {
        Dataset { alphabet: Alphabet::Categorical(self.alphabet.size()), ..self.clone() }
    }

    /// Distinct rows in lexicographic order with their multiplicities.
    pub fn row_counts(&self) -> Vec<(&[u8], usize)> {
        let mut counts: BTreeMap<&[u8], usize> = BTreeMap::new();
        for row in self.rows() {
            *counts.entry(row).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }

    /// Writes one comma-separated line per row, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let mut record = Vec::with_capacity(self.p);
        for row in self.rows() {
            record.clear();
            record.extend(row.iter().map(|&s| match self.alphabet {
                Alphabet::Binary => spin(s).to_string(),
                Alphabet::Categorical(_) => (s + 1).to_string(),
            }));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a headerless CSV. With `alphabet = None` the alphabet is
    /// binary if every entry is ±1 and categorical over `1..=max` otherwise.
    pub fn read_csv<R: Read>(input: R, alphabet: Option<Alphabet>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
        let mut values: Vec<i64> = Vec::new();
        let mut p = None;
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            match p {
                None => p = Some(record.len()),
                Some(width) if width != record.len() => {
                    return Err(Error::Parse(format!("row {} has {} fields, expected {width}", line + 1, record.len())))
                }
                _ => {}
            }
            for field in record.iter() {
                values.push(field.parse().map_err(|e| Error::Parse(format!("row {}: {field:?}: {e}", line + 1)))?);
            }
        }
        let p = p.ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let alphabet = alphabet.unwrap_or_else(|| {
            if values.iter().all(|v| *v == 1 || *v == -1) {
                Alphabet::Binary
            } else {
                Alphabet::Categorical(values.iter().copied().max().unwrap_or(1).max(2) as usize)
            }
        });
        let rows = values
            .iter()
            .map(|&v| match alphabet {
                Alphabet::Binary if v == 1 => Ok(1u8),
                Alphabet::Binary if v == -1 => Ok(0u8),
                Alphabet::Categorical(k) if v >= 1 && v <= k as i64 => Ok((v - 1) as u8),
                _ => Err(invalid(format!("value {v} outside the {alphabet:?} alphabet"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Dataset::new(p, alphabet, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = Dataset::from_spins(3, &[1, -1, 1, -1, -1, 1]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,-1,1\n-1,-1,1\n");
        assert_eq!(Dataset::read_csv(&buf[..], None).unwrap(), d);

        let cat = Dataset::new(2, Alphabet::Categorical(3), vec![0, 2, 1, 1]).unwrap();
        let mut buf = Vec::new();
        cat.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,3\n2,2\n");
        assert_eq!(Dataset::read_csv(&buf[..], Some(Alphabet::Categorical(3))).unwrap(), cat);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::new(2, Alphabet::Binary, vec![0, 2]).is_err());
        assert!(Dataset::new(2, Alphabet::Binary, vec![0, 1, 1]).is_err());
        assert!(Dataset::read_csv(&b"1,0\n"[..], Some(Alphabet::Binary)).is_err());
        assert!(Dataset::read_csv(&b"1,1\n1\n"[..], None).is_err());
        assert!(Dataset::read_csv(&b""[..], None).is_err());
    }

    #[test]
    fn row_counts_are_sorted() {
        let d = Dataset::from_spins(2, &[1, 1, -1, 1, 1, 1]).unwrap();
        let counts = d.row_counts();
        assert_eq!(counts, vec![(&[0u8, 1][..], 1), (&[1u8, 1][..], 2)]);
    }
}
