use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::state::EnvId;

pub const DB_MAGIC: &[u8; 6] = b"HISDB1";

/// Database of `N_r` recorded virtual-state sequences.
///
/// Every entry holds `entry_len` states of dimension `dim`, stored
/// contiguously; state `t` of entry `n` is `data[(n * entry_len + t) * dim..]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedDb<S> {
    pub env_id: EnvId,
    pub generation_seed: u64,
    entry_len: usize,
    dim: usize,
    data: Vec<S>,
}

/// Borrowed view of one recorded sequence.
#[derive(Clone, Copy, Debug)]
pub struct EntryView<'a, S> {
    data: &'a [S],
    dim: usize,
}

impl<'a, S: Scalar> EntryView<'a, S> {
    pub fn new(data: &'a [S], dim: usize) -> Self {
        assert!(
            dim > 0 && data.len() % dim == 0,
            "entry data is not a whole number of states"
        );
        Self { data, dim }
    }

    /// All states of the entry, flat.
    pub fn data(&self) -> &'a [S] {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// State at step `t`; past the end the last state is held.
    pub fn state(&self, t: usize) -> &'a [S] {
        let t = t.min(self.len() - 1);
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

impl<S: Scalar> RecordedDb<S> {
    pub fn from_entries(env_id: EnvId, generation_seed: u64, entries: &[Vec<Vec<S>>]) -> Result<Self> {
        let entry_len = entries.first().map_or(0, Vec::len);
        let dim = entries.first().and_then(|e| e.first()).map_or(0, Vec::len);
        if entry_len == 0 || dim == 0 {
            return Err(Error::Structural("recorded database must not be empty".into()));
        }
        let mut data = Vec::with_capacity(entries.len() * entry_len * dim);
        for (n, entry) in entries.iter().enumerate() {
            if entry.len() != entry_len {
                return Err(Error::Structural(format!(
                    "entry {n} has {} states, expected {entry_len}",
                    entry.len()
                )));
            }
            for state in entry {
                if state.len() != dim {
                    return Err(Error::Structural(format!(
                        "entry {n} has a state of dimension {}",
                        state.len()
                    )));
                }
                data.extend_from_slice(state);
            }
        }
        Ok(Self {
            env_id,
            generation_seed,
            entry_len,
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.entry_len * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn entry_len(&self) -> usize {
        self.entry_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, n: usize) -> EntryView<'_, S> {
        let stride = self.entry_len * self.dim;
        EntryView::new(&self.data[n * stride..(n + 1) * stride], self.dim)
    }

    pub fn entries(&self) -> impl Iterator<Item = EntryView<'_, S>> {
        (0..self.len()).map(move |n| self.entry(n))
    }

    /// Serializes to the flat little-endian format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.env_id.as_str().as_bytes();
        let mut out = Vec::with_capacity(64 + self.data.len() * 8);
        out.extend_from_slice(DB_MAGIC);
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.entry_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.generation_seed.to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::format(path, reason);
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(6).ok_or_else(|| bad("truncated header"))? != DB_MAGIC {
            return Err(bad("missing HISDB1 magic"));
        }
        let id_len = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let id = cur.take(id_len).ok_or_else(|| bad("truncated env id"))?;
        let id = std::str::from_utf8(id).map_err(|_| bad("env id is not UTF-8"))?;
        let env_id: EnvId = id.parse().map_err(|_| bad("unknown env id"))?;
        let n = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let entry_len = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let dim = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let generation_seed = cur.u64().ok_or_else(|| bad("truncated header"))?;
        if n == 0 || entry_len == 0 || dim == 0 {
            return Err(bad("empty database"));
        }
        let count = n * entry_len * dim;
        let payload = cur.take(count * 8).ok_or_else(|| bad("truncated payload"))?;
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| S::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        Ok(Self {
            env_id,
            generation_seed,
            entry_len,
            dim,
            data,
        })
    }

    /// Writes atomically (temp file then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RecordedDb<f64> {
        let entries = vec![
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            vec![vec![-1.0, 0.5], vec![0.25, 1e-300], vec![f64::MAX, -0.0]],
        ];
        RecordedDb::from_entries(EnvId::Volley2d, 11, &entries).unwrap()
    }

    #[test]
    fn layout_and_views() {
        let db = small();
        assert_eq!(db.len(), 2);
        assert_eq!(db.entry_len(), 3);
        assert_eq!(db.entry(1).state(1), &[0.25, 1e-300]);
        assert_eq!(db.entry(0).state(10), &[5.0, 6.0]);
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = small().to_bytes();
        assert_eq!(&bytes[..6], b"HISDB1");
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 8);
        assert_eq!(&bytes[10..18], b"volley2d");
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[22..26].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[26..30].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[30..38].try_into().unwrap()), 11);
        assert_eq!(bytes.len(), 38 + 2 * 3 * 2 * 8);
        assert_eq!(f64::from_le_bytes(bytes[38..46].try_into().unwrap()), 1.0);
    }

    #[test]
    fn round_trip_and_rejections() {
        let db = small();
        let bytes = db.to_bytes();
        let p = Path::new("mem");
        assert_eq!(RecordedDb::<f64>::from_bytes(&bytes, p).unwrap(), db);
        assert!(RecordedDb::<f64>::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(RecordedDb::<f64>::from_bytes(&extra, p).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(RecordedDb::<f64>::from_bytes(&magic, p).is_err());
    }

    #[test]
    fn ragged_entries_rejected() {
        let entries = vec![vec![vec![1.0]], vec![vec![1.0], vec![2.0]]];
        assert!(RecordedDb::<f64>::from_entries(EnvId::Pushbox2d, 0, &entries).is_err());
    }
}
