//! Caches for log partition sums keyed by (cylinder-function hash, exact
//! bits of `t`, level).

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use log::warn;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub cf_hash: String,
    pub t_bits: u64,
    pub n: usize,
}

impl CacheKey {
    pub fn new(cf_hash: impl Into<String>, t: f64, n: usize) -> Self {
        Self { cf_hash: cf_hash.into(), t_bits: t.to_bits(), n }
    }
}

pub trait PartitionCache: Send + Sync {
    fn get(&self, key: &CacheKey) -> Option<f64>;
    fn put(&self, key: CacheKey, value: f64);
}

#[derive(Debug, Default)]
pub struct MemoryCache {
    entries: RwLock<HashMap<CacheKey, u64>>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PartitionCache for MemoryCache {
    fn get(&self, key: &CacheKey) -> Option<f64> {
        self.entries.read().unwrap().get(key).map(|b| f64::from_bits(*b))
    }

    fn put(&self, key: CacheKey, value: f64) {
        self.entries.write().unwrap().insert(key, value.to_bits());
    }
}

/// Append-only text file, one record per line:
///
/// ```text
/// v1 <cf hash> <t bits, 16 hex> <n> <value bits, 16 hex> <checksum, 8 hex>
/// ```
///
/// The checksum is the first four bytes of SHA-256 over the record text
/// before it. Records that fail to parse or verify are skipped with a warning.
#[derive(Debug)]
pub struct FileCache {
    path: PathBuf,
    memory: MemoryCache,
    file: Mutex<File>,
    needs_newline: Mutex<bool>,
}

fn checksum(body: &str) -> String {
    hex::encode(&Sha256::digest(body.as_bytes())[..4])
}

fn parse_record(line: &str) -> Option<(CacheKey, f64)> {
    let (body, check) = line.rsplit_once(' ')?;
    if checksum(body) != check {
        return None;
    }
    let fields: Vec<&str> = body.split(' ').collect();
    if fields.len() != 5 || fields[0] != "v1" || fields[1].len() != 64 {
        return None;
    }
    let t_bits = u64::from_str_radix(fields[2], 16).ok()?;
    let n = fields[3].parse().ok()?;
    let value = f64::from_bits(u64::from_str_radix(fields[4], 16).ok()?);
    Some((CacheKey { cf_hash: fields[1].to_string(), t_bits, n }, value))
}

impl FileCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let memory = MemoryCache::new();
        file.seek(SeekFrom::Start(0))?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        let needs_newline = !raw.is_empty() && raw.last() != Some(&b'\n');
        for (idx, line) in BufReader::new(raw.as_slice()).lines().enumerate() {
            let line = match line {
                Ok(l) => l,
                Err(_) => {
                    warn!("{}: line {}: unreadable cache record ignored", path.display(), idx + 1);
                    continue;
                }
            };
            if line.is_empty() {
                continue;
            }
            match parse_record(&line) {
                Some((key, value)) => memory.put(key, value),
                None => warn!("{}: line {}: corrupted cache record ignored", path.display(), idx + 1),
            }
        }
        Ok(Self { path, memory, file: Mutex::new(file), needs_newline: Mutex::new(needs_newline) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }
}

impl PartitionCache for FileCache {
    fn get(&self, key: &CacheKey) -> Option<f64> {
        self.memory.get(key)
    }

    fn put(&self, key: CacheKey, value: f64) {
        if self.memory.get(&key).map(f64::to_bits) == Some(value.to_bits()) {
            return;
        }
        let body = format!("v1 {} {:016x} {} {:016x}", key.cf_hash, key.t_bits, key.n, value.to_bits());
        let line = format!("{body} {}\n", checksum(&body));
        let mut file = self.file.lock().unwrap();
        let mut newline = self.needs_newline.lock().unwrap();
        let result = (|| -> std::io::Result<()> {
            if *newline {
                file.write_all(b"\n")?;
                *newline = false;
            }
            file.write_all(line.as_bytes())?;
            file.flush()
        })();
        if let Err(e) = result {
            warn!("{}: failed to append cache record: {e}", self.path.display());
        }
        self.memory.put(key, value);
    }
}
