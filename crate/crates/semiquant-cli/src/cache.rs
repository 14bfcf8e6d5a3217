//! On-disk cache of Kostant-Souriau eigendecompositions.
//!
//! Each entry is one file `eig-<key>.bin`:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `SQEIGEN\0`                       |
//! | 8      | 4    | format version, little endian           |
//! | 12     | 8    | dimension `N`, little endian            |
//! | 20     | 32   | SHA-256 key (geometry, f, p, grid)      |
//! | 52     | 32   | SHA-256 of the payload                  |
//! | 84     | ...  | `N` eigenvalues, then `N²` complex      |
//! |        |      | eigenvector entries column by column    |
//!
//! All numbers are little-endian `f64`. Writers hold an exclusive lock on
//! `.writer.lock` and publish by rename. Readers hold a shared lock on the
//! entry for the lifetime of the [`EigenCache`], and garbage collection skips
//! entries it cannot lock exclusively. Entries that fail to parse are moved
//! to `quarantine/`.

use semiquant::{CMatrix, Hamiltonian, SpectralData, C64};
use sha2::{Digest, Sha256};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::SystemTime;

pub const MAGIC: [u8; 8] = *b"SQEIGEN\0";
pub const VERSION: u32 = 1;
const HEADER: usize = 84;
const WRITER_LOCK: &str = ".writer.lock";
const QUARANTINE: &str = "quarantine";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(twists: &[i32], f: &Hamiltonian, p: i64, grid_degree: usize) -> Self {
        let mut h = Sha256::new();
        h.update(b"semiquant-ks-eig");
        h.update(VERSION.to_le_bytes());
        h.update((twists.len() as u64).to_le_bytes());
        for m in twists {
            h.update(m.to_le_bytes());
        }
        h.update(hamiltonian_hash(f));
        h.update(p.to_le_bytes());
        h.update((grid_degree as u64).to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Hash of the monomial expansion of `f`.
pub fn hamiltonian_hash(f: &Hamiltonian) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((f.factors() as u64).to_le_bytes());
    for t in f.terms() {
        h.update(t.coef.re.to_bits().to_le_bytes());
        h.update(t.coef.im.to_bits().to_le_bytes());
        for v in t.a.iter().chain(&t.b).chain(&t.d) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

fn encode(key: &CacheKey, q: &SpectralData) -> Vec<u8> {
    let n = q.dim();
    let mut payload = Vec::with_capacity(8 * (n + 2 * n * n));
    for v in &q.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    for z in q.vectors.iter() {
        payload.extend_from_slice(&z.re.to_le_bytes());
        payload.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&key.0);
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    Truncated,
    Magic,
    Version(u32),
    Key,
    Checksum,
}

fn decode(bytes: &[u8], expect: Option<&CacheKey>) -> Result<SpectralData, DecodeError> {
    if bytes.len() < HEADER {
        return Err(DecodeError::Truncated);
    }
    if bytes[..8] != MAGIC {
        return Err(DecodeError::Magic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(DecodeError::Version(version));
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if let Some(k) = expect {
        if bytes[20..52] != k.0 {
            return Err(DecodeError::Key);
        }
    }
    let payload = &bytes[HEADER..];
    if n.checked_mul(n).and_then(|nn| nn.checked_mul(16)).and_then(|v| v.checked_add(8 * n)) != Some(payload.len()) {
        return Err(DecodeError::Truncated);
    }
    if Sha256::digest(payload).as_slice() != &bytes[52..84] {
        return Err(DecodeError::Checksum);
    }
    let f = |i: usize| f64::from_le_bytes(payload[8 * i..8 * i + 8].try_into().unwrap());
    let values = (0..n).map(f).collect();
    let vectors = CMatrix::from_iterator(n, n, (0..n * n).map(|k| C64::new(f(n + 2 * k), f(n + 2 * k + 1))));
    Ok(SpectralData { values, vectors })
}

/// Handle on a cache directory; pins every entry it has read.
#[derive(Debug)]
pub struct EigenCache {
    dir: PathBuf,
    pinned: Mutex<Vec<File>>,
    quarantined: Mutex<Vec<PathBuf>>,
}

impl EigenCache {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), pinned: Mutex::new(Vec::new()), quarantined: Mutex::new(Vec::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("eig-{}.bin", key.hex()))
    }

    /// Entries moved to quarantine by this handle.
    pub fn quarantined(&self) -> Vec<PathBuf> {
        self.quarantined.lock().unwrap().clone()
    }

    pub fn load(&self, key: &CacheKey) -> Option<SpectralData> {
        let path = self.entry(key);
        let mut file = OpenOptions::new().read(true).write(true).open(&path).ok()?;
        file.lock_shared().ok()?;
        let mut bytes = Vec::new();
        if file.read_to_end(&mut bytes).is_err() {
            return None;
        }
        match decode(&bytes, Some(key)) {
            Ok(q) => {
                let _ = file.set_modified(SystemTime::now());
                self.pinned.lock().unwrap().push(file);
                Some(q)
            }
            Err(_) => {
                drop(file);
                if let Ok(dest) = quarantine(&self.dir, &path) {
                    self.quarantined.lock().unwrap().push(dest);
                }
                None
            }
        }
    }

    pub fn store(&self, key: &CacheKey, q: &SpectralData) -> io::Result<()> {
        let lock = File::create(self.dir.join(WRITER_LOCK))?;
        lock.lock()?;
        let path = self.entry(key);
        let tmp = self.dir.join(format!(".tmp-{}-{}", std::process::id(), key.hex()));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&encode(key, q))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        lock.unlock()
    }

    pub fn get_or_compute<E>(
        &self,
        key: &CacheKey,
        compute: impl FnOnce() -> Result<SpectralData, E>,
    ) -> Result<SpectralData, E> {
        if let Some(q) = self.load(key) {
            return Ok(q);
        }
        let q = compute()?;
        // A failed write only costs a recomputation next time.
        let _ = self.store(key, &q);
        Ok(q)
    }
}

fn quarantine(dir: &Path, path: &Path) -> io::Result<PathBuf> {
    let qdir = dir.join(QUARANTINE);
    fs::create_dir_all(&qdir)?;
    let dest = qdir.join(path.file_name().unwrap_or_default());
    fs::rename(path, &dest)?;
    Ok(dest)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcReport {
    pub entries: usize,
    pub bytes_before: u64,
    pub bytes_after: u64,
    pub evicted: Vec<String>,
    pub quarantined: Vec<String>,
    /// Entries skipped because another process holds them.
    pub in_use: Vec<String>,
}

/// Least-recently-used eviction until the live entries fit in `max_bytes`.
pub fn gc(dir: &Path, max_bytes: u64) -> io::Result<GcReport> {
    let mut report = GcReport::default();
    if !dir.is_dir() {
        return Ok(report);
    }
    let lock = File::create(dir.join(WRITER_LOCK))?;
    lock.lock()?;
    let mut live = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("eig-")))
        .collect();
    names.sort();
    for path in names {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        report.entries += 1;
        let meta = fs::metadata(&path)?;
        report.bytes_before += meta.len();
        let mut file = File::open(&path)?;
        let mut bytes = Vec::new();
        let readable = file.read_to_end(&mut bytes).is_ok() && decode(&bytes, None).is_ok();
        if !readable {
            drop(file);
            quarantine(dir, &path)?;
            report.quarantined.push(name);
            continue;
        }
        live.push((meta.modified()?, name, path, meta.len()));
    }
    live.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut total: u64 = live.iter().map(|e| e.3).sum();
    for (_, name, path, len) in live {
        if total <= max_bytes {
            break;
        }
        let file = File::open(&path)?;
        match file.try_lock() {
            Ok(()) => {
                fs::remove_file(&path)?;
                total -= len;
                report.evicted.push(name);
            }
            Err(fs::TryLockError::WouldBlock) => report.in_use.push(name),
            Err(fs::TryLockError::Error(e)) => return Err(e),
        }
    }
    report.bytes_after = total;
    lock.unlock()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, shift: f64) -> SpectralData {
        let m = CMatrix::from_fn(n, n, |i, j| C64::new((i + j) as f64 + shift, i as f64 - j as f64));
        SpectralData::from_hermitian(&((&m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    #[test]
    fn blobs_round_trip_bit_for_bit() {
        let f = Hamiltonian::rotation(1);
        let key = CacheKey::new(&[0], &f, 5, 12);
        let q = sample(6, 0.3);
        let back = decode(&encode(&key, &q), Some(&key)).unwrap();
        assert_eq!(back.values, q.values);
        assert_eq!(back.vectors, q.vectors);
        let other = CacheKey::new(&[-1], &f, 5, 12);
        assert_eq!(decode(&encode(&key, &q), Some(&other)).unwrap_err(), DecodeError::Key);
        let mut bad = encode(&key, &q);
        let last = bad.len() - 1;
        bad[last] ^= 1;
        assert_eq!(decode(&bad, Some(&key)).unwrap_err(), DecodeError::Checksum);
        assert_eq!(decode(&bad[..40], Some(&key)).unwrap_err(), DecodeError::Truncated);
    }

    #[test]
    fn keys_separate_models() {
        let f = Hamiltonian::rotation(1);
        let g = Hamiltonian::preset("radial:1,0.5", 1).unwrap();
        let k = CacheKey::new(&[0], &f, 5, 12);
        assert_ne!(k, CacheKey::new(&[0], &g, 5, 12));
        assert_ne!(k, CacheKey::new(&[0], &f, 6, 12));
        assert_ne!(k, CacheKey::new(&[0], &f, 5, 13));
        assert_eq!(k, CacheKey::new(&[0], &Hamiltonian::preset("rotation", 1).unwrap(), 5, 12));
    }
}
