//! Binary panel cache.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   "MCPANEL\0"
//! version      u16       CACHE_VERSION
//! n_cov        u16       number of covariate columns K
//! n_units      u32
//! cov_codes    K bytes   covariate key tags, ascending
//! prov_len     u32
//! provenance   prov_len bytes of JSON
//! records      n_units x RECORD_BYTES(K)
//!   country    32 bytes  UTF-8, NUL padded
//!   year       i32
//!   flags      u32       bit 0: clamped, bit 1: average incomes present
//!   shares     100 x f64
//!   incomes    100 x f64 (NaN when absent)
//!   covariates K x f64   (NaN when missing)
//! checksum     32 bytes  SHA-256 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CovariateKey, Panel, SourceRecord};
use crate::distribution::{PercentileDistribution, PERCENTILES};
use crate::error::{Error, Result};
use crate::sample::UnitKey;

pub const CACHE_MAGIC: &[u8; 8] = b"MCPANEL\0";
pub const CACHE_VERSION: u16 = 1;

const COUNTRY_BYTES: usize = 32;
const FLAG_CLAMPED: u32 = 1;
const FLAG_INCOMES: u32 = 2;
const DIGEST_BYTES: usize = 32;

fn record_bytes(k: usize) -> usize {
    COUNTRY_BYTES + 4 + 4 + 16 * PERCENTILES + 8 * k
}

/// Writes `panel` to `path` (via a temporary sibling and a rename).
pub fn cache_store(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let keys: Vec<CovariateKey> = panel.covariate_keys().into_iter().collect();
    let provenance = serde_json::to_vec(panel.provenance())
        .map_err(|e| Error::Integrity(format!("provenance not serializable: {e}")))?;

    let mut buf = Vec::with_capacity(64 + provenance.len() + panel.len() * record_bytes(keys.len()));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(keys.len() as u16).to_le_bytes());
    buf.extend_from_slice(&(panel.len() as u32).to_le_bytes());
    buf.extend(keys.iter().map(CovariateKey::code));
    buf.extend_from_slice(&(provenance.len() as u32).to_le_bytes());
    buf.extend_from_slice(&provenance);

    for (key, d) in panel.units() {
        let name = key.country.as_bytes();
        if name.len() > COUNTRY_BYTES || name.contains(&0) {
            return Err(Error::Config(format!(
                "country code `{}` does not fit the cache's {COUNTRY_BYTES}-byte field",
                key.country
            )));
        }
        let mut field = [0u8; COUNTRY_BYTES];
        field[..name.len()].copy_from_slice(name);
        buf.extend_from_slice(&field);
        buf.extend_from_slice(&key.year.to_le_bytes());
        let mut flags = 0;
        if d.was_clamped() {
            flags |= FLAG_CLAMPED;
        }
        if d.mean_incomes().is_some() {
            flags |= FLAG_INCOMES;
        }
        buf.extend_from_slice(&flags.to_le_bytes());
        for s in d.shares() {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        match d.mean_incomes() {
            Some(m) => m.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            None => (0..PERCENTILES).for_each(|_| buf.extend_from_slice(&f64::NAN.to_le_bytes())),
        }
        for var in &keys {
            let v = panel.covariate(key, *var).unwrap_or(f64::NAN);
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);

    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Integrity("cache is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.array()?))).collect()
    }
}

/// Reads a cache written by [`cache_store`], verifying its checksum.
pub fn cache_load(path: impl AsRef<Path>) -> Result<Panel> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(CACHE_MAGIC.len()).ok() != Some(CACHE_MAGIC.as_slice()) {
        return Err(Error::Integrity(format!(
            "{} is not a panel cache",
            path.as_ref().display()
        )));
    }
    let version = cur.u16()?;
    if version != CACHE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    if bytes.len() < cur.pos + DIGEST_BYTES {
        return Err(Error::Integrity("cache is truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_BYTES);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("cache checksum mismatch".into()));
    }
    let mut cur = Cursor { bytes: body, pos: cur.pos };

    let n_cov = cur.u16()? as usize;
    let n_units = cur.u32()? as usize;
    let keys = cur
        .take(n_cov)?
        .iter()
        .map(|&c| {
            CovariateKey::from_code(c).ok_or_else(|| Error::Integrity(format!("unknown covariate tag {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let prov_len = cur.u32()? as usize;
    let provenance: Vec<SourceRecord> = serde_json::from_slice(cur.take(prov_len)?)
        .map_err(|e| Error::Integrity(format!("provenance block: {e}")))?;
    if body.len() - cur.pos != n_units * record_bytes(n_cov) {
        return Err(Error::Integrity("record block has the wrong length".into()));
    }

    let mut units = BTreeMap::new();
    let mut covariates = BTreeMap::new();
    for _ in 0..n_units {
        let field = cur.take(COUNTRY_BYTES)?;
        let len = field.iter().position(|&b| b == 0).unwrap_or(COUNTRY_BYTES);
        let country = std::str::from_utf8(&field[..len])
            .map_err(|_| Error::Integrity("country code is not UTF-8".into()))?
            .to_string();
        let year = cur.i32()?;
        let flags = cur.u32()?;
        let shares = cur.f64s(PERCENTILES)?;
        let incomes = cur.f64s(PERCENTILES)?;
        let covs = cur.f64s(n_cov)?;
        let key = UnitKey::new(country.clone(), year);
        let dist = PercentileDistribution::from_stored(
            country,
            year,
            shares,
            (flags & FLAG_INCOMES != 0).then_some(incomes),
            flags & FLAG_CLAMPED != 0,
        )?;
        let vars: BTreeMap<CovariateKey, f64> = keys
            .iter()
            .zip(covs)
            .filter(|(_, v)| !v.is_nan())
            .map(|(k, v)| (*k, v))
            .collect();
        if !vars.is_empty() {
            covariates.insert(key.clone(), vars);
        }
        if units.insert(key, dist).is_some() {
            return Err(Error::Integrity("duplicate unit in cache".into()));
        }
    }
    Ok(Panel::from_parts(units, covariates, provenance))
}
