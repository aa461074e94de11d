//! Field snapshots as CSV.
//!
//! ```text
//! # basis=sine d=1 L=1 m=9 t=0.5
//! # config_hash=...
//! 1,9.869604401089358e0,9.99e-1
//! 2,3.947841760435743e1,-1.2e-3
//! ```
//!
//! The first header line fixes the basis; further `#` lines are free-form
//! `key=value` metadata. Data rows are `k_1[,k_2],lambda,coefficient`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::domain::{DomainSpec, Field, SpectralBasis};
use crate::error::{Error, Result};

/// A parsed snapshot.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub field: Field,
    pub t: Option<f64>,
    /// Every `key=value` pair found in header lines, including the basis ones.
    pub header: BTreeMap<String, String>,
}

/// Write `field` with an optional time stamp and extra header lines.
pub fn write_snapshot<W: Write>(mut w: W, field: &Field, t: Option<f64>, extra: &[String]) -> Result<()> {
    let domain = field.basis().domain();
    let lengths: Vec<String> = domain.lengths().iter().map(|l| l.to_string()).collect();
    write!(w, "# basis=sine d={} L={} m={}", domain.dimension(), lengths.join(","), domain.level())?;
    if let Some(t) = t {
        write!(w, " t={t}")?;
    }
    writeln!(w)?;
    for line in extra {
        writeln!(w, "# {line}")?;
    }
    for (mode, a) in field.basis().modes().iter().zip(field.coefficients()) {
        let k: Vec<String> = mode.multi_index().iter().map(|k| k.to_string()).collect();
        writeln!(w, "{},{:e},{:e}", k.join(","), mode.eigenvalue, a)?;
    }
    Ok(())
}

/// Read a snapshot, rebuilding its basis with default quadrature. Modes not
/// listed in the file get a zero coefficient.
pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let bad = |msg: String| Error::Snapshot(msg);
    let mut header = BTreeMap::new();
    let mut rows: Vec<(Vec<u32>, f64)> = Vec::new();
    let mut saw_basis = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    if k == "basis" {
                        saw_basis = true;
                    }
                    header.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(bad(format!("line {}: expected k,lambda,coefficient", lineno + 1)));
        }
        let (ks, rest) = fields.split_at(fields.len() - 2);
        let k = ks
            .iter()
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        let _lambda: f64 = rest[0].trim().parse().map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        let a: f64 = rest[1].trim().parse().map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        rows.push((k, a));
    }
    if !saw_basis || header.get("basis").map(String::as_str) != Some("sine") {
        return Err(bad("missing '# basis=sine' header".into()));
    }
    let get = |key: &str| header.get(key).ok_or_else(|| bad(format!("header lacks '{key}'")));
    let d: usize = get("d")?.parse().map_err(|e| bad(format!("d: {e}")))?;
    let lengths = get("L")?
        .split(',')
        .map(str::parse::<f64>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("L: {e}")))?;
    if lengths.len() != d {
        return Err(bad(format!("d={d} but {} edge lengths", lengths.len())));
    }
    let level: u32 = get("m")?.parse().map_err(|e| bad(format!("m: {e}")))?;
    let t = match header.get("t") {
        Some(v) => Some(v.parse::<f64>().map_err(|e| bad(format!("t: {e}")))?),
        None => None,
    };
    let basis = Arc::new(SpectralBasis::new(DomainSpec::new(&lengths, level)?)?);
    let mut coeffs = vec![0.0; basis.len()];
    for (k, a) in rows {
        if k.len() != d {
            return Err(bad(format!("mode {k:?} does not match d={d}")));
        }
        let n = basis.index_of(&k).ok_or_else(|| bad(format!("mode {k:?} is not in the level-{level} basis")))?;
        coeffs[n] = a;
    }
    Ok(Snapshot { field: Field::from_coefficients(&basis, coeffs)?, t, header })
}
