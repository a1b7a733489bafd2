//! CSV dump of count tables: `level,endpoint,k,count,backend`.
//!
//! Exact tables write `count` as a decimal integer; log-space tables write
//! `log10` of the count. Only nonzero entries are written.

use std::io::Write;

use super::cell::CountValue;
use super::count::CountLayer;
use crate::error::{LppError, Result};

pub fn write_count_csv<W: Write>(layers: &[CountLayer], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| LppError::Config(format!("csv write failed: {e}"));
    w.write_record(["level", "endpoint", "k", "count", "backend"]).map_err(io)?;
    for layer in layers {
        let backend = if layer.is_exact() { "exact" } else { "log10" };
        let level = layer.level().to_string();
        for (v, column) in layer.entries() {
            let endpoint = v.to_string();
            for (k, c) in column.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let count = match c {
                    CountValue::Exact(x) => x.to_string(),
                    CountValue::Log(_) => format!("{:.15}", c.log10()),
                };
                w.write_record([level.as_str(), endpoint.as_str(), &k.to_string(), &count, backend])
                    .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| LppError::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}
