use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

use super::sweep::MetricRecord;

pub const CSV_HEADER: &str = "predictor,velocity_kmh,snr_db,paths,mse,eval_samples,seed";

/// C-style `%.6e`: `6.211000e-03`, `-1.000000e+01`, `nan`.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Rows sorted by velocity, then table order of the predictor, then SNR; LF endings.
pub fn format_csv(records: &[MetricRecord]) -> String {
    let mut rows: Vec<&MetricRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.velocity_kmh
            .total_cmp(&b.velocity_kmh)
            .then(a.predictor.cmp(&b.predictor))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.predictor.name(),
            format_sci(r.velocity_kmh),
            format_sci(r.snr_db),
            r.paths,
            format_sci(r.mse),
            r.eval_samples,
            r.seed
        )
        .unwrap();
    }
    out
}

pub fn write_csv(records: &[MetricRecord], path: &Path) -> Result<()> {
    std::fs::write(path, format_csv(records))?;
    Ok(())
}
