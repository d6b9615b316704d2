//! Convergence traces and their CSV form.

use std::io::Write;

/// Version tag written as the first header cell.
pub const SCHEMA: &str = "schema=1";
pub const HEADER: [&str; 10] = [
    SCHEMA, "method", "k", "epochs", "f_sub", "grad_norm", "W", "V", "dist", "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub method: String,
    pub k: usize,
    /// Fresh component evaluations divided by `n`.
    pub epochs: f64,
    /// `f(x^k) - f*`, floored at zero.
    pub f_sub: f64,
    pub grad_norm: f64,
    pub w: Option<f64>,
    pub v: Option<f64>,
    pub dist: f64,
    pub wall_ms: f64,
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

impl TraceRecord {
    fn fields(&self) -> [String; 10] {
        [
            "1".into(),
            self.method.clone(),
            self.k.to_string(),
            num(self.epochs),
            num(self.f_sub),
            num(self.grad_norm),
            self.w.map(num).unwrap_or_default(),
            self.v.map(num).unwrap_or_default(),
            num(self.dist),
            format!("{:.3}", self.wall_ms),
        ]
    }
}

/// Writes the header and every record. Numbers use the shortest
/// round-trip exponent form, so equal traces give equal bytes.
pub fn write_csv<'a, W: Write>(out: W, records: impl IntoIterator<Item = &'a TraceRecord>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Drops the trailing `wall_ms` column, for comparing runs.
pub fn without_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = TraceRecord {
            method: "sn".into(),
            k: 3,
            epochs: 0.3,
            f_sub: 1.5e-7,
            grad_norm: 2.0,
            w: Some(0.25),
            v: None,
            dist: 0.0,
            wall_ms: 12.34567,
        };
        let text = to_csv_string([&r]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "schema=1,method,k,epochs,f_sub,grad_norm,W,V,dist,wall_ms");
        assert_eq!(lines.next().unwrap(), "1,sn,3,3e-1,1.5e-7,2e0,2.5e-1,,0e0,12.346");
        assert_eq!(without_timing(&text).lines().nth(1).unwrap(), "1,sn,3,3e-1,1.5e-7,2e0,2.5e-1,,0e0");
    }
}
