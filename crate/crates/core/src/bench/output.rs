use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Method, PhaseRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "method,p,k,l,T,C,lambda,reps,p_exact,p_std,err_mean,err_std,p_exact_last_task,master_seed";

/// `printf("%g")` with six significant digits.
pub fn format_g6(x: f64) -> String {
    const PREC: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Exponent after rounding to PREC digits decides the notation.
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row(r: &PhaseRecord) -> String {
    let last = r.p_exact_last_task.map(format_g6).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.method.name(),
        r.p,
        r.k,
        r.l,
        r.t,
        format_g6(r.c),
        format_g6(r.lambda),
        r.reps,
        format_g6(r.p_exact),
        format_g6(r.p_std),
        format_g6(r.err_mean),
        format_g6(r.err_std),
        last,
        r.master_seed
    )
}

/// Header plus one LF-terminated row per record, in the given order.
pub fn write_csv(records: &[PhaseRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |line: &str| writeln!(out, "{line}").map_err(|e| Error::io(path, e));
    write(CSV_HEADER)?;
    for r in records {
        write(&row(r))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_csv`]. Fields not stored in the CSV
/// (`lambda_linf`, `nonconverged`) come back empty.
pub fn read_csv(path: &Path) -> Result<Vec<PhaseRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    let header = reader.headers().map_err(|e| Error::parse(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::parse(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let int = |j: usize| -> Result<usize> {
            field(j).parse().map_err(|_| Error::parse(path, format!("line {line}: bad integer {:?}", field(j))))
        };
        let real = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| Error::parse(path, format!("line {line}: bad number {:?}", field(j))))
        };
        let method = Method::parse(field(0))
            .ok_or_else(|| Error::parse(path, format!("line {line}: unknown method {:?}", field(0))))?;
        let last = if field(12).is_empty() { None } else { Some(real(12)?) };
        out.push(PhaseRecord {
            method,
            p: int(1)?,
            k: int(2)?,
            l: int(3)?,
            t: int(4)?,
            c: real(5)?,
            lambda: real(6)?,
            reps: int(7)?,
            p_exact: real(8)?,
            p_std: real(9)?,
            err_mean: real(10)?,
            err_std: real(11)?,
            p_exact_last_task: last,
            master_seed: field(13)
                .parse()
                .map_err(|_| Error::parse(path, format!("line {line}: bad seed {:?}", field(13))))?,
            lambda_linf: None,
            nonconverged: 0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (19.98337, "19.9834"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (0.05, "0.05"),
            (999999.5, "1e+06"),
            (0.1357318, "0.135732"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }

    fn record(method: Method, last: Option<f64>) -> PhaseRecord {
        PhaseRecord {
            method,
            p: 100,
            k: 5,
            l: 5,
            t: 91,
            c: 19.983374,
            lambda: 0.0318,
            reps: 100,
            p_exact: 0.97,
            p_std: (0.97f64 * 0.03 / 100.0).sqrt(),
            err_mean: 0.0123456789,
            err_std: 0.004,
            p_exact_last_task: last,
            master_seed: 42,
            lambda_linf: None,
            nonconverged: 0,
        }
    }

    #[test]
    fn empty_list_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_csv(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_within_formatting_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let recs = vec![record(Method::Meta, None), record(Method::DirtyModel, Some(0.25))];
        write_csv(&recs, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.lines().nth(1).unwrap().contains(",,42"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.method, b.method);
            assert_eq!((a.p, a.k, a.l, a.t, a.reps, a.master_seed), (b.p, b.k, b.l, b.t, b.reps, b.master_seed));
            for (x, y) in [(a.c, b.c), (a.lambda, b.lambda), (a.p_exact, b.p_exact), (a.p_std, b.p_std), (a.err_mean, b.err_mean), (a.err_std, b.err_std)] {
                assert!((x - y).abs() <= 5e-6 * x.abs(), "{x} vs {y}");
            }
            assert_eq!(a.p_exact_last_task, b.p_exact_last_task);
        }
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let err = write_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.is_io());
    }
}
