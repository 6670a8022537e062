//! Sampled damping spectra `(f, b, k_d)`, their CSV form, and smooth
//! interpolation between samples.
//!
//! CSV layout (UTF-8, comma separated, LF line endings):
//!
//! ```text
//! freq_hz,b_ns_per_m,kd_n_per_m
//! # source: synthetic
//! 1.0000000000000000e1,4.0362516279000361e-3,1.2178338126093372e-7
//! ...
//! ```
//!
//! Lines starting with `#` are comments and may appear anywhere. A comment of
//! the form `# source: <tag>` sets the spectrum's source tag.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pchip::Pchip;

pub const CSV_HEADER: &str = "freq_hz,b_ns_per_m,kd_n_per_m";
const SOURCE_PREFIX: &str = "# source:";

/// Minimum number of rows needed by [`DampingInterpolant`].
pub const MIN_INTERP_ROWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingRow {
    pub freq_hz: f64,
    pub b_ns_per_m: f64,
    pub kd_n_per_m: f64,
}

/// Frequency-ordered table of damping coefficient and gas spring.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingSpectrum {
    rows: Vec<DampingRow>,
    source_tag: String,
}

impl DampingSpectrum {
    pub fn new(rows: Vec<(f64, f64, f64)>, source_tag: impl Into<String>) -> Result<Self> {
        let rows: Vec<DampingRow> = rows
            .into_iter()
            .map(|(freq_hz, b_ns_per_m, kd_n_per_m)| DampingRow {
                freq_hz,
                b_ns_per_m,
                kd_n_per_m,
            })
            .collect();
        validate_rows(&rows, |i| i + 1)?;
        Ok(Self {
            rows,
            source_tag: source_tag.into(),
        })
    }

    pub fn rows(&self) -> &[DampingRow] {
        &self.rows
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.freq_hz).collect()
    }

    /// `(f_min, f_max)` in Hz.
    pub fn domain(&self) -> (f64, f64) {
        (self.rows[0].freq_hz, self.rows[self.rows.len() - 1].freq_hz)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        parse_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, export_csv(self))?;
        Ok(())
    }
}

/// `row_label` maps a row position to the number reported in errors.
fn validate_rows(rows: &[DampingRow], row_label: impl Fn(usize) -> usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    for (i, r) in rows.iter().enumerate() {
        let row = row_label(i);
        if !(r.freq_hz.is_finite() && r.freq_hz > 0.0) {
            return Err(Error::Value {
                row,
                reason: format!("frequency must be finite and > 0, got {}", r.freq_hz),
            });
        }
        if !(r.b_ns_per_m.is_finite() && r.b_ns_per_m > 0.0) {
            return Err(Error::Value {
                row,
                reason: format!(
                    "damping coefficient must be finite and > 0, got {}",
                    r.b_ns_per_m
                ),
            });
        }
        if !(r.kd_n_per_m.is_finite() && r.kd_n_per_m >= 0.0) {
            return Err(Error::Value {
                row,
                reason: format!("gas spring must be finite and >= 0, got {}", r.kd_n_per_m),
            });
        }
        if i > 0 && r.freq_hz <= rows[i - 1].freq_hz {
            return Err(Error::Order {
                row,
                freq_hz: r.freq_hz,
            });
        }
    }
    Ok(())
}

/// Parse and validate a damping CSV. Rows are checked for order, never
/// re-sorted. Row numbers in errors are 1-based file line numbers.
pub fn parse_csv(reader: impl BufRead) -> Result<DampingSpectrum> {
    let mut header_seen = false;
    let mut source_tag = String::from("csv");
    let mut rows = Vec::new();
    let mut lines_of = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if let Some(tag) = line.strip_prefix(SOURCE_PREFIX) {
            source_tag = tag.trim().to_string();
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(Error::Schema(format!(
                    "line {line_no}: expected header `{CSV_HEADER}`, found `{line}`"
                )));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Schema(format!(
                "line {line_no}: expected 3 fields, found {}",
                fields.len()
            )));
        }
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse::<f64>().map_err(|_| Error::Value {
                row: line_no,
                reason: format!("`{f}` is not a number"),
            })?;
        }
        rows.push(DampingRow {
            freq_hz: vals[0],
            b_ns_per_m: vals[1],
            kd_n_per_m: vals[2],
        });
        lines_of.push(line_no);
    }
    if !header_seen {
        return Err(Error::Schema(format!("missing header `{CSV_HEADER}`")));
    }
    validate_rows(&rows, |i| lines_of[i])?;
    Ok(DampingSpectrum { rows, source_tag })
}

/// Scientific notation with 17 significant digits; parses back bit-exactly.
pub(crate) fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn export_csv(spec: &DampingSpectrum) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 * (spec.rows.len() + 2));
    writeln!(out, "{CSV_HEADER}").unwrap();
    writeln!(out, "{SOURCE_PREFIX} {}", spec.source_tag).unwrap();
    for r in &spec.rows {
        writeln!(
            out,
            "{},{},{}",
            fmt_sci(r.freq_hz),
            fmt_sci(r.b_ns_per_m),
            fmt_sci(r.kd_n_per_m)
        )
        .unwrap();
    }
    out
}

/// Smooth `b̂(f)` and `k̂_d(f)` over the table's frequency span.
///
/// `b` is interpolated as `ln b` against `ln f`, which keeps it positive;
/// `k_d` is interpolated linearly in value against `ln f` because it may be
/// zero. Both use shape-preserving cubics, so monotone stretches of the data
/// stay monotone and knots are reproduced exactly.
#[derive(Debug, Clone)]
pub struct DampingInterpolant {
    spectrum: DampingSpectrum,
    log_b: Pchip,
    kd: Pchip,
}

impl DampingInterpolant {
    pub fn new(spectrum: DampingSpectrum) -> Result<Self> {
        let n = spectrum.rows.len();
        if n < MIN_INTERP_ROWS {
            return Err(Error::TooFewRows {
                needed: MIN_INTERP_ROWS,
                got: n,
            });
        }
        let log_f: Vec<f64> = spectrum.rows.iter().map(|r| r.freq_hz.ln()).collect();
        let log_b = spectrum.rows.iter().map(|r| r.b_ns_per_m.ln()).collect();
        let kd = spectrum.rows.iter().map(|r| r.kd_n_per_m).collect();
        Ok(Self {
            log_b: Pchip::new(log_f.clone(), log_b),
            kd: Pchip::new(log_f, kd),
            spectrum,
        })
    }

    pub fn spectrum(&self) -> &DampingSpectrum {
        &self.spectrum
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spectrum.domain()
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        let (lo, hi) = self.domain();
        freq_hz >= lo && freq_hz <= hi
    }

    pub fn check_domain(&self, freq_hz: f64) -> Result<()> {
        if self.contains(freq_hz) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(Error::Domain { freq_hz, lo, hi })
        }
    }

    /// `(b, k_d)` at `freq_hz`. No extrapolation outside the table span.
    pub fn evaluate(&self, freq_hz: f64) -> Result<(f64, f64)> {
        self.check_domain(freq_hz)?;
        let rows = &self.spectrum.rows;
        if let Ok(i) = rows.binary_search_by(|r| r.freq_hz.total_cmp(&freq_hz)) {
            return Ok((rows[i].b_ns_per_m, rows[i].kd_n_per_m));
        }
        let x = freq_hz
            .ln()
            .clamp(self.log_b.knots()[0], *self.log_b.knots().last().unwrap());
        let b = self.log_b.eval(x).exp();
        let mut kd = self.kd.eval(x);
        if kd < 0.0 {
            log::warn!("interpolated k_d = {kd:e} N/m at {freq_hz} Hz clamped to 0");
            kd = 0.0;
        }
        Ok((b, kd))
    }

    pub fn damping(&self, freq_hz: f64) -> Result<f64> {
        Ok(self.evaluate(freq_hz)?.0)
    }

    pub fn spring(&self, freq_hz: f64) -> Result<f64> {
        Ok(self.evaluate(freq_hz)?.1)
    }
}

pub fn build_interpolant(spec: DampingSpectrum) -> Result<DampingInterpolant> {
    DampingInterpolant::new(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "freq_hz,b_ns_per_m,kd_n_per_m\n\
        # FEA export\n\
        1e2,4.0e-3,0\n\
        1e3,3.9e-3,1.5\n\
        # mid-table comment\n\
        1e4,3.0e-3,120.0\n\
        1e5,1.0e-3,900.0\n";

    #[test]
    fn parses_well_formed_file() {
        let s = parse_csv(GOOD.as_bytes()).unwrap();
        assert_eq!(s.rows().len(), 4);
        assert_eq!(s.source_tag(), "csv");
        assert_eq!(s.rows()[2].kd_n_per_m, 120.0);
    }

    #[test]
    fn duplicated_frequency_names_row() {
        let text = "freq_hz,b_ns_per_m,kd_n_per_m\n1,1,0\n2,1,0\n2,1,0\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Order { row, .. }) => assert_eq!(row, 4),
            other => panic!("expected order error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_schema_error() {
        let text = "1,1,0\n2,1,0\n";
        assert!(matches!(parse_csv(text.as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(parse_csv("".as_bytes()), Err(Error::Schema(_))));
        let wrong = "freq,b,kd\n1,1,0\n";
        assert!(matches!(parse_csv(wrong.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn non_positive_damping_reports_row() {
        let text = "freq_hz,b_ns_per_m,kd_n_per_m\n1,1,0\n2,-1,0\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Value { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected value error, got {other:?}"),
        }
        let zero = "freq_hz,b_ns_per_m,kd_n_per_m\n1,0,0\n";
        assert!(matches!(
            parse_csv(zero.as_bytes()),
            Err(Error::Value { row: 2, .. })
        ));
    }

    #[test]
    fn wrong_field_count_and_garbage() {
        let text = "freq_hz,b_ns_per_m,kd_n_per_m\n1,1\n";
        assert!(matches!(parse_csv(text.as_bytes()), Err(Error::Schema(_))));
        let text = "freq_hz,b_ns_per_m,kd_n_per_m\n1,abc,0\n";
        assert!(matches!(
            parse_csv(text.as_bytes()),
            Err(Error::Value { .. })
        ));
    }

    #[test]
    fn source_tag_survives_round_trip() {
        let s =
            DampingSpectrum::new(vec![(1.0, 0.1, 0.0), (3.0, 0.2 / 3.0, 1e-300)], "fea").unwrap();
        let back = parse_csv(&export_csv(&s)[..]).unwrap();
        assert_eq!(back, s);
        let text = String::from_utf8(export_csv(&s)).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn interpolant_needs_four_rows() {
        let s = DampingSpectrum::new(vec![(1.0, 1.0, 0.0), (2.0, 1.0, 0.0), (3.0, 1.0, 0.0)], "x")
            .unwrap();
        assert!(matches!(
            DampingInterpolant::new(s),
            Err(Error::TooFewRows { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn evaluate_knots_domain_and_midpoints() {
        let s = parse_csv(GOOD.as_bytes()).unwrap();
        let it = DampingInterpolant::new(s.clone()).unwrap();
        for r in s.rows() {
            assert_eq!(
                it.evaluate(r.freq_hz).unwrap(),
                (r.b_ns_per_m, r.kd_n_per_m)
            );
        }
        let (lo, hi) = it.domain();
        assert!(matches!(
            it.evaluate(lo * (1.0 - 1e-12)),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            it.evaluate(hi * (1.0 + 1e-12)),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(it.evaluate(f64::NAN), Err(Error::Domain { .. })));
        for w in s.rows().windows(2) {
            let mid = (w[0].freq_hz * w[1].freq_hz).sqrt();
            let (b, kd) = it.evaluate(mid).unwrap();
            assert!(b <= w[0].b_ns_per_m && b >= w[1].b_ns_per_m);
            assert!(kd >= w[0].kd_n_per_m && kd <= w[1].kd_n_per_m);
        }
    }
}
