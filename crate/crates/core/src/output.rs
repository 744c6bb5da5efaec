//! Text formatting shared by the CSV emitters.

/// Formats a float with 17 significant digits (`1.2345678901234567e-2`).
///
/// Non-finite values become `inf`, `-inf` and `NaN`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Integer percent, as shown in summary tables.
pub fn percent(x: f64) -> i64 {
    (100.0 * x).round() as i64
}

/// Writes `header` and `rows` as CSV into a string.
pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
