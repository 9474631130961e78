//! CSV output with six significant digits.

use std::io::{self, Write};

use super::ResultRow;

pub const CSV_HEADER: &str = "sweep_var,sweep_value,scheme,replicates,mean_slots,se_slots,stage1,stage2,stage3,bp,acc_rate_min,energy_mean_per_type";

const SIG_DIGITS: i32 = 6;

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Shortest rendering with at most six significant digits, in the style of `%g`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..SIG_DIGITS).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let energy: Vec<String> = r
            .energy_mean_per_type
            .iter()
            .map(|&e| format_sig(e))
            .collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            quote(&r.sweep_var),
            quote(&r.sweep_value),
            quote(&r.scheme),
            r.replicates,
            format_sig(r.mean_slots),
            format_sig(r.se_slots),
            format_sig(r.stage1),
            format_sig(r.stage2),
            format_sig(r.stage3),
            format_sig(r.bp),
            format_sig(r.acc_rate_min),
            energy.join(";"),
        )?;
    }
    Ok(())
}
