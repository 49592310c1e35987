//! Small shared file helpers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats like C's `%.17g`: shortest of fixed/scientific, 17 significant
/// digits, trailing zeros trimmed. Round-trips every finite `f64`.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{v:.*}", (16 - exp) as usize);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes to a sibling temp file and renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g17() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.25), "-2.25");
        assert_eq!(format_float(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(123456.0), "123456");
        assert_eq!(format_float(0.0), "0");
    }

    proptest! {
        #[test]
        fn round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = format_float(v);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
