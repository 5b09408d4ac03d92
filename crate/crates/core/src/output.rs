//! Fixed-format number rendering for reproducible text output.

/// `x` in fixed notation with 12 significant digits; non-finite values as
/// `inf`, `-inf`, `nan`.
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

/// `x` in fixed notation with `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    // Round first so that 9.99…→10 moves the decimal point correctly.
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("valid float");
    let exp = rounded.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(-5.0), "-5.00000000000");
        assert_eq!(sig12(0.0), "0.00000000000");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(123456.789), "123456.789000");
        assert_eq!(sig12(9.9999999999999), "10.0000000000");
        assert_eq!(sig12(1.5e-4), "0.000150000000000");
        assert_eq!(sig12(1e15), "1000000000000000");
        assert_eq!(sig12(f64::NEG_INFINITY), "-inf");
        assert_eq!(sig(2.0, 3), "2.00");
    }
}
