//! Number formatting shared by the CSV writers.

/// Significant digits written to CSV files.
pub const SIG_DIGITS: usize = 12;

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e12)`.
pub fn fmt_num(x: f64) -> String {
    fmt_sig(x, SIG_DIGITS)
}

pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let precision = digits.saturating_sub(1);
    // round first so that e.g. 9.9999999999999e2 lands in the right decade
    let sci = format!("{:.*e}", precision, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (precision as i32 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_num(0.12), "0.12");
        assert_eq!(fmt_num(1.0 - 0.5 - 0.45), "0.05");
        assert_eq!(fmt_num(264.0), "264");
        assert_eq!(fmt_num(-0.75), "-0.75");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.7890123456), "123456.789012");
        assert_eq!(fmt_num(1e-7), "1e-07");
        assert_eq!(fmt_num(2.5e13), "2.5e+13");
        assert_eq!(fmt_num(999999999999.9), "1e+12");
        assert_eq!(fmt_num(0.0001), "0.0001");
    }
}
