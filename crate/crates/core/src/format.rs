//! C `printf`-compatible number formatting for the text artifacts.

/// `%.17g`: 17 significant digits, shortest of fixed/exponent notation,
/// trailing zeros removed. Parsing the result recovers the exact `f64`.
pub fn format_g17(x: f64) -> String {
    format_g(x, 17)
}

/// `%.{precision}g`.
pub fn format_g(x: f64, precision: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    let p = precision.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let digits = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", digits, x)).to_string()
    }
}

/// `%.{precision}e`, with a sign and at least two exponent digits.
pub fn format_e(x: f64, precision: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    let sci = format!("{:.*e}", precision, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn non_finite(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
