//! C-style float formatting for the text dump formats.
//!
//! The mesh/vector dumps use `%.17g` (shortest 17-significant-digit form,
//! round-trip safe for f64) and the study CSV uses `%.10e`. Rust's `{:e}`
//! differs from C in exponent spelling, so both are reimplemented here and
//! pinned by tests.

/// `%.17g` equivalent.
pub fn g17(x: f64) -> String {
    gfmt(x, 17)
}

/// `%.Pg` equivalent: P significant digits, fixed or scientific notation
/// depending on the decimal exponent, trailing zeros stripped.
pub fn gfmt(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = sig.max(1) as i32;
    // Render once in scientific form to learn the exponent after rounding.
    let sci = format!("{:.*e}", (p - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= p {
        format!("{}e{}{:02}", strip_zeros(mantissa), sign_char(exp), exp.abs())
    } else {
        let decimals = (p - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x))
    }
}

/// `%.Pe` equivalent (two-digit, signed exponent).
pub fn efmt(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", decimals, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    format!("{}e{}{:02}", mantissa, sign_char(exp), exp.abs())
}

fn sign_char(exp: i32) -> char {
    if exp < 0 {
        '-'
    } else {
        '+'
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_pins() {
        assert_eq!(g17(0.0), "0");
        assert_eq!(g17(0.5), "0.5");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(-2.25), "-2.25");
        assert_eq!(g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(g17(1e20), "1e+20");
        assert_eq!(g17(0.0001), "0.0001");
        assert_eq!(g17(0.1), "0.10000000000000001");
    }

    #[test]
    fn e10_pins() {
        assert_eq!(efmt(0.0, 10), "0.0000000000e+00");
        assert_eq!(efmt(1.5, 10), "1.5000000000e+00");
        assert_eq!(efmt(-0.0325, 10), "-3.2500000000e-02");
        assert_eq!(efmt(6.02214076e23, 10), "6.0221407600e+23");
    }

    #[test]
    fn g17_round_trips_f64() {
        let samples = [
            1.0,
            -1.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            1e-300,
            3.5e300,
            6.25e-2,
            123456789.123456789,
        ];
        for &x in &samples {
            let back: f64 = g17(x).parse().unwrap();
            assert_eq!(back, x, "round trip failed for {x}");
        }
    }
}
