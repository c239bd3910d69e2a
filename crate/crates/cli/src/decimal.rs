//! Plain decimal rendering with a fixed number of significant digits.

/// Formats `x` in positional notation (no exponent) rounded to `digits`
/// significant digits, trailing zeros kept.
pub fn significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if digits > 1 { format!("0.{}", "0".repeat(digits - 1)) } else { "0".into() };
    }
    // Scientific formatting does the correct rounding; shift the point after.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let body: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let out = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), body)
    } else if point as usize >= body.len() {
        format!("{}{}", body, "0".repeat(point as usize - body.len()))
    } else {
        let (int, frac) = body.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{out}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(significant(0.125, 12), "0.125000000000");
        assert_eq!(significant(1.0, 3), "1.00");
        assert_eq!(significant(-2.5e-5, 3), "-0.0000250");
        assert_eq!(significant(123456.0, 3), "123000");
        assert_eq!(significant(9.99996, 5), "10.000");
        assert_eq!(significant(0.0, 4), "0.000");
        assert_eq!(significant(std::f64::consts::PI, 12), "3.14159265359");
    }

    #[test]
    fn round_trips_at_twelve_digits() {
        let mut x = 1e-40f64;
        while x < 1e10 {
            for v in [x, -x * 1.37, x * 7.77777] {
                let s = significant(v, 12);
                assert!(!s.contains('e'));
                let back: f64 = s.parse().unwrap();
                let rounded: f64 = format!("{v:.11e}").parse().unwrap();
                assert_eq!(back, rounded, "{v} -> {s}");
            }
            x *= 3.3;
        }
    }
}
