//! Numeric output format shared by every emitter: 12 significant digits.

/// Significant digits used for all printed floating-point output.
pub const SIG_DIGITS: usize = 12;

/// Rounds `x` to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Formats `x` like C's `%.12g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros trimmed.
pub fn g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
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

/// Rounds every float inside a JSON value to [`SIG_DIGITS`] significant digits.
pub fn round_json(value: &mut serde_json::Value) {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_json_reaches_nested_floats() {
        let mut v = serde_json::json!({"a": [0.1 + 0.2, 3], "b": {"c": std::f64::consts::PI}});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.3,3],"b":{"c":3.14159265359}}"#);
    }

    #[test]
    fn g12_matches_printf_style() {
        assert_eq!(g12(4.0), "4");
        assert_eq!(g12(-0.5), "-0.5");
        assert_eq!(g12(2.0 * std::f64::consts::SQRT_2), "2.82842712475");
        assert_eq!(g12(1e-9), "1e-9");
        assert_eq!(g12(1.5e13), "1.5e13");
        assert_eq!(g12(0.0001), "0.0001");
        assert_eq!(g12(0.0), "0");
    }

    #[test]
    fn round_sig_is_idempotent() {
        let x = std::f64::consts::FRAC_1_SQRT_2;
        let r = round_sig(x);
        assert_eq!(r.to_string(), "0.707106781187");
        assert_eq!(round_sig(r), r);
    }
}
