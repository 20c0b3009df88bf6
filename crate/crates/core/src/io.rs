//! Report formatting: numbers with 12 significant digits and infinities as
//! the sentinels `"+inf"` / `"-inf"`.

use serde_json::Value;

use crate::extended::Extended;
use crate::scalar::Scalar;

/// Number of significant digits written to reports.
pub const SIG_DIGITS: usize = 12;

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Decimal rendering used in CSV output.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        let r = round_sig(x);
        if r == 0.0 {
            "0".into()
        } else {
            format!("{r}")
        }
    }
}

pub fn fmt_ext<T: Scalar>(x: Extended<T>) -> String {
    fmt_num(x.to_float().as_f64())
}

/// JSON number, or a sentinel string for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
    } else {
        Value::String(fmt_num(x))
    }
}

pub fn ext<T: Scalar>(x: Extended<T>) -> Value {
    num(x.to_float().as_f64())
}

pub fn nums<T: Scalar>(xs: &[T]) -> Value {
    Value::Array(xs.iter().map(|x| num(x.as_f64())).collect())
}

/// Reads a number written by [`num`], accepting the infinity sentinels.
pub fn parse_num(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "+inf" | "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => s.parse().ok(),
        },
        _ => None,
    }
}
