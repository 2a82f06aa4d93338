//! Parsing of `κL` values written as multiples of π.

use std::f64::consts::PI;

/// Accepts `4pi`, `4*pi`, `4π`, `pi`, `0.5pi` and plain floats.
pub fn parse_kappa_l(raw: &str) -> Result<f64, String> {
    let s = raw.trim().to_ascii_lowercase().replace('π', "pi");
    let value = if let Some(prefix) = s.strip_suffix("pi") {
        let prefix = prefix.trim().trim_end_matches('*').trim();
        let factor = if prefix.is_empty() {
            1.0
        } else {
            prefix
                .parse::<f64>()
                .map_err(|_| format!("cannot parse κL value '{raw}'"))?
        };
        factor * PI
    } else {
        s.parse::<f64>()
            .map_err(|_| format!("cannot parse κL value '{raw}'"))?
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("κL must be positive, got '{raw}'"));
    }
    Ok(value)
}
