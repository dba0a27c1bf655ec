//! Serialization policy: every floating-point value leaving the toolkit is
//! rounded to 9 significant digits so repeated runs diff byte-identically.

/// Format with 9 significant digits, trimming the exponent form for readability.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{:.8e}", x);
    // Round-trip through the rounded value so "0.044" prints as 0.044, not 4.4e-2.
    let rounded: f64 = s.parse().unwrap_or(x);
    let abs = rounded.abs();
    if (1e-4..1e9).contains(&abs) {
        let mut out = format!("{:.12}", rounded);
        // Keep at most 9 significant digits worth of decimals.
        let digits_before = if abs >= 1.0 { (abs.log10().floor() as i32 + 1).max(1) } else { 0 };
        let decimals = (9 - digits_before).clamp(0, 12) as usize;
        out = format!("{:.*}", decimals, rounded);
        if out.contains('.') {
            while out.ends_with('0') {
                out.pop();
            }
            if out.ends_with('.') {
                out.pop();
            }
        }
        out
    } else {
        s
    }
}

/// Round to the same 9-significant-digit policy but keep the value numeric
/// (for JSON payloads).
pub fn sig9_value(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.8e}", x).parse().unwrap_or(x)
}

/// Two-column CSV with a header.
pub fn write_xy_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (x, y) in rows {
        out.push_str(&format!("{},{}\n", sig9(*x), sig9(*y)));
    }
    out
}
