//! Locale-independent number formatting for CSV and report output.

/// Six significant digits in fixed notation; `inf`/`-inf`/`nan` spelled out.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into the next decade (9.999996 -> 10.00000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if decimals > 0 && rounded.abs() >= 10f64.powi(magnitude + 1) {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

/// Three decimals, the precision of the published throughput table.
pub fn fixed3(x: f64) -> String {
    format!("{x:.3}")
}
