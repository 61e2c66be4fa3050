//! Number formatting shared by the text, CSV and golden outputs.

/// Shortest decimal with at most 12 significant digits, like C's `%.12g`.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        let s = format!("{x:.prec$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    }
}

/// `sig12` for an optional value, `NA` when undefined.
pub fn sig12_or_na(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), sig12)
}
