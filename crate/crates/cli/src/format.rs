use std::fmt;

/// Parse failure of a comma-separated number list; `position` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListError {
    pub position: usize,
    pub token: String,
}

impl fmt::Display for ListError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entry {} ({:?}) is not a finite number",
            self.position, self.token
        )
    }
}

impl std::error::Error for ListError {}

/// "0,0,1,1" -> [0, 0, 1, 1].
pub fn parse_list(s: &str) -> Result<Vec<f64>, ListError> {
    s.split(',')
        .enumerate()
        .map(|(i, tok)| {
            let t = tok.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ListError {
                    position: i + 1,
                    token: t.to_string(),
                })
        })
        .collect()
}

/// Integers as integers, everything else with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}
