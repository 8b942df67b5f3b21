use crate::error::{Error, Result};

/// Fraction of plates whose predicted text equals the truth exactly.
/// With `merge_1_i`, `1` and `I` count as the same symbol.
pub fn recognition_rate<S: AsRef<str>, T: AsRef<str>>(results: &[(S, T)], merge_1_i: bool) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Invalid("recognition rate of an empty result list".into()));
    }
    let correct = results
        .iter()
        .filter(|(p, t)| texts_match(p.as_ref(), t.as_ref(), merge_1_i))
        .count();
    Ok(correct as f64 / results.len() as f64)
}

pub fn texts_match(predicted: &str, truth: &str, merge_1_i: bool) -> bool {
    let canon = |s: &str| -> String {
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'O' => '0',
                'I' if merge_1_i => '1',
                u => u,
            })
            .collect()
    };
    canon(predicted) == canon(truth)
}

/// Arithmetic mean and sample standard deviation (`n - 1` denominator,
/// zero for a single run).
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Invalid("no runs to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
