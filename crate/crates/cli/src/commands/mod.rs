pub mod betamap;
pub mod democracy;
pub mod ingest;
pub mod midclass;
pub mod simulate;
pub mod synth;
pub mod timeseries;

use midclass_core::{Objective, QuantileInterval};

/// `p,q` on the percent scale.
pub fn parse_interval(s: &str) -> Result<QuantileInterval, String> {
    let (p, q) = parse_pair::<u32>(s)?;
    QuantileInterval::new(p, q).map_err(|e| e.to_string())
}

pub fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated values, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("`{v}` is not a valid number"));
    Ok((parse(a)?, parse(b)?))
}

pub fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: midclass_core::Error| e.to_string())
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / mean
}
