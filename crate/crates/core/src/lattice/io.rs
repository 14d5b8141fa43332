use std::fmt::Write as _;

use super::config::Configuration;
use crate::error::{Error, Result};

pub fn to_json(u: &Configuration) -> Result<String> {
    Ok(serde_json::to_string_pretty(u)?)
}

pub fn from_json(text: &str) -> Result<Configuration> {
    let u: Configuration = serde_json::from_str(text)?;
    // re-run the constructor checks on untrusted input
    match u.refs() {
        None => Configuration::periodic(u.domain().clone(), u.values().to_vec()),
        Some(refs) => Configuration::clamped(u.domain().clone(), u.values().to_vec(), refs.clone()),
    }
}

/// CSV `i_1,...,i_n,value` over the fundamental window, lifted values,
/// 17 significant digits.
pub fn to_csv(u: &Configuration) -> String {
    let n = u.dim();
    let mut out = String::new();
    let header: Vec<String> = (1..=n).map(|a| format!("i_{}", a)).collect();
    let _ = writeln!(out, "{},value", header.join(","));
    for site in u.domain().sites() {
        for c in &site {
            let _ = write!(out, "{},", c);
        }
        let _ = writeln!(out, "{:.16e}", u.lookup(&site));
    }
    out
}

/// Reads values written by [`to_csv`] back into the window of `template`.
pub fn values_from_csv(template: &Configuration, text: &str) -> Result<Configuration> {
    let n = template.dim();
    let mut values = template.values().to_vec();
    let mut filled = vec![false; values.len()];
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::InvalidArgument(format!("line {}: expected {} columns", line_no + 1, n + 1)));
        }
        let site: Vec<i64> = fields[..n]
            .iter()
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {}", line_no + 1, e)))?;
        let value: f64 = fields[n]
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {}", line_no + 1, e)))?;
        let idx = template
            .domain()
            .local_index(&site)
            .ok_or_else(|| Error::InvalidArgument(format!("line {}: site outside the window", line_no + 1)))?;
        values[idx] = value - template.domain().lift(&site);
        filled[idx] = true;
    }
    if let Some(idx) = filled.iter().position(|f| !f) {
        return Err(Error::InvalidArgument(format!("no value for site {:?}", template.domain().site(idx))));
    }
    template.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::config::ClampRefs;
    use crate::lattice::domain::Domain;

    fn sample() -> Configuration {
        let domain = Domain::hetero(1, 2, &[2]).unwrap();
        let values = (0..domain.len()).map(|k| 0.1 + 0.15 * k as f64 / 2.0).collect();
        let refs = ClampRefs::between(&Configuration::constant(2, 0.0), &Configuration::constant(2, 1.0));
        Configuration::clamped(domain, values, refs).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let u = sample();
        let back = from_json(&to_json(&u).unwrap()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_round_trip() {
        let u = sample();
        let csv = to_csv(&u);
        assert!(csv.starts_with("i_1,i_2,value\n"));
        let back = values_from_csv(&u, &csv).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn json_rejects_out_of_box() {
        let u = sample();
        let text = to_json(&u).unwrap().replacen("0.1,", "5.0,", 1);
        assert!(from_json(&text).is_err());
    }
}
