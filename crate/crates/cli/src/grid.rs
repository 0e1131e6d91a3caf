//! Sweep specifications: `name=start:stop:step[unit]`, `name=a,b,c` or a
//! bare `name` with a built-in grid.

use serde::{Deserialize, Serialize};
use swipt_core::scenario::parse_quantity;

use crate::CliError;

/// A swept parameter with its values already in linear units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vary {
    pub name: String,
    pub values: Vec<f64>,
}

fn default_grid(name: &str) -> Option<&'static str> {
    Some(match name {
        "Pt" | "P_T" | "power_budget" => "50:70:5dB",
        "R" | "rate" | "rate_target" => "1:5:1",
        "eta" | "eh_target" => "-20:0:5dB",
        "L" | "n_eve" => "1:4:1",
        "rho" => "0.02:0.2:0.02",
        _ => return None,
    })
}

fn split_unit(text: &str) -> (&str, &str) {
    let t = text.trim();
    let at = t
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(t.len());
    (t[..at].trim(), t[at..].trim())
}

fn number(text: &str, whole: &str) -> Result<f64, CliError> {
    text.parse()
        .map_err(|_| CliError::Config(format!("bad number `{text}` in sweep `{whole}`")))
}

fn linear(v: f64, unit: &str) -> Result<f64, CliError> {
    parse_quantity(&format!("{v} {unit}")).map_err(|e| CliError::Config(e.to_string()))
}

/// Drops the representation noise that `start + k * step` accumulates.
fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap_or(v)
}

impl Vary {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (name, body) = match spec.split_once('=') {
            Some((n, b)) => (n.trim(), b.trim().to_string()),
            None => {
                let n = spec.trim();
                let grid = default_grid(n).ok_or_else(|| {
                    CliError::Config(format!("`{n}` has no default grid; give `{n}=start:stop:step`"))
                })?;
                (n, grid.to_string())
            }
        };
        if name.is_empty() {
            return Err(CliError::Config(format!("sweep `{spec}` has no parameter name")));
        }
        let values = if body.contains(':') {
            Self::range(&body, spec)?
        } else {
            body.split(',')
                .map(|v| parse_quantity(v).map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("sweep `{spec}` is empty")));
        }
        Ok(Self { name: name.to_string(), values })
    }

    fn range(body: &str, whole: &str) -> Result<Vec<f64>, CliError> {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!("sweep `{whole}` needs start:stop:step")));
        }
        // One unit applies to the whole range; it may be written on any part.
        let mut unit = "";
        let mut nums = [0.0; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            let (n, u) = split_unit(part);
            if !u.is_empty() {
                if !unit.is_empty() && unit != u {
                    return Err(CliError::Config(format!("mixed units in sweep `{whole}`")));
                }
                unit = u;
            }
            *slot = number(n, whole)?;
        }
        let [start, stop, step] = nums;
        if !(step > 0.0) || stop < start {
            return Err(CliError::Config(format!(
                "sweep `{whole}` needs step > 0 and stop >= start"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(CliError::Config(format!("sweep `{whole}` has too many points")));
        }
        (0..=n).map(|k| linear(tidy(start + k as f64 * step), unit)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_range() {
        let v = Vary::parse("R=1:6:0.5").unwrap();
        assert_eq!(v.name, "R");
        assert_eq!(v.values.len(), 11);
        assert_eq!(v.values[1], 1.5);
        assert_eq!(*v.values.last().unwrap(), 6.0);
    }

    #[test]
    fn db_range_is_converted() {
        let v = Vary::parse("Pt=10:30:10dB").unwrap();
        assert_eq!(v.values, vec![10.0, 100.0, 1000.0]);
        let m = Vary::parse("eta=0dBm:0:1").unwrap();
        assert!((m.values[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn list_and_default() {
        let v = Vary::parse("L=1,2,3").unwrap();
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(Vary::parse("Pt").unwrap().values.len(), 5);
        assert_eq!(Vary::parse("rho").unwrap().values[2], 0.06);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["R=1:2", "R=3:1:1", "R=1:2:0", "R=a:2:1", "=1:2:1", "N_T", "Pt=1dB:2dBm:1"] {
            assert!(Vary::parse(bad).is_err(), "{bad}");
        }
    }
}
