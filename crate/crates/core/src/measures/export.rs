use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interval::Grid;
use crate::scalar::{to_f64, Scalar};

use super::{ClosedForm, Measure};

/// `{kind, n?, cells?, atoms?, label?}`.
pub fn measure_json<T: Scalar>(mu: &Measure<T>) -> Value {
    match mu {
        Measure::Histogram(c) => json!({
            "kind": "histogram",
            "n": c.len(),
            "cells": c.iter().map(|m| to_f64(*m)).collect::<Vec<_>>(),
        }),
        Measure::Atomic(a) => json!({
            "kind": "atomic",
            "atoms": a.iter().map(|(x, m)| [to_f64(*x), to_f64(*m)]).collect::<Vec<_>>(),
        }),
        Measure::ClosedForm(cf) => json!({ "kind": "closed_form", "label": cf.label() }),
    }
}

pub fn measure_from_json(v: &Value) -> Result<Measure<f64>> {
    let bad = |what: &str| Error::InvalidArgument(format!("measure JSON: {what}"));
    match v.get("kind").and_then(Value::as_str) {
        Some("histogram") => {
            let cells = v.get("cells").and_then(Value::as_array).ok_or_else(|| bad("missing cells"))?;
            Measure::histogram(cells.iter().map(|c| c.as_f64().ok_or_else(|| bad("cell"))).collect::<Result<_>>()?)
        }
        Some("atomic") => {
            let atoms = v.get("atoms").and_then(Value::as_array).ok_or_else(|| bad("missing atoms"))?;
            let parsed = atoms
                .iter()
                .map(|a| match a.as_array().map(|p| (p.first().and_then(Value::as_f64), p.get(1).and_then(Value::as_f64))) {
                    Some((Some(x), Some(m))) => Ok((x, m)),
                    _ => Err(bad("atom must be [x, mass]")),
                })
                .collect::<Result<Vec<_>>>()?;
            Measure::atomic(parsed)
        }
        Some("closed_form") => match v.get("label").and_then(Value::as_str) {
            Some("lebesgue") => Ok(Measure::lebesgue()),
            Some("gauss_mu0") => Ok(Measure::gauss_mu0()),
            Some(l) if l.starts_with("riesz_partial(") && l.ends_with(')') => {
                let n = l["riesz_partial(".len()..l.len() - 1].parse().map_err(|_| bad("riesz order"))?;
                Ok(Measure::ClosedForm(ClosedForm::RieszPartial(n)))
            }
            _ => Err(bad("unknown closed-form label")),
        },
        _ => Err(bad("unknown kind")),
    }
}

/// CSV with header `x_midpoint,density` and any extra named columns.
pub fn density_csv<T: Scalar>(density: &[T], extra: &[(&str, Vec<f64>)]) -> String {
    let grid = Grid::new(density.len());
    let mut s = String::from("x_midpoint,density");
    for (name, _) in extra {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, d) in density.iter().enumerate() {
        s.push_str(&format!("{:.16e},{:.16e}", to_f64(grid.midpoint::<T>(i)), to_f64(*d)));
        for (_, col) in extra {
            s.push_str(&format!(",{:.16e}", col[i]));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        for mu in [
            Measure::histogram(vec![0.25, 0.75]).unwrap(),
            Measure::atomic(vec![(0.1, 0.5), (0.7, 0.5)]).unwrap(),
            Measure::riesz_partial(4),
            Measure::gauss_mu0(),
        ] {
            let back = measure_from_json(&measure_json(&mu)).unwrap();
            assert_eq!(back, mu);
        }
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let s = density_csv(&[1.0_f64 / 3.0, 2.0], &[]);
        let line = s.lines().nth(1).unwrap();
        assert_eq!(line, "2.5000000000000000e-1,3.3333333333333331e-1");
    }
}
