//! Response files for `estimate`.
//!
//! One observation per line, fields separated by commas or whitespace.
//! Blank lines and `#` comments are skipped, and a first line with no
//! numeric field is taken as a header. A line is either the response alone,
//! in which case covariates come from the model's default design, or the
//! response followed by the model's design row.

use misspec_core::models::{Design, Model};

use crate::failure::{CliResult, Failure};

pub fn parse_data(text: &str, model: &dyn Model) -> CliResult<(Vec<f64>, Design)> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut seen_content = false;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if !seen_content && parsed.iter().all(Option::is_none) {
            seen_content = true;
            continue;
        }
        seen_content = true;
        let mut values = Vec::with_capacity(fields.len());
        for (f, v) in fields.iter().zip(&parsed) {
            match v {
                Some(v) if v.is_finite() => values.push(*v),
                _ => return Err(Failure::usage(format!("line {line_no}: '{f}' is not a finite number"))),
            }
        }
        if let Some((first_line, first)) = rows.first() {
            if first.len() != values.len() {
                return Err(Failure::usage(format!(
                    "line {line_no}: {} fields, but line {first_line} has {}",
                    values.len(),
                    first.len()
                )));
            }
        }
        rows.push((line_no, values));
    }
    if rows.is_empty() {
        return Err(Failure::usage("data file has no observations"));
    }
    for (line_no, values) in &rows {
        if !model.in_support(values[0]) {
            return Err(Failure::usage(format!(
                "line {line_no}: response {} is outside the support of {}",
                values[0],
                model.name()
            )));
        }
    }
    let n = rows.len();
    let width = rows[0].1.len();
    let row_width = model.default_design(1).row(0).len();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v[0]).collect();
    if width == 1 {
        return Ok((ys, model.default_design(n)));
    }
    if row_width > 0 && width == 1 + row_width {
        let design = Design::from_rows(rows.into_iter().map(|(_, v)| v[1..].to_vec()).collect())?;
        return Ok((ys, design));
    }
    let expected = if row_width == 0 {
        "1 field (the response)".to_string()
    } else {
        format!("1 field (the response) or {} (response and design row)", 1 + row_width)
    };
    Err(Failure::usage(format!(
        "line {}: {width} fields; {} expects {expected}",
        rows[0].0,
        model.name()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use misspec_core::models::model_by_name;

    #[test]
    fn header_comments_and_blank_lines() {
        let m = model_by_name("weibull-vs-exp").unwrap();
        let (ys, d) = parse_data("y\n# note\n\n1.5\n2.0 # trailing\n", m.as_ref()).unwrap();
        assert_eq!(ys, vec![1.5, 2.0]);
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn errors_name_the_line() {
        let m = model_by_name("weibull-vs-exp").unwrap();
        let e = parse_data("1.0\n2.0\nabc\n", m.as_ref()).unwrap_err();
        assert!(e.message.starts_with("line 3:"), "{e}");
        let e = parse_data("1.0\n-2.0\n", m.as_ref()).unwrap_err();
        assert!(e.message.starts_with("line 2:"), "{e}");
        let e = parse_data("1.0\n2.0 3.0\n", m.as_ref()).unwrap_err();
        assert!(e.message.starts_with("line 2:"), "{e}");
        assert!(parse_data("# nothing\n", m.as_ref()).is_err());
    }

    #[test]
    fn explicit_design_rows() {
        let m = model_by_name("linreg-quadratic").unwrap();
        let w = m.default_design(1).row(0).len();
        let line = std::iter::once("0.5".to_string())
            .chain((0..w).map(|i| format!("{}", i as f64 + 1.0)))
            .collect::<Vec<_>>()
            .join(",");
        let text = format!("{line}\n{line}\n{line}\n");
        let (ys, d) = parse_data(&text, m.as_ref()).unwrap();
        assert_eq!(ys.len(), 3);
        assert_eq!(d.row(2).len(), w);
        let (_, d) = parse_data("0.5\n0.7\n0.1\n", m.as_ref()).unwrap();
        assert_eq!(d, m.default_design(3));
    }
}
