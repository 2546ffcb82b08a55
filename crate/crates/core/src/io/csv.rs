//! Density fields as plain CSV.
//!
//! Line 1 is a comment carrying the grid,
//! `# x_min=-60,x_max=60,nx=1201,t_min=0,t_max=25,nt=600`, followed by one
//! line of `nx` values per time row in increasing time. Values use the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::{DensityField, SpacetimeGrid};

pub fn format_value(v: f64, out: &mut String) {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        write!(out, "{v}").unwrap();
    } else {
        write!(out, "{v:e}").unwrap();
    }
}

pub fn encode_csv(density: &DensityField) -> String {
    let g = density.grid();
    let mut s = String::with_capacity(density.values().len() * 24 + 64);
    s.push_str("# ");
    let header = [
        ("x_min", g.x_min),
        ("x_max", g.x_max),
        ("nx", g.nx as f64),
        ("t_min", g.t_min),
        ("t_max", g.t_max),
        ("nt", g.nt as f64),
    ];
    for (i, (name, v)) in header.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(name);
        s.push('=');
        format_value(*v, &mut s);
    }
    s.push('\n');
    for row in density.rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            format_value(*v, &mut s);
        }
        s.push('\n');
    }
    s
}

pub fn write_csv(density: &DensityField, path: &Path) -> Result<()> {
    std::fs::write(path, encode_csv(density)).map_err(|e| Error::io(path, e))
}

pub fn decode_csv(text: &str) -> Result<DensityField> {
    let bad = |line: usize, m: String| Error::schema(format!("line {line}"), m);
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| bad(1, "expected a `# x_min=...` header".into()))?;
    let mut fields = [None; 6];
    const NAMES: [&str; 6] = ["x_min", "x_max", "nx", "t_min", "t_max", "nt"];
    for part in header.trim().split(',') {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| bad(1, format!("malformed header field `{part}`")))?;
        let idx = NAMES
            .iter()
            .position(|n| *n == name.trim())
            .ok_or_else(|| bad(1, format!("unknown header field `{name}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad(1, format!("bad number `{value}`")))?;
        fields[idx] = Some(v);
    }
    let mut vals = [0.0; 6];
    for (i, f) in fields.iter().enumerate() {
        vals[i] = f.ok_or_else(|| bad(1, format!("missing header field `{}`", NAMES[i])))?;
    }
    let count = |v: f64, name: &str| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(bad(1, format!("`{name}` must be a count, got {v}")))
        }
    };
    let grid = SpacetimeGrid::new(vals[0], vals[1], count(vals[2], "nx")?, vals[3], vals[4], count(vals[5], "nt")?)?;

    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(n, format!("bad number `{cell}`")))?,
            );
        }
        if values.len() - before != grid.nx {
            return Err(bad(n, format!("expected {} values, got {}", grid.nx, values.len() - before)));
        }
        rows += 1;
    }
    if rows != grid.nt {
        return Err(bad(rows + 1, format!("expected {} rows, got {rows}", grid.nt)));
    }
    DensityField::new(grid, values)
}

pub fn read_csv(path: &Path) -> Result<DensityField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_2x2() {
        let g = SpacetimeGrid::new(-1.0, 1.0, 2, 0.0, 10.0, 2).unwrap();
        let d = DensityField::new(g, vec![0.0; 4]).unwrap();
        assert_eq!(
            encode_csv(&d),
            "# x_min=-1,x_max=1,nx=2,t_min=0,t_max=10,nt=2\n0,0\n0,0\n"
        );
    }

    #[test]
    fn tiny_and_huge_values_stay_short() {
        let mut s = String::new();
        format_value(1e-300, &mut s);
        s.push(' ');
        format_value(0.125, &mut s);
        s.push(' ');
        format_value(3e20, &mut s);
        assert_eq!(s, "1e-300 0.125 3e20");
    }

    #[test]
    fn malformed_input() {
        assert!(decode_csv("0,0\n").is_err());
        assert!(decode_csv("# x_min=-1,x_max=1,nx=2,t_min=0,t_max=1,nt=2\n0,0\n").is_err());
        assert!(decode_csv("# x_min=-1,x_max=1,nx=2,t_min=0,t_max=1,nt=2\n0,0\n0,0,0\n").is_err());
        assert!(decode_csv("# x_min=-1,x_max=1,nx=2,t_min=0,t_max=1\n0,0\n0,0\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(vals in prop::collection::vec(0.0f64..1e3, 12), scale in -300i32..300) {
            let g = SpacetimeGrid::new(-0.3, 7.1, 4, 0.25, 1.0 / 3.0, 3).unwrap();
            let vals: Vec<f64> = vals.iter().map(|v| v * 10f64.powi(scale)).collect();
            prop_assume!(vals.iter().all(|v| v.is_finite()));
            let d = DensityField::new(g, vals).unwrap();
            let back = decode_csv(&encode_csv(&d)).unwrap();
            prop_assert_eq!(back.grid(), d.grid());
            prop_assert!(back.values().iter().zip(d.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
