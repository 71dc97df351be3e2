//! Whitespace-separated XYZ point files: `x y z [nx ny nz] [label]`.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::Real;

/// Column layouts accepted per line; the first data line fixes the layout
/// for the rest of the file.
fn layout(tokens: usize) -> Option<(bool, bool)> {
    match tokens {
        3 => Some((false, false)),
        4 => Some((false, true)),
        6 => Some((true, false)),
        7 => Some((true, true)),
        _ => None,
    }
}

/// Parses an XYZ file. Normals are re-normalized on load; labels must be
/// non-negative integers.
pub fn parse_xyz<T: Real>(bytes: &[u8]) -> Result<PointCloud<T>> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    let mut expected: Option<(bool, bool)> = None;

    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let number = idx + 1;
        let text = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(number, "line is not valid UTF-8"))?;
        let text = text.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let shape = layout(tokens.len()).ok_or_else(|| {
            Error::parse(number, format!("expected 3, 4, 6 or 7 columns, got {}", tokens.len()))
        })?;
        match expected {
            None => expected = Some(shape),
            Some(e) if e != shape => {
                return Err(Error::parse(
                    number,
                    format!("inconsistent column count {} (file started differently)", tokens.len()),
                ))
            }
            _ => {}
        }
        let (has_normals, has_label) = shape;

        let parse_f = |tok: &str| -> Result<f64> {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(number, format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(number, format!("non-finite value `{tok}`")));
            }
            Ok(v)
        };
        let p = [parse_f(tokens[0])?, parse_f(tokens[1])?, parse_f(tokens[2])?];
        positions.push([T::of(p[0]), T::of(p[1]), T::of(p[2])]);

        let mut cursor = 3;
        if has_normals {
            let n = [
                parse_f(tokens[3])?,
                parse_f(tokens[4])?,
                parse_f(tokens[5])?,
            ];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if len < 1e-12 {
                return Err(Error::parse(number, "zero-length normal"));
            }
            normals.push([T::of(n[0] / len), T::of(n[1] / len), T::of(n[2] / len)]);
            cursor = 6;
        }
        if has_label {
            let tok = tokens[cursor];
            let label: usize = tok
                .parse()
                .map_err(|_| Error::parse(number, format!("bad label `{tok}`")))?;
            labels.push(label);
        }
    }

    let mut cloud = PointCloud::new(positions)
        .map_err(|e| Error::parse(bytes.split(|&b| b == b'\n').count(), e.to_string()))?;
    if !normals.is_empty() {
        cloud = cloud.with_normals(normals)?;
    }
    if !labels.is_empty() {
        cloud = cloud.with_labels(labels)?;
    }
    Ok(cloud)
}

/// Writes a cloud as XYZ text with as many columns as the cloud carries.
/// Floats use the shortest representation that round-trips exactly.
pub fn write_xyz<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    use std::fmt::Write;
    let mut out = String::new();
    for i in 0..cloud.len() {
        let p = cloud.positions()[i];
        write!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            write!(out, " {} {} {}", n[0], n[1], n[2]).unwrap();
        }
        if let Some(ls) = cloud.labels() {
            write!(out, " {}", ls[i]).unwrap();
        }
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_columns_gives_positions_only() {
        let cloud = parse_xyz::<f64>(b"0 0 0\n1 2 3\n").unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(cloud.normals().is_none());
        assert!(cloud.labels().is_none());
        assert_eq!(cloud.positions()[1], [1.0, 2.0, 3.0]);
    }

    #[test]
    fn seven_columns_gives_normals_and_labels() {
        let cloud = parse_xyz::<f64>(b"0 0 0 0 0 2 5\n1 0 0 1 0 0 6\n").unwrap();
        assert_eq!(cloud.normals().unwrap()[0], [0.0, 0.0, 1.0]);
        assert_eq!(cloud.labels().unwrap(), &[5, 6]);
    }

    #[test]
    fn short_line_reports_line_number() {
        match parse_xyz::<f64>(b"0 0 0\n1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_columns_rejected() {
        match parse_xyz::<f64>(b"0 0 0\n1 2 3 4 5 6\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("inconsistent"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_parse_round_trip_is_exact() {
        let cloud = PointCloud::<f32>::new(vec![
            [0.1, -0.25, 3.0e-7],
            [1.5, 2.6180339, 0.0],
        ])
        .unwrap()
        .with_normals(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        .unwrap()
        .with_labels(vec![2, 0])
        .unwrap();
        let bytes = write_xyz(&cloud);
        let back = parse_xyz::<f32>(&bytes).unwrap();
        assert_eq!(back.positions(), cloud.positions());
        assert_eq!(back.normals().unwrap(), cloud.normals().unwrap());
        assert_eq!(back.labels().unwrap(), cloud.labels().unwrap());
    }
}
