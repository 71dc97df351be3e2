//! Colored ASCII PLY export for visualization.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::Real;

/// Serializes the cloud as ASCII PLY with one 8-bit RGB color per point.
/// Coordinates use the shortest decimal form that round-trips exactly.
pub fn write_ply_colored<T: Real>(cloud: &PointCloud<T>, colors: &[[u8; 3]]) -> Result<Vec<u8>> {
    if colors.len() != cloud.len() {
        return Err(Error::invalid(format!(
            "{} colors for {} points",
            colors.len(),
            cloud.len()
        )));
    }
    write_ply(cloud.positions(), colors)
}

/// Raw variant for point sets that are not full clouds (probe grids may be
/// empty, which `PointCloud` forbids).
pub(crate) fn write_ply<T: Real>(points: &[[T; 3]], colors: &[[u8; 3]]) -> Result<Vec<u8>> {
    use std::fmt::Write;
    if colors.len() != points.len() {
        return Err(Error::invalid("colors must align with points"));
    }
    let mut out = String::new();
    out.push_str("ply\n");
    out.push_str("format ascii 1.0\n");
    writeln!(out, "element vertex {}", points.len()).unwrap();
    out.push_str("property float x\n");
    out.push_str("property float y\n");
    out.push_str("property float z\n");
    out.push_str("property uchar red\n");
    out.push_str("property uchar green\n");
    out.push_str("property uchar blue\n");
    out.push_str("end_header\n");
    for (p, c) in points.iter().zip(colors) {
        writeln!(out, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]).unwrap();
    }
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_point_has_expected_layout() {
        let cloud = PointCloud::<f32>::new(vec![[0.0, 0.0, 0.0]]).unwrap();
        let bytes = write_ply_colored(&cloud, &[[255, 0, 0]]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ply");
        assert_eq!(lines[1], "format ascii 1.0");
        assert_eq!(lines[2], "element vertex 1");
        assert_eq!(lines[3], "property float x");
        assert_eq!(lines[8], "property uchar blue");
        assert_eq!(lines[9], "end_header");
        assert_eq!(lines[10], "0 0 0 255 0 0");
        assert_eq!(lines.len(), 11);
    }

    #[test]
    fn empty_export_is_valid() {
        let bytes = write_ply::<f32>(&[], &[]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("element vertex 0"));
        assert!(text.trim_end().ends_with("end_header"));
    }

    #[test]
    fn color_length_mismatch_is_invalid() {
        let cloud = PointCloud::<f32>::new(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(write_ply_colored(&cloud, &[[1, 2, 3]]).is_err());
    }

    #[test]
    fn positions_round_trip_through_ascii() {
        let pts = vec![
            [0.123456789f32, -9.87654e-3, 1.0],
            [std::f32::consts::PI, 2.718281828, -0.5],
        ];
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let bytes = write_ply_colored(&cloud, &[[0, 0, 0]; 2]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let data: Vec<&str> = text.lines().skip_while(|l| *l != "end_header").skip(1).collect();
        for (line, expect) in data.iter().zip(&pts) {
            let cols: Vec<f32> = line
                .split_whitespace()
                .take(3)
                .map(|t| t.parse().unwrap())
                .collect();
            assert_eq!(cols, expect.to_vec());
        }
    }
}
