//! OFF mesh parsing, tolerant of the quirks found in common datasets.

use crate::error::{Error, Result};

/// A triangle mesh read from an OFF file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshOff {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

/// One meaningful line of the file: 1-based number and comment-stripped text.
struct Line<'a> {
    number: usize,
    text: &'a str,
}

fn meaningful_lines(bytes: &[u8]) -> Result<Vec<Line<'_>>> {
    let mut out = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let number = idx + 1;
        let text = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(number, "line is not valid UTF-8"))?;
        let text = text.split('#').next().unwrap_or("").trim();
        if !text.is_empty() {
            out.push(Line { number, text });
        }
    }
    Ok(out)
}

fn parse_counts(line: &Line<'_>) -> Result<(usize, usize)> {
    let mut tokens = line.text.split_whitespace();
    let (v, f) = match (tokens.next(), tokens.next(), tokens.next(), tokens.next()) {
        (Some(v), Some(f), Some(_e), None) => (v, f),
        _ => {
            return Err(Error::parse(
                line.number,
                format!("expected counts `V F E`, got `{}`", line.text),
            ))
        }
    };
    let v: usize = v
        .parse()
        .map_err(|_| Error::parse(line.number, format!("bad vertex count `{v}`")))?;
    let f: usize = f
        .parse()
        .map_err(|_| Error::parse(line.number, format!("bad face count `{f}`")))?;
    Ok((v, f))
}

/// Parses OFF text. Accepts an optional `OFF` header, including the fused
/// form `OFF492 1000 0` where the counts share the header line, and `#`
/// comments anywhere. Faces must be triangles.
pub fn parse_off(bytes: &[u8]) -> Result<MeshOff> {
    let lines = meaningful_lines(bytes)?;
    let eof_line = bytes.iter().filter(|&&b| b == b'\n').count() + 1;

    let first = lines
        .first()
        .ok_or_else(|| Error::parse(eof_line, "empty OFF input"))?;
    // (counts line content, index of the first body line)
    let (counts, body_start) = match first.text.strip_prefix("OFF") {
        Some(rest) if rest.trim().is_empty() => {
            let second = lines
                .get(1)
                .ok_or_else(|| Error::parse(eof_line, "missing counts line"))?;
            (Line { number: second.number, text: second.text }, 2)
        }
        // Fused header: counts follow `OFF` on the same line.
        Some(rest) => (Line { number: first.number, text: rest.trim() }, 1),
        None => (Line { number: first.number, text: first.text }, 1),
    };
    let (v, f) = parse_counts(&counts)?;
    parse_body(&lines, body_start, v, f, counts.number, eof_line)
}

fn parse_body(
    lines: &[Line<'_>],
    start: usize,
    v_count: usize,
    f_count: usize,
    counts_line: usize,
    eof_line: usize,
) -> Result<MeshOff> {
    if v_count == 0 {
        return Err(Error::parse(counts_line, "mesh must have at least one vertex"));
    }
    // Counts are validated against the actual input before any allocation,
    // so hostile headers cannot force large reservations.
    if v_count + f_count > lines.len().saturating_sub(start) {
        return Err(Error::parse(
            counts_line,
            format!(
                "counts claim {v_count} vertices and {f_count} faces but only {} lines follow",
                lines.len() - start.min(lines.len())
            ),
        ));
    }

    let mut vertices = Vec::new();
    for i in 0..v_count {
        let line = &lines[start + i];
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::parse(
                line.number,
                format!("expected 3 coordinates, got {}", tokens.len()),
            ));
        }
        let mut p = [0.0f64; 3];
        for (c, tok) in tokens.iter().enumerate() {
            p[c] = tok
                .parse()
                .map_err(|_| Error::parse(line.number, format!("bad coordinate `{tok}`")))?;
            if !p[c].is_finite() {
                return Err(Error::parse(line.number, format!("non-finite coordinate `{tok}`")));
            }
        }
        vertices.push(p);
    }

    let mut faces = Vec::new();
    for i in 0..f_count {
        let line = &lines[start + v_count + i];
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        let arity: usize = tokens
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(line.number, "missing face vertex count"))?;
        if arity != 3 {
            return Err(Error::parse(
                line.number,
                format!("only triangle faces are supported, got {arity}-gon"),
            ));
        }
        if tokens.len() != 4 {
            return Err(Error::parse(
                line.number,
                format!("expected `3 i j k`, got {} tokens", tokens.len()),
            ));
        }
        let mut f = [0usize; 3];
        for (c, tok) in tokens[1..].iter().enumerate() {
            let idx: usize = tok
                .parse()
                .map_err(|_| Error::parse(line.number, format!("bad vertex index `{tok}`")))?;
            if idx >= v_count {
                return Err(Error::parse(
                    line.number,
                    format!("vertex index {idx} out of range (V = {v_count})"),
                ));
            }
            f[c] = idx;
        }
        faces.push(f);
    }

    if start + v_count + f_count < lines.len() {
        let extra = &lines[start + v_count + f_count];
        return Err(Error::parse(
            extra.number,
            format!("unexpected content after {f_count} faces: `{}`", extra.text),
        ));
    }
    let _ = eof_line;
    Ok(MeshOff { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 0 2 3\n3 1 2 3\n";

    #[test]
    fn parses_minimal_tetrahedron() {
        let mesh = parse_off(TETRA.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.faces.len(), 4);
        assert_eq!(mesh.faces[3], [1, 2, 3]);
    }

    #[test]
    fn parses_fused_header_variant() {
        let fused = TETRA.replace("OFF\n4 4 6", "OFF4 4 6");
        let mesh = parse_off(fused.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.faces.len(), 4);
    }

    #[test]
    fn parses_headerless_and_comments() {
        let input = "# a comment\n3 1 0\n0 0 0 # origin\n1 0 0\n0 1 0\n3 0 1 2\n";
        let mesh = parse_off(input.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
    }

    #[test]
    fn quad_face_reports_line_number() {
        let input = "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n";
        match parse_off(input.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 7);
                assert!(msg.contains("triangle"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn index_overflow_is_reported() {
        let input = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n";
        match parse_off(input.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn hostile_counts_fail_fast_without_allocation() {
        let input = "OFF 99999999999999 1 0\n0 0 0\n";
        assert!(parse_off(input.as_bytes()).is_err());
        let input = "OFF\n4294967295 0 0\n0 0 0\n";
        assert!(parse_off(input.as_bytes()).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let base = TETRA.as_bytes().to_vec();
        for _ in 0..300 {
            let mut bytes = base.clone();
            for _ in 0..rng.random_range(1..8) {
                let idx = rng.random_range(0..bytes.len());
                bytes[idx] = rng.random_range(0..=255);
            }
            let cut = rng.random_range(0..=bytes.len());
            let _ = parse_off(&bytes[..cut]);
        }
    }
}
