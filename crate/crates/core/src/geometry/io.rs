//! Plain-text simplex-list mesh format.
//!
//! ```text
//! # comments start with '#'
//! simplicial-mesh <dim> <ambient>
//! <n_vertices> <n_top_simplices>
//! period <p_1> ... <p_ambient>        (optional; use "inf" for open axes)
//! <x_1> ... <x_ambient>               (one line per vertex)
//! <v_0> ... <v_dim>                   (one line per top simplex)
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::SimplicialMesh;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse(format!("line {line}: {}", msg.into()))
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<SimplicialMesh> {
    let mut lines = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim().to_string();
        if !body.is_empty() {
            lines.push((no + 1, body));
        }
    }
    let mut it = lines.into_iter();
    let (no, header) = it.next().ok_or_else(|| parse_err(0, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "simplicial-mesh" {
        return Err(parse_err(no, "expected `simplicial-mesh <dim> <ambient>`"));
    }
    let dim: usize = h[1].parse().map_err(|_| parse_err(no, "bad dimension"))?;
    let ambient: usize = h[2].parse().map_err(|_| parse_err(no, "bad ambient dimension"))?;
    let (no, counts) = it.next().ok_or_else(|| parse_err(no, "missing counts"))?;
    let c: Vec<usize> =
        counts.split_whitespace().map(|t| t.parse().map_err(|_| parse_err(no, "bad count"))).collect::<Result<_>>()?;
    if c.len() != 2 {
        return Err(parse_err(no, "expected `<n_vertices> <n_top_simplices>`"));
    }
    let mut rest: Vec<(usize, String)> = it.collect();
    let mut period = None;
    if let Some((no, first)) = rest.first() {
        if first.starts_with("period") {
            let p: Vec<f64> = first
                .split_whitespace()
                .skip(1)
                .map(|t| t.parse().map_err(|_| parse_err(*no, "bad period")))
                .collect::<Result<_>>()?;
            if p.len() != ambient {
                return Err(parse_err(*no, "period needs one entry per ambient axis"));
            }
            period = Some(p);
            rest.remove(0);
        }
    }
    if rest.len() != c[0] + c[1] {
        return Err(parse_err(
            rest.last().map(|r| r.0).unwrap_or(no),
            format!("expected {} data lines, found {}", c[0] + c[1], rest.len()),
        ));
    }
    let mut vertices = Vec::with_capacity(c[0]);
    for (no, l) in &rest[..c[0]] {
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(*no, "bad coordinate")))
            .collect::<Result<_>>()?;
        if v.len() != ambient {
            return Err(parse_err(*no, format!("expected {ambient} coordinates")));
        }
        vertices.push(v);
    }
    let mut top = Vec::with_capacity(c[1]);
    for (no, l) in &rest[c[0]..] {
        let s: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(*no, "bad vertex index")))
            .collect::<Result<_>>()?;
        if s.len() != dim + 1 {
            return Err(parse_err(*no, format!("expected {} vertex indices", dim + 1)));
        }
        top.push(s);
    }
    SimplicialMesh::new(dim, vertices, top, period)
}

/// Writes the mesh; top simplices are emitted in an order that reproduces
/// their orientation.
pub fn write_mesh<W: Write>(mesh: &SimplicialMesh, mut w: W) -> Result<()> {
    let n = mesh.dim();
    writeln!(w, "simplicial-mesh {} {}", n, mesh.ambient_dim())?;
    writeln!(w, "{} {}", mesh.count(0), mesh.count(n))?;
    if let Some(p) = mesh.period() {
        let parts: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "period {}", parts.join(" "))?;
    }
    for v in mesh.vertices() {
        let parts: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "{}", parts.join(" "))?;
    }
    for (t, s) in mesh.simplices(n).iter().enumerate() {
        let mut s = s.clone();
        if mesh.top_orientation(t) < 0.0 {
            s.swap(0, 1);
        }
        let parts: Vec<String> = s.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", parts.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generators::square_torus;

    #[test]
    fn round_trip_preserves_structure() {
        let m = square_torus(4, 1.0).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(&buf[..]).unwrap();
        assert_eq!(back.count(2), m.count(2));
        assert_eq!(back.coboundary_matrix(1), m.coboundary_matrix(1));
        assert!((back.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_written_tetrahedron_surface() {
        let text = "\
# boundary of a tetrahedron
simplicial-mesh 2 3
4 4
1 1 1
1 -1 -1
-1 1 -1
-1 -1 1
1 2 3
0 3 2
0 1 3
0 2 1
";
        let m = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let text = "simplicial-mesh 2 3\n4 4\n1 1 x\n";
        let err = read_mesh(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
