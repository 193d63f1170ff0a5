//! On-disk formats. See docs/FORMATS.md for the byte-level contracts; the
//! text formats round-trip bit-exactly.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use percolib::graph::Graph;
use percolib::map::CombinatorialMap;
use percolib::matrix::{MatrixKind, OperatorMatrix};

#[derive(Debug)]
pub enum FormatError {
    Io(io::Error),
    Parse(String),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "io error: {e}"),
            FormatError::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        FormatError::Io(e)
    }
}

fn parse_err(msg: impl Into<String>) -> FormatError {
    FormatError::Parse(msg.into())
}

/// Line-based graph text format:
/// `graph <family_tag> <V> <E>`, then one `u v` line per edge in id order,
/// then `boundary` followed by the ascending boundary ids on the same line.
pub fn graph_to_text(graph: &Graph) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "graph {} {} {}",
        graph.family_tag(),
        graph.vertex_count(),
        graph.edge_count()
    )
    .unwrap();
    for &(u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    out.push_str("boundary");
    for id in graph.boundary_ids() {
        write!(out, " {id}").unwrap();
    }
    out.push('\n');
    out
}

pub fn graph_from_text(text: &str) -> Result<Graph, FormatError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty graph file"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("graph") {
        return Err(parse_err("expected 'graph' header"));
    }
    let tag = parts.next().ok_or_else(|| parse_err("missing family tag"))?;
    let v: u32 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err("bad vertex count"))?;
    let e: u32 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err("bad edge count"))?;
    let mut edges = Vec::with_capacity(e as usize);
    for _ in 0..e {
        let line = lines.next().ok_or_else(|| parse_err("truncated edge list"))?;
        let mut it = line.split_whitespace();
        let a: u32 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("bad edge endpoint"))?;
        let b: u32 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("bad edge endpoint"))?;
        edges.push((a, b));
    }
    let bline = lines.next().ok_or_else(|| parse_err("missing boundary line"))?;
    let mut it = bline.split_whitespace();
    if it.next() != Some("boundary") {
        return Err(parse_err("expected 'boundary' line"));
    }
    let boundary: Vec<u32> = it
        .map(|s| s.parse().map_err(|_| parse_err("bad boundary id")))
        .collect::<Result<_, _>>()?;
    Graph::from_edges(tag, v, edges, &boundary).map_err(|e| parse_err(e.to_string()))
}

/// Map text format: the graph section, then
/// `map <dart_count>` / `sigma <s_0> ... <s_{D-1}>` / `outer <dart>`.
/// Darts 2e and 2e+1 are the two orientations of edge e.
pub fn map_to_text(map: &CombinatorialMap) -> String {
    let mut out = graph_to_text(map.graph());
    writeln!(out, "map {}", map.dart_count()).unwrap();
    out.push_str("sigma");
    for &s in map.sigma() {
        write!(out, " {s}").unwrap();
    }
    out.push('\n');
    let outer_dart = (0..map.dart_count())
        .find(|&d| map.face_of_dart(d).is_none())
        .expect("a patch has an outer face");
    writeln!(out, "outer {outer_dart}").unwrap();
    out
}

pub fn map_from_text(text: &str) -> Result<CombinatorialMap, FormatError> {
    // Split where the map section starts.
    let map_pos = text
        .find("\nmap ")
        .ok_or_else(|| parse_err("missing map section"))?;
    let graph = graph_from_text(&text[..map_pos + 1])?;
    let rest = &text[map_pos + 1..];
    let mut lines = rest.lines();
    let header = lines.next().ok_or_else(|| parse_err("missing map header"))?;
    let dart_count: u32 = header
        .strip_prefix("map ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err("bad map header"))?;
    if dart_count != 2 * graph.edge_count() {
        return Err(parse_err("dart count disagrees with edge count"));
    }
    let sline = lines.next().ok_or_else(|| parse_err("missing sigma line"))?;
    let mut it = sline.split_whitespace();
    if it.next() != Some("sigma") {
        return Err(parse_err("expected 'sigma' line"));
    }
    let sigma: Vec<u32> = it
        .map(|s| s.parse().map_err(|_| parse_err("bad sigma entry")))
        .collect::<Result<_, _>>()?;
    if sigma.len() != dart_count as usize {
        return Err(parse_err("sigma length disagrees with dart count"));
    }
    let oline = lines.next().ok_or_else(|| parse_err("missing outer line"))?;
    let outer: u32 = oline
        .strip_prefix("outer ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err("bad outer line"))?;
    CombinatorialMap::from_parts(graph, sigma, outer).map_err(|e| parse_err(e.to_string()))
}

/// Binary matrix layout (little endian):
/// magic "PMAT1\0", kind u8, params 2 x u32, p f64, window len u32,
/// window ids u32 each, sample count u64, graph fingerprint u64, then
/// row-major f64 values.
pub fn matrix_to_bytes(m: &OperatorMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"PMAT1\0");
    let (tag, a, b) = match m.kind {
        MatrixKind::TwoPoint => (0u8, 0u32, 0u32),
        MatrixKind::Complement(n) => (1, n, 0),
        MatrixKind::Sphere(n) => (2, n, 0),
        MatrixKind::IntBall(n) => (3, n, 0),
        MatrixKind::IntSphere(n) => (4, n, 0),
        MatrixKind::IntAnnulus(n, mm) => (5, n, mm),
    };
    out.push(tag);
    out.extend_from_slice(&a.to_le_bytes());
    out.extend_from_slice(&b.to_le_bytes());
    out.extend_from_slice(&m.p.to_le_bytes());
    out.extend_from_slice(&(m.window.len() as u32).to_le_bytes());
    for &w in &m.window {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&m.sample_count.to_le_bytes());
    out.extend_from_slice(&m.graph_hash.to_le_bytes());
    for &v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<OperatorMatrix, FormatError> {
    let mut r = io::Cursor::new(bytes);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != b"PMAT1\0" {
        return Err(parse_err("bad matrix magic"));
    }
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1)?;
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut io::Cursor<&[u8]>| -> Result<u32, FormatError> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let a = read_u32(&mut r)?;
    let b = read_u32(&mut r)?;
    let kind = match b1[0] {
        0 => MatrixKind::TwoPoint,
        1 => MatrixKind::Complement(a),
        2 => MatrixKind::Sphere(a),
        3 => MatrixKind::IntBall(a),
        4 => MatrixKind::IntSphere(a),
        5 => MatrixKind::IntAnnulus(a, b),
        t => return Err(parse_err(format!("unknown matrix kind tag {t}"))),
    };
    let mut f8 = [0u8; 8];
    r.read_exact(&mut f8)?;
    let p = f64::from_le_bytes(f8);
    let len = read_u32(&mut r)? as usize;
    let mut window = Vec::with_capacity(len);
    for _ in 0..len {
        window.push(read_u32(&mut r)?);
    }
    r.read_exact(&mut f8)?;
    let sample_count = u64::from_le_bytes(f8);
    r.read_exact(&mut f8)?;
    let graph_hash = u64::from_le_bytes(f8);
    let mut values = Vec::with_capacity(len * len);
    for _ in 0..len * len {
        r.read_exact(&mut f8)?;
        values.push(f64::from_le_bytes(f8));
    }
    Ok(OperatorMatrix {
        kind,
        p,
        window,
        values,
        sample_count,
        graph_hash,
    })
}

/// CSV export of a matrix: `i,j,value` triplets in row-major order.
pub fn matrix_to_csv(m: &OperatorMatrix) -> String {
    let mut out = String::from("i,j,value\n");
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            writeln!(out, "{i},{j},{}", m.get(i, j)).unwrap();
        }
    }
    out
}

/// CSV for (x, y) series with optional stderr column.
pub fn series_to_csv(header: &str, rows: &[(f64, f64, Option<f64>)]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for &(x, y, err) in rows {
        match err {
            Some(e) => writeln!(out, "{x},{y},{e}").unwrap(),
            None => writeln!(out, "{x},{y}").unwrap(),
        }
    }
    out
}

/// Minimal gnuplot driver for a log-log series file.
pub fn gnuplot_script(csv_name: &str, title: &str, logscale: bool) -> String {
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set key off").unwrap();
    writeln!(s, "set title '{title}'").unwrap();
    if logscale {
        writeln!(s, "set logscale xy").unwrap();
    }
    writeln!(s, "plot '{csv_name}' every ::1 using 1:2 with linespoints").unwrap();
    s
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
