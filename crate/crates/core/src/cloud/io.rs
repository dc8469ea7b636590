//! XYZ text and ascii PLY point files.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point, PointCloud};
use crate::error::{Error, Result};

/// Reads whitespace separated rows of at least three decimals. Columns past
/// the third become attributes `col3`, `col4`, ... Blank lines and lines
/// starting with `#` are skipped.
pub fn load_xyz(path: &Path) -> Result<PointCloud> {
    parse_xyz(&std::fs::read_to_string(path)?, path)
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    let mut extra: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| err(line_no, format!("not a number: `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() < 3 {
            return Err(err(
                line_no,
                format!("expected at least 3 columns, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(line_no, "non-finite value".into()));
        }
        match width {
            None => {
                width = Some(values.len());
                extra = vec![Vec::new(); values.len() - 3];
            }
            Some(w) if w != values.len() => {
                return Err(err(line_no, format!("expected {w} columns, got {}", values.len())));
            }
            _ => {}
        }
        points.push([values[0], values[1], values[2]]);
        for (col, v) in extra.iter_mut().zip(&values[3..]) {
            col.push(*v);
        }
    }
    if points.is_empty() {
        return Err(err(0, "file contains no points".into()));
    }
    let mut cloud = PointCloud::new(points)?;
    for (k, col) in extra.into_iter().enumerate() {
        cloud.set_attr(format!("col{}", k + 3), col)?;
    }
    Ok(cloud)
}

pub fn save_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let attrs: Vec<&[f64]> = cloud.attrs().map(|(_, v)| v).collect();
    let mut out = String::with_capacity(cloud.len() * 64);
    for (i, p) in cloud.points().iter().enumerate() {
        write!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
        for col in &attrs {
            write!(out, " {}", col[i]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Ascii PLY with float properties `x y z` followed by every attribute
/// column (for example `error`).
pub fn save_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let attrs: Vec<(&str, &[f64])> = cloud.attrs().collect();
    let mut out = String::with_capacity(cloud.len() * 64 + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", cloud.len()).unwrap();
    for name in ["x", "y", "z"].into_iter().chain(attrs.iter().map(|(n, _)| *n)) {
        writeln!(out, "property float {name}").unwrap();
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        write!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
        for (_, col) in &attrs {
            write!(out, " {}", col[i]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads the vertex element of an ascii PLY file. Requires `x`, `y`, `z`;
/// other float properties become attributes.
pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(err(1, "missing `ply` magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    let mut in_vertex = false;
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, _] if *fmt != "ascii" => return Err(err(i + 1, "only ascii PLY is supported")),
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| err(i + 1, "bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", _, name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let count = count.ok_or_else(|| err(0, "no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (Some(xi), Some(yi), Some(zi)) = (col("x"), col("y"), col("z")) else {
        return Err(err(0, "vertex element lacks x/y/z"));
    };
    let mut points: Vec<Point> = Vec::with_capacity(count);
    let mut columns = vec![Vec::with_capacity(count); props.len()];
    for (i, line) in lines.take(count) {
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(i + 1, "not a number")))
            .collect::<Result<Vec<_>>>()?;
        if values.len() < props.len() {
            return Err(err(i + 1, "short vertex row"));
        }
        points.push([values[xi], values[yi], values[zi]]);
        for (c, v) in columns.iter_mut().zip(values) {
            c.push(v);
        }
    }
    if points.len() != count {
        return Err(err(0, "fewer vertex rows than declared"));
    }
    let mut cloud = PointCloud::new(points)?;
    for (name, values) in props.iter().zip(columns) {
        if !matches!(name.as_str(), "x" | "y" | "z") {
            cloud.set_attr(name.clone(), values)?;
        }
    }
    Ok(cloud)
}
