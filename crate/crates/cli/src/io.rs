//! Textual file formats: the COO graph file, point CSVs, embedding and
//! parameter checkpoints, and metric CSV writing.
//!
//! All floating-point values are written with Rust's shortest
//! round-trippable decimal formatting, so every save/load pair is
//! bit-exact and locale-independent.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use specmap_core::graph::{PointCloud, SparseSym};
use specmap_core::mat::Mat;
use specmap_core::nn::MlpParams;

use crate::error::{CliError, Result};

/// Writes a sparse symmetric matrix as `n nnz` then one `i j w` line per
/// stored entry in row-major order (both triangle mirrors present).
pub fn save_coo(path: &Path, w: &SparseSym) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", w.n(), w.nnz());
    for (i, j, v) in w.iter() {
        let _ = writeln!(out, "{i} {j} {v}");
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Reads the COO graph format back, validating the header, every entry and
/// exact symmetry; errors carry the offending line number.
pub fn load_coo(path: &Path) -> Result<SparseSym> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::parse(path, 1, "header must be 'n nnz'"))?;
    let nnz: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::parse(path, 1, "header must be 'n nnz'"))?;
    if parts.next().is_some() {
        return Err(CliError::parse(path, 1, "header must be 'n nnz'"));
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(nnz);
    let mut entry_lines: Vec<usize> = Vec::with_capacity(nnz);
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut parts = line.split_whitespace();
        let parse_idx = |s: Option<&str>| -> Result<usize> {
            s.and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::parse(path, lineno, "expected 'i j w'"))
        };
        let i = parse_idx(parts.next())?;
        let j = parse_idx(parts.next())?;
        let v: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::parse(path, lineno, "expected 'i j w'"))?;
        if parts.next().is_some() {
            return Err(CliError::parse(path, lineno, "trailing fields"));
        }
        if i >= n || j >= n {
            return Err(CliError::parse(
                path,
                lineno,
                format!("index ({i}, {j}) out of range for n = {n}"),
            ));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::parse(path, lineno, format!("invalid weight {v}")));
        }
        triplets.push((i, j, v));
        entry_lines.push(lineno);
    }
    if triplets.len() != nnz {
        return Err(CliError::parse(
            path,
            1,
            format!("header claims {nnz} entries, found {}", triplets.len()),
        ));
    }
    // symmetry check with line attribution before handing off
    let mut sorted: Vec<(usize, usize, f64)> = triplets.clone();
    sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (pos, &(i, j, v)) in triplets.iter().enumerate() {
        let mirror = sorted.binary_search_by(|probe| (probe.0, probe.1).cmp(&(j, i)));
        let ok = match mirror {
            Ok(m) => sorted[m].2 == v,
            Err(_) => false,
        };
        if !ok {
            return Err(CliError::parse(
                path,
                entry_lines[pos],
                format!("entry ({i}, {j}) = {v} has no equal mirrored entry ({j}, {i})"),
            ));
        }
    }
    Ok(SparseSym::from_triplets(n, &triplets)?)
}

/// Writes an iterate as `n K` then one whitespace-separated row per node.
pub fn save_embedding(path: &Path, y: &Mat) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", y.rows(), y.cols());
    for i in 0..y.rows() {
        let row: Vec<String> = y.row(i).iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn load_embedding(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| CliError::parse(path, 1, "header must be 'n K'")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(CliError::parse(path, 1, "header must be 'n K'"));
    }
    let (n, k) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(n * k);
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::parse(path, idx + 1, format!("bad value '{s}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != k {
            return Err(CliError::parse(path, idx + 1, format!("expected {k} values")));
        }
        data.extend(values);
    }
    if data.len() != n * k {
        return Err(CliError::parse(path, 1, format!("expected {n} rows")));
    }
    Ok(Mat::from_flat(n, k, data))
}

/// Writes network parameters: a layer-size header line, then per layer the
/// weight matrix one row per line followed by the bias line. An optional
/// `xi` block appends the orthogonalization layer of a constrained model.
pub fn save_mlp(path: &Path, params: &MlpParams, xi: Option<&Mat>) -> Result<()> {
    let mut out = String::new();
    let sizes: Vec<String> = params.sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    for (w, b) in params.weights().iter().zip(params.biases()) {
        for i in 0..w.rows() {
            let row: Vec<String> = w.row(i).iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let bias: Vec<String> = b.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", bias.join(" "));
    }
    if let Some(xi) = xi {
        let _ = writeln!(out, "xi");
        for i in 0..xi.rows() {
            let row: Vec<String> = xi.row(i).iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn load_mlp(path: &Path) -> Result<(MlpParams, Option<Mat>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let (_, header) = *lines.first().ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let sizes: Vec<usize> = header
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::parse(path, 1, "header must list layer sizes"))
        })
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(CliError::parse(path, 1, "need at least two layer sizes"));
    }
    let mut cursor = 1usize;
    let parse_row = |cursor: &mut usize, want: usize| -> Result<Vec<f64>> {
        let &(idx, raw) = lines
            .get(*cursor)
            .ok_or_else(|| CliError::parse(path, text.lines().count(), "unexpected end of file"))?;
        *cursor += 1;
        let values: Vec<f64> = raw
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::parse(path, idx + 1, format!("bad value '{s}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != want {
            return Err(CliError::parse(
                path,
                idx + 1,
                format!("expected {want} values, found {}", values.len()),
            ));
        }
        Ok(values)
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(parse_row(&mut cursor, cols)?);
        }
        weights.push(Mat::from_flat(rows, cols, data));
        biases.push(parse_row(&mut cursor, rows)?);
    }
    let params = MlpParams::from_parts(sizes.clone(), weights, biases)?;
    // optional orthogonalization block
    let mut xi = None;
    if let Some(&(idx, raw)) = lines.get(cursor) {
        if raw.trim() != "xi" {
            return Err(CliError::parse(path, idx + 1, "expected 'xi' block or end of file"));
        }
        cursor += 1;
        let k = *sizes.last().unwrap();
        let mut data = Vec::with_capacity(k * k);
        for _ in 0..k {
            data.extend(parse_row(&mut cursor, k)?);
        }
        xi = Some(Mat::from_flat(k, k, data));
    }
    Ok((params, xi))
}

/// Writes a point cloud as `x0,x1,...[,label]` CSV with a header line.
pub fn save_points_csv(path: &Path, pc: &PointCloud) -> Result<()> {
    let mut out = String::new();
    let mut header: Vec<String> = (0..pc.dim()).map(|j| format!("x{j}")).collect();
    if pc.labels().is_some() {
        header.push("label".into());
    }
    let _ = writeln!(out, "{}", header.join(","));
    for i in 0..pc.len() {
        let mut fields: Vec<String> = pc.point(i).iter().map(f64::to_string).collect();
        if let Some(labels) = pc.labels() {
            fields.push(labels[i].to_string());
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn load_points_csv(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let has_label = cols.last() == Some(&"label");
    let dim = if has_label { cols.len() - 1 } else { cols.len() };
    if dim == 0 {
        return Err(CliError::parse(path, 1, "no coordinate columns"));
    }
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut count = 0usize;
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(CliError::parse(
                path,
                idx + 1,
                format!("expected {} fields", cols.len()),
            ));
        }
        for f in &fields[..dim] {
            let v: f64 = f
                .parse()
                .map_err(|_| CliError::parse(path, idx + 1, format!("bad value '{f}'")))?;
            flat.push(v);
        }
        if has_label {
            let l: u32 = fields[dim].parse().map_err(|_| {
                CliError::parse(path, idx + 1, format!("bad label '{}'", fields[dim]))
            })?;
            labels.push(l);
        }
        count += 1;
    }
    let points = Mat::from_flat(count, dim, flat);
    Ok(PointCloud::new(points, has_label.then_some(labels))?)
}

/// Incremental CSV writer with a fixed header; numeric cells use full
/// precision and missing references are written as `NA`.
pub struct CsvWriter {
    path: std::path::PathBuf,
    out: String,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: impl Into<std::path::PathBuf>, header: &[&str]) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "{}", header.join(","));
        CsvWriter { path: path.into(), out, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        let fields: Vec<String> = cells.iter().map(CsvCell::render).collect();
        let _ = writeln!(self.out, "{}", fields.join(","));
    }

    pub fn finish(self) -> Result<()> {
        fs::write(&self.path, self.out).map_err(|e| CliError::io(&self.path, e))
    }
}

/// One CSV cell: an integer, a full-precision float, text, or the explicit
/// no-reference marker.
pub enum CsvCell {
    Int(u64),
    Float(f64),
    Text(String),
    Na,
}

impl CsvCell {
    pub fn opt(v: Option<f64>) -> Self {
        match v {
            Some(x) => CsvCell::Float(x),
            None => CsvCell::Na,
        }
    }

    fn render(&self) -> String {
        match self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Float(v) => v.to_string(),
            CsvCell::Text(s) => s.clone(),
            CsvCell::Na => "NA".into(),
        }
    }
}

/// Loads an IDX image/label pair from disk.
pub fn load_mnist_files(images: &Path, labels: &Path) -> Result<specmap_core::data::MnistSet> {
    let img = fs::read(images).map_err(|e| CliError::io(images, e))?;
    let lbl = fs::read(labels).map_err(|e| CliError::io(labels, e))?;
    Ok(specmap_core::data::mnist_from_idx(&img, &lbl)?)
}
