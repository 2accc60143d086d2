//! Labelled matrix files.
//!
//! Text: a `# dims: <rows> <cols>` header, then one `label v1 ... vcols` line
//! per row with values printed in shortest round-trip form. Binary: the magic
//! bytes, `u64` rows and cols, then per row an `i64` label and `cols` `f64`
//! values, all little-endian. Both are lossless.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const BINARY_MAGIC: &[u8; 8] = b"ZSLMAT01";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub matrix: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledMatrix {
    pub fn new(matrix: Matrix, labels: Vec<usize>) -> Result<Self> {
        if matrix.rows() != labels.len() {
            return Err(Error::Usage(format!(
                "{} rows but {} labels",
                matrix.rows(),
                labels.len()
            )));
        }
        Ok(Self { matrix, labels })
    }

    /// Rows labelled with their own index.
    pub fn indexed(matrix: Matrix) -> Self {
        let labels = (0..matrix.rows()).collect();
        Self { matrix, labels }
    }
}

pub fn to_text(m: &LabeledMatrix) -> String {
    let mut out = format!("# dims: {} {}\n", m.matrix.rows(), m.matrix.cols());
    for (row, label) in m.matrix.row_iter().zip(&m.labels) {
        out.push_str(&label.to_string());
        for v in row {
            out.push(' ');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_text(text: &str, origin: &Path) -> Result<LabeledMatrix> {
    let mut header: Option<(usize, usize)> = None;
    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(dims) = rest.trim().strip_prefix("dims:") {
                let parts: Vec<&str> = dims.split_whitespace().collect();
                let parsed = match parts.as_slice() {
                    [r, c] => r.parse().ok().zip(c.parse().ok()),
                    _ => None,
                };
                let Some(h) = parsed else {
                    return Err(Error::parse(origin, lineno, "malformed dims header"));
                };
                header = Some(h);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let label_field = fields.next().expect("non-empty line");
        let label: usize = label_field
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("bad label '{label_field}'")))?;
        let start = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad value '{f}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(origin, lineno, format!("non-finite value '{f}'")));
            }
            data.push(v);
        }
        let w = data.len() - start;
        let expected = width.or(header.map(|h| h.1));
        if let Some(expected) = expected {
            if w != expected {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("row {} has {w} values, expected {expected}", labels.len()),
                ));
            }
        }
        width = Some(w);
        labels.push(label);
    }
    let cols = width.or(header.map(|h| h.1)).unwrap_or(0);
    if let Some((rows, _)) = header {
        if rows != labels.len() {
            return Err(Error::parse(
                origin,
                1,
                format!("header declares {rows} rows, file has {}", labels.len()),
            ));
        }
    }
    let matrix = Matrix::from_vec(labels.len(), cols, data)?;
    Ok(LabeledMatrix { matrix, labels })
}

pub fn to_binary(m: &LabeledMatrix) -> Vec<u8> {
    let (rows, cols) = m.matrix.shape();
    let mut out = Vec::with_capacity(24 + rows * (8 + 8 * cols));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for (row, &label) in m.matrix.row_iter().zip(&m.labels) {
        out.extend_from_slice(&(label as i64).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn parse_binary(bytes: &[u8], origin: &Path) -> Result<LabeledMatrix> {
    let err = |msg: &str| Error::parse(origin, 0, msg.to_owned());
    if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
        return Err(err("missing binary matrix header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let rows = word(8) as usize;
    let cols = word(16) as usize;
    let row_bytes = cols
        .checked_add(1)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| err("matrix width overflows"))?;
    if rows.checked_mul(row_bytes).and_then(|n| n.checked_add(24)) != Some(bytes.len()) {
        return Err(err("binary matrix length does not match its header"));
    }
    let mut labels = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let base = 24 + r * row_bytes;
        let label = word(base) as i64;
        if label < 0 {
            return Err(Error::parse(origin, r + 1, format!("negative label {label}")));
        }
        labels.push(label as usize);
        for c in 0..cols {
            let v = f64::from_bits(word(base + 8 + 8 * c));
            if !v.is_finite() {
                return Err(Error::parse(origin, r + 1, "non-finite value"));
            }
            data.push(v);
        }
    }
    Ok(LabeledMatrix {
        matrix: Matrix::from_vec(rows, cols, data)?,
        labels,
    })
}

/// Reads either format, recognising binary files by their magic bytes.
pub fn load_features(path: &Path) -> Result<LabeledMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        return parse_binary(&bytes, path);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::parse(path, 0, "file is not UTF-8 text"))?;
    parse_text(&text, path)
}

/// Writes binary when the extension is `bin`, text otherwise.
pub fn save_features(path: &Path, m: &LabeledMatrix) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "bin") {
        to_binary(m)
    } else {
        to_text(m).into_bytes()
    };
    write_file(path, &bytes)
}

/// Writes a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledMatrix {
        LabeledMatrix::new(
            Matrix::from_rows(&[[0.1, -2.5e-300, 1.0 / 3.0], [f64::MAX, 0.0, -0.0]]).unwrap(),
            vec![3, 0],
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let m = sample();
        let back = parse_text(&to_text(&m), Path::new("x")).unwrap();
        assert_eq!(back, m);
        assert!(back.matrix.row(1)[2].is_sign_negative());
    }

    #[test]
    fn binary_round_trip_is_lossless() {
        let m = sample();
        assert_eq!(parse_binary(&to_binary(&m), Path::new("x")).unwrap(), m);
    }

    #[test]
    fn wrong_width_names_line() {
        let text = "# dims: 2 2\n0 1 2\n1 1 2 3\n";
        match parse_text(text, Path::new("f.txt")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("row 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_row_count_checked() {
        assert!(parse_text("# dims: 3 1\n0 1\n", Path::new("f")).is_err());
    }

    #[test]
    fn truncated_binary_rejected() {
        let mut b = to_binary(&sample());
        b.pop();
        assert!(parse_binary(&b, Path::new("f")).is_err());
    }
}
