//! Matrix Market reader and writer for dense complex matrices.

use std::fmt::Write as _;
use std::path::Path;

use specdiv::{CMatrix, Complex64, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Complex,
}

impl Field {
    fn width(self) -> usize {
        match self {
            Field::Real | Field::Integer => 1,
            Field::Complex => 2,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

fn parse_header(line: &str) -> Result<(Layout, Field)> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    if words[1] != "matrix" {
        return Err(parse_err(1, format!("unsupported object `{}`", words[1])));
    }
    let layout = match words[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(1, format!("unsupported format `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        other => return Err(parse_err(1, format!("unsupported field `{other}`"))),
    };
    if words[4] != "general" {
        return Err(parse_err(
            1,
            format!("symmetry `{}` is not supported; only `general` matrices are read", words[4]),
        ));
    }
    Ok((layout, field))
}

fn number(tok: &str, line: usize, field: Field) -> Result<f64> {
    let v = if field == Field::Integer {
        tok.parse::<i64>().map(|i| i as f64).map_err(|_| ())
    } else {
        tok.parse::<f64>().map_err(|_| ())
    };
    match v {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(parse_err(line, format!("invalid {field:?} value `{tok}`").to_lowercase())),
    }
}

fn index(tok: &str, line: usize, bound: usize) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(i) if (1..=bound).contains(&i) => Ok(i - 1),
        _ => Err(parse_err(line, format!("index `{tok}` outside 1..={bound}"))),
    }
}

fn entry(toks: &[&str], line: usize, field: Field) -> Result<Complex64> {
    let re = number(toks[0], line, field)?;
    let im = if field == Field::Complex {
        number(toks[1], line, field)?
    } else {
        0.0
    };
    Ok(Complex64::new(re, im))
}

/// Parses Matrix Market text. Real and integer entries get zero imaginary
/// parts; coordinate entries absent from the file are zero and repeated
/// coordinates are summed.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (layout, field) = parse_header(first)?;
    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = data.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let expect = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != expect {
        return Err(parse_err(size_line, format!("size line needs {expect} integers")));
    }
    let dim = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| parse_err(size_line, format!("invalid size `{t}`")))
    };
    let (rows, cols) = (dim(dims[0])?, dim(dims[1])?);
    let width = field.width();

    let mut values = vec![Complex64::new(0.0, 0.0); rows * cols];
    let mut last_line = size_line;
    match layout {
        Layout::Array => {
            for (k, slot) in values.iter_mut().enumerate() {
                let (no, l) = data
                    .next()
                    .ok_or_else(|| parse_err(last_line, format!("expected {} entries, found {k}", rows * cols)))?;
                last_line = no;
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() != width {
                    return Err(parse_err(no, format!("expected {width} value(s), found {}", toks.len())));
                }
                *slot = entry(&toks, no, field)?;
            }
        }
        Layout::Coordinate => {
            let nnz = dim(dims[2])?;
            for k in 0..nnz {
                let (no, l) = data
                    .next()
                    .ok_or_else(|| parse_err(last_line, format!("expected {nnz} entries, found {k}")))?;
                last_line = no;
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() != 2 + width {
                    return Err(parse_err(no, format!("expected {} fields, found {}", 2 + width, toks.len())));
                }
                let i = index(toks[0], no, rows)?;
                let j = index(toks[1], no, cols)?;
                values[i + j * rows] += entry(&toks[2..], no, field)?;
            }
        }
    }
    if let Some((no, _)) = data.next() {
        return Err(parse_err(no, "unexpected data after the last entry"));
    }
    CMatrix::from_col_major(rows, cols, values)
}

/// Complex array format, column-major, 17 significant digits.
pub fn format_matrix(a: &CMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array complex general\n");
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let z = a[(i, j)];
            let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
        }
    }
    out
}

pub fn write_matrix(path: &Path, a: &CMatrix) -> Result<()> {
    std::fs::write(path, format_matrix(a)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
