//! CSV file formats.
//!
//! * matrices: dense CSV (a blank cell marks an unobserved entry; an optional
//!   non-numeric header line is skipped) or triplets under the header
//!   `row,col,value`. The format is picked from the first line.
//! * masks: header `row,col`, one observed cell per line.
//! * groups: header `row,category`, one line per (row, category) membership.
//! * labels: header `row,label`.
//!
//! Indices are zero-based. Values are written with 17 significant digits so
//! that doubles round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{GameError, Result};
use crate::eval::LabelVector;
use crate::groups::{Category, GroupStructure};
use crate::linalg::DenseMatrix;
use crate::observation::ObservationMask;

pub const TRIPLET_HEADER: &str = "row,col,value";
pub const MASK_HEADER: &str = "row,col";
pub const GROUP_HEADER: &str = "row,category";
pub const LABEL_HEADER: &str = "row,label";

/// A matrix read from disk, with the observed set when the file implies one.
#[derive(Clone, Debug)]
pub struct MatrixFile {
    pub matrix: DenseMatrix,
    /// Present when the file had blank cells (dense) or was a triplet list.
    pub observed: Option<ObservationMask>,
}

/// Formats a value with 17 significant digits; negative zero prints as zero.
pub fn format_value(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> GameError {
    move |source| GameError::Io { context, source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GameError {
    GameError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => GameError::Io {
                context: format!("cannot open {}", path.display()),
                source,
            },
            other => parse_err(path, 0, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        out.push((line, fields));
    }
    Ok(out)
}

fn header_is(fields: &[String], expected: &str) -> bool {
    fields.join(",").eq_ignore_ascii_case(expected)
}

fn parse_index(path: &Path, line: usize, s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} index `{s}`")))
}

fn parse_value(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<MatrixFile> {
    read_matrix_with_shape(path, None)
}

/// Reads a dense or triplet matrix. `shape` fixes the dimensions of a
/// triplet file; otherwise they are one past the largest indices.
pub fn read_matrix_with_shape(
    path: impl AsRef<Path>,
    shape: Option<(usize, usize)>,
) -> Result<MatrixFile> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let Some((_, first)) = records.first() else {
        return Err(parse_err(path, 1, "file is empty"));
    };
    if header_is(first, TRIPLET_HEADER) {
        read_triplets(path, &records[1..], shape)
    } else {
        read_dense(path, &records)
    }
}

fn read_triplets(
    path: &Path,
    records: &[(usize, Vec<String>)],
    shape: Option<(usize, usize)>,
) -> Result<MatrixFile> {
    let mut entries = Vec::with_capacity(records.len());
    for (line, f) in records {
        if f.len() != 3 {
            return Err(parse_err(path, *line, "expected `row,col,value`"));
        }
        let i = parse_index(path, *line, &f[0], "row")?;
        let j = parse_index(path, *line, &f[1], "column")?;
        entries.push((i, j, parse_value(path, *line, &f[2])?));
    }
    let (rows, cols) = match shape {
        Some(s) => s,
        None => (
            entries.iter().map(|e| e.0 + 1).max().unwrap_or(0),
            entries.iter().map(|e| e.1 + 1).max().unwrap_or(0),
        ),
    };
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, 1, "triplet file has no entries"));
    }
    let mut m = nalgebra::DMatrix::zeros(rows, cols);
    for &(i, j, v) in &entries {
        if i >= rows || j >= cols {
            return Err(parse_err(path, 0, format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        m[(i, j)] = v;
    }
    let mask = ObservationMask::new(rows, cols, entries.iter().map(|e| (e.0, e.1)))?;
    Ok(MatrixFile {
        matrix: DenseMatrix::from_nalgebra(m)?,
        observed: Some(mask),
    })
}

fn read_dense(path: &Path, records: &[(usize, Vec<String>)]) -> Result<MatrixFile> {
    let looks_like_header = records[0]
        .1
        .iter()
        .any(|s| !s.is_empty() && s.parse::<f64>().is_err());
    let body = if looks_like_header { &records[1..] } else { records };
    let Some((_, first)) = body.first() else {
        return Err(parse_err(path, 1, "no data rows"));
    };
    let cols = first.len();
    let mut values = Vec::with_capacity(body.len() * cols);
    let mut observed = Vec::new();
    let mut any_blank = false;
    for (i, (line, f)) in body.iter().enumerate() {
        if f.len() != cols {
            return Err(parse_err(
                path,
                *line,
                format!("expected {cols} columns, found {}", f.len()),
            ));
        }
        for (j, s) in f.iter().enumerate() {
            if s.is_empty() {
                any_blank = true;
                values.push(0.0);
            } else {
                values.push(parse_value(path, *line, s)?);
                observed.push((i, j));
            }
        }
    }
    let rows = body.len();
    let matrix = DenseMatrix::from_row_major(rows, cols, values)?;
    let observed = if any_blank {
        Some(ObservationMask::new(rows, cols, observed)?)
    } else {
        None
    };
    Ok(MatrixFile { matrix, observed })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(io_err(format!("cannot create {}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(format!("cannot create {}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(io_err(format!("cannot write {}", path.display())))
}

/// Dense CSV without a header.
pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| format_value(m.get(i, j))).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err(ctx()))?;
    }
    finish(w, path)
}

/// Triplets for the cells of `mask`.
pub fn write_triplets(path: impl AsRef<Path>, m: &DenseMatrix, mask: &ObservationMask) -> Result<()> {
    mask.ensure_matches(m, "matrix")?;
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    writeln!(w, "{TRIPLET_HEADER}").map_err(io_err(ctx()))?;
    for &(i, j) in mask.cells() {
        writeln!(w, "{i},{j},{}", format_value(m.get(i, j))).map_err(io_err(ctx()))?;
    }
    finish(w, path)
}

fn pairs_body<'a>(
    path: &Path,
    records: &'a [(usize, Vec<String>)],
    header: &str,
) -> Result<&'a [(usize, Vec<String>)]> {
    match records.first() {
        Some((_, f)) if header_is(f, header) => Ok(&records[1..]),
        Some((line, _)) => Err(parse_err(path, *line, format!("expected header `{header}`"))),
        None => Err(parse_err(path, 1, format!("missing header `{header}`"))),
    }
}

pub fn read_mask(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<ObservationMask> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let mut cells = Vec::new();
    for (line, f) in pairs_body(path, &records, MASK_HEADER)? {
        if f.len() != 2 {
            return Err(parse_err(path, *line, "expected `row,col`"));
        }
        let i = parse_index(path, *line, &f[0], "row")?;
        let j = parse_index(path, *line, &f[1], "column")?;
        if i >= rows || j >= cols {
            return Err(parse_err(path, *line, format!("cell ({i}, {j}) outside {rows}x{cols}")));
        }
        cells.push((i, j));
    }
    ObservationMask::new(rows, cols, cells)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &ObservationMask) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    writeln!(w, "{MASK_HEADER}").map_err(io_err(ctx()))?;
    for &(i, j) in mask.cells() {
        writeln!(w, "{i},{j}").map_err(io_err(ctx()))?;
    }
    finish(w, path)
}

/// Raw category memberships in first-appearance order.
pub fn read_categories(path: impl AsRef<Path>) -> Result<Vec<Category>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (line, f) in pairs_body(path, &records, GROUP_HEADER)? {
        if f.len() != 2 || f[1].is_empty() {
            return Err(parse_err(path, *line, "expected `row,category`"));
        }
        let r = parse_index(path, *line, &f[0], "row")?;
        let k = match order.iter().position(|id| *id == f[1]) {
            Some(k) => k,
            None => {
                order.push(f[1].clone());
                rows.push(Vec::new());
                order.len() - 1
            }
        };
        rows[k].push(r);
    }
    Ok(order
        .into_iter()
        .zip(rows)
        .map(|(id, r)| Category::new(id, r))
        .collect())
}

/// Reads a group file for an `n`-row matrix. Uncovered rows are an error
/// unless `allow_uncovered`, which adds a catch-all category for them.
pub fn read_groups(path: impl AsRef<Path>, n: usize, allow_uncovered: bool) -> Result<GroupStructure> {
    let cats = read_categories(path)?;
    if allow_uncovered {
        GroupStructure::with_catch_all(n, cats)
    } else {
        GroupStructure::new(n, cats)
    }
}

pub fn write_groups(path: impl AsRef<Path>, groups: &GroupStructure) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    writeln!(w, "{GROUP_HEADER}").map_err(io_err(ctx()))?;
    for c in groups.categories() {
        for r in &c.rows {
            writeln!(w, "{r},{}", c.id).map_err(io_err(ctx()))?;
        }
    }
    finish(w, path)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let mut pairs = Vec::new();
    for (line, f) in pairs_body(path, &records, LABEL_HEADER)? {
        if f.len() != 2 {
            return Err(parse_err(path, *line, "expected `row,label`"));
        }
        pairs.push((
            parse_index(path, *line, &f[0], "row")?,
            parse_index(path, *line, &f[1], "label")?,
        ));
    }
    let n = pairs.len();
    let mut labels = vec![usize::MAX; n];
    for (r, l) in pairs {
        if r >= n || labels[r] != usize::MAX {
            return Err(parse_err(path, 0, format!("rows must be 0..{n} with one label each")));
        }
        labels[r] = l;
    }
    Ok(LabelVector::new(labels))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    writeln!(w, "{LABEL_HEADER}").map_err(io_err(ctx()))?;
    for (i, l) in labels.labels().iter().enumerate() {
        writeln!(w, "{i},{l}").map_err(io_err(ctx()))?;
    }
    finish(w, path)
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("cannot write {}", path.display());
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| io_err(ctx())(std::io::Error::other(e)))?;
    writeln!(w).map_err(io_err(ctx()))?;
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn dense_with_blanks_derives_mask() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "1.5,,3\n,2,\n").unwrap();
        let f = read_matrix(&p).unwrap();
        assert_eq!(f.matrix.to_row_major(), vec![1.5, 0.0, 3.0, 0.0, 2.0, 0.0]);
        assert_eq!(f.observed.unwrap().cells(), &[(0, 0), (0, 2), (1, 1)]);
    }

    #[test]
    fn dense_header_is_skipped() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n3,4\n").unwrap();
        let f = read_matrix(&p).unwrap();
        assert_eq!(f.matrix.shape(), (2, 2));
        assert!(f.observed.is_none());
    }

    #[test]
    fn triplets_detected_by_header() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "row,col,value\n0,1,2.5\n2,0,-1\n").unwrap();
        let f = read_matrix(&p).unwrap();
        assert_eq!(f.matrix.shape(), (3, 2));
        assert_eq!(f.matrix.get(0, 1), 2.5);
        assert_eq!(f.observed.as_ref().unwrap().len(), 2);
        let f = read_matrix_with_shape(&p, Some((4, 4))).unwrap();
        assert_eq!(f.matrix.shape(), (4, 4));
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(GameError::Parse { line: 2, .. })));
        std::fs::write(&p, "1,2\n3,zz\n").unwrap();
        assert!(read_matrix(&p).is_err());
        assert!(matches!(read_matrix(dir.path().join("missing.csv")), Err(GameError::Io { .. })));
    }

    #[test]
    fn mask_and_groups_round_trip() {
        let dir = tmp();
        let mask = crate::observation::sample_uniform_mask(7, 5, 0.4, 1).unwrap();
        write_mask(dir.path().join("m.csv"), &mask).unwrap();
        assert_eq!(read_mask(dir.path().join("m.csv"), 7, 5).unwrap(), mask);
        assert!(read_mask(dir.path().join("m.csv"), 3, 5).is_err());

        let g = GroupStructure::new(5, vec![Category::new("zeta", [0, 1, 2]), Category::new("alpha", [2, 3, 4])]).unwrap();
        write_groups(dir.path().join("g.csv"), &g).unwrap();
        let back = read_groups(dir.path().join("g.csv"), 5, false).unwrap();
        assert_eq!(back.ids().collect::<Vec<_>>(), vec!["zeta", "alpha"]);
        assert_eq!(back.categories(), g.categories());
    }

    #[test]
    fn groups_cover_enforced_on_read() {
        let dir = tmp();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "row,category\n0,a\n2,a\n").unwrap();
        assert!(matches!(read_groups(&p, 3, false), Err(GameError::CoverViolation { row: 1 })));
        let g = read_groups(&p, 3, true).unwrap();
        assert_eq!(g.len(), 2);
        std::fs::write(&p, "row,cat\n0,a\n").unwrap();
        assert!(read_groups(&p, 1, false).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tmp();
        let l = LabelVector::new(vec![2, 0, 1, 1]);
        write_labels(dir.path().join("l.csv"), &l).unwrap();
        assert_eq!(read_labels(dir.path().join("l.csv")).unwrap(), l);
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(format_value(-0.0), format_value(0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn dense_values_round_trip_exactly(seed in any::<u64>(), scale in -300i32..300) {
            let dir = tmp();
            let m = DenseMatrix::random_normal(4, 3, &mut rng::seeded(seed)).scale(10f64.powi(scale));
            write_matrix(dir.path().join("m.csv"), &m).unwrap();
            let back = read_matrix(dir.path().join("m.csv")).unwrap();
            prop_assert_eq!(back.matrix, m);
        }
    }
}
