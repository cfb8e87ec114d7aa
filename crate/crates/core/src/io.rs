//! CSV formats for matrices, comparisons, partitions, kernels and linkage
//! lists. Parsers take the file text plus a name used in error messages, and
//! report errors with 1-based line numbers.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::dendrogram::{Dendrogram, Merge};
use crate::engine::Partition;
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::oracle::QuadrupletSet;
use crate::planted::SimilarityMatrix;

/// Reads a whole file, for use with the `parse_*` functions.
pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

struct Rows<'a> {
    source: &'a str,
    inner: csv::StringRecordsIntoIter<&'a [u8]>,
}

fn rows<'a>(text: &'a str, source: &'a str) -> Rows<'a> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    Rows {
        source,
        inner: reader.into_records(),
    }
}

impl Iterator for Rows<'_> {
    type Item = Result<(usize, csv::StringRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rec = match self.inner.next()? {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line() as usize);
                    return Some(Err(Error::parse(self.source, line, e.to_string())));
                }
            };
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let line = rec.position().map_or(0, |p| p.line() as usize);
            return Some(Ok((line, rec)));
        }
    }
}

fn field<T: FromStr>(source: &str, line: usize, rec: &csv::StringRecord, col: usize) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::parse(source, line, format!("column {}: cannot parse {raw:?}", col + 1)))
}

fn expect_width(source: &str, line: usize, rec: &csv::StringRecord, width: usize) -> Result<()> {
    if rec.len() != width {
        return Err(Error::parse(
            source,
            line,
            format!("expected {width} columns, found {}", rec.len()),
        ));
    }
    Ok(())
}

fn expect_header(source: &str, rows: &mut Rows<'_>, names: &[&str]) -> Result<()> {
    let (line, rec) = rows
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing header row"))??;
    let got: Vec<&str> = rec.iter().collect();
    if got != names {
        return Err(Error::parse(
            source,
            line,
            format!("expected header {}, found {}", names.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Reads a `n,<n>` header and `n` rows of `n` numbers.
fn parse_dense<T: FromStr + Copy>(
    text: &str,
    source: &str,
    diagonal: impl Fn(&str) -> Option<T>,
) -> Result<(usize, Vec<T>)> {
    let mut it = rows(text, source);
    let (line, head) = it
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing `n,<count>` header"))??;
    expect_width(source, line, &head, 2)?;
    if &head[0] != "n" {
        return Err(Error::parse(source, line, "header must read `n,<count>`"));
    }
    let n: usize = field(source, line, &head, 1)?;
    if n > crate::pairs::MAX_ITEMS {
        return Err(Error::parse(source, line, format!("{n} items exceed the limit")));
    }
    let mut data = Vec::with_capacity((n * n).min(text.len()));
    for r in 0..n {
        let (line, rec) = it
            .next()
            .ok_or_else(|| Error::parse(source, line + r + 1, format!("expected {n} rows, found {r}")))??;
        expect_width(source, line, &rec, n)?;
        for c in 0..n {
            let v = if c == r {
                diagonal(&rec[c]).map_or_else(|| field(source, line, &rec, c), Ok)?
            } else {
                field(source, line, &rec, c)?
            };
            data.push(v);
        }
    }
    if let Some(extra) = it.next() {
        let (line, _) = extra?;
        return Err(Error::parse(source, line, "rows beyond the declared count"));
    }
    Ok((n, data))
}

/// Dense similarity matrix: header `n,<n>`, then one row per item. The
/// diagonal is ignored and written as `NaN`.
pub fn parse_similarity_csv(text: &str, source: &str) -> Result<SimilarityMatrix> {
    let (n, data) = parse_dense::<f64>(text, source, |s| s.parse().ok().or(Some(f64::NAN)))?;
    if let Some(pos) = data
        .iter()
        .enumerate()
        .position(|(idx, v)| idx / n.max(1) != idx % n.max(1) && !v.is_finite())
    {
        return Err(Error::parse(
            source,
            pos / n + 2,
            format!("non-finite similarity in column {}", pos % n + 1),
        ));
    }
    for i in 0..n {
        for j in i + 1..n {
            if data[i * n + j] != data[j * n + i] {
                return Err(Error::parse(
                    source,
                    i + 2,
                    format!("column {} differs from its transpose entry", j + 1),
                ));
            }
        }
    }
    SimilarityMatrix::from_dense(n, data)
}

pub fn write_similarity_csv(w: &SimilarityMatrix) -> String {
    let n = w.n();
    let mut out = format!("n,{n}\n");
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            if i == j {
                out.push_str("NaN");
            } else {
                write!(out, "{:?}", w.get(i, j)).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Quadruplet observations with header `i,j,k,l`, meaning `w_ij > w_kl`.
pub fn parse_quadruplets_csv(text: &str, source: &str) -> Result<Vec<(usize, usize, usize, usize)>> {
    let mut it = rows(text, source);
    expect_header(source, &mut it, &["i", "j", "k", "l"])?;
    it.map(|r| {
        let (line, rec) = r?;
        expect_width(source, line, &rec, 4)?;
        let q: (usize, usize, usize, usize) = (
            field(source, line, &rec, 0)?,
            field(source, line, &rec, 1)?,
            field(source, line, &rec, 2)?,
            field(source, line, &rec, 3)?,
        );
        if q.0 == q.1 || q.2 == q.3 || (q.0.min(q.1), q.0.max(q.1)) == (q.2.min(q.3), q.2.max(q.3)) {
            return Err(Error::parse(source, line, "degenerate quadruplet"));
        }
        Ok(q)
    })
    .collect()
}

/// Triplet observations with header `i,j,k`: `i` is closer to `j` than to `k`.
pub fn parse_triplets_csv(text: &str, source: &str) -> Result<Vec<(usize, usize, usize)>> {
    let mut it = rows(text, source);
    expect_header(source, &mut it, &["i", "j", "k"])?;
    it.map(|r| {
        let (line, rec) = r?;
        expect_width(source, line, &rec, 3)?;
        let t: (usize, usize, usize) = (
            field(source, line, &rec, 0)?,
            field(source, line, &rec, 1)?,
            field(source, line, &rec, 2)?,
        );
        if t.0 == t.1 || t.0 == t.2 || t.1 == t.2 {
            return Err(Error::parse(source, line, "triplet repeats an index"));
        }
        Ok(t)
    })
    .collect()
}

pub fn write_quadruplets_csv(qs: &QuadrupletSet) -> String {
    let mut out = String::from("i,j,k,l\n");
    for q in qs.iter() {
        writeln!(out, "{},{},{},{}", q.winner.a(), q.winner.b(), q.loser.a(), q.loser.b()).unwrap();
    }
    out
}

/// Feature rows of equal width. A first row that is not entirely numeric is
/// taken as a header. Returns the row-major values and the width.
pub fn parse_features_csv(text: &str, source: &str) -> Result<(Vec<f64>, usize)> {
    let mut values = Vec::new();
    let mut width = None;
    for (idx, r) in rows(text, source).enumerate() {
        let (line, rec) = r?;
        if idx == 0 && rec.iter().any(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        expect_width(source, line, &rec, w)?;
        for c in 0..w {
            let v: f64 = field(source, line, &rec, c)?;
            if !v.is_finite() {
                return Err(Error::parse(source, line, format!("column {}: non-finite value", c + 1)));
            }
            values.push(v);
        }
    }
    match width {
        Some(w) if w > 0 => Ok((values, w)),
        _ => Err(Error::parse(source, 1, "no feature rows")),
    }
}

/// Partition with header `item_index,cluster_id`; every item must appear
/// exactly once.
pub fn parse_partition_csv(text: &str, source: &str) -> Result<Partition> {
    let mut it = rows(text, source);
    expect_header(source, &mut it, &["item_index", "cluster_id"])?;
    let mut entries: Vec<(usize, usize, usize)> = Vec::new();
    for r in it {
        let (line, rec) = r?;
        expect_width(source, line, &rec, 2)?;
        let item: usize = field(source, line, &rec, 0)?;
        if item >= crate::pairs::MAX_ITEMS {
            return Err(Error::parse(source, line, format!("item {item} exceeds the limit")));
        }
        entries.push((item, field(source, line, &rec, 1)?, line));
    }
    let n = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let mut labels = vec![None; n];
    for &(item, cluster, line) in &entries {
        if labels[item].replace(cluster).is_some() {
            return Err(Error::parse(source, line, format!("item {item} listed twice")));
        }
    }
    if let Some(missing) = labels.iter().position(Option::is_none) {
        return Err(Error::parse(source, 1, format!("item {missing} has no cluster")));
    }
    let labels: Vec<usize> = labels.into_iter().map(Option::unwrap).collect();
    Ok(Partition::from_labels(&labels))
}

pub fn write_partition_csv(labels: &[usize]) -> String {
    let mut out = String::from("item_index,cluster_id\n");
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i},{l}").unwrap();
    }
    out
}

/// Dense kernel with header `n,<n>`; an optional `# queries_used=<q>`
/// footer records the active queries spent.
pub fn write_kernel_csv(k: &KernelMatrix, queries_used: Option<u64>) -> String {
    let n = k.n();
    let mut out = format!("n,{n}\n");
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", k.get(i, j)).unwrap();
        }
        out.push('\n');
    }
    if let Some(q) = queries_used {
        writeln!(out, "# queries_used={q}").unwrap();
    }
    out
}

/// Inverse of [`write_kernel_csv`], returning the footer value if present.
pub fn parse_kernel_csv(text: &str, source: &str) -> Result<(KernelMatrix, Option<u64>)> {
    let (n, data) = parse_dense::<i64>(text, source, |_| None)?;
    let k = KernelMatrix::from_fn(n, |i, j| data[i * n + j]);
    for i in 0..n {
        for j in 0..n {
            if data[i * n + j] != data[j * n + i] {
                return Err(Error::parse(source, i + 2, format!("kernel not symmetric at column {}", j + 1)));
            }
        }
    }
    let mut queries = None;
    for (idx, line) in text.lines().enumerate() {
        if let Some(v) = line.trim().strip_prefix("# queries_used=") {
            queries = Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::parse(source, idx + 1, format!("bad query count {v:?}")))?,
            );
        }
    }
    Ok((k, queries))
}

/// Linkage list: `step,left_id,right_id,new_id,height`, leaves numbered
/// `0..n`, merge `t` creating node `n + t`. Height may be empty.
pub fn write_linkage_csv(d: &Dendrogram) -> String {
    let n = d.n_leaves();
    let mut out = String::from("step,left_id,right_id,new_id,height\n");
    for (t, m) in d.merges().iter().enumerate() {
        let h = m.height.map_or(String::new(), |h| format!("{h:?}"));
        writeln!(out, "{t},{},{},{},{h}", m.left, m.right, n + t).unwrap();
    }
    out
}

pub fn parse_linkage_csv(text: &str, source: &str) -> Result<Dendrogram> {
    let mut it = rows(text, source);
    expect_header(source, &mut it, &["step", "left_id", "right_id", "new_id", "height"])?;
    let mut merges = Vec::new();
    let mut new_ids = Vec::new();
    for r in it {
        let (line, rec) = r?;
        expect_width(source, line, &rec, 5)?;
        let step: usize = field(source, line, &rec, 0)?;
        if step != merges.len() {
            return Err(Error::parse(source, line, format!("expected step {}, found {step}", merges.len())));
        }
        let height = if rec[4].is_empty() {
            None
        } else {
            Some(field::<f64>(source, line, &rec, 4)?)
        };
        merges.push(Merge {
            left: field(source, line, &rec, 1)?,
            right: field(source, line, &rec, 2)?,
            height,
        });
        new_ids.push((line, field::<usize>(source, line, &rec, 3)?));
    }
    let n = merges.len() + 1;
    if n > crate::pairs::MAX_ITEMS {
        return Err(Error::parse(source, 1, "too many merges"));
    }
    for (t, &(line, id)) in new_ids.iter().enumerate() {
        if id != n + t {
            return Err(Error::parse(source, line, format!("new_id must be {}, found {id}", n + t)));
        }
    }
    Dendrogram::new(n, merges).map_err(|e| Error::parse(source, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_round_trip() {
        let w = SimilarityMatrix::from_fn(3, |i, j| (i + j) as f64 * 0.25 - 0.1);
        let back = parse_similarity_csv(&write_similarity_csv(&w), "w").unwrap();
        let bits = |m: &SimilarityMatrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&w));
    }

    #[test]
    fn similarity_errors_carry_lines() {
        let err = parse_similarity_csv("n,2\nNaN,1\n2,NaN\n", "w.csv").unwrap_err();
        assert!(err.to_string().starts_with("w.csv:2:"), "{err}");
        let err = parse_similarity_csv("n,2\nNaN,1\nx,NaN\n", "w.csv").unwrap_err();
        assert!(err.to_string().starts_with("w.csv:3:"), "{err}");
        assert!(parse_similarity_csv("n,2\nNaN,1\n", "w").is_err());
    }

    #[test]
    fn comparison_files() {
        let q = parse_quadruplets_csv("i,j,k,l\n0,1,2,3\n\n1,2,0,3\n", "q").unwrap();
        assert_eq!(q, vec![(0, 1, 2, 3), (1, 2, 0, 3)]);
        let err = parse_quadruplets_csv("i,j,k,l\n0,1,2,3\n0,1,1,0\n", "q").unwrap_err();
        assert!(err.to_string().starts_with("q:3:"), "{err}");
        assert!(parse_quadruplets_csv("0,1,2,3\n", "q").is_err());
        let t = parse_triplets_csv("i,j,k\n0,1,2\n2,0,1\n", "t").unwrap();
        assert_eq!(t, vec![(0, 1, 2), (2, 0, 1)]);
        assert!(parse_triplets_csv("i,j,k\n0,0,1\n", "t").is_err());
    }

    #[test]
    fn features_with_and_without_header() {
        let (v, d) = parse_features_csv("a,b\n1,0\n0,1\n", "f").unwrap();
        assert_eq!((v, d), (vec![1.0, 0.0, 0.0, 1.0], 2));
        let (v, d) = parse_features_csv("1,2,3\n", "f").unwrap();
        assert_eq!((v.len(), d), (3, 3));
        let err = parse_features_csv("1,2\n3\n", "f").unwrap_err();
        assert!(err.to_string().starts_with("f:2:"), "{err}");
    }

    #[test]
    fn partition_round_trip() {
        let labels = vec![1, 0, 1, 2];
        let p = parse_partition_csv(&write_partition_csv(&labels), "p").unwrap();
        assert_eq!(p, Partition::from_labels(&labels));
        assert!(parse_partition_csv("item_index,cluster_id\n0,0\n0,1\n", "p").is_err());
        assert!(parse_partition_csv("item_index,cluster_id\n1,0\n", "p").is_err());
    }

    #[test]
    fn kernel_round_trip_with_footer() {
        let k = KernelMatrix::from_fn(2, |i, j| if i == j { 3 } else { -1 });
        let text = write_kernel_csv(&k, Some(17));
        assert!(text.ends_with("# queries_used=17\n"));
        let (back, q) = parse_kernel_csv(&text, "k").unwrap();
        assert_eq!((back, q), (k, Some(17)));
    }

    #[test]
    fn linkage_round_trip() {
        let d = Dendrogram::from_merges(4, vec![(0, 1), (2, 3), (4, 5)]).unwrap();
        assert_eq!(parse_linkage_csv(&write_linkage_csv(&d), "d").unwrap(), d);
        assert!(parse_linkage_csv("step,left_id,right_id,new_id,height\n0,0,0,2,\n", "d").is_err());
    }
}
