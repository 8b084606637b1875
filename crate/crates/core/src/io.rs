//! Plain-text file formats.
//!
//! Every format is line oriented with a self-describing header. Floats are
//! written with 17 significant digits so that write, read, write is
//! byte-identical.
//!
//! * Cameras: `CAMERAS n`, then `3n` rows of 4 values (camera `i` owns rows
//!   `3i..3i+3`).
//! * Block tensor: `BLOCKTENSOR n`, then one line `i j k v₀ … v₂₆` per
//!   observed block where `v[w + 3q + 9r]` is entry `(w, q, r)`. A trailing
//!   `MASK m` section lists the `m` unobserved triples as `i j k`.
//! * Scales: `SCALES n`, then one line `i j k λ` per triple.
//!
//! Blank lines and lines starting with `#` are ignored by the readers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::block::{triples, BlockTensor, ScaleField};
use crate::error::{Error, Result};
use crate::eval::ErrorSummary;
use crate::sync::IterationRecord;
use crate::tensor::Tensor3;

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (no, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                self.last = no + 1;
                return Some((no + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last = self.last;
        self.next_content().ok_or_else(|| Error::Parse {
            line: last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_header(lines: &mut Lines<'_>, tag: &str) -> Result<usize> {
    let (no, l) = lines.expect(tag)?;
    let mut it = l.split_whitespace();
    if it.next() != Some(tag) {
        return Err(parse_err(no, format!("expected header '{tag} n'")));
    }
    let n = it
        .next()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| parse_err(no, "missing or bad count in header"))?;
    if it.next().is_some() {
        return Err(parse_err(no, "trailing tokens in header"));
    }
    Ok(n)
}

fn parse_floats(no: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(no, format!("bad number '{t}'")))
        })
        .collect()
}

fn parse_triple(no: usize, toks: &[&str], n: usize) -> Result<(usize, usize, usize)> {
    let mut idx = [0usize; 3];
    for (slot, t) in idx.iter_mut().zip(toks) {
        *slot = t
            .parse::<usize>()
            .ok()
            .filter(|&v| v < n)
            .ok_or_else(|| parse_err(no, format!("bad camera index '{t}' for n = {n}")))?;
    }
    Ok((idx[0], idx[1], idx[2]))
}

fn ensure_done(lines: &mut Lines<'_>) -> Result<()> {
    match lines.next_content() {
        None => Ok(()),
        Some((no, _)) => Err(parse_err(no, "unexpected trailing content")),
    }
}

/// Serializes a `3n × 4` camera stack.
pub fn write_cameras(stack: &DMatrix<f64>) -> Result<String> {
    if stack.ncols() != 4 || stack.nrows() % 3 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "camera stack must be 3n x 4, got {} x {}",
            stack.nrows(),
            stack.ncols()
        )));
    }
    let mut out = format!("CAMERAS {}\n", stack.nrows() / 3);
    for r in 0..stack.nrows() {
        let row: Vec<String> = (0..4).map(|c| fmt_f64(stack[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_cameras(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = Lines::new(text);
    let n = parse_header(&mut lines, "CAMERAS")?;
    let mut stack = DMatrix::zeros(3 * n, 4);
    for r in 0..3 * n {
        let (no, l) = lines.expect("camera row")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(no, format!("expected 4 values, got {}", toks.len())));
        }
        for (c, v) in parse_floats(no, &toks)?.into_iter().enumerate() {
            stack[(r, c)] = v;
        }
    }
    ensure_done(&mut lines)?;
    Ok(stack)
}

pub fn write_block_tensor(t: &BlockTensor) -> String {
    let n = t.n();
    let mut out = format!("BLOCKTENSOR {n}\n");
    let mut unobserved = Vec::new();
    for (i, j, k) in triples(n) {
        if !t.is_observed(i, j, k) {
            unobserved.push((i, j, k));
            continue;
        }
        let _ = write!(out, "{i} {j} {k}");
        for v in t.block(i, j, k).data() {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "MASK {}", unobserved.len());
    for (i, j, k) in unobserved {
        let _ = writeln!(out, "{i} {j} {k}");
    }
    out
}

pub fn read_block_tensor(text: &str) -> Result<BlockTensor> {
    let mut lines = Lines::new(text);
    let n = parse_header(&mut lines, "BLOCKTENSOR")?;
    if n < 3 {
        return Err(parse_err(1, format!("need at least 3 cameras, got {n}")));
    }
    let mut tensor = Tensor3::zeros([3 * n; 3]);
    let mut seen = vec![false; n * n * n];
    let mut mask = vec![false; n * n * n];
    let id = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let mask_count = loop {
        let (no, l) = lines.expect("block line or MASK section")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks[0] == "MASK" {
            break toks
                .get(1)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|_| toks.len() == 2)
                .ok_or_else(|| parse_err(no, "bad MASK header"))?;
        }
        if toks.len() != 30 {
            return Err(parse_err(no, format!("expected 3 indices and 27 values, got {} tokens", toks.len())));
        }
        let (i, j, k) = parse_triple(no, &toks[..3], n)?;
        if std::mem::replace(&mut seen[id(i, j, k)], true) {
            return Err(parse_err(no, format!("block ({i}, {j}, {k}) listed twice")));
        }
        mask[id(i, j, k)] = true;
        let vals = parse_floats(no, &toks[3..])?;
        let block = Tensor3::from_vec([3, 3, 3], vals)?;
        crate::block::set_block_of(&mut tensor, i, j, k, &block);
    };
    for _ in 0..mask_count {
        let (no, l) = lines.expect("unobserved triple")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(no, "expected 'i j k'"));
        }
        let (i, j, k) = parse_triple(no, &toks, n)?;
        if i == j && j == k {
            return Err(parse_err(no, format!("diagonal block ({i}, {i}, {i}) cannot be unobserved")));
        }
        if std::mem::replace(&mut seen[id(i, j, k)], true) {
            return Err(parse_err(no, format!("block ({i}, {j}, {k}) listed twice")));
        }
    }
    ensure_done(&mut lines)?;
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (i, j, k) = (missing % n, (missing / n) % n, missing / (n * n));
        return Err(parse_err(
            lines.last,
            format!("block ({i}, {j}, {k}) is neither listed nor in MASK"),
        ));
    }
    BlockTensor::from_parts(tensor, mask)
}

pub fn write_scales(s: &ScaleField) -> String {
    let n = s.n();
    let mut out = format!("SCALES {n}\n");
    for (i, j, k) in triples(n) {
        let _ = writeln!(out, "{i} {j} {k} {}", fmt_f64(s.get(i, j, k)));
    }
    out
}

pub fn read_scales(text: &str) -> Result<ScaleField> {
    let mut lines = Lines::new(text);
    let n = parse_header(&mut lines, "SCALES")?;
    let mut field = ScaleField::ones(n);
    let mut seen = vec![false; n * n * n];
    for _ in 0..n * n * n {
        let (no, l) = lines.expect("scale line")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(no, "expected 'i j k value'"));
        }
        let (i, j, k) = parse_triple(no, &toks[..3], n)?;
        if std::mem::replace(&mut seen[i + n * (j + n * k)], true) {
            return Err(parse_err(no, format!("scale ({i}, {j}, {k}) listed twice")));
        }
        field.set(i, j, k, parse_floats(no, &toks[3..])?[0]);
    }
    ensure_done(&mut lines)?;
    Ok(field)
}

pub const DIAGNOSTICS_HEADER: &str = "iteration,rank1,rank2,rank3,scale_variance,tensor_change,mode2_gap";

/// Per-iteration diagnostics, one row per record.
pub fn write_diagnostics_csv(records: &[IterationRecord]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{:e},{:e}",
            r.iteration, r.ranks[0], r.ranks[1], r.ranks[2], r.scale_variance, r.tensor_change, r.mode2_gap
        );
    }
    out
}

pub const EVAL_SUMMARY_HEADER: &str = "meanR_deg,medianR_deg,meanT,medianT";
pub const EVAL_CAMERA_HEADER: &str = "camera,rotation_deg,location";

/// Summary row followed by a per-camera table.
pub fn write_eval_csv(s: &ErrorSummary) -> String {
    let mut out = format!(
        "{EVAL_SUMMARY_HEADER}\n{:e},{:e},{:e},{:e}\n{EVAL_CAMERA_HEADER}\n",
        s.mean_rotation_deg, s.median_rotation_deg, s.mean_location, s.median_location
    );
    for (c, (r, t)) in s.rotation_deg.iter().zip(&s.location).enumerate() {
        let _ = writeln!(out, "{c},{r:e},{t:e}");
    }
    out
}

pub fn read_eval_csv(text: &str) -> Result<ErrorSummary> {
    let mut lines = Lines::new(text);
    let (no, h) = lines.expect("summary header")?;
    if h != EVAL_SUMMARY_HEADER {
        return Err(parse_err(no, "bad summary header"));
    }
    let (no, l) = lines.expect("summary row")?;
    let toks: Vec<&str> = l.split(',').collect();
    if toks.len() != 4 {
        return Err(parse_err(no, "summary row needs 4 values"));
    }
    let summary = parse_floats(no, &toks)?;
    let (no, h) = lines.expect("camera header")?;
    if h != EVAL_CAMERA_HEADER {
        return Err(parse_err(no, "bad camera header"));
    }
    let (mut rot, mut loc) = (Vec::new(), Vec::new());
    while let Some((no, l)) = lines.next_content() {
        let toks: Vec<&str> = l.split(',').collect();
        if toks.len() != 3 || toks[0].parse::<usize>().ok() != Some(rot.len()) {
            return Err(parse_err(no, "bad camera row"));
        }
        let v = parse_floats(no, &toks[1..])?;
        rot.push(v[0]);
        loc.push(v[1]);
    }
    Ok(ErrorSummary {
        rotation_deg: rot,
        location: loc,
        mean_rotation_deg: summary[0],
        median_rotation_deg: summary[1],
        mean_location: summary[2],
        median_location: summary[3],
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}
