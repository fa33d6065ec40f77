//! Plain-text formats: one segment, gold row or matrix row per line. Blank
//! lines and `#` comments are skipped.

use super::{
    validate_segments, AlignmentError, GoldAlignment, Granularity, SimilarityMatrix, VideoSegment,
};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn perr(line: usize, message: impl Into<String>) -> AlignmentError {
    AlignmentError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, field: &str) -> Result<T, AlignmentError> {
    field
        .parse()
        .map_err(|_| perr(line, format!("bad number `{field}`")))
}

/// `index start end` per line.
pub fn parse_segments(text: &str) -> Result<Vec<VideoSegment>, AlignmentError> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(perr(line, "expected `index start end`"));
        }
        out.push(VideoSegment {
            index: num(line, f[0])?,
            start: num(line, f[1])?,
            end: num(line, f[2])?,
        });
    }
    validate_segments(&out)?;
    Ok(out)
}

pub fn write_segments(segments: &[VideoSegment]) -> String {
    segments
        .iter()
        .map(|s| format!("{} {} {}\n", s.index, s.start, s.end))
        .collect()
}

/// `granularity: <g>` header, then `segment sentence` lines with `-` for
/// unmatched. Segments must be listed 0..N in order.
pub fn parse_gold(text: &str) -> Result<GoldAlignment, AlignmentError> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| perr(1, "empty gold file"))?;
    let granularity = header
        .strip_prefix("granularity:")
        .ok_or_else(|| perr(line, "expected `granularity: sentence|sub_sentence`"))?
        .parse::<Granularity>()
        .map_err(|e| perr(line, e.to_string()))?;
    let mut assignment = Vec::new();
    for (line, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 2 {
            return Err(perr(line, "expected `segment sentence`"));
        }
        let seg: usize = num(line, f[0])?;
        if seg != assignment.len() {
            return Err(perr(line, format!("segment {seg} out of order")));
        }
        assignment.push(if f[1] == "-" {
            None
        } else {
            Some(num(line, f[1])?)
        });
    }
    Ok(GoldAlignment {
        assignment,
        granularity,
    })
}

pub fn write_gold(gold: &GoldAlignment) -> String {
    let mut out = format!("granularity: {}\n", gold.granularity);
    for (i, a) in gold.assignment.iter().enumerate() {
        match a {
            Some(j) => out.push_str(&format!("{i} {j}\n")),
            None => out.push_str(&format!("{i} -\n")),
        }
    }
    out
}

/// `N M` header followed by N rows of M values.
pub fn parse_similarity(text: &str, provenance: &str) -> Result<SimilarityMatrix, AlignmentError> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty similarity file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(perr(line, "expected `N M` header"));
    }
    let (n, m): (usize, usize) = (num(line, dims[0])?, num(line, dims[1])?);
    let mut values = Vec::with_capacity(n * m);
    let mut rows = 0;
    for (line, l) in lines {
        let row = l
            .split_whitespace()
            .map(|f| num::<f64>(line, f))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != m {
            return Err(perr(
                line,
                format!("expected {m} values, got {}", row.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(AlignmentError::LengthMismatch {
            what: "similarity rows",
            got: rows,
            expected: n,
        });
    }
    SimilarityMatrix::new(n, m, values, provenance)
}

pub fn write_similarity(s: &SimilarityMatrix) -> String {
    let mut out = format!("{} {}\n", s.n(), s.m());
    for i in 0..s.n() {
        let row: Vec<String> = s.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
