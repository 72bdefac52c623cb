//! Stream export and import in CSV and ARFF.
//!
//! CSV: header `att1,...,att5,class,gen_type`; class written by name, gen_type
//! empty when unknown. ARFF: numeric attributes and a nominal class, no
//! gen_type. Numbers are written in shortest round-trip form so a re-import
//! followed by a re-export reproduces the file byte for byte.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::model::{ExampleType, LabeledExample, Point, N_ATTRIBUTES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Arff,
}

impl FromStr for StreamFormat {
    type Err = StreamIoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "arff" => Ok(Self::Arff),
            _ => Err(StreamIoError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Arff => "arff",
        })
    }
}

#[derive(Debug, Error)]
pub enum StreamIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unsupported format {0:?} (expected csv or arff)")]
    UnsupportedFormat(String),
    #[error("empty stream file")]
    Empty,
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> StreamIoError {
    StreamIoError::Parse { line, column, message: message.into() }
}

/// A materialized stream with its class vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamData {
    pub relation: String,
    pub class_names: Vec<String>,
    pub examples: Vec<LabeledExample>,
}

pub const CSV_HEADER: &str = "att1,att2,att3,att4,att5,class,gen_type";

pub fn write_csv<W: Write>(out: &mut W, class_names: &[String], examples: &[LabeledExample]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for ex in examples {
        write_csv_row(out, class_names, ex)?;
    }
    Ok(())
}

pub fn write_csv_row<W: Write>(out: &mut W, class_names: &[String], ex: &LabeledExample) -> io::Result<()> {
    for v in &ex.x {
        write!(out, "{v},")?;
    }
    let ty = ex.gen_type.map(ExampleType::as_str).unwrap_or("");
    writeln!(out, "{},{}", class_names[ex.y], ty)
}

pub fn write_arff<W: Write>(
    out: &mut W,
    relation: &str,
    class_names: &[String],
    examples: &[LabeledExample],
) -> io::Result<()> {
    write_arff_header(out, relation, class_names)?;
    for ex in examples {
        write_arff_row(out, class_names, ex)?;
    }
    Ok(())
}

pub fn write_arff_header<W: Write>(out: &mut W, relation: &str, class_names: &[String]) -> io::Result<()> {
    writeln!(out, "@relation {}", quote_arff(relation))?;
    writeln!(out)?;
    for a in 1..=N_ATTRIBUTES {
        writeln!(out, "@attribute att{a} numeric")?;
    }
    let names: Vec<String> = class_names.iter().map(|n| quote_arff(n)).collect();
    writeln!(out, "@attribute class {{{}}}", names.join(","))?;
    writeln!(out)?;
    writeln!(out, "@data")
}

pub fn write_arff_row<W: Write>(out: &mut W, class_names: &[String], ex: &LabeledExample) -> io::Result<()> {
    for v in &ex.x {
        write!(out, "{v},")?;
    }
    writeln!(out, "{}", quote_arff(&class_names[ex.y]))
}

fn quote_arff(s: &str) -> String {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || ",{}'\"%".contains(c)) {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

fn unquote_arff(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && (s.starts_with('\'') && s.ends_with('\'') || s.starts_with('"') && s.ends_with('"')) {
        s[1..s.len() - 1].replace("\\'", "'").replace("\\\\", "\\")
    } else {
        s.to_string()
    }
}

fn parse_attr(field: &str, line: u64, column: usize) -> Result<f64, StreamIoError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, column, format!("expected a number, found {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, column, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

/// Reads a CSV stream. Without `class_names`, classes are indexed in order of first appearance.
pub fn read_csv<R: io::Read>(input: R, class_names: Option<&[String]>) -> Result<StreamData, StreamIoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(StreamIoError::Empty),
        Some(r) => r.map_err(|e| csv_err(&e))?,
    };
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    for (i, want) in expected.iter().enumerate() {
        let got = header.get(i).map(str::trim);
        if got != Some(*want) {
            return Err(parse_err(1, i + 1, format!("expected header column {want:?}, found {:?}", got.unwrap_or(""))));
        }
    }
    if header.len() != expected.len() {
        return Err(parse_err(1, expected.len() + 1, "unexpected extra header column"));
    }

    let mut names: Vec<String> = class_names.map(<[String]>::to_vec).unwrap_or_default();
    let fixed = class_names.is_some();
    let mut examples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_err(&e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != expected.len() {
            return Err(parse_err(line, rec.len().min(expected.len()) + 1, format!("expected 7 fields, found {}", rec.len())));
        }
        let mut x: Point = [0.0; N_ATTRIBUTES];
        for (a, v) in x.iter_mut().enumerate() {
            *v = parse_attr(&rec[a], line, a + 1)?;
        }
        let class = rec[5].trim();
        let y = match names.iter().position(|n| n == class) {
            Some(y) => y,
            None if !fixed && !class.is_empty() => {
                names.push(class.to_string());
                names.len() - 1
            }
            None => return Err(parse_err(line, 6, format!("unknown class {class:?}"))),
        };
        let ty = rec[6].trim();
        let gen_type = if ty.is_empty() {
            None
        } else {
            Some(ExampleType::parse(ty).ok_or_else(|| parse_err(line, 7, format!("unknown example type {ty:?}")))?)
        };
        examples.push(LabeledExample { t: examples.len() as u64 + 1, x, y, gen_type });
    }
    Ok(StreamData { relation: String::new(), class_names: names, examples })
}

fn csv_err(e: &csv::Error) -> StreamIoError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(line, 1, e.to_string())
}

/// Reads an ARFF stream with five numeric attributes and a nominal class.
pub fn read_arff<R: BufRead>(input: R) -> Result<StreamData, StreamIoError> {
    let mut relation = String::new();
    let mut attrs: Vec<String> = Vec::new();
    let mut class_names: Option<Vec<String>> = None;
    let mut in_data = false;
    let mut examples = Vec::new();
    let mut saw_content = false;

    for (i, line) in input.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        saw_content = true;
        if !in_data {
            let lower = text.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                relation = unquote_arff(&text["@relation".len()..]);
            } else if lower.starts_with("@attribute") {
                let rest = text["@attribute".len()..].trim();
                let (name, ty) = split_attr(rest).ok_or_else(|| parse_err(lineno, 1, "malformed @attribute"))?;
                if ty.starts_with('{') {
                    if name != "class" {
                        return Err(parse_err(lineno, 1, format!("unexpected nominal attribute {name:?}")));
                    }
                    let inner = ty.trim_start_matches('{').trim_end_matches('}');
                    class_names = Some(inner.split(',').map(unquote_arff).collect());
                } else if ty.eq_ignore_ascii_case("numeric") || ty.eq_ignore_ascii_case("real") {
                    attrs.push(name);
                } else {
                    return Err(parse_err(lineno, 1, format!("unsupported attribute type {ty:?}")));
                }
            } else if lower == "@data" {
                let want: Vec<String> = (1..=N_ATTRIBUTES).map(|a| format!("att{a}")).collect();
                if attrs != want {
                    return Err(parse_err(lineno, 1, format!("expected numeric attributes att1..att5, found {attrs:?}")));
                }
                if class_names.is_none() {
                    return Err(parse_err(lineno, 1, "missing nominal class attribute"));
                }
                in_data = true;
            } else {
                return Err(parse_err(lineno, 1, format!("unexpected header line {text:?}")));
            }
            continue;
        }
        let names = class_names.as_ref().expect("checked at @data");
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != N_ATTRIBUTES + 1 {
            return Err(parse_err(lineno, fields.len().min(N_ATTRIBUTES + 1) + 1, format!("expected 6 fields, found {}", fields.len())));
        }
        let mut x: Point = [0.0; N_ATTRIBUTES];
        for (a, v) in x.iter_mut().enumerate() {
            *v = parse_attr(fields[a], lineno, a + 1)?;
        }
        let class = unquote_arff(fields[N_ATTRIBUTES]);
        let y = names
            .iter()
            .position(|n| *n == class)
            .ok_or_else(|| parse_err(lineno, N_ATTRIBUTES + 1, format!("unknown class {class:?}")))?;
        examples.push(LabeledExample { t: examples.len() as u64 + 1, x, y, gen_type: None });
    }
    if !saw_content {
        return Err(StreamIoError::Empty);
    }
    if !in_data {
        return Err(parse_err(0, 1, "missing @data section"));
    }
    Ok(StreamData { relation, class_names: class_names.unwrap_or_default(), examples })
}

fn split_attr(rest: &str) -> Option<(String, String)> {
    let rest = rest.trim();
    let (name, ty) = if let Some(stripped) = rest.strip_prefix('\'') {
        let end = stripped.find('\'')?;
        (stripped[..end].to_string(), stripped[end + 1..].trim())
    } else {
        let end = rest.find(char::is_whitespace)?;
        (rest[..end].to_string(), rest[end..].trim())
    };
    Some((name, ty.to_string()))
}

/// Reads either format, deciding by the first non-blank character.
pub fn read_stream<R: BufRead>(mut input: R) -> Result<StreamData, StreamIoError> {
    let mut buf = String::new();
    input.read_to_string(&mut buf)?;
    let first = buf.lines().map(str::trim).find(|l| !l.is_empty());
    match first {
        None => Err(StreamIoError::Empty),
        Some(l) if l.starts_with('@') || l.starts_with('%') => read_arff(buf.as_bytes()),
        Some(_) => read_csv(buf.as_bytes(), None),
    }
}
