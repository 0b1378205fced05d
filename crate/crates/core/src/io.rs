//! Text formats.
//!
//! Model (`TCM1`):
//! ```text
//! TCM1
//! order N
//! I_1 ... I_N
//! b <bias>
//! lambda <lambda>
//! <prod(I) weights, first index fastest>
//! ```
//!
//! Dataset (`TDS1`):
//! ```text
//! TDS1
//! count <n>
//! order N
//! I_1 ... I_N
//! y <label>
//! <prod(I) values>
//! ...
//! ```
//!
//! Reals are written with 17 significant digits so a write/read round trip
//! reproduces every value exactly. Readers accept any whitespace layout for
//! the value blocks.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::apg::ClassifierModel;
use crate::data::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MODEL_MAGIC: &str = "TCM1";
pub const DATASET_MAGIC: &str = "TDS1";

fn fmt_real(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

fn push_values(out: &mut String, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_real(out, v);
    }
    out.push('\n');
}

fn push_dims(out: &mut String, dims: &[usize]) {
    let line: Vec<String> = dims.iter().map(usize::to_string).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

pub fn model_to_string(model: &ClassifierModel) -> String {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    writeln!(out, "order {}", model.w.order()).unwrap();
    push_dims(&mut out, model.w.dims());
    out.push_str("b ");
    fmt_real(&mut out, model.b);
    out.push_str("\nlambda ");
    fmt_real(&mut out, model.lambda);
    out.push('\n');
    push_values(&mut out, model.w.values());
    out
}

pub fn dataset_to_string(data: &LabeledDataset) -> String {
    let mut out = String::new();
    out.push_str(DATASET_MAGIC);
    out.push('\n');
    writeln!(out, "count {}", data.len()).unwrap();
    writeln!(out, "order {}", data.dims().len()).unwrap();
    push_dims(&mut out, data.dims());
    for s in data.samples() {
        out.push_str("y ");
        fmt_real(&mut out, s.y);
        out.push('\n');
        push_values(&mut out, s.x.values());
    }
    out
}

/// Token reader that remembers line numbers for error messages.
struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    current: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            current: "".split_whitespace(),
            line: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Result<&'a str> {
        loop {
            if let Some(tok) = self.current.next() {
                return Ok(tok);
            }
            match self.lines.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    self.current = l.split_whitespace();
                }
                None => return self.err("unexpected end of input"),
            }
        }
    }

    /// Whole next nonblank line, split into tokens.
    fn line_tokens(&mut self) -> Result<Vec<&'a str>> {
        let rest: Vec<&str> = self.current.by_ref().collect();
        if !rest.is_empty() {
            return Ok(rest);
        }
        for (i, l) in self.lines.by_ref() {
            self.line = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok(toks);
            }
        }
        self.err("unexpected end of input")
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let tok = self.next()?;
        if tok == word {
            Ok(())
        } else {
            self.err(format!("expected `{word}`, found `{tok}`"))
        }
    }

    fn real(&mut self) -> Result<f64> {
        let tok = self.next()?;
        match tok.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("invalid number `{tok}`")),
        }
    }

    fn count(&mut self) -> Result<usize> {
        let tok = self.next()?;
        match tok.parse::<usize>() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("invalid integer `{tok}`")),
        }
    }

    fn dims(&mut self, order: usize) -> Result<Vec<usize>> {
        let mut toks = self.line_tokens()?;
        if toks.first() == Some(&"dims") {
            toks.remove(0);
        }
        if toks.len() != order {
            return self.err(format!("expected {order} dimensions, found {}", toks.len()));
        }
        let mut dims = Vec::with_capacity(order);
        for t in toks {
            match t.parse::<usize>() {
                Ok(d) if d > 0 => dims.push(d),
                _ => return self.err(format!("invalid dimension `{t}`")),
            }
        }
        Ok(dims)
    }

    fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.real()).collect()
    }

    fn finish(&mut self) -> Result<()> {
        match self.next() {
            Ok(tok) => self.err(format!("trailing content `{tok}`")),
            Err(_) => Ok(()),
        }
    }
}

fn header(tok: &mut Tokens<'_>, magic: &str) -> Result<()> {
    let first = tok.next()?;
    if first != magic {
        return tok.err(format!("bad magic `{first}`, expected `{magic}`"));
    }
    Ok(())
}

fn read_shape(tok: &mut Tokens<'_>) -> Result<Vec<usize>> {
    tok.expect("order")?;
    let order = tok.count()?;
    if order == 0 {
        return tok.err("order must be at least 1");
    }
    tok.dims(order)
}

pub fn model_from_str(text: &str) -> Result<ClassifierModel> {
    let mut tok = Tokens::new(text);
    header(&mut tok, MODEL_MAGIC)?;
    let dims = read_shape(&mut tok)?;
    tok.expect("b")?;
    let b = tok.real()?;
    tok.expect("lambda")?;
    let lambda = tok.real()?;
    let n = dims.iter().product();
    let values = tok.values(n)?;
    tok.finish()?;
    Ok(ClassifierModel {
        w: DenseTensor::new(dims, values)?,
        b,
        lambda,
        converged: true,
        iterations: 0,
    })
}

pub fn dataset_from_str(text: &str) -> Result<LabeledDataset> {
    let mut tok = Tokens::new(text);
    header(&mut tok, DATASET_MAGIC)?;
    tok.expect("count")?;
    let count = tok.count()?;
    let dims = read_shape(&mut tok)?;
    let n: usize = dims.iter().product();
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        tok.expect("y")?;
        let y = tok.real()?;
        let values = tok.values(n)?;
        samples.push(Sample::new(DenseTensor::new(dims.clone(), values)?, y));
    }
    tok.finish()?;
    LabeledDataset::new(samples)
}

pub fn write_model(path: impl AsRef<Path>, model: &ClassifierModel) -> Result<()> {
    write_text(path.as_ref(), &model_to_string(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_dataset(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    write_text(path.as_ref(), &dataset_to_string(data))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path)?;
    let mut text = String::new();
    let mut reader = std::io::BufReader::new(file);
    while reader.read_line(&mut text)? > 0 {}
    dataset_from_str(&text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ClassifierModel {
        ClassifierModel {
            w: DenseTensor::new(vec![2, 1, 2], vec![0.1, -2.5e-7, 1.0 / 3.0, 7.0]).unwrap(),
            b: -0.125,
            lambda: 1.0,
            converged: true,
            iterations: 3,
        }
    }

    #[test]
    fn model_text_layout() {
        let text = model_to_string(&model());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "TCM1");
        assert_eq!(lines[1], "order 3");
        assert_eq!(lines[2], "2 1 2");
        assert_eq!(lines[3], "b -1.2500000000000000e-1");
        assert_eq!(lines[4], "lambda 1.0000000000000000e0");
        assert_eq!(lines[5].split_whitespace().count(), 4);
        let back = model_from_str(&text).unwrap();
        assert_eq!(back.w, model().w);
        assert_eq!(back.b, model().b);
    }

    #[test]
    fn model_parse_errors() {
        assert!(matches!(
            model_from_str("TCM2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "TCM1\norder 2\n2 2\nb 0\nlambda 1\n1 2 3\n";
        assert!(matches!(model_from_str(short), Err(Error::Parse { .. })));
        let long = "TCM1\norder 1\n2\nb 0\nlambda 1\n1 2 3\n";
        assert!(model_from_str(long).is_err());
        let bad_dims = "TCM1\norder 2\n2\nb 0\nlambda 1\n1 2\n";
        assert!(model_from_str(bad_dims).is_err());
        let nan = "TCM1\norder 1\n1\nb zero\nlambda 1\n1\n";
        assert!(matches!(
            model_from_str(nan),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn dataset_parse_errors() {
        let ok = "TDS1\ncount 1\norder 1\n2\ny 3\n1 2\n";
        assert_eq!(dataset_from_str(ok).unwrap().len(), 1);
        let missing = "TDS1\ncount 2\norder 1\n2\ny 3\n1 2\n";
        assert!(dataset_from_str(missing).is_err());
        let zero = "TDS1\ncount 0\norder 1\n2\n";
        assert!(dataset_from_str(zero).is_err());
    }
}
