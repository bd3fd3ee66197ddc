//! Text checkpoint format, version 1:
//!
//! ```text
//! subdiff-mlp 1
//! widths <p_0> <p_1> ... <p_M>
//! weight <k> <rows> <cols>
//! <rows*cols IEEE-754 bit patterns as 16-digit hex, row-major, whitespace separated>
//! bias <k> <len>
//! <len bit patterns>
//! ...
//! ```
//!
//! Layers are numbered from 1. Values are stored as raw bit patterns so a
//! load reproduces the saved parameters exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Layer, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "subdiff-mlp";
const VERSION: u32 = 1;
const PER_LINE: usize = 8;

fn write_values(out: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut line = Vec::with_capacity(PER_LINE);
    let flush = |line: &mut Vec<String>, out: &mut dyn Write| -> std::io::Result<()> {
        if !line.is_empty() {
            writeln!(out, "{}", line.join(" "))?;
            line.clear();
        }
        Ok(())
    };
    for v in values {
        line.push(format!("{:016x}", v.to_bits()));
        if line.len() == PER_LINE {
            flush(&mut line, out)?;
        }
    }
    flush(&mut line, out)
}

pub fn write_checkpoint(mlp: &Mlp, mut out: impl Write) -> Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    let widths: Vec<String> = mlp.widths().iter().map(ToString::to_string).collect();
    writeln!(out, "widths {}", widths.join(" "))?;
    for (k, layer) in mlp.layers().iter().enumerate() {
        let (rows, cols) = layer.weight.dim();
        writeln!(out, "weight {} {rows} {cols}", k + 1)?;
        write_values(&mut out, layer.weight.iter().copied())?;
        writeln!(out, "bias {} {}", k + 1, layer.bias.len())?;
        write_values(&mut out, layer.bias.iter().copied())?;
    }
    Ok(())
}

struct Tokens<'a> {
    inner: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| Error::Parse(format!("checkpoint ended while reading {what}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let got = self.next(keyword)?;
        if got != keyword {
            return Err(Error::Parse(format!("expected {keyword:?}, found {got:?}")));
        }
        Ok(())
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("bad {what}: {tok:?}")))
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count)
            .map(|_| {
                let tok = self.next("parameter")?;
                u64::from_str_radix(tok, 16)
                    .map(f64::from_bits)
                    .map_err(|_| Error::Parse(format!("bad parameter bits {tok:?}")))
            })
            .collect()
    }
}

pub fn read_checkpoint(mut input: impl Read) -> Result<Mlp> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != format!("{MAGIC} {VERSION}") {
        return Err(Error::Parse(format!(
            "unsupported checkpoint header {header:?}"
        )));
    }
    let widths_line = lines.next().unwrap_or_default();
    let widths: Vec<usize> = widths_line
        .strip_prefix("widths ")
        .ok_or_else(|| Error::Parse("missing widths line".into()))?
        .split_whitespace()
        .map(|w| {
            w.parse()
                .map_err(|_| Error::Parse(format!("bad width {w:?}")))
        })
        .collect::<Result<_>>()?;
    if widths.len() < 2 {
        return Err(Error::Parse("need at least two widths".into()));
    }

    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let mut tokens = Tokens {
        inner: rest.split_whitespace(),
    };
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for k in 1..widths.len() {
        tokens.expect("weight")?;
        if tokens.usize("layer index")? != k {
            return Err(Error::Parse(format!("layers out of order at {k}")));
        }
        let rows = tokens.usize("rows")?;
        let cols = tokens.usize("cols")?;
        if (rows, cols) != (widths[k], widths[k - 1]) {
            return Err(Error::Parse(format!(
                "layer {k} is {rows}x{cols}, widths say {}x{}",
                widths[k],
                widths[k - 1]
            )));
        }
        let weight = Array2::from_shape_vec((rows, cols), tokens.values(rows * cols)?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        tokens.expect("bias")?;
        if tokens.usize("layer index")? != k {
            return Err(Error::Parse(format!("bias out of order at {k}")));
        }
        let len = tokens.usize("bias length")?;
        if len != rows {
            return Err(Error::Parse(format!(
                "bias {k} has length {len}, expected {rows}"
            )));
        }
        let bias = Array1::from(tokens.values(len)?);
        layers.push(Layer { weight, bias });
    }
    if let Some(extra) = tokens.inner.next() {
        return Err(Error::Parse(format!("trailing data {extra:?}")));
    }
    Mlp::from_layers(layers)
}

pub fn save_checkpoint(mlp: &Mlp, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(mlp, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    read_checkpoint(fs::File::open(path)?)
}
