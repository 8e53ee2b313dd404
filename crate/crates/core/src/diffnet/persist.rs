//! Text persistence for network parameters.
//!
//! ```text
//! sphnn-params-v1
//! activation tanh
//! input_dim 2
//! hidden_widths 64 64
//! output_dim 1
//! values 4417
//! <one value per line, layer by layer: row-major weights then bias>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::mlp::{Activation, Architecture, MlpParams};
use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;

pub const PARAMS_VERSION: &str = "sphnn-params-v1";

pub fn write_params<W: Write>(params: &MlpParams, mut out: W) -> std::io::Result<()> {
    let arch = params.arch();
    writeln!(out, "{PARAMS_VERSION}")?;
    writeln!(out, "activation {}", arch.activation.name())?;
    writeln!(out, "input_dim {}", arch.input_dim)?;
    let hidden: Vec<String> = arch.hidden_widths.iter().map(|w| w.to_string()).collect();
    writeln!(out, "hidden_widths {}", hidden.join(" "))?;
    writeln!(out, "output_dim {}", arch.output_dim)?;
    writeln!(out, "values {}", params.len())?;
    for v in params.as_slice() {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_params<R: BufRead>(input: R, source: &str) -> Result<MlpParams> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(line))) => Ok((i + 1, line)),
            Some((i, Err(e))) => Err(Error::parse(source, i + 1, e.to_string())),
            None => Err(Error::parse(source, 0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let (ln, version) = next("version tag")?;
    if version.trim() != PARAMS_VERSION {
        return Err(Error::parse(source, ln, format!("expected `{PARAMS_VERSION}`, found `{}`", version.trim())));
    }

    fn keyed<'a>(source: &str, ln: usize, line: &'a str, key: &str) -> Result<&'a str> {
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| Error::parse(source, ln, format!("expected key `{key}`")))?;
        Ok(rest.trim())
    }
    fn usize_of(source: &str, ln: usize, s: &str) -> Result<usize> {
        s.parse::<usize>()
            .map_err(|e| Error::parse(source, ln, format!("bad integer `{s}`: {e}")))
    }

    let (ln, line) = next("activation")?;
    let act_name = keyed(source, ln, &line, "activation")?;
    let activation = Activation::parse(act_name)
        .ok_or_else(|| Error::parse(source, ln, format!("unknown activation `{act_name}`")))?;
    let (ln, line) = next("input_dim")?;
    let input_dim = usize_of(source, ln, keyed(source, ln, &line, "input_dim")?)?;
    let (ln, line) = next("hidden_widths")?;
    let hidden_widths = keyed(source, ln, &line, "hidden_widths")?
        .split_whitespace()
        .map(|s| usize_of(source, ln, s))
        .collect::<Result<Vec<_>>>()?;
    let (ln, line) = next("output_dim")?;
    let output_dim = usize_of(source, ln, keyed(source, ln, &line, "output_dim")?)?;
    let (ln, line) = next("values")?;
    let count = usize_of(source, ln, keyed(source, ln, &line, "values")?)?;

    let arch = Architecture {
        input_dim,
        hidden_widths,
        output_dim,
        activation,
    };
    arch.validate().map_err(|e| Error::parse(source, ln, e.to_string()))?;
    if count != arch.num_params() {
        return Err(Error::parse(
            source,
            ln,
            format!("architecture needs {} values, header says {count}", arch.num_params()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, line) = next("parameter value")?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|e| Error::parse(source, ln, format!("bad number `{}`: {e}", line.trim())))?;
        if !v.is_finite() {
            return Err(Error::parse(source, ln, "non-finite parameter"));
        }
        data.push(v);
    }
    MlpParams::from_flat(&arch, data)
}

pub fn save_params(params: &MlpParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_params(params, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<MlpParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_params(BufReader::new(file), &path.display().to_string())
}
