//! Plain-text parameter files.
//!
//! ```text
//! cfcast-lstm 1
//! hidden_size <H>
//! input_size <I>
//! window <L>
//! norm_min <f64>
//! norm_max <f64>
//! w_f <H*(H+I) values, row-major>
//! b_f <H values>
//! w_i ...
//! b_i ...
//! w_c ...
//! b_c ...
//! w_o ...
//! b_o ...
//! head_w <H values>
//! head_b <f64>
//! ```
//!
//! Values are space separated and written in shortest round-trip form, so a
//! read-back net is bit-identical.

use std::io::{BufRead, Write};

use super::{LstmNet, LstmParams};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "cfcast-lstm";

pub fn write_net<W: Write>(net: &LstmNet, mut out: W) -> std::io::Result<()> {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    let p = &net.params;
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "hidden_size {}", net.hidden_size)?;
    writeln!(out, "input_size {}", net.input_size)?;
    writeln!(out, "window {}", net.window)?;
    writeln!(out, "norm_min {:?}", net.norm_min)?;
    writeln!(out, "norm_max {:?}", net.norm_max)?;
    for (name, gate) in [("f", &p.forget), ("i", &p.input), ("c", &p.candidate), ("o", &p.output)] {
        writeln!(out, "w_{name} {}", join(&gate.w))?;
        writeln!(out, "b_{name} {}", join(&gate.b))?;
    }
    writeln!(out, "head_w {}", join(&p.head_w))?;
    writeln!(out, "head_b {:?}", p.head_b)?;
    Ok(())
}

pub fn read_net<R: BufRead>(input: R) -> Result<LstmNet> {
    let mut lines = input.lines();
    let mut next = |key: &str| -> Result<Vec<String>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("parameter file ends before {key}")))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut parts = line.split_whitespace().map(str::to_owned);
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            other => Err(Error::Parse(format!("expected {key}, found {other:?}"))),
        }
    };
    let header = next(MAGIC)?;
    if header != [FORMAT_VERSION.to_string()] {
        return Err(Error::Parse(format!("unsupported parameter file version {header:?}")));
    }
    let int = |v: Vec<String>, key: &str| -> Result<usize> {
        v.first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad {key}")))
    };
    let floats = |v: Vec<String>, key: &str, len: usize| -> Result<Vec<f64>> {
        let out: Vec<f64> = v
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{key}: {e}")))?;
        if out.len() != len {
            return Err(Error::Parse(format!("{key}: expected {len} values, got {}", out.len())));
        }
        Ok(out)
    };
    let hidden = int(next("hidden_size")?, "hidden_size")?;
    let input_size = int(next("input_size")?, "input_size")?;
    let window = int(next("window")?, "window")?;
    let norm_min = floats(next("norm_min")?, "norm_min", 1)?[0];
    let norm_max = floats(next("norm_max")?, "norm_max", 1)?[0];
    let mut params = LstmParams::zeros(hidden, input_size);
    let weights = hidden * (hidden + input_size);
    for (name, gate) in [
        ("f", &mut params.forget),
        ("i", &mut params.input),
        ("c", &mut params.candidate),
        ("o", &mut params.output),
    ] {
        let wk = format!("w_{name}");
        gate.w = floats(next(&wk)?, &wk, weights)?;
        let bk = format!("b_{name}");
        gate.b = floats(next(&bk)?, &bk, hidden)?;
    }
    params.head_w = floats(next("head_w")?, "head_w", hidden)?;
    params.head_b = floats(next("head_b")?, "head_b", 1)?[0];
    if !params.is_finite() || !(norm_max > norm_min) {
        return Err(Error::Parse("non-finite parameters or empty normalization range".into()));
    }
    Ok(LstmNet {
        hidden_size: hidden,
        input_size,
        params,
        window,
        norm_min,
        norm_max,
    })
}
