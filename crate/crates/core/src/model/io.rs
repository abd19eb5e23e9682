//! Plain-text model records.
//!
//! ```text
//! distillery-model 1
//! task classification|regression
//! arch linear | arch mlp <h1> <h2> ...
//! layer <fan_in> <fan_out>        (repeated once per layer)
//! <fan_in lines, each fan_out weights: row-major rows of W>
//! <one line of fan_out biases>
//! ```
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so
//! reading a record back reproduces every parameter bit for bit.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::{Architecture, Layer, Model, ModelError, Task};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "distillery-model";

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_model<W: Write>(model: &Model, mut out: W) -> Result<(), ModelError> {
    writeln!(out, "{MAGIC} {MODEL_FORMAT_VERSION}")?;
    let task = match model.task() {
        Task::Classification => "classification",
        Task::Regression => "regression",
    };
    writeln!(out, "task {task}")?;
    match model.architecture() {
        Architecture::Linear => writeln!(out, "arch linear")?,
        Architecture::Mlp { hidden } => {
            let h: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
            writeln!(out, "arch mlp {}", h.join(" "))?
        }
    }
    for l in model.layers() {
        writeln!(out, "layer {} {}", l.weights.nrows(), l.weights.ncols())?;
        for row in l.weights.outer_iter() {
            writeln!(out, "{}", join(row.iter().copied()))?;
        }
        writeln!(out, "{}", join(l.bias.iter().copied()))?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
    let v = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != expected {
        return Err(bad(format!("expected {expected} values, found {}", v.len())));
    }
    Ok(v)
}

pub fn read_model<R: BufRead>(input: R) -> Result<Model, ModelError> {
    let mut lines = input.lines();
    let mut next = move || -> Result<String, ModelError> {
        lines.next().ok_or_else(|| bad("unexpected end of record"))?.map_err(ModelError::from)
    };

    let header = next()?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| bad("missing model header"))?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(bad(format!("unsupported version {version}")));
    }
    let task = match next()?.trim() {
        "task classification" => Task::Classification,
        "task regression" => Task::Regression,
        other => return Err(bad(format!("bad task line {other:?}"))),
    };
    let arch_line = next()?;
    let mut arch_tokens = arch_line.split_whitespace();
    if arch_tokens.next() != Some("arch") {
        return Err(bad("missing arch line"));
    }
    let architecture = match arch_tokens.next() {
        Some("linear") => Architecture::Linear,
        Some("mlp") => Architecture::Mlp {
            hidden: arch_tokens
                .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad width {t:?}"))))
                .collect::<Result<_, _>>()?,
        },
        other => return Err(bad(format!("unknown architecture {other:?}"))),
    };
    let n_layers = match &architecture {
        Architecture::Linear => 1,
        Architecture::Mlp { hidden } => hidden.len() + 1,
    };

    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let head = next()?;
        let dims: Vec<usize> = head
            .strip_prefix("layer ")
            .ok_or_else(|| bad("missing layer line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad layer size {t:?}"))))
            .collect::<Result<_, _>>()?;
        let [fan_in, fan_out] = dims[..] else {
            return Err(bad("layer line needs two sizes"));
        };
        let mut w = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in {
            w.extend(parse_floats(&next()?, fan_out)?);
        }
        let bias = parse_floats(&next()?, fan_out)?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_in, fan_out), w).expect("sized above"),
            bias: Array1::from(bias),
        });
    }
    Model::from_layers(architecture, task, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitScheme;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_is_exact() {
        for arch in [Architecture::Linear, Architecture::mlp(5, 4)] {
            let m = Model::init(arch, Task::Classification, 3, 2, InitScheme::ScaledNormal, &RngStream::new(9, 1));
            let mut buf = Vec::new();
            write_model(&m, &mut buf).unwrap();
            let back = read_model(&buf[..]).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_model(&b"hello\n"[..]).is_err());
        assert!(read_model(&b"distillery-model 2\n"[..]).is_err());
        let truncated = "distillery-model 1\ntask regression\narch linear\nlayer 2 1\n0.5\n";
        assert!(read_model(truncated.as_bytes()).is_err());
    }
}
