//! Checkpoints: one JSON header line with shapes and provenance, then one
//! parameter per line (encoder then decoder, layer by layer, weights row-major
//! then bias) at 17 significant digits. Optimizer moments are not stored; a
//! loaded state restarts Adam from zero moments.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::mlp::{Activation, Dense, Mlp};
use super::vae::TrainState;
use crate::cloud::fmt_f64;
use crate::energy::{XiEvaluator, XiMethod};
use crate::error::{Error, Result};
use crate::sampling::Seed;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Header {
    format: String,
    encoder_widths: Vec<usize>,
    decoder_widths: Vec<usize>,
    hidden_activation: String,
    encoder_output: String,
    decoder_output: String,
    lambda: f64,
    seed: u64,
    stream: u64,
    step: u64,
    latent_method: String,
}

const FORMAT: &str = "xsvae-checkpoint-v1";

fn method_name(m: XiMethod) -> &'static str {
    match m {
        XiMethod::Series => "series",
        XiMethod::PoissonExact => "poisson",
        XiMethod::QuadraticSurrogate => "surrogate",
        XiMethod::Coarse => "coarse",
        XiMethod::Iterated => "iterated",
    }
}

pub fn method_from_name(name: &str) -> Option<XiMethod> {
    Some(match name {
        "series" => XiMethod::Series,
        "poisson" | "exact" => XiMethod::PoissonExact,
        "surrogate" => XiMethod::QuadraticSurrogate,
        "coarse" => XiMethod::Coarse,
        "iterated" => XiMethod::Iterated,
        _ => return None,
    })
}

pub fn to_string(state: &TrainState) -> String {
    let header = Header {
        format: FORMAT.into(),
        encoder_widths: state.encoder.widths(),
        decoder_widths: state.decoder.widths(),
        hidden_activation: "relu".into(),
        encoder_output: state
            .encoder
            .layers
            .last()
            .expect("layer")
            .activation
            .name()
            .into(),
        decoder_output: state
            .decoder
            .layers
            .last()
            .expect("layer")
            .activation
            .name()
            .into(),
        lambda: state.lambda,
        seed: state.seed.value,
        stream: state.seed.stream_id,
        step: state.step,
        latent_method: method_name(state.evaluator.method).into(),
    };
    let mut out = serde_json::to_string(&header).expect("serializable header");
    out.push('\n');
    for p in state.params() {
        out.push_str(&fmt_f64(p));
        out.push('\n');
    }
    out
}

pub fn save(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(to_string(state).as_bytes())?;
    f.flush()?;
    Ok(())
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn build(widths: &[usize], output: Activation) -> Mlp {
    let n = widths.len() - 1;
    Mlp {
        layers: (0..n)
            .map(|i| {
                Dense::zeros(
                    widths[i],
                    widths[i + 1],
                    if i + 1 == n { output } else { Activation::Relu },
                )
            })
            .collect(),
    }
}

pub fn parse<R: BufRead>(reader: R) -> Result<TrainState> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))??;
    let h: Header = serde_json::from_str(&first).map_err(|e| bad(1, format!("bad header: {e}")))?;
    if h.format != FORMAT {
        return Err(bad(1, format!("unknown checkpoint format {:?}", h.format)));
    }
    if h.encoder_widths.len() < 2 || h.decoder_widths.len() < 2 {
        return Err(bad(1, "networks need at least one layer"));
    }
    let act = |name: &str| {
        Activation::from_name(name).ok_or_else(|| bad(1, format!("unknown activation {name:?}")))
    };
    let mut encoder = build(&h.encoder_widths, act(&h.encoder_output)?);
    let mut decoder = build(&h.decoder_widths, act(&h.decoder_output)?);
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| bad(i + 2, e.to_string()))?,
        );
    }
    let ne = encoder.n_params();
    if values.len() != ne + decoder.n_params() {
        return Err(bad(
            0,
            format!(
                "{} parameters for a network with {}",
                values.len(),
                ne + decoder.n_params()
            ),
        ));
    }
    encoder.set_params(&values[..ne])?;
    decoder.set_params(&values[ne..])?;
    let encoder = Mlp::from_layers(encoder.layers)?;
    let decoder = Mlp::from_layers(decoder.layers)?;
    let method =
        method_from_name(&h.latent_method).ok_or_else(|| bad(1, "unknown latent method"))?;
    let latent = encoder.output_dim();
    Ok(TrainState {
        adam: Adam::new(values.len(), AdamConfig::default()),
        encoder,
        decoder,
        lambda: h.lambda,
        step: h.step,
        seed: Seed {
            value: h.seed,
            stream_id: h.stream,
        },
        evaluator: XiEvaluator::new(latent, method)?,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainState> {
    parse(std::io::BufReader::new(std::fs::File::open(path)?))
}
