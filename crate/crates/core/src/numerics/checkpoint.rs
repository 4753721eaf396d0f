//! `ADVJ` checkpoint files.
//!
//! Layout: magic `ADVJ`, `u32` LE version, `u64` LE header length, UTF-8 JSON
//! header describing the layers, then every parameter as little-endian `f32`
//! in layer order, weights before biases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfmt;
use crate::error::{Error, Result};
use crate::numerics::network::{Conv, Dense, Layer, MaxPool};
use crate::numerics::{Activation, Network};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ADVJ";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerHeader {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        height: usize,
        width: usize,
        activation: Activation,
    },
    #[serde(rename = "maxpool")]
    MaxPool {
        channels: usize,
        height: usize,
        width: usize,
        size: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub input_shape: Vec<usize>,
    pub num_outputs: usize,
    pub layers: Vec<LayerHeader>,
    /// Free-form provenance (config hash, seed, role).
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn write_checkpoint<W: Write, S: Scalar>(w: &mut W, network: &Network<S>, meta: serde_json::Value) -> Result<()> {
    let layers = network
        .layers()
        .iter()
        .map(|layer| match layer {
            Layer::Conv(c) => LayerHeader::Conv {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: 3,
                height: c.height,
                width: c.width,
                activation: c.activation,
            },
            Layer::MaxPool(p) => LayerHeader::MaxPool {
                channels: p.channels,
                height: p.height,
                width: p.width,
                size: 2,
            },
            Layer::Dense(d) => LayerHeader::Dense {
                inputs: d.inputs,
                outputs: d.outputs,
                activation: d.activation,
            },
        })
        .collect();
    let header = CheckpointHeader {
        input_shape: network.input_shape().to_vec(),
        num_outputs: network.num_outputs(),
        layers,
        meta,
    };
    binfmt::write_preamble(w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header)?;
    for p in network.params() {
        binfmt::write_f32s(w, p)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read, S: Scalar>(r: &mut R) -> Result<(Network<S>, serde_json::Value)> {
    let header: CheckpointHeader = binfmt::read_preamble(r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let mut layers = Vec::with_capacity(header.layers.len());
    for lh in &header.layers {
        let layer = match *lh {
            LayerHeader::Conv {
                in_channels,
                out_channels,
                kernel,
                height,
                width,
                activation,
            } => {
                if kernel != 3 {
                    return Err(Error::format(format!("unsupported kernel size {kernel}")));
                }
                let weight = binfmt::read_f32s(r, out_channels * in_channels * 9)?;
                let bias = binfmt::read_f32s(r, out_channels)?;
                Layer::Conv(Conv {
                    in_channels,
                    out_channels,
                    height,
                    width,
                    weight,
                    bias,
                    activation,
                })
            }
            LayerHeader::MaxPool {
                channels,
                height,
                width,
                size,
            } => {
                if size != 2 {
                    return Err(Error::format(format!("unsupported pool size {size}")));
                }
                Layer::MaxPool(MaxPool { channels, height, width })
            }
            LayerHeader::Dense {
                inputs,
                outputs,
                activation,
            } => {
                let weight = binfmt::read_f32s(r, outputs * inputs)?;
                let bias = binfmt::read_f32s(r, outputs)?;
                Layer::Dense(Dense {
                    inputs,
                    outputs,
                    weight,
                    bias,
                    activation,
                })
            }
        };
        layers.push(layer);
    }
    binfmt::expect_eof(r)?;
    let network = Network::from_layers(header.input_shape, layers).map_err(|e| Error::format(e.to_string()))?;
    if network.num_outputs() != header.num_outputs {
        return Err(Error::format("header output count disagrees with layers"));
    }
    Ok((network, header.meta))
}

pub fn save_checkpoint<S: Scalar>(path: &Path, network: &Network<S>, meta: serde_json::Value) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, network, meta)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(Network<S>, serde_json::Value)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut BufReader::new(file))
}
