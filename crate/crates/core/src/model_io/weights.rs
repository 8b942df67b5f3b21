//! Darknet `.weights` binary format.
//!
//! Layout (little-endian): `i32 major, i32 minor, i32 revision, u64 seen`,
//! then for each conv layer in network order `biases[n]`, and when the layer
//! is batch-normalized `scales[n], rolling_means[n], rolling_variances[n]`,
//! followed by `kernels[n * c * k * k]` in (filter, channel, row, col) order.
//! Every value is an `f32`.

use super::NetworkModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightsHeader {
    pub major: i32,
    pub minor: i32,
    pub revision: i32,
    pub seen: u64,
}

impl Default for WeightsHeader {
    fn default() -> Self {
        Self {
            major: 0,
            minor: 2,
            revision: 0,
            seen: 0,
        }
    }
}

impl WeightsHeader {
    /// Header revisions that store the images-seen counter as 64 bits.
    pub fn is_supported(&self) -> bool {
        (0..1000).contains(&self.major)
            && (0..1000).contains(&self.minor)
            && self.major * 10 + self.minor >= 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scales: Vec<f32>,
    pub means: Vec<f32>,
    pub variances: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub biases: Vec<f32>,
    pub batch_norm: Option<BatchNorm>,
    /// `filters x in_channels x k x k`, row-major.
    pub kernels: Vec<f32>,
}

impl ConvWeights {
    pub(crate) fn matches(&self, filters: usize, in_c: usize, k: usize, bn: bool) -> bool {
        self.biases.len() == filters
            && self.kernels.len() == filters * in_c * k * k
            && match &self.batch_norm {
                Some(b) => {
                    bn && b.scales.len() == filters
                        && b.means.len() == filters
                        && b.variances.len() == filters
                }
                None => !bn,
            }
    }

    fn float_count(&self) -> usize {
        self.biases.len() + self.kernels.len() + self.batch_norm.as_ref().map_or(0, |b| 3 * b.scales.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub header: WeightsHeader,
    /// One block per conv layer, in network order.
    pub convs: Vec<ConvWeights>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Weights(format!(
                "truncated stream: needed {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(4 * n, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

/// Reads a weights stream for `model` and returns the model with weights attached.
pub fn load_weights(model: NetworkModel, bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = Reader { bytes, pos: 0 };
    let major = r.i32("header")?;
    let minor = r.i32("header")?;
    let revision = r.i32("header")?;
    let probe = WeightsHeader {
        major,
        minor,
        revision,
        seen: 0,
    };
    if !probe.is_supported() {
        return Err(Error::Weights(format!(
            "unsupported weights version {major}.{minor}.{revision}; only headers with a 64-bit seen counter are read"
        )));
    }
    let seen = u64::from_le_bytes(r.take(8, "header")?.try_into().expect("8 bytes"));
    let header = WeightsHeader { seen, ..probe };

    let mut convs = Vec::new();
    for (i, (filters, in_c, k, bn)) in model.conv_param_layout().into_iter().enumerate() {
        let what = format!("conv block {i}");
        let biases = r.floats(filters, &what)?;
        let batch_norm = if bn {
            Some(BatchNorm {
                scales: r.floats(filters, &what)?,
                means: r.floats(filters, &what)?,
                variances: r.floats(filters, &what)?,
            })
        } else {
            None
        };
        let kernels = r.floats(filters * in_c * k * k, &what)?;
        convs.push(ConvWeights {
            biases,
            batch_norm,
            kernels,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Weights(format!(
            "{} trailing bytes after the last conv block",
            bytes.len() - r.pos
        )));
    }
    model.with_weights(ModelWeights { header, convs })
}

/// Serializes the model's weights; [`load_weights`] inverts this byte for byte.
pub fn write_weights(model: &NetworkModel) -> Result<Vec<u8>> {
    let weights = model
        .weights()
        .ok_or_else(|| Error::Weights("model has no weights to write".into()))?;
    let floats: usize = weights.convs.iter().map(ConvWeights::float_count).sum();
    let mut out = Vec::with_capacity(20 + 4 * floats);
    let h = &weights.header;
    out.extend_from_slice(&h.major.to_le_bytes());
    out.extend_from_slice(&h.minor.to_le_bytes());
    out.extend_from_slice(&h.revision.to_le_bytes());
    out.extend_from_slice(&h.seen.to_le_bytes());
    let mut put = |vals: &[f32]| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for block in &weights.convs {
        put(&block.biases);
        if let Some(bn) = &block.batch_norm {
            put(&bn.scales);
            put(&bn.means);
            put(&bn.variances);
        }
        put(&block.kernels);
    }
    Ok(out)
}
