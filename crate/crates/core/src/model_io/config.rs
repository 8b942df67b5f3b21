//! Darknet `.cfg` reader and writer.
//!
//! The document is a sequence of `[section]` headers each followed by
//! `key=value` lines. The first section describes the network input; every
//! later section is one layer. Keys this engine does not use (training
//! hyper-parameters and the like) are accepted and ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{trace_shapes, Activation, ConvSpec, LayerSpec, NetworkModel, PoolSpec, RegionSpec};
use crate::error::{Error, Result};
use crate::tensor::Shape;

struct Section {
    kind: String,
    line: usize,
    values: HashMap<String, (String, usize)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.values.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse::<usize>()
                .map_err(|_| Error::config(line, format!("`{key}` expects a non-negative integer, got `{v}`"))),
        }
    }

    fn required_usize(&self, key: &str) -> Result<usize> {
        match self.get(key) {
            None => Err(Error::config(self.line, format!("[{}] is missing `{key}`", self.kind))),
            Some(_) => self.usize_or(key, 0),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.usize_or(key, 0)? != 0)
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find(['#', ';']) {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let kind = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(line_no, format!("unterminated section header `{line}`")))?;
            sections.push(Section {
                kind: kind.trim().to_ascii_lowercase(),
                line: line_no,
                values: HashMap::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line_no, format!("expected `key=value`, got `{line}`")))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::config(line_no, "key before any section header"))?;
        section
            .values
            .insert(key.trim().to_ascii_lowercase(), (value.trim().to_string(), line_no));
    }
    Ok(sections)
}

fn parse_layer(section: &Section, index: usize) -> Result<LayerSpec> {
    match section.kind.as_str() {
        "convolutional" | "conv" => {
            let activation = match section.get("activation") {
                None => Activation::Linear,
                Some(("leaky", _)) => Activation::Leaky,
                Some(("linear", _)) => Activation::Linear,
                Some((other, line)) => {
                    return Err(Error::config(line, format!("unsupported activation `{other}`")))
                }
            };
            let size = section.usize_or("size", 1)?;
            let stride = section.usize_or("stride", 1)?;
            let filters = section.usize_or("filters", 1)?;
            if size != 1 && size != 3 {
                return Err(Error::config(section.line, format!("conv kernel {size} not in {{1, 3}}")));
            }
            if stride == 0 || filters == 0 {
                return Err(Error::config(section.line, "conv stride and filters must be positive"));
            }
            Ok(LayerSpec::Conv(ConvSpec {
                filters,
                size,
                stride,
                pad: section.flag("pad")?,
                batch_normalize: section.flag("batch_normalize")?,
                activation,
            }))
        }
        "maxpool" | "max" => {
            let stride = section.usize_or("stride", 1)?;
            let size = section.usize_or("size", stride)?;
            let padding = section.usize_or("padding", size.saturating_sub(1))?;
            Ok(LayerSpec::MaxPool(PoolSpec { size, stride, padding }))
        }
        "route" => {
            let (v, line) = section
                .get("layers")
                .ok_or_else(|| Error::config(section.line, "[route] is missing `layers`"))?;
            let mut sources = Vec::new();
            for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let r: i64 = tok
                    .parse()
                    .map_err(|_| Error::config(line, format!("bad route index `{tok}`")))?;
                let abs = if r < 0 { index as i64 + r } else { r };
                if abs < 0 || abs >= index as i64 {
                    return Err(Error::config(
                        line,
                        format!("route to nonexistent layer {tok} from layer {index}"),
                    ));
                }
                sources.push(abs as usize);
            }
            Ok(LayerSpec::Route(sources))
        }
        "reorg" => Ok(LayerSpec::Reorg(section.usize_or("stride", 2)?)),
        "region" => {
            let classes = section.required_usize("classes")?;
            let num = section.required_usize("num")?;
            let (v, line) = section
                .get("anchors")
                .ok_or_else(|| Error::config(section.line, "[region] is missing `anchors`"))?;
            let values = v
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f32>()
                        .ok()
                        .filter(|x| x.is_finite() && *x > 0.0)
                        .ok_or_else(|| Error::config(line, format!("bad anchor value `{t}`")))
                })
                .collect::<Result<Vec<f32>>>()?;
            if values.len() != 2 * num {
                return Err(Error::config(
                    line,
                    format!("expected {} anchor values for num={num}, got {}", 2 * num, values.len()),
                ));
            }
            let anchors = values.chunks(2).map(|p| (p[0], p[1])).collect();
            Ok(LayerSpec::Region(RegionSpec { anchors, classes }))
        }
        other => Err(Error::config(section.line, format!("unknown section kind `[{other}]`"))),
    }
}

/// Parses a configuration document into a validated, weightless model.
pub fn parse_config(text: &str) -> Result<NetworkModel> {
    let sections = split_sections(text)?;
    let (head, rest) = sections
        .split_first()
        .ok_or_else(|| Error::config(1, "empty configuration"))?;
    if head.kind != "net" && head.kind != "network" {
        return Err(Error::config(head.line, format!("first section must be [net], found [{}]", head.kind)));
    }
    let input = Shape::new(
        head.required_usize("width")?,
        head.required_usize("height")?,
        head.usize_or("channels", 3)?,
    );
    if input.w == 0 || input.h == 0 || input.c == 0 {
        return Err(Error::config(head.line, format!("non-positive input dimension {input}")));
    }
    if rest.is_empty() {
        return Err(Error::config(head.line, "network has no layers"));
    }
    let layers = rest
        .iter()
        .enumerate()
        .map(|(i, s)| parse_layer(s, i))
        .collect::<Result<Vec<_>>>()?;
    if let Err((i, message)) = trace_shapes(input, &layers) {
        return Err(Error::config(rest[i].line, format!("layer {i}: {message}")));
    }
    NetworkModel::new(input, layers)
}

fn fmt_float(v: f32) -> String {
    format!("{v}")
}

/// Writes a model's layer list back out as configuration text.
pub fn serialize_config(model: &NetworkModel) -> String {
    let mut out = String::new();
    let input = model.input_shape();
    let _ = writeln!(out, "[net]\nwidth={}\nheight={}\nchannels={}", input.w, input.h, input.c);
    for layer in model.layers() {
        out.push('\n');
        match layer {
            LayerSpec::Conv(c) => {
                let _ = writeln!(
                    out,
                    "[convolutional]\nbatch_normalize={}\nfilters={}\nsize={}\nstride={}\npad={}\nactivation={}",
                    u8::from(c.batch_normalize),
                    c.filters,
                    c.size,
                    c.stride,
                    u8::from(c.pad),
                    c.activation.name()
                );
            }
            LayerSpec::MaxPool(p) => {
                let _ = writeln!(out, "[maxpool]\nsize={}\nstride={}\npadding={}", p.size, p.stride, p.padding);
            }
            LayerSpec::Route(src) => {
                let list: Vec<String> = src.iter().map(ToString::to_string).collect();
                let _ = writeln!(out, "[route]\nlayers={}", list.join(","));
            }
            LayerSpec::Reorg(s) => {
                let _ = writeln!(out, "[reorg]\nstride={s}");
            }
            LayerSpec::Region(r) => {
                let anchors: Vec<String> = r
                    .anchors
                    .iter()
                    .map(|(w, h)| format!("{},{}", fmt_float(*w), fmt_float(*h)))
                    .collect();
                let _ = writeln!(
                    out,
                    "[region]\nanchors={}\nclasses={}\nnum={}",
                    anchors.join(", "),
                    r.classes,
                    r.num_anchors()
                );
            }
        }
    }
    out
}
