//! Versioned text checkpoints of an encoder.
//!
//! ```text
//! coeba-checkpoint 1
//! backbone vgnae
//! ...
//! in_dim 1433
//! tensor w_hidden 1433 256
//! <one row of values per line>
//! ```
//!
//! Values use the shortest decimal form that parses back to the same `f64`,
//! so save and load round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{Backbone, EncoderConfig, EncoderParams};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "coeba-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderConfig,
    pub params: EncoderParams,
    /// Epoch the parameters were taken after.
    pub epoch: usize,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let e = &self.encoder;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "epoch {}", self.epoch);
        let _ = writeln!(out, "backbone {}", e.backbone);
        let _ = writeln!(out, "hidden_dim {}", e.hidden_dim);
        let _ = writeln!(out, "out_dim {}", e.out_dim);
        let _ = writeln!(out, "dropout {}", e.dropout);
        let _ = writeln!(out, "appnp_steps {}", e.appnp_steps);
        let _ = writeln!(out, "appnp_teleport {}", e.appnp_teleport);
        let _ = writeln!(out, "norm_scale {}", e.norm_scale);
        let _ = writeln!(out, "in_dim {}", self.params.in_dim());
        for (name, t) in self.params.tensors() {
            let _ = writeln!(out, "tensor {name} {} {}", t.nrows(), t.ncols());
            for row in t.rows() {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected {what}")))
        };

        let (_, head) = next("header")?;
        match head.split_once(' ') {
            Some((MAGIC, v)) if v.trim() == FORMAT_VERSION.to_string() => {}
            Some((MAGIC, v)) => {
                return Err(Error::Checkpoint(format!("unsupported format version {v}")));
            }
            _ => return Err(Error::Checkpoint("not a checkpoint file".into())),
        }

        let mut field = |name: &str| -> Result<String> {
            let (line, text) = next(name)?;
            match text.split_once(' ') {
                Some((k, v)) if k == name => Ok(v.trim().to_string()),
                _ => Err(Error::Checkpoint(format!("line {line}: expected `{name}`"))),
            }
        };
        fn num<T: std::str::FromStr>(name: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Checkpoint(format!("bad value `{v}` for {name}")))
        }
        let epoch = num("epoch", field("epoch")?)?;
        let encoder = EncoderConfig {
            backbone: field("backbone")?
                .parse::<Backbone>()
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
            hidden_dim: num("hidden_dim", field("hidden_dim")?)?,
            out_dim: num("out_dim", field("out_dim")?)?,
            dropout: num("dropout", field("dropout")?)?,
            appnp_steps: num("appnp_steps", field("appnp_steps")?)?,
            appnp_teleport: num("appnp_teleport", field("appnp_teleport")?)?,
            norm_scale: num("norm_scale", field("norm_scale")?)?,
        };
        let in_dim: usize = num("in_dim", field("in_dim")?)?;

        let mut tensors = Vec::with_capacity(3);
        for expected in ["w_hidden", "w_mu", "w_logvar"] {
            let (line, head) = next("tensor header")?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let ["tensor", name, rows, cols] = parts[..] else {
                return Err(Error::Checkpoint(format!("line {line}: expected a tensor header")));
            };
            if name != expected {
                return Err(Error::Checkpoint(format!(
                    "line {line}: expected tensor {expected}, found {name}"
                )));
            }
            let rows: usize = num("rows", rows.to_string())?;
            let cols: usize = num("cols", cols.to_string())?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (line, text) = next("tensor row")?;
                let before = data.len();
                for tok in text.split_whitespace() {
                    data.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::Checkpoint(format!("line {line}: bad number `{tok}`")))?,
                    );
                }
                if data.len() - before != cols {
                    return Err(Error::Checkpoint(format!(
                        "line {line}: expected {cols} values, found {}",
                        data.len() - before
                    )));
                }
            }
            tensors.push(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"));
        }
        let (line, tail) = next("end")?;
        if tail != "end" {
            return Err(Error::Checkpoint(format!("line {line}: expected `end`")));
        }
        let w_logvar = tensors.pop().expect("three tensors");
        let w_mu = tensors.pop().expect("three tensors");
        let w_hidden = tensors.pop().expect("three tensors");
        let params = EncoderParams {
            w_hidden,
            w_mu,
            w_logvar,
        };
        encoder
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid encoder settings: {e}")))?;
        params
            .check_shapes(&encoder, in_dim)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok(Checkpoint { encoder, params, epoch })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
