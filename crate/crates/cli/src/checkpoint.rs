//! Plain-text parameter checkpoints.
//!
//! ```text
//! m3s-checkpoint v1
//! method m3s
//! seed 3
//! param audio.enc0.weight 20 32
//! <values separated by single spaces>
//! param audio.enc0.bias 32
//! ...
//! ```
//!
//! Every `param` line gives a name and its shape; the next line holds the
//! row-major values in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::path::Path;

use m3s_core::diff::Tensor;
use m3s_core::model::Parameters;

use crate::error::{HarnessError, Result};
use crate::output::write_atomic;

const MAGIC: &str = "m3s-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub method: String,
    pub seed: u64,
    pub params: Parameters,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nmethod {}\nseed {}\n", self.method, self.seed);
        for (name, t) in self.params.iter() {
            out.push_str("param ");
            out.push_str(name);
            for d in t.shape() {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let values: Vec<String> = t.data().iter().map(f64::to_string).collect();
            out.push_str(&values.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Checkpoint> {
        let err = |line: usize, message: &str| HarnessError::Parse {
            path: path.to_path_buf(),
            line: line as u64,
            message: message.into(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("truncated before {what}")));
        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(err(n, "not an m3s checkpoint"));
        }
        let (n, method) = next("method")?;
        let method = method.strip_prefix("method ").ok_or_else(|| err(n, "expected `method <name>`"))?;
        let (n, seed) = next("seed")?;
        let seed = seed
            .strip_prefix("seed ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(n, "expected `seed <integer>`"))?;
        let mut entries = Vec::new();
        while let Ok((n, head)) = next("param") {
            let mut parts = head.split(' ');
            if parts.next() != Some("param") {
                return Err(err(n, "expected `param <name> <dims...>`"));
            }
            let name = parts.next().ok_or_else(|| err(n, "missing parameter name"))?;
            let shape = parts
                .map(str::parse)
                .collect::<std::result::Result<Vec<usize>, _>>()
                .map_err(|_| err(n, "bad dimension"))?;
            let (n, body) = next("values")?;
            let data = body
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| err(n, "bad value"))?;
            let tensor = Tensor::new(shape, data).map_err(|_| err(n, "value count does not match shape"))?;
            entries.push((name.to_string(), tensor));
        }
        Ok(Checkpoint { method: method.to_string(), seed, params: Parameters::new(entries) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Checkpoint::parse(&text, path)
    }
}
