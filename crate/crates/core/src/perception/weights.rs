//! Plain-text weight container.
//!
//! ```text
//! tomtalk-weights 1
//! # comments and blank lines are ignored
//! blob entry.kernel 3 3 1 8
//! 0.01 -0.2 ...
//! blob entry.bn.gamma 8
//! ...
//! ```
//!
//! Each `blob` header names the blob and lists its shape; the values that
//! follow (any number of lines, whitespace separated) are in row-major order
//! and must match the shape product.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::PerceptionError;

const MAGIC: &str = "tomtalk-weights";
const VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Blob {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightFile {
    pub blobs: BTreeMap<String, Blob>,
}

impl WeightFile {
    pub fn insert(&mut self, name: impl Into<String>, blob: Blob) {
        self.blobs.insert(name.into(), blob);
    }

    pub fn get(&self, name: &str) -> Option<&Blob> {
        self.blobs.get(name)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PerceptionError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| PerceptionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        read_weights(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), PerceptionError> {
        let path = path.as_ref();
        let io_err = |source| PerceptionError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        write_weights(self, &mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }
}

pub fn write_weights<W: Write>(file: &WeightFile, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    for (name, blob) in &file.blobs {
        write!(out, "blob {name}")?;
        for d in &blob.shape {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
        let line: Vec<String> = blob.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn syntax(line: usize, message: impl Into<String>) -> PerceptionError {
    PerceptionError::WeightFile {
        line,
        message: message.into(),
    }
}

pub fn read_weights<R: BufRead>(input: R) -> Result<WeightFile, PerceptionError> {
    let mut file = WeightFile::default();
    let mut current: Option<(String, Vec<usize>, Vec<f64>, usize)> = None;
    let mut seen_magic = false;

    let finish = |file: &mut WeightFile,
                  cur: Option<(String, Vec<usize>, Vec<f64>, usize)>|
     -> Result<(), PerceptionError> {
        if let Some((name, shape, values, line)) = cur {
            let expected: usize = shape.iter().product();
            if values.len() != expected {
                return Err(syntax(
                    line,
                    format!(
                        "blob `{name}` has {} values, shape needs {expected}",
                        values.len()
                    ),
                ));
            }
            file.insert(name, Blob { shape, values });
        }
        Ok(())
    };

    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| syntax(n, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !seen_magic {
            if trimmed != format!("{MAGIC} {VERSION}") {
                return Err(syntax(n, format!("expected header `{MAGIC} {VERSION}`")));
            }
            seen_magic = true;
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        if trimmed.starts_with("blob ") {
            tokens.next();
            finish(&mut file, current.take())?;
            let name = tokens
                .next()
                .ok_or_else(|| syntax(n, "blob header without a name"))?
                .to_string();
            if file.blobs.contains_key(&name) {
                return Err(syntax(n, format!("duplicate blob `{name}`")));
            }
            let shape = tokens
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| syntax(n, format!("bad dimension `{t}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if shape.is_empty() || shape.contains(&0) {
                return Err(syntax(n, format!("blob `{name}` needs a non-empty shape")));
            }
            current = Some((name, shape, Vec::new(), n));
        } else {
            let Some((_, _, values, _)) = current.as_mut() else {
                return Err(syntax(n, "values before any blob header"));
            };
            for t in tokens {
                let v: f64 = t
                    .parse()
                    .map_err(|_| syntax(n, format!("bad number `{t}`")))?;
                if !v.is_finite() {
                    return Err(syntax(n, format!("non-finite value `{t}`")));
                }
                values.push(v);
            }
        }
    }
    if !seen_magic {
        return Err(syntax(0, "empty weight file"));
    }
    finish(&mut file, current.take())?;
    Ok(file)
}
