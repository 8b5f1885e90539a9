//! On-disk formats: raw little-endian `f64` payload plus a JSON sidecar, and
//! 8-bit PGM images.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AlphaSchedule, BarStack, Field, FocalStack, Grid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisMeta {
    name: String,
    count: usize,
    spacing: f64,
    origin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    kind: String,
    dim_n: usize,
    axes: Vec<AxisMeta>,
    dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphas2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights2: Option<Vec<f64>>,
}

/// `(payload, sidecar)` paths for a base path; a trailing `.bin`/`.json` is dropped.
pub fn artifact_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let p = path.as_ref();
    let base = match p.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("json") => p.with_extension(""),
        _ => p.to_path_buf(),
    };
    let mut bin = base.clone().into_os_string();
    bin.push(".bin");
    let mut json = base.into_os_string();
    json.push(".json");
    (bin.into(), json.into())
}

fn axis(name: &str, g: &Grid) -> AxisMeta {
    AxisMeta {
        name: name.to_string(),
        count: g.count,
        spacing: g.spacing,
        origin: g.origin,
    }
}

fn grid_of(path: &Path, a: &AxisMeta) -> Result<Grid> {
    Grid::new(a.count, a.spacing, a.origin).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: format!("axis {}: {e}", a.name),
    })
}

fn write_pair(path: &Path, meta: &Sidecar, values: &[f64]) -> Result<()> {
    let (bin, json) = artifact_paths(path);
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

fn read_pair(path: &Path, kind: &str) -> Result<(Sidecar, Vec<f64>, PathBuf)> {
    let (bin, json) = artifact_paths(path);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    if meta.dtype != "f64le" {
        return Err(Error::UnsupportedDtype {
            path: json,
            dtype: meta.dtype,
        });
    }
    if meta.kind != kind {
        return Err(Error::Format {
            path: json,
            msg: format!("expected kind {kind:?}, found {:?}", meta.kind),
        });
    }
    let mut expected: usize = meta.axes.iter().map(|a| a.count).product();
    for list in [&meta.alphas, &meta.alphas2].into_iter().flatten() {
        expected *= list.len();
    }
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::LengthMismatch {
            path: bin,
            expected,
            found_bytes: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((meta, values, json))
}

fn field_axis_names(n: usize) -> Vec<&'static str> {
    if n == 1 {
        vec!["x1", "u1"]
    } else {
        vec!["x1", "x2", "u1", "u2"]
    }
}

pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let grids: Vec<&Grid> = field.x.iter().chain(field.u.iter()).collect();
    let axes = field_axis_names(field.n)
        .iter()
        .zip(grids)
        .map(|(n, g)| axis(n, g))
        .collect();
    let meta = Sidecar {
        kind: "field".into(),
        dim_n: field.n,
        axes,
        dtype: "f64le".into(),
        alphas: None,
        weights: None,
        alphas2: None,
        weights2: None,
    };
    write_pair(path.as_ref(), &meta, &field.values)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let (meta, values, json) = read_pair(path.as_ref(), "field")?;
    if meta.axes.len() != 2 * meta.dim_n {
        return Err(Error::Format {
            path: json,
            msg: format!("dim_n {} needs {} axes, found {}", meta.dim_n, 2 * meta.dim_n, meta.axes.len()),
        });
    }
    let grids = meta
        .axes
        .iter()
        .map(|a| grid_of(&json, a))
        .collect::<Result<Vec<_>>>()?;
    let (x, u) = grids.split_at(meta.dim_n);
    Field::new(x.to_vec(), u.to_vec(), values).map_err(|e| Error::Format {
        path: json,
        msg: e.to_string(),
    })
}

pub fn write_stack(stack: &FocalStack, path: impl AsRef<Path>) -> Result<()> {
    let names = ["xbar1", "xbar2"];
    let meta = Sidecar {
        kind: "stack".into(),
        dim_n: stack.n,
        axes: stack.xbar.iter().zip(names).map(|(g, n)| axis(n, g)).collect(),
        dtype: "f64le".into(),
        alphas: Some(stack.schedule.alphas.clone()),
        weights: Some(stack.schedule.weights.clone()),
        alphas2: None,
        weights2: None,
    };
    write_pair(path.as_ref(), &meta, &stack.values)
}

fn schedule_of(json: &Path, alphas: Option<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<AlphaSchedule> {
    let alphas = alphas.ok_or_else(|| Error::Format {
        path: json.to_path_buf(),
        msg: "stack sidecar lacks alphas".into(),
    })?;
    let sched = match weights {
        Some(w) => AlphaSchedule::with_weights(alphas, w),
        None => AlphaSchedule::new(alphas),
    };
    sched.map_err(|e| Error::Format {
        path: json.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<FocalStack> {
    let (meta, values, json) = read_pair(path.as_ref(), "stack")?;
    if meta.axes.len() != meta.dim_n {
        return Err(Error::Format {
            path: json,
            msg: format!("dim_n {} needs {} xbar axes, found {}", meta.dim_n, meta.dim_n, meta.axes.len()),
        });
    }
    let xbar = meta
        .axes
        .iter()
        .map(|a| grid_of(&json, a))
        .collect::<Result<Vec<_>>>()?;
    let schedule = schedule_of(&json, meta.alphas, meta.weights)?;
    FocalStack::new(schedule, xbar, values).map_err(|e| Error::Format {
        path: json,
        msg: e.to_string(),
    })
}

pub fn write_bar_stack(stack: &BarStack, path: impl AsRef<Path>) -> Result<()> {
    let meta = Sidecar {
        kind: "bar_stack".into(),
        dim_n: 2,
        axes: vec![axis("xbar1", &stack.xbar[0]), axis("xbar2", &stack.xbar[1])],
        dtype: "f64le".into(),
        alphas: Some(stack.schedules[0].alphas.clone()),
        weights: Some(stack.schedules[0].weights.clone()),
        alphas2: Some(stack.schedules[1].alphas.clone()),
        weights2: Some(stack.schedules[1].weights.clone()),
    };
    write_pair(path.as_ref(), &meta, &stack.values)
}

pub fn read_bar_stack(path: impl AsRef<Path>) -> Result<BarStack> {
    let (meta, values, json) = read_pair(path.as_ref(), "bar_stack")?;
    if meta.axes.len() != 2 {
        return Err(Error::Format {
            path: json,
            msg: format!("bar stack needs 2 xbar axes, found {}", meta.axes.len()),
        });
    }
    let x1 = grid_of(&json, &meta.axes[0])?;
    let x2 = grid_of(&json, &meta.axes[1])?;
    let s1 = schedule_of(&json, meta.alphas, meta.weights)?;
    let s2 = schedule_of(&json, meta.alphas2, meta.weights2)?;
    BarStack::new([s1, s2], [x1, x2], values).map_err(|e| Error::Format {
        path: json,
        msg: e.to_string(),
    })
}

/// Linear rescale to 0..=255 (min to 0, max to 255); constant input maps to 128.
pub fn pgm_pixels(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary PGM (P5) of a row-major `rows x cols` slice.
pub fn emit_pgm(values: &[f64], rows: usize, cols: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(Error::Shape(format!(
            "pgm slice {rows}x{cols} does not match {} values",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(values.len() + 32);
    write!(out, "P5\n{cols} {rows}\n255\n").expect("write to vec");
    out.extend(pgm_pixels(values));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_rescale() {
        assert_eq!(pgm_pixels(&[0.0, 1.0, 2.0, 3.0]), vec![0, 85, 170, 255]);
        assert_eq!(pgm_pixels(&[7.0; 9]), vec![128; 9]);
        assert_eq!(pgm_pixels(&[-2.5]), vec![128]);
    }

    #[test]
    fn artifact_path_variants() {
        let (b, j) = artifact_paths("out/recon");
        assert_eq!(b, PathBuf::from("out/recon.bin"));
        assert_eq!(j, PathBuf::from("out/recon.json"));
        let (b, j) = artifact_paths("out/recon.bin");
        assert_eq!(b, PathBuf::from("out/recon.bin"));
        assert_eq!(j, PathBuf::from("out/recon.json"));
    }
}
