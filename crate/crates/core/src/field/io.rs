//! AFLD binary field files and CSV slice export.
//!
//! Layout: one ASCII header line
//! `AFLD v1 N=<dim> shape=<s1,...> spacing=<h1,...> origin=<o1,...> masked=<0|1>`,
//! then the node values as little-endian `f64` in row-major order, then one
//! byte per node (1 = inside) when masked.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use super::grid::GridSpec;
use super::mask::DomainMask;
use super::scalar::ScalarField;
use crate::error::{Error, Result};

const MAGIC: &str = "AFLD";
const VERSION: &str = "v1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_afld<W: Write>(u: &ScalarField, mut w: W) -> Result<()> {
    let g = u.grid();
    writeln!(
        w,
        "{MAGIC} {VERSION} N={} shape={} spacing={} origin={} masked={}",
        g.dim(),
        join(g.shape()),
        join(g.spacing()),
        join(g.origin()),
        u.is_masked() as u8
    )?;
    let mut buf = Vec::with_capacity(u.values().len() * 8);
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    if let Some(m) = u.mask() {
        let flags: Vec<u8> = m.inside().iter().map(|&b| b as u8).collect();
        w.write_all(&flags)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Format(format!("bad {key} entry '{t}'"))))
        .collect()
}

pub fn read_afld<R: BufRead>(mut r: R) -> Result<ScalarField> {
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format("missing AFLD magic".into()));
    }
    match parts.next() {
        Some(VERSION) => {}
        v => return Err(Error::Format(format!("unsupported version {v:?}"))),
    }
    let (mut dim, mut shape, mut spacing, mut origin, mut masked) = (None, None, None, None, None);
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format(format!("bad header field '{kv}'")))?;
        match k {
            "N" => dim = Some(v.parse::<usize>().map_err(|_| Error::Format("bad N".into()))?),
            "shape" => shape = Some(parse_list::<usize>(k, v)?),
            "spacing" => spacing = Some(parse_list::<f64>(k, v)?),
            "origin" => origin = Some(parse_list::<f64>(k, v)?),
            "masked" => {
                masked = Some(match v {
                    "0" => false,
                    "1" => true,
                    _ => return Err(Error::Format("masked must be 0 or 1".into())),
                })
            }
            _ => return Err(Error::Format(format!("unknown header field '{k}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks {k}"));
    let dim = dim.ok_or_else(|| missing("N"))?;
    let shape = shape.ok_or_else(|| missing("shape"))?;
    if shape.len() != dim {
        return Err(Error::Format("shape length differs from N".into()));
    }
    let grid = GridSpec::new(
        shape,
        spacing.ok_or_else(|| missing("spacing"))?,
        origin.ok_or_else(|| missing("origin"))?,
    )?;
    let masked = masked.ok_or_else(|| missing("masked"))?;
    let mut bytes = vec![0u8; grid.len() * 8];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated value block".into()))?;
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    if masked {
        let mut flags = vec![0u8; grid.len()];
        r.read_exact(&mut flags).map_err(|_| Error::Format("truncated mask block".into()))?;
        let inside = flags
            .iter()
            .map(|&f| match f {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Format("mask flag must be 0 or 1".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let mask = DomainMask::new(grid, inside)?;
        ScalarField::masked(Arc::new(mask), values)
    } else {
        ScalarField::new(grid, values)
    }
}

pub fn save_afld(u: &ScalarField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_afld(u, std::io::BufWriter::new(f))
}

pub fn load_afld(path: &Path) -> Result<ScalarField> {
    let f = std::fs::File::open(path)?;
    read_afld(std::io::BufReader::new(f))
}

/// CSV of the 2-D slice spanned by `axes`, other axes held at the indices in
/// `fixed` (entries for the slice axes are ignored).
pub fn slice_csv(u: &ScalarField, axes: (usize, usize), fixed: &[usize]) -> Result<String> {
    let g = u.grid();
    let n = g.dim();
    let (a, b) = axes;
    if a >= n || b >= n || a == b || fixed.len() != n {
        return Err(Error::InvalidArgument("slice axes or fixed index out of range".into()));
    }
    if fixed.iter().zip(g.shape()).any(|(i, s)| i >= s) {
        return Err(Error::InvalidArgument("fixed index outside the grid".into()));
    }
    let mut out = format!("x{a},x{b},value\n");
    let mut idx = fixed.to_vec();
    for i in 0..g.shape()[a] {
        for k in 0..g.shape()[b] {
            idx[a] = i;
            idx[b] = k;
            let x = g.coords_of(&idx);
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", x[a], x[b], u.value_at(&idx)));
        }
    }
    Ok(out)
}
