//! Field snapshot files and CSV dumps.
//!
//! A snapshot is one ASCII header line `RSL1 dim N L_1 .. L_n rank` followed by
//! the field data as little-endian `f64` in node-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::field::{Field, FieldKind};
use super::GridSpec;
use crate::{Error, Result};

/// Contents of a snapshot file before the rank is fixed by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub rank: u8,
    pub data: Vec<f64>,
}

impl Snapshot {
    /// Reinterprets the data as a field of kind `K`; the stored rank must match.
    pub fn into_field<K: FieldKind>(self) -> Result<Field<K>> {
        if self.rank != K::RANK {
            return Err(Error::Format(format!(
                "snapshot has rank {}, expected {}",
                self.rank,
                K::RANK
            )));
        }
        Field::from_vec(&self.grid, self.data)
    }
}

pub fn write_snapshot<K: FieldKind>(path: impl AsRef<Path>, field: &Field<K>) -> Result<()> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(64 + 8 * field.data().len());
    let mut header = format!("RSL1 {} {}", grid.dim(), grid.points());
    for l in grid.side_lengths() {
        header.push_str(&format!(" {l:?}"));
    }
    header.push_str(&format!(" {}\n", K::RANK));
    out.extend_from_slice(header.as_bytes());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"RSL1") || tokens.len() < 4 {
        return Err(Error::Format(format!("bad header {:?}", header.trim_end())));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("{s}: {e}")));
    let dim = parse_usize(tokens[1])?;
    let points = parse_usize(tokens[2])?;
    if tokens.len() != 4 + dim {
        return Err(Error::Format(format!("header has {} fields for dim {dim}", tokens.len())));
    }
    let lengths = tokens[3..3 + dim]
        .iter()
        .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let rank: u8 = tokens[3 + dim].parse().map_err(|e| Error::Format(format!("rank: {e}")))?;
    let grid = GridSpec::new(dim, points, &lengths)?;
    let nc = match rank {
        0 => 1,
        1 => dim,
        2 => dim * (dim + 1) / 2,
        r => return Err(Error::Format(format!("rank {r}"))),
    };
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = 8 * nc * grid.node_count();
    if bytes.len() != expected {
        return Err(Error::Format(format!("{} data bytes, expected {expected}", bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot { grid, rank, data })
}

/// One row per node: grid coordinates followed by the stored components.
pub fn write_csv<K: FieldKind>(path: impl AsRef<Path>, field: &Field<K>) -> Result<()> {
    let grid = field.grid();
    let mut out = Vec::new();
    let axes = ["x", "y", "z"];
    let mut head: Vec<String> = axes[..grid.dim()].iter().map(|s| s.to_string()).collect();
    head.extend((0..field.components()).map(|c| format!("c{c}")));
    writeln!(out, "{}", head.join(","))?;
    for node in 0..grid.node_count() {
        let x = grid.position(node);
        let mut row: Vec<String> = x[..grid.dim()].iter().map(|v| format!("{v:?}")).collect();
        row.extend(field.at(node).iter().map(|v| format!("{v:?}")));
        writeln!(out, "{}", row.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{band_limited_perturbation, ScalarField, SymTensorField};

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(3, 8, &[1.0, 0.1, 2.5]).unwrap();
        let h = band_limited_perturbation(&g, 1, 2, 0.3).unwrap();
        let p = dir.path().join("h.rsl");
        write_snapshot(&p, &h).unwrap();
        let back: SymTensorField = read_snapshot(&p).unwrap().into_field().unwrap();
        assert_eq!(back, h);
        assert!(read_snapshot(&p).unwrap().into_field::<crate::grid::Scalar>().is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::torus(2, 8, 1.0).unwrap();
        let p = dir.path().join("f.csv");
        write_csv(&p, &ScalarField::constant(&g, &[2.0]).unwrap()).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert_eq!(text.lines().next().unwrap(), "x,y,c0");
    }
}
