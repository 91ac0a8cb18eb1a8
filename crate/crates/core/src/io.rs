//! File inputs and binary dumps.
//!
//! Three small formats live here:
//!
//! * two-column text tables `r V(r)` for user-supplied potentials,
//! * little-endian f64 binary dumps for condensate profiles (`BGPS`) and
//!   kernel matrices (`BGKM`), for consumers that do not want to parse
//!   JSON at scale,
//! * JSON matrices for quadratic forms and Fock-oracle fixtures.

use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{validation, Error, Result};

/// Parse a whitespace-separated two-column table with `#` comments.
pub fn load_potential_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let r: f64 = it
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::Validation(format!("{}:{}: bad radius", path.display(), lineno + 1)))?;
        let v: f64 = it
            .next()
            .ok_or_else(|| Error::Validation(format!("{}:{}: missing V(r)", path.display(), lineno + 1)))?
            .parse()
            .map_err(|_| Error::Validation(format!("{}:{}: bad V(r)", path.display(), lineno + 1)))?;
        if it.next().is_some() {
            return validation(format!("{}:{}: more than two columns", path.display(), lineno + 1));
        }
        rows.push((r, v));
    }
    if rows.len() < 2 {
        return validation(format!("{}: need at least two table rows", path.display()));
    }
    Ok(rows)
}

fn write_dump(path: &Path, magic: &[u8; 4], dims: &[u64], spacing: f64, data: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(magic)?;
    f.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        f.write_all(&d.to_le_bytes())?;
    }
    f.write_all(&spacing.to_le_bytes())?;
    for &x in data {
        f.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Condensate profile dump: magic `BGPS`, dimension count, dims, grid
/// spacing, then the state vector as little-endian f64.
pub fn write_state_dump(path: &Path, dims: &[u64], spacing: f64, data: &[f64]) -> Result<()> {
    let expected: u64 = dims.iter().product();
    if expected != data.len() as u64 {
        return validation(format!(
            "dump dims {dims:?} do not match {} samples",
            data.len()
        ));
    }
    write_dump(path, b"BGPS", dims, spacing, data)
}

/// Kernel matrix dump: magic `BGKM`, dims `[rows, cols]`, grid spacing,
/// then the matrix in row-major order.
pub fn write_matrix_dump(path: &Path, m: &DMatrix<f64>, spacing: f64) -> Result<()> {
    let data: Vec<f64> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    write_dump(
        path,
        b"BGKM",
        &[m.nrows() as u64, m.ncols() as u64],
        spacing,
        &data,
    )
}

fn json_matrix(value: &serde_json::Value, name: &str) -> Result<DMatrix<f64>> {
    let rows = value
        .as_array()
        .ok_or_else(|| Error::Validation(format!("'{name}' must be an array of rows")))?;
    if rows.is_empty() {
        return validation(format!("'{name}' is empty"));
    }
    let ncols = rows[0].as_array().map(|r| r.len()).unwrap_or(0);
    if ncols == 0 {
        return validation(format!("'{name}' rows must be non-empty arrays"));
    }
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == ncols)
            .ok_or_else(|| Error::Validation(format!("'{name}' row {i} has wrong length")))?;
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = x
                .as_f64()
                .ok_or_else(|| Error::Validation(format!("'{name}'[{i}][{j}] is not a number")))?;
        }
    }
    Ok(m)
}

/// Load a quadratic form `{"phi": [[..]], "gamma": [[..]]}` from JSON.
pub fn load_form(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok((
        json_matrix(&value["phi"], "phi")?,
        json_matrix(&value["gamma"], "gamma")?,
    ))
}

/// One Fock-oracle fixture from a JSON array of
/// `{"phi": [[..]], "gamma": [[..]], "n_max": .., "seed": ..}`.
#[derive(Debug, Clone)]
pub struct OracleFixture {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub n_max: usize,
    pub seed: u64,
}

/// Load an oracle fixture file.
pub fn load_oracle_fixtures(path: &Path) -> Result<Vec<OracleFixture>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::Validation("fixture file must hold a JSON array".into()))?;
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        out.push(OracleFixture {
            phi: json_matrix(&item["phi"], "phi")?,
            gamma: json_matrix(&item["gamma"], "gamma")?,
            n_max: item["n_max"]
                .as_u64()
                .ok_or_else(|| Error::Validation(format!("fixture {i}: missing n_max")))?
                as usize,
            seed: item["seed"].as_u64().unwrap_or(0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pot.dat");
        std::fs::write(&path, "# radius  value\n0.0 4.0\n0.5\t4.0\n1.0 0.0 # edge\n").unwrap();
        let rows = load_potential_table(&path).unwrap();
        assert_eq!(rows, vec![(0.0, 4.0), (0.5, 4.0), (1.0, 0.0)]);
    }

    #[test]
    fn bad_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pot.dat");
        std::fs::write(&path, "0.0 1.0 2.0\n1.0 0.0\n").unwrap();
        assert!(load_potential_table(&path).is_err());
        std::fs::write(&path, "0.0 1.0\n").unwrap();
        assert!(load_potential_table(&path).is_err());
    }

    #[test]
    fn state_dump_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.bgps");
        write_state_dump(&path, &[3], 0.25, &[1.0, 2.0, 3.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"BGPS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0.25);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
        assert!(write_state_dump(&path, &[4], 0.25, &[1.0]).is_err());
    }

    #[test]
    fn matrix_dump_is_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.bgkm");
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        write_matrix_dump(&path, &m, 0.1).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"BGKM");
        // header: magic(4) + ndims(4) + 2*8 + spacing(8) = 32 bytes
        let at = |k: usize| f64::from_le_bytes(bytes[32 + 8 * k..40 + 8 * k].try_into().unwrap());
        assert_eq!([at(0), at(1), at(2), at(3)], [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn forms_load_from_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("form.json");
        std::fs::write(&path, r#"{"phi": [[2.0, 0.1], [0.1, 3.0]], "gamma": [[0.5, 0.0], [0.0, 0.5]]}"#)
            .unwrap();
        let (phi, gamma) = load_form(&path).unwrap();
        assert_eq!(phi[(0, 1)], 0.1);
        assert_eq!(gamma[(1, 1)], 0.5);
        std::fs::write(&path, r#"{"phi": [[1.0], [2.0, 3.0]], "gamma": [[1.0]]}"#).unwrap();
        assert!(load_form(&path).is_err());
    }
}
