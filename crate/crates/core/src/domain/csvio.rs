use std::path::Path;

use nalgebra::Vector3;

use super::DomainSampleSet;
use crate::error::{Error, Result};
use crate::points::PointSet;

/// Full column set; normals and weights are optional groups.
pub const SAMPLE_CSV_COLUMNS: [&str; 7] = ["x", "y", "z", "nx", "ny", "nz", "w"];

/// Writes `x,y,z[,nx,ny,nz][,w]`. Planar points get `z = 0`; poses write their translation.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &DomainSampleSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| wrap(path, e))?;
    let mut header = vec!["x", "y", "z"];
    if samples.normals.is_some() {
        header.extend(["nx", "ny", "nz"]);
    }
    if samples.weights.is_some() {
        header.push("w");
    }
    w.write_record(&header).map_err(|e| wrap(path, e))?;
    if let PointSet::Euclidean { dim, .. } = samples.points {
        if dim > 3 {
            return Err(Error::invalid(format!("cannot write {dim}-dimensional samples as x,y,z")));
        }
    }
    for i in 0..samples.len() {
        let p = samples.points.position(i);
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(n) = &samples.normals {
            row.extend(n[i].iter().map(|v| v.to_string()));
        }
        if let Some(wt) = &samples.weights {
            row.push(wt[i].to_string());
        }
        w.write_record(&row).map_err(|e| wrap(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the sample CSV schema back as 3D points.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<DomainSampleSet> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| wrap(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| wrap(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let has_normals = header.len() >= 6 && header[3..6] == ["nx", "ny", "nz"];
    let expected: Vec<&str> = {
        let mut v = vec!["x", "y", "z"];
        if has_normals {
            v.extend(["nx", "ny", "nz"]);
        }
        if header.last().map(String::as_str) == Some("w") {
            v.push("w");
        }
        v
    };
    if header != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, found {}", expected.join(","), header.join(",")),
        });
    }
    let has_weights = expected.last() == Some(&"w");
    let mut coords = Vec::new();
    let mut normals = Vec::new();
    let mut weights = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| wrap(path, e))?;
        let line = i + 2;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad number: {e}"),
            })?;
        if vals.len() != expected.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", expected.len(), vals.len()),
            });
        }
        coords.extend_from_slice(&vals[..3]);
        if has_normals {
            normals.push(Vector3::new(vals[3], vals[4], vals[5]));
        }
        if has_weights {
            weights.push(*vals.last().unwrap());
        }
    }
    if coords.is_empty() {
        return Err(Error::DegenerateDomain(format!("{}: no samples", path.display())));
    }
    let set = DomainSampleSet {
        points: PointSet::euclidean(3, coords)?,
        normals: has_normals.then_some(normals),
        weights: has_weights.then_some(weights),
    };
    set.validate()?;
    Ok(set)
}

fn wrap(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}
