//! Snapshot JSON files and series CSV files.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StarShape;
use crate::trajectory::{SeriesRow, Snapshot, Trajectory};

/// Snapshot file name for a step index, zero-padded to four digits.
pub fn snapshot_file_name(step: usize) -> String {
    format!("{step:04}.json")
}

pub fn write_shape(path: &Path, shape: &StarShape) -> Result<()> {
    fs::write(path, serde_json::to_string(shape)?)?;
    Ok(())
}

pub fn read_shape(path: &Path) -> Result<StarShape> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Entry of the snapshot index kept alongside a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    pub t: f64,
    pub file: String,
}

/// Writes `trajectory.csv` and `snapshots/NNNN.json` under `dir`, returning
/// the snapshot index.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<SnapshotEntry>> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    write_csv(&dir.join("trajectory.csv"), traj.series())?;
    traj.snapshots()
        .iter()
        .map(|s| {
            let file = format!("snapshots/{}", snapshot_file_name(s.step));
            write_shape(&dir.join(&file), &s.shape)?;
            Ok(SnapshotEntry {
                step: s.step,
                t: s.t,
                file,
            })
        })
        .collect()
}

/// Reads back what [`write_trajectory`] wrote.
pub fn read_trajectory(dir: &Path, index: &[SnapshotEntry]) -> Result<Trajectory> {
    let series: Vec<SeriesRow> = read_csv(&dir.join("trajectory.csv"))?;
    let snapshots = index
        .iter()
        .map(|e| {
            Ok(Snapshot {
                step: e.step,
                t: e.t,
                shape: read_shape(&dir.join(&e.file))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_parts(snapshots, series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingLaw;
    use crate::geometry::Vec2;

    #[test]
    fn trajectory_round_trip() {
        let law = ForcingLaw::new(1.0, 1.0, 2).unwrap();
        let mut traj = Trajectory::new();
        for (k, r) in [0.5, 0.45, 0.41].iter().enumerate() {
            let s = StarShape::cosine_perturbation(*r, 0.02, 3, 64).unwrap();
            traj.record(10 * k, 0.1 * k as f64, s, &law).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let index = write_trajectory(dir.path(), &traj).unwrap();
        assert_eq!(index[2].file, "snapshots/0020.json");
        let back = read_trajectory(dir.path(), &index).unwrap();
        assert_eq!(back.series(), traj.series());
        assert_eq!(back.snapshots(), traj.snapshots());
        let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert!(text.starts_with(
            "t,volume,perimeter,energy,lambda,star_radius,inner_radius,outer_radius,hausdorff_to_fitted_ball"
        ));
    }

    #[test]
    fn shape_file_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let s = StarShape::disk(Vec2::new(0.5, 0.0), 1.0, 8).unwrap();
        write_shape(&p, &s).unwrap();
        let v: serde_json::Value = read_json(&p).unwrap();
        assert_eq!(v["n_theta"], 8);
        assert_eq!(read_shape(&p).unwrap(), s);
        assert!(read_shape(&dir.path().join("missing.json")).is_err());
    }
}
