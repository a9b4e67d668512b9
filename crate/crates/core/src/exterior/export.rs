//! Trajectory files.
//!
//! * `<stem>.csv`: one row per stamp, columns `stamp,time,l2,h1,mass`.
//! * `<stem>.bin`: all fields as little-endian `f64`, row-major with shape
//!   `[stamps, n_r, n_theta]` (angle fastest).
//! * `<stem>.json`: header describing the binary (shape, grid, times).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExteriorGrid, FieldTrajectory, GridSpec};
use crate::error::{Error, Result};

pub const FORMAT: &str = "f64-le-row-major";

/// Fixed float rendering used in every CSV file: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryHeader {
    pub format: String,
    pub shape: [usize; 3],
    pub grid: GridSpec,
    pub times: Vec<f64>,
}

/// CSV rows for the per-stamp norms.
pub fn trajectory_csv(traj: &FieldTrajectory) -> String {
    let mut s = String::from("stamp,time,l2,h1,mass\n");
    for k in 0..traj.len() {
        s.push_str(&format!(
            "{k},{},{},{},{}\n",
            format_float(traj.times[k]),
            format_float(traj.l2[k]),
            format_float(traj.h1[k]),
            format_float(traj.mass[k])
        ));
    }
    s
}

/// File names and contents of the three trajectory files, in memory.
pub fn trajectory_files(traj: &FieldTrajectory, grid: &ExteriorGrid, stem: &str) -> Result<Vec<(String, Vec<u8>)>> {
    let mut bytes = Vec::with_capacity(traj.len() * grid.n_nodes() * 8);
    for f in &traj.fields {
        for v in f {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = BinaryHeader {
        format: FORMAT.into(),
        shape: [traj.len(), grid.n_r(), grid.n_theta()],
        grid: grid.clone().into(),
        times: traj.times.clone(),
    };
    Ok(vec![
        (format!("{stem}.csv"), trajectory_csv(traj).into_bytes()),
        (format!("{stem}.bin"), bytes),
        (format!("{stem}.json"), serde_json::to_string_pretty(&header)?.into_bytes()),
    ])
}

/// Writes the three trajectory files and returns their paths.
pub fn write_trajectory(traj: &FieldTrajectory, grid: &ExteriorGrid, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, bytes) in trajectory_files(traj, grid, stem)? {
        let path = dir.join(name);
        fs::File::create(&path)?.write_all(&bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads the header and the fields back; norms are recomputed on the grid.
pub fn read_trajectory(dir: &Path, stem: &str) -> Result<(ExteriorGrid, FieldTrajectory)> {
    let header: BinaryHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    if header.format != FORMAT {
        return Err(Error::Precondition(format!("unknown binary format {}", header.format)));
    }
    let grid = ExteriorGrid::try_from(header.grid)?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    let [ns, nr, nt] = header.shape;
    if bytes.len() != ns * nr * nt * 8 || header.times.len() != ns || nr != grid.n_r() || nt != grid.n_theta() {
        return Err(Error::Precondition("trajectory binary does not match its header".into()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut traj = FieldTrajectory {
        n_r: nr,
        n_theta: nt,
        times: Vec::new(),
        fields: Vec::new(),
        gamma_trace: Vec::new(),
        l2: Vec::new(),
        h1: Vec::new(),
        mass: Vec::new(),
    };
    for (k, chunk) in values.chunks_exact(nr * nt).enumerate() {
        traj.push(&grid, header.times[k], chunk.to_vec());
    }
    Ok((grid, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{solve_full, BoundaryFlux, SolveOptions};
    use crate::geometry::BoundaryCurve;
    use crate::green::HeatKernelParams;
    use crate::pointsource::GaussianMixture;

    #[test]
    fn round_trip() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 6.0, 11, 16).unwrap();
        let traj = solve_full(
            &grid,
            &GaussianMixture::single(1.0, [3.0, 0.0], 0.5).unwrap(),
            &BoundaryFlux::constant(0.1),
            &SolveOptions::new(0.2, 4, 2),
            HeatKernelParams::new(1.0).unwrap(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_trajectory(&traj, &grid, dir.path(), "full").unwrap();
        assert_eq!(files.len(), 3);
        let (_, back) = read_trajectory(dir.path(), "full").unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
    }
}
