use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::system::{Ensemble, Trajectory};
use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;

/// Writes `t,x1,...,xn`, one row per grid point.
pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    let n = traj.dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let row: Vec<String> = std::iter::once(fmt_f64(*t)).chain(x.iter().map(|v| fmt_f64(*v))).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trajectory(traj, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_p<path_index>.csv` for every path; returns the file paths.
pub fn save_ensemble(ens: &Ensemble, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    ens.trajectories
        .iter()
        .map(|tr| {
            let path = dir.join(format!("{stem}_p{}.csv", tr.path_index));
            save_trajectory(tr, &path).map(|_| path)
        })
        .collect()
}
