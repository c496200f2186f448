//! CSV formats owned by the CLI: labeled average-patch datasets, energy
//! profiles, pair distances, and trajectories. All floats are written via
//! Rust's shortest-roundtrip `Display`, so every file parses back to the
//! exact same doubles. Comma separator, `.` decimal point, LF endings.

use std::fmt::Write as _;

use patchlens::{Error, Mat, Result};

const DATASET_MAGIC: &str = "patchlens-avgpatch v1";
pub const PROFILE_HEADER: &str = "component_index,eigenvalue,energy";
pub const PAIRS_HEADER: &str = "input_dist,mapped_dist";
pub const TRAJECTORY_HEADER: &str = "iter,coord,avg_filter_value,dispersion";
pub const SENSITIVITY_HEADER: &str = "epsilon,predicted_correlation";

/// Labeled average-patch matrix: one row of K per image plus its class
/// label, with the patch geometry carried along for downstream filter
/// exports.
#[derive(Debug)]
pub struct Dataset {
    pub k: Mat,
    pub y: Vec<u8>,
    pub c: usize,
    pub patch_k: usize,
}

pub fn write_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DATASET_MAGIC}");
    let _ = writeln!(out, "{},{},{},{}", ds.k.rows(), ds.k.cols(), ds.c, ds.patch_k);
    for (i, &label) in ds.y.iter().enumerate() {
        let mut cells = vec![format!("{label}")];
        cells.extend(ds.k.row(i).iter().map(|v| format!("{v}")));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if magic.trim() != DATASET_MAGIC {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{DATASET_MAGIC}`, found `{}`", magic.trim()),
        });
    }
    let (_, dims) = lines.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing dimension line".into(),
    })?;
    let parts: Vec<&str> = dims.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Parse {
            line: 2,
            msg: format!("expected `N,d,c,k`, found `{}`", dims.trim()),
        });
    }
    let dim = |s: &str| -> Result<usize> {
        s.trim().parse().map_err(|_| Error::Parse {
            line: 2,
            msg: format!("bad dimension `{s}`"),
        })
    };
    let (n, d, c, patch_k) = (dim(parts[0])?, dim(parts[1])?, dim(parts[2])?, dim(parts[3])?);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let label: u8 = cells
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                line: lineno,
                msg: "bad label".into(),
            })?;
        let vals: Result<Vec<f64>> = cells
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric cell `{}`", cell.trim()),
                })
            })
            .collect();
        let vals = vals?;
        if vals.len() != d {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("row has {} values, expected {d}", vals.len()),
            });
        }
        y.push(label);
        rows.push(vals);
    }
    if rows.len() != n {
        return Err(Error::Parse {
            line: rows.len() + 2,
            msg: format!("found {} data rows, header says {n}", rows.len()),
        });
    }
    Ok(Dataset {
        k: Mat::from_rows(&rows),
        y,
        c,
        patch_k,
    })
}

pub fn write_profile(eigenvalues: &[f64], energies: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PROFILE_HEADER}");
    for (i, (l, e)) in eigenvalues.iter().zip(energies).enumerate() {
        let _ = writeln!(out, "{i},{l},{e}");
    }
    out
}

/// Returns (eigenvalues, energies).
pub fn parse_profile(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim() != PROFILE_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{PROFILE_HEADER}`"),
        });
    }
    let mut eigenvalues = Vec::new();
    let mut energies = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 cells, found {}", cells.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric cell `{}`", s.trim()),
            })
        };
        eigenvalues.push(num(cells[1])?);
        energies.push(num(cells[2])?);
    }
    Ok((eigenvalues, energies))
}

pub fn write_pairs(pairs: &[(f64, f64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PAIRS_HEADER}");
    for (a, b) in pairs {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

// Reader counterpart of write_pairs; exercised by the round-trip tests.
#[allow(dead_code)]
pub fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim() != PAIRS_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{PAIRS_HEADER}`"),
        });
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 2 cells, found {}", cells.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric cell `{}`", s.trim()),
            })
        };
        pairs.push((num(cells[0])?, num(cells[1])?));
    }
    Ok(pairs)
}

pub fn write_trajectory(traj: &patchlens::dynamics::Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TRAJECTORY_HEADER}");
    for snap in &traj.snapshots {
        for (coord, (w, disp)) in snap.avg_filter.iter().zip(&snap.dispersion).enumerate() {
            let _ = writeln!(out, "{},{coord},{w},{disp}", snap.iter);
        }
    }
    out
}

pub fn write_sensitivity(curve: &[(f64, f64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SENSITIVITY_HEADER}");
    for (eps, corr) in curve {
        let _ = writeln!(out, "{eps},{corr}");
    }
    out
}
