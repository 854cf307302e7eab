//! File formats: CSV field snapshots, the step log, residual-report CSV, and
//! the `run.meta` key = value metadata file that makes a run directory
//! self-describing (the `entropy` subcommand rebuilds a full trajectory from
//! the directory alone).
//!
//! Every writer is atomic: content goes to a temporary file in the target
//! directory which is then renamed into place, so a killed process never
//! leaves a truncated file that parses as valid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::entropy::{ResidualKind, ResidualReport, Verdict};
use crate::grid::{build_grid, Field, RectDomain, UniformGrid};
use crate::model::{builtin_model_pair, InitialData, Problem};
use crate::solver::{FluxScheme, SolverConfig, StepRecord, Trajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("run directory {0} has no run.meta")]
    NotARunDirectory(PathBuf),
    #[error("run.meta is missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("could not rebuild the model from run.meta: {0}")]
    Rebuild(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `text` to `path` atomically (unique temp file + rename), creating
/// parent directories as needed.
pub fn atomic_write_text(path: &Path, text: &str) -> Result<(), IoError> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(file_err(&parent))?;
    let unique = COUNTER.fetch_add(1, Ordering::Relaxed);
    let stem = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = parent.join(format!(".{stem}.{}.{unique}.tmp", std::process::id()));
    fs::write(&tmp, text).map_err(file_err(&tmp))?;
    fs::rename(&tmp, path).map_err(file_err(path))?;
    Ok(())
}

/// Canonical snapshot file name: zero-padded index plus the time with six
/// decimals, e.g. `snap_0003_t0.125000.csv`.
pub fn snapshot_file_name(index: usize, t: f64) -> String {
    format!("snap_{index:04}_t{t:.6}.csv")
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: round-trips every finite f64 exactly.
    format!("{v:.16e}")
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64, IoError> {
    s.trim().parse::<f64>().map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad number `{s}`: {e}"),
    })
}

/// Serialize one field snapshot. Header `i,x,u` in 1-D and `i,j,x,y,u` in
/// 2-D; one row per cell in lexicographic cell order.
pub fn write_snapshot(path: &Path, field: &Field) -> Result<(), IoError> {
    let grid = field.grid();
    let mut text = String::with_capacity(64 * grid.cell_count());
    match grid.dim() {
        1 => text.push_str("i,x,u\n"),
        _ => text.push_str("i,j,x,y,u\n"),
    }
    for c in 0..grid.cell_count() {
        let idx = grid.multi_index(c);
        let x = grid.center(c);
        let u = field.values()[c];
        match grid.dim() {
            1 => {
                let _ = writeln!(text, "{},{},{}", idx[0], fmt_f64(x[0]), fmt_f64(u));
            }
            _ => {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    idx[0],
                    idx[1],
                    fmt_f64(x[0]),
                    fmt_f64(x[1]),
                    fmt_f64(u)
                );
            }
        }
    }
    atomic_write_text(path, &text)
}

/// Read a snapshot written by [`write_snapshot`] onto `grid`. Every cell must
/// appear exactly once with a finite value.
pub fn read_snapshot(path: &Path, grid: &UniformGrid) -> Result<Field, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        msg: "empty file".into(),
    })?;
    let expected_header = match grid.dim() {
        1 => "i,x,u",
        _ => "i,j,x,y,u",
    };
    if header.trim() != expected_header {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            msg: format!(
                "header `{}` does not match the {}-D schema `{expected_header}`",
                header.trim(),
                grid.dim()
            ),
        });
    }
    let mut values = vec![f64::NAN; grid.cell_count()];
    let mut seen = vec![false; grid.cell_count()];
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let expected_cols = grid.dim() * 2 + 1;
        if cols.len() != expected_cols {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected {expected_cols} columns, got {}", cols.len()),
            });
        }
        let mut idx = [0usize; 2];
        for a in 0..grid.dim() {
            idx[a] = cols[a].trim().parse::<usize>().map_err(|e| IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("bad cell index `{}`: {e}", cols[a]),
            })?;
            if idx[a] >= grid.n(a) {
                return Err(IoError::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("cell index {} out of range on axis {a}", idx[a]),
                });
            }
        }
        let u = parse_f64(path, lineno + 1, cols[expected_cols - 1])?;
        if !u.is_finite() {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("non-finite state value {u}"),
            });
        }
        let c = grid.linear_index(&idx[..grid.dim()]);
        if seen[c] {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("cell {:?} appears twice", &idx[..grid.dim()]),
            });
        }
        seen[c] = true;
        values[c] = u;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            msg: format!(
                "cell {:?} is missing ({} of {} present)",
                grid.multi_index(missing),
                seen.iter().filter(|&&s| s).count(),
                grid.cell_count()
            ),
        });
    }
    Field::from_values(grid, values).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Serialize the step log (`step,t,dt,min,max,mass`).
pub fn write_step_log(path: &Path, log: &[StepRecord]) -> Result<(), IoError> {
    let mut text = String::from("step,t,dt,min,max,mass\n");
    for r in log {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.t),
            fmt_f64(r.dt),
            fmt_f64(r.min),
            fmt_f64(r.max),
            fmt_f64(r.mass)
        );
    }
    atomic_write_text(path, &text)
}

/// Read a step log back.
pub fn read_step_log(path: &Path) -> Result<Vec<StepRecord>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "step,t,dt,min,max,mass" {
                return Err(IoError::Format {
                    path: path.to_path_buf(),
                    msg: format!("unexpected step-log header `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected 6 columns, got {}", cols.len()),
            });
        }
        out.push(StepRecord {
            step: cols[0].trim().parse().map_err(|e| IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("bad step index `{}`: {e}", cols[0]),
            })?,
            t: parse_f64(path, lineno + 1, cols[1])?,
            dt: parse_f64(path, lineno + 1, cols[2])?,
            min: parse_f64(path, lineno + 1, cols[3])?,
            max: parse_f64(path, lineno + 1, cols[4])?,
            mass: parse_f64(path, lineno + 1, cols[5])?,
        });
    }
    Ok(out)
}

/// Serialize residual reports to the verification CSV
/// (`functional,k,delta,value,limit,tol,verdict`). Layer functionals emit
/// one row per δ; single-value functionals emit one row with an empty delta.
/// The functional column carries `name/test_function` so reports from
/// different test functions stay distinguishable.
pub fn write_residual_reports(path: &Path, reports: &[ResidualReport]) -> Result<(), IoError> {
    let mut text = String::from("functional,k,delta,value,limit,tol,verdict\n");
    for r in reports {
        let functional = format!("{}/{}", r.functional, r.test_function);
        let k = r.k.map(fmt_f64).unwrap_or_default();
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        };
        for &(delta, value) in &r.values {
            let _ = writeln!(
                text,
                "{functional},{k},{},{},{},{},{verdict}",
                delta.map(fmt_f64).unwrap_or_default(),
                fmt_f64(value),
                fmt_f64(r.limit),
                fmt_f64(r.tolerance),
            );
        }
    }
    atomic_write_text(path, &text)
}

/// Names of the model parameters echoed into `run.meta`, along with grid,
/// solver, and snapshot information. Everything needed to rebuild the
/// trajectory from the directory alone.
#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub model_name: String,
    pub model_params: BTreeMap<String, f64>,
}

fn push_kv(text: &mut String, key: &str, value: impl AsRef<str>) {
    let _ = writeln!(text, "{key} = {}", value.as_ref());
}

fn join_f64(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Write the full run directory: one CSV per snapshot, `steps.csv`, and
/// `run.meta`. Returns the paths of the snapshot files in order.
pub fn write_trajectory(
    dir: &Path,
    traj: &Trajectory,
    meta: &RunMetadata,
) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(file_err(dir))?;
    let mut snapshot_paths = Vec::with_capacity(traj.snapshots.len());
    for (i, (t, field)) in traj.snapshots.iter().enumerate() {
        let path = dir.join(snapshot_file_name(i, *t));
        write_snapshot(&path, field)?;
        snapshot_paths.push(path);
    }
    write_step_log(&dir.join("steps.csv"), &traj.step_log)?;

    let grid = traj.grid();
    let dom = grid.domain();
    let mut text = String::new();
    push_kv(&mut text, "format", "zeroflux-run/1");
    push_kv(
        &mut text,
        "version",
        format!("zeroflux {}", env!("CARGO_PKG_VERSION")),
    );
    push_kv(&mut text, "model.name", &meta.model_name);
    for (key, value) in &meta.model_params {
        push_kv(&mut text, &format!("model.param.{key}"), fmt_f64(*value));
    }
    push_kv(&mut text, "grid.dim", grid.dim().to_string());
    push_kv(
        &mut text,
        "grid.n",
        (0..grid.dim())
            .map(|a| grid.n(a).to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    push_kv(
        &mut text,
        "domain.lo",
        join_f64((0..grid.dim()).map(|a| dom.lo(a))),
    );
    push_kv(
        &mut text,
        "domain.hi",
        join_f64((0..grid.dim()).map(|a| dom.hi(a))),
    );
    push_kv(
        &mut text,
        "state.max",
        fmt_f64(traj.problem.flux.saturation()),
    );
    push_kv(&mut text, "time.horizon", fmt_f64(traj.problem.horizon));
    push_kv(&mut text, "solver.t_end", fmt_f64(traj.config.t_end));
    push_kv(&mut text, "solver.eps", fmt_f64(traj.config.eps));
    push_kv(
        &mut text,
        "solver.cfl_safety",
        fmt_f64(traj.config.cfl_safety),
    );
    push_kv(
        &mut text,
        "solver.scheme",
        traj.config.flux_scheme.to_string(),
    );
    push_kv(&mut text, "solver.steps", traj.step_log.len().to_string());
    push_kv(
        &mut text,
        "snapshot.count",
        traj.snapshots.len().to_string(),
    );
    push_kv(
        &mut text,
        "snapshot.times",
        join_f64(traj.snapshots.iter().map(|(t, _)| *t)),
    );
    atomic_write_text(&dir.join("run.meta"), &text)?;
    Ok(snapshot_paths)
}

/// Parse a key = value metadata file into an ordered map. Duplicate keys and
/// lines without `=` are errors; blank lines and `#` comments are skipped.
pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| IoError::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: format!("expected `key = value`, got `{raw}`"),
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

fn meta_get<'a>(
    meta: &'a BTreeMap<String, String>,
    key: &'static str,
) -> Result<&'a str, IoError> {
    meta.get(key).map(String::as_str).ok_or(IoError::MissingKey(key))
}

fn meta_parse_f64(path: &Path, meta: &BTreeMap<String, String>, key: &'static str) -> Result<f64, IoError> {
    parse_f64(path, 0, meta_get(meta, key)?)
}

/// Rebuild a full trajectory from a run directory written by
/// [`write_trajectory`]. The reconstruction is a pure function of the files:
/// model and grid come from `run.meta`, states from the snapshot CSVs.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory, IoError> {
    let meta_path = dir.join("run.meta");
    if !meta_path.is_file() {
        return Err(IoError::NotARunDirectory(dir.to_path_buf()));
    }
    let meta = read_meta(&meta_path)?;
    let dim: usize = meta_get(&meta, "grid.dim")?
        .parse()
        .map_err(|e| IoError::Rebuild(format!("grid.dim: {e}")))?;
    if !(1..=2).contains(&dim) {
        return Err(IoError::Rebuild(format!("grid.dim = {dim} out of range")));
    }
    let parse_list = |key: &'static str| -> Result<Vec<f64>, IoError> {
        meta_get(&meta, key)?
            .split_whitespace()
            .map(|tok| parse_f64(&meta_path, 0, tok))
            .collect()
    };
    let n: Vec<usize> = meta_get(&meta, "grid.n")?
        .split_whitespace()
        .map(|tok| tok.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Rebuild(format!("grid.n: {e}")))?;
    let lo = parse_list("domain.lo")?;
    let hi = parse_list("domain.hi")?;
    if n.len() != dim || lo.len() != dim || hi.len() != dim {
        return Err(IoError::Rebuild(
            "grid.n / domain.lo / domain.hi length does not match grid.dim".into(),
        ));
    }
    let domain = RectDomain::new(lo, hi).map_err(|e| IoError::Rebuild(e.to_string()))?;
    let grid = build_grid(domain.clone(), n).map_err(|e| IoError::Rebuild(e.to_string()))?;

    let model_name = meta_get(&meta, "model.name")?;
    let mut params = BTreeMap::new();
    for (key, value) in &meta {
        if let Some(name) = key.strip_prefix("model.param.") {
            params.insert(name.to_string(), parse_f64(&meta_path, 0, value)?);
        }
    }
    let (flux, diffusion) = builtin_model_pair(model_name, &params, dim)
        .map_err(|e| IoError::Rebuild(e.to_string()))?;

    let times = parse_list("snapshot.times")?;
    let count: usize = meta_get(&meta, "snapshot.count")?
        .parse()
        .map_err(|e| IoError::Rebuild(format!("snapshot.count: {e}")))?;
    if times.len() != count || count == 0 {
        return Err(IoError::Rebuild(format!(
            "snapshot.times lists {} entries, snapshot.count says {count}",
            times.len()
        )));
    }
    let mut snapshots = Vec::with_capacity(count);
    let mut first_path = None;
    for (i, &t) in times.iter().enumerate() {
        let path = dir.join(snapshot_file_name(i, t));
        if i == 0 {
            first_path = Some(path.clone());
        }
        snapshots.push((t, read_snapshot(&path, &grid)?));
    }

    let horizon = meta_parse_f64(&meta_path, &meta, "time.horizon")?;
    let problem = Problem {
        domain,
        horizon,
        flux,
        diffusion,
        initial: InitialData::File(first_path.expect("count > 0")),
    };

    let mut config = SolverConfig::new(meta_parse_f64(&meta_path, &meta, "solver.t_end")?);
    config.eps = meta_parse_f64(&meta_path, &meta, "solver.eps")?;
    config.cfl_safety = meta_parse_f64(&meta_path, &meta, "solver.cfl_safety")?;
    config.flux_scheme = meta_get(&meta, "solver.scheme")?
        .parse::<FluxScheme>()
        .map_err(IoError::Rebuild)?;
    config.snapshot_times = times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < config.t_end)
        .collect();

    let steps_path = dir.join("steps.csv");
    let step_log = if steps_path.is_file() {
        read_step_log(&steps_path)?
    } else {
        Vec::new()
    };

    Ok(Trajectory {
        problem,
        config,
        snapshots,
        step_log,
    })
}

/// Human-readable rendering of a residual report table (used by the CLI).
pub fn render_residual_table(reports: &[ResidualReport]) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<44} {:>9} {:>14} {:>12} {:>7}",
        "functional", "k", "limit", "tol", "verdict"
    );
    for r in reports {
        let name = format!("{}/{}", r.functional, r.test_function);
        let k = r.k.map(|k| format!("{k:.4}")).unwrap_or_else(|| "-".into());
        let sign = match r.kind {
            ResidualKind::InequalityLowerBound => "≥ -",
            ResidualKind::Equality => "| ≤ ",
        };
        let _ = writeln!(
            text,
            "{name:<44} {k:>9} {:>14.6e} {sign}{:<10.3e} {:>7}",
            r.limit,
            r.tolerance,
            match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
            }
        );
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Field, RectDomain};
    use crate::model::make_builtin;
    use crate::solver::{run, SolverConfig};
    use std::collections::BTreeMap;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn snapshot_name_format() {
        assert_eq!(snapshot_file_name(3, 0.125), "snap_0003_t0.125000.csv");
        assert_eq!(snapshot_file_name(0, 0.0), "snap_0000_t0.000000.csv");
        assert_eq!(snapshot_file_name(123, 1.5), "snap_0123_t1.500000.csv");
    }

    #[test]
    fn snapshot_round_trip_1d_is_exact() {
        let dir = tmpdir();
        let grid = build_grid(RectDomain::unit_interval(), vec![37]).unwrap();
        let field = Field::from_fn(&grid, |x| (x[0] * 17.0).sin() * 0.3 + 0.5);
        let path = dir.path().join("snap.csv");
        write_snapshot(&path, &field).unwrap();
        let back = read_snapshot(&path, &grid).unwrap();
        assert_eq!(field.values(), back.values(), "17-digit output round-trips");
    }

    #[test]
    fn snapshot_round_trip_2d_is_exact() {
        let dir = tmpdir();
        let grid = build_grid(RectDomain::unit_square(), vec![8, 5]).unwrap();
        let field = Field::from_fn(&grid, |x| 1.0 / (1.0 + x[0] + 3.0 * x[1]));
        let path = dir.path().join("snap2.csv");
        write_snapshot(&path, &field).unwrap();
        let back = read_snapshot(&path, &grid).unwrap();
        assert_eq!(field.values(), back.values());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,j,x,y,u\n"));
        // Lexicographic order: second row is cell (0,1).
        let second = text.lines().nth(1).unwrap();
        assert!(second.starts_with("0,0,"));
        let third = text.lines().nth(2).unwrap();
        assert!(third.starts_with("0,1,"));
    }

    #[test]
    fn snapshot_reader_rejects_malformed_input() {
        let dir = tmpdir();
        let grid = build_grid(RectDomain::unit_interval(), vec![4]).unwrap();
        let path = dir.path().join("bad.csv");

        let cases: Vec<(&str, &str)> = vec![
            ("wrong header", "x,u\n0,0.5\n"),
            (
                "missing cell",
                "i,x,u\n0,1.25e-1,5e-1\n1,3.75e-1,5e-1\n2,6.25e-1,5e-1\n",
            ),
            (
                "duplicate cell",
                "i,x,u\n0,1.25e-1,5e-1\n0,1.25e-1,5e-1\n1,3.75e-1,5e-1\n2,6.25e-1,5e-1\n3,8.75e-1,5e-1\n",
            ),
            (
                "index out of range",
                "i,x,u\n0,1.25e-1,5e-1\n1,3.75e-1,5e-1\n2,6.25e-1,5e-1\n9,8.75e-1,5e-1\n",
            ),
            (
                "non-finite value",
                "i,x,u\n0,1.25e-1,NaN\n1,3.75e-1,5e-1\n2,6.25e-1,5e-1\n3,8.75e-1,5e-1\n",
            ),
            ("not numbers", "i,x,u\n0,1.25e-1,hello\n"),
        ];
        for (what, text) in cases {
            fs::write(&path, text).unwrap();
            assert!(read_snapshot(&path, &grid).is_err(), "accepted {what}");
        }
    }

    #[test]
    fn step_log_round_trip() {
        let dir = tmpdir();
        let log = vec![
            StepRecord {
                step: 0,
                t: 0.0,
                dt: 0.0,
                min: 0.1,
                max: 0.9,
                mass: 0.5,
            },
            StepRecord {
                step: 1,
                t: 0.0125,
                dt: 0.0125,
                min: 0.11,
                max: 0.89,
                mass: 0.5,
            },
        ];
        let path = dir.path().join("steps.csv");
        write_step_log(&path, &log).unwrap();
        let back = read_step_log(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].t, 0.0125);
        assert_eq!(back[1].mass, 0.5);
    }

    #[test]
    fn atomic_write_replaces_and_creates_directories() {
        let dir = tmpdir();
        let path = dir.path().join("deep/nested/out.txt");
        atomic_write_text(&path, "first").unwrap();
        atomic_write_text(&path, "second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        // No temp litter left behind.
        let residue: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(residue.is_empty());
    }

    #[test]
    fn trajectory_round_trip_preserves_everything_observable() {
        let dir = tmpdir();
        let problem = make_builtin("batch_sedimentation", &BTreeMap::new()).unwrap();
        let grid = build_grid(RectDomain::unit_interval(), vec![24]).unwrap();
        let config = SolverConfig::new(0.05).with_uniform_snapshots(4);
        let traj = run(&problem, &grid, &config).unwrap();
        let meta = RunMetadata {
            model_name: "batch_sedimentation".into(),
            model_params: BTreeMap::new(),
        };
        let paths = write_trajectory(dir.path(), &traj, &meta).unwrap();
        assert_eq!(paths.len(), traj.snapshots.len());

        let back = read_trajectory(dir.path()).unwrap();
        assert_eq!(back.snapshots.len(), traj.snapshots.len());
        for ((t0, f0), (t1, f1)) in traj.snapshots.iter().zip(&back.snapshots) {
            assert_eq!(t0, t1);
            assert_eq!(f0.values(), f1.values());
        }
        assert_eq!(back.config.eps, traj.config.eps);
        assert_eq!(back.config.flux_scheme, traj.config.flux_scheme);
        assert_eq!(back.config.t_end, traj.config.t_end);
        assert_eq!(back.step_log.len(), traj.step_log.len());
        // The rebuilt model evaluates identically.
        for u in [0.0, 0.2, 0.55, 0.9] {
            assert_eq!(back.problem.flux.f(0, u), traj.problem.flux.f(0, u));
            assert_eq!(back.problem.diffusion.b(u), traj.problem.diffusion.b(u));
        }
        assert_eq!(back.problem.horizon, traj.problem.horizon);
    }

    #[test]
    fn entropy_input_is_a_pure_function_of_the_directory() {
        // Reading twice gives bit-identical trajectories.
        let dir = tmpdir();
        let problem = make_builtin("heat", &BTreeMap::new()).unwrap();
        let grid = build_grid(RectDomain::unit_interval(), vec![16]).unwrap();
        let traj = run(&problem, &grid, &SolverConfig::new(0.02)).unwrap();
        let meta = RunMetadata {
            model_name: "heat".into(),
            model_params: BTreeMap::new(),
        };
        write_trajectory(dir.path(), &traj, &meta).unwrap();
        let a = read_trajectory(dir.path()).unwrap();
        let b = read_trajectory(dir.path()).unwrap();
        for ((ta, fa), (tb, fb)) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(ta, tb);
            assert_eq!(fa.values(), fb.values());
        }
    }

    #[test]
    fn read_trajectory_rejects_non_run_directories() {
        let dir = tmpdir();
        assert!(matches!(
            read_trajectory(dir.path()),
            Err(IoError::NotARunDirectory(_))
        ));
    }

    #[test]
    fn meta_parser_rejects_duplicates_and_garbage() {
        let dir = tmpdir();
        let path = dir.path().join("run.meta");
        fs::write(&path, "a = 1\na = 2\n").unwrap();
        assert!(read_meta(&path).is_err());
        fs::write(&path, "just some words\n").unwrap();
        assert!(read_meta(&path).is_err());
        fs::write(&path, "# comment\n\nkey = value\n").unwrap();
        let map = read_meta(&path).unwrap();
        assert_eq!(map.get("key").map(String::as_str), Some("value"));
    }

    #[test]
    fn residual_csv_schema() {
        use crate::entropy::{ResidualKind, ResidualReport, Verdict};
        let dir = tmpdir();
        let reports = vec![
            ResidualReport {
                functional: "interior_entropy".into(),
                k: Some(0.5),
                test_function: "interior_center".into(),
                values: vec![(None, 1e-3)],
                limit: 1e-3,
                tolerance: 0.1,
                kind: ResidualKind::InequalityLowerBound,
                verdict: Verdict::Pass,
            },
            ResidualReport {
                functional: "zero_total_flux".into(),
                k: None,
                test_function: "closure_full_domain".into(),
                values: vec![(Some(0.2), 2e-3), (Some(0.1), 1e-3), (Some(0.05), 5e-4)],
                limit: 1e-5,
                tolerance: 0.05,
                kind: ResidualKind::Equality,
                verdict: Verdict::Pass,
            },
        ];
        let path = dir.path().join("residuals.csv");
        write_residual_reports(&path, &reports).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "functional,k,delta,value,limit,tol,verdict");
        assert_eq!(lines.len(), 1 + 1 + 3, "one row per (report, delta)");
        assert!(lines[1].starts_with("interior_entropy/interior_center,"));
        // Single-value functional leaves the delta column empty.
        assert_eq!(lines[1].split(',').nth(2), Some(""));
        // Layer functional carries its δ and repeats limit/tol on each row.
        assert!(lines[2].split(',').nth(2).unwrap().starts_with("2.0"));
        assert!(text.trim_end().ends_with("pass"));
        // Rendered table mentions every functional once.
        let table = render_residual_table(&reports);
        assert!(table.contains("interior_entropy/interior_center"));
        assert!(table.contains("zero_total_flux/closure_full_domain"));
    }
}
