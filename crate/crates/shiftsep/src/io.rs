//! File formats: headerless CSV matrices (one sensor per row), the sensor
//! geometry CSV with an `id,x,y` header, the ground-truth sidecar, and the
//! JSON/CSV report artifacts of the pipeline stages.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::{DelayStatistics, LocalizationResult};
use crate::mcmc::{Chain, PosteriorSummary};
use crate::model::SensorArray;
use crate::selection::SelectionReport;
use crate::synth::SyntheticDataset;

fn file_name(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

/// Write a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, data: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in data.rows() {
        let mut first = true;
        for value in row.iter() {
            if !first {
                out.push(',');
            }
            out.push_str(&format!("{value}"));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a headerless CSV matrix; every row must have the same width.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col_idx, token) in line.split(',').enumerate() {
            let value: f64 = token.trim().parse().map_err(|_| Error::Parse {
                file: file_name(path),
                row: row_idx + 1,
                col: col_idx + 1,
                message: format!("'{}' is not a number", token.trim()),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    file: file_name(path),
                    row: row_idx + 1,
                    col: row.len(),
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            file: file_name(path),
            row: 1,
            col: 1,
            message: "file holds no data rows".into(),
        });
    }
    let shape = (rows.len(), rows[0].len());
    Array2::from_shape_vec(shape, rows.into_iter().flatten().collect())
        .map_err(|e| Error::invalid(e.to_string()))
}

/// Write sensor coordinates with the `id,x,y` header; row order matches the
/// observation matrix rows.
pub fn write_sensors_csv(path: &Path, array: &SensorArray) -> Result<()> {
    let mut out = String::from("id,x,y\n");
    for (idx, (x, y)) in array.coordinates().iter().enumerate() {
        out.push_str(&format!("{idx},{x},{y}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_sensors_csv(path: &Path) -> Result<SensorArray> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or_else(|| Error::Parse {
        file: file_name(path),
        row: 1,
        col: 1,
        message: "missing header".into(),
    })?;
    if header.1.trim() != "id,x,y" {
        return Err(Error::Parse {
            file: file_name(path),
            row: 1,
            col: 1,
            message: format!("expected header 'id,x,y', found '{}'", header.1.trim()),
        });
    }
    let mut coords = Vec::new();
    for (row_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                file: file_name(path),
                row: row_idx + 1,
                col: fields.len(),
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let parse = |col: usize| -> Result<f64> {
            fields[col].trim().parse().map_err(|_| Error::Parse {
                file: file_name(path),
                row: row_idx + 1,
                col: col + 1,
                message: format!("'{}' is not a number", fields[col].trim()),
            })
        };
        coords.push((parse(1)?, parse(2)?));
    }
    SensorArray::new(coords)
}

/// Ground-truth sidecar referencing the truth CSVs next to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub h_file: String,
    pub w_file: String,
    pub tau_file: String,
    pub source_coords: Option<Vec<(f64, f64)>>,
    pub speed: Option<f64>,
    pub decay_law: Option<String>,
    pub seed: u64,
    pub noise_sigma: f64,
    pub sample_interval: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        file: file_name(path),
        source,
    })?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        file: file_name(path),
        source,
    })
}

/// Write V.csv, sensors.csv, the truth CSVs and the truth.json sidecar.
pub fn write_dataset(dir: &Path, dataset: &SyntheticDataset) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let v_path = dir.join("V.csv");
    write_matrix_csv(&v_path, dataset.v.data())?;
    written.push(v_path);
    let sensors_path = dir.join("sensors.csv");
    write_sensors_csv(&sensors_path, &dataset.array)?;
    written.push(sensors_path);
    for (name, data) in [
        ("H_true.csv", dataset.truth_h.data()),
        ("W_true.csv", dataset.truth_w.data()),
        ("tau_true.csv", dataset.truth_tau.data()),
    ] {
        let path = dir.join(name);
        write_matrix_csv(&path, data)?;
        written.push(path);
    }
    let sidecar = TruthSidecar {
        h_file: "H_true.csv".into(),
        w_file: "W_true.csv".into(),
        tau_file: "tau_true.csv".into(),
        source_coords: dataset.source_coords.clone(),
        speed: dataset.speed,
        decay_law: dataset.decay_law.map(|law| law.name().to_string()),
        seed: dataset.seed,
        noise_sigma: dataset.noise_sigma,
        sample_interval: dataset.v.sample_interval(),
    };
    let truth_path = dir.join("truth.json");
    write_json(&truth_path, &sidecar)?;
    written.push(truth_path);
    Ok(written)
}

/// Provenance stamp embedded in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub provenance: Provenance,
    pub selected_k: usize,
    pub fallback: bool,
    pub rows: Vec<crate::selection::ScoreRow>,
    pub centroid_files: CentroidFiles,
    pub delay_stats_files: DelayStatsFiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentroidFiles {
    pub h: String,
    pub w: String,
    pub tau: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayStatsFiles {
    pub mean: String,
    pub sigma: String,
}

/// Write the selection report: JSON document, the plot-ready curve, the
/// centroid CSVs and the delay statistics.
pub fn write_selection(
    dir: &Path,
    report: &SelectionReport,
    stats: &DelayStatistics,
    provenance: &Provenance,
) -> Result<SelectionDocument> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("H_K.csv"), &report.centroid_h)?;
    write_matrix_csv(&dir.join("W_K.csv"), &report.centroid_w)?;
    write_matrix_csv(&dir.join("tau_K.csv"), &report.centroid_tau)?;
    write_matrix_csv(&dir.join("tau_mean.csv"), &stats.mean_tau)?;
    write_matrix_csv(&dir.join("tau_sigma.csv"), &stats.sigma_tau)?;

    let mut curve = String::from("D,silhouette,avg_R\n");
    for row in &report.rows {
        curve.push_str(&format!("{},{},{}\n", row.d, row.silhouette, row.avg_r));
    }
    fs::write(dir.join("selection_curve.csv"), curve)?;

    let document = SelectionDocument {
        provenance: provenance.clone(),
        selected_k: report.selected_k,
        fallback: report.fallback,
        rows: report.rows.clone(),
        centroid_files: CentroidFiles {
            h: "H_K.csv".into(),
            w: "W_K.csv".into(),
            tau: "tau_K.csv".into(),
        },
        delay_stats_files: DelayStatsFiles {
            mean: "tau_mean.csv".into(),
            sigma: "tau_sigma.csv".into(),
        },
    };
    write_json(&dir.join("selection.json"), &document)?;
    Ok(document)
}

/// Per-(source, sensor) estimated-vs-truth delay comparison rows.
pub fn write_delays_bar(
    path: &Path,
    rows: &[(usize, usize, f64, f64)],
) -> Result<()> {
    let mut out = String::from("source,sensor,estimated,truth\n");
    for (source, sensor, estimated, truth) in rows {
        out.push_str(&format!("{source},{sensor},{estimated},{truth}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationDocument {
    pub provenance: Provenance,
    pub sources: Vec<SourceEstimate>,
    pub speed: f64,
    pub objective: f64,
    pub cloud_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceEstimate {
    pub x: f64,
    pub y: f64,
}

pub fn write_localization(
    dir: &Path,
    result: &LocalizationResult,
    provenance: &Provenance,
) -> Result<LocalizationDocument> {
    fs::create_dir_all(dir)?;
    let mut cloud = String::from("source,x,y,v,objective\n");
    for (source, members) in result.cloud.iter().enumerate() {
        for (x, y, v, objective) in members {
            cloud.push_str(&format!("{source},{x},{y},{v},{objective}\n"));
        }
    }
    fs::write(dir.join("cloud.csv"), cloud)?;
    let document = LocalizationDocument {
        provenance: provenance.clone(),
        sources: result
            .sources
            .iter()
            .map(|&(x, y)| SourceEstimate { x, y })
            .collect(),
        speed: result.speed,
        objective: result.objective,
        cloud_file: "cloud.csv".into(),
    };
    write_json(&dir.join("localization.json"), &document)?;
    Ok(document)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDocument {
    pub provenance: Provenance,
    pub summary: PosteriorSummary,
    pub chain_file: String,
}

/// Write the post-burn-in chain (columns x1,y1,...,xK,yK,v) and the summary
/// document.
pub fn write_posterior(
    dir: &Path,
    chain: &Chain,
    burn_in: usize,
    summary: &PosteriorSummary,
    provenance: &Provenance,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let dim = summary.mean.len();
    let k = (dim - 1) / 2;
    let mut header: Vec<String> = Vec::with_capacity(dim);
    for j in 1..=k {
        header.push(format!("x{j}"));
        header.push(format!("y{j}"));
    }
    header.push("v".into());
    let mut file = fs::File::create(dir.join("posterior.csv"))?;
    writeln!(file, "{}", header.join(","))?;
    for row in &chain.samples[burn_in..] {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        writeln!(file, "{}", line.join(","))?;
    }
    write_json(
        &dir.join("posterior_summary.json"),
        &PosteriorDocument {
            provenance: provenance.clone(),
            summary: summary.clone(),
            chain_file: "posterior.csv".into(),
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn matrix_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let data = array![[1.5, -2.25, 3.0], [0.5, 1e-9, 7.125]];
        write_matrix_csv(&path, &data).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn matrix_parse_error_names_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::Parse { row, col, message, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(col, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected ragged-row error, got {other:?}"),
        }
    }

    #[test]
    fn sensors_roundtrip_and_header_check() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sensors.csv");
        let array = SensorArray::new(vec![(0.0, 0.0), (1.5, 2.0)]).unwrap();
        write_sensors_csv(&path, &array).unwrap();
        let back = read_sensors_csv(&path).unwrap();
        assert_eq!(array.coordinates(), back.coordinates());

        fs::write(&path, "x,y\n0,0\n1,1\n").unwrap();
        match read_sensors_csv(&path) {
            Err(Error::Parse { row, message, .. }) => {
                assert_eq!(row, 1);
                assert!(message.contains("id,x,y"));
            }
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_files_written() {
        let dir = tempdir().unwrap();
        let dataset = crate::synth::presets::build("demo-2x6", 3, None).unwrap();
        let written = write_dataset(dir.path(), &dataset).unwrap();
        assert_eq!(written.len(), 6);
        let v = read_matrix_csv(&dir.path().join("V.csv")).unwrap();
        assert_eq!(v.dim(), (6, 64));
        let sidecar: TruthSidecar = read_json(&dir.path().join("truth.json")).unwrap();
        assert_eq!(sidecar.seed, 3);
        assert!(sidecar.source_coords.is_none());
    }
}
