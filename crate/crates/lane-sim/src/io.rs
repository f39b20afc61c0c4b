//! CSV serialization of simulator outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces values bit-exactly and identical runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use lane_model::{AttributeMass, Feature, LineColor, MarkingType, Mass, OdometryDelta};
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frames::{PoseRecord, SimFrame};
use crate::road::TruthLine;

/// Detection confidence attached to simulated attribute evidence; readers
/// reconstruct masses with the same value.
pub const ATTRIBUTE_CONFIDENCE: f64 = 0.9;

pub const FEATURE_HEADER: &str = "frame_id,x,y,theta,var_x,var_y,var_theta,type,color";
pub const ODOMETRY_HEADER: &str = "frame_id,dx,dy,dpsi";

pub fn write_features(path: &Path, frames: &[SimFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FEATURE_HEADER}")?;
    for frame in frames {
        for f in &frame.features {
            let marking = MarkingType::from_index(f.attrs.marking.argmax().0);
            let color = LineColor::from_index(f.attrs.color.argmax().0);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                frame.frame,
                f.x,
                f.y,
                f.theta,
                f.cov[(0, 0)],
                f.cov[(1, 1)],
                f.cov[(2, 2)],
                marking.as_str(),
                color.as_str(),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<BTreeMap<u32, Vec<Feature<f64>>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: BTreeMap<u32, Vec<Feature<f64>>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != FEATURE_HEADER {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("expected header `{FEATURE_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let frame: u32 = parse_field(fields[0], lineno, "frame_id")?;
        let x: f64 = parse_field(fields[1], lineno, "x")?;
        let y: f64 = parse_field(fields[2], lineno, "y")?;
        let theta: f64 = parse_field(fields[3], lineno, "theta")?;
        let var_x: f64 = parse_field(fields[4], lineno, "var_x")?;
        let var_y: f64 = parse_field(fields[5], lineno, "var_y")?;
        let var_theta: f64 = parse_field(fields[6], lineno, "var_theta")?;
        let marking = MarkingType::parse(fields[7]).ok_or_else(|| Error::Format {
            line: lineno,
            message: format!("unknown marking type `{}`", fields[7]),
        })?;
        let color = LineColor::parse(fields[8]).ok_or_else(|| Error::Format {
            line: lineno,
            message: format!("unknown color `{}`", fields[8]),
        })?;
        let attrs = AttributeMass {
            marking: Mass::with_confidence(marking.index(), ATTRIBUTE_CONFIDENCE)
                .expect("confidence in [0, 1]"),
            color: Mass::with_confidence(color.index(), ATTRIBUTE_CONFIDENCE)
                .expect("confidence in [0, 1]"),
        };
        let cov = Matrix3::from_diagonal(&Vector3::new(var_x, var_y, var_theta));
        let feature = Feature::new(x, y, theta, cov, attrs).map_err(|e| Error::Format {
            line: lineno,
            message: format!("invalid feature: {e}"),
        })?;
        out.entry(frame).or_default().push(feature);
    }
    Ok(out)
}

pub fn write_odometry(path: &Path, frames: &[SimFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{ODOMETRY_HEADER}")?;
    for frame in frames {
        let d = frame.odometry;
        writeln!(w, "{},{},{},{}", frame.frame, d.dx, d.dy, d.dpsi)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_odometry(path: &Path) -> Result<Vec<(u32, OdometryDelta<f64>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != ODOMETRY_HEADER {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("expected header `{ODOMETRY_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let frame: u32 = parse_field(fields[0], lineno, "frame_id")?;
        let dx: f64 = parse_field(fields[1], lineno, "dx")?;
        let dy: f64 = parse_field(fields[2], lineno, "dy")?;
        let dpsi: f64 = parse_field(fields[3], lineno, "dpsi")?;
        out.push((frame, OdometryDelta::new(dx, dy, dpsi)));
    }
    out.sort_by_key(|&(frame, _)| frame);
    Ok(out)
}

/// Ground truth: vehicle poses (`pose` rows) and boundary polylines
/// (`line` rows), both in the world frame.
pub fn write_truth(path: &Path, poses: &[PoseRecord], truth: &[TruthLine]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in poses {
        writeln!(w, "pose,{},{},{},{}", p.frame, p.x, p.y, p.psi)?;
    }
    for line in truth {
        for &(x, y, heading) in &line.points {
            writeln!(w, "line,{},{},{},{}", line.id, x, y, heading)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<(Vec<PoseRecord>, Vec<TruthLine>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut poses = Vec::new();
    let mut lines: BTreeMap<u32, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields.first().copied() {
            Some("pose") if fields.len() == 5 => {
                poses.push(PoseRecord {
                    frame: parse_field(fields[1], lineno, "frame")?,
                    x: parse_field(fields[2], lineno, "x")?,
                    y: parse_field(fields[3], lineno, "y")?,
                    psi: parse_field(fields[4], lineno, "psi")?,
                });
            }
            Some("line") if fields.len() == 5 => {
                let id: u32 = parse_field(fields[1], lineno, "id")?;
                lines.entry(id).or_default().push((
                    parse_field(fields[2], lineno, "x")?,
                    parse_field(fields[3], lineno, "y")?,
                    parse_field(fields[4], lineno, "heading")?,
                ));
            }
            _ => {
                return Err(Error::Format {
                    line: lineno,
                    message: "expected `pose,frame,x,y,psi` or `line,id,x,y,heading`".into(),
                });
            }
        }
    }
    poses.sort_by_key(|p| p.frame);
    let truth = lines
        .into_iter()
        .map(|(id, points)| TruthLine { id, points })
        .collect();
    Ok((poses, truth))
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format {
        line,
        message: format!("cannot parse {name} from `{s}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::simulate;
    use crate::scenario::{ScenarioSpec, SegmentSpec};

    fn small_sim() -> crate::frames::Simulation {
        let mut spec = ScenarioSpec {
            segments: vec![SegmentSpec {
                length: 150.0,
                kappa_start: 0.0,
                kappa_end: 0.004,
            }],
            frames: 10,
            feature_horizon: 40.0,
            ..ScenarioSpec::default()
        };
        spec.markings = vec![lane_model::MarkingType::Dashed; spec.line_count()];
        spec.colors = vec![lane_model::LineColor::Yellow; spec.line_count()];
        simulate(&spec).unwrap()
    }

    #[test]
    fn feature_and_odometry_files_round_trip_exactly() {
        let sim = small_sim();
        let dir = tempfile::tempdir().unwrap();
        let fpath = dir.path().join("features.csv");
        let opath = dir.path().join("odometry.csv");
        write_features(&fpath, &sim.frames).unwrap();
        write_odometry(&opath, &sim.frames).unwrap();

        let features = read_features(&fpath).unwrap();
        let odometry = read_odometry(&opath).unwrap();
        assert_eq!(features.len(), sim.frames.len());
        assert_eq!(odometry.len(), sim.frames.len());
        for frame in &sim.frames {
            assert_eq!(features[&frame.frame], frame.features);
            let (_, d) = odometry[frame.frame as usize];
            assert_eq!(d, frame.odometry);
        }
    }

    #[test]
    fn truth_files_round_trip_exactly() {
        let sim = small_sim();
        let dir = tempfile::tempdir().unwrap();
        let tpath = dir.path().join("truth.csv");
        write_truth(&tpath, &sim.poses, &sim.truth).unwrap();
        let (poses, truth) = read_truth(&tpath).unwrap();
        assert_eq!(poses, sim.poses);
        assert_eq!(truth, sim.truth);
    }

    #[test]
    fn malformed_rows_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(
            &path,
            format!("{FEATURE_HEADER}\n0,1.0,2.0,0.0,1e-4,1e-2,1e-4,striped,white\n"),
        )
        .unwrap();
        let err = read_features(&path).unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
