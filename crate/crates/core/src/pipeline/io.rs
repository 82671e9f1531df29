//! Plain-text point-cloud files, atomic writes and audited reading.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::PipelineError;
use crate::cloudkit::{ClassId, Modality, Point, PointCloud};

/// Serialize a cloud: `#modality:`, optional `#label:` and `#sensor_origin:`
/// headers, then one `x y z` line per point.
pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = format!("#modality: {}\n", cloud.modality);
    if let Some(l) = cloud.label {
        out.push_str(&format!("#label: {l}\n"));
    }
    if let Some(o) = cloud.sensor_origin {
        out.push_str(&format!("#sensor_origin: {:?} {:?} {:?}\n", o.x, o.y, o.z));
    }
    for p in &cloud.points {
        out.push_str(&format!("{:?} {:?} {:?}\n", p.x, p.y, p.z));
    }
    out
}

fn parse_triple(s: &str, line: usize, origin: &str) -> Result<Point, PipelineError> {
    let parse_err = |msg: String| PipelineError::Parse {
        file: origin.to_string(),
        line,
        msg,
    };
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("'{t}': {e}"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 3 {
        return Err(parse_err(format!("expected 3 coordinates, got {}", vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(parse_err("non-finite coordinate".into()));
    }
    Ok(Point::new(vals[0], vals[1], vals[2]))
}

/// Parse the text format. With `keep_label` false the label header is
/// skipped without being interpreted.
pub fn parse_cloud(text: &str, origin: &str, keep_label: bool) -> Result<PointCloud, PipelineError> {
    let mut modality = None;
    let mut label = None;
    let mut sensor = None;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| PipelineError::Parse {
            file: origin.to_string(),
            line: i + 1,
            msg,
        };
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.split_once(':') else {
                continue;
            };
            match key.trim() {
                "modality" => modality = Some(value.trim().parse::<Modality>().map_err(parse_err)?),
                "label" if keep_label => {
                    label = Some(ClassId(
                        value.trim().parse::<usize>().map_err(|e| parse_err(format!("label: {e}")))?,
                    ))
                }
                "sensor_origin" => sensor = Some(parse_triple(value, i + 1, origin)?),
                _ => {}
            }
            continue;
        }
        points.push(parse_triple(line, i + 1, origin)?);
    }
    let modality = modality.ok_or_else(|| PipelineError::Parse {
        file: origin.to_string(),
        line: 0,
        msg: "missing #modality header".into(),
    })?;
    let mut cloud = PointCloud::new(points, modality);
    cloud.label = label;
    cloud.sensor_origin = sensor;
    Ok(cloud)
}

/// True if the text carries a `#label:` header.
pub fn has_label_header(text: &str) -> bool {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .any(|h| h.split_once(':').is_some_and(|(k, _)| k.trim() == "label"))
}

/// Write `contents` to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| PipelineError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| PipelineError::io(&tmp, e))?;
    f.sync_all().map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<(), PipelineError> {
    write_atomic(path, format_cloud(cloud).as_bytes())
}

pub fn load_cloud(path: &Path) -> Result<PointCloud, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_cloud(&text, &path.display().to_string(), true)
}

/// Source of cloud files. Training code goes through this so tests can
/// count what it touches.
pub trait CloudReader: Sync {
    /// Points, modality and sensor origin; any label header is not interpreted.
    fn read_unlabeled(&self, path: &Path) -> Result<PointCloud, PipelineError>;
    /// Everything including the label.
    fn read_labeled(&self, path: &Path) -> Result<PointCloud, PipelineError>;
}

/// Reads straight from the file system.
#[derive(Debug, Default, Clone, Copy)]
pub struct FsReader;

impl FsReader {
    fn text(path: &Path) -> Result<String, PipelineError> {
        fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
    }
}

impl CloudReader for FsReader {
    fn read_unlabeled(&self, path: &Path) -> Result<PointCloud, PipelineError> {
        let text = Self::text(path)?;
        if has_label_header(&text) {
            log::debug!("{}: label header ignored for unlabeled use", path.display());
        }
        parse_cloud(&text, &path.display().to_string(), false)
    }

    fn read_labeled(&self, path: &Path) -> Result<PointCloud, PipelineError> {
        let text = Self::text(path)?;
        parse_cloud(&text, &path.display().to_string(), true)
    }
}

/// Wraps a reader and counts reads per modality and label accesses.
#[derive(Debug, Default)]
pub struct AuditReader<R> {
    inner: R,
    tactile_reads: AtomicUsize,
    visual_reads: AtomicUsize,
    tactile_label_reads: AtomicUsize,
    visual_label_reads: AtomicUsize,
    paths: std::sync::Mutex<Vec<PathBuf>>,
}

impl<R: CloudReader> AuditReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            tactile_reads: AtomicUsize::new(0),
            visual_reads: AtomicUsize::new(0),
            tactile_label_reads: AtomicUsize::new(0),
            visual_label_reads: AtomicUsize::new(0),
            paths: std::sync::Mutex::new(Vec::new()),
        }
    }

    pub fn tactile_reads(&self) -> usize {
        self.tactile_reads.load(Ordering::SeqCst)
    }

    pub fn visual_reads(&self) -> usize {
        self.visual_reads.load(Ordering::SeqCst)
    }

    pub fn tactile_label_reads(&self) -> usize {
        self.tactile_label_reads.load(Ordering::SeqCst)
    }

    pub fn visual_label_reads(&self) -> usize {
        self.visual_label_reads.load(Ordering::SeqCst)
    }

    /// Every path read, in read order.
    pub fn paths(&self) -> Vec<PathBuf> {
        self.paths.lock().expect("audit lock").clone()
    }

    fn record(&self, path: &Path, cloud: &PointCloud, labeled: bool) {
        self.paths.lock().expect("audit lock").push(path.to_path_buf());
        let (reads, labels) = match cloud.modality {
            Modality::Tactile => (&self.tactile_reads, &self.tactile_label_reads),
            Modality::Visual => (&self.visual_reads, &self.visual_label_reads),
        };
        reads.fetch_add(1, Ordering::SeqCst);
        if labeled {
            labels.fetch_add(1, Ordering::SeqCst);
        }
    }
}

impl<R: CloudReader> CloudReader for AuditReader<R> {
    fn read_unlabeled(&self, path: &Path) -> Result<PointCloud, PipelineError> {
        let c = self.inner.read_unlabeled(path)?;
        self.record(path, &c, false);
        Ok(c)
    }

    fn read_labeled(&self, path: &Path) -> Result<PointCloud, PipelineError> {
        let c = self.inner.read_labeled(path)?;
        self.record(path, &c, true);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud::new(
            vec![Point::new(0.1, -0.2, 0.003), Point::new(1e-7, 0.30000000000000004, 2.5)],
            Modality::Tactile,
        )
        .with_label(ClassId(7))
        .with_sensor_origin(Point::new(0.25, 0.0, 0.45))
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = sample();
        let back = parse_cloud(&format_cloud(&c), "mem", true).unwrap();
        assert_eq!(back, c);
        let no_label = parse_cloud(&format_cloud(&c), "mem", false).unwrap();
        assert_eq!(no_label.label, None);
        assert_eq!(no_label.points, c.points);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = parse_cloud("#modality: visual\n0 0 0\n1 2\n", "f.txt", true).unwrap_err();
        assert!(matches!(err, PipelineError::Parse { line: 3, .. }), "{err}");
        assert!(parse_cloud("0 0 0\n", "f", true).is_err());
        assert!(parse_cloud("#modality: sonar\n", "f", true).is_err());
        assert!(parse_cloud("#modality: visual\n0 nan 0\n", "f", true).is_err());
    }

    #[test]
    fn label_header_detection() {
        assert!(has_label_header(&format_cloud(&sample())));
        let mut c = sample();
        c.label = None;
        assert!(!has_label_header(&format_cloud(&c)));
    }

    #[test]
    fn atomic_write_and_audit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("c.txt");
        save_cloud(&p, &sample()).unwrap();
        assert_eq!(load_cloud(&p).unwrap(), sample());
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        let audit = AuditReader::new(FsReader);
        audit.read_unlabeled(&p).unwrap();
        assert_eq!((audit.tactile_reads(), audit.tactile_label_reads()), (1, 0));
        audit.read_labeled(&p).unwrap();
        assert_eq!((audit.tactile_reads(), audit.tactile_label_reads()), (2, 1));
        assert_eq!(audit.visual_reads(), 0);
    }
}
