//! Python bindings: point clouds, synthetic data, descriptors, training,
//! recognition and the benchmark.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use crossmodal_core::adapt::{gfk_fit, Domain, FeatureSet};
use crossmodal_core::classify::TrainedModel;
use crossmodal_core::cloudkit::{equalize, ClassId, EqualizationParams, Modality, Point, PointCloud};
use crossmodal_core::pipeline::io::{load_cloud, save_cloud, write_atomic};
use crossmodal_core::pipeline::{
    cmr_train_files, default_grid, describe_cloud, generate_dataset, recognize, run_benchmark, tlcmr_train_files,
    AdaptMethod, DatasetManifest, FsReader, GenerationParams, PipelineConfig, PipelineError,
};
use crossmodal_core::synthlab::{
    class_name, make_object, sample_tactile, sample_visual, ExplorationGrid, SensorSpec, VisualSpec,
    DEFAULT_GRID_PITCH,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn triple(p: &Point) -> (f64, f64, f64) {
    (p.x, p.y, p.z)
}

#[pyclass(name = "PointCloud", module = "crossmodal", skip_from_py_object)]
#[derive(Clone)]
struct PyPointCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, modality = "visual", label = None, sensor_origin = None))]
    fn new(
        points: Vec<(f64, f64, f64)>,
        modality: &str,
        label: Option<usize>,
        sensor_origin: Option<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let modality: Modality = modality.parse().map_err(value_err)?;
        let mut cloud = PointCloud::new(points.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect(), modality);
        if let Some(l) = label {
            cloud = cloud.with_label(ClassId(l));
        }
        if let Some((x, y, z)) = sensor_origin {
            cloud = cloud.with_sensor_origin(Point::new(x, y, z));
        }
        cloud.check_finite().map_err(value_err)?;
        Ok(Self { inner: cloud })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_cloud(&path).map_err(pipeline_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_cloud(&path, &self.inner).map_err(pipeline_err)
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points.iter().map(triple).collect()
    }

    #[getter]
    fn modality(&self) -> String {
        self.inner.modality.to_string()
    }

    #[getter]
    fn label(&self) -> Option<usize> {
        self.inner.label.map(|l| l.0)
    }

    #[getter]
    fn sensor_origin(&self) -> Option<(f64, f64, f64)> {
        self.inner.sensor_origin.as_ref().map(triple)
    }

    /// Upsample and voxel-filter; omitted parameters take their defaults.
    #[pyo3(signature = (upsample_step = None, search_radius = None, poly_degree = None, voxel_edge = None))]
    fn equalize(
        &self,
        py: Python<'_>,
        upsample_step: Option<f64>,
        search_radius: Option<f64>,
        poly_degree: Option<usize>,
        voxel_edge: Option<f64>,
    ) -> PyResult<Self> {
        let d = EqualizationParams::default();
        let params = EqualizationParams {
            upsample_step: upsample_step.unwrap_or(d.upsample_step),
            search_radius: search_radius.unwrap_or(d.search_radius),
            poly_degree: poly_degree.unwrap_or(d.poly_degree),
            voxel_edge: voxel_edge.unwrap_or(d.voxel_edge),
        };
        let inner = py.detach(|| equalize(&self.inner, &params)).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud({} points, {}, label={})",
            self.inner.len(),
            self.inner.modality,
            self.inner.label.map_or("None".to_string(), |l| l.0.to_string())
        )
    }
}

#[pyclass(name = "Config", module = "crossmodal", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PipelineConfig::from_toml(text).map_err(pipeline_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: PipelineConfig::load(&path).map_err(pipeline_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn preprocessing(&self) -> bool {
        self.inner.preprocessing
    }

    #[setter]
    fn set_preprocessing(&mut self, v: bool) {
        self.inner.preprocessing = v;
    }

    #[getter]
    fn esf_samples(&self) -> usize {
        self.inner.esf_samples
    }

    #[setter]
    fn set_esf_samples(&mut self, v: usize) {
        self.inner.esf_samples = v;
    }

    /// `shot`, `esf`, `concat` or `clue`.
    #[getter]
    fn descriptor(&self) -> String {
        self.inner.descriptor.to_string()
    }

    #[setter]
    fn set_descriptor(&mut self, v: &str) -> PyResult<()> {
        self.inner.descriptor = v.parse().map_err(value_err)?;
        Ok(())
    }

    /// `1nn`, `3nn`, `svm_linear`, `svm_rbf`, ...
    #[getter]
    fn classifier(&self) -> String {
        self.inner.classifier.name()
    }

    #[setter]
    fn set_classifier(&mut self, v: &str) -> PyResult<()> {
        self.inner.classifier = v.parse().map_err(value_err)?;
        Ok(())
    }

    /// `none`, `pca` or `gfk`.
    #[getter]
    fn adaptation(&self) -> String {
        self.inner.adaptation.method.to_string()
    }

    #[setter]
    fn set_adaptation(&mut self, v: &str) -> PyResult<()> {
        self.inner.adaptation.method = v.parse().map_err(value_err)?;
        Ok(())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.adaptation.dim
    }

    #[setter]
    fn set_dim(&mut self, v: usize) {
        self.inner.adaptation.dim = v;
    }

    #[getter]
    fn standardize(&self) -> bool {
        self.inner.adaptation.standardize
    }

    #[setter]
    fn set_standardize(&mut self, v: bool) {
        self.inner.adaptation.standardize = v;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(pipeline_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(descriptor={}, classifier={}, adaptation={}, seed={})",
            self.inner.descriptor,
            self.inner.classifier.name(),
            self.inner.adaptation.method,
            self.inner.seed
        )
    }
}

fn config_or_default(config: Option<PyRef<'_, PyConfig>>) -> PipelineConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

#[pyclass(name = "Model", module = "crossmodal", skip_from_py_object)]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    /// Train on the visual clouds of a dataset directory (or manifest file).
    #[staticmethod]
    #[pyo3(signature = (manifest, config = None))]
    fn train(py: Python<'_>, manifest: PathBuf, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let m = DatasetManifest::load(&manifest).map_err(pipeline_err)?;
        let inner = py.detach(|| cmr_train_files(&m, &FsReader, &cfg)).map_err(pipeline_err)?;
        Ok(Self { inner })
    }

    /// Train on visual clouds adapted to the dataset's unlabeled tactile
    /// clouds; adaptation `none` in the config is taken as `gfk`.
    #[staticmethod]
    #[pyo3(signature = (manifest, config = None))]
    fn adapt_train(py: Python<'_>, manifest: PathBuf, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Self> {
        let mut cfg = config_or_default(config);
        if cfg.adaptation.method == AdaptMethod::None {
            cfg.adaptation.method = AdaptMethod::Gfk;
        }
        let m = DatasetManifest::load(&manifest).map_err(pipeline_err)?;
        let inner = py.detach(|| tlcmr_train_files(&m, &FsReader, &cfg)).map_err(pipeline_err)?;
        Ok(Self { inner })
    }

    /// Class id of one cloud.
    fn recognize(&self, py: Python<'_>, cloud: PyRef<'_, PyPointCloud>) -> PyResult<usize> {
        let c = cloud.inner.clone();
        let label = py.detach(|| recognize(&self.inner, &c)).map_err(pipeline_err)?;
        Ok(label.0)
    }

    fn classes(&self) -> Vec<usize> {
        self.inner.classifier.classes().iter().map(|c| c.0).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: TrainedModel::from_json(text).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let json = self.to_json()?;
        write_atomic(&path, json.as_bytes()).map_err(pipeline_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.inner.classifier.describe())
    }
}

/// Descriptor vector of one cloud under `config` (default: CLUE).
#[pyfunction]
#[pyo3(signature = (cloud, config = None))]
fn describe(py: Python<'_>, cloud: PyRef<'_, PyPointCloud>, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Vec<f64>> {
    let cfg = config_or_default(config);
    let c = cloud.inner.clone();
    let d = py.detach(|| describe_cloud(&c, &cfg)).map_err(pipeline_err)?;
    Ok(d.into_values())
}

/// Geodesic flow kernel matrix between the `d`-dimensional PCA subspaces
/// of two sets of row vectors.
#[pyfunction]
fn gfk_kernel(source: Vec<Vec<f64>>, target: Vec<Vec<f64>>, d: usize) -> PyResult<Vec<Vec<f64>>> {
    let s = FeatureSet::from_rows(&source, Domain::Source).map_err(value_err)?;
    let t = FeatureSet::from_rows(&target, Domain::Target).map_err(value_err)?;
    let g = gfk_fit(&s, &t, d).map_err(value_err)?.g;
    Ok(g.row_iter().map(|r| r.iter().cloned().collect()).collect())
}

/// Simulated camera view of one catalog object.
#[pyfunction]
#[pyo3(signature = (class_id, seed = 0))]
fn synthesize_visual(class_id: usize, seed: u64) -> PyResult<PyPointCloud> {
    let object = make_object(ClassId(class_id), seed).map_err(value_err)?;
    let inner = sample_visual(&object, &VisualSpec::default(), seed).map_err(value_err)?;
    Ok(PyPointCloud { inner })
}

/// Simulated tactile exploration of one catalog object.
#[pyfunction]
#[pyo3(signature = (class_id, seed = 0))]
fn synthesize_tactile(class_id: usize, seed: u64) -> PyResult<PyPointCloud> {
    let object = make_object(ClassId(class_id), seed).map_err(value_err)?;
    let grid = ExplorationGrid::covering(&object, DEFAULT_GRID_PITCH).map_err(value_err)?;
    let inner = sample_tactile(&object, &SensorSpec::default(), &grid, seed).map_err(value_err)?;
    Ok(PyPointCloud { inner })
}

/// Write a synthetic dataset and return the manifest path.
#[pyfunction]
#[pyo3(name = "generate_dataset", signature = (out_dir, seed = 42, classes = 15, visual_per_class = 40, tactile_per_class = 5))]
fn py_generate_dataset(
    py: Python<'_>,
    out_dir: PathBuf,
    seed: u64,
    classes: usize,
    visual_per_class: usize,
    tactile_per_class: usize,
) -> PyResult<PathBuf> {
    let params = GenerationParams {
        seed,
        classes,
        visual_per_class,
        tactile_per_class,
        first_pose_count: visual_per_class / 2,
        ..GenerationParams::default()
    };
    py.detach(|| generate_dataset(&out_dir, &params)).map_err(pipeline_err)?;
    Ok(out_dir.join("manifest.toml"))
}

/// Run the standard benchmark grid around `config`, optionally keeping only
/// runs whose id contains `filter`; writes reports to `out_dir` and returns
/// the results CSV.
#[pyfunction]
#[pyo3(signature = (manifest, out_dir, config = None, filter = None, folds = None))]
fn benchmark(
    py: Python<'_>,
    manifest: PathBuf,
    out_dir: PathBuf,
    config: Option<PyRef<'_, PyConfig>>,
    filter: Option<String>,
    folds: Option<usize>,
) -> PyResult<String> {
    let mut grid = default_grid(&config_or_default(config));
    if let Some(f) = filter {
        grid.runs.retain(|r| r.id.contains(&f));
    }
    if let Some(k) = folds {
        grid.folds = k;
    }
    let m = DatasetManifest::load(&manifest).map_err(pipeline_err)?;
    let report = py.detach(|| run_benchmark(&m, &FsReader, &grid)).map_err(pipeline_err)?;
    report.write(&out_dir).map_err(pipeline_err)?;
    Ok(report.results_csv())
}

#[pyfunction(name = "class_name")]
fn py_class_name(class_id: usize) -> Option<&'static str> {
    class_name(class_id)
}

#[pymodule]
fn crossmodal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(gfk_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_visual, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_tactile, m)?)?;
    m.add_function(wrap_pyfunction!(py_generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(py_class_name, m)?)?;
    Ok(())
}
