//! Python bindings: kinematics, the reachability database, inscribed
//! circles, covering and stop ordering, and the scene pipeline.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use reachplan::baseregion::GraspOptions;
use reachplan::grid::{BaseGridSpec, Mask};
use reachplan::kinematics::{forward_kinematics, DhJoint, JointConfig, KinematicChain};
use reachplan::pipeline::{build_scene_db, plan_scene, scene_regions, DbParams};
use reachplan::reachdb::{build, DbError, ReachDb, SamplingSpec, VoxelSpec};
use reachplan::regiongeo::inscribed_circle as inscribed;
use reachplan::scene::{emit_scene, parse_scene as parse};
use reachplan::sequencer::{self, CoverInstance, PlanOptions, SaSchedule};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn db_err(e: DbError) -> PyErr {
    match e {
        DbError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

#[pyclass(name = "Pose6", from_py_object)]
#[derive(Clone, Copy)]
struct PyPose6 {
    #[pyo3(get, set)]
    x: f64,
    #[pyo3(get, set)]
    y: f64,
    #[pyo3(get, set)]
    z: f64,
    #[pyo3(get, set)]
    roll: f64,
    #[pyo3(get, set)]
    pitch: f64,
    #[pyo3(get, set)]
    yaw: f64,
}

impl From<reachplan::pose::Pose6> for PyPose6 {
    fn from(p: reachplan::pose::Pose6) -> Self {
        Self { x: p.x, y: p.y, z: p.z, roll: p.roll, pitch: p.pitch, yaw: p.yaw }
    }
}

impl PyPose6 {
    fn inner(&self) -> reachplan::pose::Pose6 {
        reachplan::pose::Pose6::new(self.x, self.y, self.z, self.roll, self.pitch, self.yaw)
    }
}

#[pymethods]
impl PyPose6 {
    #[new]
    #[pyo3(signature = (x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0))]
    fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { x, y, z, roll, pitch, yaw }
    }

    fn to_list(&self) -> [f64; 6] {
        self.inner().to_array()
    }

    fn __repr__(&self) -> String {
        format!("Pose6({}, {}, {}, {}, {}, {})", self.x, self.y, self.z, self.roll, self.pitch, self.yaw)
    }
}

#[pyclass(name = "Chain")]
struct PyChain(KinematicChain);

#[pymethods]
impl PyChain {
    /// `joints`: list of `(a, alpha, d, theta_offset, limit_lo, limit_hi)`.
    #[new]
    #[pyo3(signature = (joints, tool=None))]
    fn new(joints: Vec<(f64, f64, f64, f64, f64, f64)>, tool: Option<PyPose6>) -> PyResult<Self> {
        let joints = joints
            .into_iter()
            .map(|(a, alpha, d, theta_offset, limit_lo, limit_hi)| DhJoint { a, alpha, d, theta_offset, limit_lo, limit_hi })
            .collect();
        let tool = tool.map_or(reachplan::pose::Pose6::identity(), |t| t.inner());
        Ok(Self(KinematicChain::new(joints, tool).map_err(value_err)?))
    }

    #[staticmethod]
    fn planar(lengths: Vec<f64>) -> Self {
        Self(KinematicChain::planar(&lengths))
    }

    #[getter]
    fn dof(&self) -> usize {
        self.0.dof()
    }

    fn fk(&self, q: Vec<f64>) -> PyResult<PyPose6> {
        Ok(forward_kinematics(&self.0, &JointConfig(q)).map_err(value_err)?.into())
    }

    /// Rows 0-2 linear velocity, rows 3-5 angular velocity.
    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self.0.jacobian(&JointConfig(q)).map_err(value_err)?;
        Ok((0..6).map(|r| (0..j.ncols()).map(|c| j[(r, c)]).collect()).collect())
    }

    fn manipulability(&self, q: Vec<f64>) -> PyResult<f64> {
        self.0.manipulability(&JointConfig(q)).map_err(value_err)
    }
}

#[pyclass(name = "ReachDb")]
struct PyReachDb(ReachDb);

#[pymethods]
impl PyReachDb {
    #[staticmethod]
    #[pyo3(signature = (chain, dtheta, voxel, w_min=0.0))]
    fn build(chain: &PyChain, dtheta: f64, voxel: [f64; 6], w_min: f64) -> PyResult<Self> {
        let spec = VoxelSpec::new(voxel).map_err(db_err)?;
        let sampling = SamplingSpec::uniform(dtheta, chain.0.dof()).with_w_min(w_min);
        Ok(Self(build(&chain.0, &sampling, &spec).map_err(db_err)?))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self(ReachDb::load(path).map_err(db_err)?))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(db_err)
    }

    #[getter]
    fn record_count(&self) -> u64 {
        self.0.record_count()
    }

    #[getter]
    fn voxel_count(&self) -> u64 {
        self.0.voxel_count()
    }

    /// `(config, manipulability)` pairs for a target pose.
    #[pyo3(signature = (pose, interval=false))]
    fn query(&self, pose: PyPose6, interval: bool) -> Vec<(Vec<f64>, f64)> {
        let target = pose.inner();
        let pick = |r: &reachplan::reachdb::ReachRecord| (r.config.0.clone(), r.manipulability);
        if interval {
            self.0.query_interval(&target).into_iter().map(pick).collect()
        } else {
            self.0.query(&target).iter().map(pick).collect()
        }
    }
}

/// Largest inscribed circle of a `#`/`.` mask, row 0 at the lowest y.
/// Returns `(x, y, radius)`.
#[pyfunction]
#[pyo3(signature = (rows, cell, origin=(0.0, 0.0)))]
fn inscribed_circle(rows: Vec<String>, cell: f64, origin: (f64, f64)) -> PyResult<(f64, f64, f64)> {
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let mask = Mask::from_rows(&refs).ok_or_else(|| value_err("rows must be equal-length strings of '#' and '.'"))?;
    let grid = BaseGridSpec::new([origin.0, origin.1], cell, mask.width(), mask.height(), 0.0).map_err(value_err)?;
    let c = inscribed(&mask, &grid).map_err(value_err)?;
    Ok((c.center[0], c.center[1], c.radius))
}

/// Indices of a minimum set of subsets covering trays `0..trays`.
#[pyfunction]
fn min_cover(trays: usize, subsets: Vec<Vec<usize>>) -> PyResult<Vec<usize>> {
    let inst = CoverInstance::from_subsets(trays, &subsets).map_err(value_err)?;
    sequencer::min_cover(&inst).map_err(value_err)
}

/// Visiting order of `stops` on an open path from `start` to `goal`.
#[pyfunction]
#[pyo3(signature = (start, goal, stops, seed=42))]
fn order_stops(start: [f64; 2], goal: [f64; 2], stops: Vec<[f64; 2]>, seed: u64) -> Vec<usize> {
    sequencer::order_stops(start, goal, &stops, &SaSchedule { seed, ..SaSchedule::default() })
}

/// Validates a scene document and returns it in canonical form.
#[pyfunction]
fn parse_scene(text: &str) -> PyResult<String> {
    let scene = parse(text).map_err(value_err)?;
    Ok(emit_scene(&scene))
}

/// Builds the database, the base regions and the plan for a scene; returns
/// the plan text.
#[pyfunction]
fn plan(text: &str, dtheta: f64, voxel: [f64; 6]) -> PyResult<String> {
    let scene = parse(text).map_err(value_err)?;
    let (db, _) = build_scene_db(&scene, &DbParams { dtheta, voxel, w_min: 0.0 }).map_err(value_err)?;
    let regions = scene_regions(&scene, &db, &[], &GraspOptions::default()).map_err(value_err)?;
    let p = plan_scene(&scene, &regions, &scene.uncertainty, &PlanOptions::default()).map_err(value_err)?;
    Ok(p.to_text())
}

#[pymodule]
fn reachplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPose6>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyReachDb>()?;
    m.add_function(wrap_pyfunction!(inscribed_circle, m)?)?;
    m.add_function(wrap_pyfunction!(min_cover, m)?)?;
    m.add_function(wrap_pyfunction!(order_stops, m)?)?;
    m.add_function(wrap_pyfunction!(parse_scene, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    Ok(())
}
