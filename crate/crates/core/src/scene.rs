//! Scene files: robot, world, tasks, base grid, uncertainty and the
//! start/goal positions, in JSON.
//!
//! Tray shapes are given in the tray frame, object shapes and grasps in the
//! object frame, obstacle shapes in the world frame. Robot link shapes are
//! in the frame of their link (link 0 is the mobile base).

use crate::baseregion::GraspSet;
use crate::collision::{GroupKind, RobotGeometry, Shape, World};
use crate::grid::BaseGridSpec;
use crate::kinematics::{DhJoint, KinematicChain};
use crate::pose::Pose6;
use crate::regiongeo::{ErrorModel, UncertaintyModel};
use nalgebra::Isometry3;
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneErrorCode {
    Syntax,
    Schema,
    UnknownTray,
    EmptyGraspSet,
    NonPositiveDimension,
    BadJointLimits,
    DuplicateId,
    BadLinkIndex,
    BadValue,
}

impl SceneErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Syntax => "SCENE_SYNTAX",
            Self::Schema => "SCENE_SCHEMA",
            Self::UnknownTray => "SCENE_UNKNOWN_TRAY",
            Self::EmptyGraspSet => "SCENE_EMPTY_GRASPSET",
            Self::NonPositiveDimension => "SCENE_NONPOSITIVE_DIMENSION",
            Self::BadJointLimits => "SCENE_BAD_JOINT_LIMITS",
            Self::DuplicateId => "SCENE_DUPLICATE_ID",
            Self::BadLinkIndex => "SCENE_BAD_LINK_INDEX",
            Self::BadValue => "SCENE_BAD_VALUE",
        }
    }
}

impl fmt::Display for SceneErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{code} at {path}: {message}")]
pub struct SceneError {
    pub code: SceneErrorCode,
    /// `$.world.trays[0].id` style location, or `line L column C` for syntax errors.
    pub path: String,
    pub message: String,
}

fn err<T>(code: SceneErrorCode, path: &str, message: impl Into<String>) -> Result<T, SceneError> {
    Err(SceneError {
        code,
        path: path.to_string(),
        message: message.into(),
    })
}

/// Shape as written in the scene, relative to its owner's frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    Box { pose: Pose6, half_extents: [f64; 3] },
}

impl ShapeSpec {
    pub fn local(&self) -> Shape {
        match self {
            ShapeSpec::Sphere { center, radius } => Shape::sphere(*center, *radius),
            ShapeSpec::Capsule { a, b, radius } => Shape::capsule(*a, *b, *radius),
            ShapeSpec::Box { pose, half_extents } => Shape::cuboid(*pose, *half_extents),
        }
        .expect("validated at parse time")
    }

    pub fn placed(&self, frame: &Isometry3<f64>) -> Shape {
        self.local().transformed(frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub joints: Vec<DhJoint>,
    pub tool: Pose6,
    /// `links[0]` is the base.
    pub links: Vec<Vec<ShapeSpec>>,
    pub self_collision: Vec<(usize, usize)>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraySpec {
    pub id: String,
    pub pose: Pose6,
    pub shapes: Vec<ShapeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub id: String,
    pub shapes: Vec<ShapeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub pose: Pose6,
    pub shapes: Vec<ShapeSpec>,
    /// Grasp poses in the object frame.
    pub grasps: Vec<Pose6>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub tray: String,
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub robot: RobotSpec,
    pub trays: Vec<TraySpec>,
    pub obstacles: Vec<ObstacleSpec>,
    pub tasks: Vec<TaskSpec>,
    pub base_grid: BaseGridSpec,
    pub uncertainty: UncertaintyModel,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl Scene {
    pub fn chain(&self) -> KinematicChain {
        KinematicChain::new(self.robot.joints.clone(), self.robot.tool).expect("validated at parse time")
    }

    pub fn geometry(&self) -> RobotGeometry {
        RobotGeometry::new(
            self.robot
                .links
                .iter()
                .map(|shapes| shapes.iter().map(ShapeSpec::local).collect())
                .collect(),
            self.robot.self_collision.clone(),
            self.robot.margin,
        )
        .expect("validated at parse time")
    }

    /// Trays, obstacles and every task object, in world coordinates.
    pub fn world(&self) -> World {
        let mut w = World::new();
        for t in &self.trays {
            let iso = t.pose.to_isometry();
            w.add_group(t.id.clone(), GroupKind::Tray, t.shapes.iter().map(|s| s.placed(&iso)).collect());
        }
        for o in &self.obstacles {
            w.add_group(o.id.clone(), GroupKind::Obstacle, o.shapes.iter().map(|s| s.placed(&Isometry3::identity())).collect());
        }
        for task in &self.tasks {
            for o in &task.objects {
                let iso = o.pose.to_isometry();
                w.add_group(o.id.clone(), GroupKind::Object, o.shapes.iter().map(|s| s.placed(&iso)).collect());
            }
        }
        w
    }

    /// Trays with tasks, in task order.
    pub fn task_trays(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.tray.clone()).collect()
    }

    pub fn task(&self, tray: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.tray == tray)
    }

    pub fn graspsets(&self, tray: &str) -> Option<Vec<GraspSet>> {
        self.task(tray).map(|t| {
            t.objects
                .iter()
                .map(|o| GraspSet {
                    object_id: o.id.clone(),
                    object_pose: o.pose,
                    grasps: o.grasps.clone(),
                })
                .collect()
        })
    }
}

// ---------------------------------------------------------------- parsing

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str, allowed: &[&str]) -> Result<Self, SceneError> {
        let Some(map) = v.as_object() else {
            return err(SceneErrorCode::Schema, path, "expected an object");
        };
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return err(SceneErrorCode::Schema, &format!("{path}.{k}"), "unknown key");
        }
        Ok(Self { map, path: path.to_string() })
    }

    fn at(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn req(&self, key: &str) -> Result<&'a Value, SceneError> {
        match self.map.get(key) {
            Some(v) => Ok(v),
            None => err(SceneErrorCode::Schema, &self.at(key), "missing required key"),
        }
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn num(&self, key: &str) -> Result<f64, SceneError> {
        num(self.req(key)?, &self.at(key))
    }

    fn positive(&self, key: &str) -> Result<f64, SceneError> {
        let v = self.num(key)?;
        if v <= 0.0 {
            return err(SceneErrorCode::NonPositiveDimension, &self.at(key), format!("must be positive, got {v}"));
        }
        Ok(v)
    }

    fn string(&self, key: &str) -> Result<String, SceneError> {
        match self.req(key)?.as_str() {
            Some(s) if !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || c == ',') => Ok(s.to_string()),
            Some(_) => err(SceneErrorCode::BadValue, &self.at(key), "ids must be non-empty without spaces or commas"),
            None => err(SceneErrorCode::Schema, &self.at(key), "expected a string"),
        }
    }

    fn arr(&self, key: &str) -> Result<&'a Vec<Value>, SceneError> {
        arr(self.req(key)?, &self.at(key))
    }

    fn opt_arr(&self, key: &str) -> Result<&'a [Value], SceneError> {
        match self.opt(key) {
            Some(v) => arr(v, &self.at(key)).map(|a| a.as_slice()),
            None => Ok(&[]),
        }
    }
}

fn num(v: &Value, path: &str) -> Result<f64, SceneError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(SceneErrorCode::Schema, path, "expected a number"),
    }
}

fn arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SceneError> {
    match v.as_array() {
        Some(a) => Ok(a),
        None => err(SceneErrorCode::Schema, path, "expected an array"),
    }
}

fn fixed<const N: usize>(v: &Value, path: &str) -> Result<[f64; N], SceneError> {
    let a = arr(v, path)?;
    if a.len() != N {
        return err(SceneErrorCode::Schema, path, format!("expected {N} numbers, found {}", a.len()));
    }
    let mut out = [0.0; N];
    for (i, x) in a.iter().enumerate() {
        out[i] = num(x, &format!("{path}[{i}]"))?;
    }
    Ok(out)
}

fn pose(v: &Value, path: &str) -> Result<Pose6, SceneError> {
    Ok(Pose6::from_array(fixed::<6>(v, path)?))
}

fn count(v: &Value, path: &str) -> Result<usize, SceneError> {
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n as usize),
        Some(_) => err(SceneErrorCode::NonPositiveDimension, path, "must be positive"),
        None => match v.as_f64() {
            Some(x) if x <= 0.0 => err(SceneErrorCode::NonPositiveDimension, path, "must be positive"),
            _ => err(SceneErrorCode::Schema, path, "expected a positive integer"),
        },
    }
}

fn shape(v: &Value, path: &str) -> Result<ShapeSpec, SceneError> {
    let kind = v.get("type").and_then(Value::as_str).unwrap_or("");
    match kind {
        "sphere" => {
            let o = Obj::new(v, path, &["type", "center", "radius"])?;
            Ok(ShapeSpec::Sphere {
                center: fixed(o.req("center")?, &o.at("center"))?,
                radius: o.positive("radius")?,
            })
        }
        "capsule" => {
            let o = Obj::new(v, path, &["type", "a", "b", "radius"])?;
            Ok(ShapeSpec::Capsule {
                a: fixed(o.req("a")?, &o.at("a"))?,
                b: fixed(o.req("b")?, &o.at("b"))?,
                radius: o.positive("radius")?,
            })
        }
        "box" => {
            let o = Obj::new(v, path, &["type", "pose", "half_extents"])?;
            let half_extents: [f64; 3] = fixed(o.req("half_extents")?, &o.at("half_extents"))?;
            if let Some(i) = half_extents.iter().position(|h| *h <= 0.0) {
                return err(
                    SceneErrorCode::NonPositiveDimension,
                    &format!("{path}.half_extents[{i}]"),
                    format!("must be positive, got {}", half_extents[i]),
                );
            }
            Ok(ShapeSpec::Box {
                pose: pose(o.req("pose")?, &o.at("pose"))?,
                half_extents,
            })
        }
        _ => err(SceneErrorCode::Schema, &format!("{path}.type"), "expected sphere, capsule or box"),
    }
}

fn shapes(values: &[Value], path: &str) -> Result<Vec<ShapeSpec>, SceneError> {
    values.iter().enumerate().map(|(i, v)| shape(v, &format!("{path}[{i}]"))).collect()
}

fn parse_robot(v: &Value) -> Result<RobotSpec, SceneError> {
    let o = Obj::new(v, "$.robot", &["joints", "tool", "links", "self_collision", "margin"])?;
    let jv = o.arr("joints")?;
    if jv.is_empty() {
        return err(SceneErrorCode::Schema, &o.at("joints"), "at least one joint is required");
    }
    let mut joints = Vec::with_capacity(jv.len());
    for (i, j) in jv.iter().enumerate() {
        let p = format!("$.robot.joints[{i}]");
        let jo = Obj::new(j, &p, &["a", "alpha", "d", "theta_offset", "limit_lo", "limit_hi"])?;
        let (lo, hi) = (jo.num("limit_lo")?, jo.num("limit_hi")?);
        if !(lo < hi) || lo < -std::f64::consts::TAU - 1e-12 || hi > std::f64::consts::TAU + 1e-12 {
            return err(SceneErrorCode::BadJointLimits, &p, format!("need lo < hi within [-2pi, 2pi], got [{lo}, {hi}]"));
        }
        joints.push(DhJoint {
            a: jo.num("a")?,
            alpha: jo.num("alpha")?,
            d: jo.num("d")?,
            theta_offset: jo.num("theta_offset")?,
            limit_lo: lo,
            limit_hi: hi,
        });
    }
    let tool = match o.opt("tool") {
        Some(t) => pose(t, &o.at("tool"))?,
        None => Pose6::identity(),
    };
    let mut links = Vec::new();
    for (i, l) in o.opt_arr("links")?.iter().enumerate() {
        let p = format!("$.robot.links[{i}]");
        if i > joints.len() {
            return err(SceneErrorCode::BadLinkIndex, &p, format!("chain has only {} links after the base", joints.len()));
        }
        let lo = Obj::new(l, &p, &["shapes"])?;
        links.push(shapes(lo.opt_arr("shapes")?, &lo.at("shapes"))?);
    }
    let mut self_collision = Vec::new();
    for (k, pair) in o.opt_arr("self_collision")?.iter().enumerate() {
        let p = format!("$.robot.self_collision[{k}]");
        let [i, j] = fixed::<2>(pair, &p)?;
        if i.fract() != 0.0 || j.fract() != 0.0 || i < 0.0 || j < 0.0 {
            return err(SceneErrorCode::BadLinkIndex, &p, "link indices must be non-negative integers");
        }
        let (i, j) = (i as usize, j as usize);
        if i >= links.len() || j >= links.len() {
            return err(SceneErrorCode::BadLinkIndex, &p, format!("only {} links have shapes", links.len()));
        }
        if i.abs_diff(j) <= 1 {
            return err(SceneErrorCode::BadLinkIndex, &p, "adjacent or identical links cannot be a self-collision pair");
        }
        self_collision.push((i, j));
    }
    let margin = match o.opt("margin") {
        Some(m) => num(m, &o.at("margin"))?,
        None => 0.0,
    };
    if margin < 0.0 {
        return err(SceneErrorCode::BadValue, &o.at("margin"), "margin must be non-negative");
    }
    Ok(RobotSpec {
        joints,
        tool,
        links,
        self_collision,
        margin,
    })
}

/// Parses and validates a scene document.
pub fn parse_scene(document: &str) -> Result<Scene, SceneError> {
    let root: Value = serde_json::from_str(document).map_err(|e| SceneError {
        code: SceneErrorCode::Syntax,
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let o = Obj::new(&root, "$", &["robot", "world", "tasks", "base_grid", "uncertainty", "start", "goal"])?;
    let robot = parse_robot(o.req("robot")?)?;

    let mut ids = HashSet::new();
    let mut claim = |id: &str, path: &str| -> Result<(), SceneError> {
        if !ids.insert(id.to_string()) {
            return err(SceneErrorCode::DuplicateId, path, format!("id {id:?} is used twice"));
        }
        Ok(())
    };

    let wo = Obj::new(o.req("world")?, "$.world", &["trays", "obstacles"])?;
    let mut trays = Vec::new();
    for (i, t) in wo.arr("trays")?.iter().enumerate() {
        let to = Obj::new(t, &format!("$.world.trays[{i}]"), &["id", "pose", "shapes"])?;
        let id = to.string("id")?;
        claim(&id, &to.at("id"))?;
        trays.push(TraySpec {
            id,
            pose: pose(to.req("pose")?, &to.at("pose"))?,
            shapes: shapes(to.opt_arr("shapes")?, &to.at("shapes"))?,
        });
    }
    let mut obstacles = Vec::new();
    for (i, ob) in wo.opt_arr("obstacles")?.iter().enumerate() {
        let oo = Obj::new(ob, &format!("$.world.obstacles[{i}]"), &["id", "shapes"])?;
        let id = oo.string("id")?;
        claim(&id, &oo.at("id"))?;
        obstacles.push(ObstacleSpec {
            id,
            shapes: shapes(oo.arr("shapes")?, &oo.at("shapes"))?,
        });
    }

    let mut tasks = Vec::new();
    let mut task_trays = HashSet::new();
    for (i, t) in o.arr("tasks")?.iter().enumerate() {
        let to = Obj::new(t, &format!("$.tasks[{i}]"), &["tray", "objects"])?;
        let tray = match to.req("tray")?.as_str() {
            Some(s) => s.to_string(),
            None => return err(SceneErrorCode::Schema, &to.at("tray"), "expected a string"),
        };
        if !trays.iter().any(|t| t.id == tray) {
            return err(SceneErrorCode::UnknownTray, &to.at("tray"), format!("tray {tray:?} is not in the world"));
        }
        if !task_trays.insert(tray.clone()) {
            return err(SceneErrorCode::DuplicateId, &to.at("tray"), format!("tray {tray:?} has two tasks"));
        }
        let mut objects = Vec::new();
        for (k, ob) in to.arr("objects")?.iter().enumerate() {
            let oo = Obj::new(ob, &format!("$.tasks[{i}].objects[{k}]"), &["id", "pose", "shapes", "grasps"])?;
            let id = oo.string("id")?;
            claim(&id, &oo.at("id"))?;
            let gv = oo.arr("grasps")?;
            if gv.is_empty() {
                return err(SceneErrorCode::EmptyGraspSet, &oo.at("grasps"), format!("object {id:?} has no grasps"));
            }
            let grasps = gv
                .iter()
                .enumerate()
                .map(|(g, v)| pose(v, &format!("{}[{g}]", oo.at("grasps"))))
                .collect::<Result<_, _>>()?;
            objects.push(ObjectSpec {
                pose: pose(oo.req("pose")?, &oo.at("pose"))?,
                shapes: shapes(oo.opt_arr("shapes")?, &oo.at("shapes"))?,
                grasps,
                id,
            });
        }
        if objects.is_empty() {
            return err(SceneErrorCode::Schema, &to.at("objects"), "a task needs at least one object");
        }
        tasks.push(TaskSpec { tray, objects });
    }

    let go = Obj::new(o.req("base_grid")?, "$.base_grid", &["origin", "cell", "width", "height", "heading"])?;
    let base_grid = BaseGridSpec {
        origin: fixed(go.req("origin")?, &go.at("origin"))?,
        cell: go.positive("cell")?,
        width: count(go.req("width")?, &go.at("width"))?,
        height: count(go.req("height")?, &go.at("height"))?,
        phi: match go.opt("heading") {
            Some(h) => num(h, &go.at("heading"))?,
            None => 0.0,
        },
    };

    let uo = Obj::new(o.req("uncertainty")?, "$.uncertainty", &["sigma", "model", "seed"])?;
    let sigma = uo.num("sigma")?;
    if sigma < 0.0 {
        return err(SceneErrorCode::BadValue, &uo.at("sigma"), "sigma must be non-negative");
    }
    let model = match uo.opt("model") {
        None => ErrorModel::default(),
        Some(m) => match m.as_str().and_then(ErrorModel::parse) {
            Some(m) => m,
            None => return err(SceneErrorCode::BadValue, &uo.at("model"), "expected uniform, gaussian or boundary"),
        },
    };
    let seed = match uo.opt("seed") {
        None => 0,
        Some(s) => match s.as_u64() {
            Some(s) => s,
            None => return err(SceneErrorCode::Schema, &uo.at("seed"), "expected a non-negative integer"),
        },
    };
    let uncertainty = UncertaintyModel::new(sigma, model, seed).expect("sigma checked");

    Ok(Scene {
        robot,
        trays,
        obstacles,
        tasks,
        base_grid,
        uncertainty,
        start: fixed(o.req("start")?, "$.start")?,
        goal: fixed(o.req("goal")?, "$.goal")?,
    })
}

// --------------------------------------------------------------- emitting

/// Canonical tree: object keys sorted, numbers kept as f64 or integers.
enum Node {
    Num(f64),
    Int(u64),
    Str(String),
    Arr(Vec<Node>),
    Obj(BTreeMap<&'static str, Node>),
}

fn nums(v: &[f64]) -> Node {
    Node::Arr(v.iter().map(|x| Node::Num(*x)).collect())
}

fn shape_node(s: &ShapeSpec) -> Node {
    let mut m = BTreeMap::new();
    match s {
        ShapeSpec::Sphere { center, radius } => {
            m.insert("type", Node::Str("sphere".into()));
            m.insert("center", nums(center));
            m.insert("radius", Node::Num(*radius));
        }
        ShapeSpec::Capsule { a, b, radius } => {
            m.insert("type", Node::Str("capsule".into()));
            m.insert("a", nums(a));
            m.insert("b", nums(b));
            m.insert("radius", Node::Num(*radius));
        }
        ShapeSpec::Box { pose, half_extents } => {
            m.insert("type", Node::Str("box".into()));
            m.insert("pose", nums(&pose.to_array()));
            m.insert("half_extents", nums(half_extents));
        }
    }
    Node::Obj(m)
}

fn shapes_node(v: &[ShapeSpec]) -> Node {
    Node::Arr(v.iter().map(shape_node).collect())
}

fn obj<const N: usize>(items: [(&'static str, Node); N]) -> Node {
    Node::Obj(items.into_iter().collect())
}

fn scene_node(s: &Scene) -> Node {
    let r = &s.robot;
    let robot = obj([
        (
            "joints",
            Node::Arr(
                r.joints
                    .iter()
                    .map(|j| {
                        obj([
                            ("a", Node::Num(j.a)),
                            ("alpha", Node::Num(j.alpha)),
                            ("d", Node::Num(j.d)),
                            ("theta_offset", Node::Num(j.theta_offset)),
                            ("limit_lo", Node::Num(j.limit_lo)),
                            ("limit_hi", Node::Num(j.limit_hi)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("tool", nums(&r.tool.to_array())),
        ("links", Node::Arr(r.links.iter().map(|l| obj([("shapes", shapes_node(l))])).collect())),
        (
            "self_collision",
            Node::Arr(r.self_collision.iter().map(|&(i, j)| Node::Arr(vec![Node::Int(i as u64), Node::Int(j as u64)])).collect()),
        ),
        ("margin", Node::Num(r.margin)),
    ]);
    let world = obj([
        (
            "trays",
            Node::Arr(
                s.trays
                    .iter()
                    .map(|t| {
                        obj([
                            ("id", Node::Str(t.id.clone())),
                            ("pose", nums(&t.pose.to_array())),
                            ("shapes", shapes_node(&t.shapes)),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "obstacles",
            Node::Arr(
                s.obstacles
                    .iter()
                    .map(|o| obj([("id", Node::Str(o.id.clone())), ("shapes", shapes_node(&o.shapes))]))
                    .collect(),
            ),
        ),
    ]);
    let tasks = Node::Arr(
        s.tasks
            .iter()
            .map(|t| {
                obj([
                    ("tray", Node::Str(t.tray.clone())),
                    (
                        "objects",
                        Node::Arr(
                            t.objects
                                .iter()
                                .map(|o| {
                                    obj([
                                        ("id", Node::Str(o.id.clone())),
                                        ("pose", nums(&o.pose.to_array())),
                                        ("shapes", shapes_node(&o.shapes)),
                                        ("grasps", Node::Arr(o.grasps.iter().map(|g| nums(&g.to_array())).collect())),
                                    ])
                                })
                                .collect(),
                        ),
                    ),
                ])
            })
            .collect(),
    );
    let g = &s.base_grid;
    let grid = obj([
        ("origin", nums(&g.origin)),
        ("cell", Node::Num(g.cell)),
        ("width", Node::Int(g.width as u64)),
        ("height", Node::Int(g.height as u64)),
        ("heading", Node::Num(g.phi)),
    ]);
    let u = &s.uncertainty;
    let unc = obj([
        ("sigma", Node::Num(u.sigma)),
        ("model", Node::Str(u.model.name().into())),
        ("seed", Node::Int(u.seed)),
    ]);
    obj([
        ("robot", robot),
        ("world", world),
        ("tasks", tasks),
        ("base_grid", grid),
        ("uncertainty", unc),
        ("start", nums(&s.start)),
        ("goal", nums(&s.goal)),
    ])
}

/// `printf("%.9g")` formatting.
pub fn format_g9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    } else {
        trim(&format!("{x:.*}", (8 - exp) as usize))
    }
}

fn scalar_array(v: &[Node]) -> bool {
    v.iter().all(|n| !matches!(n, Node::Arr(_) | Node::Obj(_)))
}

fn write_node(out: &mut String, n: &Node, indent: usize) {
    let pad = |k: usize| "  ".repeat(k);
    match n {
        Node::Num(x) => out.push_str(&format_g9(*x)),
        Node::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Node::Str(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Node::Arr(v) if v.is_empty() => out.push_str("[]"),
        Node::Arr(v) if scalar_array(v) => {
            out.push('[');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_node(out, x, indent);
            }
            out.push(']');
        }
        Node::Arr(v) => {
            out.push_str("[\n");
            for (i, x) in v.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_node(out, x, indent + 1);
                out.push_str(if i + 1 < v.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Node::Obj(m) if m.is_empty() => out.push_str("{}"),
        Node::Obj(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                let _ = write!(out, "{}\"{k}\": ", pad(indent + 1));
                write_node(out, x, indent + 1);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical text: sorted keys, two-space indent, numbers as `%.9g`.
pub fn emit_scene(scene: &Scene) -> String {
    let mut s = String::new();
    write_node(&mut s, &scene_node(scene), 0);
    s.push('\n');
    s
}
