//! JSON and CSV file formats for systems, symbolic sequences, path specs,
//! phase points and trajectories.
//!
//! Reals are written with 17 significant digits so that every file reloads
//! bit for bit.

use std::io::{self, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::euclid::{EuclideanPathResult, EuclideanPathSpec, SymbolicSequence};
use crate::flow::{FlowFlags, PhasePoint, TrajectoryRecord};
use crate::geometry::Lattice;
use crate::system::{CylinderSpec, CylindricBilliardSystem, Generator};

pub const SYSTEM_FORMAT: &str = "cylbill-system";
pub const SIGMA_FORMAT: &str = "cylbill-sigma";
pub const SPEC_FORMAT: &str = "cylbill-spec";
pub const PHASE_FORMAT: &str = "cylbill-phase";
pub const TRAJECTORY_FORMAT: &str = "cylbill-trajectory";
pub const VERSION: u32 = 1;

/// Pretty JSON with every float printed as `{:.16e}`.
struct ExactFormatter<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
            self.0.$name(w $(, $arg)?)
        })*
    };
}

impl Formatter for ExactFormatter<'_> {
    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        begin_object_value,
        end_object_value
    );

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// Serializes `value` as pretty JSON with 17-digit reals.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Parses JSON, reporting line, column and field path on failure.
pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." || path == "?" { String::new() } else { format!(" at {path}") };
        let msg = inner.to_string();
        let msg = msg.rfind(" at line ").map_or(msg.as_str(), |i| &msg[..i]);
        Error::Parse(format!("line {}, column {}{at}: {msg}", inner.line(), inner.column()))
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn check_format(found: &str, expected: &str, version: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Parse(format!("format is \"{found}\", expected \"{expected}\"")));
    }
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported version {version}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderFile {
    /// Integer coefficients of the generator vectors in the lattice basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_coeffs: Option<Vec<Vec<i64>>>,
    /// Real generator vectors, for systems without an integer description.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_basis: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_note: Option<String>,
    pub radius: f64,
    /// Lattice coordinates in `[0, 1)^d`.
    pub translation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    /// Row-major `d × d`; column `j` is the `j`-th basis vector.
    pub lattice_basis: Vec<Vec<f64>>,
    pub cylinders: Vec<CylinderFile>,
    #[serde(default)]
    pub interior_connected_asserted: bool,
}

impl SystemFile {
    pub fn from_system(system: &CylindricBilliardSystem) -> Self {
        let b = system.lattice().basis();
        let lattice_basis = b.row_iter().map(|r| r.iter().copied().collect()).collect();
        let cylinders = system
            .cylinders()
            .iter()
            .map(|c| {
                let (coeffs, basis, note) = match &c.generator {
                    Generator::Lattice(v) => (Some(v.clone()), None, None),
                    Generator::Real { vectors, note } => (None, Some(vectors.clone()), Some(note.clone())),
                };
                CylinderFile {
                    generator_coeffs: coeffs,
                    generator_basis: basis,
                    generator_note: note,
                    radius: c.radius,
                    translation: c.translation().to_vec(),
                }
            })
            .collect();
        SystemFile {
            format: SYSTEM_FORMAT.into(),
            version: VERSION,
            dim: system.dim(),
            lattice_basis,
            cylinders,
            interior_connected_asserted: system.interior_connected_asserted(),
        }
    }

    pub fn to_system(&self) -> Result<CylindricBilliardSystem> {
        check_format(&self.format, SYSTEM_FORMAT, self.version)?;
        let d = self.dim;
        if d == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        if self.lattice_basis.len() != d {
            return Err(Error::Parse(format!("lattice_basis has {} rows, expected {d}", self.lattice_basis.len())));
        }
        for (r, row) in self.lattice_basis.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse(format!("lattice_basis[{r}] has {} entries, expected {d}", row.len())));
            }
        }
        let basis = DMatrix::from_fn(d, d, |r, c| self.lattice_basis[r][c]);
        let lattice = Lattice::new(basis).map_err(|e| Error::Parse(format!("lattice_basis: {e}")))?;
        let mut cylinders = Vec::with_capacity(self.cylinders.len());
        for (i, c) in self.cylinders.iter().enumerate() {
            let generator = match (&c.generator_coeffs, &c.generator_basis) {
                (Some(coeffs), None) => Generator::Lattice(coeffs.clone()),
                (None, Some(vectors)) => {
                    Generator::Real { vectors: vectors.clone(), note: c.generator_note.clone().unwrap_or_default() }
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "cylinders[{i}]: exactly one of generator_coeffs and generator_basis is required"
                    )))
                }
            };
            if c.translation.len() != d {
                return Err(Error::Parse(format!(
                    "cylinders[{i}].translation has {} entries, expected {d}",
                    c.translation.len()
                )));
            }
            cylinders.push(CylinderSpec::new(generator, c.radius, c.translation.clone()));
        }
        let system = CylindricBilliardSystem::new(lattice, cylinders).map_err(|e| match e {
            Error::InvalidInput(m) => Error::Parse(m.replacen("cylinder ", "cylinders[", 1).replacen(':', "]:", 1)),
            other => other,
        })?;
        Ok(system.with_interior_connected_asserted(self.interior_connected_asserted))
    }
}

pub fn system_to_string(system: &CylindricBilliardSystem) -> Result<String> {
    to_json_string(&SystemFile::from_system(system))
}

pub fn system_from_str(s: &str) -> Result<CylindricBilliardSystem> {
    from_json_str::<SystemFile>(s)?.to_system()
}

pub fn read_system(path: &Path) -> Result<CylindricBilliardSystem> {
    in_file(path, system_from_str(&read_file(path)?))
}

pub fn write_system(path: &Path, system: &CylindricBilliardSystem) -> Result<()> {
    Ok(std::fs::write(path, system_to_string(system)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaFile {
    pub format: String,
    pub version: u32,
    pub labels: Vec<usize>,
}

pub fn sigma_to_string(sigma: &SymbolicSequence) -> Result<String> {
    to_json_string(&SigmaFile { format: SIGMA_FORMAT.into(), version: VERSION, labels: sigma.labels().to_vec() })
}

pub fn sigma_from_str(s: &str, system: &CylindricBilliardSystem) -> Result<SymbolicSequence> {
    let f: SigmaFile = from_json_str(s)?;
    check_format(&f.format, SIGMA_FORMAT, f.version)?;
    SymbolicSequence::new(f.labels, system)
}

pub fn read_sigma(path: &Path, system: &CylindricBilliardSystem) -> Result<SymbolicSequence> {
    in_file(path, sigma_from_str(&read_file(path)?, system))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub format: String,
    pub version: u32,
    pub v0: Vec<f64>,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Offsets in base-space coordinates, one per collision.
    pub offsets: Vec<Vec<f64>>,
}

pub fn spec_to_string(spec: &EuclideanPathSpec) -> Result<String> {
    to_json_string(&SpecFile {
        format: SPEC_FORMAT.into(),
        version: VERSION,
        v0: spec.v0.iter().copied().collect(),
        start: Some(spec.start.iter().copied().collect()),
        offsets: spec.offsets.iter().map(|a| a.iter().copied().collect()).collect(),
    })
}

pub fn spec_from_str(s: &str, system: &CylindricBilliardSystem, sigma: &SymbolicSequence) -> Result<EuclideanPathSpec> {
    let f: SpecFile = from_json_str(s)?;
    check_format(&f.format, SPEC_FORMAT, f.version)?;
    let start = f.start.map_or_else(|| DVector::zeros(system.dim()), DVector::from_vec);
    let offsets = f.offsets.into_iter().map(DVector::from_vec).collect();
    EuclideanPathSpec::new(system, sigma, DVector::from_vec(f.v0), start, offsets)
}

pub fn read_spec(path: &Path, system: &CylindricBilliardSystem, sigma: &SymbolicSequence) -> Result<EuclideanPathSpec> {
    in_file(path, spec_from_str(&read_file(path)?, system, sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseFile {
    pub format: String,
    pub version: u32,
    pub q: Vec<f64>,
    /// Normalized on load.
    pub v: Vec<f64>,
}

pub fn phase_to_string(p: &PhasePoint) -> Result<String> {
    to_json_string(&PhaseFile {
        format: PHASE_FORMAT.into(),
        version: VERSION,
        q: p.q.iter().copied().collect(),
        v: p.v.iter().copied().collect(),
    })
}

pub fn phase_from_str(s: &str, dim: usize) -> Result<PhasePoint> {
    let f: PhaseFile = from_json_str(s)?;
    check_format(&f.format, PHASE_FORMAT, f.version)?;
    if f.q.len() != dim || f.v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: f.q.len().max(f.v.len()) });
    }
    PhasePoint::with_direction(DVector::from_vec(f.q), DVector::from_vec(f.v))
}

pub fn read_phase(path: &Path, dim: usize) -> Result<PhasePoint> {
    in_file(path, phase_from_str(&read_file(path)?, dim))
}

/// Traced Euclidean path, exported with optional rank diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResultFile {
    pub labels: Vec<usize>,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
}

impl PathResultFile {
    pub fn new(sigma: &SymbolicSequence, r: &EuclideanPathResult) -> Self {
        let rows = |v: &[DVector<f64>]| v.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            labels: sigma.labels().to_vec(),
            times: r.times.clone(),
            points: rows(&r.points),
            velocities: rows(&r.velocities),
            normals: rows(&r.normals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub time: f64,
    pub cylinder: usize,
    pub lattice_image: Vec<i64>,
    pub normal: Vec<f64>,
    pub point: Vec<f64>,
    pub velocity_after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub format: String,
    pub version: u32,
    pub initial_q: Vec<f64>,
    pub initial_v: Vec<f64>,
    pub events: Vec<EventRow>,
    pub symbolic: Vec<usize>,
    pub flags: FlowFlags,
    pub stop_error: Option<String>,
    pub final_time: f64,
    pub final_q: Vec<f64>,
    pub final_v: Vec<f64>,
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

impl TrajectoryFile {
    pub fn new(rec: &TrajectoryRecord) -> Self {
        Self {
            format: TRAJECTORY_FORMAT.into(),
            version: VERSION,
            initial_q: vec_of(&rec.initial.q),
            initial_v: vec_of(&rec.initial.v),
            events: rec
                .events
                .iter()
                .map(|e| EventRow {
                    time: e.time,
                    cylinder: e.cylinder,
                    lattice_image: e.lattice_image.clone(),
                    normal: vec_of(&e.normal),
                    point: vec_of(&e.point),
                    velocity_after: vec_of(&e.velocity_after),
                })
                .collect(),
            symbolic: rec.symbolic.labels().to_vec(),
            flags: rec.flags,
            stop_error: rec.stop_error.clone(),
            final_time: rec.final_time,
            final_q: vec_of(&rec.final_phase.q),
            final_v: vec_of(&rec.final_phase.v),
        }
    }
}

pub fn trajectory_to_string(rec: &TrajectoryRecord) -> Result<String> {
    to_json_string(&TrajectoryFile::new(rec))
}

pub fn trajectory_from_str(s: &str) -> Result<TrajectoryFile> {
    let f: TrajectoryFile = from_json_str(s)?;
    check_format(&f.format, TRAJECTORY_FORMAT, f.version)?;
    Ok(f)
}

/// One row per event: `time, cylinder, image_*, point_*, normal_*, velocity_*`.
pub fn trajectory_to_csv(rec: &TrajectoryRecord) -> Result<String> {
    let d = rec.initial.q.len();
    let nu = rec.events.iter().map(|e| e.lattice_image.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string(), "cylinder".to_string()];
    header.extend((0..nu).map(|k| format!("image_{k}")));
    for name in ["point", "normal", "velocity"] {
        header.extend((0..d).map(|k| format!("{name}_{k}")));
    }
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for e in &rec.events {
        let mut row = vec![format!("{:.16e}", e.time), e.cylinder.to_string()];
        row.extend((0..nu).map(|k| e.lattice_image.get(k).map_or(String::new(), |x| x.to_string())));
        for v in [&e.point, &e.normal, &e.velocity_after] {
            row.extend(v.iter().map(|x| format!("{x:.16e}")));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}
