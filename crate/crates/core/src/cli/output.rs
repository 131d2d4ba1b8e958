use crate::direct::Field;
use crate::error::Result;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub task: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(scenario: &str, task: &str) -> Self {
        Self {
            scenario: scenario.into(),
            task: task.into(),
            passed: true,
            ..Default::default()
        }
    }

    fn push(&mut self, name: &str, value: f64, threshold: f64, relation: Relation) -> bool {
        assert!(
            self.checks.iter().all(|c| c.name != name),
            "check `{name}` declared twice"
        );
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        };
        self.passed &= pass;
        self.checks.push(Check {
            name: name.into(),
            value,
            threshold,
            relation,
            pass,
        });
        pass
    }

    pub fn at_most(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        self.push(name, value, threshold, Relation::AtMost)
    }

    pub fn at_least(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        self.push(name, value, threshold, Relation::AtLeast)
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn timing(&mut self, name: &str, secs: f64) {
        self.timings.insert(name.into(), secs);
    }
}

/// Shortest decimal that reads back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub enum Cell {
    F(f64),
    U(usize),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.into())
    }
}

/// Collects output files under one directory and records their names.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<Cell>>,
    ) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for row in rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::F(v) => s.push_str(&fmt_f64(*v)),
                    Cell::U(v) => write!(s, "{v}").unwrap(),
                    Cell::S(v) => s.push_str(v),
                }
            }
            s.push('\n');
        }
        self.bytes(name, s.as_bytes())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let mut f = std::fs::File::create(self.dir.join(name))?;
        f.write_all(data)?;
        self.written.push(name.into());
        Ok(())
    }
}

pub const FIELD_MAGIC: &[u8; 8] = b"FRACWAV1";
pub const FIELD_VERSION: u32 = 1;

/// Binary dump of u and u_t on the full space-time grid.
///
/// Layout (little endian): magic, u32 version, u32 dim, u64 nt, u64 n0, u64 n1,
/// then f64 arrays t[nt], x0[n0], x1[n1], u[nt·n0·n1], ut[nt·n0·n1]. n1 = 1 and
/// x1 = [0] on an interval.
pub fn encode_field(fld: &Field) -> Vec<u8> {
    let (x0, x1, dim) = match fld.basis().grid() {
        crate::spectral::SpatialGrid::Line { x } => (x.clone(), vec![0.0], 1u32),
        crate::spectral::SpatialGrid::Plane { x, y } => (x.clone(), y.clone(), 2u32),
    };
    let nodes = fld.grid().nodes();
    let npts = x0.len() * x1.len();
    let mut out =
        Vec::with_capacity(40 + 8 * (nodes.len() + x0.len() + x1.len() + 2 * nodes.len() * npts));
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for n in [nodes.len(), x0.len(), x1.len()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let mut put = |v: &[f64]| {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(&nodes);
    put(&x0);
    put(&x1);
    for i in 0..nodes.len() {
        put(&fld.u_at(i));
    }
    for i in 0..nodes.len() {
        put(&fld.ut_at(i));
    }
    out
}
