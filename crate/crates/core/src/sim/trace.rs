//! Scenario trace and its file formats.
//!
//! | file               | columns |
//! |--------------------|---------|
//! | `ego.csv`          | `t,x,y,heading,speed,mode,intersection` |
//! | `neighbors.csv`    | `t,id,x,y` |
//! | `measurements.csv` | `t,id,x_true,y_true,x_m,y_m,x,x_lower,x_upper,sampled,v_nom,v_upper,v_lower` |
//! | `decisions.csv`    | `t,intersection,neighbor_id,d_v1,d_v2,verdict,x_N,v_upper` |
//! | `distances.csv`    | `t,id,distance` |
//! | `summary.toml`     | totals |
//!
//! Missing values are empty fields. Floats use Rust's shortest
//! round-trip formatting, so output is locale-independent and stable.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conflict::DecisionEvent;
use crate::error::{Error, Result};

pub const EGO_HEADER: &str = "t,x,y,heading,speed,mode,intersection";
pub const NEIGHBORS_HEADER: &str = "t,id,x,y";
pub const MEASUREMENTS_HEADER: &str =
    "t,id,x_true,y_true,x_m,y_m,x,x_lower,x_upper,sampled,v_nom,v_upper,v_lower";
pub const DECISIONS_HEADER: &str = "t,intersection,neighbor_id,d_v1,d_v2,verdict,x_N,v_upper";
pub const DISTANCES_HEADER: &str = "t,id,distance";

#[derive(Debug, Clone, PartialEq)]
pub struct EgoRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub mode: &'static str,
    /// Intersection being approached, waited at or traversed.
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRow {
    pub t: f64,
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub t: f64,
    pub id: String,
    /// True body-frame position.
    pub x_true: f64,
    pub y_true: f64,
    pub x_m: f64,
    pub y_m: f64,
    /// Computed depth and its bounds.
    pub x: f64,
    pub x_lower: Option<f64>,
    pub x_upper: f64,
    /// A closing-speed sample was taken on this frame.
    pub sampled: bool,
    pub v_nom: Option<f64>,
    pub v_upper: Option<f64>,
    pub v_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub intersection: usize,
    pub event: DecisionEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub t: f64,
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSummary {
    pub index: usize,
    pub arrived_at_s: Option<f64>,
    pub proceeded_at_s: Option<f64>,
    pub wait_s: f64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub completed: bool,
    pub seed: u64,
    pub end_time_s: f64,
    pub ticks: u64,
    pub frames: u64,
    /// Closing-speed samples across all neighbors.
    pub samples: u64,
    pub decisions: u64,
    pub total_wait_s: f64,
    pub min_separation_m: Option<f64>,
    pub min_separation_t_s: Option<f64>,
    pub min_separation_id: Option<String>,
    pub intersection: Vec<IntersectionSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub ego: Vec<EgoRow>,
    pub neighbors: Vec<NeighborRow>,
    pub measurements: Vec<MeasurementRow>,
    pub decisions: Vec<DecisionRow>,
    pub distances: Vec<DistanceRow>,
    pub summary: Summary,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScenarioTrace {
    pub fn ego_csv(&self) -> String {
        let mut s = format!("{EGO_HEADER}\n");
        for r in &self.ego {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.t, r.x, r.y, r.heading, r.speed, r.mode, r.intersection
            );
        }
        s
    }

    pub fn neighbors_csv(&self) -> String {
        let mut s = format!("{NEIGHBORS_HEADER}\n");
        for r in &self.neighbors {
            let _ = writeln!(s, "{},{},{},{}", r.t, r.id, r.x, r.y);
        }
        s
    }

    pub fn measurements_csv(&self) -> String {
        let mut s = format!("{MEASUREMENTS_HEADER}\n");
        for r in &self.measurements {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.id,
                r.x_true,
                r.y_true,
                r.x_m,
                r.y_m,
                r.x,
                opt(r.x_lower),
                r.x_upper,
                u8::from(r.sampled),
                opt(r.v_nom),
                opt(r.v_upper),
                opt(r.v_lower)
            );
        }
        s
    }

    pub fn decisions_csv(&self) -> String {
        let mut s = format!("{DECISIONS_HEADER}\n");
        for r in &self.decisions {
            let e = &r.event;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e.t,
                r.intersection,
                e.neighbor.as_deref().unwrap_or(""),
                e.decision.d_v1,
                e.decision.d_v2,
                e.decision.verdict.as_str(),
                opt(e.x_n),
                opt(e.v_upper)
            );
        }
        s
    }

    pub fn distances_csv(&self) -> String {
        let mut s = format!("{DISTANCES_HEADER}\n");
        for r in &self.distances {
            let _ = writeln!(s, "{},{},{}", r.t, r.id, r.distance);
        }
        s
    }

    pub fn summary_toml(&self) -> String {
        toml::to_string(&self.summary).expect("summary serialises")
    }

    /// Every output file as `(name, contents)`.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("ego.csv", self.ego_csv()),
            ("neighbors.csv", self.neighbors_csv()),
            ("measurements.csv", self.measurements_csv()),
            ("decisions.csv", self.decisions_csv()),
            ("distances.csv", self.distances_csv()),
            ("summary.toml", self.summary_toml()),
        ]
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for (name, body) in self.files() {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            f.write_all(body.as_bytes())?;
        }
        Ok(())
    }
}
