//! Parameter grids over [`SceneConfig`] with table reuse and extremum traces.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_success_table_for, SuccessTable};
use crate::config::{SceneConfig, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::metrics::{analyze, Analysis};
use crate::report::Row;
use crate::sim::{run_simulation, SimOptions, SimResult};

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let axis = Self {
            name: name.into(),
            values,
        };
        axis.check()?;
        Ok(axis)
    }

    /// Inclusive arithmetic range; the end point is kept when it is reached
    /// up to rounding.
    pub fn range(name: impl Into<String>, start: f64, stop: f64, step: f64) -> Result<Self> {
        let name = name.into();
        if !start.is_finite() || !stop.is_finite() || step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::config(name, format!("invalid range {start}:{stop}:{step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        let values = (0..=count)
            .map(|k| {
                let v = start + k as f64 * step;
                // Snap away accumulated rounding, e.g. 0.1 * 3.
                (v * 1e12).round() / 1e12
            })
            .collect();
        Self::new(name, values)
    }

    /// Parse `name=start:stop:step` or `name=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, spec) = text
            .split_once('=')
            .ok_or_else(|| Error::config(text, "expected name=start:stop:step or name=v1,v2,..."))?;
        let name = name.trim();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::config(name, format!("cannot parse `{s}` as a number")))
        };
        if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::config(name, "range must be start:stop:step"));
            }
            Self::range(name, num(parts[0])?, num(parts[1])?, num(parts[2])?)
        } else {
            let values = spec.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Self::new(name, values)
        }
    }

    fn check(&self) -> Result<()> {
        if !PARAM_NAMES.contains(&self.name.as_str()) {
            return Err(Error::config(&self.name, "is not a known parameter"));
        }
        if self.values.is_empty() {
            return Err(Error::config(&self.name, "axis has no values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Throughput,
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Max,
    Min,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SceneConfig,
    /// Outer axis first; the extremum is taken over the last axis.
    pub axes: Vec<Axis>,
    pub objective: Objective,
    pub extremum: Extremum,
    /// Also simulate every point with these options.
    pub simulate: Option<SimOptions>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn new(base: SceneConfig, axes: Vec<Axis>) -> Self {
        Self {
            base,
            axes,
            objective: Objective::Throughput,
            extremum: Extremum::None,
            simulate: None,
            workers: 0,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::config("axes", "a sweep needs one or two axes"));
        }
        for a in &self.axes {
            a.check()?;
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::config("axes", "the two axes must differ"));
        }
        Ok(())
    }

    /// Configurations of the grid in row-major order (outer axis slowest).
    pub fn grid(&self) -> Result<Vec<(Vec<f64>, SceneConfig)>> {
        self.validate()?;
        let mut out = Vec::new();
        let outer = &self.axes[0];
        let inner = self.axes.get(1);
        for &v in &outer.values {
            let inner_values: Vec<Option<f64>> = match inner {
                Some(a) => a.values.iter().map(|&x| Some(x)).collect(),
                None => vec![None],
            };
            for w in inner_values {
                let mut cfg = self.base.clone();
                cfg.set_param(&outer.name, v)?;
                let mut coords = vec![v];
                if let (Some(a), Some(w)) = (inner, w) {
                    cfg.set_param(&a.name, w)?;
                    coords.push(w);
                }
                out.push((coords, cfg));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub config: SceneConfig,
    pub analysis: std::result::Result<Analysis, String>,
    pub sim: Option<std::result::Result<SimResult, String>>,
}

impl SweepPoint {
    pub fn objective(&self, objective: Objective) -> Option<f64> {
        let a = self.analysis.as_ref().ok()?;
        let v = match objective {
            Objective::Throughput => a.perf.t_aggregate,
            Objective::Delay => a.perf.d_total,
        };
        (!v.is_nan()).then_some(v)
    }

    pub fn rows(&self) -> Vec<Row> {
        let mut rows = vec![match &self.analysis {
            Ok(a) => Row::analysis(&self.config, a),
            Err(e) => Row::failure(&self.config, "analysis", e),
        }];
        match &self.sim {
            Some(Ok(s)) => rows.push(Row::simulation(&self.config, s)),
            Some(Err(e)) => rows.push(Row::failure(&self.config, "sim", e)),
            None => {}
        }
        rows
    }
}

/// Best inner-axis value for one outer-axis value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumPoint {
    pub outer: f64,
    pub best: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub extremum: Vec<ExtremumPoint>,
}

/// Build (or load) one table per distinct channel configuration, sized for
/// the largest network that uses it.
fn tables_for(spec: &SweepSpec, grid: &[(Vec<f64>, SceneConfig)]) -> HashMap<Vec<u64>, std::result::Result<Arc<SuccessTable>, String>> {
    let mut groups: HashMap<Vec<u64>, SceneConfig> = HashMap::new();
    for (_, cfg) in grid {
        let entry = groups.entry(cfg.channel_key().bits()).or_insert_with(|| cfg.clone());
        entry.n_ues = entry.n_ues.max(cfg.n_ues);
    }
    let groups: Vec<(Vec<u64>, SceneConfig)> = groups.into_iter().collect();
    groups
        .into_par_iter()
        .map(|(key, cfg)| {
            let built = cfg.validate().and_then(|_| match &spec.cache_dir {
                Some(dir) => SuccessTable::load_or_build(&cfg, dir).map(|(t, _)| t),
                None => build_success_table_for(&cfg, cfg.n_ues),
            });
            (key, built.map(Arc::new).map_err(|e| e.to_string()))
        })
        .collect()
}

fn evaluate(spec: &SweepSpec) -> Result<SweepOutput> {
    let grid = spec.grid()?;
    let tables = tables_for(spec, &grid);
    let points: Vec<SweepPoint> = grid
        .into_par_iter()
        .map(|(coords, cfg)| {
            let table = &tables[&cfg.channel_key().bits()];
            let analysis = table
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|t| analyze(&cfg, t).map_err(|e| e.to_string()));
            let sim = spec.simulate.as_ref().map(|opts| {
                table
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|t| run_simulation(&cfg, t, opts).map_err(|e| e.to_string()))
            });
            SweepPoint {
                coords,
                config: cfg,
                analysis,
                sim,
            }
        })
        .collect();
    let extremum = extremum_trace(&points, spec.objective, spec.extremum);
    Ok(SweepOutput { points, extremum })
}

/// For each outer value, the inner value optimizing the objective. Ties go
/// to the smallest inner value; failed points are skipped.
pub fn extremum_trace(points: &[SweepPoint], objective: Objective, extremum: Extremum) -> Vec<ExtremumPoint> {
    if extremum == Extremum::None {
        return Vec::new();
    }
    let better = |a: f64, b: f64| match extremum {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
        Extremum::None => false,
    };
    let mut order: Vec<f64> = Vec::new();
    let mut best: HashMap<u64, ExtremumPoint> = HashMap::new();
    for p in points {
        let outer = p.coords[0];
        let inner = *p.coords.last().unwrap();
        let Some(v) = p.objective(objective) else {
            continue;
        };
        match best.get_mut(&outer.to_bits()) {
            None => {
                order.push(outer);
                best.insert(
                    outer.to_bits(),
                    ExtremumPoint {
                        outer,
                        best: inner,
                        objective: v,
                    },
                );
            }
            Some(cur) => {
                if better(v, cur.objective) || (v == cur.objective && inner < cur.best) {
                    *cur = ExtremumPoint {
                        outer,
                        best: inner,
                        objective: v,
                    };
                }
            }
        }
    }
    order.into_iter().map(|o| best[&o.to_bits()]).collect()
}

/// Run a sweep. Per-point failures are recorded in the output rather than
/// aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    if spec.workers == 0 {
        return evaluate(spec);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| evaluate(spec))
}

/// Ready-made sweeps for the standard parameter studies.
pub fn preset(name: &str) -> Result<SweepSpec> {
    let base = SceneConfig::default();
    let deg_grid = || Axis::range("theta_rd_deg", 5.0, 60.0, 5.0);
    let quf_grid = || Axis::range("q_uf", 0.0, 1.0, 0.05);
    let n_grid = || Axis::range("n_ues", 1.0, 20.0, 1.0);
    let q_u_set = || Axis::new("q_u", vec![0.1, 0.5, 0.9]);
    let spec = match name {
        "throughput-vs-n" => SweepSpec::new(base, vec![q_u_set()?, n_grid()?]),
        "throughput-vs-n-aligned" => SweepSpec::new(SceneConfig { d_a: 5.0, ..base }, vec![q_u_set()?, n_grid()?]),
        "delay-vs-n" => SweepSpec {
            objective: Objective::Delay,
            ..SweepSpec::new(base, vec![q_u_set()?, n_grid()?])
        },
        "delay-vs-alignment" => SweepSpec {
            objective: Objective::Delay,
            ..SweepSpec::new(
                SceneConfig { q_u: 0.5, ..base },
                vec![Axis::new("q_r", vec![0.6, 0.8, 1.0])?, Axis::range("d_a", 0.0, 10.0, 1.0)?],
            )
        },
        "best-quf-throughput" | "best-quf-throughput-aligned" | "best-quf-delay" | "best-quf-misaligned-5"
        | "best-quf-misaligned-10" => {
            let mut cfg = base;
            if name.ends_with("aligned") {
                cfg.d_a = 5.0;
            }
            if name == "best-quf-misaligned-5" {
                cfg.sigma_e_deg = 5.0;
            }
            if name == "best-quf-misaligned-10" {
                cfg.sigma_e_deg = 10.0;
            }
            let delay = name == "best-quf-delay";
            SweepSpec {
                objective: if delay { Objective::Delay } else { Objective::Throughput },
                extremum: if delay { Extremum::Min } else { Extremum::Max },
                ..SweepSpec::new(cfg, vec![deg_grid()?, quf_grid()?])
            }
        }
        "self-interference" => SweepSpec::new(
            base,
            vec![Axis::new("beta", vec![0.0, 1e-12, 1e-11, 1e-10])?, n_grid()?],
        ),
        "variable-alignment" => {
            let mut cfg = base;
            cfg.theta_bw_f = 10f64.to_radians();
            cfg.alignment = Some(crate::config::CodebookAlignment {
                theta_bw_ap: 10f64.to_radians(),
                ..Default::default()
            });
            SweepSpec {
                objective: Objective::Delay,
                extremum: Extremum::Min,
                ..SweepSpec::new(cfg, vec![Axis::range("theta_rd_deg", 10.0, 60.0, 5.0)?, quf_grid()?])
            }
        }
        other => return Err(Error::config("preset", format!("unknown preset `{other}`"))),
    };
    Ok(spec)
}

pub const PRESETS: &[&str] = &[
    "throughput-vs-n",
    "throughput-vs-n-aligned",
    "delay-vs-n",
    "delay-vs-alignment",
    "best-quf-throughput",
    "best-quf-throughput-aligned",
    "best-quf-delay",
    "best-quf-misaligned-5",
    "best-quf-misaligned-10",
    "self-interference",
    "variable-alignment",
];
