//! Instance specifications: explicit measures, measure files and hard-instance generators.

use std::path::{Path, PathBuf};

use reptest::hard_instances::{draw_closeness_hard, draw_meta_hc, draw_meta_hu, draw_uniformity_hard, ClosenessHardParams, UniformityHardParams};
use reptest::{Measure2d, NonNegativeMeasure, RngStream};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum Instance1d {
    Uniform { n: usize },
    Zipf { n: usize, s: f64 },
    PointMass { n: usize, bucket: usize },
    /// Uniform on the first half of `[n]`.
    HalfSupport { n: usize },
    Masses { masses: Vec<f64> },
    /// JSON file holding an array of masses.
    File { path: PathBuf },
    /// A draw from `M_ξ`; with `xi` absent, `ξ ~ U[0, ε]` first.
    HardUniformity { n: usize, epsilon: f64, xi: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum PairInstance {
    Pair { p: Instance1d, q: Instance1d },
    /// A draw from `N_ξ`; with `xi` absent, `ξ ~ U[0, ε]` first.
    HardCloseness { n: usize, m: usize, epsilon: f64, xi: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum Instance2d {
    Uniform { rows: usize, cols: usize },
    Diagonal { n: usize },
    Product { row: Instance1d, col: Instance1d },
    Masses { rows: usize, cols: usize, masses: Vec<f64> },
    /// JSON file holding `{"rows": .., "cols": .., "masses": [..]}` in row-major order.
    File { path: PathBuf },
}

/// One concrete instance, with `ξ` when it came from a hard-instance generator.
#[derive(Clone, Debug)]
pub struct Drawn<T> {
    pub value: T,
    pub xi: Option<f64>,
}

fn check_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("referenced file {} does not exist", path.display())))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

impl Instance1d {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            Instance1d::File { path } => check_file(path),
            Instance1d::HardUniformity { n, epsilon, xi } => {
                UniformityHardParams::new(*n, *epsilon, xi.unwrap_or(0.0))?;
                Ok(())
            }
            _ => self.fixed().map(|_| ()),
        }
    }

    /// Replaces file references by their contents.
    pub fn load(&self) -> CliResult<Self> {
        match self {
            Instance1d::File { path } => {
                let masses: Vec<f64> = read_json(path)?;
                Ok(Instance1d::Masses { masses })
            }
            other => Ok(other.clone()),
        }
    }

    fn fixed(&self) -> CliResult<NonNegativeMeasure> {
        Ok(match self {
            Instance1d::Uniform { n } => NonNegativeMeasure::uniform(*n)?,
            Instance1d::Zipf { n, s } => NonNegativeMeasure::zipf(*n, *s)?,
            Instance1d::PointMass { n, bucket } => NonNegativeMeasure::point_mass(*n, *bucket)?,
            Instance1d::HalfSupport { n } => {
                let half = n.div_ceil(2);
                NonNegativeMeasure::new((0..*n).map(|i| if i < half { 1.0 / half as f64 } else { 0.0 }).collect())?
            }
            Instance1d::Masses { masses } => NonNegativeMeasure::new(masses.clone())?,
            Instance1d::File { path } => NonNegativeMeasure::new(read_json(path)?)?,
            Instance1d::HardUniformity { .. } => unreachable!("hard instances are drawn"),
        })
    }

    /// The measure for one trial; `stream` only matters for hard instances.
    pub fn draw(&self, stream: &RngStream) -> CliResult<Drawn<NonNegativeMeasure>> {
        match self {
            Instance1d::HardUniformity { n, epsilon, xi: Some(xi) } => {
                let params = UniformityHardParams::new(*n, *epsilon, *xi)?;
                Ok(Drawn {
                    value: draw_uniformity_hard(&params, stream),
                    xi: Some(*xi),
                })
            }
            Instance1d::HardUniformity { n, epsilon, xi: None } => {
                let inst = draw_meta_hu(*n, *epsilon, stream)?;
                Ok(Drawn {
                    value: inst.p,
                    xi: Some(inst.params.xi),
                })
            }
            other => Ok(Drawn {
                value: other.fixed()?,
                xi: None,
            }),
        }
    }

    pub fn domain_size(&self) -> CliResult<usize> {
        match self {
            Instance1d::HardUniformity { n, .. } => Ok(*n),
            other => Ok(other.fixed()?.domain_size()),
        }
    }
}

impl PairInstance {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            PairInstance::Pair { p, q } => {
                p.validate()?;
                q.validate()?;
                let (a, b) = (p.domain_size()?, q.domain_size()?);
                if a != b {
                    return Err(reptest::Error::DomainMismatch { left: a, right: b }.into());
                }
                Ok(())
            }
            PairInstance::HardCloseness { n, m, epsilon, xi } => {
                ClosenessHardParams::new(*n, *m, *epsilon, xi.unwrap_or(0.0))?;
                Ok(())
            }
        }
    }

    pub fn load(&self) -> CliResult<Self> {
        match self {
            PairInstance::Pair { p, q } => Ok(PairInstance::Pair { p: p.load()?, q: q.load()? }),
            other => Ok(other.clone()),
        }
    }

    pub fn draw(&self, stream: &RngStream) -> CliResult<Drawn<(NonNegativeMeasure, NonNegativeMeasure)>> {
        use reptest::Role;
        match self {
            PairInstance::Pair { p, q } => {
                let a = p.draw(&stream.derive(Role::Sample1))?;
                let b = q.draw(&stream.derive(Role::Sample2))?;
                Ok(Drawn {
                    xi: a.xi.or(b.xi),
                    value: (a.value, b.value),
                })
            }
            PairInstance::HardCloseness { n, m, epsilon, xi: Some(xi) } => {
                let params = ClosenessHardParams::new(*n, *m, *epsilon, *xi)?;
                Ok(Drawn {
                    value: draw_closeness_hard(&params, stream),
                    xi: Some(*xi),
                })
            }
            PairInstance::HardCloseness { n, m, epsilon, xi: None } => {
                let inst = draw_meta_hc(*n, *m, *epsilon, stream)?;
                Ok(Drawn {
                    value: (inst.p, inst.q),
                    xi: Some(inst.params.xi),
                })
            }
        }
    }
}

#[derive(Deserialize)]
struct Measure2dFile {
    rows: usize,
    cols: usize,
    masses: Vec<f64>,
}

impl Instance2d {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            Instance2d::File { path } => check_file(path),
            _ => self.measure().map(|_| ()),
        }
    }

    pub fn load(&self) -> CliResult<Self> {
        match self {
            Instance2d::File { path } => {
                let f: Measure2dFile = read_json(path)?;
                Ok(Instance2d::Masses {
                    rows: f.rows,
                    cols: f.cols,
                    masses: f.masses,
                })
            }
            other => Ok(other.clone()),
        }
    }

    pub fn measure(&self) -> CliResult<Measure2d> {
        Ok(match self {
            Instance2d::Uniform { rows, cols } => Measure2d::uniform(*rows, *cols)?,
            Instance2d::Diagonal { n } => Measure2d::diagonal(*n)?,
            Instance2d::Product { row, col } => {
                let r = row.fixed()?.normalized()?;
                let c = col.fixed()?.normalized()?;
                Measure2d::product(&r, &c)?
            }
            Instance2d::Masses { rows, cols, masses } => Measure2d::new(*rows, *cols, masses.clone())?,
            Instance2d::File { path } => {
                let f: Measure2dFile = read_json(path)?;
                Measure2d::new(f.rows, f.cols, f.masses)?
            }
        })
    }
}
