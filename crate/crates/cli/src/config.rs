//! Experiment configuration: TOML schema, validation, and conversion into
//! the core types. One file describes one run.

use serde::{Deserialize, Serialize};

use omlab_core::{
    BallKind, Error, FourierField, GibbsModel, GibbsVariant, Mode, ModeTruncation, PlainNorm,
    Result, RngLayout, SamplerOpts, TorusSpec,
};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form id; tags every output row.
    pub experiment: String,
    pub task: Task,
    pub torus: TorusSection,
    pub truncation: TruncationSection,
    pub model: ModelSection,
    #[serde(default)]
    pub centers: Vec<CenterSection>,
    pub ball: BallSection,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Two-center ratio over a shrinking radius family.
    RatioScan,
    /// Fixed radius, growing cutoff: the counterterm-driven decay.
    LevelDecay,
    /// Coupled (r, n) schedule with the compensated cube condition.
    JointLimit,
    /// Third-difference combination along a coupled schedule.
    ThirdOrder,
    /// Cube pairing second moment vs the closed-form kernel sum.
    PairMomentGrowth,
    /// Exact identity battery; rows report worst defects.
    OracleSuite,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TorusSection {
    pub dimension: usize,
    #[serde(default)]
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub n: u32,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: ModelVariant,
    /// polynomial-plane only: a_0..a_{2k}.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<f64>,
    /// level-cube only.
    #[serde(default = "one")]
    pub counterterm_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    Gff,
    QuarticLine,
    PolynomialPlane,
    LevelCube,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    pub modes: Vec<ModeAmplitude>,
}

/// One cosine component: amplitude a contributes a sqrt(2) cos(2 pi k.x).
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub k: Vec<i32>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BallSection {
    pub kind: BallKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_set: Vec<u32>,
    pub radii: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BallKindName {
    Besov,
    Sup,
    SobolevH1,
    EnhancedP,
    EnhancedLevel,
    CompensatedLevel,
    /// Tasks that never test membership.
    None,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Chain,
    Rejection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub method: SamplerMethod,
    /// Recorded states (chain) or proposals (rejection) per table row.
    pub count: u64,
    /// Optional per-radius counts overriding `count` positionally.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<u64>,
    #[serde(default = "default_burn")]
    pub burn_in: u32,
    #[serde(default = "default_thin")]
    pub thin: u32,
    #[serde(default = "default_chunks")]
    pub chunks: u32,
    pub seed: u64,
}

fn default_burn() -> u32 {
    1000
}
fn default_thin() -> u32 {
    4
}
fn default_chunks() -> u32 {
    64
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "results".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

impl ExperimentConfig {
    pub fn torus_spec(&self) -> Result<TorusSpec> {
        TorusSpec::new(self.torus.dimension, self.torus.mass)
    }

    pub fn truncation(&self) -> ModeTruncation {
        ModeTruncation::new(self.truncation.n)
    }

    pub fn model(&self) -> Result<GibbsModel> {
        let variant = match self.model.variant {
            ModelVariant::Gff => GibbsVariant::Gff,
            ModelVariant::QuarticLine => GibbsVariant::Phi4D1,
            ModelVariant::PolynomialPlane => GibbsVariant::PPhi2 {
                coeffs: self.model.coeffs.clone(),
            },
            ModelVariant::LevelCube => GibbsVariant::Phi4D3Level {
                level: self.truncation.n,
                counterterm_scale: self.model.counterterm_scale,
            },
        };
        GibbsModel::new(self.torus_spec()?, self.truncation(), variant)
    }

    /// Center fields at the smallest truncation holding their modes.
    pub fn center_fields(&self) -> Result<Vec<FourierField>> {
        let torus = self.torus_spec()?;
        let d = self.torus.dimension;
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.modes.is_empty() {
                    return Err(Error::InvalidParameter(format!("centers[{i}] has no modes")));
                }
                let mut top = 1u32;
                for m in &c.modes {
                    if m.k.len() != d {
                        return Err(Error::InvalidParameter(format!(
                            "centers[{i}] mode has {} components in dimension {d}",
                            m.k.len()
                        )));
                    }
                    for &ki in &m.k {
                        top = top.max(ki.unsigned_abs());
                    }
                }
                let trunc = ModeTruncation::new(top);
                let mut f = FourierField::zero(torus, trunc);
                for m in &c.modes {
                    let mut k: Mode = [0, 0, 0];
                    k[..d].copy_from_slice(&m.k);
                    let prev = f.coeff(k);
                    f.set_pair(
                        k,
                        prev + omlab_core::Complex64::new(m.amplitude / 2f64.sqrt(), 0.0),
                    )?;
                }
                Ok(f)
            })
            .collect()
    }

    pub fn ball_kind(&self) -> Result<BallKind> {
        let b = &self.ball;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("ball.{what} is required here")))
        };
        Ok(match b.kind {
            BallKindName::Besov => BallKind::Plain {
                norm: PlainNorm::Besov {
                    alpha: need(b.alpha, "alpha")?,
                },
            },
            BallKindName::Sup => BallKind::Plain { norm: PlainNorm::Sup },
            BallKindName::SobolevH1 => BallKind::Plain {
                norm: PlainNorm::SobolevH1,
            },
            BallKindName::EnhancedP => BallKind::EnhancedP {
                alpha: need(b.alpha, "alpha")?,
                degree: b.degree.unwrap_or(4),
            },
            BallKindName::EnhancedLevel => BallKind::Enhanced3d {
                kappa: need(b.kappa, "kappa")?,
                n_set: b.n_set.clone(),
            },
            BallKindName::CompensatedLevel => BallKind::FullyRenorm3d {
                kappa: need(b.kappa, "kappa")?,
                n_set: b.n_set.clone(),
                counterterm_scale: self.model.counterterm_scale,
            },
            BallKindName::None => {
                return Err(Error::InvalidParameter(
                    "this task needs a membership ball".into(),
                ))
            }
        })
    }

    pub fn layout(&self) -> Result<RngLayout> {
        RngLayout::with_chunks(self.sampler.seed, self.sampler.chunks)
    }

    /// Sampler options for table row `i` (positional count override).
    pub fn opts_for_row(&self, i: usize) -> Result<SamplerOpts> {
        let count = *self.sampler.counts.get(i).unwrap_or(&self.sampler.count);
        let layout = self.layout()?;
        Ok(match self.sampler.method {
            SamplerMethod::Rejection => SamplerOpts::rejection(count, layout),
            SamplerMethod::Chain => {
                SamplerOpts::chain(count, self.sampler.burn_in, self.sampler.thin, layout)
            }
        })
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let d = self.torus.dimension;
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("torus.dimension {d}")));
        }
        if self.truncation.n == 0 {
            return Err(Error::InvalidParameter("truncation.n must be positive".into()));
        }
        if self.sampler.count == 0 {
            return Err(Error::InvalidParameter("sampler.count must be positive".into()));
        }
        for (i, &r) in self.ball.radii.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("ball.radii[{i}] = {r}")));
            }
        }
        let centers_needed = match self.task {
            Task::RatioScan | Task::JointLimit | Task::ThirdOrder => 2,
            Task::LevelDecay | Task::PairMomentGrowth => 1,
            Task::OracleSuite => 0,
        };
        if self.centers.len() != centers_needed {
            return Err(Error::InvalidParameter(format!(
                "task {:?} needs exactly {centers_needed} centers, found {}",
                self.task,
                self.centers.len()
            )));
        }
        match self.task {
            Task::RatioScan => {
                if self.ball.radii.is_empty() {
                    return Err(Error::InvalidParameter("ball.radii is empty".into()));
                }
            }
            Task::LevelDecay => {
                if self.ball.radii.len() != 1 {
                    return Err(Error::InvalidParameter(
                        "level decay takes exactly one radius".into(),
                    ));
                }
                if self.ball.n_set.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "level decay needs at least two cutoffs in ball.n_set".into(),
                    ));
                }
            }
            Task::JointLimit | Task::ThirdOrder => {
                if self.ball.radii.is_empty() {
                    return Err(Error::InvalidParameter("ball.radii is empty".into()));
                }
            }
            Task::PairMomentGrowth => {
                if self.ball.n_set.is_empty() {
                    return Err(Error::InvalidParameter(
                        "pair moment growth needs cutoffs in ball.n_set".into(),
                    ));
                }
            }
            Task::OracleSuite => {}
        }
        if !self.ball.radii.is_empty() || centers_needed > 0 {
            self.center_fields()?;
        }
        Ok(())
    }
}

/// Parse, validate, and report the first problem with its field path when
/// the TOML shape is wrong.
pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml_string(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
}
