//! Built-in experiment definitions, one per headline scan or identity
//! battery. Every preset is an ordinary config value, so `preset <id>` and
//! `run <file>` share one code path.

use crate::config::{
    BallKindName, BallSection, CenterSection, ExperimentConfig, ModeAmplitude, ModelSection,
    ModelVariant, OutputSection, SamplerMethod, SamplerSection, Task, TorusSection,
    TruncationSection,
};

pub const PRESET_IDS: [&str; 8] = [
    "om1d",
    "om2d-enhanced",
    "omP2",
    "degeneracy3d",
    "wickcube-log",
    "joint-limit",
    "third-order",
    "oracle-suite",
];

fn center(modes: &[([i32; 2], f64)]) -> CenterSection {
    CenterSection {
        modes: modes
            .iter()
            .map(|&(k, amplitude)| ModeAmplitude {
                k: k.to_vec(),
                amplitude,
            })
            .collect(),
    }
}

fn center3(modes: &[([i32; 3], f64)]) -> CenterSection {
    CenterSection {
        modes: modes
            .iter()
            .map(|&(k, amplitude)| ModeAmplitude {
                k: k.to_vec(),
                amplitude,
            })
            .collect(),
    }
}

fn center1(modes: &[(i32, f64)]) -> CenterSection {
    CenterSection {
        modes: modes
            .iter()
            .map(|&(k, amplitude)| ModeAmplitude {
                k: vec![k],
                amplitude,
            })
            .collect(),
    }
}

fn sampler(method: SamplerMethod, count: u64, burn_in: u32, seed: u64) -> SamplerSection {
    SamplerSection {
        method,
        count,
        counts: Vec::new(),
        burn_in,
        thin: 4,
        chunks: 64,
        seed,
    }
}

pub fn preset(id: &str) -> Option<ExperimentConfig> {
    let cfg = match id {
        // Quartic line measure, Hoelder ball, amplitudes with equal H1 mass
        // so the finite-radius offset cancels between the centers.
        "om1d" => ExperimentConfig {
            experiment: "om1d".into(),
            task: Task::RatioScan,
            torus: TorusSection {
                dimension: 1,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 32 },
            model: ModelSection {
                variant: ModelVariant::QuarticLine,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![center1(&[(1, 1.0)]), center1(&[(2, 0.5)])],
            ball: BallSection {
                kind: BallKindName::Besov,
                alpha: Some(0.25),
                kappa: None,
                degree: None,
                n_set: vec![],
                radii: vec![0.4, 0.2, 0.1, 0.05],
            },
            sampler: sampler(SamplerMethod::Chain, 1_000_000, 3000, 1),
            output: OutputSection::default(),
        },
        // Wick quartic on the plane with the three-power enhanced ball.
        // Same-shell centers make the two finite-radius offsets track each
        // other, so the gap shrinks with the radius even though the ball
        // cannot pin individual modes the way a 1d Hoelder ball does.
        "om2d-enhanced" => ExperimentConfig {
            experiment: "om2d-enhanced".into(),
            task: Task::RatioScan,
            torus: TorusSection {
                dimension: 2,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 16 },
            model: ModelSection {
                variant: ModelVariant::PolynomialPlane,
                coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
                counterterm_scale: 1.0,
            },
            centers: vec![
                center(&[([4, 0], 0.039_788_735_772_973_84)]),
                center(&[([0, 4], 0.038_576_610_591_741_16)]),
            ],
            ball: BallSection {
                kind: BallKindName::EnhancedP,
                alpha: Some(0.3),
                kappa: Some(0.2),
                degree: Some(4),
                n_set: vec![],
                radii: vec![1.6, 1.1, 0.8, 0.55],
            },
            sampler: sampler(SamplerMethod::Chain, 50_000, 2000, 2),
            output: OutputSection::default(),
        },
        // Sextic polynomial measure on the plane, plain Besov ball.
        "omP2" => ExperimentConfig {
            experiment: "omP2".into(),
            task: Task::RatioScan,
            torus: TorusSection {
                dimension: 2,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 8 },
            model: ModelSection {
                variant: ModelVariant::PolynomialPlane,
                coeffs: vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.05],
                counterterm_scale: 1.0,
            },
            centers: vec![
                center(&[([1, 0], 0.12)]),
                center(&[([0, 1], 0.09)]),
            ],
            ball: BallSection {
                kind: BallKindName::Besov,
                alpha: Some(-0.3),
                kappa: None,
                degree: None,
                n_set: vec![],
                radii: vec![1.2, 0.9, 0.7, 0.5],
            },
            sampler: sampler(SamplerMethod::Chain, 300_000, 2000, 3),
            output: OutputSection::default(),
        },
        // Level-cube measures against a shared enhanced level ball: the
        // uncompensated cutoff family and its logarithmic mass decay.
        "degeneracy3d" => ExperimentConfig {
            experiment: "degeneracy3d".into(),
            task: Task::LevelDecay,
            torus: TorusSection {
                dimension: 3,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 8 },
            model: ModelSection {
                variant: ModelVariant::LevelCube,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![center3(&[([1, 0, 0], 1.0)])],
            ball: BallSection {
                kind: BallKindName::EnhancedLevel,
                alpha: None,
                kappa: Some(0.45),
                degree: None,
                n_set: vec![2, 4, 8],
                // Narrower balls carry no reachable mass at these cutoffs:
                // the conditioned field norm rarely drops below ~1.4.
                radii: vec![2.2],
            },
            sampler: SamplerSection {
                method: SamplerMethod::Chain,
                count: 1_200,
                counts: Vec::new(),
                burn_in: 800,
                thin: 4,
                chunks: 4,
                seed: 4,
            },
            output: OutputSection::default(),
        },
        // Second moment of the cube pairing against the kernel closed form,
        // across cutoffs; the growth is the logarithmic divergence.
        "wickcube-log" => ExperimentConfig {
            experiment: "wickcube-log".into(),
            task: Task::PairMomentGrowth,
            torus: TorusSection {
                dimension: 3,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 8 },
            model: ModelSection {
                variant: ModelVariant::Gff,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![center3(&[([1, 0, 0], 1.0), ([0, 1, 1], 0.5)])],
            ball: BallSection {
                kind: BallKindName::None,
                alpha: None,
                kappa: None,
                degree: None,
                n_set: vec![2, 4, 8],
                radii: vec![],
            },
            sampler: sampler(SamplerMethod::Rejection, 100_000, 0, 5),
            output: OutputSection::default(),
        },
        // Coupled radius and cutoff schedule with the compensated cube
        // condition; centers keep equal level masses at every cutoff.
        "joint-limit" => ExperimentConfig {
            experiment: "joint-limit".into(),
            task: Task::JointLimit,
            torus: TorusSection {
                dimension: 3,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 4 },
            model: ModelSection {
                variant: ModelVariant::LevelCube,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![
                center3(&[([1, 0, 0], 0.4)]),
                center3(&[([1, 1, 0], 0.4)]),
            ],
            ball: BallSection {
                kind: BallKindName::CompensatedLevel,
                alpha: None,
                kappa: Some(0.45),
                degree: None,
                n_set: vec![],
                radii: vec![0.4, 0.2, 0.1],
            },
            sampler: SamplerSection {
                method: SamplerMethod::Chain,
                count: 10_000,
                counts: Vec::new(),
                burn_in: 600,
                thin: 4,
                chunks: 8,
                seed: 6,
            },
            output: OutputSection::default(),
        },
        // Third-difference center combination along the same schedule; the
        // quadratic functionals cancel identically, so no compensation is
        // needed in the ball.
        "third-order" => ExperimentConfig {
            experiment: "third-order".into(),
            task: Task::ThirdOrder,
            torus: TorusSection {
                dimension: 3,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 4 },
            model: ModelSection {
                variant: ModelVariant::LevelCube,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![
                center3(&[([1, 0, 0], 0.3)]),
                center3(&[([1, 1, 0], 0.3)]),
            ],
            ball: BallSection {
                kind: BallKindName::EnhancedLevel,
                alpha: None,
                kappa: Some(0.45),
                degree: None,
                n_set: vec![],
                radii: vec![0.4, 0.2, 0.1],
            },
            sampler: SamplerSection {
                method: SamplerMethod::Chain,
                count: 10_000,
                counts: Vec::new(),
                burn_in: 600,
                thin: 4,
                chunks: 8,
                seed: 7,
            },
            output: OutputSection::default(),
        },
        // Exact identity battery: binomial expansions, kernel moments, and
        // the closed-form Gaussian ball probability.
        "oracle-suite" => ExperimentConfig {
            experiment: "oracle-suite".into(),
            task: Task::OracleSuite,
            torus: TorusSection {
                dimension: 1,
                mass: 0.0,
            },
            truncation: TruncationSection { n: 6 },
            model: ModelSection {
                variant: ModelVariant::Gff,
                coeffs: vec![],
                counterterm_scale: 1.0,
            },
            centers: vec![],
            ball: BallSection {
                kind: BallKindName::None,
                alpha: None,
                kappa: None,
                degree: None,
                n_set: vec![],
                radii: vec![],
            },
            sampler: sampler(SamplerMethod::Rejection, 100, 0, 8),
            output: OutputSection::default(),
        },
        _ => return None,
    };
    Some(cfg)
}
