//! Shipped experiment configurations.

use crate::acquisitions::{AcquisitionRule, MeanReference};
use crate::kernels::{KernelSpec, MaternNu};
use crate::synthetic::GridSpec;

use super::{ExperimentConfig, PathSampling};

/// A named configuration.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

/// The eight rules of the benchmark comparison.
pub fn benchmark_rules() -> Vec<AcquisitionRule> {
    vec![
        AcquisitionRule::Eims,
        AcquisitionRule::Ucb,
        AcquisitionRule::IrgpUcb,
        AcquisitionRule::Ts,
        AcquisitionRule::Mes { mc_samples: 10 },
        AcquisitionRule::Pims,
        AcquisitionRule::Ei,
        AcquisitionRule::EiMuMax { reference: MeanReference::GlobalMean },
    ]
}

fn desk() -> ExperimentConfig {
    ExperimentConfig {
        name: "desk".into(),
        master_seed: 0,
        trials: 16,
        horizon: 100,
        noise_sd: 0.1,
        init_count: Some(4),
        path_sampling: PathSampling::Auto,
        rff_features: 1024,
        delta: 0.05,
        output_dir: None,
        grid: GridSpec::uniform(2, 20, 0.05),
        kernel: KernelSpec::squared_exponential(0.2, 2).expect("valid kernel"),
        rules: benchmark_rules(),
    }
}

fn desk_matern() -> ExperimentConfig {
    ExperimentConfig {
        name: "desk-matern".into(),
        kernel: KernelSpec::matern(MaternNu::FiveHalves, 0.2, 2).expect("valid kernel"),
        ..desk()
    }
}

fn full() -> ExperimentConfig {
    ExperimentConfig {
        name: "full".into(),
        horizon: 200,
        init_count: Some(16),
        path_sampling: PathSampling::Fourier,
        grid: GridSpec::uniform(4, 10, 0.1),
        kernel: KernelSpec::squared_exponential(0.2, 4).expect("valid kernel"),
        ..desk()
    }
}

/// All shipped presets.
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "desk",
            description: "2-d grid of 400 points, SE kernel, 16 trials of 100 rounds",
            config: desk(),
        },
        Preset {
            name: "desk-matern",
            description: "desk with a Matern-5/2 kernel",
            config: desk_matern(),
        },
        Preset {
            name: "full",
            description: "4-d grid of 10^4 points, SE kernel, 16 trials of 200 rounds, RFF sampling",
            config: full(),
        },
    ]
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    presets().into_iter().find(|p| p.name == name).map(|p| p.config)
}
