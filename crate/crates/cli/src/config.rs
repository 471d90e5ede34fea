use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use bevinst::assoc::{AssocConfig, AssocMode};
use bevinst::sim::{EgoProfile, NoiseConfig, ScenarioConfig};
use bevinst::{GridSpec, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// 200 x 200 cells at 0.5 m.
    Long,
    /// 200 x 200 cells at 0.15 m.
    Short,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Long => "long",
            Preset::Short => "short",
        }
    }

    pub fn grid(&self) -> GridSpec {
        match self {
            Preset::Long => GridSpec::long_range(Pose2D::identity()),
            Preset::Short => GridSpec::short_range(Pose2D::identity()),
        }
    }

    pub fn scenario(&self, agents: usize, frames: usize, seed: u64) -> ScenarioConfig {
        match self {
            Preset::Long => ScenarioConfig::long_range(agents, frames, seed),
            Preset::Short => ScenarioConfig::short_range(agents, frames, seed),
        }
    }

    pub fn assoc(&self, mode: AssocMode) -> AssocConfig {
        match self {
            Preset::Long => AssocConfig::long_range(mode),
            Preset::Short => AssocConfig::short_range(mode),
        }
    }

    /// Preset whose grid matches `spec` in size and resolution.
    pub fn from_grid(spec: &GridSpec) -> Option<Self> {
        [Preset::Long, Preset::Short].into_iter().find(|p| {
            let g = p.grid();
            g.shape() == spec.shape() && g.resolution == spec.resolution
        })
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Preset::Long),
            "short" => Ok(Preset::Short),
            other => bail!("unknown preset `{other}` (expected long or short)"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One experiment: scene generation, labelling, corruption and association settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Observed frames including the present one.
    pub t_in: usize,
    /// Predicted frames.
    pub t_out: usize,
    pub agents: usize,
    pub ego_profile: EgoProfile,
    pub noise: NoiseConfig,
    pub mode: AssocMode,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            t_in: 3,
            t_out: 4,
            agents: 10,
            ego_profile: EgoProfile::Straight,
            noise: NoiseConfig::none(),
            mode: AssocMode::Warp,
            seeds: (0..5).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_in < 2 {
            bail!("--tin must be at least 2 (the present frame needs a predecessor)");
        }
        if self.t_out < 1 {
            bail!("--tout must be at least 1");
        }
        self.noise.validate()?;
        Ok(())
    }

    /// Scenario frames needed: the observed ones, the predicted ones and one more
    /// for the last forward flow.
    pub fn num_frames(&self) -> usize {
        self.t_in + self.t_out + 1
    }

    /// Index of the present frame within the scenario.
    pub fn present(&self) -> usize {
        self.t_in - 1
    }

    pub fn scenario(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            ego_profile: self.ego_profile,
            ..self.preset.scenario(self.agents, self.num_frames(), seed)
        }
    }

    pub fn assoc(&self) -> AssocConfig {
        self.preset.assoc(self.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_geometry() {
        let long = Preset::Long.grid();
        assert_eq!((long.shape(), long.resolution), ((200, 200), 0.5));
        let short = Preset::Short.grid();
        assert_eq!((short.shape(), short.resolution), ((200, 200), 0.15));
        assert_eq!(Preset::Long.assoc(AssocMode::Warp).pool_kernel, 23);
        assert_eq!(Preset::Short.assoc(AssocMode::Hm).pool_kernel, 7);
        assert_eq!(Preset::from_grid(&short), Some(Preset::Short));
    }

    #[test]
    fn default_horizons() {
        let cfg = ExperimentConfig::new(Preset::Long);
        assert_eq!(
            (cfg.t_in, cfg.t_out, cfg.num_frames(), cfg.present()),
            (3, 4, 8, 2)
        );
        assert!(cfg.seeds.len() >= 5);
        assert!(ExperimentConfig {
            t_in: 1,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!("medium".parse::<Preset>().is_err());
    }
}
