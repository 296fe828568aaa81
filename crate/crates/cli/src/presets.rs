//! Canned experiment configurations behind the fig1..fig4 names.

use std::str::FromStr;

use crate::spec::{ExperimentSpec, Family, OptimizerChoice};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// One 8-vertex dense uniform-weight instance, filter off, with an
    /// exact imaginary-time reference table for step-by-step comparison.
    Fig1,
    /// Three ensembles at n = 16, 100 instances, both optimizers.
    Fig2,
    /// 3-regular pruning sweep over three thresholds and three sizes.
    Fig3,
    /// Spin-glass entropy scan over five sizes with a long iteration
    /// budget so trajectories reach the support switch.
    Fig4,
}

pub const ALL: [Preset; 4] = [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig4];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Preset::Fig1 => {
                "one 8-vertex complete uniform-weight instance, sigmoid filter off, \
                 with an exact imaginary-time reference table"
            }
            Preset::Fig2 => "three_regular+nws+sk at n=16, 100 instances each, varit and adam",
            Preset::Fig3 => "three_regular at n=8,12,16 with pruning thresholds 0.05,0.10,0.15",
            Preset::Fig4 => "sk at n=8..16 for the entropy scan, extended iteration budget",
        }
    }

    pub fn spec(self) -> ExperimentSpec {
        let mut s = ExperimentSpec::default();
        match self {
            Preset::Fig1 => {
                s.ensembles = vec![Family::Complete];
                s.sizes = vec![8];
                s.instances = 1;
                s.varit.use_sigmoid = false;
                s.ite_reference = true;
            }
            Preset::Fig2 => {
                s.ensembles = vec![Family::ThreeRegular, Family::Nws, Family::Sk];
                s.sizes = vec![16];
                s.instances = 100;
                s.optimizer = OptimizerChoice::Both;
            }
            Preset::Fig3 => {
                s.ensembles = vec![Family::ThreeRegular];
                s.sizes = vec![8, 12, 16];
                s.instances = 20;
                s.epsilons = vec![0.05, 0.10, 0.15];
            }
            Preset::Fig4 => {
                s.ensembles = vec![Family::Sk];
                s.sizes = vec![8, 10, 12, 14, 16];
                s.instances = 20;
                // The entropy peak sits where the support mass crosses the
                // switch threshold, so every run must be allowed to get
                // there; the flow needs roughly 25 iterations per qubit.
                s.varit.max_iterations = 1500;
            }
        }
        s
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ALL.iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::bad(format!("unknown preset '{s}' (expected fig1..fig4)")))
    }
}
