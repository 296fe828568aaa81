//! Experiment description: which instances to build and how to run them,
//! round-trippable through a flat key=value config file so a run directory
//! documents itself.

use std::fmt;
use std::str::FromStr;

use varqite::{AdamConfig, Convention, RankOrder, VarItConfig};

use crate::CliError;

/// Instance families the driver can generate. `Complete` is the dense
/// uniform-weight family used by the reference-comparison preset and maps
/// to the custom tag in graph files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ThreeRegular,
    Nws,
    Sk,
    Complete,
}

impl Family {
    pub fn tag(self) -> u64 {
        match self {
            Family::ThreeRegular => 1,
            Family::Nws => 2,
            Family::Sk => 3,
            Family::Complete => 4,
        }
    }

    pub fn default_convention(self) -> Convention {
        match self {
            Family::Sk => Convention::Physics,
            _ => Convention::ComputerScience,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ThreeRegular => "three_regular",
            Family::Nws => "nws",
            Family::Sk => "sk",
            Family::Complete => "complete",
        })
    }
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "three_regular" => Ok(Family::ThreeRegular),
            "nws" => Ok(Family::Nws),
            "sk" => Ok(Family::Sk),
            "complete" => Ok(Family::Complete),
            other => Err(CliError::bad(format!(
                "unknown ensemble '{other}' (expected three_regular, nws, sk or complete)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerChoice {
    Varit,
    Adam,
    Both,
}

impl OptimizerChoice {
    pub fn runs_varit(self) -> bool {
        self != OptimizerChoice::Adam
    }

    pub fn runs_adam(self) -> bool {
        self != OptimizerChoice::Varit
    }
}

impl fmt::Display for OptimizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerChoice::Varit => "varit",
            OptimizerChoice::Adam => "adam",
            OptimizerChoice::Both => "both",
        })
    }
}

impl FromStr for OptimizerChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "varit" => Ok(OptimizerChoice::Varit),
            "adam" => Ok(OptimizerChoice::Adam),
            "both" => Ok(OptimizerChoice::Both),
            other => Err(CliError::bad(format!(
                "unknown optimizer '{other}' (expected varit, adam or both)"
            ))),
        }
    }
}

/// Cost convention, with `default` deferring to the per-family rule
/// (spin-glass costs for sk, cut-counting otherwise).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConventionChoice {
    Default,
    Fixed(Convention),
}

impl ConventionChoice {
    pub fn resolve(self, family: Family) -> Convention {
        match self {
            ConventionChoice::Default => family.default_convention(),
            ConventionChoice::Fixed(c) => c,
        }
    }
}

impl fmt::Display for ConventionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConventionChoice::Default => f.write_str("default"),
            ConventionChoice::Fixed(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for ConventionChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "default" => Ok(ConventionChoice::Default),
            other => other
                .parse::<Convention>()
                .map(ConventionChoice::Fixed)
                .map_err(|_| {
                    CliError::bad(format!(
                        "unknown convention '{other}' (expected default, physics or cs)"
                    ))
                }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub ensembles: Vec<Family>,
    pub sizes: Vec<usize>,
    pub instances: usize,
    pub epsilons: Vec<f64>,
    pub optimizer: OptimizerChoice,
    pub master_seed: u64,
    pub convention: ConventionChoice,
    /// Also evolve each instance by exact normalized imaginary-time steps
    /// and write a per-iteration comparison table.
    pub ite_reference: bool,
    pub varit: VarItConfig,
    pub adam: AdamConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            ensembles: vec![Family::ThreeRegular],
            sizes: vec![12],
            instances: 20,
            epsilons: vec![0.0],
            optimizer: OptimizerChoice::Varit,
            master_seed: 1,
            convention: ConventionChoice::Default,
            ite_reference: false,
            varit: VarItConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.ensembles.is_empty() {
            return Err(CliError::bad("at least one ensemble required"));
        }
        if self.sizes.is_empty() {
            return Err(CliError::bad("at least one size required"));
        }
        for &n in &self.sizes {
            if n < 2 || n > 20 {
                return Err(CliError::bad(format!("size {n} outside the supported 2..=20")));
            }
            if n % 2 != 0 {
                return Err(CliError::bad(format!(
                    "size {n} is odd; sizes must be even for the half/half entropy split"
                )));
            }
        }
        if self.instances == 0 {
            return Err(CliError::bad("instance count must be positive"));
        }
        if self.epsilons.is_empty() {
            return Err(CliError::bad("at least one pruning threshold required"));
        }
        for &e in &self.epsilons {
            if !e.is_finite() || e < 0.0 {
                return Err(CliError::bad(format!("pruning threshold {e} must be >= 0")));
            }
        }
        self.varit.validate().map_err(CliError::from_core)?;
        self.adam.validate().map_err(CliError::from_core)?;
        Ok(())
    }

    /// The config file image of this spec. Parsing it back reproduces the
    /// spec, so run directories carry their own provenance.
    pub fn to_config_text(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        out.push_str("[experiment]\n");
        out.push_str(&format!(
            "ensemble = {}\n",
            self.ensembles.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
        ));
        out.push_str(&format!(
            "sizes = {}\n",
            self.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
        ));
        out.push_str(&format!("instances = {}\n", self.instances));
        out.push_str(&format!("epsilon = {}\n", list(&self.epsilons)));
        out.push_str(&format!("optimizer = {}\n", self.optimizer));
        out.push_str(&format!("seed = {}\n", self.master_seed));
        out.push_str(&format!("convention = {}\n", self.convention));
        out.push_str(&format!("ite_reference = {}\n", self.ite_reference));
        out.push_str("\n[varit]\n");
        out.push_str(&format!("dtau = {}\n", self.varit.dtau));
        out.push_str(&format!("svd_cutoff_ratio = {}\n", self.varit.svd_cutoff_ratio));
        out.push_str(&format!("max_iterations = {}\n", self.varit.max_iterations));
        out.push_str(&format!("switch_threshold = {}\n", self.varit.switch_threshold));
        out.push_str(&format!("probability_floor = {}\n", self.varit.probability_floor));
        out.push_str(&format!("use_sigmoid = {}\n", self.varit.use_sigmoid));
        out.push_str(&format!("halve_g = {}\n", self.varit.halve_g));
        out.push_str(&format!("rank_order = {}\n", self.varit.rank_order));
        out.push_str("\n[adam]\n");
        out.push_str(&format!("learning_rate = {}\n", self.adam.learning_rate));
        out.push_str(&format!("beta1 = {}\n", self.adam.beta1));
        out.push_str(&format!("beta2 = {}\n", self.adam.beta2));
        out.push_str(&format!("eps_hat = {}\n", self.adam.eps_hat));
        out.push_str(&format!("max_iterations = {}\n", self.adam.max_iterations));
        out
    }

    /// Applies `key = value` lines from config text on top of the current
    /// values. Unknown keys and malformed lines are errors; sections route
    /// keys to the right sub-config.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), CliError> {
        #[derive(PartialEq)]
        enum Section {
            Experiment,
            Varit,
            Adam,
        }
        let mut section = Section::Experiment;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::bad(format!("config line {}: {msg}", idx + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name.trim() {
                    "experiment" => Section::Experiment,
                    "varit" => Section::Varit,
                    "adam" => Section::Adam,
                    other => return Err(at(format!("unknown section '{other}'"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            let num = |what: &str| at(format!("bad {what} '{value}'"));
            match section {
                Section::Experiment => match key {
                    "ensemble" => {
                        self.ensembles = value
                            .split(',')
                            .map(|s| s.trim().parse())
                            .collect::<Result<_, _>>()?;
                    }
                    "sizes" => {
                        self.sizes = value
                            .split(',')
                            .map(|s| s.trim().parse().map_err(|_| num("size")))
                            .collect::<Result<_, _>>()?;
                    }
                    "instances" => self.instances = value.parse().map_err(|_| num("count"))?,
                    "epsilon" => {
                        self.epsilons = value
                            .split(',')
                            .map(|s| s.trim().parse().map_err(|_| num("threshold")))
                            .collect::<Result<_, _>>()?;
                    }
                    "optimizer" => self.optimizer = value.parse()?,
                    "seed" => self.master_seed = value.parse().map_err(|_| num("seed"))?,
                    "convention" => self.convention = value.parse()?,
                    "ite_reference" => {
                        self.ite_reference = value.parse().map_err(|_| num("flag"))?
                    }
                    other => return Err(at(format!("unknown experiment key '{other}'"))),
                },
                Section::Varit => match key {
                    "dtau" => self.varit.dtau = value.parse().map_err(|_| num("step"))?,
                    "svd_cutoff_ratio" => {
                        self.varit.svd_cutoff_ratio = value.parse().map_err(|_| num("ratio"))?
                    }
                    "max_iterations" => {
                        self.varit.max_iterations = value.parse().map_err(|_| num("count"))?
                    }
                    "switch_threshold" => {
                        self.varit.switch_threshold = value.parse().map_err(|_| num("threshold"))?
                    }
                    "probability_floor" => {
                        self.varit.probability_floor = value.parse().map_err(|_| num("floor"))?
                    }
                    "use_sigmoid" => {
                        self.varit.use_sigmoid = value.parse().map_err(|_| num("flag"))?
                    }
                    "halve_g" => self.varit.halve_g = value.parse().map_err(|_| num("flag"))?,
                    "rank_order" => {
                        self.varit.rank_order =
                            value.parse::<RankOrder>().map_err(CliError::from_core)?
                    }
                    other => return Err(at(format!("unknown varit key '{other}'"))),
                },
                Section::Adam => match key {
                    "learning_rate" => {
                        self.adam.learning_rate = value.parse().map_err(|_| num("rate"))?
                    }
                    "beta1" => self.adam.beta1 = value.parse().map_err(|_| num("decay"))?,
                    "beta2" => self.adam.beta2 = value.parse().map_err(|_| num("decay"))?,
                    "eps_hat" => self.adam.eps_hat = value.parse().map_err(|_| num("shift"))?,
                    "max_iterations" => {
                        self.adam.max_iterations = value.parse().map_err(|_| num("count"))?
                    }
                    other => return Err(at(format!("unknown adam key '{other}'"))),
                },
            }
        }
        Ok(())
    }
}

/// splitmix64 finalizer. The seed chain below is part of the on-disk
/// contract: manifests name instance seeds, so this function must never
/// change.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Instance seeds chain the master seed through the family tag, the size
/// and the index: s0 = mix(master), s1 = mix(s0 ^ tag), s2 = mix(s1 ^ n),
/// seed = mix(s2 ^ index), with mix = splitmix64.
pub fn instance_seed(master: u64, family: Family, n: usize, index: usize) -> u64 {
    let s0 = splitmix64(master);
    let s1 = splitmix64(s0 ^ family.tag());
    let s2 = splitmix64(s1 ^ n as u64);
    splitmix64(s2 ^ index as u64)
}

/// Bipartition seed for entropy analysis, one hop past the instance seed so
/// the two streams never collide.
pub fn partition_seed(instance: u64) -> u64 {
    splitmix64(instance ^ 0x5CA1_AB1E_0B1A_5E5D)
}
