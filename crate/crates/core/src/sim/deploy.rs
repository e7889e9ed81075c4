use std::fmt;
use std::str::FromStr;

use super::SimError;
use crate::keyrate::Deployment;
use crate::vss::{CorruptionModel, VssConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lab {
    Alice,
    Bob,
    /// Untrusted relay of the MDI setup.
    Charles,
}

impl Lab {
    fn tag(self) -> char {
        match self {
            Lab::Alice => 'A',
            Lab::Bob => 'B',
            Lab::Charles => 'C',
        }
    }

    /// The other end user's lab.
    pub fn peer(self) -> Lab {
        match self {
            Lab::Alice => Lab::Bob,
            Lab::Bob => Lab::Alice,
            Lab::Charles => Lab::Charles,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    QkdModule,
    CpUnit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId {
    pub lab: Lab,
    pub role: Role,
    pub index: usize,
}

impl PartyId {
    pub fn module(lab: Lab, index: usize) -> Self {
        Self { lab, role: Role::QkdModule, index }
    }

    pub fn unit(lab: Lab, index: usize) -> Self {
        Self { lab, role: Role::CpUnit, index }
    }

    pub fn relay() -> Self {
        Self::module(Lab::Charles, 0)
    }

    pub fn is_unit(&self) -> bool {
        self.role == Role::CpUnit
    }
}

/// Short form such as `A.q0` (module) or `B.u3` (unit).
impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::QkdModule => 'q',
            Role::CpUnit => 'u',
        };
        write!(f, "{}.{}{}", self.lab.tag(), role, self.index)
    }
}

impl FromStr for PartyId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SimError::Parse(format!("party {s:?}; expected e.g. A.u0 or B.q1"));
        let (lab, rest) = s.trim().split_once('.').ok_or_else(bad)?;
        let lab = match lab.to_ascii_uppercase().as_str() {
            "A" => Lab::Alice,
            "B" => Lab::Bob,
            "C" => Lab::Charles,
            _ => return Err(bad()),
        };
        let mut chars = rest.chars();
        let role = match chars.next().map(|c| c.to_ascii_lowercase()) {
            Some('q') => Role::QkdModule,
            Some('u') => Role::CpUnit,
            _ => return Err(bad()),
        };
        let index = chars.as_str().parse().map_err(|_| bad())?;
        Ok(Self { lab, role, index })
    }
}

/// Device counts and corruption models of both labs. Each lab has `n_q`
/// QKD modules and `n_c` post-processing units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeploymentConfig {
    pub n_q: usize,
    pub t_q: usize,
    pub n_c: usize,
    pub t_c: usize,
    pub module_model: CorruptionModel,
    pub unit_model: CorruptionModel,
}

impl DeploymentConfig {
    /// Minimal device counts for the given models and bounds: `n_q = t_q + 1`
    /// pairs (two for passive non-collaborative modules) and the smallest
    /// committee the unit model allows.
    pub fn new(module_model: CorruptionModel, t_q: usize, unit_model: CorruptionModel, t_c: usize) -> Result<Self, SimError> {
        let n_q = if module_model == CorruptionModel::PN { 2 } else { t_q + 1 };
        let n_c = VssConfig::new(unit_model, t_c)?.n;
        let cfg = Self { n_q, t_q, n_c, t_c, module_model, unit_model };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One trusted pair and one unit per lab.
    pub fn honest() -> Self {
        Self::new(CorruptionModel::AC, 0, CorruptionModel::AC, 0).expect("valid")
    }

    /// Active collaborative devices with the same bound on both layers.
    pub fn ac(t: usize) -> Self {
        Self::new(CorruptionModel::AC, t, CorruptionModel::AC, t).expect("valid")
    }

    /// Two passive non-collaborative pairs and two passive units per lab.
    pub fn pn() -> Self {
        Self::new(CorruptionModel::PN, 2, CorruptionModel::PN, 2).expect("valid")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidDeployment(msg));
        match self.module_model {
            CorruptionModel::PN => {
                if self.n_q != 2 || self.t_q > 2 {
                    return bad(format!("PN modules need n_q = 2 and t_q <= 2, got n_q = {}, t_q = {}", self.n_q, self.t_q));
                }
            }
            m => {
                if self.n_q != self.t_q + 1 {
                    return bad(format!("{m} modules need n_q = t_q + 1, got n_q = {}, t_q = {}", self.n_q, self.t_q));
                }
            }
        }
        let vss = VssConfig::new(self.unit_model, self.t_c)?;
        if vss.n != self.n_c {
            return bad(format!("{} units with t_c = {} need n_c = {}, got {}", self.unit_model, self.t_c, vss.n, self.n_c));
        }
        Ok(())
    }

    pub fn unit_vss(&self) -> VssConfig {
        VssConfig::new(self.unit_model, self.t_c).expect("validated deployment")
    }

    /// The same deployment as seen by the key-length engine.
    pub fn key_deployment(&self) -> Deployment {
        Deployment {
            qkd_model: self.module_model,
            unit_model: self.unit_model,
            t_q: self.t_q,
            t_c: self.t_c,
            n_q: self.n_q,
        }
    }

    pub fn modules(&self, lab: Lab) -> impl Iterator<Item = PartyId> + Clone {
        (0..self.n_q).map(move |j| PartyId::module(lab, j))
    }

    pub fn units(&self, lab: Lab) -> impl Iterator<Item = PartyId> + Clone {
        (0..self.n_c).map(move |l| PartyId::unit(lab, l))
    }

    pub fn contains(&self, party: PartyId) -> bool {
        match (party.lab, party.role) {
            (Lab::Charles, Role::QkdModule) => party.index == 0,
            (Lab::Charles, Role::CpUnit) => false,
            (_, Role::QkdModule) => party.index < self.n_q,
            (_, Role::CpUnit) => party.index < self.n_c,
        }
    }

    /// Corruption model governing `party`'s layer.
    pub fn model_of(&self, party: PartyId) -> CorruptionModel {
        match party.role {
            Role::QkdModule => self.module_model,
            Role::CpUnit => self.unit_model,
        }
    }
}
