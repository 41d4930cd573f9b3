//! Vocabulary shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VehicleType {
    #[serde(rename = "AV")]
    Av,
    #[serde(rename = "HDV")]
    Hdv,
}

impl VehicleType {
    pub const ALL: [VehicleType; 2] = [VehicleType::Av, VehicleType::Hdv];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleType::Av => "AV",
            VehicleType::Hdv => "HDV",
        }
    }
}

impl fmt::Display for VehicleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "AV" | "av" => Ok(VehicleType::Av),
            "HDV" | "hdv" => Ok(VehicleType::Hdv),
            other => Err(format!("unknown vehicle type `{other}` (expected AV or HDV)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Active,
    Passive,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Active, Role::Passive];

    pub fn index(self) -> usize {
        match self {
            Role::Active => 0,
            Role::Passive => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Active => "active",
            Role::Passive => "passive",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "active" => Ok(Role::Active),
            "passive" => Ok(Role::Passive),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// A vehicle's own type together with its opponent's type.
///
/// The first three variants carry fitted utility coefficients; `AvVsAv`
/// only ever appears through imputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionType {
    AvVsHdv,
    HdvVsAv,
    HdvVsHdv,
    AvVsAv,
}

impl InteractionType {
    pub const FITTED: [InteractionType; 3] = [
        InteractionType::AvVsHdv,
        InteractionType::HdvVsAv,
        InteractionType::HdvVsHdv,
    ];

    pub fn of(own: VehicleType, opponent: VehicleType) -> Self {
        match (own, opponent) {
            (VehicleType::Av, VehicleType::Hdv) => InteractionType::AvVsHdv,
            (VehicleType::Hdv, VehicleType::Av) => InteractionType::HdvVsAv,
            (VehicleType::Hdv, VehicleType::Hdv) => InteractionType::HdvVsHdv,
            (VehicleType::Av, VehicleType::Av) => InteractionType::AvVsAv,
        }
    }

    /// Index into the fitted coefficient tensor, `None` for `AvVsAv`.
    pub fn fitted_index(self) -> Option<usize> {
        match self {
            InteractionType::AvVsHdv => Some(0),
            InteractionType::HdvVsAv => Some(1),
            InteractionType::HdvVsHdv => Some(2),
            InteractionType::AvVsAv => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionType::AvVsHdv => "AV_vs_HDV",
            InteractionType::HdvVsAv => "HDV_vs_AV",
            InteractionType::HdvVsHdv => "HDV_vs_HDV",
            InteractionType::AvVsAv => "AV_vs_AV",
        }
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Behavior {
    Cooperative,
    Defective,
}

impl Behavior {
    pub fn is_cooperative(self) -> bool {
        matches!(self, Behavior::Cooperative)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Cooperative => "C",
            Behavior::Defective => "D",
        }
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "C" | "Cooperative" => Ok(Behavior::Cooperative),
            "D" | "Defective" => Ok(Behavior::Defective),
            other => Err(format!("unknown behavior label `{other}`")),
        }
    }
}

/// Joint outcome; the first letter is the active vehicle's choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    CC,
    CD,
    DC,
    DD,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::CC, Outcome::CD, Outcome::DC, Outcome::DD];

    pub fn from_behaviors(active: Behavior, passive: Behavior) -> Self {
        match (active, passive) {
            (Behavior::Cooperative, Behavior::Cooperative) => Outcome::CC,
            (Behavior::Cooperative, Behavior::Defective) => Outcome::CD,
            (Behavior::Defective, Behavior::Cooperative) => Outcome::DC,
            (Behavior::Defective, Behavior::Defective) => Outcome::DD,
        }
    }

    pub fn from_choices(active_cooperates: bool, passive_cooperates: bool) -> Self {
        let b = |c: bool| if c { Behavior::Cooperative } else { Behavior::Defective };
        Outcome::from_behaviors(b(active_cooperates), b(passive_cooperates))
    }

    pub fn active_cooperates(self) -> bool {
        matches!(self, Outcome::CC | Outcome::CD)
    }

    pub fn passive_cooperates(self) -> bool {
        matches!(self, Outcome::CC | Outcome::DC)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::CC => "CC",
            Outcome::CD => "CD",
            Outcome::DC => "DC",
            Outcome::DD => "DD",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CC" => Ok(Outcome::CC),
            "CD" => Ok(Outcome::CD),
            "DC" => Ok(Outcome::DC),
            "DD" => Ok(Outcome::DD),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

/// (active vehicle type, passive vehicle type).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub active: VehicleType,
    pub passive: VehicleType,
}

impl Pair {
    pub const ALL: [Pair; 4] = [
        Pair::new(VehicleType::Hdv, VehicleType::Hdv),
        Pair::new(VehicleType::Hdv, VehicleType::Av),
        Pair::new(VehicleType::Av, VehicleType::Hdv),
        Pair::new(VehicleType::Av, VehicleType::Av),
    ];

    pub const fn new(active: VehicleType, passive: VehicleType) -> Self {
        Pair { active, passive }
    }

    pub fn active_interaction(self) -> InteractionType {
        InteractionType::of(self.active, self.passive)
    }

    pub fn passive_interaction(self) -> InteractionType {
        InteractionType::of(self.passive, self.active)
    }

    /// Index into [`Pair::ALL`].
    pub fn index(self) -> usize {
        match (self.active, self.passive) {
            (VehicleType::Hdv, VehicleType::Hdv) => 0,
            (VehicleType::Hdv, VehicleType::Av) => 1,
            (VehicleType::Av, VehicleType::Hdv) => 2,
            (VehicleType::Av, VehicleType::Av) => 3,
        }
    }

    pub fn label(self) -> String {
        format!("{}-{}", self.active, self.passive)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.active, self.passive)
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, p) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("pair `{s}` must look like ACTIVE-PASSIVE"))?;
        Ok(Pair::new(a.parse()?, p.parse()?))
    }
}
