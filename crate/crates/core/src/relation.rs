use std::fmt;

use serde::{Deserialize, Serialize};

/// Order relation between a neuron `z` of the input copy and its partner
/// `zᵖ` in the perturbed copy, read as `z ⋈ zᵖ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Relation {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
    #[default]
    None,
}

impl Relation {
    pub fn is_none(self) -> bool {
        self == Relation::None
    }

    /// `z − zᵖ ≥ 0` follows from the relation.
    pub fn implies_ge(self) -> bool {
        matches!(self, Relation::Eq | Relation::Ge | Relation::Gt)
    }

    pub fn implies_le(self) -> bool {
        matches!(self, Relation::Eq | Relation::Le | Relation::Lt)
    }

    /// Relation with the roles of the two copies exchanged.
    pub fn flip(self) -> Relation {
        match self {
            Relation::Ge => Relation::Le,
            Relation::Gt => Relation::Lt,
            Relation::Le => Relation::Ge,
            Relation::Lt => Relation::Gt,
            r => r,
        }
    }

    /// Weakest relation implied by both `self` and `other`.
    pub fn join(self, other: Relation) -> Relation {
        match (self.implies_ge() && other.implies_ge(), self.implies_le() && other.implies_le()) {
            _ if self == other => self,
            (true, true) => Relation::Eq,
            (true, false) => Relation::Ge,
            (false, true) => Relation::Le,
            (false, false) => Relation::None,
        }
    }

    /// Numeric check of `z ⋈ zᵖ` with absolute tolerance.
    pub fn holds(self, z: f64, zp: f64, tol: f64) -> bool {
        match self {
            Relation::Eq => (z - zp).abs() <= tol,
            Relation::Ge => z >= zp - tol,
            Relation::Gt => z > zp - tol,
            Relation::Le => z <= zp + tol,
            Relation::Lt => z < zp + tol,
            Relation::None => true,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::None => "_",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
