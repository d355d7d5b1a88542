//! The eight policy variants compared in the evaluation matrix.

use std::fmt;
use std::str::FromStr;

use crate::env::EnvOptions;
use crate::error::CuraError;
use crate::perception::OcclusionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    PushNoOcclusion,
    PushWithOcclusion,
    CuraPpo,
    BaselineConf,
    CuraNoUncertainty,
    CuraNoRisk,
    PushBase,
    CuraBase,
}

/// Flags a variant sets on the environment and the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantSpec {
    pub variant: Variant,
    pub occlusion: OcclusionMode,
    pub use_latent: bool,
    pub lambda_r: f64,
    pub lambda_u: f64,
    pub base_only: bool,
}

impl VariantSpec {
    pub fn env_options(&self) -> EnvOptions {
        EnvOptions {
            occlusion: self.occlusion,
            use_latent: self.use_latent,
            base_only: self.base_only,
        }
    }
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::PushNoOcclusion,
        Variant::PushWithOcclusion,
        Variant::CuraPpo,
        Variant::BaselineConf,
        Variant::CuraNoUncertainty,
        Variant::CuraNoRisk,
        Variant::PushBase,
        Variant::CuraBase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PushNoOcclusion => "push_no_occlusion",
            Variant::PushWithOcclusion => "push_with_occlusion",
            Variant::CuraPpo => "cura_ppo",
            Variant::BaselineConf => "baseline_conf",
            Variant::CuraNoUncertainty => "cura_no_uncertainty",
            Variant::CuraNoRisk => "cura_no_risk",
            Variant::PushBase => "push_base",
            Variant::CuraBase => "cura_base",
        }
    }

    /// Table group: 1 = occlusion study, 2 = cost ablations, 3 = base only.
    pub fn group(self) -> u8 {
        match self {
            Variant::PushNoOcclusion | Variant::PushWithOcclusion | Variant::CuraPpo => 1,
            Variant::BaselineConf | Variant::CuraNoUncertainty | Variant::CuraNoRisk => 2,
            Variant::PushBase | Variant::CuraBase => 3,
        }
    }

    pub fn spec(self) -> VariantSpec {
        let (occlusion, use_latent, lambda_r, lambda_u, base_only) = match self {
            Variant::PushNoOcclusion => (OcclusionMode::ObjectFiltered, true, 0.0, 0.0, false),
            Variant::PushWithOcclusion => (OcclusionMode::Realistic, false, 0.0, 0.0, false),
            Variant::CuraPpo => (OcclusionMode::Realistic, true, 0.25, 1.0, false),
            Variant::BaselineConf => (OcclusionMode::Realistic, true, 0.0, 0.0, false),
            Variant::CuraNoUncertainty => (OcclusionMode::Realistic, true, 0.25, 0.0, false),
            Variant::CuraNoRisk => (OcclusionMode::Realistic, true, 0.0, 1.0, false),
            Variant::PushBase => (OcclusionMode::Realistic, false, 0.0, 0.0, true),
            Variant::CuraBase => (OcclusionMode::Realistic, true, 0.25, 1.0, true),
        };
        VariantSpec {
            variant: self,
            occlusion,
            use_latent,
            lambda_r,
            lambda_u,
            base_only,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CuraError;
    fn from_str(s: &str) -> Result<Self, CuraError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| CuraError::UnknownVariant(s.to_string()))
    }
}
