//! Robust designs under channel-estimation error, multi-hop chains and
//! parallel multi-relay systems.

pub mod multihop;
pub mod multirelay;
pub mod robust;

pub use multihop::{multihop_design, node_powers, MultiHopChannel, MultiHopSolution};
pub use multirelay::{multirelay_design, MultiRelayChannel, MultiRelaySolution};
pub use robust::{
    averaged_mse, naive_design_p1, robust_design_p1, robust_relay_power, robust_wiener,
    RobustChannelState,
};

/// Lists of matrices as nested `[re, im]` rows.
pub mod serde_mats {
    use crate::linalg::{serde_cmat, CMat};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mats: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        mats.iter().map(serde_cmat::to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?
            .iter()
            .map(|rows| serde_cmat::from_rows(rows).map_err(D::Error::custom))
            .collect()
    }
}
