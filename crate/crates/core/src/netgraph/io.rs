//! JSON network files.
//!
//! ```json
//! {
//!   "junctions": [{"id": 0, "x": 0.0, "y": 0.0}, ...],
//!   "roads": [{"id": 0, "from": 0, "to": 1, "length": 100.0,
//!              "capacity": 13, "speed_limit": 13.9}, ...]
//! }
//! ```
//!
//! Road loads are runtime state and are not stored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Junction, JunctionId, NetError, Network, Road, RoadId};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkFile<T> {
    pub junctions: Vec<Junction<T>>,
    pub roads: Vec<RoadRecord<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RoadRecord<T> {
    pub id: RoadId,
    pub from: JunctionId,
    pub to: JunctionId,
    pub length: T,
    pub capacity: u32,
    pub speed_limit: T,
}

impl<T: Scalar> From<&Network<T>> for NetworkFile<T> {
    fn from(net: &Network<T>) -> Self {
        NetworkFile {
            junctions: net.junctions().to_vec(),
            roads: net
                .roads()
                .iter()
                .map(|r| RoadRecord {
                    id: r.id,
                    from: r.from,
                    to: r.to,
                    length: r.length,
                    capacity: r.capacity,
                    speed_limit: r.speed_limit,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> TryFrom<NetworkFile<T>> for Network<T> {
    type Error = NetError;

    fn try_from(file: NetworkFile<T>) -> Result<Self, NetError> {
        let roads = file
            .roads
            .into_iter()
            .map(|r| Road {
                id: r.id,
                from: r.from,
                to: r.to,
                length: r.length,
                capacity: r.capacity,
                load: 0,
                speed_limit: r.speed_limit,
            })
            .collect();
        Network::from_parts(file.junctions, roads)
    }
}

impl<T: Scalar> Network<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let file: NetworkFile<T> =
            serde_json::from_str(text).map_err(|e| NetError::Format(e.to_string()))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::Preset;

    #[test]
    fn round_trip_is_lossless_for_every_preset() {
        for p in Preset::ALL {
            let net: Network<f64> = p.build();
            let back = Network::<f64>::from_json(&net.to_json()).unwrap();
            assert_eq!(back, net, "{p}");
        }
    }

    #[test]
    fn rejects_malformed_and_invalid() {
        assert!(matches!(
            Network::<f64>::from_json("{"),
            Err(NetError::Format(_))
        ));
        let one_way = r#"{"junctions":[{"id":0,"x":0,"y":0},{"id":1,"x":1,"y":0}],
            "roads":[{"id":0,"from":0,"to":1,"length":1.0,"capacity":1,"speed_limit":1.0}]}"#;
        assert!(matches!(
            Network::<f64>::from_json(one_way),
            Err(NetError::Invalid(_))
        ));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let net: Network<f64> = Preset::Spiderweb.build();
        net.save(&path).unwrap();
        assert_eq!(Network::<f64>::load(&path).unwrap(), net);
    }
}
