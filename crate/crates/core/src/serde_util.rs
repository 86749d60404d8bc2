//! Serde adapters for the state file.

/// `Vec<u8>` as a lowercase hex string.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

/// OSD shard table as a list of `{pool, object_id, index, data}` records.
pub mod shard_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::poolstore::ShardKey;

    #[derive(Serialize, Deserialize)]
    struct Record {
        pool: String,
        object_id: String,
        index: u16,
        #[serde(with = "super::hex_bytes")]
        data: Vec<u8>,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<ShardKey, Vec<u8>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(k, v)| Record {
            pool: k.pool.clone(),
            object_id: k.object_id.clone(),
            index: k.index,
            data: v.clone(),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<ShardKey, Vec<u8>>, D::Error> {
        let records = Vec::<Record>::deserialize(d)?;
        Ok(records
            .into_iter()
            .map(|r| {
                (
                    ShardKey {
                        pool: r.pool,
                        object_id: r.object_id,
                        index: r.index,
                    },
                    r.data,
                )
            })
            .collect())
    }
}

/// `[u8; 32]` as a lowercase hex string.
pub mod hex_bytes_32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}
