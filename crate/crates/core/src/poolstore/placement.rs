//! Rendezvous (highest-random-weight) shard placement.
//!
//! Every OSD in the cluster, up or down, gets a score for a given
//! `(pool, object)`. The `width` highest-scoring OSDs form the object's home
//! set and shard `i` is homed on the `i`-th of them. Home slots whose OSD is
//! down are filled, in slot order, by the next-ranked up OSDs. A failure
//! therefore moves only the shards that lived on the failed OSD.

use sha2::{Digest, Sha256};

use super::OsdId;

/// Score of one OSD for one object. Higher wins.
pub fn score(pool: &str, object_id: &str, osd: OsdId) -> u64 {
    let mut h = Sha256::new();
    h.update((pool.len() as u32).to_be_bytes());
    h.update(pool.as_bytes());
    h.update((object_id.len() as u32).to_be_bytes());
    h.update(object_id.as_bytes());
    h.update(osd.0.to_be_bytes());
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

/// All OSDs ordered by descending score; ties broken by id.
pub fn rank(pool: &str, object_id: &str, osds: impl IntoIterator<Item = OsdId>) -> Vec<OsdId> {
    let mut scored: Vec<(u64, OsdId)> = osds
        .into_iter()
        .map(|id| (score(pool, object_id, id), id))
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, id)| id).collect()
}

/// Chooses `width` distinct up OSDs, position `i` holding shard index `i`.
///
/// `osds` yields `(id, up)` for every OSD in the cluster. Returns `None` when
/// fewer than `width` OSDs are up.
pub fn place(
    pool: &str,
    object_id: &str,
    osds: impl IntoIterator<Item = (OsdId, bool)>,
    width: usize,
) -> Option<Vec<OsdId>> {
    let osds: Vec<(OsdId, bool)> = osds.into_iter().collect();
    let is_up = |id: OsdId| osds.iter().any(|&(o, up)| o == id && up);
    if osds.iter().filter(|(_, up)| *up).count() < width {
        return None;
    }
    let ranked = rank(pool, object_id, osds.iter().map(|(id, _)| *id));
    let (home, rest) = ranked.split_at(width.min(ranked.len()));
    let mut spares = rest.iter().copied().filter(|&id| is_up(id));
    let mut out = Vec::with_capacity(width);
    for &id in home {
        if is_up(id) {
            out.push(id);
        } else {
            out.push(spares.next()?);
        }
    }
    Some(out)
}
