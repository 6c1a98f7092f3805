//! Binary Merkle tree over 32-byte digests. An odd node at any level is
//! paired with itself; a single leaf is its own root.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MerkleError;

type Node = [u8; 32];

fn decode(hex_digest: &str) -> Option<Node> {
    let bytes = hex::decode(hex_digest).ok()?;
    bytes.try_into().ok()
}

fn parent(left: &Node, right: &Node) -> Node {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().into()
}

fn decode_leaves(leaves: &[String]) -> Result<Vec<Node>, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyBatch);
    }
    leaves
        .iter()
        .map(|l| decode(l).ok_or_else(|| MerkleError::InvalidLeaf(l.clone())))
        .collect()
}

fn next_level(level: &[Node]) -> Vec<Node> {
    level
        .chunks(2)
        .map(|pair| parent(&pair[0], pair.get(1).unwrap_or(&pair[0])))
        .collect()
}

/// All levels of a tree, for issuing many proofs without rehashing.
#[derive(Debug, Clone)]
pub struct MerkleTree {
    levels: Vec<Vec<Node>>,
}

impl MerkleTree {
    pub fn new(leaves: &[String]) -> Result<Self, MerkleError> {
        let mut levels = vec![decode_leaves(leaves)?];
        while levels.last().map_or(0, Vec::len) > 1 {
            let next = next_level(levels.last().expect("non-empty"));
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> String {
        hex::encode(self.levels.last().expect("at least the leaf level")[0])
    }

    pub fn proof(&self, index: usize) -> Result<MerkleProof, MerkleError> {
        if index >= self.len() {
            return Err(MerkleError::IndexOutOfRange { index, len: self.len() });
        }
        let mut siblings = Vec::with_capacity(self.levels.len() - 1);
        let mut pos = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sibling = if pos.is_multiple_of(2) {
                level.get(pos + 1).unwrap_or(&level[pos])
            } else {
                &level[pos - 1]
            };
            siblings.push(hex::encode(sibling));
            pos /= 2;
        }
        Ok(MerkleProof {
            leaf: hex::encode(self.levels[0][index]),
            index,
            siblings,
            root: self.root(),
        })
    }
}

pub fn merkle_root(leaves: &[String]) -> Result<String, MerkleError> {
    Ok(MerkleTree::new(leaves)?.root())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf: String,
    pub index: usize,
    /// Sibling digests from the leaf level upward.
    pub siblings: Vec<String>,
    pub root: String,
}

pub fn merkle_proof(leaves: &[String], index: usize) -> Result<MerkleProof, MerkleError> {
    let mut proof = MerkleTree::new(leaves)?.proof(index)?;
    // keep the caller's spelling of the leaf (case) in the proof
    proof.leaf = leaves[index].clone();
    Ok(proof)
}

/// Folds the leaf through its siblings, left or right by index bit.
pub fn merkle_verify(proof: &MerkleProof) -> bool {
    let Some(mut acc) = decode(&proof.leaf) else {
        return false;
    };
    let mut pos = proof.index;
    for s in &proof.siblings {
        let Some(sibling) = decode(s) else {
            return false;
        };
        acc = if pos.is_multiple_of(2) {
            parent(&acc, &sibling)
        } else {
            parent(&sibling, &acc)
        };
        pos /= 2;
    }
    pos == 0 && decode(&proof.root) == Some(acc)
}
