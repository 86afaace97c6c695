//! Model persistence: a versioned text document with a header line, one
//! line of flat node arrays per tree, and a trailing checksum line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tree::{Node, Tree};
use super::{BoostConfig, RewardModel};
use crate::error::{Error, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    feature_dim: usize,
    fingerprint: String,
    config: BoostConfig,
    num_trees: usize,
}

/// Flat node: internal nodes carry feature/threshold/children, leaves carry
/// only a value.
#[derive(Serialize, Deserialize)]
struct FlatNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leaf: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TreeLine {
    nodes: Vec<FlatNode>,
}

#[derive(Serialize, Deserialize)]
struct ChecksumLine {
    checksum: String,
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::CorruptModelFile(detail.into())
}

fn push_line<T: Serialize>(body: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *body, value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    body.push(b'\n');
    Ok(())
}

/// Serializes a model to bytes; identical models yield identical bytes.
pub fn model_to_bytes(model: &RewardModel) -> Result<Vec<u8>> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        feature_dim: model.feature_dim(),
        fingerprint: model.training_fingerprint().to_string(),
        config: model.config().clone(),
        num_trees: model.trees().len(),
    };
    let mut body = Vec::new();
    push_line(&mut body, &header)?;
    for tree in model.trees() {
        let nodes = tree
            .nodes
            .iter()
            .map(|n| match n {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => FlatNode {
                    feature: Some(*feature),
                    threshold: Some(*threshold),
                    left: Some(*left),
                    right: Some(*right),
                    leaf: None,
                },
                Node::Leaf { value } => FlatNode {
                    feature: None,
                    threshold: None,
                    left: None,
                    right: None,
                    leaf: Some(*value),
                },
            })
            .collect();
        push_line(&mut body, &TreeLine { nodes })?;
    }
    let checksum = hex::encode(Sha256::digest(&body));
    push_line(&mut body, &ChecksumLine { checksum })?;
    Ok(body)
}

/// Writes the model file. Round-trips preserve predictions bit-exactly.
pub fn save_model(model: &RewardModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

/// Parses bytes produced by [`model_to_bytes`], verifying the checksum.
pub fn model_from_bytes(bytes: &[u8]) -> Result<RewardModel> {
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not valid UTF-8"))?;
    let trimmed = text.trim_end_matches('\n');
    let (body_end, checksum_line) = match trimmed.rfind('\n') {
        Some(i) => (i + 1, &trimmed[i + 1..]),
        None => return Err(corrupt("missing checksum line")),
    };
    let parsed: ChecksumLine =
        serde_json::from_str(checksum_line).map_err(|_| corrupt("bad checksum line"))?;
    let body = &bytes[..body_end];
    let expected = hex::encode(Sha256::digest(body));
    if parsed.checksum != expected {
        return Err(corrupt("checksum mismatch"));
    }

    let mut lines = std::str::from_utf8(body).unwrap().lines();
    let header_line = lines.next().ok_or_else(|| corrupt("missing header"))?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(corrupt(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }
    let mut trees = Vec::with_capacity(header.num_trees);
    for line in lines {
        let tree_line: TreeLine =
            serde_json::from_str(line).map_err(|e| corrupt(format!("bad tree line: {e}")))?;
        let mut nodes = Vec::with_capacity(tree_line.nodes.len());
        for flat in tree_line.nodes {
            let node = match flat {
                FlatNode {
                    leaf: Some(value),
                    feature: None,
                    ..
                } => Node::Leaf { value },
                FlatNode {
                    feature: Some(feature),
                    threshold: Some(threshold),
                    left: Some(left),
                    right: Some(right),
                    leaf: None,
                } => Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                },
                _ => return Err(corrupt("node is neither a leaf nor an internal node")),
            };
            nodes.push(node);
        }
        let tree = Tree { nodes };
        validate_tree(&tree)?;
        trees.push(tree);
    }
    if trees.len() != header.num_trees {
        return Err(corrupt(format!(
            "expected {} trees, found {}",
            header.num_trees,
            trees.len()
        )));
    }
    Ok(RewardModel::from_parts(
        trees,
        header.config,
        header.feature_dim,
        header.fingerprint,
    ))
}

/// Loads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<RewardModel> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}

/// Child references must stay in range and never point backwards at the
/// root; feature indices are deliberately not checked against the header
/// so dimension mismatches surface at predict time.
fn validate_tree(tree: &Tree) -> Result<()> {
    if tree.nodes.is_empty() {
        return Err(corrupt("empty tree"));
    }
    for node in &tree.nodes {
        if let Node::Internal { left, right, .. } = node {
            if *left >= tree.nodes.len() || *right >= tree.nodes.len() || *left == 0 || *right == 0
            {
                return Err(corrupt("node child out of range"));
            }
        }
    }
    Ok(())
}
