//! Instance and certificate files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use raycert_core::rational::serde_rational;
use raycert_core::search::CenterPoint;
use raycert_core::{ConvexBody, Family, Hyperplane, HyperplanePartition, Mode, Rational, TverbergRayCertificate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Bodies,
    Hyperplanes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    pub dimension: usize,
    pub kind: InstanceKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bodies: Vec<ConvexBody>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyperplanes: Vec<Hyperplane>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl InstanceFile {
    pub fn from_bodies(bodies: Vec<ConvexBody>, metadata: BTreeMap<String, Value>) -> Self {
        let dimension = bodies.first().map_or(0, ConvexBody::dim);
        InstanceFile { version: FORMAT_VERSION, dimension, kind: InstanceKind::Bodies, bodies, hyperplanes: Vec::new(), metadata }
    }

    pub fn from_hyperplanes(hyperplanes: Vec<Hyperplane>, metadata: BTreeMap<String, Value>) -> Self {
        let dimension = hyperplanes.first().map_or(0, Hyperplane::dim);
        InstanceFile {
            version: FORMAT_VERSION,
            dimension,
            kind: InstanceKind::Hyperplanes,
            bodies: Vec::new(),
            hyperplanes,
            metadata,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != FORMAT_VERSION {
            return Err(CliError::input(format!("unsupported instance version {}", self.version)));
        }
        let dims: Vec<usize> = match self.kind {
            InstanceKind::Bodies if self.hyperplanes.is_empty() && !self.bodies.is_empty() => {
                self.bodies.iter().map(ConvexBody::dim).collect()
            }
            InstanceKind::Hyperplanes if self.bodies.is_empty() && !self.hyperplanes.is_empty() => {
                self.hyperplanes.iter().map(Hyperplane::dim).collect()
            }
            _ => return Err(CliError::input("instance must populate exactly the list named by its kind")),
        };
        if let Some(bad) = dims.iter().find(|&&d| d != self.dimension) {
            return Err(CliError::input(format!("member of dimension {bad} in a {}-dimensional instance", self.dimension)));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family, CliError> {
        if self.kind != InstanceKind::Bodies {
            return Err(CliError::input("this subcommand needs a bodies instance"));
        }
        Ok(Family::new(self.bodies.clone())?)
    }

    pub fn planes(&self) -> Result<&[Hyperplane], CliError> {
        if self.kind != InstanceKind::Hyperplanes {
            return Err(CliError::input("this subcommand needs a hyperplanes instance"));
        }
        Ok(&self.hyperplanes)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let inst: InstanceFile = read_json(path)?;
        inst.validate()?;
        Ok(inst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", content = "payload", rename_all = "kebab-case")]
pub enum Claim {
    TverbergRays(TverbergRayCertificate),
    CenterPoint(CenterPoint),
    TverbergHyperplanes(HyperplanePartition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Clearance required between `p` and ball members.
    #[serde(with = "serde_rational")]
    pub tau: Rational,
    /// Search tolerance (fixed-point stopping rule).
    #[serde(with = "serde_rational")]
    pub search: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub version: u32,
    pub instance_hash: String,
    pub r: usize,
    #[serde(flatten)]
    pub claim: Claim,
    pub mode: Mode,
    pub tolerances: Tolerances,
}

impl CertificateFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let cert: CertificateFile = read_json(path)?;
        if cert.version != FORMAT_VERSION {
            return Err(CliError::input(format!("unsupported certificate version {}", cert.version)));
        }
        Ok(cert)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
