//! Run manifest: the fully resolved config, seed, and artifact hashes —
//! enough to reproduce any run exactly. No timestamps; reruns of the same
//! command produce identical manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use platoon_core::config::Config;

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a Config,
    artifacts: Vec<Artifact>,
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &Config,
    artifact_files: &[PathBuf],
) -> anyhow::Result<()> {
    let mut artifacts = Vec::with_capacity(artifact_files.len());
    for file in artifact_files {
        let bytes = std::fs::read(file)?;
        let digest = Sha256::digest(&bytes);
        artifacts.push(Artifact {
            path: file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: hex::encode(digest),
        });
    }
    let manifest = Manifest {
        tool: "platoon",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: config.scenario.rng_seed,
        config,
        artifacts,
    };
    let file = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;
    Ok(())
}
