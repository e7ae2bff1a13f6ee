use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tsr_core::augment::{augment_sample, AugmentConfig};
use tsr_core::rng::item_rng;

use crate::io::{encode_sample, read_dataset, read_text, sha256_hex, write_bytes, Sample};
use crate::{AugmentArgs, CliError, RunConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub image: FileHash,
    pub labels: FileHash,
    /// Input stems: four Mosaic tiles, then the MixUp partner.
    pub sources: Vec<String>,
    /// MixUp weight of each box, in label-file order.
    pub box_weights: Vec<f64>,
}

/// Everything needed to regenerate an `augment` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub config: AugmentConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<OutputRecord>,
}

pub fn config_hash(cfg: &AugmentConfig) -> String {
    sha256_hex(
        serde_json::to_string(cfg)
            .expect("config serialises")
            .as_bytes(),
    )
}

fn input_hashes(samples: &[Sample]) -> Vec<FileHash> {
    samples
        .iter()
        .map(|s| FileHash {
            name: format!("images/{}.png", s.stem),
            sha256: sha256_hex(&s.png),
        })
        .collect()
}

/// Output `i` draws its tiles and every random parameter from stream `i` of
/// the master seed, so outputs do not depend on each other.
fn generate(
    samples: &[Sample],
    cfg: &AugmentConfig,
    count: usize,
    out: &Path,
) -> Result<Vec<OutputRecord>, CliError> {
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = item_rng(cfg.seed, i as u64);
        let picks: [usize; 5] = std::array::from_fn(|_| rng.random_range(0..samples.len()));
        let tiles = [0, 1, 2, 3].map(|t| &samples[picks[t]].item);
        let result = augment_sample(tiles, &samples[picks[4]].item, cfg, &mut rng)?;
        let (png, labels) = encode_sample(&result)?;
        let stem = format!("{i:05}");
        let image_name = format!("images/{stem}.png");
        let label_name = format!("labels/{stem}.txt");
        write_bytes(&out.join(&image_name), &png)?;
        write_bytes(&out.join(&label_name), labels.as_bytes())?;
        records.push(OutputRecord {
            image: FileHash {
                name: image_name,
                sha256: sha256_hex(&png),
            },
            labels: FileHash {
                name: label_name,
                sha256: sha256_hex(labels.as_bytes()),
            },
            sources: picks.iter().map(|&p| samples[p].stem.clone()).collect(),
            box_weights: result.weights,
        });
    }
    Ok(records)
}

fn write_manifest(m: &Manifest, out: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serialises");
    text.push('\n');
    write_bytes(&out.join(MANIFEST), text.as_bytes())
}

pub fn run(args: &AugmentArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let samples = read_dataset(&args.input)?;
    let inputs = input_hashes(&samples);

    if let Some(path) = &args.from_manifest {
        let recorded: Manifest = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if config_hash(&recorded.config) != recorded.config_hash
            || recorded.config.seed != recorded.seed
        {
            return Err(CliError::Validation(
                "manifest config does not match its recorded hash".into(),
            ));
        }
        if recorded.inputs != inputs {
            return Err(CliError::Validation(
                "input dataset differs from the one in the manifest".into(),
            ));
        }
        let outputs = generate(
            &samples,
            &recorded.config,
            recorded.outputs.len(),
            &args.out,
        )?;
        if let Some(i) = (0..outputs.len()).find(|&i| outputs[i] != recorded.outputs[i]) {
            return Err(CliError::Validation(format!(
                "replay diverged from the manifest at output {}",
                recorded.outputs[i].image.name
            )));
        }
        write_manifest(&recorded, &args.out)?;
        println!(
            "replayed {} outputs into {}",
            outputs.len(),
            args.out.display()
        );
        return Ok(());
    }

    let count = args.count.unwrap_or(samples.len());
    let outputs = generate(&samples, &cfg.augment, count, &args.out)?;
    let manifest = Manifest {
        seed: cfg.augment.seed,
        config_hash: config_hash(&cfg.augment),
        config: cfg.augment.clone(),
        inputs,
        outputs,
    };
    write_manifest(&manifest, &args.out)?;
    println!(
        "wrote {count} images to {} (seed {}, config {})",
        args.out.display(),
        manifest.seed,
        &manifest.config_hash[..12]
    );
    Ok(())
}
