#![allow(dead_code)]

pub mod eigen;
pub mod grad;

use esig_core::domain::ProcessElectricityMap;
use esig_core::synthgen::{generate_corpus, Corpus, GenConfig};

pub fn quiet(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        noise_sigma_kw: 0.0,
        ..GenConfig::default()
    }
}

pub fn corpus(cfg: &GenConfig) -> Corpus {
    generate_corpus(cfg, &ProcessElectricityMap::default()).expect("corpus")
}
