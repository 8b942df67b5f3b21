use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum SplitProtocol {
    /// Shuffled split into fractions of the whole set (e.g. 0.4 / 0.2 / 0.4).
    Ratios { train: f64, validation: f64, test: f64 },
    /// `test` of the set is held out; `validation` of the remainder is
    /// taken from the training pool (e.g. 0.2 of train).
    HoldOut { test: f64, validation: f64 },
    /// Official lists. Images in none of them are discarded.
    Fixed {
        train: Vec<String>,
        validation: Vec<String>,
        test: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    /// Images not assigned by a fixed-list protocol.
    pub discarded: Vec<String>,
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} fraction {v} outside [0, 1]")))
    }
}

fn part(n: usize, f: f64) -> usize {
    ((n as f64 * f).round() as usize).min(n)
}

/// Partitions `images` according to `protocol`; shuffles use `seed`.
pub fn split_dataset(images: &[String], protocol: &SplitProtocol, seed: u64) -> Result<Split> {
    if images.is_empty() {
        return Err(Error::Invalid("cannot split an empty manifest".into()));
    }
    let unique: HashSet<&String> = images.iter().collect();
    if unique.len() != images.len() {
        return Err(Error::Invalid("manifest lists an image twice".into()));
    }
    let shuffled = || {
        let mut v = images.to_vec();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        v
    };
    match protocol {
        SplitProtocol::Ratios { train, validation, test } => {
            fraction("train", *train)?;
            fraction("validation", *validation)?;
            fraction("test", *test)?;
            if (train + validation + test - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "split fractions sum to {}, not 1",
                    train + validation + test
                )));
            }
            let mut v = shuffled();
            let n = v.len();
            let n_train = part(n, *train);
            let n_val = part(n, *validation).min(n - n_train);
            let test = v.split_off(n_train + n_val);
            let validation = v.split_off(n_train);
            Ok(Split {
                train: v,
                validation,
                test,
                discarded: Vec::new(),
            })
        }
        SplitProtocol::HoldOut { test, validation } => {
            fraction("test", *test)?;
            fraction("validation", *validation)?;
            let mut v = shuffled();
            let n_test = part(v.len(), *test);
            let test = v.split_off(v.len() - n_test);
            let n_val = part(v.len(), *validation);
            let validation = v.split_off(v.len() - n_val);
            Ok(Split {
                train: v,
                validation,
                test,
                discarded: Vec::new(),
            })
        }
        SplitProtocol::Fixed { train, validation, test } => {
            let mut owner: HashMap<&String, &str> = HashMap::new();
            let mut missing = Vec::new();
            for (name, list) in [("train", train), ("validation", validation), ("test", test)] {
                for img in list {
                    if !unique.contains(img) {
                        missing.push(img.clone());
                    }
                    if let Some(prev) = owner.insert(img, name) {
                        return Err(Error::Invalid(format!("`{img}` is listed in both {prev} and {name}")));
                    }
                }
            }
            if !missing.is_empty() {
                return Err(Error::MissingKeys(missing));
            }
            Ok(Split {
                train: train.clone(),
                validation: validation.clone(),
                test: test.clone(),
                discarded: images.iter().filter(|i| !owner.contains_key(i)).cloned().collect(),
            })
        }
    }
}
