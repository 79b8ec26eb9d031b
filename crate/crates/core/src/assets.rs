//! Prompt assets compiled into the binary and pinned by SHA-256.

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("prompt asset `{name}` checksum mismatch: expected {expected}, got {actual}")]
pub struct AssetError {
    pub name: &'static str,
    pub expected: &'static str,
    pub actual: String,
}

/// A prompt text together with its pinned checksum.
#[derive(Debug, Clone, Copy)]
pub struct PinnedAsset {
    pub name: &'static str,
    pub text: &'static str,
    pub sha256: &'static str,
}

impl PinnedAsset {
    /// Returns the text after checking it against the pinned checksum.
    pub fn load(&self) -> Result<&'static str, AssetError> {
        let actual = sha256_hex(self.text.as_bytes());
        if actual != self.sha256 {
            return Err(AssetError { name: self.name, expected: self.sha256, actual });
        }
        Ok(self.text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub const SYSTEM_PROMPT: PinnedAsset = PinnedAsset {
    name: "system_prompt",
    text: include_str!("../assets/system_prompt.txt"),
    sha256: "128e634276237075917ed29e0b93c42bde61b5e822660a5d2a4320dbcc81e6a0",
};

pub const FORCED_ANSWER_PROMPT: PinnedAsset = PinnedAsset {
    name: "forced_answer_prompt",
    text: include_str!("../assets/forced_answer_prompt.txt"),
    sha256: "1f230f52e460ed09d238e20216c1483c74631f180afb0ba785e41201da47a21e",
};

pub const VERIFIER_PROMPT: PinnedAsset = PinnedAsset {
    name: "verifier_prompt",
    text: include_str!("../assets/verifier_prompt.txt"),
    sha256: "cb1c3c6c60047ecea1d7ae7fc09e9af0b9bf8fb99c9094a7473f30cb1acfba26",
};

pub const EXTRACTOR_PROMPT: PinnedAsset = PinnedAsset {
    name: "extractor_prompt",
    text: include_str!("../assets/extractor_prompt.txt"),
    sha256: "52cbf7fbf2967927aad9d6e27bc53b0d75749f3fb67d17152f12eea61f4a4566",
};

pub const JUDGE_PROMPT: PinnedAsset = PinnedAsset {
    name: "judge_prompt",
    text: include_str!("../assets/judge_prompt.txt"),
    sha256: "0dca2461be098296c38c95fdc0100659ec98c7a92e63d405350fb1e121427377",
};

pub const PROPOSER_REGIONS_PROMPT: PinnedAsset = PinnedAsset {
    name: "proposer_regions_prompt",
    text: include_str!("../assets/proposer_regions_prompt.txt"),
    sha256: "3c1d6199bd55a3b883a592889d58bc9fbf4f9127cf97909ef44e3bf6d79c5330",
};

pub const PROPOSER_QUERIES_PROMPT: PinnedAsset = PinnedAsset {
    name: "proposer_queries_prompt",
    text: include_str!("../assets/proposer_queries_prompt.txt"),
    sha256: "26a07249184cbe3a3f3a36de91245342e7f3c4b7078aff12aeb2645c8cf1e0f7",
};

pub const PROPOSER_FINAL_PROMPT: PinnedAsset = PinnedAsset {
    name: "proposer_final_prompt",
    text: include_str!("../assets/proposer_final_prompt.txt"),
    sha256: "701c4bc79b53f521fcecb3cb4c9e7726b39a01b89089dae1f7483669a2660726",
};

pub const ALL: [PinnedAsset; 8] = [
    SYSTEM_PROMPT,
    FORCED_ANSWER_PROMPT,
    VERIFIER_PROMPT,
    EXTRACTOR_PROMPT,
    JUDGE_PROMPT,
    PROPOSER_REGIONS_PROMPT,
    PROPOSER_QUERIES_PROMPT,
    PROPOSER_FINAL_PROMPT,
];
