use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parts of the pipeline are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Generator, both refinement units and the offset head.
    #[default]
    Full,
    /// Model A: the generator alone, output is the coarse set.
    NoRefiner,
    /// Model B: the global unit alone feeds the head.
    NoLocal,
    /// Model C: the local unit alone feeds the head.
    NoGlobal,
    /// Model D: the head regresses coordinates directly instead of offsets.
    NoOffset,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::NoRefiner,
        Variant::NoLocal,
        Variant::NoGlobal,
        Variant::NoOffset,
        Variant::Full,
    ];

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::NoRefiner => "A",
            Variant::NoLocal => "B",
            Variant::NoGlobal => "C",
            Variant::NoOffset => "D",
            Variant::Full => "Full",
        }
    }

    pub fn has_refiner(self) -> bool {
        self != Variant::NoRefiner
    }

    pub fn has_local(self) -> bool {
        matches!(self, Variant::Full | Variant::NoGlobal | Variant::NoOffset)
    }

    pub fn has_global(self) -> bool {
        matches!(self, Variant::Full | Variant::NoLocal | Variant::NoOffset)
    }

    pub fn has_offset(self) -> bool {
        matches!(self, Variant::Full | Variant::NoLocal | Variant::NoGlobal)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" | "Full" => Variant::Full,
            "A" | "a" | "no_refiner" => Variant::NoRefiner,
            "B" | "b" | "no_local" => Variant::NoLocal,
            "C" | "c" | "no_global" => Variant::NoGlobal,
            "D" | "d" | "no_offset" => Variant::NoOffset,
            other => return Err(Error::Config(format!("unknown model variant `{other}`"))),
        })
    }
}

/// Architecture hyperparameters shared by the generator and refiner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Points per input patch.
    pub n: usize,
    /// Upsampling rate.
    pub r: usize,
    /// Feature channels.
    pub c: usize,
    /// Dense feature blocks in the generator's extractor.
    pub feat_blocks: usize,
    /// Neighborhood size inside the extractor.
    pub feat_knn: usize,
    /// Neighborhood size of the local refinement unit.
    pub k: usize,
    /// Channel divisor for attention queries and keys.
    pub attn_reduction: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 256,
            r: 4,
            c: 64,
            feat_blocks: 2,
            feat_knn: 16,
            k: 16,
            attn_reduction: 4,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.c < 8 || self.c % 2 != 0 {
            return fail(format!("c must be even and >= 8, got {}", self.c));
        }
        if self.r < 2 {
            return fail(format!("r must be >= 2, got {}", self.r));
        }
        if self.feat_blocks == 0 {
            return fail("feat_blocks must be >= 1".into());
        }
        if self.feat_knn == 0 || self.feat_knn > self.n {
            return fail(format!("feat_knn must be in 1..={}, got {}", self.n, self.feat_knn));
        }
        if self.k < 2 {
            return fail(format!("k must be >= 2, got {}", self.k));
        }
        if self.k > self.n * self.r {
            return fail(format!("k = {} exceeds rN = {}", self.k, self.n * self.r));
        }
        if self.attn_reduction == 0 || self.c % self.attn_reduction != 0 {
            return fail(format!(
                "attn_reduction {} must divide c = {}",
                self.attn_reduction, self.c
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_flags_follow_ablation_table() {
        let rows: Vec<_> = Variant::ALL
            .iter()
            .map(|v| {
                (
                    v.label(),
                    v.has_refiner(),
                    v.has_local(),
                    v.has_global(),
                    v.has_offset(),
                )
            })
            .collect();
        assert_eq!(
            rows,
            [
                ("A", false, false, false, false),
                ("B", true, false, true, true),
                ("C", true, true, false, true),
                ("D", true, true, true, false),
                ("Full", true, true, true, true),
            ]
        );
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig {
            attn_reduction: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            r: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
