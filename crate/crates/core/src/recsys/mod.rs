//! The recommendation network: consumer/product embeddings, a self-attention
//! plus GRU sequence encoder, input-level attention over six 8-dim slots and
//! an MLP head, trained with hand-written backpropagation and plain SGD.

mod features;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    build_examples, context_features, hashed_text_embedding, RecExample, RecordExplanation,
    CONTEXT_DIM,
};
pub use model::{loss_and_grad, RecCache, RecGrads, RecModelParams, BCE_EPS, EMBED_DIM, SLOTS};
pub use train::{predict_batch, train, train_examples, Prediction, RecHyper, Trained};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            _ => Err(Error::validation(format!("unknown task `{s}`"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

/// Model variant. Each one fixes what the two explanation slots carry and,
/// for `NcfHead`, swaps the attention head for a plain MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    PosOnly,
    NegOnly,
    AspectOnly,
    GeneralOnly,
    SummaryOnly,
    NoAutoencoder,
    NoProfileAugmentation,
    FreeParamsSubstitute,
    NoExplanations,
    NcfHead,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Variant::Full,
        Variant::PosOnly,
        Variant::NegOnly,
        Variant::AspectOnly,
        Variant::GeneralOnly,
        Variant::SummaryOnly,
        Variant::NoAutoencoder,
        Variant::NoProfileAugmentation,
        Variant::FreeParamsSubstitute,
        Variant::NoExplanations,
        Variant::NcfHead,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::PosOnly => "pos_only",
            Variant::NegOnly => "neg_only",
            Variant::AspectOnly => "aspect_only",
            Variant::GeneralOnly => "general_only",
            Variant::SummaryOnly => "summary_only",
            Variant::NoAutoencoder => "no_autoencoder",
            Variant::NoProfileAugmentation => "no_profile_augmentation",
            Variant::FreeParamsSubstitute => "free_params_substitute",
            Variant::NoExplanations => "no_explanations",
            Variant::NcfHead => "ncf_head",
        }
    }

    /// Whether the variant reads a positive and a negative embedding.
    pub fn needs_pair(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::NoAutoencoder | Variant::NoProfileAugmentation | Variant::NcfHead
        )
    }

    /// Whether the variant reads any explanation embedding at all.
    pub fn uses_explanations(self) -> bool {
        !matches!(self, Variant::NoExplanations | Variant::FreeParamsSubstitute)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown variant `{s}`")))
    }
}
