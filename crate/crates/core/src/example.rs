//! Pre/post example pairs shared by the synthesizers, verifiers and checker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::il::{Assignment, IlError, VarContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// A `(d, d')` pair over one procedure context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExamplePair {
    pub pre: Assignment,
    pub post: Assignment,
    pub polarity: Polarity,
}

impl ExamplePair {
    pub fn positive(pre: Assignment, post: Assignment) -> ExamplePair {
        ExamplePair {
            pre,
            post,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(pre: Assignment, post: Assignment) -> ExamplePair {
        ExamplePair {
            pre,
            post,
            polarity: Polarity::Negative,
        }
    }

    pub fn check(&self, ctx: &VarContext) -> Result<(), IlError> {
        self.pre.check(ctx)?;
        self.post.check(ctx)
    }

    /// Same pair with the given polarity.
    pub fn with_polarity(&self, polarity: Polarity) -> ExamplePair {
        ExamplePair {
            polarity,
            ..self.clone()
        }
    }

    pub fn project(&self, ctx: &VarContext) -> ExamplePair {
        ExamplePair {
            pre: self.pre.project(ctx),
            post: self.post.project(ctx),
            polarity: self.polarity,
        }
    }

    /// Same states, ignoring polarity.
    pub fn same_states(&self, other: &ExamplePair) -> bool {
        self.pre == other.pre && self.post == other.post
    }
}

impl fmt::Display for ExamplePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.pre, self.post)
    }
}
