//! Named pass/fail findings shared by all analyses.

use serde::{Deserialize, Serialize};

use crate::expr::{NonVanishing, Witness, ZeroTest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

/// Three-valued answer to a yes/no question about a system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    /// `Yes` iff all pass, `No` if any fails, otherwise `Inconclusive`.
    pub fn all<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Verdict {
        let mut verdict = Verdict::Yes;
        for c in checks {
            match c.outcome {
                Outcome::Fail => return Verdict::No,
                Outcome::Inconclusive => verdict = Verdict::Inconclusive,
                Outcome::Pass => {}
            }
        }
        verdict
    }

    pub fn from_bool(b: bool) -> Verdict {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    /// Largest |residual| on the samples (identity checks) or smallest |value|
    /// (non-vanishing checks).
    pub value: Option<f64>,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn pass(name: &str, value: Option<f64>) -> Check {
        Check {
            name: name.into(),
            outcome: Outcome::Pass,
            value,
            witness: None,
            note: None,
        }
    }

    pub fn fail(name: &str, witness: Option<Witness>, note: Option<String>) -> Check {
        Check {
            name: name.into(),
            outcome: Outcome::Fail,
            value: witness.as_ref().map(|w| w.value.abs()),
            witness,
            note,
        }
    }

    pub fn inconclusive(name: &str, note: String) -> Check {
        Check {
            name: name.into(),
            outcome: Outcome::Inconclusive,
            value: None,
            witness: None,
            note: Some(note),
        }
    }

    pub fn zero(name: &str, t: &ZeroTest) -> Check {
        match t {
            ZeroTest::Zero { max_residual, .. } => Check::pass(name, Some(*max_residual)),
            ZeroTest::NonZero(w) => Check::fail(name, Some(w.clone()), None),
            ZeroTest::Inconclusive { valid, singular } => Check::inconclusive(
                name,
                format!("{valid} valid samples, {singular} singular draws"),
            ),
        }
    }

    pub fn nonvanishing(name: &str, t: &NonVanishing) -> Check {
        match t {
            NonVanishing::NonVanishing { min_abs, .. } => Check::pass(name, Some(*min_abs)),
            NonVanishing::Vanishes(w) => Check::fail(name, Some(w.clone()), None),
            NonVanishing::Inconclusive { valid, singular } => Check::inconclusive(
                name,
                format!("{valid} valid samples, {singular} singular draws"),
            ),
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }
}
