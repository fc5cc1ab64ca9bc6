//! The JSON system file: chart, fields as expression strings, base point,
//! sampling overrides, parameters and an optional expected-results block.

use std::collections::BTreeMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::Verdict;
use crate::classify::Family;
use crate::expr::{parse_expr, ParseError, SamplePlan, Scalar};
use crate::geometry::{Chart, VectorField};
use crate::structure::ControlSystem;
use crate::symmetry::{AlgebraPresentation, AlmostAbelian, BracketRelation};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("parameter `{name}` = `{value}` is not a number")]
    Param { name: String, value: String },
    #[error("{0}")]
    Schema(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub vars: Vec<String>,
    pub f: Vec<String>,
    pub g: Vec<Vec<String>>,
    pub base: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SamplePlan>,
    /// Named constants usable in every expression, as exact numbers (`"3/2"`, `"-1"`, `"0.25"`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

/// What the analysis of a system should report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// Catalog family the system was generated from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    /// Whether the non-degeneracy assumptions hold at the base point.
    pub assumptions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<String>,
    /// Compared up to a global sign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trivialisable: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<PresentationSpec>,
}

impl Expected {
    pub fn degenerate(catalog: &str) -> Expected {
        Expected {
            catalog: Some(catalog.into()),
            assumptions: false,
            epsilon: None,
            kappa: None,
            nu: None,
            trivialisable: None,
            family: None,
            symmetry: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub label: String,
    pub components: Vec<String>,
}

/// `[left, right] = Σ result[label] · label`; unlisted pairs commute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub left: String,
    pub right: String,
    pub result: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostAbelianSpec {
    pub ideal: Vec<String>,
    pub v0: String,
    /// Exact rationals, one per ideal generator: `[v_i, v0] = λ_i v_i`.
    pub eigenvalues: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresentationSpec {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub table: Vec<BracketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub almost_abelian: Option<AlmostAbelianSpec>,
}

/// Parses an exact constant such as `3`, `-3/2` or `0.25`.
pub fn parse_scalar(s: &str) -> Option<Scalar> {
    parse_expr(s, &[]).ok()?.as_const()
}

pub fn parse_rational(s: &str) -> Option<Rational64> {
    parse_scalar(s)?.as_rational()
}

impl SystemSpec {
    pub fn from_json(src: &str) -> Result<SystemSpec, SpecError> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system specs always serialize") + "\n"
    }

    pub fn chart(&self) -> Chart {
        Chart::new(self.vars.iter().cloned())
    }

    pub fn plan(&self) -> SamplePlan {
        self.plan.clone().unwrap_or_default()
    }

    pub fn param_values(&self) -> Result<BTreeMap<String, Scalar>, SpecError> {
        self.params
            .iter()
            .map(|(k, v)| {
                let s = parse_scalar(v).ok_or_else(|| SpecError::Param {
                    name: k.clone(),
                    value: v.clone(),
                })?;
                Ok((k.clone(), s))
            })
            .collect()
    }

    fn field(
        &self,
        chart: &Chart,
        params: &BTreeMap<String, Scalar>,
        name: &str,
        comps: &[String],
    ) -> Result<VectorField, SpecError> {
        if comps.len() != chart.dim() {
            return Err(SpecError::Schema(format!(
                "{name} has {} components, expected {}",
                comps.len(),
                chart.dim()
            )));
        }
        let parsed = comps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                chart.parse(s, params).map_err(|source| SpecError::Parse {
                    field: format!("{name}[{i}]"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorField::new(parsed))
    }

    pub fn build(&self) -> Result<ControlSystem, SpecError> {
        let mut seen = std::collections::BTreeSet::new();
        if self.vars.is_empty() || !self.vars.iter().all(|v| seen.insert(v)) {
            return Err(SpecError::Schema(
                "vars must be non-empty and distinct".into(),
            ));
        }
        if self.vars.len() > crate::expr::MAX_VARS {
            return Err(SpecError::Schema(format!(
                "at most {} variables",
                crate::expr::MAX_VARS
            )));
        }
        if self.g.is_empty() {
            return Err(SpecError::Schema(
                "at least one control field is required".into(),
            ));
        }
        if self.base.len() != self.vars.len() || self.base.iter().any(|b| !b.is_finite()) {
            return Err(SpecError::Schema(
                "base must be a finite point with one entry per variable".into(),
            ));
        }
        let chart = self.chart();
        let params = self.param_values()?;
        let f = self.field(&chart, &params, "f", &self.f)?;
        let g = self
            .g
            .iter()
            .enumerate()
            .map(|(i, gi)| self.field(&chart, &params, &format!("g[{i}]"), gi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ControlSystem::new(chart, f, g, self.base.clone()))
    }

    pub fn presentation(&self) -> Result<Option<AlgebraPresentation>, SpecError> {
        let Some(spec) = self.expected.as_ref().and_then(|e| e.symmetry.as_ref()) else {
            return Ok(None);
        };
        let chart = self.chart();
        let params = self.param_values()?;
        spec.build(&chart, &params).map(Some)
    }
}

impl PresentationSpec {
    pub fn build(
        &self,
        chart: &Chart,
        params: &BTreeMap<String, Scalar>,
    ) -> Result<AlgebraPresentation, SpecError> {
        let labels: Vec<String> = self.generators.iter().map(|g| g.label.clone()).collect();
        let index = |l: &str| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| SpecError::Schema(format!("unknown generator `{l}`")))
        };
        let rational = |s: &str| {
            parse_rational(s)
                .ok_or_else(|| SpecError::Schema(format!("`{s}` is not an exact rational")))
        };
        let mut generators = Vec::new();
        for g in &self.generators {
            if g.components.len() != chart.dim() {
                return Err(SpecError::Schema(format!(
                    "generator `{}` has wrong dimension",
                    g.label
                )));
            }
            let comps = g
                .components
                .iter()
                .map(|s| {
                    chart.parse(s, params).map_err(|source| SpecError::Parse {
                        field: format!("generator {}", g.label),
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            generators.push(VectorField::new(comps));
        }
        let mut table = Vec::new();
        for b in &self.table {
            let mut coefficients = vec![Rational64::from_integer(0); labels.len()];
            for (l, c) in &b.result {
                coefficients[index(l)?] = rational(c)?;
            }
            table.push(BracketRelation {
                i: index(&b.left)?,
                j: index(&b.right)?,
                coefficients,
            });
        }
        let almost_abelian = match &self.almost_abelian {
            None => None,
            Some(a) => Some(AlmostAbelian {
                ideal: a.ideal.iter().map(|l| index(l)).collect::<Result<_, _>>()?,
                v0: index(&a.v0)?,
                eigenvalues: a
                    .eigenvalues
                    .iter()
                    .map(|s| rational(s))
                    .collect::<Result<_, _>>()?,
                k: a.k,
            }),
        };
        Ok(AlgebraPresentation {
            labels,
            generators,
            table,
            almost_abelian,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ELLIPTIC: &str = r#"{"vars":["x","y","w"], "f":["cos(w)","sin(w)","0"],
        "g":[["0","0","1"]], "base":[0,0,0]}"#;

    #[test]
    fn loads_and_round_trips() {
        let spec = SystemSpec::from_json(ELLIPTIC).unwrap();
        let sys = spec.build().unwrap();
        assert_eq!((sys.dim(), sys.inputs()), (3, 1));
        assert_eq!(SystemSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn params_are_exact() {
        let mut spec = SystemSpec::from_json(ELLIPTIC).unwrap();
        spec.params.insert("nu".into(), "3/2".into());
        spec.f[2] = "nu*w".into();
        let sys = spec.build().unwrap();
        assert_eq!(sys.f.component(2).to_string(), "(3/2)*w");
        spec.params.insert("nu".into(), "w".into());
        assert!(matches!(spec.build(), Err(SpecError::Param { .. })));
    }

    #[test]
    fn schema_errors() {
        let mut spec = SystemSpec::from_json(ELLIPTIC).unwrap();
        spec.base.pop();
        assert!(matches!(spec.build(), Err(SpecError::Schema(_))));
        let mut spec = SystemSpec::from_json(ELLIPTIC).unwrap();
        spec.f[0] = "cos(".into();
        assert!(matches!(spec.build(), Err(SpecError::Parse { .. })));
        assert!(SystemSpec::from_json("{").is_err());
    }

    #[test]
    fn scalars() {
        assert_eq!(parse_rational("-3/2"), Some(Rational64::new(-3, 2)));
        assert_eq!(parse_rational("0.25"), Some(Rational64::new(1, 4)));
        assert_eq!(parse_rational("x"), None);
    }
}
