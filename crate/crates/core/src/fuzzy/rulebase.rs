use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{FuzzyError, MembershipFunction};

pub const TRACE_RULE_BASE: &str = include_str!("../../data/rulebases/trace.yaml");
pub const DEFAULT_RULE_BASE: &str = include_str!("../../data/rulebases/default-r1r4.yaml");

/// Names of the engine's input variables.
pub const INPUT_VARIABLES: [&str; 3] = ["asr_conf", "arousal", "valence"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzySet {
    pub label: String,
    pub function: MembershipFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub domain: (f64, f64),
    pub sets: Vec<FuzzySet>,
}

impl LinguisticVariable {
    pub fn set(&self, label: &str) -> Option<&FuzzySet> {
        self.sets.iter().find(|s| s.label == label)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            self.domain.0
        } else {
            x.clamp(self.domain.0, self.domain.1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub variable: String,
    pub set: String,
}

impl Condition {
    pub fn describe(&self) -> String {
        format!("{} is {}", self.variable, self.set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzyRule {
    pub antecedents: Vec<Condition>,
    /// Output set label.
    pub consequent: String,
}

/// Validated, immutable rule base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleBase {
    pub id: String,
    pub inputs: Vec<LinguisticVariable>,
    pub output: LinguisticVariable,
    pub rules: Vec<FuzzyRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    domain: [f64; 2],
    sets: IndexMap<String, MembershipFunction>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(rename = "if")]
    conditions: Vec<String>,
    then: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleBaseFile {
    id: String,
    #[serde(default = "default_output")]
    output: String,
    variables: Vec<VariableFile>,
    #[serde(default)]
    rules: Vec<RuleFile>,
}

fn default_output() -> String {
    "w_text".into()
}

/// Parses `"<variable> is <set>"`.
fn parse_condition(text: &str) -> Option<(String, String)> {
    let mut parts = text.split_whitespace();
    let var = parts.next()?;
    if parts.next()? != "is" {
        return None;
    }
    let set = parts.next()?;
    parts.next().is_none().then(|| (var.to_string(), set.to_string()))
}

impl RuleBase {
    pub fn from_yaml(source: &str) -> Result<Self, FuzzyError> {
        let file: RuleBaseFile = serde_yaml::from_str(source).map_err(|e| FuzzyError::invalid(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, FuzzyError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| FuzzyError::invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_yaml(&source)
    }

    /// Resolves `trace` / `default-r1r4` to the shipped bases, anything else
    /// to a file path.
    pub fn resolve(spec: &str) -> Result<Self, FuzzyError> {
        match spec {
            "trace" => Ok(Self::trace()),
            "default-r1r4" | "default" => Ok(Self::default_base()),
            path => Self::load(Path::new(path)),
        }
    }

    pub fn trace() -> Self {
        Self::from_yaml(TRACE_RULE_BASE).expect("shipped trace rule base is valid")
    }

    pub fn default_base() -> Self {
        Self::from_yaml(DEFAULT_RULE_BASE).expect("shipped default rule base is valid")
    }

    fn from_file(file: RuleBaseFile) -> Result<Self, FuzzyError> {
        if file.id.trim().is_empty() {
            return Err(FuzzyError::invalid("rule base id is empty"));
        }
        let mut variables = Vec::with_capacity(file.variables.len());
        for v in file.variables {
            let [lo, hi] = v.domain;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FuzzyError::invalid(format!("variable {} has an empty domain", v.name)));
            }
            if variables.iter().any(|x: &LinguisticVariable| x.name == v.name) {
                return Err(FuzzyError::invalid(format!("variable {} declared twice", v.name)));
            }
            let mut sets = Vec::with_capacity(v.sets.len());
            for (label, function) in v.sets {
                let (a, d) = function.support();
                if a < lo || d > hi {
                    return Err(FuzzyError::invalid(format!(
                        "set {}.{label} support [{a}, {d}] leaves domain [{lo}, {hi}]",
                        v.name
                    )));
                }
                sets.push(FuzzySet { label, function });
            }
            variables.push(LinguisticVariable {
                name: v.name,
                domain: (lo, hi),
                sets,
            });
        }

        let out_pos = variables
            .iter()
            .position(|v| v.name == file.output)
            .ok_or_else(|| FuzzyError::invalid(format!("output variable {} not declared", file.output)))?;
        let output = variables.remove(out_pos);
        for required in INPUT_VARIABLES {
            if !variables.iter().any(|v| v.name == required) {
                return Err(FuzzyError::invalid(format!("input variable {required} not declared")));
            }
        }
        if let Some(extra) = variables.iter().find(|v| !INPUT_VARIABLES.contains(&v.name.as_str())) {
            return Err(FuzzyError::invalid(format!(
                "unsupported input variable {}",
                extra.name
            )));
        }

        let mut rules = Vec::with_capacity(file.rules.len());
        for (n, r) in file.rules.into_iter().enumerate() {
            if r.conditions.is_empty() {
                return Err(FuzzyError::invalid(format!("rule {} has no antecedents", n + 1)));
            }
            let mut antecedents = Vec::with_capacity(r.conditions.len());
            for c in &r.conditions {
                let (var, set) = parse_condition(c)
                    .ok_or_else(|| FuzzyError::invalid(format!("rule {}: cannot parse condition '{c}'", n + 1)))?;
                let resolved = variables
                    .iter()
                    .find(|v| v.name == var)
                    .and_then(|v| v.set(&set))
                    .is_some();
                if !resolved {
                    return Err(FuzzyError::invalid(format!("rule {}: unknown set '{c}'", n + 1)));
                }
                antecedents.push(Condition { variable: var, set });
            }
            let consequent = match parse_condition(&r.then) {
                Some((var, set)) if var == output.name => set,
                Some((var, _)) => {
                    return Err(FuzzyError::invalid(format!(
                        "rule {}: consequent targets {var}, not {}",
                        n + 1,
                        output.name
                    )))
                }
                None => r.then.trim().to_string(),
            };
            if output.set(&consequent).is_none() {
                return Err(FuzzyError::invalid(format!(
                    "rule {}: unknown output set '{consequent}'",
                    n + 1
                )));
            }
            rules.push(FuzzyRule {
                antecedents,
                consequent,
            });
        }

        Ok(Self {
            id: file.id,
            inputs: variables,
            output,
            rules,
        })
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.name == name)
    }
}
