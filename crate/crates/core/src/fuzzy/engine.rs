use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FuzzyError, LinguisticVariable, RuleBase};

/// Points in the uniform centroid grid.
pub const CENTROID_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyInputs {
    pub asr_conf: f64,
    pub arousal: f64,
    pub valence: f64,
}

impl FuzzyInputs {
    pub fn get(&self, variable: &str) -> Option<f64> {
        match variable {
            "asr_conf" => Some(self.asr_conf),
            "arousal" => Some(self.arousal),
            "valence" => Some(self.valence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    #[serde(rename = "if")]
    pub conditions: Vec<String>,
    pub then: String,
    pub strength: f64,
}

impl FiredRule {
    /// Output set label named by `then` ("w_text is high" → "high").
    pub fn consequent(&self) -> &str {
        self.then.rsplit(' ').next().unwrap_or(&self.then)
    }
}

/// Degree of every input set at the given inputs, keyed variable → set.
pub type Memberships = BTreeMap<String, BTreeMap<String, f64>>;

/// Complete explanation of one inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyTrace {
    pub inputs: FuzzyInputs,
    pub memberships: Memberships,
    pub fired_rules: Vec<FiredRule>,
    pub out_sets: BTreeMap<String, f64>,
    pub w_text: f64,
}

fn clamped_inputs(rule_base: &RuleBase, inputs: FuzzyInputs) -> FuzzyInputs {
    let clamp = |name: &str, v: f64| rule_base.input(name).map_or(v, |var| var.clamp(v));
    FuzzyInputs {
        asr_conf: clamp("asr_conf", inputs.asr_conf),
        arousal: clamp("arousal", inputs.arousal),
        valence: clamp("valence", inputs.valence),
    }
}

pub fn input_memberships(rule_base: &RuleBase, inputs: &FuzzyInputs) -> Memberships {
    rule_base
        .inputs
        .iter()
        .map(|var| {
            let x = inputs.get(&var.name).unwrap_or(f64::NAN);
            let degrees = var
                .sets
                .iter()
                .map(|s| (s.label.clone(), s.function.degree(x)))
                .collect();
            (var.name.clone(), degrees)
        })
        .collect()
}

/// Every rule, in declaration order, with strength = min over its
/// antecedent degrees. Zero-strength rules are kept.
pub fn evaluate_rules(rule_base: &RuleBase, inputs: &FuzzyInputs) -> Vec<FiredRule> {
    let inputs = clamped_inputs(rule_base, *inputs);
    let degrees = input_memberships(rule_base, &inputs);
    rule_base
        .rules
        .iter()
        .map(|rule| {
            let strength = rule
                .antecedents
                .iter()
                .map(|c| degrees[&c.variable][&c.set])
                .fold(1.0_f64, f64::min);
            FiredRule {
                conditions: rule.antecedents.iter().map(|c| c.describe()).collect(),
                then: format!("{} is {}", rule_base.output.name, rule.consequent),
                strength,
            }
        })
        .collect()
}

/// Max-aggregation per output set; sets no rule targets stay at zero.
pub fn aggregate_outputs(fired: &[FiredRule], output: &LinguisticVariable) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = output.sets.iter().map(|s| (s.label.clone(), 0.0)).collect();
    for rule in fired {
        if let Some(level) = out.get_mut(rule.consequent()) {
            *level = level.max(rule.strength);
        }
    }
    out
}

/// Aggregated output membership `max_s min(mu_s(x), level_s)`.
pub fn aggregated_membership(output: &LinguisticVariable, out_sets: &BTreeMap<String, f64>, x: f64) -> f64 {
    output
        .sets
        .iter()
        .map(|s| {
            let level = out_sets.get(&s.label).copied().unwrap_or(0.0);
            s.function.degree(x).min(level)
        })
        .fold(0.0, f64::max)
}

/// Centroid of the aggregated output over a uniform grid on the output
/// domain.
pub fn defuzzify_centroid_with(
    out_sets: &BTreeMap<String, f64>,
    output: &LinguisticVariable,
    points: usize,
) -> Result<f64, FuzzyError> {
    let (lo, hi) = output.domain;
    let steps = points.max(2) - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let mu = aggregated_membership(output, out_sets, x);
        num += x * mu;
        den += mu;
    }
    if den <= 0.0 {
        return Err(FuzzyError::ZeroActivation);
    }
    Ok((num / den).clamp(lo, hi))
}

pub fn defuzzify_centroid(out_sets: &BTreeMap<String, f64>, output: &LinguisticVariable) -> Result<f64, FuzzyError> {
    defuzzify_centroid_with(out_sets, output, CENTROID_GRID_POINTS)
}

/// Mamdani inference of the text-channel weight with its full trace.
pub fn infer_w_text(rule_base: &RuleBase, asr_conf: f64, arousal: f64, valence: f64) -> Result<FuzzyTrace, FuzzyError> {
    let inputs = clamped_inputs(
        rule_base,
        FuzzyInputs {
            asr_conf,
            arousal,
            valence,
        },
    );
    let fired_rules = evaluate_rules(rule_base, &inputs);
    let out_sets = aggregate_outputs(&fired_rules, &rule_base.output);
    let w_text = defuzzify_centroid(&out_sets, &rule_base.output)?;
    Ok(FuzzyTrace {
        inputs,
        memberships: input_memberships(rule_base, &inputs),
        fired_rules,
        out_sets,
        w_text,
    })
}
