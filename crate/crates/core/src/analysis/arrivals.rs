//! Homogeneous Poisson generator for urgent arrivals.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::scenario::{DurationSpec, PhaseDurations, SurgicalCase};
use crate::time::TimePoint;

/// Prefix of generated case ids; scenario case ids must not use it.
pub const ARRIVAL_ID_PREFIX: &str = "ARR-";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTemplate {
    pub weight: f64,
    pub preoperative: DurationSpec,
    pub phases: PhaseDurations,
    pub surgeon_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalGeneratorConfig {
    pub rate_per_hour: f64,
    pub window: (TimePoint, TimePoint),
    pub templates: Vec<ArrivalTemplate>,
    #[serde(default = "one")]
    pub arrival_replications: u32,
}

fn one() -> u32 {
    1
}

impl ArrivalGeneratorConfig {
    /// Describes the first broken invariant, if any.
    pub fn check(&self) -> Option<String> {
        if !(self.rate_per_hour.is_finite() && self.rate_per_hour >= 0.0) {
            return Some(format!("arrival rate {} must be >= 0", self.rate_per_hour));
        }
        if self.window.0 >= self.window.1 {
            return Some(format!("arrival window {}-{} is empty", self.window.0, self.window.1));
        }
        if self.templates.is_empty() {
            return Some("arrival generator needs at least one template".into());
        }
        if let Some(t) = self
            .templates
            .iter()
            .find(|t| !(t.weight.is_finite() && t.weight > 0.0))
        {
            return Some(format!("template weight {} must be > 0", t.weight));
        }
        for t in &self.templates {
            if let Some(problem) = t.preoperative.check() {
                return Some(problem);
            }
        }
        if self.arrival_replications == 0 {
            return Some("arrival_replications must be >= 1".into());
        }
        None
    }

    pub fn surgeons(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.surgeon_id.as_str())
    }
}

/// Draws one day of arrivals, sorted by arrival time.
///
/// Inter-arrival gaps are exponential with mean `60 / rate` minutes. Each
/// arrival picks a template by weight and samples its preoperative delay.
pub fn generate_arrivals<R: Rng + ?Sized>(config: &ArrivalGeneratorConfig, rng: &mut R) -> Vec<SurgicalCase> {
    let mut out = Vec::new();
    if config.rate_per_hour <= 0.0 || config.templates.is_empty() {
        return out;
    }
    let Ok(gap) = Exp::new(config.rate_per_hour / 60.0) else {
        return out;
    };
    let Ok(pick) = WeightedIndex::new(config.templates.iter().map(|t| t.weight)) else {
        return out;
    };
    let (start, end) = (config.window.0.minutes(), config.window.1.minutes());
    let mut t = start;
    loop {
        t += gap.sample(rng);
        if t >= end {
            break;
        }
        let template = &config.templates[pick.sample(rng)];
        let preop = template.preoperative.sample(rng);
        out.push(SurgicalCase::non_elective(
            format!("{ARRIVAL_ID_PREFIX}{:03}", out.len() + 1),
            template.surgeon_id.clone(),
            TimePoint::from_minutes(t),
            preop,
            template.phases.clone(),
        ));
    }
    out
}
