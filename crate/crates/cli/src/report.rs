//! Per-scenario evaluation report laid out as twelve scenario columns plus an average.

use std::fmt::Write;
use std::str::FromStr;

use newton_core::catalog::SCENARIO_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FMeasure,
    Mhd,
    Flow,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::FMeasure => "fmeasure",
            Metric::Mhd => "mhd",
            Metric::Flow => "flow",
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fmeasure" => Ok(Metric::FMeasure),
            "mhd" => Ok(Metric::Mhd),
            "flow" => Ok(Metric::Flow),
            _ => Err(format!("unknown metric {s:?}; expected fmeasure, mhd or flow")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metric: Metric,
    /// Mean per scenario; NaN where no record fell in that scenario.
    pub per_scenario: [f64; SCENARIO_COUNT],
    /// Mean of the scenarios that have data.
    pub average: f64,
    pub records: usize,
}

impl Report {
    pub fn from_scores(metric: Metric, scores: &[(u8, f64)]) -> Self {
        let mut sums = [0.0; SCENARIO_COUNT];
        let mut counts = [0usize; SCENARIO_COUNT];
        for &(scenario, v) in scores {
            sums[scenario as usize - 1] += v;
            counts[scenario as usize - 1] += 1;
        }
        let mut per_scenario = [f64::NAN; SCENARIO_COUNT];
        for i in 0..SCENARIO_COUNT {
            if counts[i] > 0 {
                per_scenario[i] = sums[i] / counts[i] as f64;
            }
        }
        let present: Vec<f64> = per_scenario.iter().copied().filter(|v| !v.is_nan()).collect();
        let average = if present.is_empty() {
            f64::NAN
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        Self {
            metric,
            per_scenario,
            average,
            records: scores.len(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for i in 1..=SCENARIO_COUNT {
            let _ = write!(out, ",{i}");
        }
        out.push_str(",Avg.\n");
        out.push_str(self.metric.name());
        for v in self.per_scenario.iter().chain(std::iter::once(&self.average)) {
            let _ = write!(out, ",{v:.4}");
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_skips_empty_scenarios() {
        let r = Report::from_scores(Metric::Mhd, &[(1, 1.0), (1, 3.0), (4, 4.0)]);
        assert_eq!(r.per_scenario[0], 2.0);
        assert!(r.per_scenario[1].is_nan());
        assert_eq!(r.average, 3.0);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,1,2,3,4,5,6,7,8,9,10,11,12,Avg.");
        assert_eq!(lines[1].split(',').count(), 14);
        assert!(lines[1].starts_with("mhd,2.0000,NaN,NaN,4.0000"));
        assert!(lines[1].ends_with(",3.0000"));
    }

    #[test]
    fn metric_names_parse() {
        for m in [Metric::FMeasure, Metric::Mhd, Metric::Flow] {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("f1".parse::<Metric>().is_err());
    }
}
