use super::{EnergyError, SensorSample};
use crate::jobshop::Seconds;
use serde::{Deserialize, Serialize};

/// Recorded temperature/humidity readings with non-decreasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTrace {
    samples: Vec<SensorSample>,
}

impl SensorTrace {
    pub fn new(samples: Vec<SensorSample>) -> Result<Self, EnergyError> {
        if samples.is_empty() {
            return Err(EnergyError::EmptyTrace);
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate()?;
            if i > 0 && s.t_s < samples[i - 1].t_s {
                return Err(EnergyError::UnorderedTrace { row: i + 1 });
            }
        }
        Ok(SensorTrace { samples })
    }

    /// Reads `t_s,temperature_c,humidity_pct` CSV with a header row.
    pub fn from_csv(text: &str) -> Result<Self, EnergyError> {
        let samples = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes())
            .deserialize::<SensorSample>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EnergyError::Csv(e.to_string()))?;
        SensorTrace::new(samples)
    }

    pub fn samples(&self) -> &[SensorSample] {
        &self.samples
    }

    pub fn last_time(&self) -> Seconds {
        self.samples.last().map_or(0, |s| s.t_s)
    }

    /// Latest reading taken at or before `t`, or the first reading if `t` precedes the trace.
    pub fn sample_at(&self, t: Seconds) -> SensorSample {
        let idx = self.samples.partition_point(|s| s.t_s <= t);
        let s = self.samples[idx.saturating_sub(1)];
        SensorSample { t_s: t, ..s }
    }

    /// One reading per acquisition tick `0, p1, 2 p1, ...` up to the last recorded time.
    pub fn replay(&self, p1_s: Seconds) -> impl Iterator<Item = SensorSample> + '_ {
        let step = p1_s.max(1);
        let end = self.last_time();
        (0..)
            .map(move |k: u64| k * step)
            .take_while(move |&t| t <= end)
            .map(move |t| self.sample_at(t))
    }
}

pub fn replay_sensor_trace(
    trace: Vec<SensorSample>,
    p1_s: Seconds,
) -> Result<impl Iterator<Item = SensorSample>, EnergyError> {
    let trace = SensorTrace::new(trace)?;
    let samples: Vec<_> = trace.replay(p1_s).collect();
    Ok(samples.into_iter())
}
