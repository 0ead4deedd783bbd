use super::{Energy, OpRef, Seconds};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("operation {op}: {message}")]
    Operation { op: OpRef, message: String },
    #[error("{0}")]
    Shape(String),
}

/// Duration and energy of one operation when run at one speed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub duration_s: Seconds,
    pub energy: Energy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub job: usize,
    pub rank: usize,
    pub machine: usize,
    /// Indexed by speed level minus one.
    pub profile: Vec<SpeedProfile>,
}

impl Operation {
    pub fn op_ref(&self) -> OpRef {
        OpRef::new(self.job, self.rank)
    }

    /// Profile at a 1-based speed level.
    ///
    /// Panics if `speed` is outside `1..=profile.len()`.
    pub fn at(&self, speed: usize) -> SpeedProfile {
        self.profile[speed - 1]
    }

    pub fn duration(&self, speed: usize) -> Seconds {
        self.at(speed).duration_s
    }

    pub fn energy(&self, speed: usize) -> Energy {
        self.at(speed).energy
    }

    /// Speed level with the lowest energy; ties go to the shorter duration, then the lower level.
    pub fn min_energy_speed(&self) -> usize {
        (1..=self.profile.len())
            .min_by_key(|&v| (self.energy(v), self.duration(v), v))
            .expect("operation has at least one speed level")
    }
}

/// A job-shop problem where each operation may run at one of `max_speed` levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    num_machines: usize,
    max_speed: usize,
    jobs: Vec<Vec<Operation>>,
}

impl Instance {
    /// Builds an instance from per-job routings. `job` and `rank` fields are overwritten
    /// from each operation's position.
    pub fn new(
        num_machines: usize,
        max_speed: usize,
        mut jobs: Vec<Vec<Operation>>,
    ) -> Result<Self, InstanceError> {
        if num_machines == 0 {
            return Err(InstanceError::Shape(
                "instance needs at least one machine".into(),
            ));
        }
        if max_speed == 0 {
            return Err(InstanceError::Shape(
                "instance needs at least one speed level".into(),
            ));
        }
        if jobs.is_empty() {
            return Err(InstanceError::Shape(
                "instance needs at least one job".into(),
            ));
        }
        for (j, ops) in jobs.iter_mut().enumerate() {
            if ops.is_empty() {
                return Err(InstanceError::Shape(format!("job {j} has no operations")));
            }
            for (k, op) in ops.iter_mut().enumerate() {
                op.job = j;
                op.rank = k;
                let at = op.op_ref();
                if op.machine >= num_machines {
                    return Err(InstanceError::Operation {
                        op: at,
                        message: format!(
                            "machine index out of range ({} >= {num_machines})",
                            op.machine
                        ),
                    });
                }
                if op.profile.len() != max_speed {
                    return Err(InstanceError::Operation {
                        op: at,
                        message: format!(
                            "speed table has {} entries, expected {max_speed}",
                            op.profile.len()
                        ),
                    });
                }
                for (v, p) in op.profile.iter().enumerate() {
                    if p.duration_s == 0 {
                        return Err(InstanceError::Operation {
                            op: at,
                            message: format!("duration at speed {} must be positive", v + 1),
                        });
                    }
                    if p.energy == Energy::ZERO {
                        return Err(InstanceError::Operation {
                            op: at,
                            message: format!("energy at speed {} must be positive", v + 1),
                        });
                    }
                }
            }
        }
        Ok(Instance {
            num_machines,
            max_speed,
            jobs,
        })
    }

    pub fn num_machines(&self) -> usize {
        self.num_machines
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn max_speed(&self) -> usize {
        self.max_speed
    }

    pub fn jobs(&self) -> &[Vec<Operation>] {
        &self.jobs
    }

    pub fn job(&self, job: usize) -> &[Operation] {
        &self.jobs[job]
    }

    pub fn op(&self, at: OpRef) -> Option<&Operation> {
        self.jobs.get(at.job).and_then(|ops| ops.get(at.rank))
    }

    pub fn operations(&self) -> impl Iterator<Item = &Operation> {
        self.jobs.iter().flatten()
    }

    pub fn num_operations(&self) -> usize {
        self.jobs.iter().map(Vec::len).sum()
    }

    /// `"{machines}x{speeds}x{jobs}"`.
    pub fn size_label(&self) -> String {
        format!(
            "{}x{}x{}",
            self.num_machines,
            self.max_speed,
            self.jobs.len()
        )
    }

    /// Returns a copy with every energy multiplied by `factor` (rounded, floored at 0.1 Wh).
    pub fn scale_energy(&self, factor: f64) -> Instance {
        let mut out = self.clone();
        for op in out.jobs.iter_mut().flatten() {
            for p in &mut op.profile {
                let scaled = (p.energy.tenths() as f64 * factor).round().max(1.0);
                p.energy = Energy::from_tenths(scaled as u64);
            }
        }
        out
    }

    /// Serializes to the text format read by [`load_instance`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.num_machines,
            self.jobs.len(),
            self.max_speed
        );
        for (j, ops) in self.jobs.iter().enumerate() {
            let _ = writeln!(out);
            let _ = writeln!(out, "# job {j}");
            for op in ops {
                let _ = write!(out, "{}", op.machine);
                for p in &op.profile {
                    let _ = write!(out, " {} {}", p.duration_s, p.energy.tenths());
                }
                let _ = writeln!(out);
            }
        }
        out
    }
}

enum Line<'a> {
    Blank,
    Fields(usize, Vec<&'a str>),
}

/// Parses the instance text format.
///
/// The first non-comment line is `machines jobs max_speed`. Each following line is one
/// operation, `machine d1 e1 ... dV eV`, with durations in seconds and energies in tenths
/// of a watt-hour. Jobs are separated by blank lines; a file with no blank lines and exactly
/// `jobs * machines` operation lines is split into jobs of `machines` operations each.
/// `#` starts a comment.
pub fn load_instance(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        if raw.trim().is_empty() {
            lines.push(Line::Blank);
        } else if !content.trim().is_empty() {
            lines.push(Line::Fields(i + 1, content.split_whitespace().collect()));
        }
    }

    let mut iter = lines.into_iter().skip_while(|l| matches!(l, Line::Blank));
    let (header_line, header) = match iter.next() {
        Some(Line::Fields(n, f)) => (n, f),
        _ => {
            return Err(InstanceError::Parse {
                line: 1,
                message: "missing header `machines jobs max_speed`".into(),
            })
        }
    };
    if header.len() != 3 {
        return Err(InstanceError::Parse {
            line: header_line,
            message: format!("header needs 3 fields, found {}", header.len()),
        });
    }
    let num = |s: &str, what: &str| -> Result<usize, InstanceError> {
        s.parse::<usize>().map_err(|_| InstanceError::Parse {
            line: header_line,
            message: format!("{what} `{s}` is not a non-negative integer"),
        })
    };
    let machines = num(header[0], "machine count")?;
    let num_jobs = num(header[1], "job count")?;
    let max_speed = num(header[2], "speed count")?;

    let mut blocks: Vec<Vec<(usize, Vec<&str>)>> = vec![Vec::new()];
    let mut saw_separator = false;
    for l in iter {
        match l {
            Line::Blank => {
                if blocks.last().is_some_and(|b| !b.is_empty()) {
                    saw_separator = true;
                    blocks.push(Vec::new());
                }
            }
            Line::Fields(n, f) => blocks.last_mut().unwrap().push((n, f)),
        }
    }
    if blocks.last().is_some_and(Vec::is_empty) {
        blocks.pop();
    }
    let total: usize = blocks.iter().map(Vec::len).sum();
    if !saw_separator
        && blocks.len() == 1
        && num_jobs > 1
        && machines > 0
        && total == num_jobs * machines
    {
        let flat = blocks.pop().unwrap();
        blocks = flat.chunks(machines).map(<[_]>::to_vec).collect();
    }
    if blocks.len() != num_jobs {
        return Err(InstanceError::Parse {
            line: header_line,
            message: format!(
                "header declares {num_jobs} jobs but {} job blocks were found",
                blocks.len()
            ),
        });
    }

    let mut jobs = Vec::with_capacity(num_jobs);
    for (j, block) in blocks.into_iter().enumerate() {
        let mut ops = Vec::with_capacity(block.len());
        for (k, (line, fields)) in block.into_iter().enumerate() {
            if fields.len() != 1 + 2 * max_speed {
                return Err(InstanceError::Parse {
                    line,
                    message: format!(
                        "operation needs {} fields (machine + {max_speed} duration/energy pairs), found {}",
                        1 + 2 * max_speed,
                        fields.len()
                    ),
                });
            }
            let values = fields
                .iter()
                .map(|s| {
                    s.parse::<u64>().map_err(|_| InstanceError::Parse {
                        line,
                        message: format!("`{s}` is not a non-negative integer"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let profile = values[1..]
                .chunks(2)
                .map(|c| SpeedProfile {
                    duration_s: c[0],
                    energy: Energy::from_tenths(c[1]),
                })
                .collect();
            ops.push(Operation {
                job: j,
                rank: k,
                machine: values[0] as usize,
                profile,
            });
        }
        jobs.push(ops);
    }
    Instance::new(machines, max_speed, jobs)
}
