use super::{Placement, Schedule};

pub const GANTT_HEADER: &str = "machine,job,rank,speed,start_s,end_s";

#[derive(serde::Serialize, serde::Deserialize)]
struct Row {
    machine: usize,
    job: usize,
    rank: usize,
    speed: usize,
    start_s: u64,
    end_s: u64,
}

/// One CSV row per placement, sorted by machine then start time.
pub fn gantt_export(schedule: &Schedule) -> String {
    let mut rows: Vec<&Placement> = schedule.placements.iter().collect();
    rows.sort_by_key(|p| (p.machine, p.start_s, p.job, p.rank));
    let mut out = String::with_capacity(GANTT_HEADER.len() + 1 + rows.len() * 24);
    out.push_str(GANTT_HEADER);
    out.push('\n');
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for p in rows {
        w.serialize(Row {
            machine: p.machine,
            job: p.job,
            rank: p.rank,
            speed: p.speed,
            start_s: p.start_s,
            end_s: p.end_s,
        })
        .expect("in-memory csv write");
    }
    let body = w.into_inner().expect("in-memory csv flush");
    out.push_str(std::str::from_utf8(&body).expect("csv output is ascii"));
    out
}

pub fn parse_gantt(text: &str) -> Result<Vec<Placement>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize::<Row>()
        .map(|r| {
            r.map(|r| Placement {
                job: r.job,
                rank: r.rank,
                machine: r.machine,
                speed: r.speed,
                start_s: r.start_s,
                end_s: r.end_s,
            })
        })
        .collect()
}
