//! Per-step agent state export (`step,agent,type,x,y,heading,speed,reward`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub step: u64,
    pub agent: usize,
    #[serde(rename = "type")]
    pub kind: String,
    pub x: f32,
    pub y: f32,
    pub heading: f32,
    pub speed: f32,
    pub reward: f32,
}

/// CSV writer with a header row and LF record terminators.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_rows<W: Write>(w: W, rows: &[SnapshotRow]) -> csv::Result<()> {
    let mut out = csv_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> csv::Result<Vec<SnapshotRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let rows = vec![SnapshotRow {
            step: 3,
            agent: 1,
            kind: "runner".into(),
            x: 1.5,
            y: 99.25,
            heading: 0.1,
            speed: 0.375,
            reward: -1.0,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,agent,type,x,y,heading,speed,reward\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }
}
