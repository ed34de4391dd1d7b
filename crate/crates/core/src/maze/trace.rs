//! Per-step trace files: `step,x,y,heading,v,omega,reward_low,reward_flat,event`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::MazeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    None,
    Collision,
    Subgoal,
    Goal,
}

impl TraceEvent {
    /// Collision outranks goal, goal outranks subgoal.
    pub fn from_flags(collision: bool, subgoal: bool, goal: bool) -> Self {
        if collision {
            TraceEvent::Collision
        } else if goal {
            TraceEvent::Goal
        } else if subgoal {
            TraceEvent::Subgoal
        } else {
            TraceEvent::None
        }
    }
}

/// State after `step` together with the command that produced it. Row 0 is
/// the start pose with a zero command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
    pub reward_low: f64,
    pub reward_flat: f64,
    pub event: TraceEvent,
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), MazeError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| MazeError::Trace(e.to_string()))?;
    }
    w.flush().map_err(|e| MazeError::Trace(e.to_string()))?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, MazeError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(|e| MazeError::Trace(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let rows = vec![
            TraceRow {
                step: 0,
                x: -2.0,
                y: -2.0,
                heading: 0.5,
                v: 0.0,
                omega: 0.0,
                reward_low: 0.0,
                reward_flat: 0.0,
                event: TraceEvent::None,
            },
            TraceRow {
                step: 1,
                x: -1.95,
                y: -1.9,
                heading: 0.7,
                v: 0.22,
                omega: 1.0,
                reward_low: 100.0,
                reward_flat: -8.0,
                event: TraceEvent::Subgoal,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,x,y,heading,v,omega,reward_low,reward_flat,event\n"));
        assert!(text.contains(",subgoal\n"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn event_precedence() {
        assert_eq!(
            TraceEvent::from_flags(true, true, true),
            TraceEvent::Collision
        );
        assert_eq!(TraceEvent::from_flags(false, true, true), TraceEvent::Goal);
        assert_eq!(
            TraceEvent::from_flags(false, true, false),
            TraceEvent::Subgoal
        );
        assert_eq!(
            TraceEvent::from_flags(false, false, false),
            TraceEvent::None
        );
    }
}
