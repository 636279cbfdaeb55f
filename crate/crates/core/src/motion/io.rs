//! JSON Lines dataset files: one demonstration per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ActionLabel, LabeledDemonstration, MotionDatabase, MotionSequence, Point3};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub positions: Vec<Point3>,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub id: String,
    pub fps: f64,
    pub joint_names: Vec<String>,
    pub action_names: Vec<String>,
    pub frames: Vec<FrameRecord>,
}

impl DemoRecord {
    pub fn from_demo(demo: &LabeledDemonstration, db: &MotionDatabase) -> Self {
        let frames = (0..demo.len())
            .map(|i| FrameRecord {
                t: demo.motion.frame_times()[i],
                positions: (0..demo.motion.joint_count()).map(|j| demo.motion.joint(i, j)).collect(),
                action: demo.actions[i].0,
            })
            .collect();
        Self {
            id: demo.id.clone(),
            fps: demo.fps,
            joint_names: db.joint_names.clone(),
            action_names: db.action_names.clone(),
            frames,
        }
    }

    pub fn into_demo(self) -> Result<LabeledDemonstration> {
        let times = self.frames.iter().map(|f| f.t).collect();
        let positions: Vec<Vec<Point3>> = self.frames.iter().map(|f| f.positions.clone()).collect();
        let actions = self.frames.iter().map(|f| ActionLabel(f.action)).collect();
        let motion = MotionSequence::from_frames(times, &positions)?;
        LabeledDemonstration::new(self.id, self.fps, motion, actions)
    }
}

pub fn write_jsonl<W: Write>(db: &MotionDatabase, mut out: W) -> Result<()> {
    for demo in &db.demonstrations {
        serde_json::to_writer(&mut out, &DemoRecord::from_demo(demo, db))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset; every line must agree on joint and action names.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<MotionDatabase> {
    let mut demos = Vec::new();
    let mut names: Option<(Vec<String>, Vec<String>)> = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DemoRecord = serde_json::from_str(&line)?;
        match &names {
            None => names = Some((record.joint_names.clone(), record.action_names.clone())),
            Some((j, a)) if *j != record.joint_names || *a != record.action_names => {
                return invalid(format!("line {}: joint or action names differ from the first record", n + 1));
            }
            Some(_) => {}
        }
        demos.push(record.into_demo()?);
    }
    let Some((joints, actions)) = names else {
        return invalid("dataset file contains no demonstrations");
    };
    MotionDatabase::new(demos, actions, joints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{synth_reach_dataset, ReachDatasetConfig};

    #[test]
    fn round_trip_preserves_database() {
        let cfg = ReachDatasetConfig { repetitions: 1, ..Default::default() };
        let db = synth_reach_dataset(&cfg, 9).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&db, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), db.len());
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn empty_file_rejected() {
        assert!(read_jsonl(&b""[..]).is_err());
    }
}
