//! Plain-text scenario files.
//!
//! ```text
//! bevinst-scenario 1
//! seed <u64>
//! dt <seconds>
//! frames <count>
//! frame <index> ego <x> <y> <yaw> agents <count>
//! agent <id> <x> <y> <yaw> <length> <width> <speed> <yaw_rate> <spawn_frame> <despawn_frame>
//! ...
//! ```
//!
//! Each `frame` line is followed by exactly `count` `agent` lines. Floats are written
//! in their shortest round-trip decimal form, so parsing a written file reproduces
//! the scenario bit for bit. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Pose2D;

use super::agent::AgentState;
use super::scenario::{Frame, Scenario};

const HEADER: &str = "bevinst-scenario 1";

pub fn format_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "seed {}", s.seed);
    let _ = writeln!(out, "dt {}", s.dt);
    let _ = writeln!(out, "frames {}", s.frames.len());
    for (i, f) in s.frames.iter().enumerate() {
        let _ = writeln!(
            out,
            "frame {i} ego {} {} {} agents {}",
            f.ego.x,
            f.ego.y,
            f.ego.yaw,
            f.agents.len()
        );
        for a in &f.agents {
            let _ = writeln!(
                out,
                "agent {} {} {} {} {} {} {} {} {} {}",
                a.id,
                a.pose.x,
                a.pose.y,
                a.pose.yaw,
                a.length,
                a.width,
                a.speed,
                a.yaw_rate,
                a.spawn_frame,
                a.despawn_frame
            );
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (no, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((no + 1, line.split_whitespace().collect()));
        }
        Err(Error::Format("unexpected end of scenario file".into()))
    }
}

fn field<T: std::str::FromStr>(tokens: &[&str], idx: usize, line: usize, name: &str) -> Result<T> {
    tokens
        .get(idx)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {line}: missing or invalid field `{name}`")))
}

fn expect_key(tokens: &[&str], key: &str, line: usize) -> Result<()> {
    if tokens.first() != Some(&key) {
        return Err(Error::Format(format!(
            "line {line}: expected `{key}`, found {:?}",
            tokens.first().unwrap_or(&"")
        )));
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (no, header) = lines.next()?;
    if header.join(" ") != HEADER {
        return Err(Error::Format(format!(
            "line {no}: bad header, expected `{HEADER}`"
        )));
    }
    let (no, t) = lines.next()?;
    expect_key(&t, "seed", no)?;
    let seed: u64 = field(&t, 1, no, "seed")?;
    let (no, t) = lines.next()?;
    expect_key(&t, "dt", no)?;
    let dt: f64 = field(&t, 1, no, "dt")?;
    if !(dt > 0.0) {
        return Err(Error::Format(format!("line {no}: dt must be positive")));
    }
    let (no, t) = lines.next()?;
    expect_key(&t, "frames", no)?;
    let count: usize = field(&t, 1, no, "frames")?;

    let mut frames = Vec::with_capacity(count);
    for expected in 0..count {
        let (no, t) = lines.next()?;
        expect_key(&t, "frame", no)?;
        let index: usize = field(&t, 1, no, "index")?;
        if index != expected || t.get(2) != Some(&"ego") || t.get(6) != Some(&"agents") {
            return Err(Error::Format(format!("line {no}: malformed frame record")));
        }
        let ego = Pose2D {
            x: field(&t, 3, no, "ego.x")?,
            y: field(&t, 4, no, "ego.y")?,
            yaw: field(&t, 5, no, "ego.yaw")?,
        };
        let n: usize = field(&t, 7, no, "agents")?;
        let mut agents = Vec::with_capacity(n);
        for _ in 0..n {
            let (no, t) = lines.next()?;
            expect_key(&t, "agent", no)?;
            let a = AgentState {
                id: field(&t, 1, no, "id")?,
                pose: Pose2D {
                    x: field(&t, 2, no, "x")?,
                    y: field(&t, 3, no, "y")?,
                    yaw: field(&t, 4, no, "yaw")?,
                },
                length: field(&t, 5, no, "length")?,
                width: field(&t, 6, no, "width")?,
                speed: field(&t, 7, no, "speed")?,
                yaw_rate: field(&t, 8, no, "yaw_rate")?,
                spawn_frame: field(&t, 9, no, "spawn_frame")?,
                despawn_frame: field(&t, 10, no, "despawn_frame")?,
            };
            if a.id == 0 || !(a.length > 0.0 && a.width > 0.0) || a.spawn_frame >= a.despawn_frame {
                return Err(Error::Format(format!("line {no}: invalid agent record")));
            }
            if agents.iter().any(|b: &AgentState| b.id == a.id) {
                return Err(Error::Format(format!(
                    "line {no}: duplicate agent id {}",
                    a.id
                )));
            }
            agents.push(a);
        }
        frames.push(Frame { ego, agents });
    }
    Ok(Scenario { dt, seed, frames })
}

pub fn write_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_scenario(s)).map_err(|e| Error::io(path, e))
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
