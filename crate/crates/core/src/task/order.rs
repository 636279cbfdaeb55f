use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ProgressState;
use crate::error::{invalid, Error, Result};
use crate::rng::StreamRng;

/// Precedence among human actions: `(0,1)->(2,3)` means 0 and 1 in any
/// order, then 2 and 3 in any order. `Random` leaves every order open.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TaskOrder {
    Groups(Vec<Vec<usize>>),
    Random(usize),
}

impl TaskOrder {
    pub fn parse(text: &str, n_actions: usize) -> Result<Self> {
        let order: TaskOrder = text.parse()?;
        match order {
            TaskOrder::Random(_) => Ok(TaskOrder::Random(n_actions)),
            TaskOrder::Groups(groups) => {
                if let Some(&bad) = groups.iter().flatten().find(|&&a| a >= n_actions) {
                    return invalid(format!("task order references action {bad} of {n_actions}"));
                }
                Ok(TaskOrder::Groups(groups))
            }
        }
    }

    pub fn actions(&self) -> Vec<usize> {
        match self {
            TaskOrder::Groups(g) => g.iter().flatten().copied().collect(),
            TaskOrder::Random(n) => (0..*n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Actions that may start next: the uncompleted members of the first
    /// group that still has any.
    pub fn allowed_next(&self, done: &ProgressState) -> Vec<usize> {
        match self {
            TaskOrder::Random(n) => (0..*n).filter(|&a| !done.is_completed(a)).collect(),
            TaskOrder::Groups(groups) => groups
                .iter()
                .map(|g| g.iter().copied().filter(|&a| !done.is_completed(a)).collect::<Vec<_>>())
                .find(|open| !open.is_empty())
                .unwrap_or_default(),
        }
    }

    /// One admissible full sequence.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<usize> {
        match self {
            TaskOrder::Random(n) => {
                let mut all: Vec<usize> = (0..*n).collect();
                all.shuffle(rng);
                all
            }
            TaskOrder::Groups(groups) => groups
                .iter()
                .flat_map(|g| {
                    let mut g = g.clone();
                    g.shuffle(rng);
                    g
                })
                .collect(),
        }
    }
}

impl FromStr for TaskOrder {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.len() >= 6 && text[..6].eq_ignore_ascii_case("random") {
            let n = match text[6..].trim().strip_prefix(':') {
                Some(n) => n.trim().parse().map_err(|_| Error::InvalidInput(format!("bad task order '{text}'")))?,
                None if text[6..].trim().is_empty() => 0,
                None => return invalid(format!("bad task order '{text}'")),
            };
            return Ok(TaskOrder::Random(n));
        }
        let mut groups = Vec::new();
        for part in text.split("->") {
            let part = part.trim();
            let inner = match (part.strip_prefix('('), part.strip_suffix(')')) {
                (Some(_), Some(_)) => &part[1..part.len() - 1],
                (None, None) => part,
                _ => return invalid(format!("unbalanced parentheses in '{part}'")),
            };
            let group = inner
                .split(',')
                .map(|a| a.trim().parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad action '{a}' in task order"))))
                .collect::<Result<Vec<_>>>()?;
            groups.push(group);
        }
        let mut seen: Vec<usize> = groups.iter().flatten().copied().collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return invalid("task order lists an action twice");
        }
        Ok(TaskOrder::Groups(groups))
    }
}

impl fmt::Display for TaskOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskOrder::Random(_) => write!(f, "Random"),
            TaskOrder::Groups(groups) => {
                let parts: Vec<String> = groups
                    .iter()
                    .map(|g| {
                        let items: Vec<String> = g.iter().map(usize::to_string).collect();
                        if g.len() == 1 {
                            items[0].clone()
                        } else {
                            format!("({})", items.join(","))
                        }
                    })
                    .collect();
                write!(f, "{}", parts.join("->"))
            }
        }
    }
}

impl TryFrom<String> for TaskOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TaskOrder> for String {
    fn from(o: TaskOrder) -> String {
        match o {
            TaskOrder::Random(n) => format!("Random:{n}"),
            other => other.to_string(),
        }
    }
}
