use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Game, Mode};
use crate::error::{Error, Result};
use crate::mechanism::{approval_mass, row_to_vec, select_from_mass, Instance, RewardSchedule, VotingProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub expert: usize,
    pub old_votes: Vec<u8>,
    pub new_votes: Vec<u8>,
    /// Winner after the move.
    pub winner: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    FixedPoint,
    /// The profile after the last move was already visited `length` moves earlier.
    Cycle { length: usize },
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    pub start: VotingProfile,
    pub path: Vec<Move>,
    pub terminal: Terminal,
    pub final_profile: VotingProfile,
}

/// Round-robin best-response dynamics.
///
/// At every step the lowest-index expert who wants to move does so. A
/// strategic expert moves when some vote vector beats theirs by more than the
/// tolerance; a semi-strategic expert moves whenever their vote vector is not
/// among their (honesty-adjusted) best responses. The new vector is the
/// best response with the smallest bitmask.
pub fn best_response_dynamics(
    instance: &Instance,
    schedule: &RewardSchedule,
    start: &VotingProfile,
    mode: Mode,
    max_steps: usize,
) -> Result<DynamicsTrace> {
    if max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
    }
    crate::mechanism::winner(instance, start)?;
    let game = Game::new(instance, schedule)?;
    let k = instance.k();

    let mut rows = start.rows().to_vec();
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    seen.insert(rows.clone(), 0);
    let mut path = Vec::new();

    let terminal = loop {
        let Some((expert, next)) = (0..instance.n()).find_map(|i| mover(&game, &rows, i, mode)) else {
            break Terminal::FixedPoint;
        };
        let old = rows[expert];
        rows[expert] = next;
        path.push(Move {
            expert,
            old_votes: row_to_vec(old, k),
            new_votes: row_to_vec(next, k),
            winner: select_from_mass(&approval_mass(instance.weights(), &rows, k)),
        });
        let step = path.len();
        if let Some(&first) = seen.get(&rows) {
            break Terminal::Cycle { length: step - first };
        }
        seen.insert(rows.clone(), step);
        if step >= max_steps {
            break Terminal::StepLimit;
        }
    };

    Ok(DynamicsTrace {
        start: start.clone(),
        path,
        terminal,
        final_profile: VotingProfile::from_bits(k, rows)?,
    })
}

fn mover(game: &Game<'_>, rows: &[u32], expert: usize, mode: Mode) -> Option<(usize, u32)> {
    // Strategic best responses are all near-maximizers, so not being among
    // them means an improving move exists; semi-strategic ones also encode
    // the forced return to honesty.
    let responses = game.best_responses(rows, expert, mode);
    (!responses.contains(&rows[expert])).then(|| (expert, responses[0]))
}
