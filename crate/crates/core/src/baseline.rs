// SPDX-License-Identifier: Apache-2.0

//! Non-spiking references: first-visit Monte Carlo control and an exact maze
//! solver.

use std::collections::VecDeque;

use serde::Serialize;

use crate::agent::Policy;
use crate::env::{Direction, Environment, MazeSpec};
use crate::learner::{train_episodes, EpisodeError, FirstAction, Learner, McAgent};
use crate::table::ValueTable;

/// Trains an [`McAgent`] for `episodes` episodes and returns its values and
/// greedy policy.
pub fn mc_control<E: Environment + ?Sized>(
    env: &mut E,
    episodes: u64,
    policy: Policy,
    first: FirstAction,
    seed: u64,
) -> Result<(ValueTable, Vec<usize>), EpisodeError> {
    let mut mc = McAgent::new(env.n_states(), env.n_actions(), policy, seed);
    train_episodes(env, &mut mc, first, episodes)?;
    let table = mc.values();
    let greedy = table.greedy_policy();
    Ok((table, greedy))
}

/// Exact solution of a deterministic maze.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MazeSolution {
    /// Shortest number of moves to the goal; `None` when unreachable.
    pub distance: Vec<Option<u32>>,
    /// Actions on some shortest path, per cell. Empty for the goal and for
    /// unreachable cells.
    pub optimal: Vec<Vec<usize>>,
    /// Non-goal cells from which the goal cannot be reached within the step
    /// limit.
    pub failing: Vec<usize>,
}

impl MazeSolution {
    pub fn certified(&self) -> bool {
        self.failing.is_empty()
    }
}

/// Breadth-first search backwards from the goal.
pub fn maze_value_iteration(spec: &MazeSpec) -> MazeSolution {
    let blocked = spec.blocked();
    let n = spec.n_cells();
    let goal = spec.goal_cell();
    let mut predecessors = vec![Vec::new(); n];
    for c in 0..n {
        for d in Direction::ALL {
            let next = spec.next_cell(&blocked, c, d);
            if next != c {
                predecessors[next].push(c);
            }
        }
    }
    let mut distance = vec![None; n];
    distance[goal] = Some(0);
    let mut queue = VecDeque::from([goal]);
    while let Some(c) = queue.pop_front() {
        let dc = distance[c].expect("queued cells have a distance");
        for &p in &predecessors[c] {
            if distance[p].is_none() {
                distance[p] = Some(dc + 1);
                queue.push_back(p);
            }
        }
    }
    let optimal = (0..n)
        .map(|c| match distance[c] {
            Some(dc) if c != goal => Direction::ALL
                .iter()
                .filter(|&&d| {
                    let next = spec.next_cell(&blocked, c, d);
                    next != c && distance[next] == Some(dc - 1)
                })
                .map(|d| d.action())
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    let failing = (0..n).filter(|&c| c != goal && distance[c].is_none_or(|d| d > spec.step_limit)).collect();
    MazeSolution { distance, optimal, failing }
}

/// Moves needed to reach the goal from `start` following `policy`, or `None`
/// if the step limit runs out first.
pub fn maze_rollout(spec: &MazeSpec, policy: &[usize], start: usize) -> Option<u32> {
    let blocked = spec.blocked();
    let goal = spec.goal_cell();
    let mut cell = start;
    for step in 0..spec.step_limit {
        if cell == goal {
            return Some(step);
        }
        let d = Direction::from_action(policy[cell])?;
        cell = spec.next_cell(&blocked, cell, d);
    }
    (cell == goal).then_some(spec.step_limit)
}

/// Non-goal cells from which `policy` fails to reach the goal within the
/// step limit.
pub fn maze_policy_failures(spec: &MazeSpec, policy: &[usize]) -> Vec<usize> {
    let goal = spec.goal_cell();
    (0..spec.n_cells()).filter(|&c| c != goal && maze_rollout(spec, policy, c).is_none()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Bandit, BanditSpec};
    use crate::seed::{stream_rng, Stream};

    #[test]
    fn open_arena_distances() {
        let spec = MazeSpec::open_arena();
        let sol = maze_value_iteration(&spec);
        assert!(sol.certified());
        assert_eq!(sol.distance[spec.goal_cell()], Some(0));
        for c in 0..25 {
            let (x, y) = spec.coords(c);
            let manhattan = (x as i64 - 2).unsigned_abs() + (y as i64 - 2).unsigned_abs();
            assert_eq!(sol.distance[c], Some(manhattan as u32));
        }
        assert_eq!(sol.distance.iter().flatten().max(), Some(&4));
        // corner (0,0): east and south both head for the center
        assert_eq!(sol.optimal[0], vec![Direction::E.action(), Direction::S.action()]);
    }

    #[test]
    fn walled_goal_routes_north() {
        let spec = MazeSpec::north_approach();
        let sol = maze_value_iteration(&spec);
        assert!(sol.certified());
        let above = spec.cell(2, 1);
        assert_eq!(sol.distance[above], Some(1));
        assert_eq!(sol.optimal[above], vec![Direction::S.action()]);
        assert_eq!(sol.distance[spec.cell(2, 3)], Some(5));
        assert_eq!(sol.distance[spec.cell(2, 4)], Some(6));
    }

    #[test]
    fn unreachable_goal_is_reported() {
        let mut spec = MazeSpec::open_arena();
        spec.walls.push((2, 2, Direction::N));
        spec.walls.extend([(2, 2, Direction::S), (2, 2, Direction::E), (2, 2, Direction::W)]);
        let sol = maze_value_iteration(&spec);
        assert_eq!(sol.failing.len(), 24);
        spec.walls.pop();
        spec.step_limit = 3;
        let sol = maze_value_iteration(&spec);
        assert!(!sol.certified());
        assert!(sol.failing.contains(&spec.cell(2, 4)));
    }

    #[test]
    fn optimal_policies_succeed_everywhere() {
        for spec in MazeSpec::phases() {
            let sol = maze_value_iteration(&spec);
            let policy: Vec<usize> = sol.optimal.iter().map(|acts| acts.first().copied().unwrap_or(0)).collect();
            assert!(maze_policy_failures(&spec, &policy).is_empty());
            for c in 0..spec.n_cells() {
                assert_eq!(maze_rollout(&spec, &policy, c), sol.distance[c]);
            }
        }
    }

    #[test]
    fn looping_policy_fails() {
        let spec = MazeSpec::open_arena();
        let policy = vec![Direction::N.action(); 25];
        let failures = maze_policy_failures(&spec, &policy);
        // only the two cells straight below the goal get there
        assert_eq!(failures.len(), 22);
        assert!(!failures.contains(&spec.cell(2, 3)) && !failures.contains(&spec.cell(2, 4)));
    }

    #[test]
    fn mc_bandit_estimates() {
        let spec = BanditSpec::default();
        let mut env = Bandit::new(spec.clone(), stream_rng(11, Stream::Environment)).unwrap();
        let (table, policy) = mc_control(&mut env, 6400, Policy::EpsilonGreedy { epsilon: 0.1 }, FirstAction::Policy, 11).unwrap();
        assert_eq!(policy, vec![3]);
        assert!((table.get(0, 3) - 0.8).abs() <= 0.05);
        for (a, &p) in spec.arm_probs.iter().enumerate() {
            let n = table.counts[a] as f64;
            assert!((table.get(0, a) - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt(), "arm {a}");
        }
    }
}
