//! Full-state expert used to record demonstrations.
//!
//! Every call re-plans from scratch with a breadth-first search over
//! (position, heading). Subgoals are ordered key -> door -> target; closed
//! unlocked doors are planned through and opened on arrival.

use std::collections::VecDeque;

use super::{Action, Cell, DoorState, EnvError, GridState, Object, ObjectKind, Task};

const PLAN_ACTIONS: [Action; 3] = [Action::MoveForward, Action::LeftTurn, Action::RightTurn];

#[derive(Clone, Copy, PartialEq, Eq)]
struct Pose {
    x: i32,
    y: i32,
    dir: super::Direction,
}

impl Pose {
    fn front(self) -> (i32, i32) {
        let (dx, dy) = self.dir.delta();
        (self.x + dx, self.y + dy)
    }

    fn apply(self, action: Action) -> Pose {
        match action {
            Action::LeftTurn => Pose {
                dir: self.dir.turn_left(),
                ..self
            },
            Action::RightTurn => Pose {
                dir: self.dir.turn_right(),
                ..self
            },
            Action::MoveForward => {
                let (x, y) = self.front();
                Pose { x, y, ..self }
            }
            _ => self,
        }
    }
}

struct Planner<'a> {
    state: &'a GridState,
    blocked: Vec<bool>,
}

impl<'a> Planner<'a> {
    fn new(state: &'a GridState) -> Self {
        Self {
            state,
            blocked: vec![false; (state.width * state.height) as usize],
        }
    }

    fn block(&mut self, (x, y): (i32, i32)) {
        if self.state.in_bounds(x, y) {
            let w = self.state.width;
            self.blocked[(y * w + x) as usize] = true;
        }
    }

    fn enterable(&self, (x, y): (i32, i32)) -> bool {
        if !self.state.in_bounds(x, y) || self.blocked[(y * self.state.width + x) as usize] {
            return false;
        }
        match self.state.get(x, y) {
            Cell::Door { state, .. } => state != DoorState::Locked,
            c => c.is_passable(),
        }
    }

    fn index(&self, p: Pose) -> usize {
        ((p.y * self.state.width + p.x) as usize) * 4 + p.dir.index()
    }

    /// Shortest action sequence from `start` to a pose satisfying `done`.
    fn search(&self, start: Pose, mut done: impl FnMut(Pose) -> bool) -> Option<Vec<Action>> {
        let n = (self.state.width * self.state.height) as usize * 4;
        let mut parent: Vec<Option<(usize, Action)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let s = self.index(start);
        seen[s] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let pi = self.index(p);
            if done(p) {
                let mut path = Vec::new();
                let mut cur = pi;
                while let Some((prev, a)) = parent[cur] {
                    path.push(a);
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            for a in PLAN_ACTIONS {
                if a == Action::MoveForward && !self.enterable(p.front()) {
                    continue;
                }
                let q = p.apply(a);
                let qi = self.index(q);
                if !seen[qi] {
                    seen[qi] = true;
                    parent[qi] = Some((pi, a));
                    queue.push_back(q);
                }
            }
        }
        None
    }
}

fn agent_pose(state: &GridState) -> Pose {
    Pose {
        x: state.agent_pos.0,
        y: state.agent_pos.1,
        dir: state.agent_dir,
    }
}

/// Turns a planned first step into an executable action: walking into a
/// closed door means opening it first.
fn first_step(state: &GridState, plan: &[Action], at_goal: Action) -> Action {
    match plan.first() {
        None => at_goal,
        Some(&Action::MoveForward) => {
            let (fx, fy) = state.front_pos();
            match state.get(fx, fy) {
                Cell::Door {
                    state: DoorState::Closed,
                    ..
                } => Action::Toggle,
                _ => Action::MoveForward,
            }
        }
        Some(&a) => a,
    }
}

/// One step of a shortest feasible plan for the current hidden state.
pub fn oracle_action(state: &GridState) -> Result<Action, EnvError> {
    if state.finished {
        return Err(EnvError::EpisodeFinished);
    }
    match state.task {
        Task::ReachGoal => Ok(reach_goal(state)),
        Task::Pickup { target } => pickup(state, target),
        Task::PutNext { moved, anchor } => put_next(state, moved, anchor),
    }
}

fn reach_goal(state: &GridState) -> Action {
    let goal = (0..state.height)
        .flat_map(|y| (0..state.width).map(move |x| (x, y)))
        .find(|&(x, y)| state.get(x, y) == Cell::Goal);
    let Some(goal) = goal else {
        return Action::LeftTurn;
    };
    let start = agent_pose(state);
    let at_goal = |p: Pose| (p.x, p.y) == goal;

    // First try keeping one cell of clearance from every obstacle.
    let mut cautious = Planner::new(state);
    for &(ox, oy) in &state.obstacle_positions {
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let c = (ox + dx, oy + dy);
            if c != goal {
                cautious.block(c);
            }
        }
    }
    if let Some(plan) = cautious.search(start, at_goal) {
        return first_step(state, &plan, Action::LeftTurn);
    }
    if let Some(plan) = Planner::new(state).search(start, at_goal) {
        return first_step(state, &plan, Action::LeftTurn);
    }
    // Boxed in for now; turning is always collision-free.
    Action::LeftTurn
}

fn facing(p: Pose, cell: (i32, i32)) -> bool {
    p.front() == cell
}

fn go_face(state: &GridState, cell: (i32, i32), then: Action) -> Result<Action, EnvError> {
    let plan = Planner::new(state)
        .search(agent_pose(state), |p| facing(p, cell))
        .ok_or_else(|| EnvError::Unsolvable(format!("cannot reach cell {cell:?}")))?;
    Ok(first_step(state, &plan, then))
}

/// Walks to the nearest empty cell where dropping the carried object keeps
/// `keep` reachable, then drops it.
fn drop_somewhere(
    state: &GridState,
    keep: (i32, i32),
    mut extra: impl FnMut((i32, i32)) -> bool,
) -> Result<Action, EnvError> {
    let planner = Planner::new(state);
    let plan = planner
        .search(agent_pose(state), |p| {
            let f = p.front();
            if !state.in_bounds(f.0, f.1) || state.get(f.0, f.1) != Cell::Empty || !extra(f) {
                return false;
            }
            let mut after = Planner::new(state);
            after.block(f);
            after.search(p, |q| facing(q, keep)).is_some()
        })
        .ok_or_else(|| EnvError::Unsolvable("no place to drop the carried object".into()))?;
    Ok(first_step(state, &plan, Action::Drop))
}

fn reachable(state: &GridState, cell: (i32, i32)) -> bool {
    Planner::new(state)
        .search(agent_pose(state), |p| facing(p, cell))
        .is_some()
}

fn pickup(state: &GridState, target: Object) -> Result<Action, EnvError> {
    let target_pos = state
        .find_object(target)
        .ok_or_else(|| EnvError::Unsolvable(format!("no {target} on the grid")))?;
    if reachable(state, target_pos) {
        if state.carried.is_some() {
            return drop_somewhere(state, target_pos, |_| true);
        }
        return go_face(state, target_pos, Action::Pickup);
    }

    // Need to open a locked door first.
    let locked: Vec<((i32, i32), super::Color)> = (0..state.height)
        .flat_map(|y| (0..state.width).map(move |x| (x, y)))
        .filter_map(|(x, y)| match state.get(x, y) {
            Cell::Door {
                color,
                state: DoorState::Locked,
            } => Some(((x, y), color)),
            _ => None,
        })
        .collect();
    for (door_pos, color) in locked {
        let key = Object::new(ObjectKind::Key, color);
        if state.carried == Some(key) {
            if reachable(state, door_pos) {
                return go_face(state, door_pos, Action::Toggle);
            }
            continue;
        }
        let Some(key_pos) = state.find_object(key) else {
            continue;
        };
        if !reachable(state, key_pos) {
            continue;
        }
        if state.carried.is_some() {
            return drop_somewhere(state, key_pos, |_| true);
        }
        return go_face(state, key_pos, Action::Pickup);
    }
    Err(EnvError::Unsolvable(format!(
        "no usable key for the door blocking the {target}"
    )))
}

fn put_next(state: &GridState, moved: Object, anchor: Object) -> Result<Action, EnvError> {
    let anchor_pos = state
        .find_object(anchor)
        .ok_or_else(|| EnvError::Unsolvable(format!("no {anchor} on the grid")))?;
    if state.carried == Some(moved) {
        let plan = Planner::new(state)
            .search(agent_pose(state), |p| {
                let f = p.front();
                state.in_bounds(f.0, f.1)
                    && state.get(f.0, f.1) == Cell::Empty
                    && (f.0 - anchor_pos.0).abs() + (f.1 - anchor_pos.1).abs() == 1
            })
            .ok_or_else(|| EnvError::Unsolvable(format!("no free cell next to the {anchor}")))?;
        return Ok(first_step(state, &plan, Action::Drop));
    }
    let moved_pos = state
        .find_object(moved)
        .ok_or_else(|| EnvError::Unsolvable(format!("no {moved} on the grid")))?;
    if state.carried.is_some() {
        return drop_somewhere(state, moved_pos, |c| c != anchor_pos);
    }
    go_face(state, moved_pos, Action::Pickup)
}
