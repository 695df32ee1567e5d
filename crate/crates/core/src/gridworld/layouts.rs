//! Layout generators for the four task families.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    Cell, Color, Direction, DoorState, EnvConfig, EnvKind, GridState, Object, ObjectKind, Task,
};

pub(crate) fn generate(config: &EnvConfig) -> GridState {
    match config.kind {
        EnvKind::DynamicObstacles6x6 => dynamic_obstacles(config),
        EnvKind::UnlockPickup => unlock_pickup(config),
        EnvKind::KeyCorridorS3R2 => key_corridor(config),
        EnvKind::PutNextS5N2 => put_next(config),
    }
}

fn blank(config: &EnvConfig, width: i32, height: i32) -> GridState {
    let mut cells = vec![Cell::Empty; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            if x == 0 || y == 0 || x == width - 1 || y == height - 1 {
                cells[(y * width + x) as usize] = Cell::Wall;
            }
        }
    }
    GridState::from_parts(
        config.kind,
        width,
        height,
        cells,
        (1, 1),
        Direction::East,
        Task::ReachGoal,
        "",
        config.max_steps,
        config.seed,
    )
}

/// Walls between `room_size`-wide rooms laid out `cols` x `rows`.
fn room_walls(state: &mut GridState, room_size: i32) {
    let step = room_size - 1;
    for y in 0..state.height {
        for x in 0..state.width {
            if x % step == 0 || y % step == 0 {
                state.set(x, y, Cell::Wall);
            }
        }
    }
}

/// Uniformly picks an empty cell inside `[x0, x1] x [y0, y1]` that is not
/// the agent's cell.
fn random_empty(state: &mut GridState, x0: i32, x1: i32, y0: i32, y1: i32) -> (i32, i32) {
    let agent = state.agent_pos;
    let candidates: Vec<(i32, i32)> = (y0..=y1)
        .flat_map(|y| (x0..=x1).map(move |x| (x, y)))
        .filter(|&(x, y)| state.get(x, y) == Cell::Empty && (x, y) != agent)
        .collect();
    assert!(!candidates.is_empty(), "room has no free cell");
    *candidates.choose(state.rng_mut()).expect("non-empty")
}

/// Whether `cell` is 4-adjacent to some empty cell reachable from `from`
/// through empty cells.
fn touches_reachable(state: &GridState, from: (i32, i32), cell: (i32, i32)) -> bool {
    let mut seen = vec![false; (state.width * state.height) as usize];
    let mut stack = vec![from];
    while let Some((x, y)) = stack.pop() {
        let i = (y * state.width + x) as usize;
        if seen[i] {
            continue;
        }
        seen[i] = true;
        for d in Direction::ALL {
            let (dx, dy) = d.delta();
            let n = (x + dx, y + dy);
            if n == cell {
                return true;
            }
            if state.get(n.0, n.1) == Cell::Empty {
                stack.push(n);
            }
        }
    }
    false
}

fn random_dir(state: &mut GridState) -> Direction {
    Direction::ALL[state.rng_mut().gen_range(0..4)]
}

fn distinct_colors(state: &mut GridState, n: usize) -> Vec<Color> {
    let mut colors = Color::ALL.to_vec();
    colors.shuffle(state.rng_mut());
    colors.truncate(n);
    colors
}

/// Random objects with pairwise distinct (kind, color) descriptors that
/// also differ from everything in `taken`.
fn distinct_objects(state: &mut GridState, n: usize, taken: &[Object]) -> Vec<Object> {
    let mut pool: Vec<Object> = ObjectKind::ALL
        .iter()
        .flat_map(|&k| Color::ALL.iter().map(move |&c| Object::new(k, c)))
        .filter(|o| !taken.contains(o))
        .collect();
    pool.shuffle(state.rng_mut());
    pool.truncate(n);
    pool
}

fn dynamic_obstacles(config: &EnvConfig) -> GridState {
    let mut s = blank(config, 6, 6);
    s.set(4, 4, Cell::Goal);
    s.agent_pos = (1, 1);
    s.agent_dir = Direction::East;
    for _ in 0..3 {
        let (x, y) = random_empty(&mut s, 1, 4, 1, 4);
        s.set(x, y, Cell::Ball { color: Color::Blue });
        s.obstacle_positions.push((x, y));
    }
    s.mission = "get to the green goal square".into();
    s.task = Task::ReachGoal;
    s
}

/// Two 6x6 rooms joined by a locked door; the matching key lies in the
/// agent's room, the target box and two distractors in the other room.
fn unlock_pickup(config: &EnvConfig) -> GridState {
    let mut s = blank(config, 11, 6);
    room_walls(&mut s, 6);
    let door_color = distinct_colors(&mut s, 1)[0];
    let door_y = s.rng_mut().gen_range(1..=4);
    s.set(
        5,
        door_y,
        Cell::Door {
            color: door_color,
            state: DoorState::Locked,
        },
    );
    let key = Object::new(ObjectKind::Key, door_color);
    let box_color = Color::ALL[s.rng_mut().gen_range(0..Color::ALL.len())];
    let target = Object::new(ObjectKind::Box, box_color);
    let mut right = vec![target];
    right.extend(distinct_objects(&mut s, 2, &[target, key]));
    right.shuffle(s.rng_mut());
    // Resample until the target can be reached from the doorway.
    loop {
        let mut placed = Vec::new();
        for &obj in &right {
            let (x, y) = random_empty(&mut s, 6, 9, 1, 4);
            s.set(x, y, Cell::from_object(obj));
            placed.push((x, y));
        }
        let target_pos = s.find_object(target).expect("placed");
        let doorway = (6, door_y);
        if s.get(doorway.0, doorway.1) == Cell::Empty && touches_reachable(&s, doorway, target_pos)
        {
            break;
        }
        for (x, y) in placed {
            s.set(x, y, Cell::Empty);
        }
    }
    s.agent_pos = (-1, -1);
    let (kx, ky) = random_empty(&mut s, 1, 4, 1, 4);
    s.set(kx, ky, Cell::from_object(key));
    s.agent_pos = random_empty(&mut s, 1, 4, 1, 4);
    s.agent_dir = random_dir(&mut s);
    s.mission = format!("pick up the {target}");
    s.task = Task::Pickup { target };
    s
}

/// 3x2 grid of one-cell rooms whose middle column is a corridor. One right
/// room holds the target ball behind a locked door; the key sits in a left
/// room behind a closed door.
fn key_corridor(config: &EnvConfig) -> GridState {
    let mut s = blank(config, 7, 5);
    room_walls(&mut s, 3);
    // hallway through the middle column
    s.set(3, 2, Cell::Empty);
    let rows = [1, 3];
    let colors = distinct_colors(&mut s, 4);
    let locked_row = rows[s.rng_mut().gen_range(0..2)];
    let other_row = if locked_row == 1 { 3 } else { 1 };
    let key_color = colors[0];
    s.set(
        4,
        locked_row,
        Cell::Door {
            color: key_color,
            state: DoorState::Locked,
        },
    );
    s.set(
        4,
        other_row,
        Cell::Door {
            color: colors[1],
            state: DoorState::Closed,
        },
    );
    s.set(
        2,
        1,
        Cell::Door {
            color: colors[2],
            state: DoorState::Closed,
        },
    );
    s.set(
        2,
        3,
        Cell::Door {
            color: colors[3],
            state: DoorState::Closed,
        },
    );
    let ball_color = Color::ALL[s.rng_mut().gen_range(0..Color::ALL.len())];
    let target = Object::new(ObjectKind::Ball, ball_color);
    s.set(5, locked_row, Cell::from_object(target));
    let key_row = rows[s.rng_mut().gen_range(0..2)];
    s.set(
        1,
        key_row,
        Cell::from_object(Object::new(ObjectKind::Key, key_color)),
    );
    s.agent_pos = (3, 3);
    s.agent_dir = random_dir(&mut s);
    s.mission = format!("pick up the {target}");
    s.task = Task::Pickup { target };
    s
}

/// Two 5x5 rooms with the dividing wall removed, two objects per side.
fn put_next(config: &EnvConfig) -> GridState {
    let mut s = blank(config, 9, 5);
    s.agent_pos = (-1, -1);
    let objs = distinct_objects(&mut s, 4, &[]);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, obj) in objs.iter().enumerate() {
        let pos = if i < 2 {
            random_empty(&mut s, 1, 3, 1, 3)
        } else {
            random_empty(&mut s, 5, 7, 1, 3)
        };
        s.set(pos.0, pos.1, Cell::from_object(*obj));
        if i < 2 {
            left.push(*obj);
        } else {
            right.push(*obj);
        }
    }
    let mut moved = left[s.rng_mut().gen_range(0..2)];
    let mut anchor = right[s.rng_mut().gen_range(0..2)];
    if s.rng_mut().gen_bool(0.5) {
        std::mem::swap(&mut moved, &mut anchor);
    }
    s.agent_pos = random_empty(&mut s, 1, 3, 1, 3);
    s.agent_dir = random_dir(&mut s);
    s.mission = format!("put the {moved} next to the {anchor}");
    s.task = Task::PutNext { moved, anchor };
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::reset;

    #[test]
    fn key_corridor_target_is_behind_locked_door() {
        for seed in 0..30 {
            let (s, _) = reset(&EnvConfig::new(EnvKind::KeyCorridorS3R2, seed)).unwrap();
            let Task::Pickup { target } = s.task else {
                panic!("pickup task expected")
            };
            assert!(s.mission.starts_with("pick up the "));
            assert!(s.mission.ends_with(&target.to_string()));
            let (tx, ty) = s.find_object(target).unwrap();
            let Cell::Door { color, state } = s.get(tx - 1, ty) else {
                panic!("door expected west of target")
            };
            assert_eq!(state, DoorState::Locked);
            assert!(s.find_object(Object::new(ObjectKind::Key, color)).is_some());
        }
    }

    #[test]
    fn put_next_mission_form() {
        for seed in 0..30 {
            let (s, _) = reset(&EnvConfig::new(EnvKind::PutNextS5N2, seed)).unwrap();
            let Task::PutNext { moved, anchor } = s.task else {
                panic!("put-next task expected")
            };
            assert_eq!(s.mission, format!("put the {moved} next to the {anchor}"));
            assert_eq!(s.object_count(), 4);
            assert_ne!(moved, anchor);
        }
    }

    #[test]
    fn unlock_pickup_inventory() {
        for seed in 0..30 {
            let (s, _) = reset(&EnvConfig::new(EnvKind::UnlockPickup, seed)).unwrap();
            assert_eq!(s.object_count(), 4);
            assert!(s.mission.starts_with("pick up the ") && s.mission.ends_with(" box"));
            assert!(s.agent_pos.0 < 5);
            assert!(s.get(s.agent_pos.0, s.agent_pos.1).is_passable());
        }
    }

    #[test]
    fn obstacles_never_on_agent_or_goal() {
        for seed in 0..50 {
            let (s, _) = reset(&EnvConfig::new(EnvKind::DynamicObstacles6x6, seed)).unwrap();
            assert_eq!(s.obstacle_positions.len(), 3);
            for &p in &s.obstacle_positions {
                assert_ne!(p, s.agent_pos);
                assert_ne!(p, (4, 4));
            }
        }
    }
}
