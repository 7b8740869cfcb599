//! The deterministic keys-and-doors gridworld.
//!
//! A map is a bounded grid of walls and floor with one agent start, one
//! chest, and any number of colored doors, closed boxes, and visible keys.
//! Boxes may hide keys; their contents are the only latent part of a world.
//! The agent moves in the four cardinal directions, picks up visible keys,
//! unlocks adjacent doors (consuming a key of the door's color), and opens
//! boxes it stands on, automatically collecting any key inside.
//!
//! Coordinates are `(x, y)` with `(0, 0)` at the top-left; `y` grows
//! downward, so North decreases `y`. Boxes are indexed in row-major scan
//! order and named `box1`, `box2`, ... in that order.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Upper bound on the number of hidden keys in a single world.
pub const MAX_HIDDEN_KEYS: usize = 2;

/// A grid coordinate; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Key and door colors. The derived order (declaration order) is the
/// canonical color order used wherever colors are sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyColor {
    Red,
    Blue,
    Green,
    Yellow,
    Purple,
    Orange,
}

impl KeyColor {
    pub const ALL: [KeyColor; 6] = [
        KeyColor::Red,
        KeyColor::Blue,
        KeyColor::Green,
        KeyColor::Yellow,
        KeyColor::Purple,
        KeyColor::Orange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KeyColor::Red => "red",
            KeyColor::Blue => "blue",
            KeyColor::Green => "green",
            KeyColor::Yellow => "yellow",
            KeyColor::Purple => "purple",
            KeyColor::Orange => "orange",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for KeyColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KeyColor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        KeyColor::ALL
            .into_iter()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown color `{s}`")))
    }
}

/// The four cardinal directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    /// The neighboring cell in this direction, or `None` at the grid edge.
    pub fn step(self, from: Cell, width: usize, height: usize) -> Option<Cell> {
        let (dx, dy): (isize, isize) = match self {
            Direction::North => (0, -1),
            Direction::South => (0, 1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        };
        let x = from.x as isize + dx;
        let y = from.y as isize + dy;
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            None
        } else {
            Some(Cell::new(x as usize, y as usize))
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Direction::North => "N",
            Direction::South => "S",
            Direction::East => "E",
            Direction::West => "W",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" => Ok(Direction::North),
            "S" => Ok(Direction::South),
            "E" => Ok(Direction::East),
            "W" => Ok(Direction::West),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction `{other}` (expected N, S, E, or W)"
            ))),
        }
    }
}

/// Agent actions. [`legal_actions`] lists them in the canonical order:
/// moves N/S/E/W, pick-up, unlocks N/S/E/W, open, no-op.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Move(Direction),
    PickUpKey,
    UnlockDoor(Direction),
    OpenBox,
    NoOp,
}

impl Action {
    /// All actions in canonical order (legal or not).
    pub const ALL: [Action; 11] = [
        Action::Move(Direction::North),
        Action::Move(Direction::South),
        Action::Move(Direction::East),
        Action::Move(Direction::West),
        Action::PickUpKey,
        Action::UnlockDoor(Direction::North),
        Action::UnlockDoor(Direction::South),
        Action::UnlockDoor(Direction::East),
        Action::UnlockDoor(Direction::West),
        Action::OpenBox,
        Action::NoOp,
    ];
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(d) => f.write_str(d.letter()),
            Action::PickUpKey => f.write_str("pickup"),
            Action::UnlockDoor(d) => write!(f, "unlock {}", d.letter()),
            Action::OpenBox => f.write_str("open"),
            Action::NoOp => f.write_str("noop"),
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "pickup" => return Ok(Action::PickUpKey),
            "open" => return Ok(Action::OpenBox),
            "noop" => return Ok(Action::NoOp),
            _ => {}
        }
        if let Some(rest) = t
            .strip_prefix("unlock")
            .or_else(|| t.strip_prefix("UNLOCK"))
            .or_else(|| t.strip_prefix("Unlock"))
        {
            let dir: Direction = rest.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "unknown action `{t}` (unlock needs a direction, e.g. `unlock N`)"
                ))
            })?;
            return Ok(Action::UnlockDoor(dir));
        }
        if let Ok(dir) = t.parse::<Direction>() {
            return Ok(Action::Move(dir));
        }
        Err(Error::InvalidArgument(format!("unknown action `{t}`")))
    }
}

/// A parsed, validated map: static geometry plus the fixed features
/// (doors, boxes, chest, visible keys, agent start).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    /// Door cells with their colors, in row-major order.
    pub doors: Vec<(Cell, KeyColor)>,
    /// Box cells in row-major order; index `i` is named `box{i+1}`.
    pub boxes: Vec<Cell>,
    /// Keys lying visibly on the floor, in row-major order.
    pub visible_keys: Vec<(Cell, KeyColor)>,
    pub chest: Cell,
    pub agent_start: Cell,
}

impl GridMap {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls[c.y * self.width + c.x]
    }

    pub fn door_index_at(&self, c: Cell) -> Option<usize> {
        self.doors.iter().position(|(cell, _)| *cell == c)
    }

    pub fn box_index_at(&self, c: Cell) -> Option<usize> {
        self.boxes.iter().position(|cell| *cell == c)
    }

    pub fn visible_key_index_at(&self, c: Cell) -> Option<usize> {
        self.visible_keys.iter().position(|(cell, _)| *cell == c)
    }

    /// The world with the given box contents and every dynamic flag at its
    /// start value (agent at the start cell, nothing picked up or opened).
    pub fn initial_state(&self, box_contents: Vec<Option<KeyColor>>) -> Result<WorldState> {
        if box_contents.len() != self.boxes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} box contents given for a map with {} boxes",
                box_contents.len(),
                self.boxes.len()
            )));
        }
        Ok(WorldState {
            agent_pos: self.agent_start,
            inventory: Inventory::default(),
            key_picked: vec![false; self.visible_keys.len()],
            door_open: vec![false; self.doors.len()],
            box_contents,
            box_opened: vec![false; self.boxes.len()],
            chest_taken: self.agent_start == self.chest,
        })
    }
}

/// Counts of held keys per color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Inventory([u8; KeyColor::ALL.len()]);

impl Inventory {
    pub fn count(&self, color: KeyColor) -> u8 {
        self.0[color.index()]
    }

    pub fn add(&mut self, color: KeyColor) {
        self.0[color.index()] += 1;
    }

    /// Removes one key of `color`; the caller must have checked it is held.
    pub fn remove(&mut self, color: KeyColor) {
        debug_assert!(self.0[color.index()] > 0, "removing a key that is not held");
        self.0[color.index()] -= 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    /// Held colors with nonzero counts, in canonical color order.
    pub fn iter(&self) -> impl Iterator<Item = (KeyColor, u8)> + '_ {
        KeyColor::ALL
            .into_iter()
            .filter_map(|c| (self.count(c) > 0).then_some((c, self.count(c))))
    }
}

impl fmt::Display for Inventory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (color, n) in self.iter() {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{n} {color}")?;
            first = false;
        }
        if first {
            f.write_str("empty")?;
        }
        Ok(())
    }
}

/// The full, dynamics-relevant world state. Everything except
/// `box_contents` of unopened boxes is visible to observers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub agent_pos: Cell,
    pub inventory: Inventory,
    /// Per visible key: has it been picked up?
    pub key_picked: Vec<bool>,
    /// Per door: has it been unlocked?
    pub door_open: Vec<bool>,
    /// Per box: the key currently inside, if any. Opening a box moves its
    /// key to the inventory, leaving `None`.
    pub box_contents: Vec<Option<KeyColor>>,
    /// Per box: has it been opened?
    pub box_opened: Vec<bool>,
    pub chest_taken: bool,
}

/// What an observer sees of one box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxView {
    /// Unopened: contents hidden.
    Unknown,
    /// Opened and empty.
    Empty,
    /// Opened with a key inside.
    Contains(KeyColor),
}

/// Everything visible about a state: the state minus the contents of
/// unopened boxes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub agent_pos: Cell,
    pub inventory: Inventory,
    pub key_picked: Vec<bool>,
    pub door_open: Vec<bool>,
    pub box_view: Vec<BoxView>,
    pub chest_taken: bool,
}

/// Masks the hidden contents of unopened boxes.
pub fn observe(state: &WorldState) -> Observation {
    let box_view = state
        .box_contents
        .iter()
        .zip(&state.box_opened)
        .map(|(contents, &opened)| {
            if !opened {
                BoxView::Unknown
            } else {
                match contents {
                    Some(c) => BoxView::Contains(*c),
                    None => BoxView::Empty,
                }
            }
        })
        .collect();
    Observation {
        agent_pos: state.agent_pos,
        inventory: state.inventory,
        key_picked: state.key_picked.clone(),
        door_open: state.door_open.clone(),
        box_view,
        chest_taken: state.chest_taken,
    }
}

/// Is `action` applicable in `state`?
pub fn is_legal(map: &GridMap, state: &WorldState, action: Action) -> bool {
    match action {
        Action::Move(d) => match d.step(state.agent_pos, map.width, map.height) {
            None => false,
            Some(dest) => {
                if map.is_wall(dest) {
                    return false;
                }
                match map.door_index_at(dest) {
                    Some(i) => state.door_open[i],
                    None => true,
                }
            }
        },
        Action::PickUpKey => match map.visible_key_index_at(state.agent_pos) {
            Some(i) => !state.key_picked[i],
            None => false,
        },
        Action::UnlockDoor(d) => match d.step(state.agent_pos, map.width, map.height) {
            None => false,
            Some(dest) => match map.door_index_at(dest) {
                Some(i) => {
                    let (_, color) = map.doors[i];
                    !state.door_open[i] && state.inventory.count(color) > 0
                }
                None => false,
            },
        },
        Action::OpenBox => match map.box_index_at(state.agent_pos) {
            Some(i) => !state.box_opened[i],
            None => false,
        },
        Action::NoOp => true,
    }
}

/// The applicable actions in canonical order. Never empty: no-op is always
/// legal.
pub fn legal_actions(map: &GridMap, state: &WorldState) -> Vec<Action> {
    Action::ALL
        .into_iter()
        .filter(|&a| is_legal(map, state, a))
        .collect()
}

/// Applies a legal action; rejects illegal ones.
///
/// Moving onto the chest cell takes the chest. Opening a box collects any
/// key inside into the inventory. Unlocking consumes one key of the door's
/// color.
pub fn transition(map: &GridMap, state: &WorldState, action: Action) -> Result<WorldState> {
    if !is_legal(map, state, action) {
        return Err(Error::IllegalAction {
            action: action.to_string(),
            msg: format!("not applicable at {}", state.agent_pos),
        });
    }
    let mut next = state.clone();
    match action {
        Action::Move(d) => {
            let dest = d
                .step(state.agent_pos, map.width, map.height)
                .expect("legal move stays in bounds");
            next.agent_pos = dest;
            if dest == map.chest {
                next.chest_taken = true;
            }
        }
        Action::PickUpKey => {
            let i = map
                .visible_key_index_at(state.agent_pos)
                .expect("legal pickup stands on a key");
            next.key_picked[i] = true;
            next.inventory.add(map.visible_keys[i].1);
        }
        Action::UnlockDoor(d) => {
            let dest = d
                .step(state.agent_pos, map.width, map.height)
                .expect("legal unlock targets a cell");
            let i = map.door_index_at(dest).expect("legal unlock faces a door");
            next.door_open[i] = true;
            next.inventory.remove(map.doors[i].1);
        }
        Action::OpenBox => {
            let i = map
                .box_index_at(state.agent_pos)
                .expect("legal open stands on a box");
            next.box_opened[i] = true;
            if let Some(color) = next.box_contents[i].take() {
                next.inventory.add(color);
            }
        }
        Action::NoOp => {}
    }
    Ok(next)
}

/// Can the agent still take the chest from `state`?
pub fn is_goal_reachable(map: &GridMap, state: &WorldState) -> bool {
    if state.chest_taken {
        return true;
    }
    let mut seen: std::collections::HashSet<WorldState> = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(state.clone());
    queue.push_back(state.clone());
    while let Some(s) = queue.pop_front() {
        for a in legal_actions(map, &s) {
            if a == Action::NoOp {
                continue;
            }
            let t = transition(map, &s, a).expect("legal action transitions");
            if t.chest_taken {
                return true;
            }
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    false
}

/// Enumerates every candidate initial world given the multiset of hidden
/// keys: each hidden key goes into a distinct box, the rest stay empty.
/// Placements that differ only by swapping same-colored keys coincide.
/// Worlds from which the chest is unreachable are dropped; the result is
/// sorted lexicographically by box contents (empty before any color,
/// colors in canonical order).
pub fn enumerate_initial_states(map: &GridMap, hidden: &[KeyColor]) -> Result<Vec<WorldState>> {
    if hidden.len() > MAX_HIDDEN_KEYS {
        return Err(Error::TooManyHiddenKeys(hidden.len()));
    }
    let n = map.boxes.len();
    let mut placements: BTreeSet<Vec<Option<KeyColor>>> = BTreeSet::new();
    let mut slots: Vec<usize> = Vec::with_capacity(hidden.len());
    fill_placements(n, hidden, &mut slots, &mut placements);
    let mut states = Vec::new();
    for contents in placements {
        let s = map.initial_state(contents)?;
        if is_goal_reachable(map, &s) {
            states.push(s);
        }
    }
    if states.is_empty() {
        return Err(Error::NoReachablePlacement);
    }
    Ok(states)
}

fn fill_placements(
    n_boxes: usize,
    hidden: &[KeyColor],
    slots: &mut Vec<usize>,
    out: &mut BTreeSet<Vec<Option<KeyColor>>>,
) {
    if slots.len() == hidden.len() {
        let mut contents = vec![None; n_boxes];
        for (key, &slot) in hidden.iter().zip(slots.iter()) {
            contents[slot] = Some(*key);
        }
        out.insert(contents);
        return;
    }
    for slot in 0..n_boxes {
        if !slots.contains(&slot) {
            slots.push(slot);
            fill_placements(n_boxes, hidden, slots, out);
            slots.pop();
        }
    }
}

/// Per-color key counts across inventory, floor, and boxes. Unlocking a
/// door consumes a key, so each count is non-increasing along a trajectory
/// and otherwise conserved.
#[cfg(test)]
fn key_census(map: &GridMap, state: &WorldState) -> [u32; KeyColor::ALL.len()] {
    let mut counts = [0u32; KeyColor::ALL.len()];
    for color in KeyColor::ALL {
        counts[color.index()] += state.inventory.count(color) as u32;
    }
    for (i, (_, color)) in map.visible_keys.iter().enumerate() {
        if !state.key_picked[i] {
            counts[color.index()] += 1;
        }
    }
    for color in state.box_contents.iter().flatten() {
        counts[color.index()] += 1;
    }
    counts
}

/// Parses the ASCII map format.
///
/// Grid characters: `#` wall, `.` floor, `P` agent start, `C` chest, `D`
/// door, `B` box, `k` visible key. Spaces inside grid rows are padding and
/// are ignored. After the grid, legend lines give each door and visible key
/// its color:
///
/// ```text
/// door (x,y): blue
/// key (x,y): red
/// ```
///
/// Coordinates are `(x,y)` cell coordinates as defined above. Errors name
/// the 1-based source line and column.
pub fn parse_map(text: &str) -> Result<GridMap> {
    let mut grid_rows: Vec<Vec<(char, usize)>> = Vec::new(); // (char, 1-based column)
    let mut grid_line_numbers: Vec<usize> = Vec::new();
    let mut legend: Vec<(usize, String)> = Vec::new(); // (1-based line, text)
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower.starts_with("door ")
            || lower.starts_with("door(")
            || lower.starts_with("key ")
            || lower.starts_with("key(")
        {
            legend.push((line_no, raw_line.to_string()));
            continue;
        }
        if !legend.is_empty() {
            return Err(Error::MapParse {
                line: line_no,
                col: 1,
                msg: "grid row after legend lines".into(),
            });
        }
        let mut row = Vec::new();
        for (ci, ch) in raw_line.chars().enumerate() {
            if ch == ' ' || ch == '\t' {
                continue;
            }
            row.push((ch, ci + 1));
        }
        grid_rows.push(row);
        grid_line_numbers.push(line_no);
    }
    if grid_rows.is_empty() {
        return Err(Error::MapParse {
            line: 1,
            col: 1,
            msg: "no grid rows".into(),
        });
    }

    let width = grid_rows[0].len();
    let height = grid_rows.len();
    let mut walls = vec![false; width * height];
    let mut agent: Option<Cell> = None;
    let mut chest: Option<Cell> = None;
    let mut door_cells: Vec<(Cell, usize, usize)> = Vec::new(); // cell, line, col
    let mut key_cells: Vec<(Cell, usize, usize)> = Vec::new();
    let mut boxes: Vec<Cell> = Vec::new();

    for (y, row) in grid_rows.iter().enumerate() {
        let line = grid_line_numbers[y];
        if row.len() != width {
            return Err(Error::MapParse {
                line,
                col: 1,
                msg: format!("row has {} cells, expected {}", row.len(), width),
            });
        }
        for (x, &(ch, col)) in row.iter().enumerate() {
            let cell = Cell::new(x, y);
            match ch {
                '#' => walls[y * width + x] = true,
                '.' => {}
                'P' => {
                    if agent.is_some() {
                        return Err(Error::MapParse {
                            line,
                            col,
                            msg: "duplicate agent start `P`".into(),
                        });
                    }
                    agent = Some(cell);
                }
                'C' => {
                    if chest.is_some() {
                        return Err(Error::MapParse {
                            line,
                            col,
                            msg: "duplicate chest `C`".into(),
                        });
                    }
                    chest = Some(cell);
                }
                'D' => door_cells.push((cell, line, col)),
                'B' => boxes.push(cell),
                'k' => key_cells.push((cell, line, col)),
                other => {
                    return Err(Error::MapParse {
                        line,
                        col,
                        msg: format!("unknown map character `{other}`"),
                    });
                }
            }
        }
    }

    let agent_start = agent.ok_or_else(|| Error::InvalidMap("missing agent start `P`".into()))?;
    let chest = chest.ok_or_else(|| Error::InvalidMap("missing chest `C`".into()))?;

    // Resolve legend entries to door/key cells.
    let mut door_colors: HashMap<(usize, usize), (KeyColor, usize)> = HashMap::new(); // (x,y) -> (color, line)
    let mut key_colors: HashMap<(usize, usize), (KeyColor, usize)> = HashMap::new();
    for (line, entry) in &legend {
        let (kind, cell, color) = parse_legend_line(*line, entry)?;
        let table = if kind == LegendKind::Door {
            &mut door_colors
        } else {
            &mut key_colors
        };
        let cells: Vec<Cell> = if kind == LegendKind::Door {
            door_cells.iter().map(|(c, _, _)| *c).collect()
        } else {
            key_cells.iter().map(|(c, _, _)| *c).collect()
        };
        if !cells.contains(&cell) {
            return Err(Error::MapParse {
                line: *line,
                col: 1,
                msg: format!(
                    "legend names a {} at {cell}, but the grid has no {} there",
                    kind.word(),
                    kind.word()
                ),
            });
        }
        if table.insert((cell.x, cell.y), (color, *line)).is_some() {
            return Err(Error::MapParse {
                line: *line,
                col: 1,
                msg: format!("duplicate legend entry for the {} at {cell}", kind.word()),
            });
        }
    }

    let mut doors = Vec::with_capacity(door_cells.len());
    for (cell, line, col) in &door_cells {
        match door_colors.get(&(cell.x, cell.y)) {
            Some((color, _)) => doors.push((*cell, *color)),
            None => {
                return Err(Error::MapParse {
                    line: *line,
                    col: *col,
                    msg: format!("door at {cell} has no color in the legend"),
                });
            }
        }
    }
    let mut visible_keys = Vec::with_capacity(key_cells.len());
    for (cell, line, col) in &key_cells {
        match key_colors.get(&(cell.x, cell.y)) {
            Some((color, _)) => visible_keys.push((*cell, *color)),
            None => {
                return Err(Error::MapParse {
                    line: *line,
                    col: *col,
                    msg: format!("key at {cell} has no color in the legend"),
                });
            }
        }
    }

    Ok(GridMap {
        width,
        height,
        walls,
        doors,
        boxes,
        visible_keys,
        chest,
        agent_start,
    })
}

#[derive(PartialEq, Clone, Copy)]
enum LegendKind {
    Door,
    Key,
}

impl LegendKind {
    fn word(self) -> &'static str {
        match self {
            LegendKind::Door => "door",
            LegendKind::Key => "key",
        }
    }
}

fn parse_legend_line(line: usize, text: &str) -> Result<(LegendKind, Cell, KeyColor)> {
    let err = |col: usize, msg: String| Error::MapParse { line, col, msg };
    let lower = text.to_ascii_lowercase();
    let trimmed_start = text.len() - text.trim_start().len();
    let kind = if lower.trim_start().starts_with("door") {
        LegendKind::Door
    } else {
        LegendKind::Key
    };
    let open = lower
        .find('(')
        .ok_or_else(|| err(trimmed_start + 1, "legend entry is missing `(x,y)`".into()))?;
    let close = lower[open..]
        .find(')')
        .map(|i| open + i)
        .ok_or_else(|| err(open + 1, "legend coordinates are missing `)`".into()))?;
    let coords = &text[open + 1..close];
    let mut parts = coords.splitn(2, ',');
    let xs = parts.next().unwrap_or("").trim();
    let ys = parts
        .next()
        .ok_or_else(|| err(open + 1, "legend coordinates need the form `(x,y)`".into()))?
        .trim();
    let x: usize = xs
        .parse()
        .map_err(|_| err(open + 2, format!("bad x coordinate `{xs}`")))?;
    let y: usize = ys
        .parse()
        .map_err(|_| err(open + 2, format!("bad y coordinate `{ys}`")))?;
    let colon = text[close..]
        .find(':')
        .map(|i| close + i)
        .ok_or_else(|| err(close + 1, "legend entry is missing `:` before the color".into()))?;
    let color_text = text[colon + 1..].trim();
    let color: KeyColor = color_text
        .parse()
        .map_err(|_| err(colon + 2, format!("unknown color `{color_text}`")))?;
    Ok((kind, Cell::new(x, y), color))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{two_box_map, THREE_BOX_DOOR_MAP};

    #[test]
    fn parses_basic_map() {
        let m = two_box_map();
        assert_eq!(m.width, 7);
        assert_eq!(m.height, 5);
        assert_eq!(m.agent_start, Cell::new(1, 1));
        assert_eq!(m.chest, Cell::new(5, 3));
        assert_eq!(m.boxes, vec![Cell::new(3, 1), Cell::new(3, 3)]);
        assert!(m.doors.is_empty());
        assert!(m.is_wall(Cell::new(0, 0)));
        assert!(!m.is_wall(Cell::new(2, 2)));
    }

    #[test]
    fn parses_door_legend() {
        let m = parse_map(THREE_BOX_DOOR_MAP).unwrap();
        assert_eq!(m.doors, vec![(Cell::new(3, 5), KeyColor::Blue)]);
        assert_eq!(
            m.boxes,
            vec![Cell::new(3, 1), Cell::new(1, 3), Cell::new(5, 3)]
        );
        assert_eq!(m.agent_start, Cell::new(3, 3));
        assert_eq!(m.chest, Cell::new(3, 6));
    }

    #[test]
    fn grid_rows_may_be_space_padded() {
        let padded = "\
# # # #
# P . #
# . C #
# # # #
";
        let m = parse_map(padded).unwrap();
        assert_eq!(m.width, 4);
        assert_eq!(m.height, 4);
        assert_eq!(m.agent_start, Cell::new(1, 1));
    }

    #[test]
    fn rejects_duplicate_agent() {
        let text = "\
####
#PP#
#C.#
####
";
        let err = parse_map(text).unwrap_err();
        match err {
            Error::MapParse { line, col, ref msg } => {
                assert_eq!(line, 2);
                assert_eq!(col, 3);
                assert!(msg.contains("duplicate agent"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_character() {
        let err = parse_map("##\n#Q\n").unwrap_err();
        match err {
            Error::MapParse { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_legend_without_door() {
        let text = "\
####
#PC#
####
door (1,1): red
";
        let err = parse_map(text).unwrap_err();
        match err {
            Error::MapParse { line, ref msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("no door"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_door_without_legend() {
        let text = "\
####
#PD#
#.C#
####
";
        let err = parse_map(text).unwrap_err();
        match err {
            Error::MapParse { line, col, ref msg } => {
                assert_eq!(line, 2);
                assert_eq!(col, 3);
                assert!(msg.contains("no color"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = parse_map("###\n##\n").unwrap_err();
        match err {
            Error::MapParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn move_and_chest_pickup() {
        let m = two_box_map();
        let s = m.initial_state(vec![None, None]).unwrap();
        assert!(is_legal(&m, &s, Action::Move(Direction::East)));
        assert!(!is_legal(&m, &s, Action::Move(Direction::North)));
        assert!(!is_legal(&m, &s, Action::Move(Direction::West)));
        // Walk to the chest: E E E E S S.
        let mut cur = s;
        for a in [
            Action::Move(Direction::East),
            Action::Move(Direction::East),
            Action::Move(Direction::East),
            Action::Move(Direction::East),
            Action::Move(Direction::South),
            Action::Move(Direction::South),
        ] {
            cur = transition(&m, &cur, a).unwrap();
        }
        assert_eq!(cur.agent_pos, m.chest);
        assert!(cur.chest_taken);
    }

    #[test]
    fn open_box_collects_key() {
        let m = two_box_map();
        let s0 = m
            .initial_state(vec![Some(KeyColor::Red), None])
            .unwrap();
        let mut s = s0.clone();
        for a in [Action::Move(Direction::East), Action::Move(Direction::East)] {
            s = transition(&m, &s, a).unwrap();
        }
        assert_eq!(s.agent_pos, Cell::new(3, 1));
        assert!(is_legal(&m, &s, Action::OpenBox));
        let opened = transition(&m, &s, Action::OpenBox).unwrap();
        assert!(opened.box_opened[0]);
        assert_eq!(opened.box_contents[0], None);
        assert_eq!(opened.inventory.count(KeyColor::Red), 1);
        // Reopening is illegal.
        assert!(!is_legal(&m, &opened, Action::OpenBox));
        assert!(transition(&m, &opened, Action::OpenBox).is_err());
        // Census is conserved by opening.
        assert_eq!(key_census(&m, &s0), key_census(&m, &opened));
    }

    #[test]
    fn unlock_consumes_key_and_opens_path() {
        let m = parse_map(THREE_BOX_DOOR_MAP).unwrap();
        let mut s = m
            .initial_state(vec![Some(KeyColor::Blue), None, None])
            .unwrap();
        // Door is closed: cannot walk into it from above.
        s = transition(&m, &s, Action::Move(Direction::South)).unwrap();
        assert_eq!(s.agent_pos, Cell::new(3, 4));
        assert!(!is_legal(&m, &s, Action::Move(Direction::South)));
        // No key yet: unlock illegal.
        assert!(!is_legal(&m, &s, Action::UnlockDoor(Direction::South)));
        // Fetch the blue key from box1.
        for a in [
            Action::Move(Direction::North),
            Action::Move(Direction::North),
            Action::Move(Direction::North),
            Action::OpenBox,
        ] {
            s = transition(&m, &s, a).unwrap();
        }
        assert_eq!(s.inventory.count(KeyColor::Blue), 1);
        for a in [
            Action::Move(Direction::South),
            Action::Move(Direction::South),
            Action::Move(Direction::South),
        ] {
            s = transition(&m, &s, a).unwrap();
        }
        let before = s.clone();
        s = transition(&m, &s, Action::UnlockDoor(Direction::South)).unwrap();
        assert!(s.door_open[0]);
        assert_eq!(s.inventory.count(KeyColor::Blue), 0);
        // The consumed key leaves the census.
        let mut census = key_census(&m, &before);
        census[KeyColor::Blue as usize] -= 1;
        assert_eq!(key_census(&m, &s), census);
        // Now the agent can walk through to the chest.
        s = transition(&m, &s, Action::Move(Direction::South)).unwrap();
        s = transition(&m, &s, Action::Move(Direction::South)).unwrap();
        assert!(s.chest_taken);
    }

    #[test]
    fn pickup_visible_key() {
        let text = "\
#####
#P.C#
#k..#
#####
key (1,2): green
";
        let m = parse_map(text).unwrap();
        let mut s = m.initial_state(vec![]).unwrap();
        assert!(!is_legal(&m, &s, Action::PickUpKey));
        s = transition(&m, &s, Action::Move(Direction::South)).unwrap();
        assert!(is_legal(&m, &s, Action::PickUpKey));
        s = transition(&m, &s, Action::PickUpKey).unwrap();
        assert!(s.key_picked[0]);
        assert_eq!(s.inventory.count(KeyColor::Green), 1);
        assert!(!is_legal(&m, &s, Action::PickUpKey));
    }

    #[test]
    fn observation_masks_unopened_boxes() {
        let m = two_box_map();
        let red = m.initial_state(vec![Some(KeyColor::Red), None]).unwrap();
        let empty = m.initial_state(vec![None, None]).unwrap();
        // Same observation while both boxes are closed.
        assert_eq!(observe(&red), observe(&empty));
        assert_eq!(observe(&red).box_view, vec![BoxView::Unknown, BoxView::Unknown]);
        // Opening distinguishes them... through the inventory and the view.
        let mut s = red;
        for a in [Action::Move(Direction::East), Action::Move(Direction::East)] {
            s = transition(&m, &s, a).unwrap();
        }
        s = transition(&m, &s, Action::OpenBox).unwrap();
        assert_eq!(observe(&s).box_view[0], BoxView::Empty);
        assert_eq!(observe(&s).inventory.count(KeyColor::Red), 1);
    }

    #[test]
    fn enumerates_single_hidden_key() {
        let m = two_box_map();
        let states = enumerate_initial_states(&m, &[KeyColor::Red]).unwrap();
        assert_eq!(states.len(), 2);
        assert_eq!(
            states[0].box_contents,
            vec![None, Some(KeyColor::Red)],
            "empty sorts before any color"
        );
        assert_eq!(states[1].box_contents, vec![Some(KeyColor::Red), None]);
    }

    #[test]
    fn enumerates_duplicate_colors_once() {
        let m = two_box_map();
        let states = enumerate_initial_states(&m, &[KeyColor::Red, KeyColor::Red]).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(
            states[0].box_contents,
            vec![Some(KeyColor::Red), Some(KeyColor::Red)]
        );
    }

    #[test]
    fn enumerates_two_distinct_keys() {
        let m = parse_map(THREE_BOX_DOOR_MAP).unwrap();
        let states =
            enumerate_initial_states(&m, &[KeyColor::Blue, KeyColor::Red]).unwrap();
        // 3 boxes, 2 distinct keys in distinct boxes: 3*2 = 6 placements,
        // all goal-reachable (the blue key is always findable).
        assert_eq!(states.len(), 6);
        for pair in states.windows(2) {
            assert!(pair[0].box_contents < pair[1].box_contents, "sorted output");
        }
    }

    #[test]
    fn unreachable_placements_are_dropped() {
        // The box behind the blue door cannot hold the only blue key:
        // the agent could never open the door to get it.
        let text = "\
#######
#P.D.B#
#....##
#C...##
#######
door (3,1): blue
";
        let m = parse_map(text).unwrap();
        // Chest is freely reachable, so every placement survives here.
        let states = enumerate_initial_states(&m, &[KeyColor::Blue]).unwrap();
        assert_eq!(states.len(), 1);

        // Move the chest behind the door instead: the key in the
        // behind-the-door box is unreachable, so that placement dies.
        let text2 = "\
#######
#P.D.C#
#.B..##
#.B..##
#######
door (3,1): blue
";
        let m2 = parse_map(text2).unwrap();
        let states2 = enumerate_initial_states(&m2, &[KeyColor::Blue]).unwrap();
        assert_eq!(states2.len(), 2, "both in-front boxes work");

        let text3 = "\
######
#P.DC#
######
door (3,1): blue
";
        let m3 = parse_map(text3).unwrap();
        assert!(matches!(
            enumerate_initial_states(&m3, &[KeyColor::Blue]),
            Err(Error::NoReachablePlacement)
        ));
    }

    #[test]
    fn too_many_hidden_keys() {
        let m = two_box_map();
        assert!(matches!(
            enumerate_initial_states(&m, &[KeyColor::Red, KeyColor::Blue, KeyColor::Green]),
            Err(Error::TooManyHiddenKeys(3))
        ));
    }

    #[test]
    fn goal_reachability_respects_locked_doors() {
        let text = "\
######
#P.DC#
######
door (3,1): blue
";
        let m = parse_map(text).unwrap();
        let s = m.initial_state(vec![]).unwrap();
        assert!(!is_goal_reachable(&m, &s));
        let mut with_key = s;
        with_key.inventory.add(KeyColor::Blue);
        assert!(is_goal_reachable(&m, &with_key));
    }

    #[test]
    fn action_round_trip_strings() {
        for a in Action::ALL {
            let text = a.to_string();
            let back: Action = text.parse().unwrap();
            assert_eq!(a, back, "{text}");
        }
        assert!("fly".parse::<Action>().is_err());
        assert!("unlock".parse::<Action>().is_err());
    }

    #[test]
    fn legal_actions_canonical_order() {
        let m = two_box_map();
        let s = m.initial_state(vec![None, None]).unwrap();
        let legal = legal_actions(&m, &s);
        assert_eq!(
            legal,
            vec![
                Action::Move(Direction::South),
                Action::Move(Direction::East),
                Action::NoOp
            ]
        );
    }

    #[test]
    fn key_census_conserved_under_moves_and_opens() {
        let m = parse_map(THREE_BOX_DOOR_MAP).unwrap();
        let s0 = m
            .initial_state(vec![Some(KeyColor::Blue), Some(KeyColor::Red), None])
            .unwrap();
        let census0 = key_census(&m, &s0);
        let mut s = s0;
        for a in [
            Action::Move(Direction::North),
            Action::Move(Direction::North),
            Action::OpenBox,
            Action::Move(Direction::South),
            Action::Move(Direction::South),
            Action::Move(Direction::West),
            Action::Move(Direction::West),
            Action::OpenBox,
            Action::NoOp,
        ] {
            s = transition(&m, &s, a).unwrap();
            assert_eq!(key_census(&m, &s), census0);
        }
        assert_eq!(s.inventory.count(KeyColor::Blue), 1);
        assert_eq!(s.inventory.count(KeyColor::Red), 1);
    }
}
