//! Shared fixtures for unit tests.

/// Two boxes in an open room, no doors. With one hidden red key this gives
/// exactly two candidate worlds.
pub(crate) const TWO_BOX_MAP: &str = "\
#######
#P.B..#
#.....#
#..B.C#
#######
";

/// Three boxes in side alcoves and a blue door guarding the chest room.
pub(crate) const THREE_BOX_DOOR_MAP: &str = "\
#######
#..B..#
#.#.#.#
#B.P.B#
#.#.#.#
###D###
#..C..#
#######
door (3,5): blue
";

pub(crate) fn two_box_map() -> crate::grid::GridMap {
    crate::grid::parse_map(TWO_BOX_MAP).unwrap()
}

pub(crate) fn three_box_door_map() -> crate::grid::GridMap {
    crate::grid::parse_map(THREE_BOX_DOOR_MAP).unwrap()
}
