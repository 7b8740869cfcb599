//! A small language of epistemic statements about the gridworld.
//!
//! A statement wraps a propositional formula about boxes and keys in one
//! epistemic modal applied to the agent:
//!
//! ```text
//! believes(player, exists K. iscolor(K, blue) and inside(K, box1))
//! knows(player, empty(box2))
//! certain(player, not inside(red, box1))
//! ```
//!
//! Atoms: `inside(keyterm, boxN)`, `iscolor(keyterm, color)`, `empty(boxN)`.
//! A key term is either a variable bound by `exists` or a color constant.
//! Connectives bind `not` tightest, then `and`, then `or`; `exists VAR .`
//! extends as far right as possible. Variables may shadow outer bindings.
//!
//! The modal semantics is probabilistic: the degree of belief in the inner
//! formula is the total weight of belief particles whose candidate world
//! satisfies it. `believes` and `certain` hold when the degree reaches
//! their thresholds (weak inequality); `knows` additionally requires the
//! inner formula to be true in the actual world.

mod parser;

pub use parser::parse;

use std::fmt;

use crate::belief::Weight;
use crate::error::{Error, Result};
use crate::grid::{GridMap, KeyColor, WorldState};

/// A key-valued term: a bound variable or a color constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyTerm {
    Var(String),
    Color(KeyColor),
}

impl fmt::Display for KeyTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyTerm::Var(name) => f.write_str(name),
            KeyTerm::Color(c) => f.write_str(c.name()),
        }
    }
}

/// A 0-based box index, written `box1`, `box2`, ... in the surface syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxId(pub usize);

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "box{}", self.0 + 1)
    }
}

/// The propositional part of a statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InnerFormula {
    /// A key (by term) is inside the given box.
    Inside(KeyTerm, BoxId),
    /// The term denotes a key of the given color.
    IsColor(KeyTerm, KeyColor),
    /// The box currently holds no key (true for opened, emptied boxes).
    Empty(BoxId),
    Not(Box<InnerFormula>),
    And(Box<InnerFormula>, Box<InnerFormula>),
    Or(Box<InnerFormula>, Box<InnerFormula>),
    /// Existential quantification over the key objects of the world.
    Exists(String, Box<InnerFormula>),
}

/// The three supported modals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modal {
    Believes,
    Knows,
    Certain,
}

impl Modal {
    pub fn name(self) -> &'static str {
        match self {
            Modal::Believes => "believes",
            Modal::Knows => "knows",
            Modal::Certain => "certain",
        }
    }
}

impl fmt::Display for Modal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete statement: a modal, the agent it is about, and the inner
/// formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpistemicFormula {
    pub modal: Modal,
    pub agent: String,
    pub inner: InnerFormula,
}

/// Degree-of-belief thresholds for the three modals, each in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalThresholds {
    pub believes: f64,
    pub knows: f64,
    pub certain: f64,
}

impl Default for ModalThresholds {
    fn default() -> Self {
        ModalThresholds {
            believes: 0.5,
            knows: 0.5,
            certain: 0.99,
        }
    }
}

impl ModalThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("believes", self.believes),
            ("knows", self.knows),
            ("certain", self.certain),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "threshold for `{name}` must be in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    fn for_modal(&self, modal: Modal) -> f64 {
        match modal {
            Modal::Believes => self.believes,
            Modal::Knows => self.knows,
            Modal::Certain => self.certain,
        }
    }
}

/// A key object of a world: its color and where it currently is. Keys
/// consumed by unlocking doors no longer exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct KeyObject {
    color: KeyColor,
    location: KeyLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KeyLocation {
    Floor,
    Held,
    InBox(usize),
}

fn collect_key_objects(map: &GridMap, world: &WorldState) -> Vec<KeyObject> {
    let mut objects = Vec::new();
    for (i, (_, color)) in map.visible_keys.iter().enumerate() {
        if !world.key_picked[i] {
            objects.push(KeyObject {
                color: *color,
                location: KeyLocation::Floor,
            });
        }
    }
    for (color, n) in world.inventory.iter() {
        for _ in 0..n {
            objects.push(KeyObject {
                color,
                location: KeyLocation::Held,
            });
        }
    }
    for (i, contents) in world.box_contents.iter().enumerate() {
        if let Some(color) = contents {
            objects.push(KeyObject {
                color: *color,
                location: KeyLocation::InBox(i),
            });
        }
    }
    objects
}

enum Resolved {
    Object(KeyObject),
    Color(KeyColor),
}

fn resolve(term: &KeyTerm, env: &[(String, KeyObject)]) -> Resolved {
    match term {
        KeyTerm::Color(c) => Resolved::Color(*c),
        KeyTerm::Var(name) => {
            let obj = env
                .iter()
                .rev()
                .find(|(bound, _)| bound == name)
                .map(|(_, obj)| *obj)
                .expect("formula was checked for unbound variables");
            Resolved::Object(obj)
        }
    }
}

/// Truth of the inner formula in one world. Box indices must be valid for
/// the map (see [`validate_against_map`]).
pub fn eval_inner(formula: &InnerFormula, map: &GridMap, world: &WorldState) -> bool {
    let objects = collect_key_objects(map, world);
    let mut env = Vec::new();
    eval_rec(formula, world, &objects, &mut env)
}

fn eval_rec(
    formula: &InnerFormula,
    world: &WorldState,
    objects: &[KeyObject],
    env: &mut Vec<(String, KeyObject)>,
) -> bool {
    match formula {
        InnerFormula::Inside(term, b) => match resolve(term, env) {
            Resolved::Object(obj) => obj.location == KeyLocation::InBox(b.0),
            Resolved::Color(c) => world.box_contents[b.0] == Some(c),
        },
        InnerFormula::IsColor(term, color) => match resolve(term, env) {
            Resolved::Object(obj) => obj.color == *color,
            Resolved::Color(c) => c == *color,
        },
        InnerFormula::Empty(b) => world.box_contents[b.0].is_none(),
        InnerFormula::Not(inner) => !eval_rec(inner, world, objects, env),
        InnerFormula::And(l, r) => {
            eval_rec(l, world, objects, env) && eval_rec(r, world, objects, env)
        }
        InnerFormula::Or(l, r) => {
            eval_rec(l, world, objects, env) || eval_rec(r, world, objects, env)
        }
        InnerFormula::Exists(var, body) => objects.iter().any(|obj| {
            env.push((var.clone(), *obj));
            let result = eval_rec(body, world, objects, env);
            env.pop();
            result
        }),
    }
}

/// The weight-sum of particles whose candidate world satisfies the inner
/// formula. Exact: weights are rationals.
pub fn degree_of_belief<'a>(
    formula: &InnerFormula,
    map: &GridMap,
    particles: impl IntoIterator<Item = (Weight, &'a WorldState)>,
) -> Weight {
    particles
        .into_iter()
        .filter(|(_, world)| eval_inner(formula, map, world))
        .map(|(w, _)| w)
        .sum()
}

/// Truth of the full statement given the actual world and the agent's
/// belief particles. Thresholds are weak: a degree exactly at the
/// threshold counts. `knows` is factive — it also requires the inner
/// formula to hold in the actual world.
pub fn eval_epistemic<'a>(
    formula: &EpistemicFormula,
    map: &GridMap,
    actual: &WorldState,
    particles: impl IntoIterator<Item = (Weight, &'a WorldState)>,
    thresholds: &ModalThresholds,
) -> bool {
    let degree = crate::belief::weight_to_f64(degree_of_belief(&formula.inner, map, particles));
    let reached = degree >= thresholds.for_modal(formula.modal);
    match formula.modal {
        Modal::Believes | Modal::Certain => reached,
        Modal::Knows => reached && eval_inner(&formula.inner, map, actual),
    }
}

/// Checks that every box mentioned exists on the map.
pub fn validate_against_map(formula: &EpistemicFormula, map: &GridMap) -> Result<()> {
    fn walk(f: &InnerFormula, n_boxes: usize) -> Result<()> {
        match f {
            InnerFormula::Inside(_, b) | InnerFormula::Empty(b) => {
                if b.0 >= n_boxes {
                    return Err(Error::UnknownBox {
                        name: b.to_string(),
                        count: n_boxes,
                    });
                }
                Ok(())
            }
            InnerFormula::IsColor(_, _) => Ok(()),
            InnerFormula::Not(inner) => walk(inner, n_boxes),
            InnerFormula::And(l, r) | InnerFormula::Or(l, r) => {
                walk(l, n_boxes)?;
                walk(r, n_boxes)
            }
            InnerFormula::Exists(_, body) => walk(body, n_boxes),
        }
    }
    walk(&formula.inner, map.boxes.len())
}

// Precedence for the printer: `or` < `and` < `not` < atoms. `exists`
// extends greedily to the right, so it is parenthesized whenever it
// appears under any connective.
fn precedence(f: &InnerFormula) -> u8 {
    match f {
        InnerFormula::Exists(_, _) => 0,
        InnerFormula::Or(_, _) => 1,
        InnerFormula::And(_, _) => 2,
        InnerFormula::Not(_) => 3,
        _ => 4,
    }
}

fn fmt_child(
    f: &mut fmt::Formatter<'_>,
    child: &InnerFormula,
    parent_prec: u8,
    is_right: bool,
) -> fmt::Result {
    let needs_parens = if is_right {
        precedence(child) <= parent_prec
    } else {
        precedence(child) < parent_prec
    };
    if needs_parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for InnerFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerFormula::Inside(term, b) => write!(f, "inside({term}, {b})"),
            InnerFormula::IsColor(term, c) => write!(f, "iscolor({term}, {})", c.name()),
            InnerFormula::Empty(b) => write!(f, "empty({b})"),
            InnerFormula::Not(inner) => {
                f.write_str("not ")?;
                fmt_child(f, inner, precedence(self), false)
            }
            InnerFormula::And(l, r) => {
                fmt_child(f, l, precedence(self), false)?;
                f.write_str(" and ")?;
                fmt_child(f, r, precedence(self), true)
            }
            InnerFormula::Or(l, r) => {
                fmt_child(f, l, precedence(self), false)?;
                f.write_str(" or ")?;
                fmt_child(f, r, precedence(self), true)
            }
            InnerFormula::Exists(var, body) => write!(f, "exists {var}. {body}"),
        }
    }
}

impl fmt::Display for EpistemicFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.modal, self.agent, self.inner)
    }
}
