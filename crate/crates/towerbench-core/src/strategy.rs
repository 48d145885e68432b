//! Scripted strategies and the handcrafted (HAI) priority controller.
//!
//! A strategy turns the current [`GameState`] into at most one placement.
//! [`plan`] is a pure function of the state (it never reads the level id and
//! draws no randomness), [`strategy_execute`] applies the plan. The learned
//! policy and the HAI baseline differ only in how they pick which strategy
//! runs at each decision; the placement logic below is shared by both.
//!
//! Candidate units are tried in ascending `(sun_cost, slot)` order among the
//! affordable, off-cooldown members of the strategy's semantic group.
//! Adding sun only appends candidates to the end of this order, which keeps
//! plans stable under windfalls (monotone availability). For each candidate
//! the target lanes are ranked by urgency and the plan is `None` only when
//! no candidate has any compatible free cell anywhere.

use alloc::vec::Vec;

use crate::level::{SemanticType, Terrain, COLS};
use crate::sim::{cell_of, GameState, Outcome};

/// The four scripted strategies, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Grow the sun economy.
    SowSun,
    /// Put damage on the most threatened lane.
    Attack,
    /// Wall off the most threatened uncovered lane.
    Defense,
    /// Float a platform on a Water cell.
    Prepare,
}

impl StrategyKind {
    /// All strategies in action-index order.
    pub const ALL: [StrategyKind; 4] =
        [StrategyKind::SowSun, StrategyKind::Attack, StrategyKind::Defense, StrategyKind::Prepare];

    /// Action index of this strategy.
    pub fn index(self) -> usize {
        match self {
            StrategyKind::SowSun => 0,
            StrategyKind::Attack => 1,
            StrategyKind::Defense => 2,
            StrategyKind::Prepare => 3,
        }
    }

    fn accepts(self, semantic: SemanticType) -> bool {
        match self {
            StrategyKind::SowSun => semantic == SemanticType::SunProducer,
            StrategyKind::Attack => matches!(
                semantic,
                SemanticType::AttackRanged | SemanticType::AttackMelee | SemanticType::Instant
            ),
            StrategyKind::Defense => semantic == SemanticType::Defense,
            StrategyKind::Prepare => semantic == SemanticType::Prepare,
        }
    }
}

/// A concrete placement decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    /// Loadout slot to place from.
    pub slot: usize,
    /// Target row.
    pub row: usize,
    /// Target column.
    pub col: usize,
}

/// Priority weights of the handcrafted controller, fixed for all levels:
/// `[sow per missing producer, attack per enemy, attack per past-midpoint
/// enemy, defense per uncovered lane closeness, prepare per exposed water
/// lane]`.
pub const HAI_WEIGHTS: [f64; 5] = [1.0, 0.8, 1.5, 1.2, 0.6];

/// Affordable, off-cooldown slots of the strategy's group, cheapest first.
fn candidates(kind: StrategyKind, state: &GameState) -> Vec<usize> {
    let mut slots: Vec<(u32, usize)> = state
        .level()
        .loadout
        .iter()
        .enumerate()
        .filter(|(slot, spec)| {
            kind.accepts(spec.semantic_type)
                && spec.sun_cost <= state.sun()
                && state.cooldowns()[*slot] == 0
        })
        .map(|(slot, spec)| (spec.sun_cost, slot))
        .collect();
    slots.sort_unstable();
    slots.into_iter().map(|(_, slot)| slot).collect()
}

/// Closest enemy position per lane, `None` for empty lanes.
fn closest_per_lane(state: &GameState) -> [Option<i32>; 5] {
    let mut closest = [None; 5];
    for e in state.enemies() {
        let lane = e.lane as usize;
        closest[lane] = Some(match closest[lane] {
            Some(p) if p <= e.pos => p,
            _ => e.pos,
        });
    }
    closest
}

/// True when a Defense plant stands at or before the lane's closest enemy
/// cell, i.e. the enemy will run into it.
fn lane_covered(state: &GameState, lane: usize, closest_pos: i32) -> bool {
    let cell = cell_of(closest_pos);
    (0..=cell).any(|col| {
        state.cell(lane, col).occupant.as_ref().is_some_and(|p| {
            state.level().loadout[p.slot].semantic_type == SemanticType::Defense
        })
    })
}

/// True when the lane holds at least one bare (platform-free) Water cell.
fn lane_has_bare_water(state: &GameState, lane: usize) -> bool {
    (0..COLS).any(|col| {
        let cell = state.cell(lane, col);
        cell.terrain == Terrain::Water && !cell.has_platform
    })
}

/// True when no Water cell in the lane carries a platform yet.
fn lane_unplatformed(state: &GameState, lane: usize) -> bool {
    (0..COLS).all(|col| {
        let cell = state.cell(lane, col);
        !(cell.terrain == Terrain::Water && cell.has_platform)
    })
}

/// Lanes ranked for a strategy, most urgent first. Returns lane indices.
fn ranked_lanes(kind: StrategyKind, state: &GameState) -> ([usize; 5], usize) {
    let rows = state.level().rows as usize;
    let closest = closest_per_lane(state);
    let mut order: [usize; 5] = [0; 5];
    let mut keys: [(i64, i64); 5] = [(0, 0); 5];
    let mut len = 0;
    for lane in 0..rows {
        let key = match kind {
            // Quietest lane first: fewest enemies, then leftmost index.
            StrategyKind::SowSun => {
                let count =
                    state.enemies().iter().filter(|e| e.lane as usize == lane).count() as i64;
                Some((count, lane as i64))
            }
            // Only lanes under threat, closest enemy first.
            StrategyKind::Attack => closest[lane].map(|p| (p as i64, lane as i64)),
            // Threatened lanes; uncovered ones strictly before covered ones.
            StrategyKind::Defense => closest[lane].map(|p| {
                let covered = lane_covered(state, lane, p) as i64;
                (covered * 10_000_000 + p as i64, lane as i64)
            }),
            // Lanes with bare water; threatened ones first, then by index.
            StrategyKind::Prepare => {
                if lane_has_bare_water(state, lane) {
                    Some((closest[lane].map_or(i64::MAX / 2, |p| p as i64), lane as i64))
                } else {
                    None
                }
            }
        };
        if let Some(key) = key {
            order[len] = lane;
            keys[len] = key;
            len += 1;
        }
    }
    // Insertion sort by key; five entries at most.
    for i in 1..len {
        let mut j = i;
        while j > 0 && keys[j - 1] > keys[j] {
            keys.swap(j - 1, j);
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    (order, len)
}

/// First column where `slot` fits in `lane` under the strategy's cell
/// policy, given the lane's closest enemy cell.
fn target_col(
    kind: StrategyKind,
    state: &GameState,
    slot: usize,
    lane: usize,
    enemy_cell: Option<usize>,
) -> Option<usize> {
    let fits = |col: usize| state.can_place(slot, lane, col).is_ok();
    let semantic = state.level().loadout[slot].semantic_type;
    match kind {
        // Economy and ranged fire sit as far from the spawn edge as they can.
        StrategyKind::SowSun => (0..COLS).find(|&c| fits(c)),
        StrategyKind::Attack => match semantic {
            SemanticType::AttackRanged => (0..COLS).find(|&c| fits(c)),
            // Melee meets the enemy: its cell first, then back toward home.
            SemanticType::AttackMelee => {
                let cell = enemy_cell?;
                (0..=cell).rev().find(|&c| fits(c))
            }
            // Instant detonates on the closest enemy's cell or not at all.
            SemanticType::Instant => {
                let cell = enemy_cell?;
                fits(cell).then_some(cell)
            }
            _ => None,
        },
        // The wall goes immediately ahead of the enemy, falling back toward
        // home, with the enemy's own cell as a last resort.
        StrategyKind::Defense => {
            let cell = enemy_cell?;
            (0..cell).rev().find(|&c| fits(c)).or_else(|| fits(cell).then_some(cell))
        }
        // Platforms grow from the home side of the water.
        StrategyKind::Prepare => (0..COLS).find(|&c| {
            let bc = state.cell(lane, c);
            bc.terrain == Terrain::Water && !bc.has_platform && fits(c)
        }),
    }
}

/// Computes the strategy's placement, or `None` when nothing can be placed.
///
/// Attack and Defense require at least one enemy on the board; SowSun and
/// Prepare work on empty boards. The result is deterministic and depends
/// only on board content, never on the level id.
pub fn plan(kind: StrategyKind, state: &GameState) -> Option<Placement> {
    if state.outcome() != Outcome::Ongoing {
        return None;
    }
    let closest = closest_per_lane(state);
    let (lanes, lane_count) = ranked_lanes(kind, state);
    for slot in candidates(kind, state) {
        for &lane in &lanes[..lane_count] {
            let enemy_cell = closest[lane].map(cell_of);
            if let Some(col) = target_col(kind, state, slot, lane, enemy_cell) {
                return Some(Placement { slot, row: lane, col });
            }
        }
    }
    None
}

/// Runs the strategy: plans and places. Returns whether a placement
/// happened; `false` means the plan was empty (nothing changed).
pub fn strategy_execute(kind: StrategyKind, state: &mut GameState) -> bool {
    match plan(kind, state) {
        Some(p) => {
            state
                .place_unit(p.slot, p.row, p.col)
                .expect("plan() only proposes placements that pass can_place");
            true
        }
        None => false,
    }
}

/// HAI priority vector over the four strategies, `-inf` where the plan is
/// empty.
///
/// With weights `w = HAI_WEIGHTS`:
///
/// * SowSun: `w[0] * max(0, 2 * rows - planted_producers)`
/// * Attack: `w[1] * enemies + w[2] * enemies past the midpoint`
/// * Defense: `w[3] * sum over uncovered threatened lanes of
///   (1 - closest / 9)`
/// * Prepare: `w[4] * count of threatened, fully unplatformed lanes that
///   still have bare water`
///
/// The vector is a pure function of board content; two states that differ
/// only in level id produce identical vectors.
pub fn hai_priorities(state: &GameState) -> [f64; 4] {
    let metrics = state.lane_metrics();
    let rows = state.level().rows;
    let closest = closest_per_lane(state);

    let planted_producers: u32 = metrics.planted.iter().map(|lane| lane[0]).sum();
    let deficit = (2 * rows).saturating_sub(planted_producers);
    let sow = HAI_WEIGHTS[0] * deficit as f64;

    let total_enemies: u32 = metrics.count.iter().sum();
    let past_mid: u32 = metrics.past_mid.iter().sum();
    let attack = HAI_WEIGHTS[1] * total_enemies as f64 + HAI_WEIGHTS[2] * past_mid as f64;

    let mut defense_sum = 0.0;
    let mut prepare_count = 0u32;
    for lane in 0..rows as usize {
        let Some(pos) = closest[lane] else { continue };
        if !lane_covered(state, lane, pos) {
            defense_sum += (1.0 - metrics.closest_norm[lane]).max(0.0);
        }
        if lane_has_bare_water(state, lane) && lane_unplatformed(state, lane) {
            prepare_count += 1;
        }
    }
    let defense = HAI_WEIGHTS[3] * defense_sum;
    let prepare = HAI_WEIGHTS[4] * prepare_count as f64;

    let mut priorities = [sow, attack, defense, prepare];
    for (kind, value) in StrategyKind::ALL.iter().zip(priorities.iter_mut()) {
        if plan(*kind, state).is_none() {
            *value = f64::NEG_INFINITY;
        }
    }
    priorities
}

/// Picks the highest-priority strategy with a non-empty plan; ties break
/// toward the lower action index. `None` means every plan is empty and the
/// controller idles.
pub fn hai_select(state: &GameState) -> Option<StrategyKind> {
    let priorities = hai_priorities(state);
    let mut best: Option<(f64, StrategyKind)> = None;
    for (kind, &value) in StrategyKind::ALL.iter().zip(priorities.iter()) {
        if value == f64::NEG_INFINITY {
            continue;
        }
        match best {
            Some((bv, _)) if bv >= value => {}
            _ => best = Some((value, *kind)),
        }
    }
    best.map(|(_, kind)| kind)
}
