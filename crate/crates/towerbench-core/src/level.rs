//! Level model: unit/enemy catalog, level documents, and difficulty scaling.
//!
//! Levels are UTF-8 text documents with four section kinds:
//!
//! ```text
//! [level]      key = value pairs (id, rows, starting_sun, ...)
//! [terrain]    `rows` lines of 9 characters drawn from {L, W, X}
//! [loadout]    one unit id per line, at most 6
//! [wave]       start_tick = N, then entry lines "enemy_id lane count"
//! ```
//!
//! `lane` in a wave entry is a 0-based row index or `*` for a lane drawn at
//! spawn time from the episode RNG. Parsing resolves unit and enemy ids
//! against a [`Catalog`] and embeds full spec copies in the [`LevelDef`], so
//! downstream code never needs the catalog again.
//!
//! Difficulty is an integer knob in `[0, 200000]`. Scaling is integer-exact:
//! hit points multiply by `(100000 + d) / 100000` rounding down, wave counts
//! multiply by `(200000 + d) / 200000` rounding up. At `d = 0` both are the
//! identity; serialization always writes the base (unscaled) document.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Number of columns on every board.
pub const COLS: usize = 9;
/// Largest allowed number of rows (lanes).
pub const MAX_ROWS: u32 = 5;
/// Largest allowed loadout size.
pub const MAX_LOADOUT: usize = 6;
/// Upper bound of the difficulty knob.
pub const MAX_DIFFICULTY: u32 = 200_000;

/// Terrain of a single board cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terrain {
    /// Plain ground; hosts any non-Prepare unit.
    Land,
    /// Water; hosts only a Prepare unit until a platform is built on it.
    Water,
    /// Never hosts anything.
    Blocked,
}

impl Terrain {
    fn from_char(c: char) -> Option<Terrain> {
        match c {
            'L' => Some(Terrain::Land),
            'W' => Some(Terrain::Water),
            'X' => Some(Terrain::Blocked),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Terrain::Land => 'L',
            Terrain::Water => 'W',
            Terrain::Blocked => 'X',
        }
    }
}

/// Semantic class of a unit. Order is fixed: it defines the one-hot layout
/// of the observation vector and the candidate ordering inside strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticType {
    /// Produces sun tokens on a fixed period.
    SunProducer,
    /// Attacks the nearest enemy in its lane at range.
    AttackRanged,
    /// Attacks adjacent enemies in its lane.
    AttackMelee,
    /// High hit-point blocker.
    Defense,
    /// Builds a platform that lets Water cells host other units.
    Prepare,
    /// One-shot effect; never persists on the board.
    Instant,
}

impl SemanticType {
    /// All six types in observation order.
    pub const ALL: [SemanticType; 6] = [
        SemanticType::SunProducer,
        SemanticType::AttackRanged,
        SemanticType::AttackMelee,
        SemanticType::Defense,
        SemanticType::Prepare,
        SemanticType::Instant,
    ];

    /// The five types that persist on the board (everything but Instant).
    pub const PERSISTENT: [SemanticType; 5] = [
        SemanticType::SunProducer,
        SemanticType::AttackRanged,
        SemanticType::AttackMelee,
        SemanticType::Defense,
        SemanticType::Prepare,
    ];

    /// Index into [`SemanticType::ALL`].
    pub fn index(self) -> usize {
        match self {
            SemanticType::SunProducer => 0,
            SemanticType::AttackRanged => 1,
            SemanticType::AttackMelee => 2,
            SemanticType::Defense => 3,
            SemanticType::Prepare => 4,
            SemanticType::Instant => 5,
        }
    }

    /// Index into [`SemanticType::PERSISTENT`], or `None` for `Instant`.
    pub fn persistent_index(self) -> Option<usize> {
        match self {
            SemanticType::Instant => None,
            other => Some(other.index()),
        }
    }

    /// True for every type except `Instant`.
    pub fn is_persistent(self) -> bool {
        !matches!(self, SemanticType::Instant)
    }

    fn parse(s: &str) -> Option<SemanticType> {
        match s {
            "sun_producer" => Some(SemanticType::SunProducer),
            "attack_ranged" => Some(SemanticType::AttackRanged),
            "attack_melee" => Some(SemanticType::AttackMelee),
            "defense" => Some(SemanticType::Defense),
            "prepare" => Some(SemanticType::Prepare),
            "instant" => Some(SemanticType::Instant),
            _ => None,
        }
    }
}

/// Full specification of a placeable unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSpec {
    /// Catalog id, unique among units.
    pub id: String,
    /// Semantic class.
    pub semantic_type: SemanticType,
    /// Sun tokens consumed on placement.
    pub sun_cost: u32,
    /// Ticks before the same loadout slot can place again.
    pub cooldown: u32,
    /// Hit points at placement (unused for Instant).
    pub hit_points: u32,
    /// Damage dealt per hit; 0 for non-attacking units.
    pub damage_per_hit: u32,
    /// Ticks between hits; 0 iff `damage_per_hit` is 0.
    pub attack_period: u32,
    /// Reach in whole cells toward the spawn edge (ranged/melee/instant).
    pub range: u32,
    /// Sun tokens produced per period; 0 for non-producers.
    pub sun_yield: u32,
    /// Ticks between yields; 0 for non-producers.
    pub sun_period: u32,
}

/// Full specification of an enemy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnemySpec {
    /// Catalog id, unique among enemies.
    pub id: String,
    /// Hit points at spawn (before difficulty scaling).
    pub hit_points: u32,
    /// Movement speed in cells per 100 ticks.
    pub speed: u32,
    /// Damage dealt per hit to a blocking plant.
    pub damage_per_hit: u32,
    /// Ticks between hits.
    pub attack_period: u32,
}

/// Lane selector of a wave entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveLane {
    /// A fixed 0-based row index.
    Fixed(u32),
    /// Drawn uniformly from the level's rows at spawn time.
    Random,
}

/// One group of identical enemies inside a wave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveEntry {
    /// Index into [`LevelDef::enemies`].
    pub enemy: usize,
    /// Lane selector.
    pub lane: WaveLane,
    /// Number of enemies spawned (after difficulty scaling).
    pub count: u32,
}

/// A scheduled wave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveSpec {
    /// Tick at which every entry of this wave spawns.
    pub start_tick: u32,
    /// Enemy groups spawned together.
    pub entries: Vec<WaveEntry>,
}

/// A fully resolved level: board shape, loadout, enemy roster, schedule.
///
/// `loadout` and `enemies` are embedded copies of catalog specs, already
/// difficulty-scaled when `difficulty > 0`. [`LevelDef::to_document`] writes
/// the base document form, so it round-trips exactly only at difficulty 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelDef {
    /// Level id, e.g. `S01`.
    pub id: String,
    /// Number of lanes, 1..=5.
    pub rows: u32,
    /// Sun tokens held at tick 0.
    pub starting_sun: u32,
    /// Ticks between passive sun grants.
    pub passive_sun_period: u32,
    /// Sun tokens per passive grant (0 disables passive income).
    pub passive_sun_yield: u32,
    /// Tick budget; an episode still running at this tick counts as a loss.
    pub max_ticks: u32,
    /// Difficulty this definition was scaled to (0 = base).
    pub difficulty: u32,
    /// Row-major terrain, `rows * COLS` cells.
    pub terrain: Vec<Terrain>,
    /// Placeable units, at most [`MAX_LOADOUT`].
    pub loadout: Vec<UnitSpec>,
    /// Enemy specs referenced by wave entries, in first-use order.
    pub enemies: Vec<EnemySpec>,
    /// Waves ordered by non-decreasing `start_tick`.
    pub waves: Vec<WaveSpec>,
}

/// Difficulty knob with its nominal multipliers.
///
/// The multipliers describe the scaling; the authoritative arithmetic is the
/// integer form in [`LevelDef::apply_difficulty`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyParams {
    /// Raw knob value in `[0, MAX_DIFFICULTY]`.
    pub difficulty: u32,
    /// Enemy hit-point multiplier `1 + d / 100000`.
    pub hp_multiplier: f64,
    /// Wave count multiplier `1 + 0.5 * d / 100000`.
    pub count_multiplier: f64,
}

impl DifficultyParams {
    /// Builds the params, rejecting out-of-range knob values.
    pub fn new(difficulty: u32) -> Result<DifficultyParams, LevelError> {
        if difficulty > MAX_DIFFICULTY {
            return Err(LevelError::DifficultyRange { difficulty });
        }
        let d = difficulty as f64;
        Ok(DifficultyParams {
            difficulty,
            hp_multiplier: 1.0 + d / 100_000.0,
            count_multiplier: 1.0 + 0.5 * d / 100_000.0,
        })
    }
}

/// Errors from parsing, validation, or difficulty scaling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelError {
    /// The document is structurally malformed.
    Schema {
        /// 1-based line number of the offending line (0 = end of input).
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// The document parsed but violates a model invariant.
    Validation {
        /// Dotted path of the offending field, e.g. `level.rows`.
        field: String,
        /// What went wrong.
        message: String,
    },
    /// A loadout or wave line names an id the catalog does not know.
    UnknownUnit {
        /// The unresolved id.
        id: String,
    },
    /// Difficulty knob outside `[0, MAX_DIFFICULTY]`.
    DifficultyRange {
        /// The rejected value.
        difficulty: u32,
    },
}

impl fmt::Display for LevelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelError::Schema { line, message } => {
                write!(f, "schema error at line {line}: {message}")
            }
            LevelError::Validation { field, message } => {
                write!(f, "invalid {field}: {message}")
            }
            LevelError::UnknownUnit { id } => write!(f, "unknown unit or enemy id `{id}`"),
            LevelError::DifficultyRange { difficulty } => {
                write!(f, "difficulty {difficulty} outside [0, {MAX_DIFFICULTY}]")
            }
        }
    }
}

impl core::error::Error for LevelError {}

fn schema(line: usize, message: impl Into<String>) -> LevelError {
    LevelError::Schema { line, message: message.into() }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> LevelError {
    LevelError::Validation { field: field.into(), message: message.into() }
}

/// The unit and enemy roster levels draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    /// All known units.
    pub units: Vec<UnitSpec>,
    /// All known enemies.
    pub enemies: Vec<EnemySpec>,
}

/// Catalog document bundled with the crate.
pub const BUILTIN_CATALOG_DOC: &str = include_str!("data/catalog.td");

const BUILTIN_LEVEL_DOCS: [&str; 8] = [
    include_str!("data/s01.td"),
    include_str!("data/s02.td"),
    include_str!("data/s03.td"),
    include_str!("data/s04.td"),
    include_str!("data/s05.td"),
    include_str!("data/s06.td"),
    include_str!("data/s07.td"),
    include_str!("data/s08.td"),
];

impl Catalog {
    /// Parses a catalog document (`[unit]` and `[enemy]` sections).
    pub fn parse(text: &str) -> Result<Catalog, LevelError> {
        parse_catalog(text)
    }

    /// The catalog bundled with the crate.
    pub fn builtin() -> Catalog {
        Catalog::parse(BUILTIN_CATALOG_DOC).expect("builtin catalog document is valid")
    }

    /// Looks up a unit by id.
    pub fn unit(&self, id: &str) -> Option<&UnitSpec> {
        self.units.iter().find(|u| u.id == id)
    }

    /// Looks up an enemy by id.
    pub fn enemy(&self, id: &str) -> Option<&EnemySpec> {
        self.enemies.iter().find(|e| e.id == id)
    }
}

/// The eight bundled levels `S01..S08`, base difficulty, in id order.
pub fn builtin_suite() -> Vec<LevelDef> {
    let catalog = Catalog::builtin();
    BUILTIN_LEVEL_DOCS
        .iter()
        .map(|doc| LevelDef::parse(doc, &catalog).expect("builtin level document is valid"))
        .collect()
}

impl LevelDef {
    /// Parses a level document, resolving ids against `catalog`.
    pub fn parse(text: &str, catalog: &Catalog) -> Result<LevelDef, LevelError> {
        parse_level(text, catalog)
    }

    /// Writes the level back as a base document.
    ///
    /// Unit and enemy stats live in the catalog, so only ids are written;
    /// `parse(to_document(level))` equals `level` exactly when
    /// `level.difficulty == 0`.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str("[level]\n");
        out.push_str(&format!("id = {}\n", self.id));
        out.push_str(&format!("rows = {}\n", self.rows));
        out.push_str(&format!("starting_sun = {}\n", self.starting_sun));
        out.push_str(&format!("passive_sun_period = {}\n", self.passive_sun_period));
        out.push_str(&format!("passive_sun_yield = {}\n", self.passive_sun_yield));
        out.push_str(&format!("max_ticks = {}\n", self.max_ticks));
        out.push_str("\n[terrain]\n");
        for r in 0..self.rows as usize {
            for c in 0..COLS {
                out.push(self.terrain[r * COLS + c].as_char());
            }
            out.push('\n');
        }
        out.push_str("\n[loadout]\n");
        for unit in &self.loadout {
            out.push_str(&unit.id);
            out.push('\n');
        }
        for wave in &self.waves {
            out.push_str("\n[wave]\n");
            out.push_str(&format!("start_tick = {}\n", wave.start_tick));
            for entry in &wave.entries {
                let lane = match entry.lane {
                    WaveLane::Fixed(r) => r.to_string(),
                    WaveLane::Random => String::from("*"),
                };
                out.push_str(&format!(
                    "{} {} {}\n",
                    self.enemies[entry.enemy].id, lane, entry.count
                ));
            }
        }
        out
    }

    /// Returns a copy scaled to `difficulty`.
    ///
    /// Enemy hit points become `base * (100000 + d) / 100000` rounded down;
    /// wave entry counts become `count * (200000 + d) / 200000` rounded up.
    /// Terrain, loadout, sun economy, and wave timing are untouched. Apply
    /// only to base (difficulty 0) definitions; scaling does not compose.
    pub fn apply_difficulty(&self, difficulty: u32) -> Result<LevelDef, LevelError> {
        if difficulty > MAX_DIFFICULTY {
            return Err(LevelError::DifficultyRange { difficulty });
        }
        let d = difficulty as u64;
        let mut scaled = self.clone();
        scaled.difficulty = difficulty;
        for enemy in &mut scaled.enemies {
            let hp = enemy.hit_points as u64 * (100_000 + d) / 100_000;
            enemy.hit_points = hp as u32;
        }
        for wave in &mut scaled.waves {
            for entry in &mut wave.entries {
                let n = entry.count as u64 * (200_000 + d);
                entry.count = (n.div_ceil(200_000)) as u32;
            }
        }
        Ok(scaled)
    }

    /// Terrain at `(row, col)`.
    pub fn terrain_at(&self, row: usize, col: usize) -> Terrain {
        self.terrain[row * COLS + col]
    }
}

/// Splits a document into trimmed, comment-stripped lines with 1-based
/// numbers. Blank lines and lines starting with `#` are dropped.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_key_value<'a>(line: &'a str, number: usize) -> Result<(&'a str, &'a str), LevelError> {
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| schema(number, format!("expected `key = value`, got `{line}`")))?;
    Ok((key.trim(), value.trim()))
}

fn parse_u32(value: &str, number: usize, key: &str) -> Result<u32, LevelError> {
    value
        .parse::<u32>()
        .map_err(|_| schema(number, format!("`{key}` must be a non-negative integer, got `{value}`")))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn parse_catalog(text: &str) -> Result<Catalog, LevelError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Unit,
        Enemy,
    }

    let mut catalog = Catalog { units: Vec::new(), enemies: Vec::new() };
    let mut section = Section::None;
    let mut fields: Vec<(usize, String, String)> = Vec::new();
    let mut section_line = 0;

    let flush = |section: &Section,
                 fields: &mut Vec<(usize, String, String)>,
                 line: usize,
                 catalog: &mut Catalog|
     -> Result<(), LevelError> {
        match section {
            Section::None => {}
            Section::Unit => catalog.units.push(build_unit(fields, line)?),
            Section::Enemy => catalog.enemies.push(build_enemy(fields, line)?),
        }
        fields.clear();
        Ok(())
    };

    for (number, line) in content_lines(text) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            flush(&section, &mut fields, section_line, &mut catalog)?;
            section = match name {
                "unit" => Section::Unit,
                "enemy" => Section::Enemy,
                other => return Err(schema(number, format!("unknown section `[{other}]`"))),
            };
            section_line = number;
        } else {
            if section == Section::None {
                return Err(schema(number, "content before first section"));
            }
            let (key, value) = parse_key_value(line, number)?;
            fields.push((number, String::from(key), String::from(value)));
        }
    }
    flush(&section, &mut fields, section_line, &mut catalog)?;

    for (i, unit) in catalog.units.iter().enumerate() {
        if catalog.units[..i].iter().any(|u| u.id == unit.id) {
            return Err(invalid(format!("unit.{}", unit.id), "duplicate unit id"));
        }
    }
    for (i, enemy) in catalog.enemies.iter().enumerate() {
        if catalog.enemies[..i].iter().any(|e| e.id == enemy.id) {
            return Err(invalid(format!("enemy.{}", enemy.id), "duplicate enemy id"));
        }
    }
    Ok(catalog)
}

fn take_field(fields: &[(usize, String, String)], key: &str) -> Option<(usize, String)> {
    fields
        .iter()
        .find(|(_, k, _)| k == key)
        .map(|(n, _, v)| (*n, v.clone()))
}

fn build_unit(fields: &[(usize, String, String)], line: usize) -> Result<UnitSpec, LevelError> {
    let (id_line, id) =
        take_field(fields, "id").ok_or_else(|| schema(line, "unit section missing `id`"))?;
    if !valid_id(&id) {
        return Err(schema(id_line, format!("invalid unit id `{id}`")));
    }
    let (st_line, st) = take_field(fields, "semantic_type")
        .ok_or_else(|| schema(line, format!("unit `{id}` missing `semantic_type`")))?;
    let semantic_type = SemanticType::parse(&st)
        .ok_or_else(|| schema(st_line, format!("unknown semantic_type `{st}`")))?;

    let get = |key: &str, default: Option<u32>| -> Result<u32, LevelError> {
        match take_field(fields, key) {
            Some((n, v)) => parse_u32(&v, n, key),
            None => default.ok_or_else(|| schema(line, format!("unit `{id}` missing `{key}`"))),
        }
    };

    let spec = UnitSpec {
        sun_cost: get("sun_cost", None)?,
        cooldown: get("cooldown", None)?,
        hit_points: get("hit_points", None)?,
        damage_per_hit: get("damage_per_hit", Some(0))?,
        attack_period: get("attack_period", Some(0))?,
        range: get("range", Some(0))?,
        sun_yield: get("sun_yield", Some(0))?,
        sun_period: get("sun_period", Some(0))?,
        id,
        semantic_type,
    };
    validate_unit(&spec)?;
    Ok(spec)
}

fn validate_unit(spec: &UnitSpec) -> Result<(), LevelError> {
    let field = |name: &str| format!("unit.{}.{name}", spec.id);
    if spec.hit_points == 0 {
        return Err(invalid(field("hit_points"), "must be at least 1"));
    }
    if (spec.damage_per_hit > 0) != (spec.attack_period > 0) {
        return Err(invalid(
            field("attack_period"),
            "attack_period must be positive exactly when damage_per_hit is",
        ));
    }
    match spec.semantic_type {
        SemanticType::SunProducer => {
            if spec.sun_yield == 0 || spec.sun_period == 0 {
                return Err(invalid(
                    field("sun_yield"),
                    "sun producers need positive sun_yield and sun_period",
                ));
            }
            if spec.damage_per_hit > 0 {
                return Err(invalid(field("damage_per_hit"), "sun producers do not attack"));
            }
        }
        SemanticType::AttackRanged | SemanticType::AttackMelee | SemanticType::Instant => {
            if spec.damage_per_hit == 0 || spec.range == 0 {
                return Err(invalid(
                    field("damage_per_hit"),
                    "attacking units need positive damage_per_hit and range",
                ));
            }
            if spec.sun_yield > 0 {
                return Err(invalid(field("sun_yield"), "only sun producers yield sun"));
            }
        }
        SemanticType::Defense | SemanticType::Prepare => {
            if spec.damage_per_hit > 0 || spec.sun_yield > 0 {
                return Err(invalid(
                    field("damage_per_hit"),
                    "defense and prepare units neither attack nor yield sun",
                ));
            }
        }
    }
    Ok(())
}

fn build_enemy(fields: &[(usize, String, String)], line: usize) -> Result<EnemySpec, LevelError> {
    let (id_line, id) =
        take_field(fields, "id").ok_or_else(|| schema(line, "enemy section missing `id`"))?;
    if !valid_id(&id) {
        return Err(schema(id_line, format!("invalid enemy id `{id}`")));
    }
    let get = |key: &str, default: Option<u32>| -> Result<u32, LevelError> {
        match take_field(fields, key) {
            Some((n, v)) => parse_u32(&v, n, key),
            None => default.ok_or_else(|| schema(line, format!("enemy `{id}` missing `{key}`"))),
        }
    };
    let spec = EnemySpec {
        hit_points: get("hit_points", None)?,
        speed: get("speed", None)?,
        damage_per_hit: get("damage_per_hit", Some(0))?,
        attack_period: get("attack_period", Some(0))?,
        id,
    };
    let field = |name: &str| format!("enemy.{}.{name}", spec.id);
    if spec.hit_points == 0 {
        return Err(invalid(field("hit_points"), "must be at least 1"));
    }
    if spec.speed == 0 {
        return Err(invalid(field("speed"), "must be at least 1"));
    }
    if (spec.damage_per_hit > 0) != (spec.attack_period > 0) {
        return Err(invalid(
            field("attack_period"),
            "attack_period must be positive exactly when damage_per_hit is",
        ));
    }
    Ok(spec)
}

fn parse_level(text: &str, catalog: &Catalog) -> Result<LevelDef, LevelError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Section {
        None,
        Level,
        Terrain,
        Loadout,
        Wave,
    }

    let mut id: Option<String> = None;
    let mut rows: Option<u32> = None;
    let mut starting_sun: Option<u32> = None;
    let mut passive_sun_period: Option<u32> = None;
    let mut passive_sun_yield: Option<u32> = None;
    let mut max_ticks: Option<u32> = None;
    let mut terrain: Vec<Terrain> = Vec::new();
    let mut terrain_rows = 0u32;
    let mut loadout: Vec<UnitSpec> = Vec::new();
    let mut enemies: Vec<EnemySpec> = Vec::new();
    let mut waves: Vec<WaveSpec> = Vec::new();
    let mut section = Section::None;

    for (number, line) in content_lines(text) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "level" => Section::Level,
                "terrain" => Section::Terrain,
                "loadout" => Section::Loadout,
                "wave" => {
                    waves.push(WaveSpec { start_tick: u32::MAX, entries: Vec::new() });
                    Section::Wave
                }
                other => return Err(schema(number, format!("unknown section `[{other}]`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(schema(number, "content before first section")),
            Section::Level => {
                let (key, value) = parse_key_value(line, number)?;
                match key {
                    "id" => {
                        if !valid_id(value) {
                            return Err(schema(number, format!("invalid level id `{value}`")));
                        }
                        id = Some(String::from(value));
                    }
                    "rows" => rows = Some(parse_u32(value, number, key)?),
                    "starting_sun" => starting_sun = Some(parse_u32(value, number, key)?),
                    "passive_sun_period" => {
                        passive_sun_period = Some(parse_u32(value, number, key)?)
                    }
                    "passive_sun_yield" => passive_sun_yield = Some(parse_u32(value, number, key)?),
                    "max_ticks" => max_ticks = Some(parse_u32(value, number, key)?),
                    other => {
                        return Err(schema(number, format!("unknown [level] key `{other}`")))
                    }
                }
            }
            Section::Terrain => {
                if line.chars().count() != COLS {
                    return Err(schema(
                        number,
                        format!("terrain row must have exactly {COLS} cells"),
                    ));
                }
                for c in line.chars() {
                    let t = Terrain::from_char(c)
                        .ok_or_else(|| schema(number, format!("unknown terrain `{c}`")))?;
                    terrain.push(t);
                }
                terrain_rows += 1;
            }
            Section::Loadout => {
                if !valid_id(line) {
                    return Err(schema(number, format!("invalid unit id `{line}`")));
                }
                let unit = catalog
                    .unit(line)
                    .ok_or(LevelError::UnknownUnit { id: String::from(line) })?;
                loadout.push(unit.clone());
            }
            Section::Wave => {
                let wave = waves.last_mut().expect("wave section pushes an entry");
                if line.contains('=') {
                    let (key, value) = parse_key_value(line, number)?;
                    if key != "start_tick" {
                        return Err(schema(number, format!("unknown [wave] key `{key}`")));
                    }
                    wave.start_tick = parse_u32(value, number, key)?;
                    continue;
                }
                let mut parts = line.split_whitespace();
                let (enemy_id, lane_str, count_str) =
                    match (parts.next(), parts.next(), parts.next(), parts.next()) {
                        (Some(e), Some(l), Some(c), None) => (e, l, c),
                        _ => {
                            return Err(schema(
                                number,
                                "wave entry must be `enemy_id lane count`",
                            ))
                        }
                    };
                let spec = catalog
                    .enemy(enemy_id)
                    .ok_or(LevelError::UnknownUnit { id: String::from(enemy_id) })?;
                let enemy = match enemies.iter().position(|e| e.id == spec.id) {
                    Some(i) => i,
                    None => {
                        enemies.push(spec.clone());
                        enemies.len() - 1
                    }
                };
                let lane = if lane_str == "*" {
                    WaveLane::Random
                } else {
                    WaveLane::Fixed(parse_u32(lane_str, number, "lane")?)
                };
                let count = parse_u32(count_str, number, "count")?;
                wave.entries.push(WaveEntry { enemy, lane, count });
            }
        }
    }

    let require = |opt: Option<u32>, key: &str| {
        opt.ok_or_else(|| invalid(format!("level.{key}"), "missing"))
    };
    let level = LevelDef {
        id: id.ok_or_else(|| invalid("level.id", "missing"))?,
        rows: require(rows, "rows")?,
        starting_sun: require(starting_sun, "starting_sun")?,
        passive_sun_period: require(passive_sun_period, "passive_sun_period")?,
        passive_sun_yield: require(passive_sun_yield, "passive_sun_yield")?,
        max_ticks: require(max_ticks, "max_ticks")?,
        difficulty: 0,
        terrain,
        loadout,
        enemies,
        waves,
    };
    validate_level(&level, terrain_rows)?;
    Ok(level)
}

fn validate_level(level: &LevelDef, terrain_rows: u32) -> Result<(), LevelError> {
    if level.rows < 1 || level.rows > MAX_ROWS {
        return Err(invalid("level.rows", format!("must be in [1, {MAX_ROWS}]")));
    }
    if terrain_rows != level.rows {
        return Err(invalid(
            "terrain",
            format!("expected {} rows, got {terrain_rows}", level.rows),
        ));
    }
    if level.passive_sun_period == 0 {
        return Err(invalid("level.passive_sun_period", "must be at least 1"));
    }
    if level.max_ticks == 0 {
        return Err(invalid("level.max_ticks", "must be at least 1"));
    }
    if level.loadout.is_empty() {
        return Err(invalid("loadout", "must name at least one unit"));
    }
    if level.loadout.len() > MAX_LOADOUT {
        return Err(invalid("loadout", format!("at most {MAX_LOADOUT} units")));
    }
    for (i, unit) in level.loadout.iter().enumerate() {
        if level.loadout[..i].iter().any(|u| u.id == unit.id) {
            return Err(invalid("loadout", format!("duplicate unit `{}`", unit.id)));
        }
    }
    let mut last_start = 0u32;
    for (w, wave) in level.waves.iter().enumerate() {
        let field = |name: &str| format!("wave[{w}].{name}");
        if wave.start_tick == u32::MAX {
            return Err(invalid(field("start_tick"), "missing"));
        }
        if wave.start_tick < last_start {
            return Err(invalid(field("start_tick"), "waves must be ordered by start_tick"));
        }
        last_start = wave.start_tick;
        if wave.start_tick >= level.max_ticks {
            return Err(invalid(field("start_tick"), "must be before max_ticks"));
        }
        if wave.entries.is_empty() {
            return Err(invalid(field("entries"), "wave must spawn at least one enemy"));
        }
        for (e, entry) in wave.entries.iter().enumerate() {
            if entry.count == 0 {
                return Err(invalid(format!("wave[{w}].entry[{e}].count"), "must be at least 1"));
            }
            if let WaveLane::Fixed(lane) = entry.lane {
                if lane >= level.rows {
                    return Err(invalid(
                        format!("wave[{w}].entry[{e}].lane"),
                        format!("lane {lane} outside 0..{}", level.rows),
                    ));
                }
            }
        }
    }
    Ok(())
}
