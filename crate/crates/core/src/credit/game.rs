//! Text units, coalition rendering, and the memoised characteristic game.
//!
//! Units are contiguous token ranges that tile the whole sequence. A
//! coalition of units is encoded as a `u64` bitmask (bit `i` = unit `i`
//! present) and rendered back into tokens by keeping present units verbatim
//! and replacing each absent unit with a same-length run of a placeholder
//! token. [`CoalitionGame`] wraps a mask-to-score oracle with a memo cache
//! and subtracts the empty rendering's score, so the game value of the
//! empty coalition is exactly zero.

use std::collections::{BTreeMap, HashMap};

use super::CreditError;

/// Largest player count accepted by exhaustive subset enumeration.
pub const EXACT_PLAYER_CAP: usize = 20;

/// Hard player limit imposed by the `u64` coalition bitmask.
pub const MASK_PLAYER_CAP: usize = 64;

/// One credit-bearing span of the token sequence: token indices
/// `start..end` (half-open, 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub start: usize,
    pub end: usize,
}

impl Unit {
    /// Number of tokens in the unit.
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    /// True when the range is degenerate.
    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// How a token sequence is cut into units.
#[derive(Debug, Clone)]
pub enum Segmentation {
    /// Every token is its own unit.
    TokenLevel,
    /// A unit ends after any token equal to one of the delimiters; a
    /// trailing run without a delimiter forms a final unit.
    SentenceLevel { delimiters: Vec<String> },
    /// Token-level units grouped by a bracketing tree. When no tree is
    /// supplied, a balanced binary hierarchy over the tokens is built.
    SpanLevel { hierarchy: Option<Hierarchy> },
}

/// A bracketing tree whose leaves are unit indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hierarchy {
    Leaf(usize),
    Node(Vec<Hierarchy>),
}

impl Hierarchy {
    /// Balanced binary tree over units `0..player_count`; when the count is
    /// odd the extra leaf goes to the left branch.
    pub fn balanced(player_count: usize) -> Result<Self, CreditError> {
        if player_count == 0 {
            return Err(CreditError::EmptySequence);
        }
        Ok(Self::balanced_range(0, player_count))
    }

    fn balanced_range(lo: usize, hi: usize) -> Self {
        if hi - lo == 1 {
            return Hierarchy::Leaf(lo);
        }
        let mid = lo + (hi - lo).div_ceil(2);
        Hierarchy::Node(vec![
            Self::balanced_range(lo, mid),
            Self::balanced_range(mid, hi),
        ])
    }

    /// Checks that the leaves are exactly `0..player_count`, each once, and
    /// that no interior node is childless.
    pub fn validate(&self, player_count: usize) -> Result<(), CreditError> {
        let mut seen = vec![false; player_count];
        self.walk(&mut seen)?;
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(CreditError::InvalidTree(format!(
                "player {missing} has no leaf"
            )));
        }
        Ok(())
    }

    fn walk(&self, seen: &mut [bool]) -> Result<(), CreditError> {
        match self {
            Hierarchy::Leaf(p) => {
                if *p >= seen.len() {
                    return Err(CreditError::InvalidTree(format!(
                        "leaf {p} is outside the player range"
                    )));
                }
                if seen[*p] {
                    return Err(CreditError::InvalidTree(format!(
                        "player {p} appears in two leaves"
                    )));
                }
                seen[*p] = true;
                Ok(())
            }
            Hierarchy::Node(children) => {
                if children.is_empty() {
                    return Err(CreditError::InvalidTree(
                        "an interior node has no children".into(),
                    ));
                }
                for child in children {
                    child.walk(seen)?;
                }
                Ok(())
            }
        }
    }

    /// Bitmask of the players below this node.
    pub fn leaf_mask(&self) -> u64 {
        match self {
            Hierarchy::Leaf(p) => 1u64 << p,
            Hierarchy::Node(children) => children.iter().map(Hierarchy::leaf_mask).fold(0, |a, m| a | m),
        }
    }
}

/// A partition of the units into unions, optionally refined by a hierarchy
/// tree whose leaves are the units.
#[derive(Debug, Clone)]
pub struct CoalitionStructure {
    pub unions: Vec<Vec<usize>>,
    pub hierarchy: Option<Hierarchy>,
}

impl CoalitionStructure {
    /// Every player in its own union, no hierarchy.
    pub fn singletons(player_count: usize) -> Self {
        CoalitionStructure {
            unions: (0..player_count).map(|i| vec![i]).collect(),
            hierarchy: None,
        }
    }

    /// One union holding every player, no hierarchy.
    pub fn grand(player_count: usize) -> Self {
        CoalitionStructure {
            unions: vec![(0..player_count).collect()],
            hierarchy: None,
        }
    }

    /// Checks that the unions are nonempty, disjoint, and cover exactly the
    /// players `0..player_count`; the hierarchy, if any, is checked too.
    pub fn validate(&self, player_count: usize) -> Result<(), CreditError> {
        let mut seen = vec![false; player_count];
        for (b, block) in self.unions.iter().enumerate() {
            if block.is_empty() {
                return Err(CreditError::InvalidPartition(format!("union {b} is empty")));
            }
            for &p in block {
                if p >= player_count {
                    return Err(CreditError::InvalidPartition(format!(
                        "union {b} names player {p}, outside 0..{player_count}"
                    )));
                }
                if seen[p] {
                    return Err(CreditError::InvalidPartition(format!(
                        "player {p} appears in two unions"
                    )));
                }
                seen[p] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(CreditError::InvalidPartition(format!(
                "player {missing} is in no union"
            )));
        }
        if let Some(tree) = &self.hierarchy {
            tree.validate(player_count)?;
        }
        Ok(())
    }
}

/// Cuts a token sequence into units plus the coalition structure implied by
/// the strategy. Token- and sentence-level units come with singleton
/// unions; span-level keeps token units and attaches a bracketing tree.
pub fn segment(
    tokens: &[String],
    strategy: &Segmentation,
) -> Result<(Vec<Unit>, CoalitionStructure), CreditError> {
    if tokens.is_empty() {
        return Err(CreditError::EmptySequence);
    }
    match strategy {
        Segmentation::TokenLevel => {
            let units: Vec<Unit> = (0..tokens.len())
                .map(|i| Unit { start: i, end: i + 1 })
                .collect();
            let structure = CoalitionStructure::singletons(units.len());
            Ok((units, structure))
        }
        Segmentation::SentenceLevel { delimiters } => {
            let mut units = Vec::new();
            let mut start = 0;
            for (i, token) in tokens.iter().enumerate() {
                if delimiters.iter().any(|d| d == token) {
                    units.push(Unit { start, end: i + 1 });
                    start = i + 1;
                }
            }
            if start < tokens.len() {
                units.push(Unit { start, end: tokens.len() });
            }
            let structure = CoalitionStructure::singletons(units.len());
            Ok((units, structure))
        }
        Segmentation::SpanLevel { hierarchy } => {
            let units: Vec<Unit> = (0..tokens.len())
                .map(|i| Unit { start: i, end: i + 1 })
                .collect();
            let tree = match hierarchy {
                Some(tree) => {
                    tree.validate(units.len())?;
                    tree.clone()
                }
                None => Hierarchy::balanced(units.len())?,
            };
            let mut structure = CoalitionStructure::singletons(units.len());
            structure.hierarchy = Some(tree);
            Ok((units, structure))
        }
    }
}

/// Checks that the units tile `0..token_count` in order with no gaps,
/// overlaps, or empty ranges.
pub fn check_units(units: &[Unit], token_count: usize) -> Result<(), CreditError> {
    if units.is_empty() {
        return Err(CreditError::EmptySequence);
    }
    let mut expected_start = 0;
    for (i, unit) in units.iter().enumerate() {
        if unit.start != expected_start {
            return Err(CreditError::BoundaryError(format!(
                "unit {i} starts at token {} but the previous unit ends at {expected_start}",
                unit.start
            )));
        }
        if unit.is_empty() {
            return Err(CreditError::BoundaryError(format!("unit {i} is empty")));
        }
        expected_start = unit.end;
    }
    if expected_start != token_count {
        return Err(CreditError::BoundaryError(format!(
            "units cover {expected_start} tokens but the sequence has {token_count}"
        )));
    }
    Ok(())
}

/// Renders a coalition: present units keep their tokens, absent units are
/// replaced by a same-length run of the placeholder, order preserved.
pub fn render_coalition(
    tokens: &[String],
    units: &[Unit],
    coalition: u64,
    placeholder: &str,
) -> Result<Vec<String>, CreditError> {
    check_units(units, tokens.len())?;
    check_mask(coalition, units.len())?;
    let mut out = Vec::with_capacity(tokens.len());
    for (i, unit) in units.iter().enumerate() {
        if coalition >> i & 1 == 1 {
            out.extend_from_slice(&tokens[unit.start..unit.end]);
        } else {
            out.extend(std::iter::repeat_with(|| placeholder.to_string()).take(unit.len()));
        }
    }
    Ok(out)
}

fn check_mask(coalition: u64, player_count: usize) -> Result<(), CreditError> {
    if player_count < MASK_PLAYER_CAP && coalition >> player_count != 0 {
        return Err(CreditError::BoundaryError(format!(
            "coalition mask {coalition:#x} has bits at or beyond player {player_count}"
        )));
    }
    Ok(())
}

/// A characteristic-function game over ordered text units.
///
/// The oracle maps a coalition bitmask to the raw score of its rendering.
/// Raw scores are memoised, so any coalition triggers at most one oracle
/// call no matter how often it is requested; the cache is idempotent (a
/// mask always maps to the value of its first evaluation). The empty
/// rendering's raw score is evaluated eagerly and stored as the baseline,
/// and [`CoalitionGame::value`] reports `raw(S) − baseline`, making
/// `value(∅)` exactly zero.
pub struct CoalitionGame<F> {
    units: Vec<Unit>,
    oracle: F,
    cache: HashMap<u64, f64>,
    baseline: f64,
    requests: u64,
    evaluations: u64,
}

impl<F> CoalitionGame<F>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    /// Builds a game whose players are the given units; the units must tile
    /// a token range starting at 0.
    pub fn new(units: Vec<Unit>, mut oracle: F) -> Result<Self, CreditError> {
        if units.is_empty() {
            return Err(CreditError::EmptySequence);
        }
        if units.len() > MASK_PLAYER_CAP {
            return Err(CreditError::TooManyPlayers {
                count: units.len(),
                cap: MASK_PLAYER_CAP,
            });
        }
        let token_count = units.last().map(|u| u.end).unwrap_or(0);
        check_units(&units, token_count)?;
        let baseline = oracle(0)?;
        let mut cache = HashMap::new();
        cache.insert(0, baseline);
        Ok(CoalitionGame {
            units,
            oracle,
            cache,
            baseline,
            requests: 0,
            evaluations: 1,
        })
    }

    /// Convenience constructor for games without text: player `i` becomes
    /// the one-token unit `[i, i+1)`.
    pub fn abstract_game(player_count: usize, oracle: F) -> Result<Self, CreditError> {
        let units = (0..player_count)
            .map(|i| Unit { start: i, end: i + 1 })
            .collect();
        Self::new(units, oracle)
    }

    /// Baseline-subtracted worth of a coalition.
    pub fn value(&mut self, coalition: u64) -> Result<f64, CreditError> {
        check_mask(coalition, self.units.len())?;
        self.requests += 1;
        let raw = match self.cache.get(&coalition) {
            Some(&cached) => cached,
            None => {
                let fresh = (self.oracle)(coalition)?;
                self.evaluations += 1;
                self.cache.insert(coalition, fresh);
                fresh
            }
        };
        Ok(raw - self.baseline)
    }

    /// Number of players (units).
    pub fn player_count(&self) -> usize {
        self.units.len()
    }

    /// The units, in sequence order.
    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// Bitmask selecting every player.
    pub fn grand_coalition(&self) -> u64 {
        if self.units.len() == MASK_PLAYER_CAP {
            u64::MAX
        } else {
            (1u64 << self.units.len()) - 1
        }
    }

    /// Raw score of the empty rendering.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Total `value` lookups, cache hits included.
    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Underlying oracle invocations (one per distinct coalition).
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// All raw evaluations recorded so far, keyed by coalition mask in
    /// ascending order; suitable for dumping and later replay.
    pub fn evaluation_table(&self) -> BTreeMap<u64, f64> {
        self.cache.iter().map(|(&k, &v)| (k, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn token_level_puts_each_token_in_its_own_unit() {
        let (units, structure) = segment(&toks(&["a", "b", "c"]), &Segmentation::TokenLevel).unwrap();
        assert_eq!(units, vec![
            Unit { start: 0, end: 1 },
            Unit { start: 1, end: 2 },
            Unit { start: 2, end: 3 },
        ]);
        assert_eq!(structure.unions, vec![vec![0], vec![1], vec![2]]);
        assert!(structure.hierarchy.is_none());
    }

    #[test]
    fn sentence_level_splits_after_delimiter_tokens() {
        let tokens = toks(&["a", "b", ".", "c", "d", "."]);
        let strategy = Segmentation::SentenceLevel { delimiters: vec![".".into()] };
        let (units, structure) = segment(&tokens, &strategy).unwrap();
        assert_eq!(units, vec![Unit { start: 0, end: 3 }, Unit { start: 3, end: 6 }]);
        assert_eq!(structure.unions.len(), 2);
    }

    #[test]
    fn sentence_level_closes_a_trailing_unit_without_delimiter() {
        let tokens = toks(&["a", ".", "b", "c"]);
        let strategy = Segmentation::SentenceLevel { delimiters: vec![".".into()] };
        let (units, _) = segment(&tokens, &strategy).unwrap();
        assert_eq!(units, vec![Unit { start: 0, end: 2 }, Unit { start: 2, end: 4 }]);
    }

    #[test]
    fn empty_token_list_is_rejected() {
        let err = segment(&[], &Segmentation::TokenLevel).unwrap_err();
        assert!(matches!(err, CreditError::EmptySequence));
    }

    #[test]
    fn span_level_builds_a_balanced_binary_hierarchy() {
        let (units, structure) =
            segment(&toks(&["a", "b", "c", "d"]), &Segmentation::SpanLevel { hierarchy: None })
                .unwrap();
        assert_eq!(units.len(), 4);
        let expected = Hierarchy::Node(vec![
            Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)]),
            Hierarchy::Node(vec![Hierarchy::Leaf(2), Hierarchy::Leaf(3)]),
        ]);
        assert_eq!(structure.hierarchy, Some(expected));
    }

    #[test]
    fn balanced_hierarchy_gives_the_odd_leaf_to_the_left() {
        let tree = Hierarchy::balanced(3).unwrap();
        let expected = Hierarchy::Node(vec![
            Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)]),
            Hierarchy::Leaf(2),
        ]);
        assert_eq!(tree, expected);
    }

    #[test]
    fn span_level_accepts_a_matching_external_tree() {
        let tree = Hierarchy::Node(vec![
            Hierarchy::Leaf(2),
            Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)]),
        ]);
        let strategy = Segmentation::SpanLevel { hierarchy: Some(tree.clone()) };
        let (_, structure) = segment(&toks(&["a", "b", "c"]), &strategy).unwrap();
        assert_eq!(structure.hierarchy, Some(tree));
    }

    #[test]
    fn span_level_rejects_a_tree_with_mismatched_leaves() {
        let tree = Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(2)]);
        let strategy = Segmentation::SpanLevel { hierarchy: Some(tree) };
        let err = segment(&toks(&["a", "b"]), &strategy).unwrap_err();
        assert!(matches!(err, CreditError::InvalidTree(_)));
    }

    #[test]
    fn hierarchy_rejects_duplicate_and_missing_leaves() {
        let dup = Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(0)]);
        assert!(matches!(dup.validate(2), Err(CreditError::InvalidTree(_))));
        let missing = Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)]);
        assert!(matches!(missing.validate(3), Err(CreditError::InvalidTree(_))));
        let childless = Hierarchy::Node(vec![]);
        assert!(matches!(childless.validate(0), Err(CreditError::InvalidTree(_))));
    }

    #[test]
    fn structure_validation_flags_overlap_gaps_and_range() {
        let overlap = CoalitionStructure { unions: vec![vec![0, 1], vec![1]], hierarchy: None };
        assert!(matches!(overlap.validate(2), Err(CreditError::InvalidPartition(_))));
        let gap = CoalitionStructure { unions: vec![vec![0]], hierarchy: None };
        assert!(matches!(gap.validate(2), Err(CreditError::InvalidPartition(_))));
        let range = CoalitionStructure { unions: vec![vec![0, 5]], hierarchy: None };
        assert!(matches!(range.validate(2), Err(CreditError::InvalidPartition(_))));
        let empty = CoalitionStructure { unions: vec![vec![0], vec![]], hierarchy: None };
        assert!(matches!(empty.validate(1), Err(CreditError::InvalidPartition(_))));
    }

    #[test]
    fn grand_coalition_renders_the_original_sequence() {
        let tokens = toks(&["a", "b", "c", "d"]);
        let units = vec![Unit { start: 0, end: 2 }, Unit { start: 2, end: 4 }];
        let rendered = render_coalition(&tokens, &units, 0b11, "_").unwrap();
        assert_eq!(rendered, tokens);
    }

    #[test]
    fn empty_coalition_renders_all_placeholders() {
        let tokens = toks(&["a", "b", "c"]);
        let units = vec![Unit { start: 0, end: 1 }, Unit { start: 1, end: 3 }];
        let rendered = render_coalition(&tokens, &units, 0, "_").unwrap();
        assert_eq!(rendered, toks(&["_", "_", "_"]));
    }

    #[test]
    fn partial_coalition_keeps_present_units_in_place() {
        let tokens = toks(&["u1a", "u1b", "u2a", "u3a", "u3b"]);
        let units = vec![
            Unit { start: 0, end: 2 },
            Unit { start: 2, end: 3 },
            Unit { start: 3, end: 5 },
        ];
        let rendered = render_coalition(&tokens, &units, 0b101, "_").unwrap();
        assert_eq!(rendered, toks(&["u1a", "u1b", "_", "u3a", "u3b"]));
    }

    #[test]
    fn render_rejects_masks_beyond_the_unit_count() {
        let tokens = toks(&["a"]);
        let units = vec![Unit { start: 0, end: 1 }];
        let err = render_coalition(&tokens, &units, 0b10, "_").unwrap_err();
        assert!(matches!(err, CreditError::BoundaryError(_)));
    }

    #[test]
    fn unit_checks_flag_gaps_overlaps_and_short_cover() {
        let gap = vec![Unit { start: 0, end: 1 }, Unit { start: 2, end: 3 }];
        assert!(matches!(check_units(&gap, 3), Err(CreditError::BoundaryError(_))));
        let overlap = vec![Unit { start: 0, end: 2 }, Unit { start: 1, end: 3 }];
        assert!(matches!(check_units(&overlap, 3), Err(CreditError::BoundaryError(_))));
        let short = vec![Unit { start: 0, end: 2 }];
        assert!(matches!(check_units(&short, 3), Err(CreditError::BoundaryError(_))));
        assert!(check_units(&[Unit { start: 0, end: 3 }], 3).is_ok());
    }

    #[test]
    fn game_value_is_baseline_subtracted() {
        let mut game = CoalitionGame::abstract_game(2, |mask| Ok(1.0 + mask as f64)).unwrap();
        assert_eq!(game.baseline(), 1.0);
        assert_eq!(game.value(0).unwrap(), 0.0);
        assert_eq!(game.value(0b11).unwrap(), 3.0);
    }

    #[test]
    fn repeated_coalitions_hit_the_cache() {
        let mut calls = 0u32;
        let mut game = CoalitionGame::abstract_game(3, |mask| {
            calls += 1;
            Ok(mask as f64)
        })
        .unwrap();
        let _ = game.value(0b101).unwrap();
        let _ = game.value(0b101).unwrap();
        let _ = game.value(0).unwrap();
        assert_eq!(game.requests(), 3);
        assert_eq!(game.evaluations(), 2, "empty rendering plus one distinct mask");
    }

    #[test]
    fn game_rejects_too_many_or_zero_units() {
        let over = CoalitionGame::abstract_game(65, |_| Ok(0.0));
        assert!(matches!(
            over.map(|_| ()),
            Err(CreditError::TooManyPlayers { count: 65, cap: 64 })
        ));
        let zero = CoalitionGame::abstract_game(0, |_| Ok(0.0));
        assert!(matches!(zero.map(|_| ()), Err(CreditError::EmptySequence)));
    }

    #[test]
    fn game_rejects_masks_beyond_its_players() {
        let mut game = CoalitionGame::abstract_game(2, |mask| Ok(mask as f64)).unwrap();
        assert!(matches!(game.value(0b100), Err(CreditError::BoundaryError(_))));
    }

    #[test]
    fn evaluation_table_reports_raw_scores_in_mask_order() {
        let mut game = CoalitionGame::abstract_game(2, |mask| Ok(10.0 + mask as f64)).unwrap();
        let _ = game.value(0b10).unwrap();
        let _ = game.value(0b01).unwrap();
        let table: Vec<(u64, f64)> = game.evaluation_table().into_iter().collect();
        assert_eq!(table, vec![(0, 10.0), (1, 11.0), (2, 12.0)]);
    }

    #[test]
    fn oracle_errors_propagate() {
        let mut game = CoalitionGame::abstract_game(2, |mask| {
            if mask == 0b11 {
                Err(CreditError::MissingEvaluation(mask))
            } else {
                Ok(0.0)
            }
        })
        .unwrap();
        assert!(matches!(game.value(0b11), Err(CreditError::MissingEvaluation(3))));
    }
}
