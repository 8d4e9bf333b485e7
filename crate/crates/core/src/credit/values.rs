//! Credit allocations over coalition games.
//!
//! Three allocators, all efficient (credits sum to the grand-coalition
//! value): exact Shapley values by subset enumeration, Owen values over a
//! flat partition into unions, and a recursive hierarchical variant whose
//! oracle cost on balanced trees is quadratic in the player count instead
//! of exponential.

use super::game::{CoalitionGame, CoalitionStructure, Hierarchy, EXACT_PLAYER_CAP};
use super::CreditError;

/// Per-unit credits plus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditVector {
    values: Vec<f64>,
    total: f64,
}

impl CreditVector {
    /// Wraps raw credits; the total is their plain sum.
    pub fn new(values: Vec<f64>) -> Self {
        let total = values.iter().sum();
        CreditVector { values, total }
    }

    /// Credits in unit order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of all credits; equals the grand-coalition value for the
    /// allocators in this module, up to float accumulation.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact binomial coefficient; every intermediate product stays an
/// integer, so the result is exact for any `n ≤ 64`.
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for t in 1..=k {
        c = c * (n - k + t) as u128 / t as u128;
    }
    c as f64
}

/// Per-subset-size Shapley weights `1 / (n · C(n−1, s))`, equal to
/// `s!(n−s−1)!/n!` without forming factorials.
fn shapley_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect()
}

/// Exact Shapley values by enumerating every coalition.
///
/// Each player's weighted marginal contributions are summed in a canonical
/// (sorted) order, so two players whose marginal-contribution multisets are
/// identical receive bit-identical credits: the symmetry and null-player
/// axioms hold exactly, not merely within float tolerance.
pub fn exact_shapley<F>(game: &mut CoalitionGame<F>) -> Result<CreditVector, CreditError>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    let n = game.player_count();
    if n > EXACT_PLAYER_CAP {
        return Err(CreditError::TooManyPlayers { count: n, cap: EXACT_PLAYER_CAP });
    }
    let weights = shapley_weights(n);
    let size = 1usize << n;
    let mut table = vec![0.0; size];
    for mask in 0..size {
        table[mask] = game.value(mask as u64)?;
    }
    let mut values = Vec::with_capacity(n);
    let mut terms = Vec::with_capacity(size / 2);
    for i in 0..n {
        let bit = 1usize << i;
        terms.clear();
        for mask in 0..size {
            if mask & bit == 0 {
                let s = (mask as u64).count_ones() as usize;
                terms.push(weights[s] * (table[mask | bit] - table[mask]));
            }
        }
        terms.sort_by(f64::total_cmp);
        values.push(terms.iter().sum());
    }
    Ok(CreditVector::new(values))
}

/// Owen values for a flat partition into unions.
///
/// For player `i` in union `B(i)`: outer sum over subsets `R` of the other
/// unions with weight `|R|!(m−|R|−1)!/m!`, inner sum over subsets `S` of
/// `B(i)∖{i}` with weight `|S|!(|B(i)|−|S|−1)!/|B(i)|!`, marginal
/// `v(Q ∪ S ∪ {i}) − v(Q ∪ S)` where `Q` unites the unions in `R`.
pub fn owen_value<F>(
    game: &mut CoalitionGame<F>,
    structure: &CoalitionStructure,
) -> Result<CreditVector, CreditError>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    let n = game.player_count();
    structure.validate(n)?;
    let unions = &structure.unions;
    let m = unions.len();
    if m > EXACT_PLAYER_CAP {
        return Err(CreditError::TooManyPlayers { count: m, cap: EXACT_PLAYER_CAP });
    }
    let union_masks: Vec<u64> = unions
        .iter()
        .map(|block| block.iter().fold(0u64, |acc, &p| acc | 1 << p))
        .collect();
    let outer_weights = shapley_weights(m);
    let mut values = vec![0.0; n];
    for (k, block) in unions.iter().enumerate() {
        if block.len() > EXACT_PLAYER_CAP {
            return Err(CreditError::TooManyPlayers {
                count: block.len(),
                cap: EXACT_PLAYER_CAP,
            });
        }
        let inner_weights = shapley_weights(block.len());
        let other_masks: Vec<u64> = (0..m).filter(|&b| b != k).map(|b| union_masks[b]).collect();
        for outer_sub in 0..(1u64 << other_masks.len()) {
            let mut q = 0u64;
            let mut r_size = 0usize;
            for (t, om) in other_masks.iter().enumerate() {
                if outer_sub >> t & 1 == 1 {
                    q |= om;
                    r_size += 1;
                }
            }
            let w_outer = outer_weights[r_size];
            for &i in block {
                let mates: Vec<usize> = block.iter().copied().filter(|&p| p != i).collect();
                for inner_sub in 0..(1u64 << mates.len()) {
                    let mut base = q;
                    let mut s_size = 0usize;
                    for (t, &p) in mates.iter().enumerate() {
                        if inner_sub >> t & 1 == 1 {
                            base |= 1 << p;
                            s_size += 1;
                        }
                    }
                    let marginal = game.value(base | 1 << i)? - game.value(base)?;
                    values[i] += w_outer * inner_weights[s_size] * marginal;
                }
            }
        }
    }
    Ok(CreditVector::new(values))
}

/// Recursive hierarchical credit over a bracketing tree.
///
/// At each interior node the children act as indivisible players: for child
/// `j`, every subset `R` of its siblings joins the outer coalition with
/// weight `|R|!(k−|R|−1)!/k!` (`k` children), and the recursion descends
/// into `j`. At a leaf the player collects the weighted marginal of joining
/// the accumulated outer coalition. The oracle cost is the number of
/// root-to-leaf weight paths, quadratic in the player count for balanced
/// binary trees; deep unbalanced trees multiply paths at every level and
/// cost accordingly more.
pub fn hierarchical_owen<F>(
    game: &mut CoalitionGame<F>,
    structure: &CoalitionStructure,
) -> Result<CreditVector, CreditError>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    let n = game.player_count();
    let tree = structure
        .hierarchy
        .as_ref()
        .ok_or_else(|| CreditError::InvalidTree("structure carries no hierarchy".into()))?;
    tree.validate(n)?;
    let mut values = vec![0.0; n];
    descend(game, tree, 0, 1.0, &mut values)?;
    Ok(CreditVector::new(values))
}

fn descend<F>(
    game: &mut CoalitionGame<F>,
    node: &Hierarchy,
    outer: u64,
    weight: f64,
    values: &mut [f64],
) -> Result<(), CreditError>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    match node {
        Hierarchy::Leaf(p) => {
            let marginal = game.value(outer | 1 << p)? - game.value(outer)?;
            values[*p] += weight * marginal;
            Ok(())
        }
        Hierarchy::Node(children) => {
            let k = children.len();
            if k > EXACT_PLAYER_CAP {
                return Err(CreditError::TooManyPlayers { count: k, cap: EXACT_PLAYER_CAP });
            }
            let sibling_weights = shapley_weights(k);
            let masks: Vec<u64> = children.iter().map(Hierarchy::leaf_mask).collect();
            for (j, child) in children.iter().enumerate() {
                let others: Vec<u64> =
                    (0..k).filter(|&t| t != j).map(|t| masks[t]).collect();
                for sub in 0..(1u64 << others.len()) {
                    let mut joined = outer;
                    let mut r_size = 0usize;
                    for (t, om) in others.iter().enumerate() {
                        if sub >> t & 1 == 1 {
                            joined |= om;
                            r_size += 1;
                        }
                    }
                    descend(game, child, joined, weight * sibling_weights[r_size], values)?;
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    // ─────────────────────────────────────────────────────────────────────
    // Independent oracles: allocation by brute-force order enumeration.
    // ─────────────────────────────────────────────────────────────────────

    fn for_each_permutation(n: usize, f: &mut dyn FnMut(&[usize])) {
        fn rec(n: usize, perm: &mut Vec<usize>, used: &mut [bool], f: &mut dyn FnMut(&[usize])) {
            if perm.len() == n {
                f(perm);
                return;
            }
            for i in 0..n {
                if !used[i] {
                    used[i] = true;
                    perm.push(i);
                    rec(n, perm, used, f);
                    perm.pop();
                    used[i] = false;
                }
            }
        }
        rec(n, &mut Vec::with_capacity(n), &mut vec![false; n], f);
    }

    /// Average marginal contribution over every arrival order, the textbook
    /// definition the subset-enumeration code must reproduce.
    fn shapley_by_permutations(centered: &[f64], n: usize) -> Vec<f64> {
        let mut phi = vec![0.0; n];
        let mut orders = 0u64;
        for_each_permutation(n, &mut |perm| {
            let mut mask = 0u64;
            for &p in perm {
                let before = centered[mask as usize];
                mask |= 1 << p;
                phi[p] += centered[mask as usize] - before;
            }
            orders += 1;
        });
        for v in &mut phi {
            *v /= orders as f64;
        }
        phi
    }

    /// Average marginal contribution over the orders where each union's
    /// members arrive consecutively.
    fn owen_by_permutations(centered: &[f64], n: usize, unions: &[Vec<usize>]) -> Vec<f64> {
        let mut phi = vec![0.0; n];
        let mut orders = 0u64;
        for_each_permutation(unions.len(), &mut |block_order| {
            let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
            for &b in block_order {
                let mut extended = Vec::new();
                for_each_permutation(unions[b].len(), &mut |inner| {
                    for prefix in &partial {
                        let mut order = prefix.clone();
                        order.extend(inner.iter().map(|&t| unions[b][t]));
                        extended.push(order);
                    }
                });
                partial = extended;
            }
            for order in &partial {
                let mut mask = 0u64;
                for &p in order {
                    let before = centered[mask as usize];
                    mask |= 1 << p;
                    phi[p] += centered[mask as usize] - before;
                }
                orders += 1;
            }
        });
        for v in &mut phi {
            *v /= orders as f64;
        }
        phi
    }

    fn kahan_sum(values: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &v in values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Random raw scores with a nonzero empty-coalition score, so the
    /// baseline subtraction is always exercised.
    fn random_raw_table(n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..1usize << n).map(|_| rng.next_signed()).collect()
    }

    fn centered(raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|&v| v - raw[0]).collect()
    }

    fn table_game(
        raw: Vec<f64>,
        n: usize,
    ) -> CoalitionGame<impl FnMut(u64) -> Result<f64, CreditError>> {
        CoalitionGame::abstract_game(n, move |mask| Ok(raw[mask as usize])).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    // ─────────────────────────────────────────────────────────────────────
    // Exact Shapley
    // ─────────────────────────────────────────────────────────────────────

    #[test]
    fn two_player_surplus_splits_as_frozen_by_hand() {
        // raw: v(∅)=0, v({0})=1, v({1})=2, v({0,1})=4.
        // Order (0,1): marginals (1, 3); order (1,0): marginals (2, 2).
        // Averages: (1.5, 2.5).
        let mut game = table_game(vec![0.0, 1.0, 2.0, 4.0], 2);
        let credits = exact_shapley(&mut game).unwrap();
        assert_eq!(credits.values(), &[1.5, 2.5]);
        assert_eq!(credits.total(), 4.0);
    }

    #[test]
    fn matches_the_permutation_average_on_random_games() {
        let mut rng = Rng::new(0x5ca1);
        for n in 1..=6 {
            for _ in 0..8 {
                let raw = random_raw_table(n, &mut rng);
                let expected = shapley_by_permutations(&centered(&raw), n);
                let mut game = table_game(raw, n);
                let credits = exact_shapley(&mut game).unwrap();
                assert!(
                    max_abs_diff(credits.values(), &expected) < 1e-12,
                    "n={n} diverges from the order-enumeration oracle"
                );
            }
        }
    }

    #[test]
    fn additive_games_credit_each_player_its_weight() {
        let mut rng = Rng::new(7);
        let n = 8;
        let weights: Vec<f64> = (0..n).map(|_| rng.next_signed()).collect();
        let w = weights.clone();
        let mut game = CoalitionGame::abstract_game(n, move |mask| {
            Ok(5.0 + (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| w[i]).sum::<f64>())
        })
        .unwrap();
        let credits = exact_shapley(&mut game).unwrap();
        assert!(max_abs_diff(credits.values(), &weights) < 1e-12);
    }

    #[test]
    fn null_players_get_exactly_zero() {
        // Player 2's presence never changes the score: lift a 2-player table
        // to 3 players by ignoring bit 2.
        let mut rng = Rng::new(11);
        let base = random_raw_table(2, &mut rng);
        let raw: Vec<f64> = (0..8).map(|mask| base[mask & 0b11]).collect();
        let mut game = table_game(raw, 3);
        let credits = exact_shapley(&mut game).unwrap();
        assert_eq!(credits.values()[2], 0.0, "null player must get a hard zero");
    }

    #[test]
    fn fully_symmetric_games_give_bitwise_equal_credits() {
        // Worth depends only on coalition size.
        let mut rng = Rng::new(13);
        let by_size: Vec<f64> = (0..=5).map(|_| rng.next_signed()).collect();
        let raw: Vec<f64> = (0u64..32).map(|m| by_size[m.count_ones() as usize]).collect();
        let mut game = table_game(raw, 5);
        let credits = exact_shapley(&mut game).unwrap();
        for &v in credits.values() {
            assert_eq!(v.to_bits(), credits.values()[0].to_bits());
        }
    }

    #[test]
    fn swap_symmetric_pair_matches_bitwise() {
        // v is invariant under swapping players 0 and 2 (nonadjacent bits,
        // so the mask enumeration orders differ between the two players).
        let mut rng = Rng::new(17);
        let mut raw = random_raw_table(3, &mut rng);
        let swap = |mask: usize| (mask & 0b010) | ((mask & 0b001) << 2) | ((mask & 0b100) >> 2);
        for mask in 0..8 {
            let image = swap(mask);
            if image > mask {
                raw[image] = raw[mask];
            }
        }
        let mut game = table_game(raw, 3);
        let credits = exact_shapley(&mut game).unwrap();
        assert_eq!(credits.values()[0].to_bits(), credits.values()[2].to_bits());
    }

    #[test]
    fn credits_are_linear_in_the_game() {
        let mut rng = Rng::new(19);
        for n in 2..=6 {
            let raw_u = random_raw_table(n, &mut rng);
            let raw_w = random_raw_table(n, &mut rng);
            let (a, b) = (2.5, -1.25);
            let combo: Vec<f64> =
                raw_u.iter().zip(&raw_w).map(|(u, w)| a * u + b * w).collect();
            let phi_u = exact_shapley(&mut table_game(raw_u, n)).unwrap();
            let phi_w = exact_shapley(&mut table_game(raw_w, n)).unwrap();
            let phi_c = exact_shapley(&mut table_game(combo, n)).unwrap();
            let expected: Vec<f64> = phi_u
                .values()
                .iter()
                .zip(phi_w.values())
                .map(|(u, w)| a * u + b * w)
                .collect();
            assert!(max_abs_diff(phi_c.values(), &expected) < 1e-12);
        }
    }

    #[test]
    fn efficiency_holds_on_random_games() {
        let mut rng = Rng::new(23);
        for n in 1..=8 {
            let raw = random_raw_table(n, &mut rng);
            let grand = raw[(1usize << n) - 1] - raw[0];
            let mut game = table_game(raw, n);
            let credits = exact_shapley(&mut game).unwrap();
            assert!((kahan_sum(credits.values()) - grand).abs() < 1e-9);
        }
    }

    #[test]
    fn enumeration_is_refused_above_the_cap() {
        let mut game = CoalitionGame::abstract_game(21, |_| Ok(0.0)).unwrap();
        assert!(matches!(
            exact_shapley(&mut game),
            Err(CreditError::TooManyPlayers { count: 21, cap: 20 })
        ));
    }

    #[test]
    fn each_coalition_is_evaluated_once_even_across_reruns() {
        let n = 6;
        let mut game = CoalitionGame::abstract_game(n, |mask| Ok(mask as f64)).unwrap();
        let first = exact_shapley(&mut game).unwrap();
        let evals_after_first = game.evaluations();
        let second = exact_shapley(&mut game).unwrap();
        assert_eq!(evals_after_first, 1u64 << n);
        assert_eq!(game.evaluations(), evals_after_first, "rerun must be all cache hits");
        assert_eq!(first, second);
    }

    // ─────────────────────────────────────────────────────────────────────
    // Owen values
    // ─────────────────────────────────────────────────────────────────────

    #[test]
    fn singleton_partition_reduces_to_shapley() {
        let mut rng = Rng::new(29);
        for n in 1..=6 {
            let raw = random_raw_table(n, &mut rng);
            let shap = exact_shapley(&mut table_game(raw.clone(), n)).unwrap();
            let mut game = table_game(raw, n);
            let owen = owen_value(&mut game, &CoalitionStructure::singletons(n)).unwrap();
            assert!(max_abs_diff(owen.values(), shap.values()) < 1e-12);
        }
    }

    #[test]
    fn grand_union_reduces_to_shapley() {
        let mut rng = Rng::new(31);
        for n in 1..=6 {
            let raw = random_raw_table(n, &mut rng);
            let shap = exact_shapley(&mut table_game(raw.clone(), n)).unwrap();
            let mut game = table_game(raw, n);
            let owen = owen_value(&mut game, &CoalitionStructure::grand(n)).unwrap();
            assert!(max_abs_diff(owen.values(), shap.values()) < 1e-12);
        }
    }

    #[test]
    fn mixed_partition_matches_the_block_order_enumeration() {
        let mut rng = Rng::new(37);
        let n = 5;
        let unions = vec![vec![0, 2], vec![1, 4], vec![3]];
        for _ in 0..10 {
            let raw = random_raw_table(n, &mut rng);
            let expected = owen_by_permutations(&centered(&raw), n, &unions);
            let structure = CoalitionStructure { unions: unions.clone(), hierarchy: None };
            let mut game = table_game(raw, n);
            let owen = owen_value(&mut game, &structure).unwrap();
            assert!(max_abs_diff(owen.values(), &expected) < 1e-12);
        }
    }

    #[test]
    fn owen_is_efficient_on_random_partitions() {
        let mut rng = Rng::new(41);
        let n = 6;
        let unions = vec![vec![0, 1, 5], vec![2], vec![3, 4]];
        for _ in 0..10 {
            let raw = random_raw_table(n, &mut rng);
            let grand = raw[(1usize << n) - 1] - raw[0];
            let structure = CoalitionStructure { unions: unions.clone(), hierarchy: None };
            let mut game = table_game(raw, n);
            let owen = owen_value(&mut game, &structure).unwrap();
            assert!((kahan_sum(owen.values()) - grand).abs() < 1e-9);
        }
    }

    #[test]
    fn additive_games_are_partition_independent() {
        let mut rng = Rng::new(43);
        let n = 6;
        let weights: Vec<f64> = (0..n).map(|_| rng.next_signed()).collect();
        let w = weights.clone();
        let structure = CoalitionStructure {
            unions: vec![vec![0, 3], vec![1, 2, 4], vec![5]],
            hierarchy: None,
        };
        let mut game = CoalitionGame::abstract_game(n, move |mask| {
            Ok((0..n).filter(|&i| mask >> i & 1 == 1).map(|i| w[i]).sum::<f64>())
        })
        .unwrap();
        let owen = owen_value(&mut game, &structure).unwrap();
        assert!(max_abs_diff(owen.values(), &weights) < 1e-12);
    }

    #[test]
    fn non_partitions_are_rejected() {
        let mut game = CoalitionGame::abstract_game(3, |_| Ok(0.0)).unwrap();
        let overlap = CoalitionStructure { unions: vec![vec![0, 1], vec![1, 2]], hierarchy: None };
        assert!(matches!(
            owen_value(&mut game, &overlap),
            Err(CreditError::InvalidPartition(_))
        ));
    }

    // ─────────────────────────────────────────────────────────────────────
    // Hierarchical recursion
    // ─────────────────────────────────────────────────────────────────────

    #[test]
    fn two_level_tree_reproduces_owen() {
        let mut rng = Rng::new(47);
        let n = 5;
        let unions = vec![vec![0, 2], vec![1, 4], vec![3]];
        let tree = Hierarchy::Node(vec![
            Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(2)]),
            Hierarchy::Node(vec![Hierarchy::Leaf(1), Hierarchy::Leaf(4)]),
            Hierarchy::Leaf(3),
        ]);
        for _ in 0..5 {
            let raw = random_raw_table(n, &mut rng);
            let flat = CoalitionStructure { unions: unions.clone(), hierarchy: None };
            let owen = owen_value(&mut table_game(raw.clone(), n), &flat).unwrap();
            let nested = CoalitionStructure {
                unions: CoalitionStructure::singletons(n).unions,
                hierarchy: Some(tree.clone()),
            };
            let hier = hierarchical_owen(&mut table_game(raw, n), &nested).unwrap();
            assert!(max_abs_diff(hier.values(), owen.values()) < 1e-12);
        }
    }

    #[test]
    fn flat_tree_reproduces_shapley() {
        let mut rng = Rng::new(53);
        let n = 6;
        let tree = Hierarchy::Node((0..n).map(Hierarchy::Leaf).collect());
        for _ in 0..5 {
            let raw = random_raw_table(n, &mut rng);
            let shap = exact_shapley(&mut table_game(raw.clone(), n)).unwrap();
            let structure = CoalitionStructure {
                unions: CoalitionStructure::singletons(n).unions,
                hierarchy: Some(tree.clone()),
            };
            let hier = hierarchical_owen(&mut table_game(raw, n), &structure).unwrap();
            assert!(max_abs_diff(hier.values(), shap.values()) < 1e-12);
        }
    }

    #[test]
    fn symmetric_game_on_a_balanced_tree_splits_evenly() {
        let mut rng = Rng::new(59);
        let by_size: Vec<f64> = (0..=4).map(|_| rng.next_signed()).collect();
        let raw: Vec<f64> = (0u64..16).map(|m| by_size[m.count_ones() as usize]).collect();
        let grand = raw[15] - raw[0];
        let structure = CoalitionStructure {
            unions: CoalitionStructure::singletons(4).unions,
            hierarchy: Some(Hierarchy::balanced(4).unwrap()),
        };
        let credits = hierarchical_owen(&mut table_game(raw, 4), &structure).unwrap();
        for &v in credits.values() {
            assert_eq!(v.to_bits(), credits.values()[0].to_bits());
            assert!((v - grand / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_games_survive_any_tree() {
        let mut rng = Rng::new(61);
        let n = 7;
        let weights: Vec<f64> = (0..n).map(|_| rng.next_signed()).collect();
        let lopsided = Hierarchy::Node(vec![
            Hierarchy::Node(vec![
                Hierarchy::Node(vec![Hierarchy::Leaf(3), Hierarchy::Leaf(0)]),
                Hierarchy::Leaf(6),
            ]),
            Hierarchy::Node(vec![
                Hierarchy::Leaf(1),
                Hierarchy::Leaf(4),
                Hierarchy::Leaf(2),
                Hierarchy::Leaf(5),
            ]),
        ]);
        for tree in [Hierarchy::balanced(n).unwrap(), lopsided] {
            let w = weights.clone();
            let mut game = CoalitionGame::abstract_game(n, move |mask| {
                Ok(-3.0 + (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| w[i]).sum::<f64>())
            })
            .unwrap();
            let structure = CoalitionStructure {
                unions: CoalitionStructure::singletons(n).unions,
                hierarchy: Some(tree),
            };
            let credits = hierarchical_owen(&mut game, &structure).unwrap();
            assert!(max_abs_diff(credits.values(), &weights) < 1e-12);
        }
    }

    #[test]
    fn balanced_tree_oracle_cost_stays_quadratic() {
        for n in [4usize, 32, 64] {
            let mut game = CoalitionGame::abstract_game(n, |mask| {
                Ok(mask.count_ones() as f64)
            })
            .unwrap();
            let structure = CoalitionStructure {
                unions: CoalitionStructure::singletons(n).unions,
                hierarchy: Some(Hierarchy::balanced(n).unwrap()),
            };
            let credits = hierarchical_owen(&mut game, &structure).unwrap();
            assert!(
                game.requests() <= (4 * n * n) as u64,
                "n={n}: {} requests exceed 4n²",
                game.requests()
            );
            assert!((kahan_sum(credits.values()) - n as f64).abs() < 1e-11);
        }
    }

    #[test]
    fn hierarchical_efficiency_holds_on_random_games() {
        let mut rng = Rng::new(67);
        for n in 1..=8 {
            let raw = random_raw_table(n, &mut rng);
            let grand = raw[(1usize << n) - 1] - raw[0];
            let structure = CoalitionStructure {
                unions: CoalitionStructure::singletons(n).unions,
                hierarchy: Some(Hierarchy::balanced(n).unwrap()),
            };
            let credits = hierarchical_owen(&mut table_game(raw, n), &structure).unwrap();
            assert!((kahan_sum(credits.values()) - grand).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_or_foreign_hierarchy_is_rejected() {
        let mut game = CoalitionGame::abstract_game(3, |_| Ok(0.0)).unwrap();
        let bare = CoalitionStructure::singletons(3);
        assert!(matches!(
            hierarchical_owen(&mut game, &bare),
            Err(CreditError::InvalidTree(_))
        ));
        let wrong = CoalitionStructure {
            unions: CoalitionStructure::singletons(3).unions,
            hierarchy: Some(Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)])),
        };
        assert!(matches!(
            hierarchical_owen(&mut game, &wrong),
            Err(CreditError::InvalidTree(_))
        ));
    }

    #[test]
    fn single_player_gets_the_whole_surplus_under_every_allocator() {
        let raw = vec![2.0, 6.5];
        let shap = exact_shapley(&mut table_game(raw.clone(), 1)).unwrap();
        assert_eq!(shap.values(), &[4.5]);
        let owen = owen_value(&mut table_game(raw.clone(), 1), &CoalitionStructure::grand(1)).unwrap();
        assert_eq!(owen.values(), &[4.5]);
        let structure = CoalitionStructure {
            unions: CoalitionStructure::singletons(1).unions,
            hierarchy: Some(Hierarchy::Leaf(0)),
        };
        let hier = hierarchical_owen(&mut table_game(raw, 1), &structure).unwrap();
        assert_eq!(hier.values(), &[4.5]);
    }

    #[test]
    fn binomial_matches_pascals_triangle() {
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(19, 9), 92378.0);
        assert_eq!(binomial(63, 31), 916312070471295267.0f64);
    }
}
