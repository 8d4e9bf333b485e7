//! Per-episode experiment metrics and their CSV rendering.

/// One finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub success: bool,
    /// Undiscounted sum of external rewards.
    pub external_return: f64,
    pub steps: usize,
    pub wallclock_ms: f64,
}

/// Episode records in running order, one per episode.
#[derive(Debug, Clone, Default)]
pub struct MetricsTable {
    rows: Vec<EpisodeRecord>,
}

impl MetricsTable {
    pub fn new() -> Self {
        MetricsTable { rows: Vec::new() }
    }

    pub fn push(&mut self, row: EpisodeRecord) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[EpisodeRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fraction of successful episodes over the trailing `window` rows
    /// (or all rows when fewer exist).
    pub fn trailing_success_rate(&self, window: usize) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let tail = &self.rows[self.rows.len().saturating_sub(window)..];
        tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
    }

    /// Sum of external returns across all episodes, the area under the
    /// learning curve.
    pub fn return_auc(&self) -> f64 {
        self.rows.iter().map(|r| r.external_return).sum()
    }

    /// First episode index whose trailing success rate over `window`
    /// episodes reaches `threshold`, if any.
    pub fn first_episode_at_success(&self, window: usize, threshold: f64) -> Option<usize> {
        let mut hits = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            hits += row.success as usize;
            if i >= window {
                hits -= self.rows[i - window].success as usize;
            }
            let span = (i + 1).min(window);
            if hits as f64 / span as f64 >= threshold {
                return Some(row.episode);
            }
        }
        None
    }

    /// Same table as CSV with header
    /// `episode,success,return,steps,wallclock_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,success,return,steps,wallclock_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.episode, row.success as u8, row.external_return, row.steps, row.wallclock_ms
            ));
        }
        out
    }

    /// True when both tables agree on everything except wallclock times,
    /// which vary across runs even at fixed seeds.
    pub fn same_outcomes(&self, other: &MetricsTable) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.episode == b.episode
                    && a.success == b.success
                    && a.external_return.to_bits() == b.external_return.to_bits()
                    && a.steps == b.steps
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(episode: usize, success: bool, ret: f64, steps: usize) -> EpisodeRecord {
        EpisodeRecord { episode, success, external_return: ret, steps, wallclock_ms: 0.25 }
    }

    #[test]
    fn csv_has_header_and_one_line_per_episode() {
        let mut table = MetricsTable::new();
        table.push(row(0, true, 1.0, 12));
        table.push(row(1, false, -0.5, 200));
        let csv = table.to_csv();
        assert_eq!(
            csv,
            "episode,success,return,steps,wallclock_ms\n\
             0,1,1,12,0.25\n\
             1,0,-0.5,200,0.25\n"
        );
    }

    #[test]
    fn trailing_success_rate_uses_the_window_tail() {
        let mut table = MetricsTable::new();
        for i in 0..10 {
            table.push(row(i, i >= 5, 0.0, 1));
        }
        assert_eq!(table.trailing_success_rate(5), 1.0);
        assert_eq!(table.trailing_success_rate(10), 0.5);
        assert_eq!(table.trailing_success_rate(100), 0.5);
        assert_eq!(MetricsTable::new().trailing_success_rate(5), 0.0);
    }

    #[test]
    fn auc_sums_returns() {
        let mut table = MetricsTable::new();
        table.push(row(0, false, -1.0, 3));
        table.push(row(1, true, 2.5, 3));
        assert_eq!(table.return_auc(), 1.5);
    }

    #[test]
    fn first_episode_at_success_finds_the_earliest_window() {
        let mut table = MetricsTable::new();
        for i in 0..20 {
            table.push(row(i, i >= 4, 0.0, 1));
        }
        // Window 5 first holds >= 0.8 hits at episode 8 (hits 4,5,6,7,8).
        assert_eq!(table.first_episode_at_success(5, 0.9), Some(8));
        assert_eq!(table.first_episode_at_success(5, 1.0), Some(8));
        let mut never = MetricsTable::new();
        never.push(row(0, false, 0.0, 1));
        assert_eq!(never.first_episode_at_success(5, 0.5), None);
    }

    #[test]
    fn same_outcomes_ignores_wallclock() {
        let mut a = MetricsTable::new();
        let mut b = MetricsTable::new();
        a.push(row(0, true, 1.0, 7));
        b.push(EpisodeRecord { wallclock_ms: 99.0, ..row(0, true, 1.0, 7) });
        assert!(a.same_outcomes(&b));
        b.push(row(1, true, 1.0, 7));
        assert!(!a.same_outcomes(&b));
        let mut c = MetricsTable::new();
        c.push(row(0, true, 1.0 + 1e-16, 7));
        assert!(!a.same_outcomes(&c) || (1.0f64 + 1e-16) == 1.0);
    }
}
