//! Two-label linear-chain lattice: log-space forward-backward and Viterbi.

use crate::sentence::GapLabel;

/// Label scores for one sequence: `emissions[t][y]` plus `transitions[a][b]`
/// for moving from label `a` at `t - 1` to `b` at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub emissions: Vec<[f64; 2]>,
    pub transitions: [[f64; 2]; 2],
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Posterior quantities from one forward-backward pass.
#[derive(Debug, Clone)]
pub struct Posteriors {
    pub log_z: f64,
    /// `p(y_t = y)`.
    pub unary: Vec<[f64; 2]>,
    /// Expected transition counts summed over positions.
    pub pairwise: [[f64; 2]; 2],
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    /// Unnormalized log score of a labeling.
    pub fn score(&self, labels: &[GapLabel]) -> f64 {
        assert_eq!(labels.len(), self.len());
        let mut s = 0.0;
        for (t, l) in labels.iter().enumerate() {
            s += self.emissions[t][l.index()];
            if t > 0 {
                s += self.transitions[labels[t - 1].index()][l.index()];
            }
        }
        s
    }

    fn forward(&self) -> Vec<[f64; 2]> {
        let mut alpha = Vec::with_capacity(self.len());
        for (t, e) in self.emissions.iter().enumerate() {
            if t == 0 {
                alpha.push(*e);
                continue;
            }
            let prev: [f64; 2] = alpha[t - 1];
            let a =
                [0, 1].map(|y| log_sum_exp(prev[0] + self.transitions[0][y], prev[1] + self.transitions[1][y]) + e[y]);
            alpha.push(a);
        }
        alpha
    }

    fn backward(&self) -> Vec<[f64; 2]> {
        let n = self.len();
        let mut beta = vec![[0.0; 2]; n];
        for t in (0..n.saturating_sub(1)).rev() {
            let e = self.emissions[t + 1];
            let next = beta[t + 1];
            beta[t] = [0, 1].map(|y| {
                log_sum_exp(
                    self.transitions[y][0] + e[0] + next[0],
                    self.transitions[y][1] + e[1] + next[1],
                )
            });
        }
        beta
    }

    pub fn log_partition(&self) -> f64 {
        match self.forward().last() {
            Some(a) => log_sum_exp(a[0], a[1]),
            None => 0.0,
        }
    }

    pub fn posteriors(&self) -> Posteriors {
        let alpha = self.forward();
        let beta = self.backward();
        let log_z = alpha.last().map_or(0.0, |a| log_sum_exp(a[0], a[1]));
        let unary = alpha
            .iter()
            .zip(&beta)
            .map(|(a, b)| {
                let p0 = (a[0] + b[0] - log_z).exp();
                let p1 = (a[1] + b[1] - log_z).exp();
                // Renormalize away rounding so each row sums to one.
                let s = p0 + p1;
                [p0 / s, p1 / s]
            })
            .collect();
        let mut pairwise = [[0.0; 2]; 2];
        for t in 1..self.len() {
            for (a, row) in pairwise.iter_mut().enumerate() {
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell +=
                        (alpha[t - 1][a] + self.transitions[a][b] + self.emissions[t][b] + beta[t][b] - log_z).exp();
                }
            }
        }
        Posteriors { log_z, unary, pairwise }
    }

    /// Per-position marginals `[p(SPACE), p(PERIOD)]`.
    pub fn marginals(&self) -> Vec<[f64; 2]> {
        self.posteriors().unary
    }

    /// Highest-scoring labeling. Among equal scores the lexicographically
    /// first labeling wins, with SPACE ordered before PERIOD.
    pub fn viterbi(&self) -> Vec<GapLabel> {
        let n = self.len();
        if n == 0 {
            return Vec::new();
        }
        // best[t][y]: best score of labels t+1.. given y at t.
        let mut best = vec![[0.0f64; 2]; n];
        for t in (0..n - 1).rev() {
            let e = self.emissions[t + 1];
            let next = best[t + 1];
            best[t] =
                [0, 1].map(|y| (self.transitions[y][0] + e[0] + next[0]).max(self.transitions[y][1] + e[1] + next[1]));
        }
        let mut out = Vec::with_capacity(n);
        let mut prev: Option<usize> = None;
        for (e, b) in self.emissions.iter().zip(&best) {
            let cand = |y: usize| {
                let tr = prev.map_or(0.0, |p| self.transitions[p][y]);
                tr + e[y] + b[y]
            };
            let y = if cand(1) > cand(0) { 1 } else { 0 };
            out.push(GapLabel::from_index(y));
            prev = Some(y);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_position_is_softmax() {
        let l = Lattice {
            emissions: vec![[0.3, -1.2]],
            transitions: [[5.0, -2.0], [1.0, 0.0]],
        };
        let m = l.marginals();
        let z = 0.3f64.exp() + (-1.2f64).exp();
        assert!((m[0][0] - 0.3f64.exp() / z).abs() < 1e-15);
        assert!((l.log_partition() - z.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_lattice_is_uniform_and_prefers_space() {
        let l = Lattice {
            emissions: vec![[0.0; 2]; 4],
            transitions: [[0.0; 2]; 2],
        };
        assert!(l.marginals().iter().all(|m| (m[0] - 0.5).abs() < 1e-15));
        assert_eq!(l.viterbi(), vec![GapLabel::Space; 4]);
        assert!((l.log_partition() - 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_lattice() {
        let l = Lattice {
            emissions: vec![],
            transitions: [[0.0; 2]; 2],
        };
        assert_eq!(l.log_partition(), 0.0);
        assert!(l.viterbi().is_empty());
    }
}
