//! Naive reference implementations used as independent oracles by the test
//! suites and `selfcheck`. They share no code with the production paths.

use crate::image::GrayImage;

/// Motion template by direct per-pixel unrolling of the three-branch recurrence.
///
/// Returns `(values, tau_final)`. Timestamps follow `tau_t = t`.
pub fn naive_template(frames: &[GrayImage], threshold: u8, delta: f32) -> (Vec<f32>, f32) {
    let w = frames[0].width();
    let h = frames[0].height();
    let mut values = vec![0.0f32; w * h];
    let mut tau = 0.0f32;
    for t in 1..frames.len() {
        tau = t as f32;
        let prev = &frames[t - 1];
        let next = &frames[t];
        for y in 0..h {
            for x in 0..w {
                let a = prev.get(x, y) as i32;
                let b = next.get(x, y) as i32;
                let moved = (a - b).abs() >= threshold as i32;
                let old = values[y * w + x];
                values[y * w + x] = if moved {
                    tau
                } else if old < tau - delta {
                    0.0
                } else {
                    old
                };
            }
        }
    }
    (values, tau)
}

/// Deterministic MDP given by explicit tables, for checking tabular learners.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    /// `next[s][a]`: successor state, or `None` when the transition terminates.
    pub next: Vec<Vec<Option<usize>>>,
    /// `reward[s][a]`: reward on taking `a` in `s`.
    pub reward: Vec<Vec<f64>>,
}

impl TabularMdp {
    pub fn states(&self) -> usize {
        self.next.len()
    }

    pub fn actions(&self) -> usize {
        self.next.first().map_or(0, Vec::len)
    }

    /// Optimal action values by repeated Bellman backups.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.actions()]; self.states()];
        loop {
            let mut change = 0.0f64;
            let mut fresh = q.clone();
            for s in 0..self.states() {
                for a in 0..self.actions() {
                    let future = match self.next[s][a] {
                        Some(sp) => q[sp].iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        None => 0.0,
                    };
                    fresh[s][a] = self.reward[s][a] + gamma * future;
                    change = change.max((fresh[s][a] - q[s][a]).abs());
                }
            }
            q = fresh;
            if change < tol {
                return q;
            }
        }
    }
}
