//! Seeded random task-set generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::lcm;

/// Period menu whose hyperperiod is 400.
pub const HARMONIC_MENU: [u64; 9] = [2, 4, 5, 8, 10, 16, 20, 25, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicParams {
    pub period: u64,
    pub wcet: u64,
    pub deadline: u64,
}

pub struct SetGen {
    rng: ChaCha8Rng,
}

impl SetGen {
    pub fn new(seed: u64) -> Self {
        SetGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// UUniFast: `n` utilizations summing to `total`.
    pub fn uunifast(&mut self, n: usize, total: f64) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let mut remaining = total;
        for i in (1..n).rev() {
            let next = remaining * self.rng.gen::<f64>().powf(1.0 / i as f64);
            out[i] = remaining - next;
            remaining = next;
        }
        if n > 0 {
            out[0] = remaining;
        }
        out
    }

    fn periods(&mut self, n: usize) -> Vec<u64> {
        (0..n)
            .map(|_| *HARMONIC_MENU.choose(&mut self.rng).unwrap())
            .collect()
    }

    /// Implicit-deadline set with exact utilization at most 1. When `fill`
    /// is set, wcets are then raised greedily to push utilization towards 1.
    pub fn implicit_at_most_one(&mut self, max_n: usize, fill: bool) -> Vec<PeriodicParams> {
        loop {
            let n = self.rng.gen_range(1..=max_n);
            let target = self.rng.gen_range(0.3..=1.0);
            let periods = self.periods(n);
            let utils = self.uunifast(n, target);
            let mut tasks: Vec<PeriodicParams> = periods
                .iter()
                .zip(&utils)
                .map(|(&p, &u)| {
                    let c = ((u * p as f64).floor() as u64).clamp(1, p);
                    PeriodicParams {
                        period: p,
                        wcet: c,
                        deadline: p,
                    }
                })
                .collect();
            if demand(&tasks) > hyper(&tasks) {
                continue;
            }
            if fill {
                for i in 0..tasks.len() {
                    while tasks[i].wcet < tasks[i].period {
                        tasks[i].wcet += 1;
                        tasks[i].deadline = tasks[i].period;
                        if demand(&tasks) > hyper(&tasks) {
                            tasks[i].wcet -= 1;
                            break;
                        }
                    }
                }
            }
            return tasks;
        }
    }

    /// Implicit-deadline set with exact utilization strictly above 1.
    pub fn implicit_above_one(&mut self, max_n: usize) -> Vec<PeriodicParams> {
        loop {
            let n = self.rng.gen_range(1..=max_n);
            let target = self.rng.gen_range(1.0..=1.6);
            let periods = self.periods(n);
            let tasks: Vec<PeriodicParams> = periods
                .iter()
                .zip(self.uunifast(n, target))
                .map(|(&p, u)| {
                    let c = ((u * p as f64).ceil() as u64).clamp(1, p);
                    PeriodicParams {
                        period: p,
                        wcet: c,
                        deadline: p,
                    }
                })
                .collect();
            if demand(&tasks) > hyper(&tasks) {
                return tasks;
            }
        }
    }

    /// Implicit-deadline set with utilization in `(0, max_u]` as a float
    /// target; exact utilization is not controlled beyond the floor rounding.
    pub fn implicit_below(&mut self, max_n: usize, max_u: f64) -> Vec<PeriodicParams> {
        let n = self.rng.gen_range(1..=max_n);
        let target = self.rng.gen_range(0.05..=max_u);
        let periods = self.periods(n);
        periods
            .iter()
            .zip(self.uunifast(n, target))
            .map(|(&p, u)| {
                let c = ((u * p as f64).floor() as u64).clamp(1, p);
                PeriodicParams {
                    period: p,
                    wcet: c,
                    deadline: p,
                }
            })
            .collect()
    }

    /// Constrained-deadline set (D in [C, T]) with utilization target up to
    /// `max_u`.
    pub fn constrained(&mut self, max_n: usize, max_u: f64) -> Vec<PeriodicParams> {
        let mut tasks = self.implicit_below(max_n, max_u);
        for t in tasks.iter_mut() {
            t.deadline = self.rng.gen_range(t.wcet..=t.period);
        }
        tasks
    }
}

fn hyper(tasks: &[PeriodicParams]) -> u64 {
    tasks.iter().fold(1, |acc, t| lcm(acc, t.period))
}

fn demand(tasks: &[PeriodicParams]) -> u64 {
    let h = hyper(tasks);
    tasks.iter().map(|t| t.wcet * (h / t.period)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn menu_hyperperiod() {
        assert_eq!(HARMONIC_MENU.iter().fold(1, |a, &p| lcm(a, p)), 400);
    }

    #[test]
    fn generators_respect_their_utilization_side() {
        let mut g = SetGen::new(7);
        for _ in 0..50 {
            let s = g.implicit_at_most_one(6, true);
            assert!(demand(&s) <= hyper(&s));
            let s = g.implicit_above_one(6);
            assert!(demand(&s) > hyper(&s));
        }
    }

    #[test]
    fn uunifast_sums() {
        let mut g = SetGen::new(1);
        let u = g.uunifast(5, 0.8);
        assert!((u.iter().sum::<f64>() - 0.8).abs() < 1e-12);
    }
}
