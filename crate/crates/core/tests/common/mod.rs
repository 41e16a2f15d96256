//! Brute-force oracles and random tiny instances shared by integration tests.
#![allow(dead_code)]

use flexshuffle::instance::{generate_functions, generate_placement, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with `m <= 8`, `n <= 6`, `K <= min(4, n)`, no outage.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = rng.gen_range(3..=8);
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..=4usize.min(n));
        let d = rng.gen_range(1..=3);
        let p = rng.gen_range(0.2..0.85);
        let s = rng.gen();
        let Ok(workload) = generate_functions(m, k, d, s) else { continue };
        let inst = Instance::new(generate_placement(m, n, p, s), workload).unwrap();
        if inst.absent_messages().is_empty() {
            return inst;
        }
    }
}

fn holds(inst: &Instance, extra: u32, node: usize, j: usize) -> bool {
    extra & (1 << j) != 0 || inst.placement.holds(node, j)
}

/// Largest number of functions an injective assignment can cover when
/// every node also holds the messages in `extra` (bit mask).
pub fn brute_matching(inst: &Instance, extra: u32) -> usize {
    fn rec(inst: &Instance, extra: u32, f: usize, used: &mut Vec<bool>) -> usize {
        if f == inst.k() {
            return 0;
        }
        let mut best = rec(inst, extra, f + 1, used);
        let pair = inst.workload.pair(f);
        for i in 0..inst.n() {
            if !used[i] && holds(inst, extra, i, pair.lo) && holds(inst, extra, i, pair.hi) {
                used[i] = true;
                best = best.max(1 + rec(inst, extra, f + 1, used));
                used[i] = false;
            }
        }
        best
    }
    rec(inst, extra, 0, &mut vec![false; inst.n()])
}

/// Smallest broadcast set over all `2^m` subsets.
pub fn brute_tun(inst: &Instance) -> usize {
    (0u32..1 << inst.m())
        .filter(|&x| brute_matching(inst, x) == inst.k())
        .map(u32::count_ones)
        .min()
        .expect("broadcasting everything suffices when K <= n") as usize
}

/// Minimum over injective total assignments of the number of inputs missing
/// at the assigned nodes.
pub fn brute_tprime(inst: &Instance) -> usize {
    fn rec(inst: &Instance, f: usize, used: &mut Vec<bool>) -> usize {
        if f == inst.k() {
            return 0;
        }
        let pair = inst.workload.pair(f);
        let mut best = usize::MAX;
        for i in 0..inst.n() {
            if used[i] {
                continue;
            }
            let cost = pair.inputs().iter().filter(|&&j| !inst.placement.holds(i, j)).count();
            used[i] = true;
            let rest = rec(inst, f + 1, used);
            used[i] = false;
            if rest != usize::MAX {
                best = best.min(cost + rest);
            }
        }
        best
    }
    rec(inst, 0, &mut vec![false; inst.n()])
}

/// Rank over GF(2) of rows given as bit masks, by plain elimination.
pub fn gf2_rank(rows: &[u64]) -> usize {
    let mut rows = rows.to_vec();
    let mut rank = 0;
    for bit in 0..64 {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1) else { continue };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r] >> bit & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}
