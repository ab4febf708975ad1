//! Kinetic Monte Carlo: a continuous-time jump process driven by a rate
//! table built from Eyring–Kramers formulas or from measured rates.
//!
//! Residence times and next states are drawn from two separate streams,
//! each positioned by the jump index, so the two draws of a jump are
//! independent by construction.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::kramers::{rate, KramersError, TheoryContext};
use crate::rng::{open_unit, Purpose, Stream, StreamFactory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmcError {
    #[error("state {0} has zero outflow")]
    AbsorbingState(usize),
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("invalid rate k[{i}][{j}] = {k}")]
    InvalidRate { i: usize, j: usize, k: f64 },
    #[error("{given} neighbours given but the landscape has {available} boundary minima")]
    TooManyNeighbours { given: usize, available: usize },
    #[error(transparent)]
    Kramers(#[from] KramersError),
}

pub type Result<T> = std::result::Result<T, KmcError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateProvenance {
    Theory,
    Empirical,
}

impl fmt::Display for RateProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateProvenance::Theory => "theory",
            RateProvenance::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    states: Vec<String>,
    rates: BTreeMap<(usize, usize), (f64, RateProvenance)>,
}

impl RateTable {
    pub fn new(states: Vec<String>) -> Self {
        Self { states, rates: BTreeMap::new() }
    }

    /// Sets `k_{i,j}`; a zero rate removes the entry.
    pub fn set(&mut self, i: usize, j: usize, k: f64, provenance: RateProvenance) -> Result<()> {
        if i >= self.states.len() {
            return Err(KmcError::UnknownState(i));
        }
        if j >= self.states.len() {
            return Err(KmcError::UnknownState(j));
        }
        if i == j || !(k >= 0.0 && k.is_finite()) {
            return Err(KmcError::InvalidRate { i, j, k });
        }
        if k == 0.0 {
            self.rates.remove(&(i, j));
        } else {
            self.rates.insert((i, j), (k, provenance));
        }
        Ok(())
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates.get(&(i, j)).map_or(0.0, |r| r.0)
    }

    /// `(i, j, k, provenance)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64, RateProvenance)> + '_ {
        self.rates.iter().map(|(&(i, j), &(k, p))| (i, j, k, p))
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rates.range((i, 0)..(i + 1, 0)).map(|(&(_, j), &(k, _))| (j, k))
    }

    pub fn outflow(&self, i: usize) -> f64 {
        self.row(i).map(|(_, k)| k).sum()
    }
}

fn active(table: &RateTable, i: usize) -> Result<f64> {
    if i >= table.states.len() {
        return Err(KmcError::UnknownState(i));
    }
    let out = table.outflow(i);
    if out > 0.0 {
        Ok(out)
    } else {
        Err(KmcError::AbsorbingState(i))
    }
}

/// `Exp(Σ_j k_{i,j})` by inversion.
pub fn residence_time<R: Rng + ?Sized>(table: &RateTable, i: usize, rng: &mut R) -> Result<f64> {
    let out = active(table, i)?;
    Ok(-open_unit(rng).ln() / out)
}

/// `j` with probability `k_{i,j} / Σ_j k_{i,j}`.
pub fn next_state<R: Rng + ?Sized>(table: &RateTable, i: usize, rng: &mut R) -> Result<usize> {
    let out = active(table, i)?;
    let u = rng.random::<f64>() * out;
    let mut acc = 0.0;
    let mut last = i;
    for (j, k) in table.row(i) {
        acc += k;
        last = j;
        if u < acc {
            return Ok(j);
        }
    }
    Ok(last)
}

/// Jump times `T_0 = 0 < T_1 < …` and visited states; `Z_t = states[n]` on
/// `[times[n], times[n+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct KmcTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub final_time: f64,
}

impl KmcTrajectory {
    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let n = self.times.partition_point(|&s| s <= t);
        self.states[n.saturating_sub(1)]
    }

    /// Time spent in each of `n_states` states over `[0, final_time]`.
    pub fn occupation(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for (k, &s) in self.states.iter().enumerate() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.final_time);
            occ[s] += end - self.times[k];
        }
        occ
    }
}

const WORDS_PER_JUMP: u128 = 16;

fn positioned(stream: &mut Stream, jump: u64) {
    stream.set_word_pos(jump as u128 * WORDS_PER_JUMP);
}

/// Simulates trajectory `traj` from `start` until time `t_end` or an
/// absorbing state.
pub fn run(table: &RateTable, start: usize, t_end: f64, factory: &StreamFactory, traj: u64) -> Result<KmcTrajectory> {
    if start >= table.states.len() {
        return Err(KmcError::UnknownState(start));
    }
    let mut res = factory.stream(Purpose::KmcResidence, traj, 0);
    let mut nxt = factory.stream(Purpose::KmcNext, traj, 0);
    let mut times = vec![0.0];
    let mut states = vec![start];
    let mut t = 0.0;
    let mut s = start;
    let mut jump = 0u64;
    while t < t_end && table.outflow(s) > 0.0 {
        positioned(&mut res, jump);
        positioned(&mut nxt, jump);
        let dt = residence_time(table, s, &mut res)?;
        if t + dt >= t_end {
            break;
        }
        t += dt;
        s = next_state(table, s, &mut nxt)?;
        times.push(t);
        states.push(s);
        jump += 1;
    }
    Ok(KmcTrajectory { times, states, final_time: t_end })
}

/// Residence time and next state of jump `jump` of trajectory `traj` from `i`.
pub fn jump_sample(table: &RateTable, i: usize, factory: &StreamFactory, traj: u64, jump: u64) -> Result<(f64, usize)> {
    let mut res = factory.stream(Purpose::KmcResidence, traj, 0);
    let mut nxt = factory.stream(Purpose::KmcNext, traj, 0);
    positioned(&mut res, jump);
    positioned(&mut nxt, jump);
    Ok((residence_time(table, i, &mut res)?, next_state(table, i, &mut nxt)?))
}

/// State `0` is the well; state `j ≥ 1` is the neighbour beyond boundary
/// minimum `j`, absorbing, with `k_{0,j}` from the Eyring–Kramers formula.
pub fn table_from_landscape(ctx: &TheoryContext, neighbours: &[String]) -> Result<RateTable> {
    let available = ctx.inventory.n();
    if neighbours.len() > available {
        return Err(KmcError::TooManyNeighbours { given: neighbours.len(), available });
    }
    let mut states = vec!["0".to_string()];
    states.extend(neighbours.iter().cloned());
    let mut table = RateTable::new(states);
    for j in 1..=neighbours.len() {
        table.set(0, j, rate(ctx, j)?, RateProvenance::Theory)?;
    }
    Ok(table)
}
