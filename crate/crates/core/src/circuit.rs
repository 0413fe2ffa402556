//! The flagged adaptive Clifford circuit.
//!
//! Every site carries a classical flag `f_j`. A brickwork gate acts only when
//! at least one of its two inputs is flagged and then flags both; a reset
//! (measure, then shift to `|0⟩`) clears the flag. A cleared flag certifies
//! the site is in `|0⟩`, so resets of unflagged sites are skipped: they would
//! be deterministic no-ops.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::clifford::CliffordGate;
use crate::field::PrimeField;
use crate::qubit::QubitTableau;
use crate::tableau::{InitKind, StabilizerState, StabilizerTableau};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    /// Pairs `(0,1), (2,3), …`.
    Even,
    /// Pairs `(1,2), (3,4), …`, plus `(L-1, 0)` when periodic.
    Odd,
}

impl Parity {
    /// Parity of layer `t = 1, 2, …`: odd layers use even pairs.
    pub fn of_layer(t: usize) -> Self {
        if t % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// The gate pairs of one brickwork layer, left member first.
pub fn layer_pairs(len: usize, parity: Parity, boundary: Boundary) -> impl Iterator<Item = (usize, usize)> {
    let start = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    (start..len).step_by(2).filter_map(move |j| {
        if j + 1 < len {
            Some((j, j + 1))
        } else if boundary == Boundary::Periodic && len > 2 && j + 1 == len {
            Some((j, 0))
        } else {
            None
        }
    })
}

/// Site count and boundary checks shared by every kernel.
pub fn check_geometry(len: usize, boundary: Boundary) -> Result<(), Error> {
    if len < 2 {
        return Err(Error::InvalidArgument("at least two sites are required"));
    }
    if boundary == Boundary::Periodic && len % 2 == 1 {
        return Err(Error::InvalidArgument("periodic brickwork needs an even number of sites"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagField {
    pub flags: Vec<bool>,
    pub time: usize,
}

impl FlagField {
    /// All flags set, as at the start of every circuit.
    pub fn all_set(len: usize) -> Self {
        Self { flags: vec![true; len], time: 0 }
    }

    pub fn density(&self) -> f64 {
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len() as f64
    }

    pub fn is_absorbed(&self) -> bool {
        self.flags.iter().all(|&f| !f)
    }
}

/// Packed bit rows of width `L`: the initial flags plus one row per step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpacetimeRecord {
    width: usize,
    words: usize,
    initial: Vec<u64>,
    occupancy: Vec<u64>,
    resets: Vec<u64>,
}

fn pack(bits: &[bool], words: usize) -> Vec<u64> {
    let mut v = vec![0u64; words];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            v[i / 64] |= 1 << (i % 64);
        }
    }
    v
}

impl SpacetimeRecord {
    /// Empty record whose initial row is all active.
    pub fn new(width: usize) -> Self {
        Self::with_initial(&vec![true; width])
    }

    pub fn with_initial(initial: &[bool]) -> Self {
        let words = initial.len().div_ceil(64);
        Self { width: initial.len(), words, initial: pack(initial, words), occupancy: Vec::new(), resets: Vec::new() }
    }

    /// Build from rows `1..=T` of occupancy (reset marks left empty).
    pub fn from_rows(initial: &[bool], rows: &[Vec<bool>]) -> Self {
        let mut r = Self::with_initial(initial);
        let none = vec![false; initial.len()];
        for row in rows {
            r.push_row(row, &none);
        }
        r
    }

    pub fn push_row(&mut self, occupancy: &[bool], resets: &[bool]) {
        assert_eq!(occupancy.len(), self.width);
        self.occupancy.extend(pack(occupancy, self.words));
        self.resets.extend(pack(resets, self.words));
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of recorded steps `T`.
    pub fn depth(&self) -> usize {
        self.occupancy.len().checked_div(self.words).unwrap_or(0)
    }

    /// Flag of site `j` after step `t`; `t = 0` is the initial row.
    #[inline]
    pub fn active(&self, t: usize, j: usize) -> bool {
        let w = if t == 0 { self.initial[j / 64] } else { self.occupancy[(t - 1) * self.words + j / 64] };
        w >> (j % 64) & 1 == 1
    }

    /// Whether a reset fired on site `j` during step `t >= 1`.
    pub fn reset_fired(&self, t: usize, j: usize) -> bool {
        self.resets[(t - 1) * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn row(&self, t: usize) -> Vec<bool> {
        (0..self.width).map(|j| self.active(t, j)).collect()
    }

    pub fn row_count(&self, t: usize) -> usize {
        let w = if t == 0 { &self.initial[..] } else { &self.occupancy[(t - 1) * self.words..t * self.words] };
        w.iter().map(|x| x.count_ones() as usize).sum()
    }

    /// Rows `0..=t` only.
    pub fn truncated(&self, t: usize) -> Self {
        let t = t.min(self.depth());
        Self {
            width: self.width,
            words: self.words,
            initial: self.initial.clone(),
            occupancy: self.occupancy[..t * self.words].to_vec(),
            resets: self.resets[..t * self.words].to_vec(),
        }
    }

    /// Number of active bonds over all rows including the initial one.
    pub fn active_count(&self) -> usize {
        (0..=self.depth()).map(|t| self.row_count(t)).sum()
    }
}

/// What a trajectory records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Observables {
    pub n_quantum: bool,
    pub n_classical: bool,
    pub entropy: bool,
    /// Final-state entropies of the intervals `(start, length)`, wrapping
    /// around the ring.
    pub intervals: Vec<(usize, usize)>,
    pub spacetime: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitParams {
    pub field: PrimeField,
    pub len: usize,
    pub depth: usize,
    pub rate: f64,
    pub boundary: Boundary,
    pub init: InitKind,
    pub observables: Observables,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), Error> {
        check_geometry(self.len, self.boundary)?;
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidArgument("reset rate must lie in [0, 1]"));
        }
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1"));
        }
        if self.observables.intervals.iter().any(|&(s, l)| s >= self.len || l > self.len) {
            return Err(Error::InvalidArgument("interval outside the system"));
        }
        Ok(())
    }
}

/// Time series of one trajectory, indexed by `t = 0..=T` (empty when not
/// requested).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub config_hash: u64,
    pub seed: u64,
    pub n_quantum: Vec<f64>,
    pub n_classical: Vec<f64>,
    /// Total entropy `S_Q(t)` in units of `ln(q+1)`.
    pub entropy: Vec<f64>,
    /// `(start, length, S_A)` of the final state.
    pub intervals: Vec<(usize, usize, usize)>,
    /// Whether the final state was pure.
    pub final_pure: bool,
    pub spacetime: Option<SpacetimeRecord>,
}

/// One layer: gates on the pairs of `parity` whose inputs carry a flag,
/// then an independent reset with probability `rate` on every site.
/// `resets`, when given, receives the sites where a reset fired.
pub fn brickwork_step<S: StabilizerState, R: Rng + ?Sized>(
    state: &mut S,
    flags: &mut FlagField,
    rate: f64,
    parity: Parity,
    boundary: Boundary,
    rng: &mut R,
    mut resets: Option<&mut [bool]>,
) {
    let field = state.field();
    let len = state.len();
    for (j, k) in layer_pairs(len, parity, boundary) {
        if flags.flags[j] || flags.flags[k] {
            let gate = CliffordGate::sample_two_qudit(field, rng);
            state.apply_pair_unchecked(&gate, j, k);
            flags.flags[j] = true;
            flags.flags[k] = true;
        }
    }
    for j in 0..len {
        let fire = rng.random::<f64>() < rate;
        if let Some(r) = resets.as_deref_mut() {
            r[j] = fire;
        }
        if fire {
            if flags.flags[j] {
                state.reset_site(j, rng);
            }
            flags.flags[j] = false;
        }
    }
    flags.time += 1;
}

fn n_quantum<S: StabilizerState>(state: &S, flags: &FlagField) -> f64 {
    let len = state.len();
    // unflagged sites are certainly inactive
    let active: f64 = (0..len).filter(|&j| flags.flags[j]).map(|j| 1.0 - state.inactive_probability(j).to_f64()).sum();
    active / len as f64
}

pub fn interval_sites(len: usize, start: usize, length: usize) -> Vec<usize> {
    (0..length).map(|i| (start + i) % len).collect()
}

/// Run one trajectory on a given engine.
pub fn run_trajectory_with<S: StabilizerState, R: Rng + ?Sized>(
    params: &CircuitParams,
    rng: &mut R,
) -> Result<TrajectoryRecord, Error> {
    params.validate()?;
    let obs = &params.observables;
    let mut state = S::init(params.field, params.len, params.init)?;
    state.set_phase_tracking(obs.n_quantum);
    let mut flags = FlagField::all_set(params.len);
    let mut rec = TrajectoryRecord::default();
    let mut spacetime = obs.spacetime.then(|| SpacetimeRecord::new(params.len));
    let mut resets = vec![false; params.len];
    let sample = |rec: &mut TrajectoryRecord, state: &S, flags: &FlagField| {
        if obs.n_quantum {
            rec.n_quantum.push(n_quantum(state, flags));
        }
        if obs.n_classical {
            rec.n_classical.push(flags.density());
        }
        if obs.entropy {
            rec.entropy.push(state.entropy() as f64);
        }
    };
    sample(&mut rec, &state, &flags);
    for t in 1..=params.depth {
        brickwork_step(
            &mut state,
            &mut flags,
            params.rate,
            Parity::of_layer(t),
            params.boundary,
            rng,
            Some(&mut resets),
        );
        if let Some(st) = spacetime.as_mut() {
            st.push_row(&flags.flags, &resets);
        }
        sample(&mut rec, &state, &flags);
    }
    rec.final_pure = state.rank() == state.len();
    rec.intervals = obs
        .intervals
        .iter()
        .map(|&(s, l)| (s, l, state.subsystem_entropy(&interval_sites(params.len, s, l))))
        .collect();
    rec.spacetime = spacetime;
    Ok(rec)
}

/// Run one trajectory, using the bit-packed engine for qubits.
pub fn run_trajectory<R: Rng + ?Sized>(params: &CircuitParams, rng: &mut R) -> Result<TrajectoryRecord, Error> {
    if params.field.is_qubit() {
        run_trajectory_with::<QubitTableau, R>(params, rng)
    } else {
        run_trajectory_with::<StabilizerTableau, R>(params, rng)
    }
}
