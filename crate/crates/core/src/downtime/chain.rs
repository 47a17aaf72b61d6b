//! Markov chain storage, stationary distributions and entropy rates.

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::params::entropy_bits;
use crate::{Error, Result};

/// Tolerance used when checking that a constructed row is stochastic.
const ROW_SUM_TOL: f64 = 1e-9;

/// Largest chain handed to the dense solver when power iteration stalls.
const DIRECT_SOLVE_LIMIT: usize = 2048;

/// Row-stochastic transition matrix in which many states may share a row.
///
/// Frame-level chains have far fewer distinct rows than states (a row depends
/// only on the downtime leaking out of the source frame), so rows are stored
/// once and each state points at its row.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    rows: Vec<Vec<(usize, f64)>>,
    row_of: Vec<usize>,
}

impl Transitions {
    /// `rows` are sparse `(target, probability)` lists; state `s` uses row `row_of[s]`.
    pub fn new(mut rows: Vec<Vec<(usize, f64)>>, row_of: Vec<usize>) -> Result<Self> {
        let states = row_of.len();
        for row in rows.iter_mut() {
            row.retain(|&(_, p)| p != 0.0);
            row.sort_by_key(|&(t, _)| t);
            let mut sum = 0.0;
            for &(t, p) in row.iter() {
                if t >= states || !(p >= 0.0) {
                    return Err(Error::domain("transition", p, "targets in range, p >= 0"));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::domain("row sum", sum, "rows sum to 1"));
            }
        }
        if row_of.iter().any(|&r| r >= rows.len()) {
            return Err(Error::domain(
                "row index",
                rows.len() as f64,
                "row_of < rows.len()",
            ));
        }
        Ok(Transitions { rows, row_of })
    }

    /// One row per state from a dense matrix.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self> {
        let rows = matrix
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::new(rows, (0..matrix.len()).collect())
    }

    pub fn states(&self) -> usize {
        self.row_of.len()
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[self.row_of[state]]
    }

    pub fn row_index(&self, state: usize) -> usize {
        self.row_of[state]
    }

    pub fn distinct_rows(&self) -> usize {
        self.rows.len()
    }

    /// `P[from][to]`.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        let row = self.row(from);
        match row.binary_search_by_key(&to, |&(t, _)| t) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, state: usize) -> f64 {
        self.row(state).iter().map(|&(_, p)| p).sum()
    }

    fn has_self_loop(&self) -> bool {
        (0..self.states()).any(|s| self.prob(s, s) > 0.0)
    }

    /// `out = pi * P`.
    pub fn step(&self, pi: &[f64], out: &mut [f64]) {
        let mut class_mass = vec![0.0; self.rows.len()];
        for (s, &m) in pi.iter().enumerate() {
            class_mass[self.row_of[s]] += m;
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for (row, &m) in self.rows.iter().zip(&class_mass) {
            if m == 0.0 {
                continue;
            }
            for &(t, p) in row {
                out[t] += m * p;
            }
        }
    }

    /// Verifies that every state can reach, and be reached from, state 0.
    pub fn check_irreducible(&self) -> Result<()> {
        let n = self.states();
        if n == 0 {
            return Err(Error::Undefined(
                "stationary distribution of an empty chain",
            ));
        }
        let mut members = vec![Vec::new(); self.rows.len()];
        for (s, &r) in self.row_of.iter().enumerate() {
            members[r].push(s);
        }

        // forward: states reachable from 0
        let mut seen = vec![false; n];
        let mut row_done = vec![false; self.rows.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            let r = self.row_of[s];
            if std::mem::replace(&mut row_done[r], true) {
                continue;
            }
            for &(t, _) in &self.rows[r] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(s) = seen.iter().position(|&v| !v) {
            return Err(Error::Reducible { state: s });
        }

        // backward: states that reach 0
        let mut into: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(t, _) in row {
                into[t].push(r);
            }
        }
        let mut seen = vec![false; n];
        let mut row_done = vec![false; self.rows.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(t) = stack.pop() {
            for &r in &into[t] {
                if std::mem::replace(&mut row_done[r], true) {
                    continue;
                }
                for &s in &members[r] {
                    if !seen[s] {
                        seen[s] = true;
                        stack.push(s);
                    }
                }
            }
        }
        match seen.iter().position(|&v| !v) {
            Some(s) => Err(Error::Reducible { state: s }),
            None => Ok(()),
        }
    }

    /// Stationary distribution by power iteration from the uniform vector.
    ///
    /// Chains without any self-loop may be periodic; for those the iteration
    /// runs on the lazy chain `(I + P) / 2`, i.e. it averages consecutive
    /// iterates, which has the same stationary vector and always converges.
    pub fn stationary(&self, opts: StationaryOptions) -> Result<StationaryResult> {
        self.check_irreducible()?;
        let n = self.states();
        let lazy = !self.has_self_loop();
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iterations {
            self.step(&pi, &mut next);
            residual = l1_diff(&next, &pi);
            if lazy {
                for (x, &y) in next.iter_mut().zip(&pi) {
                    *x = 0.5 * (*x + y);
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            std::mem::swap(&mut pi, &mut next);
            if residual < opts.tolerance {
                self.step(&pi, &mut next);
                let final_residual = l1_diff(&next, &pi);
                return Ok(StationaryResult {
                    entropy_rate: self.entropy_rate(&pi),
                    distribution: pi,
                    residual: final_residual,
                    iterations: it,
                });
            }
        }
        if n <= DIRECT_SOLVE_LIMIT {
            let pi = self.stationary_direct();
            self.step(&pi, &mut next);
            let final_residual = l1_diff(&next, &pi);
            if final_residual < opts.tolerance {
                return Ok(StationaryResult {
                    entropy_rate: self.entropy_rate(&pi),
                    distribution: pi,
                    residual: final_residual,
                    iterations: opts.max_iterations,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            residual,
        })
    }

    /// Stationary vector by state reduction on the dense matrix.
    ///
    /// Only sums of non-negative terms are formed, so slowly mixing chains are
    /// handled accurately; cost is cubic in the state count.
    pub fn stationary_direct(&self) -> Vec<f64> {
        let n = self.states();
        let mut a = vec![vec![0.0; n]; n];
        for (s, row) in a.iter_mut().enumerate() {
            for &(t, p) in self.row(s) {
                row[t] = p;
            }
        }
        let mut exit = vec![0.0; n];
        for k in (1..n).rev() {
            let s: f64 = a[k][..k].iter().sum();
            exit[k] = s;
            if s == 0.0 {
                continue;
            }
            let (head, tail) = a.split_at_mut(k);
            let rowk = &tail[0];
            for row in head.iter_mut() {
                let f = row[k] / s;
                if f != 0.0 {
                    for (x, &y) in row[..k].iter_mut().zip(&rowk[..k]) {
                        *x += f * y;
                    }
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for k in 1..n {
            if exit[k] == 0.0 {
                continue;
            }
            let inflow: f64 = (0..k).map(|i| pi[i] * a[i][k]).sum();
            pi[k] = inflow / exit[k];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        pi
    }

    /// Markov entropy rate `sum_s pi_s H(P[s, .])` in bits per step.
    ///
    /// Rounding is clamped to the exact bounds: a row's entropy never exceeds
    /// `log2` of its support, and the average never exceeds the largest row.
    pub fn entropy_rate(&self, pi: &[f64]) -> f64 {
        let row_h: Vec<f64> = self
            .rows
            .iter()
            .map(|row| {
                let probs: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
                entropy_bits(&probs).min((probs.len() as f64).log2())
            })
            .collect();
        let max_h = row_h.iter().copied().fold(0.0, f64::max);
        pi.iter()
            .zip(&self.row_of)
            .map(|(&m, &r)| m * row_h[r])
            .sum::<f64>()
            .clamp(0.0, max_h)
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// L1 bound on `pi P - pi`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            tolerance: 1e-12,
            max_iterations: 1_000_000,
        }
    }
}

impl StationaryOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        StationaryOptions {
            tolerance,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub distribution: Vec<f64>,
    /// Bits per step of the chain.
    pub entropy_rate: f64,
    /// `|| pi P - pi ||_1` of the returned vector.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChainKind {
    /// Basic method: one state per frame occupancy pattern.
    Bmcm,
    /// Reduced method: states are `(d_o, n_1, d_i)` triplets.
    Rmcm,
    /// Output chain over emitted PPM symbols.
    Omc,
    /// Bin-by-bin detector chain.
    Detector,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::Bmcm => "BMCM",
            ChainKind::Rmcm => "RMCM",
            ChainKind::Omc => "OMC",
            ChainKind::Detector => "detector",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateLabel {
    /// Frame occupancy, bit `i` set when bin `i` is occupied.
    Occupancy { mask: u64, n: usize },
    /// Downtime leaking in, occupied bins in the free region, downtime leaking out.
    Triplet { d_o: usize, n_1: usize, d_i: usize },
    /// A PPM symbol and the downtime it leaves in the next frame.
    Symbol { symbol: usize, residual: usize },
    /// Ready bin left empty (used only when there is no downtime).
    Idle,
    /// Ready bin that recorded a detection (used only when there is no downtime).
    Hit,
    /// Detector able to register a photon.
    Ready,
    /// `k`-th bin of downtime.
    Down(usize),
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateLabel::Occupancy { mask, n } => {
                for i in 0..n {
                    f.write_char(if mask >> i & 1 == 1 { '1' } else { '0' })?;
                }
                Ok(())
            }
            StateLabel::Triplet { d_o, n_1, d_i } => write!(f, "({d_o},{n_1},{d_i})"),
            StateLabel::Symbol { symbol, residual } => write!(f, "s{symbol}/r{residual}"),
            StateLabel::Idle => f.write_str("idle"),
            StateLabel::Hit => f.write_str("hit"),
            StateLabel::Ready => f.write_str("ready"),
            StateLabel::Down(k) => write!(f, "down_{k}"),
        }
    }
}

/// A Markov chain over frame-level (or bin-level) detector states.
#[derive(Debug, Clone)]
pub struct FrameChain {
    pub kind: ChainKind,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    labels: Vec<StateLabel>,
    transitions: Transitions,
    bit_yield: Vec<f64>,
    valid: Vec<bool>,
}

impl FrameChain {
    pub(crate) fn new(
        kind: ChainKind,
        (n, d, p): (usize, usize, f64),
        labels: Vec<StateLabel>,
        transitions: Transitions,
        bit_yield: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(labels.len(), transitions.states());
        debug_assert_eq!(labels.len(), bit_yield.len());
        debug_assert_eq!(labels.len(), valid.len());
        FrameChain {
            kind,
            n,
            d,
            p,
            labels,
            transitions,
            bit_yield,
            valid,
        }
    }

    pub fn states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    /// Bits emitted by each state under PPM.
    pub fn bit_yield(&self) -> &[f64] {
        &self.bit_yield
    }

    /// Whether each state is a PPM-valid frame (exactly one occupied bin).
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn index_of(&self, label: &StateLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn stationary(&self, opts: StationaryOptions) -> Result<StationaryResult> {
        self.transitions.stationary(opts)
    }

    /// Text dump, one state per line:
    /// `label  bit_yield  row: (target:prob) (target:prob) ...`
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} n={} d={} p={} states={}",
            self.kind,
            self.n,
            self.d,
            self.p,
            self.states()
        );
        for (s, label) in self.labels.iter().enumerate() {
            let _ = write!(out, "{label}  {}  row:", self.bit_yield[s]);
            for &(t, p) in self.transitions.row(s) {
                let _ = write!(out, " ({}:{p})", self.labels[t]);
            }
            out.push('\n');
        }
        out
    }
}

/// Stationary distribution of a chain (`tol` bounds `|| pi P - pi ||_1`).
pub fn stationary_distribution(chain: &FrameChain, tol: f64) -> Result<StationaryResult> {
    chain.stationary(StationaryOptions::with_tolerance(tol))
}
