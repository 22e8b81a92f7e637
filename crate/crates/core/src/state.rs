//! Statevector simulation of the primitive operators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{Factor, FlatSequence, OperatorExpr, Primitive};
use crate::trace::{Probe, Trace, TraceRecord};

pub const DEFAULT_MAX_QUBITS: u32 = 26;

/// Validated register dimension `N = 2^n` with `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dim {
    n_qubits: u32,
}

impl Dim {
    pub fn from_qubits(n_qubits: u32) -> Result<Self> {
        Self::from_qubits_capped(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn from_qubits_capped(n_qubits: u32, cap: u32) -> Result<Self> {
        if n_qubits > cap {
            return Err(Error::TooManyQubits {
                qubits: n_qubits,
                cap,
            });
        }
        if n_qubits == 0 || n_qubits >= usize::BITS {
            return Err(Error::BadDimension(1usize.checked_shl(n_qubits).unwrap_or(0)));
        }
        Ok(Self { n_qubits })
    }

    pub fn new(dim: usize) -> Result<Self> {
        Self::new_capped(dim, DEFAULT_MAX_QUBITS)
    }

    pub fn new_capped(dim: usize, cap: u32) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::BadDimension(dim));
        }
        Self::from_qubits_capped(dim.trailing_zeros(), cap)
    }

    pub fn n_qubits(self) -> u32 {
        self.n_qubits
    }

    pub fn size(self) -> usize {
        1 << self.n_qubits
    }

    pub fn check_index(self, x: usize) -> Result<()> {
        if x < self.size() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: x,
                dim: self.size(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dim: Dim,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn basis_state(dim: Dim, x: usize) -> Result<Self> {
        dim.check_index(x)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim.size()];
        amps[x] = Complex64::new(1.0, 0.0);
        Ok(Self { dim, amps })
    }

    pub fn uniform(dim: Dim) -> Self {
        let a = Complex64::new(1.0 / (dim.size() as f64).sqrt(), 0.0);
        Self {
            dim,
            amps: vec![a; dim.size()],
        }
    }

    /// Wraps raw amplitudes; the length must be a power of two. The caller is
    /// responsible for normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = Dim::new_capped(amps.len(), u32::MAX)?;
        Ok(Self { dim, amps })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, x: usize) -> Complex64 {
        self.amps[x]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn mean(&self) -> Complex64 {
        let sum: Complex64 = self.amps.iter().sum();
        sum / self.amps.len() as f64
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// `I - 2|x><x|`.
    pub fn phase_flip(&mut self, x: usize) -> Result<()> {
        self.dim.check_index(x)?;
        self.amps[x] = -self.amps[x];
        Ok(())
    }

    /// In-place fast Walsh-Hadamard transform, normalized by `1/sqrt(N)`.
    pub fn walsh_hadamard(&mut self) {
        let n = self.amps.len();
        let mut h = 1;
        while h < n {
            for block in self.amps.chunks_exact_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = x + y;
                    *b = x - y;
                }
            }
            h *= 2;
        }
        self.scale(1.0 / (n as f64).sqrt());
    }

    /// Inversion about average: `x_i -> 2 mean - x_i`.
    pub fn diffusion(&mut self) {
        let twice_mean = 2.0 * self.mean();
        for a in &mut self.amps {
            *a = twice_mean - *a;
        }
    }

    pub fn apply(&mut self, p: &Primitive) -> Result<()> {
        match p {
            Primitive::W => self.walsh_hadamard(),
            Primitive::I0 => self.phase_flip(0)?,
            Primitive::Is(x) | Primitive::It(x) => self.phase_flip(*x)?,
            Primitive::D => self.diffusion(),
            Primitive::U(l) | Primitive::UInv(l) => return Err(Error::Unresolved(l.to_string())),
        }
        Ok(())
    }

    /// Applies the expression by walking its tree; inverted groups are applied
    /// as reversed, inverted factor lists. Equal to applying `flatten(e)`.
    pub fn apply_expr(&mut self, e: &OperatorExpr) -> Result<()> {
        self.apply_expr_inner(e, false)?;
        self.scale(e.sign.as_f64());
        Ok(())
    }

    fn apply_expr_inner(&mut self, e: &OperatorExpr, inverted: bool) -> Result<()> {
        let one = |s: &mut Self, f: &Factor| -> Result<()> {
            match f {
                Factor::Gate(p) if inverted => s.apply(&p.inverse()),
                Factor::Gate(p) => s.apply(p),
                Factor::Group { expr, inverted: inv } => {
                    s.apply_expr_inner(expr, inverted ^ inv)?;
                    s.scale(expr.sign.as_f64());
                    Ok(())
                }
            }
        };
        if inverted {
            for f in &e.factors {
                one(self, f)?;
            }
        } else {
            for f in e.factors.iter().rev() {
                one(self, f)?;
            }
        }
        Ok(())
    }
}

/// Applies a flattened product right-to-left, recording a trace record after
/// every `stride`-th primitive (and after the last). The sign multiplies the
/// final state.
pub fn apply_flat(
    state: &mut StateVector,
    seq: &FlatSequence,
    probe: Probe,
    stride: usize,
) -> Result<Trace> {
    probe.check(state.dim())?;
    for g in &seq.gates {
        if let Primitive::U(l) | Primitive::UInv(l) = g {
            return Err(Error::Unresolved(l.to_string()));
        }
    }
    let stride = stride.max(1);
    let mut trace = Trace::new(probe);
    trace.push(TraceRecord::observe(0, state, probe));
    let total = seq.len();
    for (i, g) in seq.application_order().enumerate() {
        state.apply(g)?;
        let step = i + 1;
        if step == total {
            state.scale(seq.sign.as_f64());
        }
        if step % stride == 0 || step == total {
            trace.push(TraceRecord::observe(step as u64, state, probe));
        }
    }
    if total == 0 {
        state.scale(seq.sign.as_f64());
    }
    Ok(trace)
}

/// Starting from `|s>`, applies `D` once, then `steps` rounds of
/// `(I_t, I_s, D)`. Record `k` is the state after `k` diffusions; record 0 is
/// `|s>` itself. Records are kept at multiples of `stride` plus the last one.
pub fn run_superlinear_iterative(
    dim: Dim,
    s: usize,
    t: usize,
    steps: u64,
    stride: u64,
) -> Result<(StateVector, Trace)> {
    let probe = Probe::new(s, t)?;
    probe.check(dim)?;
    let stride = stride.max(1);
    let mut state = StateVector::basis_state(dim, s)?;
    let mut trace = Trace::new(probe);
    trace.push(TraceRecord::observe(0, &state, probe));
    state.diffusion();
    let last = steps + 1;
    for k in 1..=last {
        if k > 1 {
            state.phase_flip(t)?;
            state.phase_flip(s)?;
            state.diffusion();
        }
        if k % stride == 0 || k == last {
            trace.push(TraceRecord::observe(k, &state, probe));
        }
    }
    Ok((state, trace))
}

/// Standard Grover search: from the uniform superposition, `iterations` rounds
/// of `I_t` followed by `D`. Record `k` is the state after `k` rounds.
pub fn run_grover(
    dim: Dim,
    s: usize,
    t: usize,
    iterations: u64,
    stride: u64,
) -> Result<(StateVector, Trace)> {
    let probe = Probe::new(s, t)?;
    probe.check(dim)?;
    let stride = stride.max(1);
    let mut state = StateVector::uniform(dim);
    let mut trace = Trace::new(probe);
    trace.push(TraceRecord::observe(0, &state, probe));
    for k in 1..=iterations {
        state.phase_flip(t)?;
        state.diffusion();
        if k % stride == 0 || k == iterations {
            trace.push(TraceRecord::observe(k, &state, probe));
        }
    }
    Ok((state, trace))
}

/// Standard amplitude amplification `U (-I_s U^-1 I_t U)^p` applied to `|s>`
/// one round at a time. Record `k` is the state after `k` rounds; record 0 is
/// `U|s>`. The base must consist of engine primitives.
pub fn run_standard_aa(
    dim: Dim,
    base: &OperatorExpr,
    s: usize,
    t: usize,
    rounds: u64,
    stride: u64,
) -> Result<(StateVector, Trace)> {
    let probe = Probe::new(s, t)?;
    probe.check(dim)?;
    let stride = stride.max(1);
    let round = crate::operator::build_standard_aa(base, 1, s, t);
    // U (-I_s U^-1 I_t U)^p = (-U I_s U^-1 I_t)^p U, so a round drops the trailing U
    let round = OperatorExpr {
        sign: round.sign,
        factors: round.factors[..round.factors.len() - 1].to_vec(),
    };
    let round = crate::operator::flatten(&round, &crate::operator::Expansions::strict())?;
    let mut state = StateVector::basis_state(dim, s)?;
    state.apply_expr(base)?;
    let mut trace = Trace::new(probe);
    trace.push(TraceRecord::observe(0, &state, probe));
    for k in 1..=rounds {
        for g in round.application_order() {
            state.apply(g)?;
        }
        state.scale(round.sign.as_f64());
        if k % stride == 0 || k == rounds {
            trace.push(TraceRecord::observe(k, &state, probe));
        }
    }
    Ok((state, trace))
}
