//! Symbolic operator products over a small set of primitive unitaries.
//!
//! An [`OperatorExpr`] is a signed product written in the usual left-to-right
//! algebraic order: the *last* factor acts on a state first. Factors are either
//! primitive gates or shared sub-expressions (optionally inverted), so the
//! recursions below stay linear in size even though their flattened forms
//! grow exponentially.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Mul, Neg};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global phase of an expression, restricted to +1 / -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

/// The primitive unitaries. Phase flips carry the basis index they mark.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Primitive {
    /// Walsh-Hadamard on every qubit.
    W,
    /// `I - 2|0><0|`.
    I0,
    /// `I - 2|s><s|`.
    Is(usize),
    /// `I - 2|t><t|`.
    It(usize),
    /// Inversion about average, `2|u><u| - I` with `u` the uniform state.
    D,
    /// An opaque labelled unitary.
    U(Arc<str>),
    /// The inverse of the labelled unitary of the same name.
    UInv(Arc<str>),
}

impl Primitive {
    pub fn u(label: &str) -> Self {
        Primitive::U(Arc::from(label))
    }

    pub fn is_self_inverse(&self) -> bool {
        !matches!(self, Primitive::U(_) | Primitive::UInv(_))
    }

    pub fn inverse(&self) -> Primitive {
        match self {
            Primitive::U(l) => Primitive::UInv(l.clone()),
            Primitive::UInv(l) => Primitive::U(l.clone()),
            p => p.clone(),
        }
    }

    fn is_source_or_target_flip(&self) -> bool {
        matches!(self, Primitive::Is(_) | Primitive::It(_))
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::W => write!(f, "W"),
            Primitive::I0 => write!(f, "I0"),
            Primitive::Is(s) => write!(f, "IS {s}"),
            Primitive::It(t) => write!(f, "IT {t}"),
            Primitive::D => write!(f, "D"),
            Primitive::U(l) => write!(f, "U {l}"),
            Primitive::UInv(l) => write!(f, "UINV {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Gate(Primitive),
    Group { expr: Arc<OperatorExpr>, inverted: bool },
}

impl Factor {
    fn inverse(&self) -> Factor {
        match self {
            Factor::Gate(p) => Factor::Gate(p.inverse()),
            Factor::Group { expr, inverted } => Factor::Group {
                expr: expr.clone(),
                inverted: !inverted,
            },
        }
    }
}

/// A signed product of factors. `factors[0]` is the leftmost factor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorExpr {
    pub sign: Sign,
    pub factors: Vec<Factor>,
}

impl OperatorExpr {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn gate(p: Primitive) -> Self {
        Self {
            sign: Sign::Plus,
            factors: vec![Factor::Gate(p)],
        }
    }

    pub fn from_gates(sign: Sign, gates: impl IntoIterator<Item = Primitive>) -> Self {
        Self {
            sign,
            factors: gates.into_iter().map(Factor::Gate).collect(),
        }
    }

    /// The `W I0 W` product (equal to `-D` under the phase-flip convention used here).
    pub fn w_i0_w() -> Self {
        Self::from_gates(Sign::Plus, [Primitive::W, Primitive::I0, Primitive::W])
    }

    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Reverses the factor order and inverts every factor. The sign is kept,
    /// since `(-1)^-1 = -1`.
    pub fn invert(&self) -> OperatorExpr {
        OperatorExpr {
            sign: self.sign,
            factors: self.factors.iter().rev().map(Factor::inverse).collect(),
        }
    }
}

impl Mul for OperatorExpr {
    type Output = OperatorExpr;

    fn mul(mut self, rhs: OperatorExpr) -> OperatorExpr {
        self.sign = self.sign * rhs.sign;
        self.factors.extend(rhs.factors);
        self
    }
}

fn group(expr: &Arc<OperatorExpr>, inverted: bool) -> Factor {
    Factor::Group {
        expr: expr.clone(),
        inverted,
    }
}

/// `U (-I_s U^-1 I_t U)^p`. `p = 0` returns the base unchanged.
pub fn build_standard_aa(base: &OperatorExpr, p: u32, s: usize, t: usize) -> OperatorExpr {
    if p == 0 {
        return base.clone();
    }
    let u = Arc::new(base.clone());
    let mut out = OperatorExpr {
        sign: Sign::Plus,
        factors: vec![group(&u, false)],
    };
    for _ in 0..p {
        out.sign = -out.sign;
        out.factors.extend([
            Factor::Gate(Primitive::Is(s)),
            group(&u, true),
            Factor::Gate(Primitive::It(t)),
            group(&u, false),
        ]);
    }
    out
}

/// `G_0 = base`, `G_{j+1} = -G_j^-1 I_t I_s G_j`; returns `G_k`.
pub fn build_superlinear(base: &OperatorExpr, k: u32, s: usize, t: usize) -> OperatorExpr {
    let mut g = base.clone();
    for _ in 0..k {
        let prev = Arc::new(g);
        g = OperatorExpr {
            sign: Sign::Minus,
            factors: vec![
                group(&prev, true),
                Factor::Gate(Primitive::It(t)),
                Factor::Gate(Primitive::Is(s)),
                group(&prev, false),
            ],
        };
    }
    g
}

/// Registered symbolic expansions for labelled `U` primitives.
#[derive(Debug, Clone, Default)]
pub struct Expansions {
    table: HashMap<Arc<str>, OperatorExpr>,
    allow_opaque: bool,
}

impl Expansions {
    /// No expansions; any labelled unitary is an error.
    pub fn strict() -> Self {
        Self::default()
    }

    /// No expansions; labelled unitaries pass through flattening untouched.
    pub fn opaque() -> Self {
        Self {
            table: HashMap::new(),
            allow_opaque: true,
        }
    }

    pub fn with(mut self, label: &str, expr: OperatorExpr) -> Self {
        self.table.insert(Arc::from(label), expr);
        self
    }

    pub fn allow_opaque(mut self, yes: bool) -> Self {
        self.allow_opaque = yes;
        self
    }

    fn get(&self, label: &str) -> Option<&OperatorExpr> {
        self.table.get(label)
    }
}

/// A flattened product: a sign and primitive gates in algebraic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatSequence {
    pub sign: Sign,
    pub gates: Vec<Primitive>,
}

impl FlatSequence {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Gates in the order they act on a state (rightmost first).
    pub fn application_order(&self) -> impl Iterator<Item = &Primitive> {
        self.gates.iter().rev()
    }

    pub fn ledger(&self) -> QueryLedger {
        let mut ledger = QueryLedger::default();
        for g in &self.gates {
            ledger.tally(g);
        }
        ledger
    }

    pub fn to_expr(&self) -> OperatorExpr {
        OperatorExpr::from_gates(self.sign, self.gates.iter().cloned())
    }
}

struct Flattener<'a> {
    expansions: &'a Expansions,
    sign: Sign,
    out: Vec<Primitive>,
    expanding: Vec<Arc<str>>,
}

impl Flattener<'_> {
    fn emit_expr(&mut self, e: &OperatorExpr, inverted: bool) -> Result<()> {
        self.sign = self.sign * e.sign;
        if inverted {
            for f in e.factors.iter().rev() {
                self.emit_factor(f, true)?;
            }
        } else {
            for f in &e.factors {
                self.emit_factor(f, false)?;
            }
        }
        Ok(())
    }

    fn emit_factor(&mut self, f: &Factor, inverted: bool) -> Result<()> {
        match f {
            Factor::Gate(p) => self.emit_gate(p, inverted),
            Factor::Group { expr, inverted: inv } => self.emit_expr(expr, inverted ^ inv),
        }
    }

    fn emit_gate(&mut self, p: &Primitive, inverted: bool) -> Result<()> {
        let (label, inverted) = match p {
            Primitive::U(l) => (l, inverted),
            Primitive::UInv(l) => (l, !inverted),
            p => {
                self.out.push(p.clone());
                return Ok(());
            }
        };
        match self.expansions.get(label) {
            Some(expansion) => {
                if self.expanding.contains(label) {
                    return Err(Error::CyclicExpansion(label.to_string()));
                }
                self.expanding.push(label.clone());
                self.emit_expr(expansion, inverted)?;
                self.expanding.pop();
                Ok(())
            }
            None if self.expansions.allow_opaque => {
                self.out.push(if inverted {
                    Primitive::UInv(label.clone())
                } else {
                    Primitive::U(label.clone())
                });
                Ok(())
            }
            None => Err(Error::Unresolved(label.to_string())),
        }
    }
}

/// Expands groups and registered labels into a single primitive list.
///
/// Within every run of adjacent source/target phase flips, target flips are
/// moved in front of source flips. Both are diagonal, so the represented
/// unitary is unchanged.
pub fn flatten(e: &OperatorExpr, expansions: &Expansions) -> Result<FlatSequence> {
    let mut fl = Flattener {
        expansions,
        sign: Sign::Plus,
        out: Vec::new(),
        expanding: Vec::new(),
    };
    fl.emit_expr(e, false)?;
    let mut gates = fl.out;
    normalize_flip_runs(&mut gates);
    Ok(FlatSequence {
        sign: fl.sign,
        gates,
    })
}

fn normalize_flip_runs(gates: &mut [Primitive]) {
    let mut i = 0;
    while i < gates.len() {
        if !gates[i].is_source_or_target_flip() {
            i += 1;
            continue;
        }
        let start = i;
        while i < gates.len() && gates[i].is_source_or_target_flip() {
            i += 1;
        }
        // stable: targets first, sources after
        gates[start..i].sort_by_key(|g| matches!(g, Primitive::Is(_)));
    }
}

/// Tallies of each primitive kind in a (flattened) product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryLedger {
    pub it_count: u64,
    pub is_count: u64,
    pub w_count: u64,
    pub i0_count: u64,
    pub d_count: u64,
    /// Labelled unitaries, counting `U` and `UINV` alike.
    pub ubase_count: u64,
}

impl QueryLedger {
    fn tally(&mut self, p: &Primitive) {
        match p {
            Primitive::W => self.w_count += 1,
            Primitive::I0 => self.i0_count += 1,
            Primitive::Is(_) => self.is_count += 1,
            Primitive::It(_) => self.it_count += 1,
            Primitive::D => self.d_count += 1,
            Primitive::U(_) | Primitive::UInv(_) => self.ubase_count += 1,
        }
    }

    fn add_scaled(&mut self, other: &QueryLedger, times: u64) {
        self.it_count += other.it_count * times;
        self.is_count += other.is_count * times;
        self.w_count += other.w_count * times;
        self.i0_count += other.i0_count * times;
        self.d_count += other.d_count * times;
        self.ubase_count += other.ubase_count * times;
    }

    pub fn total(&self) -> u64 {
        self.it_count + self.is_count + self.w_count + self.i0_count + self.d_count + self.ubase_count
    }
}

/// Counts primitives without materializing the flattened sequence. Shared
/// sub-expressions are counted once and scaled, so deep recursions are cheap.
pub fn count_queries(e: &OperatorExpr, expansions: &Expansions) -> Result<QueryLedger> {
    let mut memo: HashMap<*const OperatorExpr, QueryLedger> = HashMap::new();
    let mut expanding = Vec::new();
    count_expr(e, expansions, &mut memo, &mut expanding)
}

fn count_expr(
    e: &OperatorExpr,
    expansions: &Expansions,
    memo: &mut HashMap<*const OperatorExpr, QueryLedger>,
    expanding: &mut Vec<Arc<str>>,
) -> Result<QueryLedger> {
    let mut ledger = QueryLedger::default();
    for f in &e.factors {
        match f {
            Factor::Gate(Primitive::U(l) | Primitive::UInv(l)) => match expansions.get(l) {
                Some(expansion) => {
                    if expanding.contains(l) {
                        return Err(Error::CyclicExpansion(l.to_string()));
                    }
                    expanding.push(l.clone());
                    let sub = count_expr(expansion, expansions, memo, expanding)?;
                    expanding.pop();
                    ledger.add_scaled(&sub, 1);
                }
                None if expansions.allow_opaque => ledger.ubase_count += 1,
                None => return Err(Error::Unresolved(l.to_string())),
            },
            Factor::Gate(p) => ledger.tally(p),
            Factor::Group { expr, .. } => {
                let key = Arc::as_ptr(expr);
                let sub = match memo.get(&key) {
                    Some(sub) => *sub,
                    None => {
                        let sub = count_expr(expr, expansions, memo, expanding)?;
                        memo.insert(key, sub);
                        sub
                    }
                };
                ledger.add_scaled(&sub, 1);
            }
        }
    }
    Ok(ledger)
}
