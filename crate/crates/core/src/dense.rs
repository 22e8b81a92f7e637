//! Dense-matrix reference for small dimensions.
//!
//! Everything here is built from explicit `N x N` matrices and plain matrix
//! products, independently of the statevector engine, so it can arbitrate the
//! matrix-element identities of both recursions.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Factor, OperatorExpr, Primitive};

pub const MAX_DENSE_DIM: usize = 256;

pub type CMatrix = DMatrix<Complex64>;

/// Sign of the `|U_ts|^2` term in `V_ss = -1 + 2|U_ss|^2 + c |U_ts|^2`,
/// fixed by brute force (see `vss_sign_by_brute_force` in the tests).
pub const VSS_TS_TERM_SIGN: f64 = 1.0;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseUnitary(CMatrix);

impl DenseUnitary {
    /// Wraps a matrix without checking unitarity.
    pub fn from_matrix(m: CMatrix) -> Self {
        assert!(m.is_square(), "dense operator must be square");
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> DenseUnitary {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, rhs: &DenseUnitary) -> DenseUnitary {
        Self(&self.0 * &rhs.0)
    }

    /// Max entrywise `|U U^dagger - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        let p = &self.0 * self.0.adjoint();
        max_abs_diff(&p, &CMatrix::identity(n, n))
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.0 * x).iter().copied().collect()
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn check_dense_dim(n: usize) -> Result<()> {
    if n > MAX_DENSE_DIM {
        Err(Error::DenseTooLarge(n))
    } else if n < 2 || !n.is_power_of_two() {
        Err(Error::BadDimension(n))
    } else {
        Ok(())
    }
}

fn check_pair(n: usize, s: usize, t: usize) -> Result<()> {
    if s == t {
        return Err(Error::SourceEqualsTarget(s));
    }
    for x in [s, t] {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, dim: n });
        }
    }
    Ok(())
}

/// `I - 2|x><x|`.
pub fn phase_flip_matrix(n: usize, x: usize) -> CMatrix {
    let mut m = CMatrix::identity(n, n);
    m[(x, x)] = c(-1.0);
    m
}

/// Hadamard entries `(-1)^{popcount(i & j)} / sqrt(N)`.
pub fn walsh_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            c(scale)
        } else {
            c(-scale)
        }
    })
}

/// `2|u><u| - I`: every entry `2/N`, minus one on the diagonal.
pub fn diffusion_matrix(n: usize) -> CMatrix {
    let avg = 2.0 / n as f64;
    CMatrix::from_fn(n, n, |i, j| if i == j { c(avg - 1.0) } else { c(avg) })
}

/// Dense matrices for labelled `U` primitives.
#[derive(Debug, Clone, Default)]
pub struct Bindings(HashMap<Arc<str>, DenseUnitary>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: &str, u: DenseUnitary) -> Self {
        self.0.insert(Arc::from(label), u);
        self
    }
}

pub fn primitive_matrix(p: &Primitive, n: usize, bindings: &Bindings) -> Result<CMatrix> {
    let check = |x: usize| {
        if x < n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: x, dim: n })
        }
    };
    Ok(match p {
        Primitive::W => walsh_matrix(n),
        Primitive::I0 => phase_flip_matrix(n, 0),
        Primitive::Is(x) | Primitive::It(x) => {
            check(*x)?;
            phase_flip_matrix(n, *x)
        }
        Primitive::D => diffusion_matrix(n),
        Primitive::U(l) | Primitive::UInv(l) => {
            let u = bindings.0.get(l).ok_or_else(|| Error::Unresolved(l.to_string()))?;
            if u.dim() != n {
                return Err(Error::WrongDimension {
                    expected: n,
                    got: u.dim(),
                });
            }
            if matches!(p, Primitive::U(_)) {
                u.0.clone()
            } else {
                u.0.adjoint()
            }
        }
    })
}

/// Evaluates the expression tree as a matrix: the signed product of its
/// factors, with inverted groups taken as adjoints.
pub fn matrix_of(e: &OperatorExpr, n: usize, bindings: &Bindings) -> Result<DenseUnitary> {
    check_dense_dim(n)?;
    let mut memo = HashMap::new();
    eval(e, n, bindings, &mut memo).map(DenseUnitary)
}

fn eval(
    e: &OperatorExpr,
    n: usize,
    bindings: &Bindings,
    memo: &mut HashMap<*const OperatorExpr, CMatrix>,
) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(n, n) * c(e.sign.as_f64());
    for f in &e.factors {
        let m = match f {
            Factor::Gate(p) => primitive_matrix(p, n, bindings)?,
            Factor::Group { expr, inverted } => {
                let key = Arc::as_ptr(expr);
                let m = match memo.get(&key) {
                    Some(m) => m.clone(),
                    None => {
                        let m = eval(expr, n, bindings, memo)?;
                        memo.insert(key, m.clone());
                        m
                    }
                };
                if *inverted {
                    m.adjoint()
                } else {
                    m
                }
            }
        };
        acc *= m;
    }
    Ok(acc)
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of
/// the triangular factor's diagonal moved into `Q`.
pub fn random_unitary(n: usize, seed: u64) -> DenseUnitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_with(n, &mut rng)
}

pub fn random_unitary_with(n: usize, rng: &mut ChaCha8Rng) -> DenseUnitary {
    assert!(n >= 1, "unitary dimension must be positive");
    let g = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    DenseUnitary(q)
}

/// Real orthogonal reflection `I - 2 v v^T` for a random real unit vector.
pub fn random_real_reflection(n: usize, seed: u64) -> DenseUnitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v: Vec<Complex64> = v.iter().map(|x| c(x / norm)).collect();
    reflection(&v)
}

/// `I - 2|v><v|` for a unit vector `v`.
pub fn reflection(v: &[Complex64]) -> DenseUnitary {
    let n = v.len();
    DenseUnitary(CMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { c(1.0) } else { c(0.0) };
        id - 2.0 * v[i] * v[j].conj()
    }))
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * c(0.5f64.powi(squarings as i32));
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled * c(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `U_ss, U_tt, U_ts, U_st` and `delta = 1 - |U_ss|`. `U_ts` is row `t`,
/// column `s`: the amplitude carried from `|s>` to `|t>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixElementReport {
    pub u_ss: Complex64,
    pub u_tt: Complex64,
    pub u_ts: Complex64,
    pub u_st: Complex64,
    pub delta: f64,
}

impl MatrixElementReport {
    pub fn of(u: &DenseUnitary, s: usize, t: usize) -> Self {
        let u_ss = u.get(s, s);
        Self {
            u_ss,
            u_tt: u.get(t, t),
            u_ts: u.get(t, s),
            u_st: u.get(s, t),
            delta: 1.0 - u_ss.norm(),
        }
    }
}

/// `-U I_s U^-1 I_t U`, computed densely.
pub fn standard_step(u: &DenseUnitary, s: usize, t: usize) -> Result<DenseUnitary> {
    let n = u.dim();
    check_pair(n, s, t)?;
    let m = &u.0;
    let v = m * phase_flip_matrix(n, s) * m.adjoint() * phase_flip_matrix(n, t) * m;
    Ok(DenseUnitary(-v))
}

/// `-U^-1 I_t I_s U`, computed densely.
pub fn superlinear_step(u: &DenseUnitary, s: usize, t: usize) -> Result<DenseUnitary> {
    let n = u.dim();
    check_pair(n, s, t)?;
    let m = &u.0;
    let v = m.adjoint() * phase_flip_matrix(n, t) * phase_flip_matrix(n, s) * m;
    Ok(DenseUnitary(-v))
}

/// `|V_ts - (3 U_ts - 4 |U_ts|^2 U_ts)|` for `V = -U I_s U^-1 I_t U`.
pub fn check_standard_identity(u: &DenseUnitary, s: usize, t: usize) -> Result<f64> {
    let v = standard_step(u, s, t)?;
    let uts = u.get(t, s);
    let predicted = 3.0 * uts - 4.0 * uts.norm_sqr() * uts;
    Ok((v.get(t, s) - predicted).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperlinearResiduals {
    /// Against `2 U_ss conj(U_ts) + 2 conj(U_tt) U_st`.
    pub printed_form: f64,
    /// Against `2 U_ss conj(U_st) + 2 conj(U_tt) U_ts`.
    pub exact_form: f64,
}

pub fn check_superlinear_identity(u: &DenseUnitary, s: usize, t: usize) -> Result<SuperlinearResiduals> {
    let v = superlinear_step(u, s, t)?;
    let e = MatrixElementReport::of(u, s, t);
    let vts = v.get(t, s);
    let printed = 2.0 * e.u_ss * e.u_ts.conj() + 2.0 * e.u_tt.conj() * e.u_st;
    let exact = 2.0 * e.u_ss * e.u_st.conj() + 2.0 * e.u_tt.conj() * e.u_ts;
    Ok(SuperlinearResiduals {
        printed_form: (vts - printed).norm(),
        exact_form: (vts - exact).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VssResiduals {
    pub exact: f64,
    /// Distance to the printed `-1 + 2|U_ss|^2 - 2|U_ts|^2`.
    pub printed_discrepancy: f64,
}

pub fn check_vss_identity(u: &DenseUnitary, s: usize, t: usize) -> Result<VssResiduals> {
    let v = superlinear_step(u, s, t)?;
    let e = MatrixElementReport::of(u, s, t);
    let vss = v.get(s, s);
    let exact = -1.0 + 2.0 * e.u_ss.norm_sqr() + VSS_TS_TERM_SIGN * 2.0 * e.u_ts.norm_sqr();
    let printed = -1.0 + 2.0 * e.u_ss.norm_sqr() - 2.0 * e.u_ts.norm_sqr();
    Ok(VssResiduals {
        exact: (vss - c(exact)).norm(),
        printed_discrepancy: (vss - c(printed)).norm(),
    })
}

/// `|2 U_ss conj(U_ts) + 2 conj(U_tt) U_st|` for a 2x2 unitary with `s = 0`,
/// `t = 1`. Zero because the two rows are orthogonal.
pub fn check_two_dim_obstruction(u: &DenseUnitary) -> Result<f64> {
    if u.dim() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: u.dim(),
        });
    }
    let e = MatrixElementReport::of(u, 0, 1);
    Ok((2.0 * e.u_ss * e.u_ts.conj() + 2.0 * e.u_tt.conj() * e.u_st).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub delta: f64,
    pub eps_ts: f64,
    pub dim: usize,
    pub source: usize,
    pub target: usize,
    pub seed: u64,
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthLevel {
    pub level: u32,
    pub ts_abs: f64,
    pub ss_abs: f64,
    /// `|G_j,ts| / |G_{j-1},ts|`; absent at level 0.
    pub ratio: Option<f64>,
    /// Whether `4^j * eps_ts <= 0.01` for the previous level, i.e. whether the
    /// ratio was taken inside the validated small-amplitude regime.
    pub in_linear_regime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub params: GrowthParams,
    pub base: MatrixElementReport,
    pub levels: Vec<GrowthLevel>,
    pub max_unitarity_residual: f64,
    /// Set when `4^k * eps_ts > 0.1`: the deeper levels leave the regime where
    /// the x4 law is expected.
    pub flagged: bool,
}

/// Builds `U = I - 2|v><v|` with `U_ss = 1 - delta` and `|U_ts| = eps_ts` and
/// the remainder of `v` spread over every other basis state. Hermitian, so
/// `U_st = conj(U_ts)`, and equal to `exp(i pi |v><v|)`.
pub fn near_source_reflection(
    dim: usize,
    s: usize,
    t: usize,
    delta: f64,
    eps_ts: f64,
    seed: u64,
) -> Result<DenseUnitary> {
    check_dense_dim(dim)?;
    check_pair(dim, s, t)?;
    if dim < 3 {
        return Err(Error::OutOfRange("growth experiment needs at least 3 dimensions".into()));
    }
    if delta.is_nan() || delta <= 0.0 || delta >= 1.0 || eps_ts.is_nan() || eps_ts <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "delta = {delta}, eps_ts = {eps_ts}"
        )));
    }
    let a = (delta / 2.0).sqrt();
    let b = eps_ts / (2.0 * a);
    let rest = 1.0 - a * a - b * b;
    if rest <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "delta = {delta}, eps_ts = {eps_ts} leave no weight outside s, t"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![c(0.0); dim];
    let mut tail_norm = 0.0;
    for (i, x) in v.iter_mut().enumerate() {
        if i != s && i != t {
            *x = complex_gaussian(&mut rng);
            tail_norm += x.norm_sqr();
        }
    }
    let scale = (rest / tail_norm).sqrt();
    for (i, x) in v.iter_mut().enumerate() {
        if i != s && i != t {
            *x *= scale;
        }
    }
    let phase = |rng: &mut ChaCha8Rng| {
        let z = complex_gaussian(rng);
        z / z.norm()
    };
    v[s] = a * phase(&mut rng);
    v[t] = b * phase(&mut rng);
    Ok(reflection(&v))
}

/// Applies the superlinear recursion densely `depth` times to a constructed
/// near-identity-on-`s` unitary, reporting `|G_j,ts|` and `|G_j,ss|`.
pub fn growth_factor_experiment(p: GrowthParams) -> Result<GrowthReport> {
    let u = near_source_reflection(p.dim, p.source, p.target, p.delta, p.eps_ts, p.seed)?;
    let base = MatrixElementReport::of(&u, p.source, p.target);
    let mut g = u;
    let mut levels = Vec::with_capacity(p.depth as usize + 1);
    let mut max_res = g.unitarity_residual();
    let mut prev_ts = None;
    for level in 0..=p.depth {
        if level > 0 {
            g = superlinear_step(&g, p.source, p.target)?;
            max_res = max_res.max(g.unitarity_residual());
        }
        let ts_abs = g.get(p.target, p.source).norm();
        let ss_abs = g.get(p.source, p.source).norm();
        let in_linear_regime = level == 0 || 4f64.powi(level as i32 - 1) * p.eps_ts <= 0.01;
        levels.push(GrowthLevel {
            level,
            ts_abs,
            ss_abs,
            ratio: prev_ts.map(|prev: f64| ts_abs / prev),
            in_linear_regime,
        });
        prev_ts = Some(ts_abs);
    }
    Ok(GrowthReport {
        params: p,
        base,
        levels,
        max_unitarity_residual: max_res,
        flagged: 4f64.powi(p.depth as i32) * p.eps_ts > 0.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_standard_aa, build_superlinear, flatten, Expansions, Sign};
    use rand::Rng;

    fn pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
        let s = rng.random_range(0..n);
        let mut t = rng.random_range(0..n - 1);
        if t >= s {
            t += 1;
        }
        (s, t)
    }

    #[test]
    fn phase_flip_dense_at_n2() {
        let m = matrix_of(&OperatorExpr::gate(Primitive::It(1)), 2, &Bindings::new()).unwrap();
        assert_eq!(m.get(0, 0), c(1.0));
        assert_eq!(m.get(1, 1), c(-1.0));
        assert_eq!(m.get(0, 1), c(0.0));
    }

    #[test]
    fn w_i0_w_is_minus_d() {
        for n in [2, 4, 8, 32] {
            let m = matrix_of(&OperatorExpr::w_i0_w(), n, &Bindings::new()).unwrap();
            assert!(max_abs_diff(m.matrix(), &(-diffusion_matrix(n))) < 1e-12);
        }
    }

    #[test]
    fn primitives_are_self_inverse_and_flips_commute() {
        let n = 16;
        let id = CMatrix::identity(n, n);
        for p in [Primitive::W, Primitive::I0, Primitive::Is(3), Primitive::It(9), Primitive::D] {
            let m = primitive_matrix(&p, n, &Bindings::new()).unwrap();
            assert!(max_abs_diff(&(&m * &m), &id) <= 1e-12, "{p}");
        }
        let a = phase_flip_matrix(n, 3);
        let b = phase_flip_matrix(n, 9);
        assert_eq!(&a * &b, &b * &a);
    }

    #[test]
    fn size_and_label_errors() {
        let e = OperatorExpr::gate(Primitive::D);
        assert!(matches!(matrix_of(&e, 512, &Bindings::new()), Err(Error::DenseTooLarge(512))));
        let u = OperatorExpr::gate(Primitive::u("U"));
        assert!(matches!(matrix_of(&u, 4, &Bindings::new()), Err(Error::Unresolved(_))));
        let b = Bindings::new().with("U", random_unitary(8, 1));
        assert!(matches!(matrix_of(&u, 4, &b), Err(Error::WrongDimension { .. })));
    }

    #[test]
    fn random_unitary_properties() {
        for n in [2, 4, 16, 64] {
            let u = random_unitary(n, 42);
            assert!(u.unitarity_residual() <= 1e-10);
            for j in 0..n {
                let norm: f64 = u.matrix().column(j).iter().map(|x| x.norm_sqr()).sum();
                assert!((norm.sqrt() - 1.0).abs() <= 1e-12);
            }
            assert_eq!(u, random_unitary(n, 42));
            assert_ne!(u, random_unitary(n, 43));
        }
    }

    #[test]
    fn flatten_preserves_matrix() {
        let n = 8;
        let b = Bindings::new().with("U", random_unitary(n, 7));
        let base = OperatorExpr::gate(Primitive::u("U"));
        for e in [
            build_superlinear(&base, 3, 1, 6),
            build_standard_aa(&base, 3, 1, 6),
            build_superlinear(&OperatorExpr::w_i0_w(), 2, 0, 5).invert(),
        ] {
            let f = flatten(&e, &Expansions::opaque()).unwrap();
            let m1 = matrix_of(&e, n, &b).unwrap();
            let m2 = matrix_of(&f.to_expr(), n, &b).unwrap();
            assert!(max_abs_diff(m1.matrix(), m2.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn inverse_matches_adjoint() {
        let n = 8;
        let b = Bindings::new().with("U", random_unitary(n, 3));
        let base = OperatorExpr::gate(Primitive::u("U"));
        let g = build_superlinear(&base, 1, 0, 4);
        let gi = matrix_of(&g.invert(), n, &b).unwrap();
        let adj = matrix_of(&g, n, &b).unwrap().adjoint();
        assert!(max_abs_diff(gi.matrix(), adj.matrix()) <= 1e-12);
    }

    #[test]
    fn standard_identity_on_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[4usize, 8, 16, 32] {
            for _ in 0..10 {
                let u = random_unitary_with(n, &mut rng);
                let (s, t) = pair(&mut rng, n);
                assert!(check_standard_identity(&u, s, t).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn standard_identity_special_cases() {
        let id = DenseUnitary::identity(4);
        let v = standard_step(&id, 0, 1).unwrap();
        assert!(v.get(1, 0).norm() < 1e-15);
        assert!(check_standard_identity(&id, 0, 1).unwrap() < 1e-15);

        let d = DenseUnitary(diffusion_matrix(4));
        assert!((d.get(1, 0) - c(0.5)).norm() < 1e-15);
        let v = standard_step(&d, 0, 1).unwrap();
        assert!((v.get(1, 0) - c(1.0)).norm() < 1e-12);
        assert!(standard_step(&d, 2, 2).is_err());
    }

    #[test]
    fn superlinear_identity_forms() {
        let d = DenseUnitary(diffusion_matrix(16));
        let r = check_superlinear_identity(&d, 2, 9).unwrap();
        assert!(r.exact_form <= 1e-10 && r.printed_form <= 1e-10);

        let refl = random_real_reflection(16, 5);
        let r = check_superlinear_identity(&refl, 2, 9).unwrap();
        assert!(r.exact_form <= 1e-10 && r.printed_form <= 1e-10);

        let u = random_unitary(16, 5);
        let r = check_superlinear_identity(&u, 2, 9).unwrap();
        assert!(r.exact_form <= 1e-10);
        assert!(r.printed_form > 1e-3);
    }

    #[test]
    fn superlinear_vanishes_in_two_dimensions() {
        let u = random_unitary(2, 9);
        let v = superlinear_step(&u, 0, 1).unwrap();
        assert!(v.get(1, 0).norm() <= 1e-12);
        assert!(check_two_dim_obstruction(&u).unwrap() <= 1e-12);
    }

    #[test]
    fn vss_sign_by_brute_force() {
        // Fit V_ss + 1 - 2|U_ss|^2 = c * 2|U_ts|^2 across random unitaries.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..50 {
            let u = random_unitary_with(8, &mut rng);
            let (s, t) = pair(&mut rng, 8);
            let v = superlinear_step(&u, s, t).unwrap();
            let e = MatrixElementReport::of(&u, s, t);
            let lhs = v.get(s, s).re + 1.0 - 2.0 * e.u_ss.norm_sqr();
            let x = 2.0 * e.u_ts.norm_sqr();
            num += lhs * x;
            den += x * x;
        }
        let fitted = num / den;
        assert!((fitted - VSS_TS_TERM_SIGN).abs() < 1e-10, "fitted {fitted}");
    }

    #[test]
    fn vss_identity_examples() {
        let id = DenseUnitary::identity(8);
        let v = superlinear_step(&id, 0, 1).unwrap();
        assert!((v.get(0, 0) - c(1.0)).norm() < 1e-15);
        let r = check_vss_identity(&id, 0, 1).unwrap();
        assert!(r.exact < 1e-15 && r.printed_discrepancy < 1e-15);

        let u = random_unitary(8, 123);
        let r = check_vss_identity(&u, 3, 5).unwrap();
        assert!(r.exact <= 1e-10);
        let uts = u.get(5, 3).norm_sqr();
        assert!((r.printed_discrepancy - 4.0 * uts).abs() < 1e-10);
    }

    #[test]
    fn gamma_is_four_delta() {
        for (delta, eps) in [(1e-3, 1e-3), (1e-4, 5e-4), (5e-4, 1e-5)] {
            let u = near_source_reflection(8, 1, 6, delta, eps, 17).unwrap();
            let e = MatrixElementReport::of(&u, 1, 6);
            assert!((e.delta - delta).abs() < 1e-15);
            assert!((e.u_ts.norm() - eps).abs() < 1e-15);
            let v = superlinear_step(&u, 1, 6).unwrap();
            let gamma = 1.0 - v.get(1, 1).re;
            assert!((gamma - 4.0 * delta).abs() <= 10.0 * (delta * delta + eps * eps));
        }
    }

    #[test]
    fn reflection_construction_is_an_exponential() {
        let u = near_source_reflection(8, 0, 3, 1e-3, 2e-3, 4).unwrap();
        assert!(u.unitarity_residual() <= 1e-12);
        // recover v from the projector P = (I - U)/2, then exp(i pi P) = U
        let p = (CMatrix::identity(8, 8) - u.matrix()) * c(0.5);
        let via_exp = expm(&(p * Complex64::new(0.0, std::f64::consts::PI)));
        assert!(max_abs_diff(&via_exp, u.matrix()) <= 1e-10);
        let e = MatrixElementReport::of(&u, 0, 3);
        assert!((e.u_st - e.u_ts.conj()).norm() < 1e-15);
    }

    #[test]
    fn generic_near_identity_generator_cancels_growth() {
        // exp(eps K) with random anti-Hermitian K has U_st ~ -conj(U_ts), so
        // the first-order terms of V_ts cancel and no x4 growth appears.
        let n = 8;
        let h = random_unitary(n, 77).into_matrix();
        let k = (&h - h.adjoint()) * c(0.5);
        let u = DenseUnitary(expm(&(k * c(1e-3))));
        assert!(u.unitarity_residual() <= 1e-12);
        let e = MatrixElementReport::of(&u, 0, 1);
        assert!((e.u_st + e.u_ts.conj()).norm() < 0.05 * e.u_ts.norm());
        let v = superlinear_step(&u, 0, 1).unwrap();
        assert!(v.get(1, 0).norm() / e.u_ts.norm() < 0.1);
    }

    #[test]
    fn growth_factor_four_per_level() {
        let r = growth_factor_experiment(GrowthParams {
            delta: 1e-4,
            eps_ts: 1e-4,
            dim: 8,
            source: 0,
            target: 5,
            seed: 2024,
            depth: 4,
        })
        .unwrap();
        assert!(r.max_unitarity_residual <= 1e-10);
        let first = r.levels[1].ratio.unwrap();
        assert!((first / 4.0 - 1.0).abs() <= 0.02);
        for l in &r.levels[1..] {
            if l.in_linear_regime {
                let ratio = l.ratio.unwrap();
                assert!((3.8..=4.0).contains(&ratio), "level {} ratio {ratio}", l.level);
            }
        }
        let decay = (1.0 - r.levels[1].ss_abs) / 1e-4;
        assert!((decay / 4.0 - 1.0).abs() <= 0.05);
        assert!(!r.flagged);
    }

    #[test]
    fn growth_rejects_two_dimensions_and_flags_deep_runs() {
        let p = GrowthParams {
            delta: 1e-4,
            eps_ts: 1e-4,
            dim: 2,
            source: 0,
            target: 1,
            seed: 1,
            depth: 1,
        };
        assert!(growth_factor_experiment(p).is_err());
        let deep = growth_factor_experiment(GrowthParams { dim: 8, depth: 7, ..p }).unwrap();
        assert!(deep.flagged);
    }

    #[test]
    fn matrix_sign_is_tracked() {
        let e = OperatorExpr::from_gates(Sign::Minus, [Primitive::D]);
        let m = matrix_of(&e, 4, &Bindings::new()).unwrap();
        assert!(max_abs_diff(m.matrix(), &(-diffusion_matrix(4))) < 1e-15);
    }
}
