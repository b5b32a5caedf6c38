//! Truncated-Fock-space primitives: mode operators, gates, exponentials, and
//! the tensor structure with one ancilla qubit.
//!
//! Conventions, used everywhere downstream:
//!   x̂ = (â + â†)/√2,  p̂ = −i(â − â†)/√2,  [x̂, p̂] = i,
//!   qubit ⊗ oscillator ordering for joint operators, |g⟩ = (1, 0)ᵀ,
//!   D̂(α) = exp(αâ† − α*â),  Ŝ(ξ) = exp(ξ*â²/2 − ξâ†²/2),
//!   Ê_Δ = exp(−Δ²n̂).
//!
//! Displacement-type unitaries are built by exact diagonalization of their
//! truncated generators, so they are unitary to machine precision and inverse
//! pairs cancel exactly; the price is that matrix elements near the cutoff
//! differ from the infinite-dimensional operator, which is why every
//! constructor polices leakage against `HilbertConfig::trunc_tol`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Result, SimError};
use crate::linalg::{c, eigh, eye, func_herm, kron, mm, norm1, trace, CMat, CVec, C, I, ONE};

/// Fock cutoff and the leakage budget each operation must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertConfig {
    pub dim: usize,
    pub trunc_tol: f64,
}

impl HilbertConfig {
    pub fn new(dim: usize, trunc_tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(SimError::Shape(format!("Fock cutoff {dim} < 2")));
        }
        if !(trunc_tol > 0.0) {
            return Err(SimError::Shape("trunc_tol must be positive".into()));
        }
        Ok(Self { dim, trunc_tol })
    }

    pub fn with_dim(dim: usize) -> Result<Self> {
        Self::new(dim, 1e-5)
    }
}

impl Default for HilbertConfig {
    fn default() -> Self {
        // 1e-5 admits the ε ≈ 0.13 working point at dim = 150, whose comb
        // tail carries ~4e-6 past the cutoff
        Self { dim: 150, trunc_tol: 1e-5 }
    }
}

/// Which Hilbert space a matrix or state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Oscillator,
    /// qubit ⊗ oscillator, qubit factor first (2·dim total)
    Joint,
}

/// Dense operator with its space tag and verified structure flags.
#[derive(Debug, Clone)]
pub struct Operator {
    pub m: CMat,
    pub space: Space,
    pub hermitian: bool,
    pub unitary: bool,
}

impl Operator {
    pub fn oscillator(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(SimError::Shape(format!("non-square {}x{}", m.nrows(), m.ncols())));
        }
        Ok(Self { m, space: Space::Oscillator, hermitian: false, unitary: false })
    }

    pub fn joint(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
            return Err(SimError::Shape(format!(
                "joint operator must be even square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m, space: Space::Joint, hermitian: false, unitary: false })
    }

    /// Oscillator dimension regardless of space tag.
    pub fn osc_dim(&self) -> usize {
        match self.space {
            Space::Oscillator => self.m.nrows(),
            Space::Joint => self.m.nrows() / 2,
        }
    }

    /// Set the hermitian flag after verifying ‖M − M†‖ ≤ 1e−10 (1-norm bounds
    /// the operator norm here since the defect is itself Hermitian).
    pub fn claim_hermitian(mut self) -> Result<Self> {
        let d = norm1(&(&self.m - self.m.adjoint()));
        if d > 1e-10 {
            return Err(SimError::Shape(format!("hermitian claim fails: defect {d:.2e}")));
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Set the unitary flag after verifying ‖M†M − I‖ ≤ 1e−10.
    pub fn claim_unitary(mut self) -> Result<Self> {
        let n = self.m.nrows();
        let d = norm1(&(mm(&self.m.adjoint(), &self.m) - eye(n)));
        if d > 1e-10 {
            return Err(SimError::Shape(format!("unitary claim fails: defect {d:.2e}")));
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn dagger(&self) -> Self {
        Self { m: self.m.adjoint(), space: self.space, hermitian: self.hermitian, unitary: self.unitary }
    }
}

/// Pure vector or density matrix, tagged with its space.
#[derive(Debug, Clone)]
pub enum StateData {
    Pure(CVec),
    Density(CMat),
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    pub data: StateData,
    pub space: Space,
}

impl QuantumState {
    pub fn pure(v: CVec, space: Space) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(SimError::Shape(format!("pure state norm {n} != 1")));
        }
        if space == Space::Joint && v.len() % 2 != 0 {
            return Err(SimError::Shape("joint vector must have even length".into()));
        }
        Ok(Self { data: StateData::Pure(v), space })
    }

    /// Density-matrix constructor; verifies Hermiticity, unit trace and
    /// positivity (eigenvalues ≥ −1e−10). The eigensolve makes this O(n³) —
    /// fine at construction boundaries, not meant for inner loops.
    pub fn density(m: CMat, space: Space) -> Result<Self> {
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(SimError::Shape(format!("density trace {tr} != 1")));
        }
        if norm1(&(&m - m.adjoint())) > 1e-10 {
            return Err(SimError::Shape("density matrix not Hermitian".into()));
        }
        let (vals, _) = eigh(&m);
        if vals.first().copied().unwrap_or(0.0) < -1e-10 {
            return Err(SimError::Shape(format!("negative eigenvalue {:.2e}", vals[0])));
        }
        Ok(Self { data: StateData::Density(m), space })
    }

    pub fn to_density(&self) -> CMat {
        match &self.data {
            StateData::Pure(v) => {
                let vc = CMat::from_column_slice(v.len(), 1, v.as_slice());
                mm(&vc, &vc.adjoint())
            }
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            StateData::Pure(v) => v.len(),
            StateData::Density(m) => m.nrows(),
        }
    }
}

// ---------------------------------------------------------------------------
// mode operators
// ---------------------------------------------------------------------------

pub(crate) fn a_mat(dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    m
}

pub(crate) fn x_mat(dim: usize) -> CMat {
    let a = a_mat(dim);
    (&a + a.adjoint()).map(|z| z / c(2f64.sqrt(), 0.0))
}

pub(crate) fn p_mat(dim: usize) -> CMat {
    let a = a_mat(dim);
    (&a - a.adjoint()).map(|z| z * c(0.0, -1.0) / c(2f64.sqrt(), 0.0))
}

pub(crate) fn n_mat(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| if i == j { c(i as f64, 0.0) } else { C::default() })
}

/// â with entries √n on the first superdiagonal.
pub fn annihilation(cfg: &HilbertConfig) -> Operator {
    Operator { m: a_mat(cfg.dim), space: Space::Oscillator, hermitian: false, unitary: false }
}

pub fn creation(cfg: &HilbertConfig) -> Operator {
    annihilation(cfg).dagger()
}

pub fn position(cfg: &HilbertConfig) -> Operator {
    Operator { m: x_mat(cfg.dim), space: Space::Oscillator, hermitian: true, unitary: false }
}

pub fn momentum(cfg: &HilbertConfig) -> Operator {
    Operator { m: p_mat(cfg.dim), space: Space::Oscillator, hermitian: true, unitary: false }
}

pub fn number(cfg: &HilbertConfig) -> Operator {
    Operator { m: n_mat(cfg.dim), space: Space::Oscillator, hermitian: true, unitary: false }
}

// ---------------------------------------------------------------------------
// qubit factor
// ---------------------------------------------------------------------------

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[C::default(), ONE, ONE, C::default()])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[C::default(), -I, I, C::default()])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, C::default(), C::default(), -ONE])
}

pub fn ket_g() -> CVec {
    CVec::from_vec(vec![ONE, C::default()])
}

pub fn ket_e() -> CVec {
    CVec::from_vec(vec![C::default(), ONE])
}

pub fn ket_plus() -> CVec {
    let r = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CVec::from_vec(vec![r, r])
}

/// Qubit rotation exp(−iθσ/2) about x, y or z.
pub fn qubit_rotation(axis: char, theta: f64) -> CMat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match axis {
        'x' => CMat::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)]),
        'y' => CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)]),
        'z' => CMat::from_row_slice(2, 2, &[c(co, -si), C::default(), C::default(), c(co, si)]),
        _ => panic!("qubit_rotation: axis must be x, y or z"),
    }
}

// ---------------------------------------------------------------------------
// cached generator eigenbases
// ---------------------------------------------------------------------------

struct HermBasis {
    vals: Vec<f64>,
    vecs: CMat,
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
enum BasisKind {
    /// i(â† − â) = √2 p̂, generator of real displacements
    Disp,
    /// i(â² − â†²)/2, generator of real squeezing
    Squeeze,
    /// x̂ itself, for the modular fold
    Position,
}

static BASES: OnceLock<Mutex<HashMap<(BasisKind, usize), Arc<HermBasis>>>> = OnceLock::new();

fn cached_basis(kind: BasisKind, dim: usize) -> Arc<HermBasis> {
    let map = BASES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = map.lock().unwrap().get(&(kind, dim)) {
        return Arc::clone(b);
    }
    // eigh outside the lock: concurrent first calls may duplicate work, never block
    let a = a_mat(dim);
    let h = match kind {
        BasisKind::Disp => (a.adjoint() - &a).map(|z| z * I),
        BasisKind::Squeeze => {
            let aa = mm(&a, &a);
            (&aa - aa.adjoint()).map(|z| z * I / c(2.0, 0.0))
        }
        BasisKind::Position => x_mat(dim),
    };
    let (vals, vecs) = eigh(&h);
    let b = Arc::new(HermBasis { vals, vecs });
    map.lock().unwrap().insert((kind, dim), Arc::clone(&b));
    b
}

fn phase_conjugate(m: &mut CMat, phi: f64) {
    // M -> diag(e^{iφn}) M diag(e^{-iφn})
    let n = m.nrows();
    let ph: Vec<C> = (0..n).map(|k| (I * (phi * k as f64)).exp()).collect();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= ph[i] * ph[j].conj();
        }
    }
}

/// Raw displacement matrix; exactly unitary (see module docs).
pub(crate) fn disp_mat(alpha: C, dim: usize) -> CMat {
    if alpha.norm() == 0.0 {
        return eye(dim);
    }
    let b = cached_basis(BasisKind::Disp, dim);
    // exp(r(â†−â)) = exp(−i r H) with H = i(â†−â)
    let r = alpha.norm();
    let mut d = func_herm(&b.vals, &b.vecs, |w| (-I * (r * w)).exp());
    let phi = alpha.arg();
    if phi != 0.0 {
        phase_conjugate(&mut d, phi);
    }
    d
}

pub(crate) fn squeeze_mat(xi: C, dim: usize) -> CMat {
    if xi.norm() == 0.0 {
        return eye(dim);
    }
    let b = cached_basis(BasisKind::Squeeze, dim);
    // exp(r(â²−â†²)/2) = exp(−i r H) with H = i(â²−â†²)/2; then phase-rotate
    let r = xi.norm();
    let mut s = func_herm(&b.vals, &b.vecs, |w| (-I * (r * w)).exp());
    let theta = xi.arg() / 2.0;
    if theta != 0.0 {
        phase_conjugate(&mut s, theta);
    }
    s
}

/// Population of the top five Fock levels of a column state.
pub fn top_leakage(v: &CVec) -> f64 {
    let n = v.len();
    let lo = n.saturating_sub(5);
    (lo..n).map(|k| v[k].norm_sqr()).sum()
}

/// D̂(α) = exp(αâ† − α*â).  Fails if the displaced vacuum leaks past the
/// cutoff beyond `trunc_tol` (the |α|² ≪ dim precondition made checkable).
pub fn displacement(alpha: C, cfg: &HilbertConfig) -> Result<Operator> {
    // the truncated generator exponentiates to a unitary for any α, so once
    // the coherent peak |α|² passes the cutoff the state wraps around instead
    // of leaking and the tail check below goes blind; refuse outright there
    let aa = alpha.norm_sqr();
    if aa > 0.8 * cfg.dim as f64 {
        return Err(SimError::Truncation(format!(
            "displacement with |α|² = {aa:.1} needs a cutoff well above {}",
            cfg.dim
        )));
    }
    let d = disp_mat(alpha, cfg.dim);
    let leak = top_leakage(&CVec::from_column_slice(d.column(0).as_slice()));
    if leak > cfg.trunc_tol {
        return Err(SimError::Truncation(format!(
            "displaced vacuum leaks {leak:.2e} into the top Fock levels for |α| = {:.3}",
            alpha.norm()
        )));
    }
    Ok(Operator { m: d, space: Space::Oscillator, hermitian: false, unitary: true })
}

/// Ŝ(ξ) = exp(ξ*â²/2 − ξâ†²/2); leakage policed like [`displacement`].
pub fn squeeze(xi: C, cfg: &HilbertConfig) -> Result<Operator> {
    let s = squeeze_mat(xi, cfg.dim);
    let leak = top_leakage(&CVec::from_column_slice(s.column(0).as_slice()));
    if leak > cfg.trunc_tol {
        return Err(SimError::Truncation(format!(
            "squeezed vacuum leaks {leak:.2e} into the top Fock levels for |ξ| = {:.3}",
            xi.norm()
        )));
    }
    Ok(Operator { m: s, space: Space::Oscillator, hermitian: false, unitary: true })
}

/// Ê_Δ = exp(−Δ²n̂), diagonal.
pub fn envelope(delta: f64, cfg: &HilbertConfig) -> Operator {
    assert!(delta >= 0.0, "envelope: Δ must be non-negative");
    let d2 = delta * delta;
    let m = CMat::from_fn(cfg.dim, cfg.dim, |i, j| {
        if i == j { c((-d2 * i as f64).exp(), 0.0) } else { C::default() }
    });
    Operator { m, space: Space::Oscillator, hermitian: true, unitary: false }
}

/// Ê_Δ⁻¹, diagonal with entries e^{+Δ²n}. Amplifies the top of the space;
/// callers are expected to confine its use to low-energy subspaces.
pub fn envelope_inverse(delta: f64, cfg: &HilbertConfig) -> Operator {
    assert!(delta >= 0.0, "envelope_inverse: Δ must be non-negative");
    let d2 = delta * delta;
    let m = CMat::from_fn(cfg.dim, cfg.dim, |i, j| {
        if i == j { c((d2 * i as f64).exp(), 0.0) } else { C::default() }
    });
    Operator { m, space: Space::Oscillator, hermitian: true, unitary: false }
}

/// General matrix exponential (scaling and squaring with an internal error
/// estimate; see `linalg::expm`). Space tag is preserved.
pub fn matrix_exp(g: &Operator) -> Result<Operator> {
    Ok(Operator {
        m: crate::linalg::expm(&g.m)?,
        space: g.space,
        hermitian: false,
        unitary: false,
    })
}

pub(crate) fn fold_symmetric(val: f64, m: f64) -> f64 {
    // into (−m/2, m/2]
    val - m * (val / m - 0.5).ceil()
}

/// x̂ mod m on the truncated space: diagonalize x̂ and fold each eigenvalue
/// into the symmetric interval (−m/2, m/2], eigenvectors unchanged.
pub fn modular_quadrature(m: f64, cfg: &HilbertConfig) -> Result<Operator> {
    if !(m > 0.0) {
        return Err(SimError::Shape("modular_quadrature: modulus must be positive".into()));
    }
    let b = cached_basis(BasisKind::Position, cfg.dim);
    let folded = func_herm(&b.vals, &b.vecs, |w| c(fold_symmetric(w, m), 0.0));
    Ok(Operator { m: folded, space: Space::Oscillator, hermitian: true, unitary: false })
}

// ---------------------------------------------------------------------------
// qubit ⊗ oscillator plumbing
// ---------------------------------------------------------------------------

/// Which factor the given operator occupies when lifted to qubit ⊗ oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Qubit,
    Oscillator,
}

pub fn tensor_with_qubit(op: &Operator, which: Factor, cfg: &HilbertConfig) -> Result<Operator> {
    if op.space != Space::Oscillator {
        return Err(SimError::Shape("tensor_with_qubit expects an unlifted operator".into()));
    }
    let m = match which {
        Factor::Oscillator => {
            if op.m.nrows() != cfg.dim {
                return Err(SimError::Shape(format!(
                    "oscillator factor is {}x{} but cfg.dim = {}",
                    op.m.nrows(),
                    op.m.ncols(),
                    cfg.dim
                )));
            }
            kron(&eye(2), &op.m)
        }
        Factor::Qubit => {
            if op.m.nrows() != 2 {
                return Err(SimError::Shape("qubit factor must be 2x2".into()));
            }
            kron(&op.m, &eye(cfg.dim))
        }
    };
    Ok(Operator { m, space: Space::Joint, hermitian: op.hermitian, unitary: op.unitary })
}

pub fn partial_trace_qubit(state: &QuantumState) -> Result<QuantumState> {
    if state.space != Space::Joint {
        return Err(SimError::Shape("partial_trace_qubit expects a joint state".into()));
    }
    let rho = state.to_density();
    let d = rho.nrows() / 2;
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = rho[(i, j)] + rho[(d + i, d + j)];
        }
    }
    Ok(QuantumState { data: StateData::Density(out), space: Space::Oscillator })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitOutcome {
    G,
    E,
}

/// Project the ancilla onto |g⟩ or |e⟩: normalized conditional oscillator
/// state plus the Born probability.
pub fn qubit_project(state: &QuantumState, outcome: QubitOutcome) -> Result<(QuantumState, f64)> {
    if state.space != Space::Joint {
        return Err(SimError::Shape("qubit_project expects a joint state".into()));
    }
    let off = |d: usize| match outcome {
        QubitOutcome::G => 0,
        QubitOutcome::E => d,
    };
    match &state.data {
        StateData::Pure(v) => {
            let d = v.len() / 2;
            let o = off(d);
            let slice = CVec::from_fn(d, |k, _| v[o + k]);
            let p = slice.norm_squared();
            if p < 1e-14 {
                return Err(SimError::Degeneracy("projection onto zero-probability outcome".into()));
            }
            let out = slice.map(|z| z / c(p.sqrt(), 0.0));
            Ok((QuantumState { data: StateData::Pure(out), space: Space::Oscillator }, p))
        }
        StateData::Density(rho) => {
            let d = rho.nrows() / 2;
            let o = off(d);
            let block = CMat::from_fn(d, d, |i, j| rho[(o + i, o + j)]);
            let p = trace(&block).re;
            if p < 1e-14 {
                return Err(SimError::Degeneracy("projection onto zero-probability outcome".into()));
            }
            let out = block.map(|z| z / c(p, 0.0));
            Ok((QuantumState { data: StateData::Density(out), space: Space::Oscillator }, p))
        }
    }
}

/// Harmonic-oscillator eigenfunctions ψ_n(x) for n < nmax at a single point,
/// by upward recurrence (x in the same units as the spectrum of x̂).
pub fn position_wavefunctions(nmax: usize, x: f64) -> Vec<f64> {
    let mut psi = vec![0.0; nmax];
    let p0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    psi[0] = p0;
    if nmax > 1 {
        psi[1] = 2f64.sqrt() * x * p0;
    }
    for n in 1..nmax.saturating_sub(1) {
        let nf = n as f64;
        psi[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
    }
    psi
}

pub fn vacuum(cfg: &HilbertConfig) -> QuantumState {
    let mut v = CVec::zeros(cfg.dim);
    v[0] = ONE;
    QuantumState { data: StateData::Pure(v), space: Space::Oscillator }
}

pub fn fock_state(n: usize, cfg: &HilbertConfig) -> Result<QuantumState> {
    if n >= cfg.dim {
        return Err(SimError::Shape(format!("Fock level {n} outside cutoff {}", cfg.dim)));
    }
    let mut v = CVec::zeros(cfg.dim);
    v[n] = ONE;
    Ok(QuantumState { data: StateData::Pure(v), space: Space::Oscillator })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob as lfrob, mm as lmm};
    use approx::assert_abs_diff_eq;

    fn cfg(dim: usize) -> HilbertConfig {
        HilbertConfig::with_dim(dim).unwrap()
    }

    #[test]
    fn annihilation_and_commutator() {
        let a2 = annihilation(&cfg(2));
        assert_abs_diff_eq!(a2.m[(0, 1)].re, 1.0, epsilon = 1e-15); // â|1⟩ = |0⟩
        let a5 = annihilation(&cfg(5));
        assert_abs_diff_eq!(a5.m[(3, 4)].re, 2.0, epsilon = 1e-15); // ⟨3|â|4⟩ = √4
        let a = a_mat(100);
        let comm = lmm(&a, &a.adjoint()) - lmm(&a.adjoint(), &a) - eye(100);
        // defect is confined to the very top level; zero on Fock ≤ 90
        let sub = comm.view((0, 0), (91, 91)).clone_owned();
        assert!(lfrob(&sub) < 1e-12);
    }

    #[test]
    fn displacement_identity_coherent_and_inverse() {
        let d0 = displacement(C::default(), &cfg(40)).unwrap();
        assert!(lfrob(&(&d0.m - eye(40))) < 1e-14);

        let d = displacement(c(1.0, 0.0), &cfg(60)).unwrap();
        let col0 = d.m.column(0);
        let nbar: f64 = (0..60).map(|n| n as f64 * col0[n].norm_sqr()).sum();
        assert_abs_diff_eq!(nbar, 1.0, epsilon = 1e-8); // Poisson mean |α|²

        let alpha = c(2.0, 1.0);
        let dp = displacement(alpha, &cfg(100)).unwrap();
        let dm = displacement(-alpha, &cfg(100)).unwrap();
        assert!(lfrob(&(lmm(&dp.m, &dm.m) - eye(100))) < 1e-9);
        assert!(dp.unitary);
    }

    #[test]
    fn displacement_composition_phase() {
        // D(α)D(β) = e^{(αβ*−α*β)/2} D(α+β); compare away from the cutoff,
        // where the truncated product is faithful
        let (alpha, beta) = (c(0.7, -1.1), c(-0.4, 0.9));
        let dim = 120;
        let lhs = lmm(&disp_mat(alpha, dim), &disp_mat(beta, dim));
        let ph = ((alpha * beta.conj() - alpha.conj() * beta) / c(2.0, 0.0)).exp();
        let rhs = disp_mat(alpha + beta, dim).map(|z| z * ph);
        let d = (lhs - rhs).view((0, 0), (60, 60)).clone_owned();
        assert!(lfrob(&d) < 1e-8);
    }

    #[test]
    fn displacement_rejects_large_amplitude() {
        match displacement(c(7.0, 0.0), &cfg(40)) {
            Err(SimError::Truncation(_)) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn squeeze_identity_variance_unitarity() {
        let s0 = squeeze(C::default(), &cfg(30)).unwrap();
        assert!(lfrob(&(&s0.m - eye(30))) < 1e-14);

        let dim = 100;
        let s = squeeze(c(0.5, 0.0), &cfg(dim)).unwrap();
        let sv = CVec::from_column_slice(s.m.column(0).as_slice());
        let x = x_mat(dim);
        let x2 = lmm(&x, &x);
        let mean_x2 = {
            let tmp = &x2 * &sv;
            sv.dotc(&tmp).re
        };
        assert_abs_diff_eq!(mean_x2, (-1.0f64).exp() / 2.0, epsilon = 1e-6);

        let u = lmm(&s.m.adjoint(), &s.m) - eye(dim);
        assert!(lfrob(&u) < 1e-9);
    }

    #[test]
    fn envelope_entries_and_inverse() {
        let e0 = envelope(0.0, &cfg(20));
        assert!(lfrob(&(&e0.m - eye(20))) < 1e-15);
        let e = envelope(0.3, &cfg(20));
        assert_abs_diff_eq!(e.m[(10, 10)].re, (-0.9f64).exp(), epsilon = 1e-14);
        let einv = envelope_inverse(0.2, &cfg(100));
        let prod = lmm(&envelope(0.2, &cfg(100)).m, &einv.m);
        assert!(lfrob(&(prod - eye(100))) < 1e-9);
    }

    #[test]
    fn matrix_exp_examples() {
        let z = Operator::oscillator(CMat::zeros(10, 10)).unwrap();
        assert!(lfrob(&(&matrix_exp(&z).unwrap().m - eye(10))) < 1e-14);

        // exp(iπσx/2) = iσx
        let g = Operator::oscillator(sigma_x().map(|z| z * I * c(std::f64::consts::FRAC_PI_2, 0.0)))
            .unwrap();
        let e = matrix_exp(&g).unwrap();
        assert!(lfrob(&(&e.m - sigma_x().map(|z| z * I))) < 1e-12);

        // random anti-Hermitian exponentiates to a unitary
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let r = CMat::from_fn(50, 50, |_, _| c(next(), next()));
        let sk = (&r - r.adjoint()).map(|z| z / c(2.0, 0.0));
        let u = matrix_exp(&Operator::oscillator(sk).unwrap()).unwrap();
        assert!(lfrob(&(lmm(&u.m.adjoint(), &u.m) - eye(50))) < 1e-9);
    }

    #[test]
    fn modular_fold_rules() {
        assert_abs_diff_eq!(fold_symmetric(0.6, 1.0), -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_symmetric(0.5, 1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_symmetric(-0.5, 1.0), 0.5, epsilon = 1e-12);

        // m beyond the truncated spectral range: no fold happens
        let cf = cfg(40);
        let xm = x_mat(40);
        let big = modular_quadrature(1e4, &cf).unwrap();
        assert!(lfrob(&(&big.m - &xm)) < 1e-10);

        // spectrum lands in (−m/2, m/2] for the code modulus at dim = 150
        let l = 2.0 * std::f64::consts::PI.sqrt();
        let c_delta = (0.13f64 / l).asinh().cosh();
        let m = l / (2.0 * c_delta);
        let folded = modular_quadrature(m, &cfg(150)).unwrap();
        let (vals, _) = eigh(&folded.m);
        assert!(vals.iter().all(|&v| v > -m / 2.0 - 1e-12 && v <= m / 2.0 + 1e-12));

        // idempotent under a second fold
        let twice = modular_quadrature(m, &cfg(150)).unwrap();
        let (v1, b1) = eigh(&twice.m);
        let refold: Vec<f64> = v1.iter().map(|&w| fold_symmetric(w, m)).collect();
        let again = func_herm(&refold, &b1, |w| c(w, 0.0));
        assert!(lfrob(&(again - twice.m)) < 1e-9);
    }

    #[test]
    fn xp_commutator() {
        let dim = 80;
        let (x, p) = (x_mat(dim), p_mat(dim));
        let comm = lmm(&x, &p) - lmm(&p, &x);
        let expect = eye(dim).map(|z| z * I);
        let sub = (comm - expect).view((0, 0), (dim - 10, dim - 10)).clone_owned();
        assert!(lfrob(&sub) < 1e-10);
    }

    #[test]
    fn envelope_displacement_similarity() {
        // Ê_Δ x̂ Ê_Δ⁻¹ = c_Δ x̂ + i s_Δ p̂ on the lower half of the space
        let dim = 120;
        let cf = cfg(dim);
        let d2 = 0.05f64;
        let delta = d2.sqrt();
        let e = envelope(delta, &cf).m;
        let einv = envelope_inverse(delta, &cf).m;
        let lhs = lmm(&lmm(&e, &x_mat(dim)), &einv);
        let rhs = x_mat(dim).map(|z| z * c(d2.cosh(), 0.0))
            + p_mat(dim).map(|z| z * I * c(d2.sinh(), 0.0));
        let half = dim / 2;
        let d = (lhs - rhs).view((0, 0), (half, half)).clone_owned();
        assert!(lfrob(&d) < 1e-8);
    }

    #[test]
    fn tensor_and_trace_roundtrip() {
        let cf = cfg(12);
        let a = annihilation(&cf);
        let lifted = tensor_with_qubit(&a, Factor::Oscillator, &cf).unwrap();
        assert_eq!(lifted.m.nrows(), 24);
        assert_eq!(lifted.space, Space::Joint);

        // trace the qubit out of |+⟩⟨+| ⊗ ρ
        let psi = vacuum(&cf);
        let rho = psi.to_density();
        let plus = ket_plus();
        let pm = CMat::from_fn(2, 2, |i, j| plus[i] * plus[j].conj());
        let joint = QuantumState::density(kron(&pm, &rho), Space::Joint).unwrap();
        let back = partial_trace_qubit(&joint).unwrap();
        assert!(lfrob(&(back.to_density() - rho)) < 1e-12);
    }

    #[test]
    fn projection_probabilities() {
        // |+⟩ ⊗ |0⟩: g outcome has probability 1/2
        let mut v = CVec::zeros(20);
        v[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[10] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let st = QuantumState::pure(v, Space::Joint).unwrap();
        let (cond, p) = qubit_project(&st, QubitOutcome::G).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        assert_eq!(cond.dim(), 10);

        // probabilities sum to one for an entangled state
        let mut w = CVec::zeros(20);
        w[1] = c(0.6, 0.0);
        w[14] = c(0.0, 0.8);
        let st2 = QuantumState::pure(w, Space::Joint).unwrap();
        let (_, pg) = qubit_project(&st2, QubitOutcome::G).unwrap();
        let (_, pe) = qubit_project(&st2, QubitOutcome::E).unwrap();
        assert_abs_diff_eq!(pg + pe, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wavefunction_normalization() {
        // ∫|ψ_n|²dx = 1, checked on a crude grid for n = 0..6
        let (lo, hi, np) = (-8.0, 8.0, 1600);
        let dx = (hi - lo) / np as f64;
        let mut acc = vec![0.0; 6];
        for k in 0..np {
            let x = lo + (k as f64 + 0.5) * dx;
            let psi = position_wavefunctions(6, x);
            for n in 0..6 {
                acc[n] += psi[n] * psi[n] * dx;
            }
        }
        for n in 0..6 {
            assert_abs_diff_eq!(acc[n], 1.0, epsilon = 1e-8);
        }
    }
}
