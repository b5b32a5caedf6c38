//! Finite-energy GKP code words, stabilizers, logical operators and readout.
//!
//! Square-lattice code with lattice constant l = 2√π.  Ideal translations
//!   T̂_x0 = e^{ilx̂} = D̂(il/√2),   T̂_p0 = e^{−ilp̂} = D̂(l/√2),
//!   X̂₀ = e^{−i(l/2)p̂},  Ẑ₀ = e^{i(l/2)x̂},  Ŷ₀ = iX̂₀Ẑ₀.
//! The finite-energy versions are the envelope similarity transforms
//!   T̂_xΔ = Ê_Δ T̂_x0 Ê_Δ⁻¹ = e^{il(c_Δx̂ + is_Δp̂)},
//! realized here directly through the exponent form (the envelope inverse is
//! never applied to a state).  Code words come from the Hermite comb
//!   c_n ∝ e^{−Δ²n} Σ_j ψ_n((j + μ/2)l),
//! teeth added in symmetric pairs until the state stops moving.
//!
//! ε = s_Δ·l is the user-facing envelope knob: it is the small translation
//! the stabilization circuits actually implement.

use crate::error::{Result, SimError};
use crate::fock::{
    self, a_mat, modular_quadrature, p_mat, position_wavefunctions, x_mat, HilbertConfig,
    Operator, QuantumState, Space, StateData,
};
use crate::linalg::{c, expm, mm, trace, CMat, CVec, I, ONE};

pub const LATTICE: f64 = 3.544_907_701_811_032; // 2√π

/// Code geometry and envelope size; everything is derived from ε (or Δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkpParams {
    pub l: f64,
    pub delta: f64,
    pub c: f64,
    pub s: f64,
    pub t: f64,
    pub eps: f64,
}

impl GkpParams {
    /// Δ² = asinh(ε/l); this is the exact inversion of ε = sinh(Δ²)·l.
    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(SimError::Shape("ε must be positive".into()));
        }
        let l = LATTICE;
        let d2 = (eps / l).asinh();
        Ok(Self { l, delta: d2.sqrt(), c: d2.cosh(), s: d2.sinh(), t: d2.tanh(), eps })
    }

    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(SimError::Shape("Δ must be positive".into()));
        }
        let l = LATTICE;
        let d2 = delta * delta;
        Ok(Self { l, delta, c: d2.cosh(), s: d2.sinh(), t: d2.tanh(), eps: d2.sinh() * l })
    }

    pub fn d2(&self) -> f64 {
        self.delta * self.delta
    }
}

/// Which stabilizer direction an operator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabAxis {
    /// position comb side, T̂_x
    X,
    /// momentum comb side, T̂_p
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        match self {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        }
    }
}

// ---------------------------------------------------------------------------
// ideal (infinite-energy) translations
// ---------------------------------------------------------------------------

pub fn ideal_stabilizer(axis: StabAxis, params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let alpha = match axis {
        StabAxis::X => c(0.0, params.l / 2f64.sqrt()), // e^{ilx̂} = D(il/√2)
        StabAxis::P => c(params.l / 2f64.sqrt(), 0.0), // e^{−ilp̂} = D(l/√2)
    };
    fock::displacement(alpha, cfg)
}

pub fn ideal_pauli(pauli: Pauli, params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let h = params.l / (2.0 * 2f64.sqrt());
    let alpha = match pauli {
        Pauli::X => c(h, 0.0),      // e^{−i(l/2)p̂}
        Pauli::Z => c(0.0, h),      // e^{i(l/2)x̂}
        Pauli::Y => c(h, h),        // iX̂₀Ẑ₀ collapses to one displacement
    };
    fock::displacement(alpha, cfg)
}

// ---------------------------------------------------------------------------
// code words
// ---------------------------------------------------------------------------

/// Finite-energy code word |μ_Δ⟩ from the enveloped Hermite comb.
pub fn make_gkp_state(mu: u8, params: &GkpParams, cfg: &HilbertConfig) -> Result<QuantumState> {
    assert!(mu < 2, "make_gkp_state: logical label must be 0 or 1");
    let dim = cfg.dim;
    let d2 = params.d2();
    let env: Vec<f64> = (0..dim).map(|n| (-d2 * n as f64).exp()).collect();
    let mut acc = vec![0.0f64; dim];
    let mut j = 0usize;
    loop {
        let center = (j as f64 + mu as f64 / 2.0) * params.l;
        let teeth: &[f64] = if center == 0.0 { &[0.0] } else { &[center, -center] };
        let mut add = vec![0.0f64; dim];
        for &xj in teeth {
            let psi = position_wavefunctions(dim, xj);
            for n in 0..dim {
                add[n] += psi[n];
            }
        }
        let mut add_norm2 = 0.0;
        for n in 0..dim {
            add[n] *= env[n];
            acc[n] += add[n];
            add_norm2 += add[n] * add[n];
        }
        let acc_norm2: f64 = acc.iter().map(|v| v * v).sum();
        if j > 2 && add_norm2.sqrt() < 1e-10 * acc_norm2.sqrt().max(1e-300) {
            break;
        }
        j += 1;
        if j > 200 {
            return Err(SimError::Convergence(
                "comb teeth failed to settle within 200 lattice sites".into(),
            ));
        }
    }
    let norm: f64 = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    let v = CVec::from_fn(dim, |n, _| c(acc[n] / norm, 0.0));
    let leak = fock::top_leakage(&v);
    if leak > cfg.trunc_tol {
        return Err(SimError::Truncation(format!(
            "code word leaks {leak:.2e} into the top Fock levels at dim = {dim} (ε = {})",
            params.eps
        )));
    }
    QuantumState::pure(v, Space::Oscillator)
}

/// Independent construction: Gaussian-weighted sum of squeezed coherent
/// states.  Ê_Δ maps each comb tooth |x₀⟩ to a Gaussian packet centered at
/// x₀/c_Δ with Var(x) = t_Δ/2 and weight e^{−t_Δx₀²/2}; used as the oracle
/// against the Hermite construction.
pub fn make_gkp_state_squeezed_sum(
    mu: u8,
    params: &GkpParams,
    cfg: &HilbertConfig,
) -> Result<QuantumState> {
    assert!(mu < 2);
    let dim = cfg.dim;
    let r = -0.5 * params.t.ln(); // e^{−2r}/2 = t/2
    let sv: CVec = fock::squeeze_mat(c(r, 0.0), dim).column(0).clone_owned();
    let mut psi = CVec::zeros(dim);
    for j in -60i32..=60 {
        let x0 = (j as f64 + mu as f64 / 2.0) * params.l;
        let w = (-params.t * x0 * x0 / 2.0).exp();
        if w < 1e-18 {
            continue;
        }
        let alpha = c(x0 / params.c / 2f64.sqrt(), 0.0);
        let d = fock::disp_mat(alpha, dim);
        let tooth = &d * &sv;
        psi += tooth.map(|z| z * c(w, 0.0));
    }
    let n = psi.norm();
    QuantumState::pure(psi.map(|z| z / c(n, 0.0)), Space::Oscillator)
}

pub fn mean_excitation(state: &QuantumState) -> f64 {
    match &state.data {
        StateData::Pure(v) => (0..v.len()).map(|n| n as f64 * v[n].norm_sqr()).sum(),
        StateData::Density(m) => (0..m.nrows()).map(|n| n as f64 * m[(n, n)].re).sum(),
    }
}

// ---------------------------------------------------------------------------
// finite-energy stabilizers and logicals (exponent form)
// ---------------------------------------------------------------------------

fn translation_generator(params: &GkpParams, length: f64, axis: StabAxis, dim: usize) -> CMat {
    // Ê_Δ e^{iθx̂} Ê_Δ⁻¹ = exp(iθ(c_Δx̂ + is_Δp̂)), and the p-side analogue
    let x = x_mat(dim);
    let p = p_mat(dim);
    match axis {
        StabAxis::X => {
            // i·length·(c x̂ + i s p̂)
            x.map(|z| z * I * c(length * params.c, 0.0))
                + p.map(|z| z * c(-length * params.s, 0.0))
        }
        StabAxis::P => {
            // −i·length·(c p̂ − i s x̂)
            p.map(|z| z * (-I) * c(length * params.c, 0.0))
                + x.map(|z| z * c(-length * params.s, 0.0))
        }
    }
}

pub fn finite_stabilizer(axis: StabAxis, params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let g = translation_generator(params, params.l, axis, cfg.dim);
    Ok(Operator { m: expm(&g)?, space: Space::Oscillator, hermitian: false, unitary: false })
}

pub fn finite_pauli(pauli: Pauli, params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let half = params.l / 2.0;
    let g = match pauli {
        Pauli::X => translation_generator(params, half, StabAxis::P, cfg.dim),
        Pauli::Z => translation_generator(params, half, StabAxis::X, cfg.dim),
        Pauli::Y => {
            // Ê_Δ D̂(α_Y) Ê_Δ⁻¹ = exp(α_Y e^{−Δ²}â† − α_Y* e^{+Δ²}â)
            let ay = c(half / 2f64.sqrt(), half / 2f64.sqrt());
            let a = a_mat(cfg.dim);
            let d2 = params.d2();
            a.adjoint().map(|z| z * ay * c((-d2).exp(), 0.0))
                + a.map(|z| z * (-ay.conj()) * c(d2.exp(), 0.0))
        }
    };
    Ok(Operator { m: expm(&g)?, space: Space::Oscillator, hermitian: false, unitary: false })
}

// ---------------------------------------------------------------------------
// dark modes
// ---------------------------------------------------------------------------

/// d̂_{x,Δ} = (x̂_[l/2c_Δ]/√t_Δ + i√t_Δ p̂)/√2, the annihilation-like operator
/// whose kernel is exactly the +1 eigenspace of T̂_{x,Δ}.  The p-side version
/// follows from the Fourier rotation x̂ → p̂, p̂ → −x̂ (phase diag(iⁿ)).
pub fn dark_mode(axis: StabAxis, params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let dim = cfg.dim;
    let modulus = params.l / (2.0 * params.c);
    let xm = modular_quadrature(modulus, cfg)?.m;
    let st = params.t.sqrt();
    let m = match axis {
        StabAxis::X => {
            xm.map(|z| z / c(st, 0.0)) + p_mat(dim).map(|z| z * I * c(st, 0.0))
        }
        StabAxis::P => {
            // p̂_[m] = R x̂_[m] R† with R = diag(iⁿ)
            let mut pm = xm;
            for i in 0..dim {
                for j in 0..dim {
                    let k = (i as i64 - j as i64).rem_euclid(4);
                    pm[(i, j)] *= match k {
                        0 => ONE,
                        1 => I,
                        2 => -ONE,
                        _ => -I,
                    };
                }
            }
            pm.map(|z| z / c(st, 0.0)) + x_mat(dim).map(|z| z * (-I) * c(st, 0.0))
        }
    };
    let m = m.map(|z| z / c(2f64.sqrt(), 0.0));
    Ok(Operator { m, space: Space::Oscillator, hermitian: false, unitary: false })
}

// ---------------------------------------------------------------------------
// logical readout
// ---------------------------------------------------------------------------

/// Orthonormalized code basis with the Pauli operators built on it.
#[derive(Debug, Clone)]
pub struct LogicalBasis {
    /// dim×2 orthonormal basis from symmetric orthogonalization of {|0_Δ⟩, |1_Δ⟩}
    pub basis: CMat,
    /// σ̄_X, σ̄_Y, σ̄_Z lifted to the oscillator
    pub bars: [CMat; 3],
    /// code projector ĒĒ†
    pub projector: CMat,
}

impl LogicalBasis {
    pub fn bar(&self, p: Pauli) -> &CMat {
        &self.bars[p.index()]
    }
}

/// Symmetric (Löwdin) orthogonalization of the two code words; both words are
/// perturbed equally, so neither logical pole is privileged.
pub fn logical_basis(params: &GkpParams, cfg: &HilbertConfig) -> Result<LogicalBasis> {
    let w0 = make_gkp_state(0, params, cfg)?;
    let w1 = make_gkp_state(1, params, cfg)?;
    let (v0, v1) = match (&w0.data, &w1.data) {
        (StateData::Pure(a), StateData::Pure(b)) => (a.clone(), b.clone()),
        _ => unreachable!("code words are pure by construction"),
    };
    let ov = v0.dotc(&v1);
    if ov.norm() > 0.1 {
        return Err(SimError::Degeneracy(format!(
            "|⟨0_Δ|1_Δ⟩| = {:.3} — envelope too large for a meaningful qubit",
            ov.norm()
        )));
    }
    let dim = cfg.dim;
    let mut v = CMat::zeros(dim, 2);
    v.set_column(0, &v0);
    v.set_column(1, &v1);
    // S^{-1/2} for the 2×2 Gram matrix, done in closed form on its eigenbasis
    let sgram = mm(&v.adjoint(), &v);
    let (vals, vecs) = crate::linalg::eigh(&sgram);
    let mut shalf = CMat::zeros(2, 2);
    for k in 0..2 {
        let w = vals[k].max(1e-300).powf(-0.5);
        let col = vecs.column(k);
        for i in 0..2 {
            for j in 0..2 {
                shalf[(i, j)] += col[i] * col[j].conj() * c(w, 0.0);
            }
        }
    }
    let e = mm(&v, &shalf);
    let sig = [fock::sigma_x(), fock::sigma_y(), fock::sigma_z()];
    let bars = [
        mm(&mm(&e, &sig[0]), &e.adjoint()),
        mm(&mm(&e, &sig[1]), &e.adjoint()),
        mm(&mm(&e, &sig[2]), &e.adjoint()),
    ];
    let projector = mm(&e, &e.adjoint());
    Ok(LogicalBasis { basis: e, bars, projector })
}

pub fn code_projector(params: &GkpParams, cfg: &HilbertConfig) -> Result<Operator> {
    let lb = logical_basis(params, cfg)?;
    Operator::oscillator(lb.projector)?.claim_hermitian()
}

/// (s_X, s_Y, s_Z) with s_P = tr[ρσ̄_P] / tr[ρP̂_C]: the Bloch vector of the
/// in-code component, insensitive to leakage weight.
pub fn logical_bloch(
    state: &QuantumState,
    params: &GkpParams,
    cfg: &HilbertConfig,
) -> Result<(f64, f64, f64)> {
    if state.space != Space::Oscillator {
        return Err(SimError::Shape("logical_bloch expects an oscillator state".into()));
    }
    let lb = logical_basis(params, cfg)?;
    let rho = state.to_density();
    if rho.nrows() != cfg.dim {
        return Err(SimError::Shape(format!(
            "state dim {} does not match cfg.dim {}",
            rho.nrows(),
            cfg.dim
        )));
    }
    let weight = trace(&mm(&rho, &lb.projector)).re;
    if weight < 1e-12 {
        return Err(SimError::Degeneracy(
            "state has no code-space weight; Bloch vector undefined".into(),
        ));
    }
    let mut out = [0.0f64; 3];
    for p in Pauli::ALL {
        out[p.index()] = trace(&mm(&rho, lb.bar(p))).re / weight;
    }
    Ok((out[0], out[1], out[2]))
}
