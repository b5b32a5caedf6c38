//! Noise channels: oscillator loss and dephasing acting in idle slots between
//! stabilization stages, and ancilla decay and dephasing acting during the
//! controlled displacements of a round.
//!
//! Jump-operator conventions: oscillator loss √κ·â, oscillator dephasing
//! √κ_φ·n̂, ancilla decay √γ₁·σ̂₋, ancilla dephasing √(γ_φ/2)·σ̂_z.  A qubit
//! coherence therefore decays as e^{−(γ₁/2+γ_φ)t} and a Fock coherence ρ_mn as
//! e^{−κ_φt(m−n)²/2}.
//!
//! Gates are noiseless for the oscillator; a controlled displacement CD̂(β)
//! takes time τ = |β|/(l·c_Δ)·t_CD during which only the ancilla suffers.
//! Rotations, resets and measurements are instantaneous and noiseless.

use crate::error::{Result, SimError};
use crate::fock::{self, a_mat, disp_mat, HilbertConfig};
use crate::linalg::{
    c, eigh, eye, frob, kron, mm, norm1, psd_sqrt, trace, trace_prod, CMat, C, I, ONE,
};
use crate::protocols::{build_round, step_unitary, CircuitStep, ProtocolSpec, StepKind};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

/// Rates and time scales of the full noise model.  All rates are per unit
/// time; `dt` is the idle slot after each stabilization stage and `t_cd` the
/// duration of a full-weight controlled displacement, so the dimensionless
/// products κ·dt, κ_φ·dt, γ₁·t_cd, γ_φ·t_cd are what experiments sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub kappa: f64,
    pub kappa_phi: f64,
    pub gamma1: f64,
    pub gamma_phi: f64,
    pub dt: f64,
    pub t_cd: f64,
}

impl NoiseParams {
    pub fn new(
        kappa: f64,
        kappa_phi: f64,
        gamma1: f64,
        gamma_phi: f64,
        dt: f64,
        t_cd: f64,
    ) -> Result<Self> {
        let p = NoiseParams { kappa, kappa_phi, gamma1, gamma_phi, dt, t_cd };
        p.validate()?;
        Ok(p)
    }

    /// No noise at all; the channels reduce to their ideal counterparts.
    pub fn quiet() -> Self {
        NoiseParams { kappa: 0.0, kappa_phi: 0.0, gamma1: 0.0, gamma_phi: 0.0, dt: 0.0, t_cd: 0.0 }
    }

    /// Oscillator noise only (idle slots), noiseless ancilla.
    pub fn oscillator(kappa: f64, kappa_phi: f64, dt: f64) -> Result<Self> {
        NoiseParams::new(kappa, kappa_phi, 0.0, 0.0, dt, 0.0)
    }

    /// Ancilla noise only (during gates), perfect oscillator.
    pub fn ancilla(gamma1: f64, gamma_phi: f64, t_cd: f64) -> Result<Self> {
        NoiseParams::new(0.0, 0.0, gamma1, gamma_phi, 0.0, t_cd)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("kappa_phi", self.kappa_phi),
            ("gamma1", self.gamma1),
            ("gamma_phi", self.gamma_phi),
            ("dt", self.dt),
            ("t_cd", self.t_cd),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Spec(format!("noise parameter {name} = {v} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// oscillator idle channel
// ---------------------------------------------------------------------------

/// Loss Kraus bands E_k = √(η^k/k!)·e^{−κδt·n̂/2}·â^k, η = 1−e^{−κδt}, indexed
/// by the source Fock level: band[k][n] = (E_k)_{n−k,n}.  The band depth is
/// chosen so the diagonal completeness defect max_n|1−Σ_k(E_k†E_k)_{nn}| stays
/// below 1e−13; the binomial identity Σ_k C(n,k)η^k e^{−κδt(n−k)} = 1 makes
/// the full-depth set exact, so the loop always terminates.
fn loss_bands(kappa_dt: f64, dim: usize) -> Vec<Vec<f64>> {
    if kappa_dt <= 0.0 {
        return vec![vec![1.0; dim]];
    }
    let eta = -(-kappa_dt).exp_m1();
    let ln_eta = eta.ln();
    let mut defect = vec![1.0; dim];
    let mut bands = Vec::new();
    for k in 0..dim {
        let mut band = vec![0.0; dim];
        let mut ln_binom = 0.0;
        for n in k..dim {
            if n > k {
                ln_binom += (n as f64).ln() - ((n - k) as f64).ln();
            }
            let v = (0.5 * (ln_binom + k as f64 * ln_eta) - 0.5 * kappa_dt * (n - k) as f64).exp();
            band[n] = v;
            defect[n] -= v * v;
        }
        bands.push(band);
        if defect.iter().fold(0.0f64, |m, d| m.max(d.abs())) < 1e-13 {
            break;
        }
    }
    bands
}

/// The loss Kraus set as explicit matrices.
pub fn loss_kraus(kappa_dt: f64, dim: usize) -> Vec<CMat> {
    loss_bands(kappa_dt, dim)
        .iter()
        .enumerate()
        .map(|(k, band)| {
            let mut m = CMat::zeros(dim, dim);
            for n in k..dim {
                m[(n - k, n)] = c(band[n], 0.0);
            }
            m
        })
        .collect()
}

/// ρ ↦ Σ_k E_kρE_k† applied band-wise: (E_kρE_k†)_{ij} = b_{i+k}b_{j+k}ρ_{i+k,j+k}.
pub fn apply_loss(rho: &CMat, kappa_dt: f64) -> CMat {
    let dim = rho.nrows();
    let bands = loss_bands(kappa_dt, dim);
    let mut out = CMat::zeros(dim, dim);
    for (k, band) in bands.iter().enumerate() {
        for j in 0..dim - k {
            for i in 0..dim - k {
                out[(i, j)] += rho[(i + k, j + k)] * c(band[i + k] * band[j + k], 0.0);
            }
        }
    }
    out
}

/// ρ_mn ↦ ρ_mn·e^{−κ_φδt(m−n)²/2}, the exact dephasing channel.
pub fn dephase_oscillator(rho: &CMat, kphi_dt: f64) -> CMat {
    let dim = rho.nrows();
    let mut out = rho.clone();
    for j in 0..dim {
        for i in 0..dim {
            let d = i as f64 - j as f64;
            out[(i, j)] *= c((-0.5 * kphi_dt * d * d).exp(), 0.0);
        }
    }
    out
}

/// Free evolution of the oscillator for one idle slot of length `dt`.
///
/// Loss preserves each (m−n) off-diagonal and dephasing is a scalar on it, so
/// the two generators commute exactly and the composition below is the exact
/// solution of the joint master equation, not a splitting approximation.
pub fn idle_channel(rho: &CMat, noise: &NoiseParams) -> Result<CMat> {
    if rho.nrows() != rho.ncols() {
        return Err(SimError::Shape("idle_channel needs a square density matrix".into()));
    }
    noise.validate()?;
    let kdt = noise.kappa * noise.dt;
    let pdt = noise.kappa_phi * noise.dt;
    let mut out = if kdt > 0.0 { apply_loss(rho, kdt) } else { rho.clone() };
    if pdt > 0.0 {
        out = dephase_oscillator(&out, pdt);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lindblad integrator
// ---------------------------------------------------------------------------

const RK_MAX_STEPS: usize = 400_000;

/// dρ/dt = −i[H,ρ] + Σ_k γ_k(L_kρL_k† − ½{L_k†L_k,ρ}) integrated by an
/// adaptive Dormand–Prince 5(4) scheme.  Serves as the independent validator
/// for every compiled channel; production paths use the exact Kraus forms.
///
/// Fails with `StepControl` if step-size control collapses, `Divergence` if
/// the result drifts in trace beyond 1e−9 or (for a density-matrix input)
/// acquires an eigenvalue below −1e−8.
pub fn lindblad_evolve(rho: &CMat, h: &CMat, jumps: &[(f64, CMat)], t: f64) -> Result<CMat> {
    let dim = rho.nrows();
    if rho.ncols() != dim || h.nrows() != dim || h.ncols() != dim {
        return Err(SimError::Shape("lindblad_evolve: state and Hamiltonian must match".into()));
    }
    for (rate, l) in jumps {
        if !rate.is_finite() || *rate < 0.0 {
            return Err(SimError::Spec(format!("jump rate {rate} must be ≥ 0")));
        }
        if l.nrows() != dim || l.ncols() != dim {
            return Err(SimError::Shape("lindblad_evolve: jump operator shape mismatch".into()));
        }
    }
    if !t.is_finite() || t < 0.0 {
        return Err(SimError::Spec(format!("evolution time {t} must be ≥ 0")));
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }

    // γL†L precomputed once; the dissipator needs LρL† and the anticommutator
    let scaled: Vec<(f64, &CMat, CMat)> =
        jumps.iter().map(|(g, l)| (*g, l, mm(&l.adjoint(), l).map(|z| z * c(*g, 0.0)))).collect();
    let rhs = |r: &CMat| -> CMat {
        let mut acc = (mm(h, r) - mm(r, h)).map(|z| z * (-I));
        for (g, l, ll) in &scaled {
            acc += mm(&mm(l, r), &l.adjoint()).map(|z| z * c(*g, 0.0));
            acc -= (mm(ll, r) + mm(r, ll)).map(|z| z * c(0.5, 0.0));
        }
        acc
    };

    // Dormand–Prince coefficients
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // y5 − y4 weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    const RTOL: f64 = 1e-12;
    const ATOL: f64 = 1e-14;

    let tr_in = trace(rho);
    let hermitian_input = frob(&(rho - rho.adjoint())) <= 1e-10 * (1.0 + frob(rho));
    let mut y = rho.clone();
    let mut time = 0.0;
    let mut step = t / 64.0;
    let mut k1 = rhs(&y);
    let mut steps = 0usize;
    while time < t {
        steps += 1;
        if steps > RK_MAX_STEPS {
            return Err(SimError::StepControl(format!(
                "more than {RK_MAX_STEPS} integrator steps; jump spectrum too stiff for the \
                 horizon {t}"
            )));
        }
        if step < t * 1e-14 {
            return Err(SimError::StepControl(format!(
                "step size collapsed to {step:.3e} at t = {time:.3e}"
            )));
        }
        if t - time <= t * 1e-12 {
            break;
        }
        if time + step > t {
            step = t - time;
        }
        let mut ks: Vec<CMat> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for stage in 0..6 {
            let mut arg = y.clone();
            for (j, kj) in ks.iter().enumerate() {
                let w = A[stage][j];
                if w != 0.0 {
                    arg += kj.map(|z| z * c(step * w, 0.0));
                }
            }
            ks.push(rhs(&arg));
        }
        // the last stage argument is already the 5th-order solution
        let mut y5 = y.clone();
        for (j, kj) in ks.iter().take(6).enumerate() {
            let w = A[5][j];
            if w != 0.0 {
                y5 += kj.map(|z| z * c(step * w, 0.0));
            }
        }
        let mut err_mat = CMat::zeros(dim, dim);
        for (j, kj) in ks.iter().enumerate() {
            if E[j] != 0.0 {
                err_mat += kj.map(|z| z * c(step * E[j], 0.0));
            }
        }
        let scale = ATOL + RTOL * frob(&y5).max(frob(&y));
        let err = frob(&err_mat) / scale;
        if err <= 1.0 {
            time += step;
            y = y5;
            k1 = ks.pop().unwrap();
        } else {
            k1 = ks.swap_remove(0);
        }
        let factor = if err.is_finite() && err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else if err == 0.0 {
            5.0
        } else {
            0.2
        };
        step *= factor;
    }

    let drift = (trace(&y) - tr_in).norm();
    if drift > 1e-9 * (1.0 + tr_in.norm()) {
        return Err(SimError::Divergence(format!("trace drifted by {drift:.2e}")));
    }
    if hermitian_input {
        let herm = (&y + y.adjoint()).map(|z| z * c(0.5, 0.0));
        let (vals, _) = eigh(&herm);
        let floor = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if floor < -1e-8 {
            return Err(SimError::Divergence(format!("negative eigenvalue {floor:.2e}")));
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// ancilla noise during gates
// ---------------------------------------------------------------------------

/// Eigensystem of i(bâ†−b*â), the Hermitian generator shared by every
/// displacement along the ±b line: D(u·b) = V·e^{−iuW}·V†.
fn boost_eigensystem(b: C, dim: usize) -> (Vec<f64>, CMat) {
    let a = a_mat(dim);
    let g = a.adjoint().map(|z| z * b) - a.map(|z| z * b.conj());
    eigh(&g.map(|z| z * I))
}

/// (e^z − 1)/z, stable near z = 0.
fn phi1(z: C) -> C {
    if z.norm() < 1e-4 {
        ONE + z * c(0.5, 0.0) + z * z * c(1.0 / 6.0, 0.0) + z * z * z * c(1.0 / 24.0, 0.0)
    } else {
        (z.exp() - ONE) / z
    }
}

/// Decay-jump kernel of one controlled displacement in the boost eigenbasis:
/// the jump density γ₁τ·e^{−γ₁τs}ds over gate progress s ∈ [0,1] integrates
/// against e^{−i(1−2s)(w_m−w_n)} to a closed form, giving the exact channel
/// without any quadrature.  The kernel is a positive-semidefinite Gram matrix
/// of the phase functions, so its eigensystem yields exact Kraus operators.
fn jump_mask(w: &[f64], g1tau: f64, weight: f64) -> CMat {
    let dim = w.len();
    let mut m = CMat::zeros(dim, dim);
    for n in 0..dim {
        for mrow in 0..dim {
            let delta = w[mrow] - w[n];
            let z = c(-g1tau, 2.0 * delta);
            let val = c(g1tau * weight, 0.0) * c(delta.cos(), -delta.sin()) * phi1(z);
            m[(mrow, n)] = val;
        }
    }
    m
}

/// Kraus set of a single circuit step on the joint space under ancilla noise.
///
/// Rotations and resets are instantaneous and noiseless.  A controlled
/// displacement CD̂(β) runs for τ = |β|/(l·c_Δ)·t_CD under the constant gate
/// generator with jumps √γ₁σ̂₋ and √(γ_φ/2)σ̂_z: dephasing factorizes into a
/// σ̂_z flip with probability p₁ = (1−e^{−γ_φτ})/2, the no-jump branch decays
/// the |e⟩ block by e^{−γ₁τ/2}, and a decay at progress s leaves the exact
/// residual displacement D(β(1−2s)/(2√2)) resolved by the jump kernel.
pub fn gate_kraus(step: &CircuitStep, noise: &NoiseParams, cfg: &HilbertConfig) -> Result<Vec<CMat>> {
    noise.validate()?;
    let dim = cfg.dim;
    match step.kind {
        StepKind::Rotation { .. } => Ok(vec![step_unitary(step, cfg)?]),
        StepKind::Reset => {
            let g = fock::ket_g();
            let gg = &g * g.adjoint();
            let mut ge = CMat::zeros(2, 2);
            ge[(0, 1)] = ONE;
            Ok(vec![kron(&gg, &eye(dim)), kron(&ge, &eye(dim))])
        }
        StepKind::MeasureFeedback { .. } => Err(SimError::Spec(
            "measurement feedback is compiled at round level, not as a standalone gate".into(),
        )),
        StepKind::ControlledDisplacement(beta) => {
            let tau = step.duration * noise.t_cd;
            let g1tau = noise.gamma1 * tau;
            let p1 = 0.5 * -(-noise.gamma_phi * tau).exp_m1();
            let b = beta / c(2.0 * 2f64.sqrt(), 0.0);
            let mut k0 = CMat::zeros(2 * dim, 2 * dim);
            k0.view_mut((0, 0), (dim, dim)).copy_from(&disp_mat(b, dim));
            k0.view_mut((dim, dim), (dim, dim))
                .copy_from(&disp_mat(-b, dim).map(|z| z * c((-0.5 * g1tau).exp(), 0.0)));
            let mut kraus = Vec::new();
            if p1 > 0.0 {
                let zq = kron(&fock::sigma_z(), &eye(dim));
                kraus.push(k0.map(|z| z * c((1.0 - p1).sqrt(), 0.0)));
                kraus.push(mm(&zq, &k0).map(|z| z * c(p1.sqrt(), 0.0)));
            } else {
                kraus.push(k0);
            }
            if g1tau > 0.0 {
                // a flip after the jump acts on the |g⟩ block as a sign, so
                // the jump branch needs no dephasing variants of its own
                let (w, v) = boost_eigensystem(b, dim);
                let (lam, u) = eigh(&jump_mask(&w, g1tau, 1.0));
                let tot: f64 = lam.iter().map(|x| x.abs()).sum();
                for (r, &l) in lam.iter().enumerate() {
                    if l <= 1e-14 * tot {
                        continue;
                    }
                    let mut scaled = v.adjoint();
                    for (row, ur) in u.column(r).iter().enumerate() {
                        let f = *ur * c(l.sqrt(), 0.0);
                        scaled.row_mut(row).apply(|z| *z *= f);
                    }
                    let mut kj = CMat::zeros(2 * dim, 2 * dim);
                    kj.view_mut((0, dim), (dim, dim)).copy_from(&mm(&v, &scaled));
                    kraus.push(kj);
                }
            }
            Ok(kraus)
        }
    }
}

// ---------------------------------------------------------------------------
// noisy round compilation
// ---------------------------------------------------------------------------

/// A stabilization round under ancilla noise, reduced to oscillator Kraus
/// sets, one per ancilla use.
#[derive(Debug, Clone)]
pub struct NoisyChannel {
    pub stages: Vec<Vec<CMat>>,
    /// per stage, in units of t_CD
    pub stage_durations: Vec<f64>,
    pub duration: f64,
    /// full-weight controlled displacements per round; a deferred
    /// measurement-feedback displacement counts as one
    pub big_gates: usize,
}

impl NoisyChannel {
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut r = rho.clone();
        for stage in &self.stages {
            r = apply_kraus(stage, &r);
        }
        r
    }

    pub fn completeness_defect(&self) -> f64 {
        self.stages
            .iter()
            .map(|ks| {
                let dim = ks[0].nrows();
                let mut s = CMat::zeros(dim, dim);
                for k in ks {
                    s += mm(&k.adjoint(), k);
                }
                norm1(&(s - eye(dim)))
            })
            .fold(0.0, f64::max)
    }
}

pub fn apply_kraus(kraus: &[CMat], rho: &CMat) -> CMat {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        out += mm(&mm(k, rho), &k.adjoint());
    }
    out
}

/// Recombine a redundant Kraus list into an orthogonal one via its Gram
/// matrix, dropping relative weights below 1e−14, then restore the pruned
/// weight trace-exactly with a single √(I−ΣK†K) element.
fn gram_compress(kraus: &[CMat], dim: usize) -> Vec<CMat> {
    let m = kraus.len();
    let adj: Vec<CMat> = kraus.iter().map(|k| k.adjoint()).collect();
    let mut g = CMat::zeros(m, m);
    for r in 0..m {
        for s in r..m {
            let v = trace_prod(&adj[r], &kraus[s]);
            g[(r, s)] = v;
            if s != r {
                g[(s, r)] = v.conj();
            }
        }
    }
    let (w, u) = eigh(&g);
    let tot: f64 = w.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
    let mut comp = Vec::new();
    for i in 0..m {
        if w[i] > 1e-14 * tot {
            // tr(K̃_i†K̃_j) = w_iδ_ij with K̃_i = Σ_r U_ri·K_r, and ΣU_riU*_si = δ_rs
            // keeps the channel action exact over the kept modes
            let mut ki = CMat::zeros(dim, dim);
            for r in 0..m {
                ki += kraus[r].map(|z| z * u[(r, i)]);
            }
            comp.push(ki);
        }
    }
    let mut s = CMat::zeros(dim, dim);
    for k in &comp {
        s += mm(&k.adjoint(), k);
    }
    let rem = eye(dim) - s;
    let rem = (rem.adjoint() + rem).map(|z| z * c(0.5, 0.0));
    if norm1(&rem) > 1e-15 {
        comp.push(psd_sqrt(&rem));
    }
    comp
}

struct Slot {
    beta: C,
    g1tau: f64,
    p1: f64,
}

/// Compile one reset-to-reset gate segment into oscillator Kraus operators.
///
/// Expansion in noise events: the no-event chain, one σ̂_z flip per slot, and
/// the exact single-decay kernel per slot.  Multi-event weight, of order
/// (γτ)², is restored trace-exactly by the compression remainder.  Within a
/// slot everything is exact: after a decay the ancilla sits in |g⟩ where σ̂₋
/// annihilates, and flips commute with the block-diagonal no-jump factor.
fn compile_segment(seg: &[CircuitStep], noise: &NoiseParams, cfg: &HilbertConfig) -> Result<Vec<CMat>> {
    let dim = cfg.dim;
    let two = 2 * dim;
    let mut seg_ops: Vec<CMat> = vec![eye(two)];
    let mut slots: Vec<Slot> = Vec::new();
    let mut feedback: Option<(C, C)> = None;
    for s in seg {
        match s.kind {
            StepKind::Rotation { .. } => {
                let u = step_unitary(s, cfg)?;
                let last = seg_ops.last_mut().unwrap();
                *last = mm(&u, last);
            }
            StepKind::ControlledDisplacement(beta) => {
                let tau = s.duration * noise.t_cd;
                slots.push(Slot {
                    beta,
                    g1tau: noise.gamma1 * tau,
                    p1: 0.5 * -(-noise.gamma_phi * tau).exp_m1(),
                });
                seg_ops.push(eye(two));
            }
            StepKind::MeasureFeedback { disp_g, disp_e } => {
                feedback = Some((disp_g, disp_e));
                break;
            }
            StepKind::Reset => {
                return Err(SimError::Spec("reset inside a gate segment".into()));
            }
        }
    }

    let n = slots.len();
    let k0s: Vec<CMat> = slots
        .iter()
        .map(|sl| {
            let b = sl.beta / c(2.0 * 2f64.sqrt(), 0.0);
            let mut m = CMat::zeros(two, two);
            m.view_mut((0, 0), (dim, dim)).copy_from(&disp_mat(b, dim));
            m.view_mut((dim, dim), (dim, dim))
                .copy_from(&disp_mat(-b, dim).map(|z| z * c((-0.5 * sl.g1tau).exp(), 0.0)));
            m
        })
        .collect();

    // prefixes[k]: chain before slot k; mids[k] = K0_k·prefixes[k];
    // suffixes[k]: chain after slot k, so full = suffixes[k]·mids[k]
    let mut prefixes: Vec<CMat> = vec![seg_ops[0].clone()];
    let mut mids: Vec<CMat> = Vec::with_capacity(n);
    for k in 0..n {
        mids.push(mm(&k0s[k], &prefixes[k]));
        prefixes.push(mm(&seg_ops[k + 1], &mids[k]));
    }
    let full = prefixes[n].clone();
    let mut suffixes: Vec<CMat> = vec![CMat::zeros(0, 0); n];
    if n > 0 {
        suffixes[n - 1] = seg_ops[n].clone();
        for k in (0..n - 1).rev() {
            suffixes[k] = mm(&suffixes[k + 1], &mm(&k0s[k + 1], &seg_ops[k + 1]));
        }
    }

    let fb_disp = feedback.map(|(dg, de)| (disp_mat(dg, dim), disp_mat(de, dim)));
    let mut kraus: Vec<CMat> = Vec::new();
    let push_outcomes = |amp: f64, chain_g: &CMat, chain_e: &CMat, kraus: &mut Vec<CMat>| {
        let mut kg = chain_g.map(|z| z * c(amp, 0.0));
        let mut ke = chain_e.map(|z| z * c(amp, 0.0));
        if let Some((dg, de)) = &fb_disp {
            kg = mm(dg, &kg);
            ke = mm(de, &ke);
        }
        kraus.push(kg);
        kraus.push(ke);
    };

    let amps0: f64 = slots.iter().map(|sl| (1.0 - sl.p1).sqrt()).product();
    let project = |m: &CMat| -> (CMat, CMat) {
        (m.view((0, 0), (dim, dim)).clone_owned(), m.view((dim, 0), (dim, dim)).clone_owned())
    };

    let (fg, fe) = project(&full);
    push_outcomes(amps0, &fg, &fe, &mut kraus);

    if n > 0 {
        let zq = kron(&fock::sigma_z(), &eye(dim));
        for k in 0..n {
            if slots[k].p1 <= 0.0 {
                continue;
            }
            let amp = amps0 * (slots[k].p1 / (1.0 - slots[k].p1)).sqrt();
            let chain = mm(&suffixes[k], &mm(&zq, &mids[k]));
            let (cg, ce) = project(&chain);
            push_outcomes(amp, &cg, &ce, &mut kraus);
        }
        for k in 0..n {
            if slots[k].g1tau <= 0.0 {
                continue;
            }
            let b = slots[k].beta / c(2.0 * 2f64.sqrt(), 0.0);
            let (w, v) = boost_eigensystem(b, dim);
            // project outcomes first: the jump Kraus live on the oscillator
            let f = mm(&suffixes[k].view((0, 0), (two, dim)).clone_owned(), &v);
            let f_g = f.view((0, 0), (dim, dim)).clone_owned();
            let f_e = f.view((dim, 0), (dim, dim)).clone_owned();
            let g_in = mm(&v.adjoint(), &prefixes[k].view((dim, 0), (dim, dim)).clone_owned());
            let (lam, u) = eigh(&jump_mask(&w, slots[k].g1tau, amps0 * amps0));
            let tot: f64 = lam.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
            for (r, &l) in lam.iter().enumerate() {
                if l <= 1e-14 * tot {
                    continue;
                }
                let mut t = g_in.clone();
                for (row, ur) in u.column(r).iter().enumerate() {
                    let fac = *ur * c(l.sqrt(), 0.0);
                    t.row_mut(row).apply(|z| *z *= fac);
                }
                push_outcomes(1.0, &mm(&f_g, &t), &mm(&f_e, &t), &mut kraus);
            }
        }
    }

    Ok(gram_compress(&kraus, dim))
}

/// Compile a full round under ancilla noise.  Stage boundaries follow the
/// ancilla resets of the gate list; with all rates zero the result is exactly
/// the ideal round channel.
pub fn compile_noisy_round(
    spec: &ProtocolSpec,
    noise: &NoiseParams,
    cfg: &HilbertConfig,
) -> Result<NoisyChannel> {
    noise.validate()?;
    let steps = build_round(spec)?;
    let mut segments: Vec<Vec<CircuitStep>> = Vec::new();
    let mut cur: Vec<CircuitStep> = Vec::new();
    for s in steps {
        if s.kind == StepKind::Reset {
            if !cur.is_empty() {
                segments.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(s);
        }
    }
    if !cur.is_empty() {
        segments.push(cur);
    }

    let mut stages = Vec::new();
    let mut stage_durations = Vec::new();
    let mut big_gates = 0usize;
    for seg in &segments {
        stage_durations.push(seg.iter().map(|s| s.duration).sum());
        big_gates += seg.iter().filter(|s| s.duration >= 0.5).count();
        stages.push(compile_segment(seg, noise, cfg)?);
    }
    let channel = NoisyChannel {
        duration: stage_durations.iter().sum(),
        stages,
        stage_durations,
        big_gates,
    };
    let defect = channel.completeness_defect();
    if defect > 1e-9 {
        return Err(SimError::Completeness(format!(
            "noisy round Kraus defect {defect:.2e} after compression"
        )));
    }
    Ok(channel)
}

// ---------------------------------------------------------------------------
// analytic baselines
// ---------------------------------------------------------------------------

/// Channel infidelity of the unprotected Fock {|0⟩,|1⟩} qubit over one idle
/// slot: populations decay at κ, the coherence at (κ+κ_φ)/2, exactly on this
/// subspace, giving 1 − (1 + e^{−κδt} + 2e^{−(κ+κ_φ)δt/2})/4.
pub fn fock01_baseline(noise: &NoiseParams) -> f64 {
    let kdt = noise.kappa * noise.dt;
    let pdt = noise.kappa_phi * noise.dt;
    1.0 - (1.0 + (-kdt).exp() + 2.0 * (-0.5 * (kdt + pdt)).exp()) / 4.0
}

/// Pauli decay rates (γ_X, γ_Y, γ_Z) of a bare ancilla qubit per t_CD:
/// coherences decay at γ₁/2 + γ_φ, the population at γ₁.
pub fn bare_ancilla_rates(noise: &NoiseParams) -> [f64; 3] {
    let g1 = noise.gamma1 * noise.t_cd;
    let gp = noise.gamma_phi * noise.t_cd;
    [0.5 * g1 + gp, 0.5 * g1 + gp, g1]
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gkp::{finite_stabilizer, make_gkp_state, GkpParams, StabAxis};
    use crate::linalg::CVec;
    use crate::protocols::{
        compile_channel, feedback_channel, ProtocolName, RoundAxis, StOrder, Variant,
    };

    fn cfg(dim: usize) -> HilbertConfig {
        HilbertConfig::with_dim(dim).unwrap()
    }

    fn sigma_minus() -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = ONE;
        m
    }

    fn pseudo_vec(dim: usize, seed: u64) -> CVec {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut v = CVec::zeros(dim);
        for i in 0..dim {
            v[i] = c(next(), next());
        }
        let n = v.norm();
        v.map(|z| z / c(n, 0.0))
    }

    fn pseudo_density(dim: usize, seed: u64) -> CMat {
        let mut rho = CMat::zeros(dim, dim);
        for (j, wgt) in [(0u64, 0.6), (1, 0.3), (2, 0.1)] {
            let v = pseudo_vec(dim, seed + j);
            rho += (&v * v.adjoint()).map(|z| z * c(wgt, 0.0));
        }
        rho
    }

    #[test]
    fn params_reject_negative_rates() {
        assert!(NoiseParams::new(-1e-3, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(NoiseParams::new(0.0, 0.0, 0.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(NoiseParams::new(1e-3, 2e-4, 1e-4, 5e-5, 1.0, 0.3).is_ok());
    }

    #[test]
    fn loss_kraus_complete_and_banded_application_matches() {
        for (dim, kdt) in [(40, 1e-3), (90, 5e-2)] {
            let ks = loss_kraus(kdt, dim);
            assert!(ks.len() > 1);
            let mut s = CMat::zeros(dim, dim);
            for k in &ks {
                s += mm(&k.adjoint(), k);
            }
            assert!(norm1(&(s - eye(dim))) < 1e-12, "completeness at κδt={kdt}");

            let rho = pseudo_density(dim, 11);
            let direct = apply_kraus(&ks, &rho);
            assert!(frob(&(apply_loss(&rho, kdt) - direct)) < 1e-13);
        }
    }

    #[test]
    fn idle_single_photon_survival() {
        let dim = 20;
        let mut rho = CMat::zeros(dim, dim);
        rho[(1, 1)] = ONE;
        let noise = NoiseParams::oscillator(1.0, 0.0, 1e-3).unwrap();
        let out = idle_channel(&rho, &noise).unwrap();
        assert!((out[(1, 1)].re - (-1e-3f64).exp()).abs() < 1e-8);
        assert!((trace(&out).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idle_zero_noise_is_identity() {
        let rho = pseudo_density(25, 3);
        let out = idle_channel(&rho, &NoiseParams::quiet()).unwrap();
        assert!(frob(&(out - rho)) == 0.0);
    }

    #[test]
    fn idle_matches_independent_integrator() {
        let dim = 28;
        let rho = pseudo_density(dim, 5);
        let a = a_mat(dim);
        let nmat = mm(&a.adjoint(), &a);
        let h0 = CMat::zeros(dim, dim);
        let cases = [(2.0, 0.0), (0.0, 1.5), (2.0, 1.5)];
        for (kappa, kphi) in cases {
            let noise = NoiseParams::oscillator(kappa, kphi, 1e-3).unwrap();
            let fast = idle_channel(&rho, &noise).unwrap();
            let mut jumps = Vec::new();
            if kappa > 0.0 {
                jumps.push((kappa, a.clone()));
            }
            if kphi > 0.0 {
                jumps.push((kphi, nmat.clone()));
            }
            let slow = lindblad_evolve(&rho, &h0, &jumps, 1e-3).unwrap();
            assert!(
                frob(&(fast - slow)) < 1e-9,
                "idle vs integrator at κ={kappa}, κφ={kphi}"
            );
        }
    }

    #[test]
    fn idle_composed_many_steps_preserves_trace() {
        let dim = 35;
        let mut rho = pseudo_density(dim, 9);
        let noise = NoiseParams::oscillator(1.0, 0.5, 1e-4).unwrap();
        for _ in 0..10_000 {
            rho = idle_channel(&rho, &noise).unwrap();
        }
        assert!((trace(&rho).re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lindblad_damps_coherent_state_amplitude() {
        let dim = 30;
        let cf = cfg(dim);
        let alpha = c(0.9, -0.4);
        let disp = fock::displacement(alpha, &cf).unwrap();
        let mut v0 = CVec::zeros(dim);
        v0[0] = ONE;
        let v = &disp.m * v0;
        let rho = &v * v.adjoint();
        let (kappa, t) = (0.35, 1.3);
        let out = lindblad_evolve(&rho, &CMat::zeros(dim, dim), &[(kappa, a_mat(dim))], t).unwrap();
        let got = trace_prod(&out, &a_mat(dim));
        let want = alpha * c((-0.5 * kappa * t).exp(), 0.0);
        assert!((got - want).norm() < 1e-6, "⟨â⟩ = {got} vs {want}");
    }

    #[test]
    fn lindblad_dephasing_keeps_populations() {
        let dim = 22;
        let rho = pseudo_density(dim, 7);
        let a = a_mat(dim);
        let nmat = mm(&a.adjoint(), &a);
        let (kphi, t) = (0.8, 0.9);
        let out = lindblad_evolve(&rho, &CMat::zeros(dim, dim), &[(kphi, nmat)], t).unwrap();
        for i in 0..dim {
            assert!((out[(i, i)] - rho[(i, i)]).norm() < 1e-9);
        }
        // off-diagonals carry the exact Gaussian factor
        for i in 0..dim {
            for j in 0..dim {
                let d = i as f64 - j as f64;
                let want = rho[(i, j)] * c((-0.5 * kphi * t * d * d).exp(), 0.0);
                assert!((out[(i, j)] - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn lindblad_zero_time_is_identity() {
        let rho = pseudo_density(12, 1);
        let out = lindblad_evolve(&rho, &CMat::zeros(12, 12), &[(0.3, a_mat(12))], 0.0).unwrap();
        assert!(frob(&(out - rho)) == 0.0);
    }

    #[test]
    fn lindblad_reports_step_collapse_for_stiff_rates() {
        let mut rho = CMat::zeros(2, 2);
        rho[(1, 1)] = ONE;
        let res = lindblad_evolve(&rho, &CMat::zeros(2, 2), &[(1e9, sigma_minus())], 1.0);
        assert!(matches!(res, Err(SimError::StepControl(_))));
    }

    #[test]
    fn gate_kraus_noiseless_is_the_bare_gate() {
        let cf = cfg(40);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let step = big_cd_step(&pr);
        let ks = gate_kraus(&step, &NoiseParams::quiet(), &cf).unwrap();
        assert_eq!(ks.len(), 1);
        let ideal = step_unitary(&step, &cf).unwrap();
        assert!(frob(&(ks[0].clone() - ideal)) < 1e-12);
    }

    fn big_cd_step(pr: &GkpParams) -> CircuitStep {
        let beta = c(0.0, -pr.l * pr.c);
        CircuitStep {
            kind: StepKind::ControlledDisplacement(beta),
            duration: 1.0,
        }
    }

    #[test]
    fn gate_kraus_dephasing_factorizes_exactly() {
        let cf = cfg(30);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let step = big_cd_step(&pr);
        let noise = NoiseParams::ancilla(0.0, 2e-3, 0.7).unwrap();
        let ks = gate_kraus(&step, &noise, &cf).unwrap();
        assert_eq!(ks.len(), 2);
        let rho = pseudo_density(60, 21);
        let got = apply_kraus(&ks, &rho);

        let u = step_unitary(&step, &cf).unwrap();
        let ideal = mm(&mm(&u, &rho), &u.adjoint());
        let p1 = 0.5 * (1.0 - (-2e-3f64 * 0.7).exp());
        let zq = kron(&fock::sigma_z(), &eye(30));
        let flipped = mm(&mm(&zq, &ideal), &zq.adjoint());
        let want = ideal.map(|z| z * c(1.0 - p1, 0.0)) + flipped.map(|z| z * c(p1, 0.0));
        assert!(frob(&(got - want)) < 1e-12);
    }

    #[test]
    fn gate_kraus_decay_matches_independent_integrator() {
        let dim = 26;
        let cf = cfg(dim);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let step = big_cd_step(&pr);
        let (g1, tcd) = (2e-2, 1.0);
        let noise = NoiseParams::ancilla(g1, 0.0, tcd).unwrap();
        let ks = gate_kraus(&step, &noise, &cf).unwrap();
        let rho = pseudo_density(2 * dim, 33);
        let got = apply_kraus(&ks, &rho);

        // constant gate generator: CD̂(β) = exp(−iHτ) with H = i·G/τ
        let beta = c(0.0, -pr.l * pr.c);
        let b = beta / c(2.0 * 2f64.sqrt(), 0.0);
        let a = a_mat(dim);
        let gen = a.adjoint().map(|z| z * b) - a.map(|z| z * b.conj());
        let h = kron(&fock::sigma_z(), &gen).map(|z| z * I / c(tcd, 0.0));
        let sm = kron(&sigma_minus(), &eye(dim));
        let want = lindblad_evolve(&rho, &h, &[(g1, sm)], tcd).unwrap();
        let diff = frob(&(got - want));
        assert!(diff < 1e-8, "diff {diff:.2e}");
    }

    #[test]
    fn gate_kraus_is_trace_preserving_with_both_noises() {
        let dim = 24;
        let cf = cfg(dim);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let noise = NoiseParams::ancilla(1e-3, 4e-4, 1.0).unwrap();
        let ks = gate_kraus(&big_cd_step(&pr), &noise, &cf).unwrap();
        let mut s = CMat::zeros(2 * dim, 2 * dim);
        for k in &ks {
            s += mm(&k.adjoint(), k);
        }
        assert!(norm1(&(s - eye(2 * dim))) < 1e-12);
    }

    #[test]
    fn reset_step_is_a_noiseless_channel() {
        let cf = cfg(8);
        let step = CircuitStep { kind: StepKind::Reset, duration: 0.0 };
        let noise = NoiseParams::ancilla(1e-3, 1e-3, 1.0).unwrap();
        let ks = gate_kraus(&step, &noise, &cf).unwrap();
        let mut s = CMat::zeros(16, 16);
        for k in &ks {
            s += mm(&k.adjoint(), k);
        }
        assert!(norm1(&(s - eye(16))) < 1e-14);
        // any input ends with the ancilla in |g⟩
        let rho = pseudo_density(16, 2);
        let out = apply_kraus(&ks, &rho);
        for j in 8..16 {
            for i in 8..16 {
                assert!(out[(i, j)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn noisy_round_noiseless_matches_ideal_channel() {
        let dim = 50;
        let cf = cfg(dim);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let rho = pseudo_density(dim, 17);
        let cases: [(ProtocolName, Variant); 4] = [
            (ProtocolName::Sbs, Variant::Autonomous),
            (ProtocolName::Bsb, Variant::Autonomous),
            (ProtocolName::Bsb, Variant::FeedbackFinal),
            (ProtocolName::St, Variant::Autonomous),
        ];
        for (name, variant) in cases {
            let spec = ProtocolSpec::new(name, pr.clone())
                .with_axis(RoundAxis::X)
                .with_variant(variant)
                .with_st_order(StOrder::SharpenFirst);
            let noisy = compile_noisy_round(&spec, &NoiseParams::quiet(), &cf).unwrap();
            let ideal = match variant {
                Variant::Autonomous => compile_channel(&spec, &cf).unwrap(),
                Variant::FeedbackFinal => feedback_channel(&spec, &cf).unwrap(),
            };
            let diff = frob(&(noisy.apply(&rho) - ideal.apply(&rho)));
            assert!(diff < 1e-10, "{name:?} {variant:?}: {diff:.2e}");
            assert!(noisy.completeness_defect() < 1e-12);
        }
    }

    #[test]
    fn noisy_round_durations_and_gate_counts() {
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let cf = cfg(30);
        let lc = pr.l * pr.c;
        let expect = [
            (ProtocolName::Sbs, 1.0 + pr.eps / lc, 1),
            (ProtocolName::Bsb, 2.0 + 2.0 * pr.eps / lc, 2),
            (ProtocolName::St, 2.0 + 2.0 * pr.eps / lc, 2),
        ];
        for (name, dur, bigs) in expect {
            let spec = ProtocolSpec::new(name, pr.clone());
            let ch = compile_noisy_round(&spec, &NoiseParams::quiet(), &cf).unwrap();
            assert!((ch.duration - dur).abs() < 1e-12, "{name:?} duration");
            assert_eq!(ch.big_gates, bigs, "{name:?} big gates");
        }
        let fb = ProtocolSpec::new(ProtocolName::Bsb, pr.clone()).with_variant(Variant::FeedbackFinal);
        let ch = compile_noisy_round(&fb, &NoiseParams::quiet(), &cf).unwrap();
        assert!((ch.duration - (2.0 + 2.0 * pr.eps / lc)).abs() < 1e-12);
        assert_eq!(ch.big_gates, 2);
    }

    #[test]
    fn noisy_round_with_decay_is_complete_and_matches_integrator() {
        let dim = 24;
        let cf = cfg(dim);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let spec = ProtocolSpec::new(ProtocolName::Sbs, pr.clone());
        let noise = NoiseParams::ancilla(5e-3, 2e-3, 1.0).unwrap();
        let ch = compile_noisy_round(&spec, &noise, &cf).unwrap();
        assert!(ch.completeness_defect() < 1e-11, "defect {:.2e}", ch.completeness_defect());

        // independent check of the full stage: integrate gate by gate
        let rho_osc = pseudo_density(dim, 41);
        let got = ch.apply(&rho_osc);

        let g = fock::ket_g();
        let mut rho = kron(&(&g * g.adjoint()), &rho_osc);
        let sm = kron(&sigma_minus(), &eye(dim));
        let zq = kron(&fock::sigma_z(), &eye(dim));
        let a = a_mat(dim);
        for step in build_round(&spec).unwrap() {
            match step.kind {
                StepKind::Rotation { .. } => {
                    let u = step_unitary(&step, &cf).unwrap();
                    rho = mm(&mm(&u, &rho), &u.adjoint());
                }
                StepKind::ControlledDisplacement(beta) => {
                    let tau = step.duration * noise.t_cd;
                    let b = beta / c(2.0 * 2f64.sqrt(), 0.0);
                    let gen = a.adjoint().map(|z| z * b) - a.map(|z| z * b.conj());
                    let h = kron(&fock::sigma_z(), &gen).map(|z| z * I / c(tau, 0.0));
                    rho = lindblad_evolve(
                        &rho,
                        &h,
                        &[(noise.gamma1, sm.clone()), (noise.gamma_phi / 2.0, zq.clone())],
                        tau,
                    )
                    .unwrap();
                }
                StepKind::Reset => {
                    let mut fresh = CMat::zeros(dim, dim);
                    fresh += rho.view((0, 0), (dim, dim));
                    fresh += rho.view((dim, dim), (dim, dim));
                    rho = kron(&(&g * g.adjoint()), &fresh);
                }
                StepKind::MeasureFeedback { .. } => unreachable!(),
            }
        }
        let traced = rho.view((0, 0), (dim, dim)).clone_owned();
        let diff = frob(&(got - traced));
        // single-event expansion drops O((γτ)²) cross terms
        assert!(diff < 5e-5, "stage channel vs integrator: {diff:.2e}");
    }

    #[test]
    fn fock_baseline_matches_two_level_integrator() {
        let dim = 6;
        let a = a_mat(dim);
        let nmat = mm(&a.adjoint(), &a);
        let h0 = CMat::zeros(dim, dim);
        for (kappa, kphi) in [(1.0, 0.0), (0.0, 1.0), (0.7, 0.4)] {
            let dt = 1e-2;
            let noise = NoiseParams::oscillator(kappa, kphi, dt).unwrap();
            let mut jumps = Vec::new();
            if kappa > 0.0 {
                jumps.push((kappa, a.clone()));
            }
            if kphi > 0.0 {
                jumps.push((kphi, nmat.clone()));
            }
            // Pauli transfer of the {|0⟩,|1⟩} block from the four matrix units
            let mut units = Vec::new();
            for i in 0..2 {
                for j in 0..2 {
                    let mut m = CMat::zeros(dim, dim);
                    m[(i, j)] = ONE;
                    units.push(lindblad_evolve(&m, &h0, &jumps, dt).unwrap());
                }
            }
            let block = |m: &CMat| -> CMat { m.view((0, 0), (2, 2)).clone_owned() };
            let l00 = block(&units[0]);
            let l01 = block(&units[1]);
            let l10 = block(&units[2]);
            let l11 = block(&units[3]);
            let lx = &l01 + &l10;
            let ly = (&l01 - &l10).map(|z| z * -I);
            let lz = &l00 - &l11;
            let (sx, sy, sz) = (fock::sigma_x(), fock::sigma_y(), fock::sigma_z());
            let f = (1.0
                + 0.5 * trace_prod(&sx, &lx).re
                + 0.5 * trace_prod(&sy, &ly).re
                + 0.5 * trace_prod(&sz, &lz).re)
                / 4.0;
            let got = 1.0 - f;
            let want = fock01_baseline(&noise);
            assert!((got - want).abs() < 1e-9, "baseline at κ={kappa}, κφ={kphi}: {got} vs {want}");
        }
    }

    #[test]
    fn bare_ancilla_rates_match_qubit_integrator() {
        let (g1, gphi, t) = (0.08, 0.05, 1.0);
        let noise = NoiseParams::ancilla(g1, gphi, t).unwrap();
        let [gx, _, gz] = bare_ancilla_rates(&noise);
        let plus = fock::ket_plus();
        let rho = &plus * plus.adjoint();
        let jumps = [(g1, sigma_minus()), (gphi / 2.0, fock::sigma_z())];
        let out = lindblad_evolve(&rho, &CMat::zeros(2, 2), &jumps, t).unwrap();
        let x = trace_prod(&out, &fock::sigma_x()).re;
        assert!((x - (-gx).exp()).abs() < 1e-9, "⟨σ̂_x⟩ {x} vs e^{{−γx}}");

        let e = fock::ket_e();
        let out = lindblad_evolve(&(&e * e.adjoint()), &CMat::zeros(2, 2), &jumps, t).unwrap();
        let pe = out[(1, 1)].re;
        assert!((pe - (-gz).exp()).abs() < 1e-9, "excited population {pe}");
    }

    #[test]
    fn idle_weakens_finite_stabilizer_by_pinned_amount() {
        let dim = 150;
        let cf = cfg(dim);
        let pr = GkpParams::from_epsilon(0.13).unwrap();
        let state = make_gkp_state(0, &pr, &cf).unwrap();
        let rho = state.to_density();
        let tx = finite_stabilizer(StabAxis::X, &pr, &cf).unwrap();
        let before = trace_prod(&tx.m, &rho).re;
        let noise = NoiseParams::oscillator(1.0, 0.0, 1e-3).unwrap();
        let after = trace_prod(&tx.m, &idle_channel(&rho, &noise).unwrap()).re;
        let drop = before - after;
        assert!(
            (1e-4..2e-2).contains(&drop),
            "⟨T̂_x,Δ⟩ dropped by {drop:.3e} under κδt = 1e-3"
        );
    }
}
