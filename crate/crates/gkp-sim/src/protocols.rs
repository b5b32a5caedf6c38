//! The three autonomous stabilization rounds (sBs, BsB, ST) as
//! qubit-oscillator circuits and oscillator Kraus channels.
//!
//! One x-round drives the oscillator toward the +1 space of T̂_{x,Δ} using a
//! single ancilla qubit.  With A = (lc_Δ/2)x̂σ̂_x and B = p̂σ̂_y the round
//! unitaries are products of at most three exponentials,
//!   sBs   : e^{−i(ε/4)B} e^{−iA} e^{−i(ε/4)B}
//!   BsB   : e^{−iA} e^{−iεB} e^{−iA}
//!   ST(i) : e^{−i(ε/2)B} e^{−iA}     (sharpen; big gate first in time)
//!   ST(ii): e^{−iA} e^{−i(ε/2)B}     (trim)
//! all approximating, to different orders in ε, the same exchange generator
//! that maps stabilizer displacement into ancilla excitation.  The p-round is
//! the quadrature image x̂ → p̂, p̂ → −x̂, equivalently CD̂(β) → CD̂(iβ).
//!
//! Circuit form: the hardware gate is the symmetric controlled displacement
//!   CD̂(β) = exp{(βâ† − β*â)σ̂_z/(2√2)},
//! and π/2 qubit rotations conjugate its σ̂_z conditioning into the σ̂_x/σ̂_y
//! conditioning above.  The ancilla starts from reset (|g⟩); the usual |+⟩
//! initialization is a qubit frame that the surrounding rotations absorb.
//!
//! Channel form: with the ancilla starting in |g⟩ and traced after the round,
//! K_o = ⟨o|Û_round|g⟩ for o ∈ {g, e}.  Each ancilla use ("stage") carries a
//! deterministic half-lattice translation, i.e. a logical Pauli, which the
//! caller tracks as a frame instead of undoing physically.

use crate::error::{Result, SimError};
use crate::fock::{self, disp_mat, p_mat, qubit_rotation, x_mat, HilbertConfig, Operator};
use crate::gkp::{finite_stabilizer, GkpParams, Pauli, StabAxis};
use crate::linalg::{c, expm, eye, kron, mm, norm1, sandwich, trace_prod, CMat, CVec, C, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolName {
    /// sharpen-trim: one small and one big gate per stage, two stages per round
    St,
    /// big-small-big
    Bsb,
    /// small-big-small
    Sbs,
}

impl ProtocolName {
    pub const ALL: [ProtocolName; 3] = [ProtocolName::St, ProtocolName::Bsb, ProtocolName::Sbs];

    pub fn label(self) -> &'static str {
        match self {
            ProtocolName::St => "ST",
            ProtocolName::Bsb => "BsB",
            ProtocolName::Sbs => "sBs",
        }
    }

    /// ancilla uses per x-round (= idle slots per round)
    pub fn stages_per_round(self) -> usize {
        match self {
            ProtocolName::St => 2,
            _ => 1,
        }
    }

    /// Whether an x+p round pair carries a net logical X̂Ẑ frame flip.
    /// Each big controlled displacement kicks the oscillator by half a
    /// lattice constant along the round axis.  sBs kicks once per round, so
    /// the pair flips the code word; BsB kicks twice per round and ST once
    /// in each of its two stages, closing their frames within the pair.
    pub fn pair_flips_frame(self) -> bool {
        matches!(self, ProtocolName::Sbs)
    }
}

impl std::str::FromStr for ProtocolName {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "st" => Ok(ProtocolName::St),
            "bsb" => Ok(ProtocolName::Bsb),
            "sbs" => Ok(ProtocolName::Sbs),
            other => Err(SimError::Spec(format!("unknown protocol name '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundAxis {
    X,
    P,
}

impl RoundAxis {
    /// the logical operator a stage of this round applies to the code qubit
    pub fn frame_flip(self) -> Pauli {
        match self {
            RoundAxis::X => Pauli::Z,
            RoundAxis::P => Pauli::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Autonomous,
    /// final big controlled displacement deferred through an ancilla
    /// measurement plus outcome-conditioned unconditional displacement
    FeedbackFinal,
}

/// Which ST sub-round comes first; the sharpening stage inflates the state,
/// the trimming stage shrinks it back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StOrder {
    SharpenFirst,
    TrimFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub name: ProtocolName,
    pub params: GkpParams,
    pub axis: RoundAxis,
    pub variant: Variant,
    pub st_order: StOrder,
}

impl ProtocolSpec {
    pub fn new(name: ProtocolName, params: GkpParams) -> Self {
        Self { name, params, axis: RoundAxis::X, variant: Variant::Autonomous, st_order: StOrder::SharpenFirst }
    }

    pub fn with_axis(mut self, axis: RoundAxis) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_st_order(mut self, order: StOrder) -> Self {
        self.st_order = order;
        self
    }
}

// ---------------------------------------------------------------------------
// circuit steps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    /// CD̂(β); conditions on σ̂_z
    ControlledDisplacement(C),
    /// exp(−i·angle·σ̂_axis/2)
    Rotation { axis: char, angle: f64 },
    /// ancilla to |g⟩, discarding its state
    Reset,
    /// σ̂_z measurement, then the unconditional displacement D̂(α_o) for
    /// outcome o; realizes a deferred controlled displacement
    MeasureFeedback { disp_g: C, disp_e: C },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitStep {
    pub kind: StepKind,
    /// in units of the big-gate duration: |β|/(l·c_Δ) for controlled
    /// displacements, 0 for everything else
    pub duration: f64,
}

impl CircuitStep {
    fn cd(beta: C, params: &GkpParams) -> Self {
        CircuitStep {
            kind: StepKind::ControlledDisplacement(beta),
            duration: beta.norm() / (params.l * params.c),
        }
    }

    fn rot(axis: char, angle: f64) -> Self {
        CircuitStep { kind: StepKind::Rotation { axis, angle }, duration: 0.0 }
    }

    fn reset() -> Self {
        CircuitStep { kind: StepKind::Reset, duration: 0.0 }
    }
}

/// CD̂(β) = exp{(βâ† − β*â)σ̂_z/(2√2)}: D̂(β/2√2) on the |g⟩ branch, D̂(−β/2√2)
/// on the |e⟩ branch.
pub fn controlled_displacement(beta: C, cfg: &HilbertConfig) -> Result<Operator> {
    let half = beta / c(2.0 * 2f64.sqrt(), 0.0);
    let dim = cfg.dim;
    let dp = disp_mat(half, dim);
    let dm = disp_mat(-half, dim);
    let mut m = CMat::zeros(2 * dim, 2 * dim);
    m.view_mut((0, 0), (dim, dim)).copy_from(&dp);
    m.view_mut((dim, dim), (dim, dim)).copy_from(&dm);
    Operator::joint(m)?.claim_unitary()
}

/// Unitary of a single gate step on the joint space.
pub fn step_unitary(step: &CircuitStep, cfg: &HilbertConfig) -> Result<CMat> {
    match step.kind {
        StepKind::ControlledDisplacement(beta) => Ok(controlled_displacement(beta, cfg)?.m),
        StepKind::Rotation { axis, angle } => Ok(kron(&qubit_rotation(axis, angle), &eye(cfg.dim))),
        _ => Err(SimError::Spec("step_unitary applies to unitary gates only".into())),
    }
}

/// Product of a gate segment (applied left to right in time).
pub fn compile_steps(steps: &[CircuitStep], cfg: &HilbertConfig) -> Result<CMat> {
    let mut u = eye(2 * cfg.dim);
    for s in steps {
        u = mm(&step_unitary(s, cfg)?, &u);
    }
    Ok(u)
}

fn small_block(b: C, params: &GkpParams) -> Vec<CircuitStep> {
    use std::f64::consts::FRAC_PI_2;
    vec![
        CircuitStep::rot('x', FRAC_PI_2),
        CircuitStep::cd(b, params),
        CircuitStep::rot('x', -FRAC_PI_2),
    ]
}

fn big_block(big: C, params: &GkpParams) -> Vec<CircuitStep> {
    use std::f64::consts::FRAC_PI_2;
    vec![
        CircuitStep::rot('y', -FRAC_PI_2),
        CircuitStep::cd(big, params),
        CircuitStep::rot('y', FRAC_PI_2),
    ]
}

/// Full gate list for one round, each ancilla use bracketed by resets.
pub fn build_round(spec: &ProtocolSpec) -> Result<Vec<CircuitStep>> {
    let pr = &spec.params;
    let mut big = c(0.0, -pr.l * pr.c);
    let mut sm = c(pr.eps, 0.0);
    if spec.axis == RoundAxis::P {
        big *= I;
        sm *= I;
    }
    let feedback = spec.variant == Variant::FeedbackFinal;
    if feedback && spec.name == ProtocolName::Sbs {
        return Err(SimError::Spec(
            "sBs ends on a small gate; its big displacement sits mid-circuit and cannot be \
             deferred into a final measurement"
                .into(),
        ));
    }
    if feedback && spec.name == ProtocolName::St && spec.st_order == StOrder::TrimFirst {
        return Err(SimError::Spec(
            "trim-first ST ends on a small gate; use sharpen-first ordering with feedback".into(),
        ));
    }

    // a big block whose controlled displacement is deferred into measurement
    let fb_tail = |params: &GkpParams| -> Vec<CircuitStep> {
        let alpha = big / c(2.0 * 2f64.sqrt(), 0.0);
        vec![
            CircuitStep::rot('y', -std::f64::consts::FRAC_PI_2),
            CircuitStep {
                kind: StepKind::MeasureFeedback { disp_g: alpha, disp_e: -alpha },
                duration: big.norm() / (params.l * params.c),
            },
        ]
    };

    let mut steps = vec![CircuitStep::reset()];
    match spec.name {
        ProtocolName::Sbs => {
            steps.extend(small_block(sm / c(2.0, 0.0), pr));
            steps.extend(big_block(big, pr));
            steps.extend(small_block(sm / c(2.0, 0.0), pr));
        }
        ProtocolName::Bsb => {
            steps.extend(big_block(big, pr));
            steps.extend(small_block(sm * c(2.0, 0.0), pr));
            if feedback {
                steps.extend(fb_tail(pr));
            } else {
                steps.extend(big_block(big, pr));
            }
        }
        ProtocolName::St => {
            let sharpen = {
                let mut v = big_block(big, pr);
                v.extend(small_block(sm, pr));
                v
            };
            let trim_gates = |tail: bool| -> Vec<CircuitStep> {
                let mut v = small_block(sm, pr);
                if tail {
                    v.extend(fb_tail(pr));
                } else {
                    v.extend(big_block(big, pr));
                }
                v
            };
            match spec.st_order {
                StOrder::SharpenFirst => {
                    steps.extend(sharpen);
                    steps.push(CircuitStep::reset());
                    steps.extend(trim_gates(feedback));
                }
                StOrder::TrimFirst => {
                    steps.extend(trim_gates(false));
                    steps.push(CircuitStep::reset());
                    steps.extend(sharpen);
                }
            }
        }
    }
    steps.push(CircuitStep::reset());
    Ok(steps)
}

// ---------------------------------------------------------------------------
// round unitaries and Kraus channels
// ---------------------------------------------------------------------------

fn joint_quadratures(axis: RoundAxis, dim: usize) -> (CMat, CMat) {
    let x = x_mat(dim);
    let p = p_mat(dim);
    match axis {
        RoundAxis::X => (x, p),
        RoundAxis::P => {
            let minus_x = x.map(|z| -z);
            (p, minus_x)
        }
    }
}

/// Joint unitaries of the round's stages, directly from the generator form.
pub fn stage_unitaries(spec: &ProtocolSpec) -> Result<Vec<CMat>> {
    stage_unitaries_with(spec, &HilbertConfig::default())
}

pub fn stage_unitaries_with(spec: &ProtocolSpec, cfg: &HilbertConfig) -> Result<Vec<CMat>> {
    let dim = cfg.dim;
    let pr = &spec.params;
    let (x, p) = joint_quadratures(spec.axis, dim);
    let sx = fock::sigma_x();
    let sy = fock::sigma_y();
    let a = kron(&sx, &x.map(|z| z * c(pr.l * pr.c / 2.0, 0.0)));
    let b = kron(&sy, &p);
    let exp_a = expm(&a.map(|z| z * (-I)))?;
    let small = |theta: f64| -> Result<CMat> { expm(&b.map(|z| z * (-I) * c(theta, 0.0))) };
    match spec.name {
        ProtocolName::Sbs => {
            let s = small(pr.eps / 4.0)?;
            Ok(vec![mm(&s, &mm(&exp_a, &s))])
        }
        ProtocolName::Bsb => {
            let m = small(pr.eps)?;
            Ok(vec![mm(&exp_a, &mm(&m, &exp_a))])
        }
        ProtocolName::St => {
            let s = small(pr.eps / 2.0)?;
            let sharpen = mm(&s, &exp_a);
            let trim = mm(&exp_a, &s);
            Ok(match spec.st_order {
                StOrder::SharpenFirst => vec![sharpen, trim],
                StOrder::TrimFirst => vec![trim, sharpen],
            })
        }
    }
}

/// One ancilla use, reduced to the oscillator: ρ ↦ K_gρK_g† + K_eρK_e†.
#[derive(Debug, Clone)]
pub struct KrausPair {
    pub kg: CMat,
    pub ke: CMat,
}

impl KrausPair {
    pub fn from_joint_unitary(u: &CMat) -> Self {
        let d = u.nrows() / 2;
        KrausPair {
            kg: u.view((0, 0), (d, d)).clone_owned(),
            ke: u.view((d, 0), (d, d)).clone_owned(),
        }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        sandwich(&self.kg, rho) + sandwich(&self.ke, rho)
    }

    pub fn apply_pure(&self, v: &CVec) -> (CVec, CVec) {
        (&self.kg * v, &self.ke * v)
    }

    pub fn completeness_defect(&self) -> f64 {
        let s = mm(&self.kg.adjoint(), &self.kg) + mm(&self.ke.adjoint(), &self.ke);
        norm1(&(s - eye(self.kg.nrows())))
    }
}

/// A full round: the stages applied in order, one idle slot after each.
#[derive(Debug, Clone)]
pub struct RoundChannel {
    pub stages: Vec<KrausPair>,
    pub axis: RoundAxis,
    pub name: ProtocolName,
}

impl RoundChannel {
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut r = rho.clone();
        for st in &self.stages {
            r = st.apply(&r);
        }
        r
    }
}

fn check_completeness(stages: &[KrausPair]) -> Result<()> {
    for (i, st) in stages.iter().enumerate() {
        let d = st.completeness_defect();
        if d > 1e-9 {
            return Err(SimError::Completeness(format!(
                "Kraus pair of stage {i} sums to {d:.2e} away from identity"
            )));
        }
    }
    Ok(())
}

pub fn compile_channel(spec: &ProtocolSpec, cfg: &HilbertConfig) -> Result<RoundChannel> {
    if spec.variant != Variant::Autonomous {
        return Err(SimError::Spec(
            "compile_channel handles the autonomous variant; use feedback_channel".into(),
        ));
    }
    let stages: Vec<KrausPair> = stage_unitaries_with(spec, cfg)?
        .iter()
        .map(KrausPair::from_joint_unitary)
        .collect();
    check_completeness(&stages)?;
    Ok(RoundChannel { stages, axis: spec.axis, name: spec.name })
}

/// Oscillator channel of a compiled step list: segments between resets become
/// stages; a measurement-feedback tail contributes D̂(α_o)·⟨o|Û_pre|g⟩.
pub fn channel_from_steps(
    steps: &[CircuitStep],
    axis: RoundAxis,
    name: ProtocolName,
    cfg: &HilbertConfig,
) -> Result<RoundChannel> {
    let dim = cfg.dim;
    let mut stages = Vec::new();
    let mut u: Option<CMat> = None;
    for s in steps {
        match s.kind {
            StepKind::Reset => {
                if let Some(m) = u.take() {
                    stages.push(KrausPair::from_joint_unitary(&m));
                }
            }
            StepKind::MeasureFeedback { disp_g, disp_e } => {
                let m = u.take().unwrap_or_else(|| eye(2 * dim));
                let base = KrausPair::from_joint_unitary(&m);
                stages.push(KrausPair {
                    kg: mm(&disp_mat(disp_g, dim), &base.kg),
                    ke: mm(&disp_mat(disp_e, dim), &base.ke),
                });
            }
            _ => {
                let g = step_unitary(s, cfg)?;
                u = Some(match u {
                    Some(m) => mm(&g, &m),
                    None => g,
                });
            }
        }
    }
    if let Some(m) = u {
        stages.push(KrausPair::from_joint_unitary(&m));
    }
    check_completeness(&stages)?;
    Ok(RoundChannel { stages, axis, name })
}

/// Channel of the measurement-feedback variant.  With a noiseless ancilla it
/// equals the autonomous channel exactly: the deferred displacement commutes
/// with the measurement it conditions on.
pub fn feedback_channel(spec: &ProtocolSpec, cfg: &HilbertConfig) -> Result<RoundChannel> {
    if spec.variant != Variant::FeedbackFinal {
        return Err(SimError::Spec("feedback_channel needs the feedback variant".into()));
    }
    let steps = build_round(spec)?;
    channel_from_steps(&steps, spec.axis, spec.name, cfg)
}

// ---------------------------------------------------------------------------
// reference unitary (exact exchange generator)
// ---------------------------------------------------------------------------

/// Rate normalization that turns a full stabilizer translation into a trivial
/// ancilla rotation: √(Γδt/t_Δ) = l·c_Δ/2, i.e. Γδt = t_Δ(l·c_Δ/2)².
pub fn trivializing_gamma_dt(params: &GkpParams) -> f64 {
    params.t * (params.l * params.c / 2.0).powi(2)
}

/// The exact modular-quadrature exchange unitary that the round products
/// approximate: exp{−i√(Γδt/t_Δ)(x̂_[l/2c_Δ]σ̂_x + t_Δ p̂σ̂_y)} for the x-round,
/// with the usual quadrature image for the p-round.
pub fn target_unitary(spec: &ProtocolSpec, gamma_dt: f64, cfg: &HilbertConfig) -> Result<Operator> {
    let pr = &spec.params;
    let dim = cfg.dim;
    let modulus = pr.l / (2.0 * pr.c);
    let xm = fock::modular_quadrature(modulus, cfg)?.m;
    let (xmod, pq) = match spec.axis {
        RoundAxis::X => (xm, p_mat(dim)),
        RoundAxis::P => {
            // p̂_[m] = R x̂_[m] R†, R = diag(iⁿ); and p̂ → −x̂
            let mut pm = xm;
            for i in 0..dim {
                for j in 0..dim {
                    let k = (i as i64 - j as i64).rem_euclid(4);
                    pm[(i, j)] *= match k {
                        0 => c(1.0, 0.0),
                        1 => I,
                        2 => c(-1.0, 0.0),
                        _ => -I,
                    };
                }
            }
            (pm, x_mat(dim).map(|z| -z))
        }
    };
    let scale = (gamma_dt / pr.t).sqrt();
    let g = kron(&fock::sigma_x(), &xmod.map(|z| z * c(scale, 0.0)))
        + kron(&fock::sigma_y(), &pq.map(|z| z * c(scale * pr.t, 0.0)));
    let u = expm(&g.map(|z| z * (-I)))?;
    Operator::joint(u)?.claim_unitary()
}

// ---------------------------------------------------------------------------
// superlattice
// ---------------------------------------------------------------------------

/// Period (in the conjugate quadrature) that the round channel shares with
/// the code lattice: 2π/ε for ST, π/ε for BsB, 4π/ε for sBs.
pub fn superlattice_constant(name: ProtocolName, params: &GkpParams) -> f64 {
    let tau = std::f64::consts::TAU;
    match name {
        ProtocolName::St => tau / params.eps,
        ProtocolName::Bsb => tau / 2.0 / params.eps,
        ProtocolName::Sbs => 2.0 * tau / params.eps,
    }
}

/// The superlattice displacement itself: e^{isx̂} for the x-round (a momentum
/// boost by s), e^{−isp̂} for the p-round.  Needs roughly dim ≳ 0.7·s² before
/// the boosted vacuum fits under the cutoff; below that it fails loudly.
pub fn superlattice_displacement(spec: &ProtocolSpec, cfg: &HilbertConfig) -> Result<Operator> {
    let s = superlattice_constant(spec.name, &spec.params);
    let alpha = match spec.axis {
        RoundAxis::X => c(0.0, s / 2f64.sqrt()),
        RoundAxis::P => c(s / 2f64.sqrt(), 0.0),
    };
    fock::displacement(alpha, cfg)
}

/// Round stages applied to pure states through the eigenbasis of the
/// truncated x̂, which stays affordable at the few-thousand dimensions the
/// superlattice commutation check needs.  x-round only; the p-round follows
/// by Fourier symmetry.
pub struct XBasisKernel {
    pub lam: Vec<f64>,
    v: nalgebra::DMatrix<f64>,
}

impl XBasisKernel {
    pub fn new(dim: usize) -> Self {
        let diag = vec![0.0f64; dim];
        let off: Vec<f64> = (1..dim).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let (lam, v) = crate::linalg::tridiag_eigh(&diag, &off);
        XBasisKernel { lam, v }
    }

    pub fn dim(&self) -> usize {
        self.lam.len()
    }

    /// f(x̂)·v, all in the Fock basis
    pub fn apply_fx(&self, f: impl Fn(f64) -> C, vin: &CVec) -> CVec {
        let n = self.dim();
        let re = nalgebra::DVector::<f64>::from_fn(n, |i, _| vin[i].re);
        let im = nalgebra::DVector::<f64>::from_fn(n, |i, _| vin[i].im);
        let cre = self.v.tr_mul(&re);
        let cim = self.v.tr_mul(&im);
        let mut fre = nalgebra::DVector::<f64>::zeros(n);
        let mut fim = nalgebra::DVector::<f64>::zeros(n);
        for i in 0..n {
            let w = f(self.lam[i]);
            let z = c(cre[i], cim[i]) * w;
            fre[i] = z.re;
            fim[i] = z.im;
        }
        let ore = &self.v * &fre;
        let oim = &self.v * &fim;
        CVec::from_fn(n, |i, _| c(ore[i], oim[i]))
    }

    /// f(p̂)·v via p̂ = R x̂ R†, R = diag(iⁿ)
    pub fn apply_fp(&self, f: impl Fn(f64) -> C, vin: &CVec) -> CVec {
        let n = self.dim();
        let ph = |k: usize| -> C {
            match k % 4 {
                0 => c(1.0, 0.0),
                1 => I,
                2 => c(-1.0, 0.0),
                _ => -I,
            }
        };
        let rotated = CVec::from_fn(n, |i, _| vin[i] * ph(i).conj());
        let mid = self.apply_fx(f, &rotated);
        CVec::from_fn(n, |i, _| mid[i] * ph(i))
    }

    /// (K_g·v, K_e·v) for the first stage of the protocol's x-round.
    pub fn stage_vectors(&self, name: ProtocolName, params: &GkpParams, vin: &CVec) -> (CVec, CVec) {
        let lc2 = params.l * params.c / 2.0;
        let sqrt2 = 2f64.sqrt();
        let mut vg = vin.clone();
        let mut ve = CVec::zeros(self.dim());
        let small = |vg: &CVec, ve: &CVec, theta: f64| -> (CVec, CVec) {
            // σ̂_y branches: |±y⟩ = (|g⟩ ± i|e⟩)/√2 pick up e^{∓iθp̂}
            let wp = CVec::from_fn(self.dim(), |i, _| (vg[i] - I * ve[i]) / c(sqrt2, 0.0));
            let wm = CVec::from_fn(self.dim(), |i, _| (vg[i] + I * ve[i]) / c(sqrt2, 0.0));
            let wp = self.apply_fp(|q| (-I * c(theta * q, 0.0)).exp(), &wp);
            let wm = self.apply_fp(|q| (I * c(theta * q, 0.0)).exp(), &wm);
            let g = CVec::from_fn(self.dim(), |i, _| (wp[i] + wm[i]) / c(sqrt2, 0.0));
            let e = CVec::from_fn(self.dim(), |i, _| (I * wp[i] - I * wm[i]) / c(sqrt2, 0.0));
            (g, e)
        };
        let big = |kern: &Self, vg: &CVec, ve: &CVec| -> (CVec, CVec) {
            let wp = CVec::from_fn(kern.dim(), |i, _| (vg[i] + ve[i]) / c(sqrt2, 0.0));
            let wm = CVec::from_fn(kern.dim(), |i, _| (vg[i] - ve[i]) / c(sqrt2, 0.0));
            let wp = kern.apply_fx(|q| (-I * c(lc2 * q, 0.0)).exp(), &wp);
            let wm = kern.apply_fx(|q| (I * c(lc2 * q, 0.0)).exp(), &wm);
            let g = CVec::from_fn(kern.dim(), |i, _| (wp[i] + wm[i]) / c(sqrt2, 0.0));
            let e = CVec::from_fn(kern.dim(), |i, _| (wp[i] - wm[i]) / c(sqrt2, 0.0));
            (g, e)
        };
        match name {
            ProtocolName::Sbs => {
                let (g, e) = small(&vg, &ve, params.eps / 4.0);
                let (g, e) = big(self, &g, &e);
                let (g, e) = small(&g, &e, params.eps / 4.0);
                vg = g;
                ve = e;
            }
            ProtocolName::Bsb => {
                let (g, e) = big(self, &vg, &ve);
                let (g, e) = small(&g, &e, params.eps);
                let (g, e) = big(self, &g, &e);
                vg = g;
                ve = e;
            }
            ProtocolName::St => {
                let (g, e) = big(self, &vg, &ve);
                let (g, e) = small(&g, &e, params.eps / 2.0);
                vg = g;
                ve = e;
            }
        }
        (vg, ve)
    }
}

/// ‖Σ_a aa† − Σ_b bb†‖_F from the Gram matrix of the stacked vectors.
pub fn mixture_distance(a: &[CVec], b: &[CVec]) -> f64 {
    let cols: Vec<&CVec> = a.iter().chain(b.iter()).collect();
    let m = cols.len();
    let mut acc = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let si = if i < a.len() { 1.0 } else { -1.0 };
            let sj = if j < a.len() { 1.0 } else { -1.0 };
            acc += si * sj * cols[i].dotc(cols[j]).norm_sqr();
        }
    }
    acc.max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// cooling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Cooling {
    pub rho: CMat,
    /// (⟨T̂_{x,Δ}⟩, ⟨T̂_{p,Δ}⟩) after each full round pair
    pub trajectory: Vec<(f64, f64)>,
    /// 1-based pair index at which both expectations first reach 0.98
    pub first_pair_converged: Option<usize>,
}

/// Alternate x/p rounds on the vacuum until the stabilizer expectations
/// plateau; this is how every experiment prepares its initial code state.
pub fn cool_from_vacuum(
    name: ProtocolName,
    params: &GkpParams,
    cfg: &HilbertConfig,
    pairs: usize,
) -> Result<Cooling> {
    let base = ProtocolSpec::new(name, *params);
    let chan_x = compile_channel(&base, cfg)?;
    let chan_p = compile_channel(&base.with_axis(RoundAxis::P), cfg)?;
    let tx = finite_stabilizer(StabAxis::X, params, cfg)?.m;
    let tp = finite_stabilizer(StabAxis::P, params, cfg)?.m;
    let mut rho = CMat::zeros(cfg.dim, cfg.dim);
    rho[(0, 0)] = c(1.0, 0.0);
    let mut trajectory = Vec::with_capacity(pairs);
    let mut first = None;
    for k in 0..pairs {
        rho = chan_p.apply(&chan_x.apply(&rho));
        let ex = trace_prod(&rho, &tx).re;
        let ep = trace_prod(&rho, &tp).re;
        trajectory.push((ex, ep));
        if first.is_none() && ex >= 0.98 && ep >= 0.98 {
            first = Some(k + 1);
        }
    }
    Ok(Cooling { rho, trajectory, first_pair_converged: first })
}
