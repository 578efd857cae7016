//! The quantum action 𝒜_{D,μ} and the classical action V of an open diagram,
//! as symbolic term lists over the segment variables.
//!
//! Both actions are sums of one crossing block per crossing.  A block holds
//! four dilogarithm terms with affine arguments (differences of two slot
//! expressions plus an exact symbolic constant) and a linear part.  Constants
//! are stored with integer coefficients in the basis {1, N, 1/N, μ, μ/N,
//! μ²/N}, so identities like e^{2πi(1−N)} = 1 survive evaluation exactly up
//! to rounding in the final complex exponential.
//!
//! Only exponentials of the quantum dilogarithm are ever formed: evaluation
//! computes exp(N·𝒜) as a product of e^{±φ_N} factors times the exponential
//! of a compensated linear accumulator.  Logarithms of dilogarithm values
//! appear in no code path except the explicitly branch-adjusted diagnostic
//! [`SymbolicAction::quantum_action_value`].

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{OpenDiagram, Role, SegRef};
use crate::dilog::{dist_to_excluded, dll, dll_deriv, DilogError, QDilogContext};
use crate::util::{NeumaierC, TAU_I};

#[derive(Debug, Error)]
pub enum ActionError {
    #[error(transparent)]
    Dilog(#[from] DilogError),
    #[error("point lies outside the classical domain: argument {arg} is {dist:.3e} from the branch locus")]
    OutsideOmega { arg: Complex64, dist: f64 },
    #[error("operation requires a {expected} action")]
    WrongKind { expected: &'static str },
    #[error("point has {got} coordinates, action has {expected} variables")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("singular dilogarithm term at crossing `{crossing}`, term {term}: {source}")]
    SingularTerm {
        crossing: String,
        term: usize,
        source: DilogError,
    },
}

/// Exact constant of an affine dilogarithm argument:
/// units + inv_n/N + mu_n·μ/N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ArgConst {
    pub units: i64,
    pub inv_n: i64,
    pub mu_n: i64,
}

impl ArgConst {
    pub(crate) fn add(self, other: ArgConst) -> ArgConst {
        ArgConst {
            units: self.units + other.units,
            inv_n: self.inv_n + other.inv_n,
            mu_n: self.mu_n + other.mu_n,
        }
    }

    fn sub(self, other: ArgConst) -> ArgConst {
        ArgConst {
            units: self.units - other.units,
            inv_n: self.inv_n - other.inv_n,
            mu_n: self.mu_n - other.mu_n,
        }
    }

    pub fn value(&self, kind: &ActionKind) -> Complex64 {
        match kind {
            ActionKind::Quantum { level, mu } => {
                let nf = *level as f64;
                Complex64::new(self.units as f64 + self.inv_n as f64 / nf, 0.0)
                    + *mu * (self.mu_n as f64 / nf)
            }
            ActionKind::Classical => {
                debug_assert!(self.inv_n == 0 && self.mu_n == 0);
                Complex64::new(self.units as f64, 0.0)
            }
        }
    }
}

/// Coefficient of a segment variable in the linear part, times 2πi:
/// one + big_n·N + mu·μ.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LinCoeff {
    pub one: i64,
    pub big_n: i64,
    pub mu: i64,
}

impl LinCoeff {
    pub fn value(&self, kind: &ActionKind) -> Complex64 {
        match kind {
            ActionKind::Quantum { level, mu } => {
                Complex64::new((self.one + self.big_n * level) as f64, 0.0) + *mu * self.mu as f64
            }
            ActionKind::Classical => {
                debug_assert!(self.big_n == 0 && self.mu == 0);
                Complex64::new(self.one as f64, 0.0)
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.one == 0 && self.big_n == 0 && self.mu == 0
    }
}

/// Constant of the linear part, times 2πi:
/// one + big_n·N + inv_n/N + mu·μ + mu_n·μ/N + mu2_n·μ²/N.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ExpConst {
    pub one: i64,
    pub big_n: i64,
    pub inv_n: i64,
    pub mu: i64,
    pub mu_n: i64,
    pub mu2_n: i64,
}

impl ExpConst {
    /// Add scale·(1−N)·arg.
    fn add_one_minus_n_times(&mut self, arg: ArgConst, scale: i64) {
        self.one += scale * (arg.units - arg.inv_n);
        self.big_n -= scale * arg.units;
        self.inv_n += scale * arg.inv_n;
        self.mu -= scale * arg.mu_n;
        self.mu_n += scale * arg.mu_n;
    }

    /// Add scale·(1−N)·(−μ/N) = scale·μ − scale·μ/N.
    fn add_one_minus_n_times_neg_mu_over_n(&mut self, scale: i64) {
        self.mu += scale;
        self.mu_n -= scale;
    }

    /// Add scale·μ·arg.
    fn add_mu_times(&mut self, arg: ArgConst, scale: i64) {
        self.mu += scale * arg.units;
        self.mu_n += scale * arg.inv_n;
        self.mu2_n += scale * arg.mu_n;
    }

    /// Add scale·arg (classical linear constant).
    fn add_plain(&mut self, arg: ArgConst, scale: i64) {
        self.one += scale * arg.units;
        self.inv_n += scale * arg.inv_n;
        debug_assert_eq!(arg.mu_n, 0);
    }

    pub fn value(&self, kind: &ActionKind) -> Complex64 {
        match kind {
            ActionKind::Quantum { level, mu } => {
                let nf = *level as f64;
                Complex64::new(
                    (self.one + self.big_n * level) as f64 + self.inv_n as f64 / nf,
                    0.0,
                ) + *mu * self.mu as f64
                    + *mu * (self.mu_n as f64 / nf)
                    + *mu * *mu * (self.mu2_n as f64 / nf)
            }
            ActionKind::Classical => Complex64::new(self.one as f64, 0.0),
        }
    }
}

/// Slot expression T_r = t_var + cst (var absent for boundary slots).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlotExpr {
    pub var: Option<usize>,
    pub cst: ArgConst,
}

/// Affine argument of a dilogarithm term: t_pos − t_neg + cst.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AffineArg {
    pub pos: Option<usize>,
    pub neg: Option<usize>,
    pub cst: ArgConst,
}

impl AffineArg {
    fn from_slots(a: SlotExpr, b: SlotExpr, term: ArgConst) -> AffineArg {
        let cst = a.cst.sub(b.cst).add(term);
        let (pos, neg) = if a.var == b.var {
            (None, None)
        } else {
            (a.var, b.var)
        };
        AffineArg { pos, neg, cst }
    }

    pub fn value(&self, kind: &ActionKind, t: &[Complex64]) -> Complex64 {
        let mut v = self.cst.value(kind);
        if let Some(p) = self.pos {
            v += t[p];
        }
        if let Some(n) = self.neg {
            v -= t[n];
        }
        v
    }

    /// Coefficient of variable `i` in this argument: −1, 0 or +1.
    pub fn coeff(&self, i: usize) -> i64 {
        let mut c = 0;
        if self.pos == Some(i) {
            c += 1;
        }
        if self.neg == Some(i) {
            c -= 1;
        }
        c
    }
}

/// One dilogarithm term: sign · φ(arg) (quantum) or sign · ℓ(arg) (classical).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DilogTerm {
    pub sign: i8,
    pub arg: AffineArg,
}

/// All terms contributed by one crossing.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingBlock {
    pub crossing: usize,
    pub eps: i8,
    /// Overall sign of this crossing's Λ in the action.
    pub prefactor: i8,
    /// Slot expressions [T1, T2, T1', T2'].
    pub slots: [SlotExpr; 4],
    pub dilogs: [DilogTerm; 4],
    /// Per-variable linear coefficients of this block (×2πi).
    pub lin_coeffs: Vec<(usize, LinCoeff)>,
    /// Linear constant of this block (×2πi).
    pub lin_const: ExpConst,
}

#[derive(Debug, Clone, Serialize)]
pub enum ActionKind {
    Quantum {
        level: i64,
        #[serde(with = "crate::util::cpx_serde")]
        mu: Complex64,
    },
    Classical,
}

/// A quantum or classical action as a list of crossing blocks.
///
/// The stored terms represent S(t) = Σ_c prefactor_c · Λ_c(t); the quantum
/// action is 𝒜 = S/N and evaluation exposes exp(N𝒜) = exp(S) directly, the
/// classical action is V = S.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolicAction {
    pub kind: ActionKind,
    pub blocks: Vec<CrossingBlock>,
    pub num_vars: usize,
    pub var_names: Vec<String>,
}

/// Prefactor convention for negative crossings whose strand was rotated into
/// position (nonzero turnback offset on the s1/s1' passage).
///
/// `AllPlus` assigns +Λ^ε to every crossing; this is the convention under
/// which lattice periodicity and gauge invariance hold (the quasi-periodicity
/// factors of exp(Λ^ε) are 1/a at incoming slots and a at outgoing slots for
/// both ε, so each segment's factors cancel exactly on solutions of the
/// segment equations).  `MinusOnShiftedNegative` reproduces the alternative
/// with −Λ⁻ in front of rotated negative crossings and is kept for the
/// convention experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefactorConvention {
    AllPlus,
    MinusOnShiftedNegative,
}

fn slot_shift_sigmas(d: &OpenDiagram) -> Vec<[i64; 4]> {
    let mut sigmas = vec![[0i64; 4]; d.crossings.len()];
    for v in &d.traversal {
        if v.enters_slot1 {
            sigmas[v.crossing][Role::S1 as usize] = v.offset_sigma;
            sigmas[v.crossing][Role::S1p as usize] = v.offset_sigma;
        } else {
            sigmas[v.crossing][Role::S2 as usize] = v.offset_sigma;
            sigmas[v.crossing][Role::S2p as usize] = v.offset_sigma;
        }
    }
    sigmas
}

fn build_blocks(
    d: &OpenDiagram,
    quantum: bool,
    convention: PrefactorConvention,
) -> Vec<CrossingBlock> {
    let sigmas = slot_shift_sigmas(d);
    let mut blocks = Vec::with_capacity(d.crossings.len());
    for (ci, site) in d.crossings.iter().enumerate() {
        let eps = site.sign as i64;
        let slot = |role: Role| -> SlotExpr {
            let var = match site.slot(role) {
                SegRef::Internal(i) => Some(i),
                _ => None,
            };
            let s = sigmas[ci][role as usize];
            let cst = if quantum {
                // σ·(1 − 1/N)
                ArgConst {
                    units: s,
                    inv_n: -s,
                    mu_n: 0,
                }
            } else {
                ArgConst {
                    units: s,
                    inv_n: 0,
                    mu_n: 0,
                }
            };
            SlotExpr { var, cst }
        };
        let t1 = slot(Role::S1);
        let t2 = slot(Role::S2);
        let t1p = slot(Role::S1p);
        let t2p = slot(Role::S2p);

        let zero = ArgConst::default();
        let one = ArgConst {
            units: 1,
            ..Default::default()
        };
        let one_less = ArgConst {
            units: 1,
            inv_n: -1,
            mu_n: 0,
        }; // 1 − 1/N
        let mu_over_n = ArgConst {
            units: 0,
            inv_n: 0,
            mu_n: 1,
        };

        // Four dilogarithm terms per crossing.
        let dilogs: [DilogTerm; 4] = if site.sign > 0 {
            if quantum {
                [
                    DilogTerm {
                        sign: 1,
                        arg: AffineArg::from_slots(t2p, t1, zero),
                    },
                    DilogTerm {
                        sign: 1,
                        arg: AffineArg::from_slots(t2, t1p, zero),
                    },
                    DilogTerm {
                        sign: -1,
                        arg: AffineArg::from_slots(t2, t1, one_less.sub(mu_over_n)),
                    },
                    DilogTerm {
                        sign: -1,
                        arg: AffineArg::from_slots(t2p, t1p, mu_over_n),
                    },
                ]
            } else {
                [
                    DilogTerm {
                        sign: 1,
                        arg: AffineArg::from_slots(t2p, t1, zero),
                    },
                    DilogTerm {
                        sign: 1,
                        arg: AffineArg::from_slots(t2, t1p, zero),
                    },
                    DilogTerm {
                        sign: -1,
                        arg: AffineArg::from_slots(t2, t1, one),
                    },
                    DilogTerm {
                        sign: -1,
                        arg: AffineArg::from_slots(t2p, t1p, zero),
                    },
                ]
            }
        } else if quantum {
            [
                DilogTerm {
                    sign: -1,
                    arg: AffineArg::from_slots(t1, t2p, one_less),
                },
                DilogTerm {
                    sign: -1,
                    arg: AffineArg::from_slots(t1p, t2, one_less),
                },
                DilogTerm {
                    sign: 1,
                    arg: AffineArg::from_slots(t1, t2, mu_over_n),
                },
                DilogTerm {
                    sign: 1,
                    arg: AffineArg::from_slots(t1p, t2p, one_less.sub(mu_over_n)),
                },
            ]
        } else {
            [
                DilogTerm {
                    sign: -1,
                    arg: AffineArg::from_slots(t1, t2p, one),
                },
                DilogTerm {
                    sign: -1,
                    arg: AffineArg::from_slots(t1p, t2, one),
                },
                DilogTerm {
                    sign: 1,
                    arg: AffineArg::from_slots(t1, t2, zero),
                },
                DilogTerm {
                    sign: 1,
                    arg: AffineArg::from_slots(t1p, t2p, one),
                },
            ]
        };

        // Linear part.
        let mut coeffs: Vec<(usize, LinCoeff)> = Vec::new();
        let mut add_coeff = |var: Option<usize>, delta: LinCoeff| {
            if let Some(v) = var {
                if let Some(entry) = coeffs.iter_mut().find(|(i, _)| *i == v) {
                    entry.1.one += delta.one;
                    entry.1.big_n += delta.big_n;
                    entry.1.mu += delta.mu;
                } else {
                    coeffs.push((v, delta));
                }
            }
        };
        let mut lin_const = ExpConst::default();
        if quantum {
            // ε(1−N)(T2 − T1 − μ/N) + εμ(T2 + T1' − T1 − T2')
            add_coeff(
                t2.var,
                LinCoeff {
                    one: eps,
                    big_n: -eps,
                    mu: eps,
                },
            );
            add_coeff(
                t1.var,
                LinCoeff {
                    one: -eps,
                    big_n: eps,
                    mu: -eps,
                },
            );
            add_coeff(
                t1p.var,
                LinCoeff {
                    one: 0,
                    big_n: 0,
                    mu: eps,
                },
            );
            add_coeff(
                t2p.var,
                LinCoeff {
                    one: 0,
                    big_n: 0,
                    mu: -eps,
                },
            );
            lin_const.add_one_minus_n_times(t2.cst, eps);
            lin_const.add_one_minus_n_times(t1.cst, -eps);
            lin_const.add_one_minus_n_times_neg_mu_over_n(eps);
            lin_const.add_mu_times(t2.cst, eps);
            lin_const.add_mu_times(t1p.cst, eps);
            lin_const.add_mu_times(t1.cst, -eps);
            lin_const.add_mu_times(t2p.cst, -eps);
        } else {
            // −ε(T2 − T1)
            add_coeff(
                t2.var,
                LinCoeff {
                    one: -eps,
                    big_n: 0,
                    mu: 0,
                },
            );
            add_coeff(
                t1.var,
                LinCoeff {
                    one: eps,
                    big_n: 0,
                    mu: 0,
                },
            );
            lin_const.add_plain(t2.cst, -eps);
            lin_const.add_plain(t1.cst, eps);
        }
        coeffs.retain(|(_, c)| !c.is_zero());

        let shifted_negative = site.sign < 0 && sigmas[ci][Role::S1 as usize] != 0;
        let prefactor = match convention {
            PrefactorConvention::AllPlus => 1,
            PrefactorConvention::MinusOnShiftedNegative => {
                if shifted_negative {
                    -1
                } else {
                    1
                }
            }
        };

        blocks.push(CrossingBlock {
            crossing: ci,
            eps: site.sign,
            prefactor,
            slots: [t1, t2, t1p, t2p],
            dilogs,
            lin_coeffs: coeffs,
            lin_const,
        });
    }
    blocks
}

/// Build the quantum action 𝒜_{D,μ} at level N.
pub fn build_quantum_action(d: &OpenDiagram, mu: Complex64, level: i64) -> SymbolicAction {
    build_quantum_action_with(d, mu, level, PrefactorConvention::AllPlus)
}

/// Quantum action with an explicit prefactor convention (for the convention
/// experiments; production code uses [`build_quantum_action`]).
pub fn build_quantum_action_with(
    d: &OpenDiagram,
    mu: Complex64,
    level: i64,
    convention: PrefactorConvention,
) -> SymbolicAction {
    SymbolicAction {
        kind: ActionKind::Quantum { level, mu },
        blocks: build_blocks(d, true, convention),
        num_vars: d.num_internal(),
        var_names: d.segments.clone(),
    }
}

/// Build the classical action V_D.
pub fn build_classical_action(d: &OpenDiagram) -> SymbolicAction {
    build_classical_action_with(d, PrefactorConvention::AllPlus)
}

pub fn build_classical_action_with(
    d: &OpenDiagram,
    convention: PrefactorConvention,
) -> SymbolicAction {
    SymbolicAction {
        kind: ActionKind::Classical,
        blocks: build_blocks(d, false, convention),
        num_vars: d.num_internal(),
        var_names: d.segments.clone(),
    }
}

impl SymbolicAction {
    pub fn level(&self) -> Option<i64> {
        match self.kind {
            ActionKind::Quantum { level, .. } => Some(level),
            ActionKind::Classical => None,
        }
    }

    pub fn dilog_term_count(&self) -> usize {
        4 * self.blocks.len()
    }

    fn check_dims(&self, t: &[Complex64]) -> Result<(), ActionError> {
        if t.len() != self.num_vars {
            return Err(ActionError::DimensionMismatch {
                got: t.len(),
                expected: self.num_vars,
            });
        }
        Ok(())
    }

    /// exp(N·𝒜(t)): product over crossings of exp(prefactor·Λ), with the
    /// dilogarithm factors multiplied in directly and all linear exponents
    /// accumulated once with compensated summation.
    pub fn eval_exp_n(
        &self,
        ctx: &QDilogContext,
        t: &[Complex64],
    ) -> Result<Complex64, ActionError> {
        self.check_dims(t)?;
        let mut product = Complex64::new(1.0, 0.0);
        let mut linear = NeumaierC::default();
        for block in &self.blocks {
            let pref = block.prefactor as f64;
            for (k, term) in block.dilogs.iter().enumerate() {
                let arg = term.arg.value(&self.kind, t);
                let factor = ctx.pfl_exp(arg).map_err(|e| ActionError::SingularTerm {
                    crossing: format!("c{}", block.crossing),
                    term: k,
                    source: e,
                })?;
                let exponent_sign = block.prefactor as i64 * term.sign as i64;
                if exponent_sign > 0 {
                    product *= factor;
                } else {
                    product /= factor;
                }
            }
            let mut lin = block.lin_const.value(&self.kind);
            for (var, coeff) in &block.lin_coeffs {
                lin += coeff.value(&self.kind) * t[*var];
            }
            linear.add(lin * pref);
        }
        Ok(product * (TAU_I * linear.value()).exp())
    }

    /// V(t) for a classical action, with the Ω_D membership margin enforced.
    pub fn eval_classical(
        &self,
        t: &[Complex64],
        omega_margin: f64,
    ) -> Result<Complex64, ActionError> {
        if !matches!(self.kind, ActionKind::Classical) {
            return Err(ActionError::WrongKind {
                expected: "classical",
            });
        }
        self.check_dims(t)?;
        let mut acc = NeumaierC::default();
        for block in &self.blocks {
            let pref = block.prefactor as f64;
            for term in &block.dilogs {
                let arg = term.arg.value(&self.kind, t);
                let dist = dist_to_excluded(arg);
                if dist < omega_margin {
                    return Err(ActionError::OutsideOmega { arg, dist });
                }
                let val = dll(arg)?.value;
                acc.add(val * (pref * term.sign as f64));
            }
            let mut lin = block.lin_const.value(&self.kind);
            for (var, coeff) in &block.lin_coeffs {
                lin += coeff.value(&self.kind) * t[*var];
            }
            acc.add(TAU_I * lin * pref);
        }
        Ok(acc.value())
    }

    /// The diagnostic value 𝒜_N(t), with each φ_N branch chosen nearest to
    /// N·ℓ(arg + 1/2N).  Used only to compare against the classical limit.
    pub fn quantum_action_value(
        &self,
        ctx: &QDilogContext,
        t: &[Complex64],
    ) -> Result<Complex64, ActionError> {
        let level = match self.kind {
            ActionKind::Quantum { level, .. } => level,
            ActionKind::Classical => {
                return Err(ActionError::WrongKind {
                    expected: "quantum",
                })
            }
        };
        self.check_dims(t)?;
        let nf = level as f64;
        let mut acc = NeumaierC::default();
        for block in &self.blocks {
            let pref = block.prefactor as f64;
            for term in &block.dilogs {
                let arg = term.arg.value(&self.kind, t);
                let val = ctx.pfl_exp(arg)?;
                let target = dll(arg + Complex64::new(0.5 / nf, 0.0))?.value * nf;
                let raw = val.ln();
                let k = ((target.im - raw.im) / std::f64::consts::TAU).round();
                let phi = raw + Complex64::new(0.0, std::f64::consts::TAU * k);
                acc.add(phi * (pref * term.sign as f64 / nf));
            }
            let mut lin = block.lin_const.value(&self.kind);
            for (var, coeff) in &block.lin_coeffs {
                lin += coeff.value(&self.kind) * t[*var];
            }
            acc.add(TAU_I * lin * (pref / nf));
        }
        Ok(acc.value())
    }

    /// Component-wise exp(∂V/∂t_i), computed multiplicatively from
    /// exp(dℓ/dζ) = 1/(1 − e^{2πiζ}); no logarithm branch is involved.
    pub fn exp_grad_classical(&self, t: &[Complex64]) -> Result<Vec<Complex64>, ActionError> {
        if !matches!(self.kind, ActionKind::Classical) {
            return Err(ActionError::WrongKind {
                expected: "classical",
            });
        }
        self.check_dims(t)?;
        let one = Complex64::new(1.0, 0.0);
        let mut grad = vec![Complex64::new(1.0, 0.0); self.num_vars];
        for block in &self.blocks {
            for term in &block.dilogs {
                if term.arg.pos.is_none() && term.arg.neg.is_none() {
                    continue;
                }
                let arg = term.arg.value(&self.kind, t);
                let base = one - (TAU_I * arg).exp(); // exp(dℓ/dζ) = 1/base
                for i in [term.arg.pos, term.arg.neg].into_iter().flatten() {
                    let c = (block.prefactor as i64) * (term.sign as i64) * term.arg.coeff(i);
                    match c {
                        1 => grad[i] /= base,
                        -1 => grad[i] *= base,
                        0 => {}
                        2 => grad[i] /= base * base,
                        -2 => grad[i] *= base * base,
                        _ => unreachable!("argument coefficients are in {{-1,0,1}}"),
                    }
                }
            }
            for (var, coeff) in &block.lin_coeffs {
                let v = coeff.value(&self.kind) * (block.prefactor as f64);
                grad[*var] *= (TAU_I * v).exp();
            }
        }
        Ok(grad)
    }

    /// The actual gradient ∂V/∂t_i via the branch-managed dℓ/dζ; this is the
    /// quantity whose division by 2πi yields the flattening vector.
    pub fn grad_classical(&self, t: &[Complex64]) -> Result<Vec<Complex64>, ActionError> {
        if !matches!(self.kind, ActionKind::Classical) {
            return Err(ActionError::WrongKind {
                expected: "classical",
            });
        }
        self.check_dims(t)?;
        let mut grad = vec![Complex64::new(0.0, 0.0); self.num_vars];
        for block in &self.blocks {
            for term in &block.dilogs {
                if term.arg.pos.is_none() && term.arg.neg.is_none() {
                    continue;
                }
                let arg = term.arg.value(&self.kind, t);
                let d = dll_deriv(arg)?;
                for i in [term.arg.pos, term.arg.neg].into_iter().flatten() {
                    let c = (block.prefactor as i64) * (term.sign as i64) * term.arg.coeff(i);
                    grad[i] += d * c as f64;
                }
            }
            for (var, coeff) in &block.lin_coeffs {
                grad[*var] += TAU_I * coeff.value(&self.kind) * (block.prefactor as f64);
            }
        }
        Ok(grad)
    }

    /// Ratio exp(N𝒜(base + e_i)) / exp(N𝒜(base)).
    pub fn quasi_periodicity_factor(
        &self,
        ctx: &QDilogContext,
        i: usize,
        base: &[Complex64],
    ) -> Result<Complex64, ActionError> {
        let mut shifted = base.to_vec();
        shifted[i] += Complex64::new(1.0, 0.0);
        Ok(self.eval_exp_n(ctx, &shifted)? / self.eval_exp_n(ctx, base)?)
    }

    /// Canonical text form of the term list, one crossing per line.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let quantum = matches!(self.kind, ActionKind::Quantum { .. });
        for (k, block) in self.blocks.iter().enumerate() {
            let sign_str = if block.prefactor > 0 {
                if k == 0 {
                    ""
                } else {
                    "+ "
                }
            } else {
                "- "
            };
            let eps = if block.eps > 0 { "+" } else { "-" };
            let slots: Vec<String> = block
                .slots
                .iter()
                .map(|s| self.slot_text(s, quantum))
                .collect();
            if quantum {
                out.push_str(&format!(
                    "{}(1/N) Lambda[{}](mu | {}, {}, {}, {})\n",
                    sign_str, eps, slots[0], slots[1], slots[2], slots[3]
                ));
            } else {
                out.push_str(&format!(
                    "{}Lambda_cl[{}]({}, {}, {}, {})\n",
                    sign_str, eps, slots[0], slots[1], slots[2], slots[3]
                ));
            }
        }
        out
    }

    fn slot_text(&self, s: &SlotExpr, quantum: bool) -> String {
        let mut parts = Vec::new();
        if let Some(v) = s.var {
            parts.push(self.var_names[v].clone());
        }
        if quantum && s.cst.inv_n != 0 {
            parts.push(match s.cst.inv_n {
                1 => "+ 1/N".into(),
                -1 => "- 1/N".into(),
                k if k > 0 => format!("+ {k}/N"),
                k => format!("- {}/N", -k),
            });
        }
        if s.cst.units != 0 {
            parts.push(if s.cst.units > 0 {
                format!("+ {}", s.cst.units)
            } else {
                format!("- {}", -s.cst.units)
            });
        }
        if parts.is_empty() {
            return "0".into();
        }
        let mut text = parts[0].clone();
        for p in &parts[1..] {
            text.push(' ');
            text.push_str(p);
        }
        if s.var.is_none() {
            text = text.trim_start_matches("+ ").to_string();
            if let Some(rest) = text.strip_prefix("- ") {
                text = format!("-{rest}");
            }
        }
        text
    }
}
