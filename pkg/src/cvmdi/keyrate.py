"""CV-MDI-QKD security pipeline in the extreme asymmetric configuration.

Alice sends one arm of the heralded (m,n)-TMSC through a fiber of length
L_AC to the untrusted relay; Bob sits at the relay (L_BC = 0, T_B = 1).
The relay's CV Bell measurement plus Bob's displacement reduce to an
equivalent one-way channel acting on Bob's mode with normalized
transmittance T = T_A g^2 / 2 and total added noise chi_tot.  Secret key
(reverse reconciliation, collective attacks, asymptotic limit):

    K = P^(m,n) * (beta * I_AB - chi_BE)   [bits per pulse]

with I_AB the heterodyne-heterodyne mutual information and chi_BE the
Holevo bound computed from symplectic eigenvalues of the evolved two-mode
covariance and of Alice's covariance conditioned on Bob's heterodyne.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InternalConsistencyError, ParameterError, PhysicalityError
from .state_engine import (
    QuadCovariance,
    StateSpec,
    covariance,
    probability,
    tmsc_covariance,
)

LAMBDA_CLAMP_TOL = 1e-9  # symplectic eigenvalues may sit this far below 1


@dataclass(frozen=True)
class ChannelParams:
    """Channel, detector and reconciliation parameters.

    Defaults are the reference operating point used throughout the figure
    sweeps: 0.2 dB/km fiber, thermal excess noises 0.002 SNU, ideal
    homodyne detectors, reconciliation efficiency 0.96.
    """

    L_AC: float = 0.0          # Alice-relay fiber length (km)
    L_BC: float = 0.0          # Bob-relay fiber length (km); 0 = extreme asymmetric
    loss_rate: float = 0.2     # fiber loss l (dB/km)
    eps_A: float = 0.002       # thermal excess noise, Alice channel (SNU)
    eps_B: float = 0.002       # thermal excess noise, Bob channel (SNU)
    eta: float = 1.0           # homodyne detector efficiency in (0, 1]
    v_el: float = 0.0          # detector electronic noise (SNU)
    beta: float = 0.96         # reconciliation efficiency in [0, 1]
    gain_policy: str = "paper-optimal"  # or "explicit"
    gain: float = 0.0          # used only when gain_policy == "explicit"

    def __post_init__(self):
        if self.L_AC < 0 or self.L_BC < 0:
            raise ParameterError("fiber lengths must be non-negative")
        if self.loss_rate < 0:
            raise ParameterError("loss rate must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"detector efficiency must lie in (0,1], got {self.eta}")
        if self.v_el < 0:
            raise ParameterError("electronic noise must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"reconciliation efficiency in [0,1], got {self.beta}")
        if self.gain_policy not in ("paper-optimal", "explicit"):
            raise ParameterError(f"unknown gain policy {self.gain_policy!r}")


@dataclass(frozen=True)
class NoiseBreakdown:
    T_A: float
    T_B: float
    g: float
    T: float
    eps_th: float
    chi_line: float
    chi_homo: float
    chi_tot: float

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("T_A", "T_B", "g", "T", "eps_th", "chi_line", "chi_homo", "chi_tot")}


@dataclass
class KeyRateBreakdown:
    probability: float
    I_AB: float
    chi_BE: float
    K: float
    lambda1: float
    lambda2: float
    lambda3: float
    noise: NoiseBreakdown
    clamps: int = 0          # symplectic eigenvalues nudged up to 1 (within tol)
    flags: tuple = field(default_factory=tuple)

    def as_dict(self):
        doc = {
            "probability": float(self.probability),
            "I_AB": float(self.I_AB),
            "chi_BE": float(self.chi_BE),
            "K": float(self.K),
            "lambda1": float(self.lambda1),
            "lambda2": float(self.lambda2),
            "lambda3": float(self.lambda3),
            "clamps": int(self.clamps),
            "flags": list(self.flags),
        }
        doc.update({f"noise.{k}": v for k, v in self.noise.as_dict().items()})
        return doc


def noise_model(params, v_a):
    """All channel/detector noise figures for modal variance V_A.

    T_A = 10^(-l L_AC / 10), likewise T_B;
    g = sqrt(2 (V_A - 1) / (T_B (V_A + 1))) minimizes the one-way thermal
    excess noise; T = T_A g^2 / 2;
    eps_th = (T_B / T_A)(eps_B - 2) + eps_A + 2 / T_A;
    chi_line = (1 - T)/T + eps_th; chi_homo = (v_el + 1 - eta)/eta;
    chi_tot = chi_line + 2 chi_homo / T_A.
    """
    t_a = 10.0 ** (-params.loss_rate * params.L_AC / 10.0)
    t_b = 10.0 ** (-params.loss_rate * params.L_BC / 10.0)
    if params.gain_policy == "paper-optimal":
        if v_a <= 1.0:
            raise ParameterError(
                f"the optimal gain needs V_A > 1, got V_A = {v_a}")
        g = math.sqrt(2.0 * (v_a - 1.0) / (t_b * (v_a + 1.0)))
    else:
        g = params.gain
        if g <= 0.0:
            raise ParameterError("explicit gain must be positive")
    t_norm = t_a * g * g / 2.0
    eps_th = (t_b / t_a) * (params.eps_B - 2.0) + params.eps_A + 2.0 / t_a
    chi_line = (1.0 - t_norm) / t_norm + eps_th
    chi_homo = (params.v_el + 1.0 - params.eta) / params.eta
    chi_tot = chi_line + 2.0 * chi_homo / t_a
    return NoiseBreakdown(T_A=t_a, T_B=t_b, g=g, T=t_norm, eps_th=eps_th,
                          chi_line=chi_line, chi_homo=chi_homo, chi_tot=chi_tot)


def evolve(sigma, noise):
    """Covariance of (A1, B1') after relay measurement and Bob's displacement.

    Alice's block is untouched, correlations scale by sqrt(T), Bob's block
    becomes T (V_B + chi_tot) per quadrature; Bob's mean scales by sqrt(T)
    (bookkeeping only — means never enter the key rate).
    """
    rt = math.sqrt(noise.T)
    mean = np.array(sigma.mean, dtype=float).copy()
    mean[2] *= rt
    mean[3] *= rt
    return QuadCovariance(
        vxA=sigma.vxA,
        vpA=sigma.vpA,
        vxB=noise.T * (sigma.vxB + noise.chi_tot),
        vpB=noise.T * (sigma.vpB + noise.chi_tot),
        vxC=rt * sigma.vxC,
        vpC=rt * sigma.vpC,
        mean=mean,
    )


def _conditional_variances(sigma):
    """Alice's per-quadrature variance conditioned on Bob's heterodyne."""
    out = []
    for v_a, v_b, v_c in ((sigma.vxA, sigma.vxB, sigma.vxC),
                          (sigma.vpA, sigma.vpB, sigma.vpC)):
        cond = v_a - v_c * v_c / (v_b + 1.0)
        if cond <= 0.0:
            raise PhysicalityError(
                f"non-positive conditional variance {cond} "
                f"(V_A={v_a}, V_B={v_b}, V_C={v_c})")
        out.append(cond)
    return tuple(out)


def mutual_information(sigma_evolved):
    """Heterodyne-heterodyne I_AB in bits/pulse on the evolved covariance."""
    cond_x, cond_p = _conditional_variances(sigma_evolved)
    ix = 0.5 * math.log2((sigma_evolved.vxA + 1.0) / (cond_x + 1.0))
    ip = 0.5 * math.log2((sigma_evolved.vpA + 1.0) / (cond_p + 1.0))
    return ix + ip


def symplectic_eigenvalues(sigma):
    """(lambda1, lambda2) of a two-mode x/p block covariance, lambda1 >= lambda2.

    Returns the moduli of the eigenvalues of i Omega Sigma (uniformly
    accurate), cross-validated against the invariant formula
    lambda^2 = (Delta +- sqrt(Delta^2 - 4 det S))/2 with
    Delta = det A + det B + 2 det C.  The invariant route loses half its
    digits when the spectrum nearly degenerates (pure states: the
    discriminant cancels catastrophically), so the agreement tolerance
    scales with that conditioning instead of being flat.  Values within
    1e-9 below 1 are clamped to 1 downstream; anything lower raises there.
    """
    det_a = sigma.vxA * sigma.vpA
    det_b = sigma.vxB * sigma.vpB
    det_c = sigma.vxC * sigma.vpC
    det_s = np.linalg.det(sigma.matrix)
    delta = det_a + det_b + 2.0 * det_c
    disc = delta * delta - 4.0 * det_s
    # rounding bound: delta^2 and det are each contaminated at relative
    # machine precision of their own magnitude scales (det through ||S||^4)
    scale = float(np.linalg.norm(sigma.matrix, 2))
    disc_err = 64.0 * np.finfo(float).eps * (delta * delta + scale ** 4)
    if disc < 0.0:
        if disc < -max(disc_err, 1e-9 * max(1.0, delta * delta)):
            raise PhysicalityError(
                f"Delta^2 - 4 det(Sigma) = {disc} is negative beyond tolerance")
        disc = 0.0
    root = math.sqrt(disc)
    lam_sq_invariant = (0.5 * (delta + root), 0.5 * (delta - root))
    if lam_sq_invariant[1] <= 0.0:
        raise PhysicalityError(
            f"squared symplectic eigenvalue {lam_sq_invariant[1]} <= 0")

    lam = np.sort(np.abs(np.linalg.eigvals(
        1j * _OMEGA @ sigma.matrix)))[::2][::-1]
    tol = 0.5 * math.sqrt(disc_err) + 1e-9 * max(1.0, lam_sq_invariant[0])
    if not np.allclose((lam[0] ** 2, lam[1] ** 2), lam_sq_invariant,
                       rtol=1e-9, atol=tol):
        raise InternalConsistencyError(
            "symplectic spectra disagree: invariant "
            f"{tuple(math.sqrt(v) for v in lam_sq_invariant)} vs "
            f"iOmegaS {tuple(lam)}")
    return (float(lam[0]), float(lam[1]))


_OMEGA = np.array([[0.0, 1.0, 0.0, 0.0],
                   [-1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [0.0, 0.0, -1.0, 0.0]])


def _clamp_lambda(lam, clamps):
    if lam >= 1.0:
        return lam, clamps
    if lam < 1.0 - LAMBDA_CLAMP_TOL:
        raise PhysicalityError(f"symplectic eigenvalue {lam} < 1 beyond tolerance")
    return 1.0, clamps + 1


def entropy_g(x):
    """Thermal-state entropy G(x) = (x+1) log2(x+1) - x log2 x, G(0) = 0."""
    if x < 0.0:
        if x < -1e-12:
            raise PhysicalityError(f"G(x) needs x >= 0, got {x}")
        return 0.0
    if x == 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def holevo(sigma_evolved, return_diagnostics=False):
    """Holevo bound chi_BE in bits/pulse for reverse reconciliation.

    chi = G[(l1-1)/2] + G[(l2-1)/2] - G[(l3-1)/2] with (l1, l2) from the
    evolved two-mode state and l3 = sqrt(Vcond_x * Vcond_p) from Alice's
    covariance conditioned on Bob's heterodyne outcome.
    """
    lam1, lam2 = symplectic_eigenvalues(sigma_evolved)
    cond_x, cond_p = _conditional_variances(sigma_evolved)
    lam3 = math.sqrt(cond_x * cond_p)
    clamps = 0
    lam1, clamps = _clamp_lambda(lam1, clamps)
    lam2, clamps = _clamp_lambda(lam2, clamps)
    lam3, clamps = _clamp_lambda(lam3, clamps)
    chi = entropy_g(0.5 * (lam1 - 1.0)) + entropy_g(0.5 * (lam2 - 1.0)) \
        - entropy_g(0.5 * (lam3 - 1.0))
    if return_diagnostics:
        return chi, (lam1, lam2, lam3), clamps
    return chi


def keyrate(spec, params, tmsv_baseline=False):
    """Full pipeline: state -> channel -> K = P (beta I_AB - chi_BE).

    With tmsv_baseline=True the heralding stage is bypassed: P = 1 and the
    source covariance is the analytic two-mode squeezed (coherent) matrix —
    the Gaussian benchmark the non-Gaussian states are compared against.
    Negative K is reported as computed; plotting layers clamp at zero.
    """
    flags = []
    if tmsv_baseline:
        prob = 1.0
        sigma = tmsc_covariance(spec.r, spec.d)
        flags.append("tmsv-baseline")
    else:
        prob = probability(spec)
        sigma = covariance(spec)
    noise = noise_model(params, v_a=spec.v_a)
    sigma_ev = evolve(sigma, noise)
    i_ab = mutual_information(sigma_ev)
    chi, lams, clamps = holevo(sigma_ev, return_diagnostics=True)
    k = prob * (params.beta * i_ab - chi)
    return KeyRateBreakdown(
        probability=prob, I_AB=i_ab, chi_BE=chi, K=k,
        lambda1=lams[0], lambda2=lams[1], lambda3=lams[2],
        noise=noise, clamps=clamps, flags=tuple(flags),
    )


def keyrate_at_distance(spec, params, L_AC, tmsv_baseline=False):
    """Convenience: keyrate with the Alice-relay distance overridden."""
    return keyrate(spec, replace(params, L_AC=L_AC), tmsv_baseline=tmsv_baseline)
