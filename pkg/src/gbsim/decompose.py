"""Splitting an output covariance into a pure part and classical noise.

V = V_p + W with V_p a pure-state covariance and W >= 0 a classical
random-displacement covariance.  The optimal split minimizes Tr[V_p]
subject to V - V_p >= 0 and V_p >= i*Omega; the single-mode case has a
closed form and the general case is solved by a log-barrier interior-point
method on the pure-part variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .exceptions import ConvergenceError, ResourceCapError, ValidationError
from .gaussian import (
    mean_photon,
    omega,
    require_valid_covariance,
    williamson,
)

__all__ = [
    "SingleModeSplit",
    "decompose_single_mode",
    "infinite_squeezing_limit",
    "Decomposition",
    "williamson_split",
    "decompose_sdp",
    "actual_squeezed_photons",
]

_MAX_MODES = 60


@dataclass(frozen=True)
class SingleModeSplit:
    """Closed-form split of one lossy squeezed mode."""

    r: float
    eta: float
    s: float
    w_xx: float


def decompose_single_mode(r: float, eta: float) -> SingleModeSplit:
    """Optimal single-mode split: e^{-2s} = eta e^{-2r} + 1 - eta.

    The leftover classical noise sits entirely in the x quadrature,
    w_xx = eta e^{2r} + 1 - eta - e^{2s}.
    """
    if r < 0:
        raise ValidationError("input squeezing must be nonnegative")
    if not 0.0 <= eta <= 1.0:
        raise ValidationError("transmission must lie in [0, 1]")
    s = -0.5 * math.log(eta * math.exp(-2.0 * r) + 1.0 - eta)
    w_xx = eta * math.exp(2.0 * r) + 1.0 - eta - math.exp(2.0 * s)
    return SingleModeSplit(r=r, eta=eta, s=s, w_xx=max(w_xx, 0.0))


def infinite_squeezing_limit(eta: float) -> float:
    """Actual squeezing surviving infinite input squeezing, -log(1-eta)/2."""
    if not 0.0 <= eta < 1.0:
        raise ValidationError("transmission must lie in [0, 1)")
    return -0.5 * math.log(1.0 - eta)


@dataclass
class Decomposition:
    """Result of a V = V_p + W split."""

    v_p: np.ndarray
    w: np.ndarray
    objective: float
    method: str
    iterations: int = 0
    residuals: Dict[str, float] = field(default_factory=dict)
    converged: bool = True

    @property
    def squeezed_photons(self) -> float:
        return mean_photon(self.v_p)


def _split_residuals(V: np.ndarray, v_p: np.ndarray, w: np.ndarray) -> Dict[str, float]:
    M = V.shape[0] // 2
    recon = float(np.abs(V - v_p - w).max())
    w_min = float(np.linalg.eigvalsh((w + w.T) / 2.0).min())
    vp_min = float(np.linalg.eigvalsh(v_p + 1j * omega(M)).min())
    purity = float(np.abs(williamson(v_p).nu - 1.0).max())
    return {
        "reconstruction": recon,
        "w_min_eig": w_min,
        "vp_uncertainty_min_eig": vp_min,
        "purity_deviation": purity,
    }


def williamson_split(V: np.ndarray) -> Decomposition:
    """Split via the Williamson normal form: V_p = S S^T, W = S (D - I) S^T.

    Always feasible but suboptimal for lossy states; used as the interior
    point warm start and as a comparison baseline.
    """
    V = require_valid_covariance(V)
    wl = williamson(V)
    v_p = wl.S @ wl.S.T
    v_p = (v_p + v_p.T) / 2.0
    w = V - v_p
    w = (w + w.T) / 2.0
    return Decomposition(
        v_p=v_p,
        w=w,
        objective=float(np.trace(v_p)),
        method="williamson",
        residuals=_split_residuals(V, v_p, w),
    )


def actual_squeezed_photons(v_p: np.ndarray) -> float:
    """Mean photon number of the pure part, Tr[V_p - I] / 4."""
    return mean_photon(v_p)


def _sym_basis(n: int) -> np.ndarray:
    """Orthonormal basis of real symmetric n x n matrices (Frobenius)."""
    dim = n * (n + 1) // 2
    E = np.zeros((dim, n, n))
    t = 0
    inv = 1.0 / math.sqrt(2.0)
    for i in range(n):
        E[t, i, i] = 1.0
        t += 1
        for j in range(i + 1, n):
            E[t, i, j] = inv
            E[t, j, i] = inv
            t += 1
    return E


def _min_eig_real(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((A + A.T) / 2.0).min())


def _min_eig_herm(B: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((B + B.conj().T) / 2.0).min())


class _BarrierProblem:
    """min t*Tr[C Y] - log det(D - Y) - log det(Y + i Omega) over symmetric Y."""

    def __init__(self, D: np.ndarray, C: np.ndarray):
        self.D = D
        self.C = C
        self.n = D.shape[0]
        self.Om = omega(self.n // 2)
        self.E = _sym_basis(self.n)

    def feasible(self, Y: np.ndarray) -> bool:
        return _min_eig_real(self.D - Y) > 0 and _min_eig_herm(Y + 1j * self.Om) > 0

    def value(self, t: float, Y: np.ndarray) -> float:
        sa, la = np.linalg.slogdet(self.D - Y)
        sb, lb = np.linalg.slogdet(Y + 1j * self.Om)
        if sa <= 0 or sb.real <= 0:
            return math.inf
        return t * float(np.sum(self.C * Y)) - la - float(lb.real)

    def newton_step(self, t: float, Y: np.ndarray):
        A = self.D - Y
        B = Y + 1j * self.Om
        Ai = np.linalg.inv(A)
        Bi = np.linalg.inv(B)
        Ai = (Ai + Ai.T) / 2.0
        BiR = (Bi + Bi.conj().T).real / 2.0
        grad = t * self.C + Ai - BiR
        grad = (grad + grad.T) / 2.0
        # Hessian on the symmetric-matrix basis: H -> Ai H Ai + Re(Bi H Bi).
        opE = np.einsum("ij,bjk,kl->bil", Ai, self.E, Ai)
        opE = opE + np.real(np.einsum("ij,bjk,kl->bil", Bi, self.E.astype(complex), Bi))
        hess = np.tensordot(opE, self.E, axes=([1, 2], [1, 2]))
        hess = (hess + hess.T) / 2.0
        g = np.tensordot(self.E, grad, axes=([1, 2], [0, 1]))
        try:
            coeff = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            coeff = np.linalg.lstsq(hess, -g, rcond=None)[0]
        step = np.tensordot(coeff, self.E, axes=(0, 0))
        decrement_sq = float(-g @ coeff)
        return step, decrement_sq

    def minimize(self, t: float, Y: np.ndarray, tol: float = 1e-11, max_iter: int = 60):
        iters = 0
        for _ in range(max_iter):
            step, dec_sq = self.newton_step(t, Y)
            iters += 1
            if dec_sq < tol:
                break
            base = self.value(t, Y)
            slope = -dec_sq
            alpha = 1.0
            while alpha > 1e-14:
                cand = Y + alpha * step
                if self.feasible(cand) and self.value(t, cand) <= base + 0.25 * alpha * slope:
                    break
                alpha *= 0.5
            if alpha <= 1e-14:
                break
            Y = Y + alpha * step
        return Y, iters


def decompose_sdp(
    V: np.ndarray,
    tol: float = 1e-6,
    feas_tol: float = 1e-8,
    purity_tol: float = 1e-5,
    max_t: float = 1e13,
) -> Decomposition:
    """Minimum-photon pure/classical split by a log-barrier interior method.

    Works in the Williamson frame of V, where the pure directions of V are
    exactly pinned (their noise rows must vanish) and the mixed block is
    solved with Newton steps under the two barriers -log det(V - V_p) and
    -log det(V_p + i Omega), with a 10x barrier schedule warm started from
    the Williamson split.  `tol` is the relative objective tolerance and
    purity is certified afterwards; the barrier is tightened until the
    symplectic eigenvalues of V_p sit within `purity_tol` of 1.
    """
    V = require_valid_covariance(V)
    M = V.shape[0] // 2
    if M > _MAX_MODES:
        raise ResourceCapError(f"dense splitter capped at {_MAX_MODES} modes, got {M}")
    wl = williamson(V)
    nu, S = wl.nu, wl.S

    pure_cut = 1e-7
    mixed = np.flatnonzero(nu > 1.0 + pure_cut)
    if mixed.size == 0:
        v_p = V.copy()
        w = np.zeros_like(V)
        return Decomposition(
            v_p=v_p,
            w=w,
            objective=float(np.trace(v_p)),
            method="sdp",
            residuals=_split_residuals(V, v_p, w),
        )

    idx = np.concatenate([mixed, mixed + M])
    m = mixed.size
    D = np.diag(np.concatenate([nu[mixed], nu[mixed]]))
    C_frame = S.T @ S
    C = C_frame[np.ix_(idx, idx)]
    C = (C + C.T) / 2.0

    prob = _BarrierProblem(D, C)
    Y = np.eye(2 * m) + 0.1 * (D - np.eye(2 * m))

    obj_scale = float(np.trace(V))
    t = 1.0
    iterations = 0
    converged = False
    theta = 2 * (2 * m)  # total barrier parameter of the two cones
    while True:
        Y, it = prob.minimize(t, Y)
        iterations += it
        gap = theta / t
        if gap <= tol * obj_scale * 0.01:
            Y_frame = np.eye(2 * M)
            Y_frame[np.ix_(idx, idx)] = Y
            v_p = S @ Y_frame @ S.T
            v_p = (v_p + v_p.T) / 2.0
            purity = float(np.abs(williamson(v_p).nu - 1.0).max())
            if purity <= purity_tol:
                converged = True
                break
        if t >= max_t:
            Y_frame = np.eye(2 * M)
            Y_frame[np.ix_(idx, idx)] = Y
            v_p = S @ Y_frame @ S.T
            v_p = (v_p + v_p.T) / 2.0
            break
        t *= 10.0

    w = V - v_p
    w = (w + w.T) / 2.0
    res = _split_residuals(V, v_p, w)
    dec = Decomposition(
        v_p=v_p,
        w=w,
        objective=float(np.trace(v_p)),
        method="sdp",
        iterations=iterations,
        residuals=res,
        converged=converged,
    )
    if not converged:
        raise ConvergenceError(
            "barrier did not certify optimality/purity before the t cap; "
            f"residuals: {res}"
        )
    if res["w_min_eig"] < -feas_tol or res["vp_uncertainty_min_eig"] < -feas_tol:
        raise ConvergenceError(f"feasibility violated beyond {feas_tol}: {res}")
    return dec
