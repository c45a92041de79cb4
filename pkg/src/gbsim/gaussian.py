"""Covariance-matrix formalism for Gaussian optical states.

Conventions used throughout the package:

* quadratures are ordered q = (x_1..x_M, p_1..p_M)  ("xxpp");
* the vacuum covariance is the identity, so a squeezed vacuum with
  parameter r has covariance diag(e^{2r}, e^{-2r}) and a thermal state
  with mean photon number nbar has covariance (2*nbar + 1) * I;
* a physical covariance satisfies V + i*Omega >= 0 with
  Omega = [[0, I], [-I, 0]].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "omega",
    "CovarianceReport",
    "validate_covariance",
    "require_valid_covariance",
    "squeezed_input",
    "apply_loss",
    "apply_passive",
    "passive_symplectic",
    "squeeze_symplectic",
    "symplectic_inverse",
    "mean_photon",
    "reduced_covariance",
    "WilliamsonResult",
    "williamson",
    "GaussianUnitaryFactors",
    "bloch_messiah",
    "haar_unitary",
    "brickwork_unitary",
    "tmsv_cov",
    "CircuitSpec",
    "circuit_arrays",
    "build_circuit",
]

_EIG_TINY = 1e-12


def _mode_count(V: np.ndarray) -> int:
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {V.shape}")
    if V.shape[0] % 2:
        raise ValidationError(f"matrix dimension {V.shape[0]} is odd; expected 2M")
    return V.shape[0] // 2


def omega(modes: int) -> np.ndarray:
    """Symplectic form [[0, I], [-I, 0]] on `modes` modes (xxpp ordering)."""
    if modes < 1:
        raise ValidationError("modes must be >= 1")
    iden = np.eye(modes)
    zero = np.zeros((modes, modes))
    return np.block([[zero, iden], [-iden, zero]])


@dataclass(frozen=True)
class CovarianceReport:
    """Outcome of a physicality check of a covariance matrix."""

    ok: bool
    modes: int
    symmetry_error: float
    min_uncertainty_eig: float

    def message(self) -> str:
        if self.ok:
            return f"valid covariance on {self.modes} modes"
        return (
            f"invalid covariance on {self.modes} modes: "
            f"relative symmetry error {self.symmetry_error:.3e}, "
            f"min eig(V + i Omega) = {self.min_uncertainty_eig:.3e}"
        )


def validate_covariance(V: np.ndarray, atol: float = 1e-9) -> CovarianceReport:
    """Check symmetry and the uncertainty relation V + i*Omega >= -atol."""
    V = np.asarray(V, dtype=float)
    modes = _mode_count(V)
    scale = max(1.0, float(np.abs(V).max()))
    sym_err = float(np.abs(V - V.T).max()) / scale
    herm = V + 1j * omega(modes)
    min_eig = float(np.linalg.eigvalsh(herm).min())
    ok = sym_err <= 1e-12 and min_eig >= -atol
    return CovarianceReport(ok=ok, modes=modes, symmetry_error=sym_err, min_uncertainty_eig=min_eig)


def require_valid_covariance(V: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    report = validate_covariance(V, atol=atol)
    if not report.ok:
        raise ValidationError(report.message())
    return np.asarray(V, dtype=float)


def squeezed_input(r: Union[float, Sequence[float]]) -> np.ndarray:
    """Covariance of a product of squeezed vacua, diag(e^{2r}, e^{-2r})."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if not np.all(np.isfinite(r)):
        raise ValidationError("squeezing parameters must be finite")
    return np.diag(np.concatenate([np.exp(2.0 * r), np.exp(-2.0 * r)]))


def apply_loss(V: np.ndarray, eta: Union[float, Sequence[float]]) -> np.ndarray:
    """Pure-loss channel with per-mode transmission eta."""
    V = np.asarray(V, dtype=float)
    modes = _mode_count(V)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (modes,)).copy()
    if np.any(eta < 0.0) or np.any(eta > 1.0):
        raise ValidationError("transmission must lie in [0, 1]")
    g = np.sqrt(np.concatenate([eta, eta]))
    return g[:, None] * V * g[None, :] + np.diag(1.0 - g * g)


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic matrix [[Re U, -Im U], [Im U, Re U]] of a unitary."""
    U = np.asarray(U, dtype=complex)
    re, im = U.real, U.imag
    return np.block([[re, -im], [im, re]])


def squeeze_symplectic(r: Sequence[float]) -> np.ndarray:
    """Symplectic matrix of per-mode squeezers, diag(e^r, e^{-r})."""
    r = np.asarray(r, dtype=float)
    return np.diag(np.concatenate([np.exp(r), np.exp(-r)]))


def _require_unitary(U: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {U.shape}")
    err = float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())
    if err > tol:
        raise ValidationError(f"matrix is not unitary (error {err:.3e})")
    return U


def apply_passive(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Conjugate a covariance by the passive transformation of unitary U."""
    V = np.asarray(V, dtype=float)
    modes = _mode_count(V)
    U = _require_unitary(U)
    if U.shape[0] != modes:
        raise ValidationError("unitary size does not match the mode count")
    O = passive_symplectic(U)
    return O @ V @ O.T


def mean_photon(V: np.ndarray) -> float:
    """Average photon number Tr[V - I] / 4 of a zero-mean Gaussian state."""
    V = np.asarray(V, dtype=float)
    modes = _mode_count(V)
    return float((np.trace(V) - 2 * modes) / 4.0)


def reduced_covariance(V: np.ndarray, modes: Iterable[int]) -> np.ndarray:
    """Covariance of the state reduced to the given mode indices."""
    V = np.asarray(V, dtype=float)
    M = _mode_count(V)
    keep = np.asarray(list(modes), dtype=int)
    if keep.size == 0:
        raise ValidationError("mode subset must be nonempty")
    if keep.min() < 0 or keep.max() >= M:
        raise ValidationError("mode index out of range")
    idx = np.concatenate([keep, keep + M])
    return V[np.ix_(idx, idx)]


def symplectic_inverse(S: np.ndarray) -> np.ndarray:
    """Inverse of a symplectic matrix, -Omega S^T Omega (exactly symplectic)."""
    M = _mode_count(np.asarray(S))
    Om = omega(M)
    return -Om @ S.T @ Om


def _fix_phase(u: np.ndarray) -> np.ndarray:
    """Rotate a vector so its first significant component is real positive."""
    mags = np.abs(u)
    idx = int(np.argmax(mags > 1e-8 * mags.max()))
    ph = u[idx] / abs(u[idx])
    return u * np.conj(ph)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip a real vector so its first significant component is positive."""
    mags = np.abs(v)
    idx = int(np.argmax(mags > 1e-8 * mags.max()))
    return v if v[idx] > 0 else -v


@dataclass(frozen=True)
class WilliamsonResult:
    """Williamson normal form V = S diag(nu, nu) S^T with S symplectic."""

    S: np.ndarray
    nu: np.ndarray

    @property
    def thermal_means(self) -> np.ndarray:
        return (self.nu - 1.0) / 2.0

    def thermal_covariance(self) -> np.ndarray:
        return np.diag(np.concatenate([self.nu, self.nu]))

    def reconstruct(self) -> np.ndarray:
        return self.S @ self.thermal_covariance() @ self.S.T


def williamson(V: np.ndarray) -> WilliamsonResult:
    """Williamson decomposition of a positive definite covariance matrix.

    Computed from the spectral decomposition of the Hermitian matrix
    i V^{1/2} Omega V^{1/2}, whose eigenvalues are +-nu_i.  The symplectic
    eigenvalues are returned sorted descending; eigenvector phases follow a
    first-component-positive convention so the output is reproducible.
    """
    V = np.asarray(V, dtype=float)
    M = _mode_count(V)
    w, P = np.linalg.eigh((V + V.T) / 2.0)
    if w.min() <= _EIG_TINY:
        raise ValidationError(f"covariance is not positive definite (min eig {w.min():.3e})")
    R = (P * np.sqrt(w)) @ P.T
    H = 1j * (R @ omega(M) @ R)
    evals, evecs = np.linalg.eigh(H)
    order = np.argsort(evals)[::-1][:M]
    nu = evals[order]
    # Each +nu eigenvector u = (a + i b)/sqrt(2) yields a canonical pair (b, a).
    Q = np.empty((2 * M, 2 * M))
    for t, i in enumerate(order):
        u = _fix_phase(evecs[:, i])
        Q[:, 2 * t] = math.sqrt(2.0) * u.imag
        Q[:, 2 * t + 1] = math.sqrt(2.0) * u.real
    scale = 1.0 / np.sqrt(np.repeat(nu, 2))
    S_int = (R @ Q) * scale[None, :]
    # Reorder columns from (x1, p1, x2, p2, ...) to xxpp.
    cols = np.concatenate([2 * np.arange(M), 2 * np.arange(M) + 1])
    return WilliamsonResult(S=S_int[:, cols], nu=nu)


@dataclass(frozen=True)
class GaussianUnitaryFactors:
    """Passive-squeeze-passive factorization of a Gaussian unitary.

    The operator acts as U2 o S(r) o U1 with M x M unitaries u2, u1 and a
    real squeezing vector r; its symplectic matrix is
    passive(u2) @ squeeze(r) @ passive(u1).
    """

    u2: np.ndarray
    r: np.ndarray
    u1: np.ndarray

    @property
    def modes(self) -> int:
        return self.r.size

    def symplectic(self) -> np.ndarray:
        return passive_symplectic(self.u2) @ squeeze_symplectic(self.r) @ passive_symplectic(self.u1)


def _orthogonal_symplectic_unitary(O: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    M = O.shape[0] // 2
    W = O[:M, :M] + 1j * O[M:, :M]
    err = max(
        float(np.abs(O[:M, M:] + O[M:, :M]).max()),
        float(np.abs(O[:M, :M] - O[M:, M:]).max()),
        float(np.abs(W.conj().T @ W - np.eye(M)).max()),
    )
    if err > tol:
        raise ValidationError(f"matrix is not orthogonal symplectic (error {err:.3e})")
    return W


def bloch_messiah(S: np.ndarray, tol: float = 1e-10) -> GaussianUnitaryFactors:
    """Factor a symplectic matrix into passive, squeeze and passive layers.

    Uses the polar decomposition S = G O: the positive factor G is symplectic
    and diagonalizes into paired eigenvalues (e^r, e^{-r}) with an orthogonal
    symplectic eigenbasis, which supplies the outgoing passive unitary; the
    orthogonal remainder supplies the ingoing one.  Squeezings are returned
    nonnegative, sorted descending.
    """
    S = np.asarray(S, dtype=float)
    M = _mode_count(S)
    Om = omega(M)
    sympl_err = float(np.abs(S @ Om @ S.T - Om).max())
    if sympl_err > tol * max(1.0, float(np.abs(S).max()) ** 2):
        raise ValidationError(f"matrix is not symplectic (error {sympl_err:.3e})")

    w, P = np.linalg.eigh(S @ S.T)
    lam = np.sqrt(w)
    near = 1e-9
    sq_idx = [i for i in np.argsort(lam)[::-1] if lam[i] > 1.0 + near]
    unit_idx = [i for i in range(lam.size) if abs(lam[i] - 1.0) <= near]
    anti = lam.size - len(sq_idx) - len(unit_idx)
    if anti != len(sq_idx) or len(unit_idx) % 2:
        raise ValidationError("eigenvalues of S S^T do not pair into (l, 1/l)")

    vs = [_fix_sign(P[:, i]) for i in sq_idx]
    rs = [math.log(lam[i]) for i in sq_idx]

    # The near-unit eigenspace is Omega-invariant; greedily pick one member of
    # each (v, Omega v) pair to fill the remaining unsqueezed slots.
    if unit_idx:
        B = P[:, unit_idx].copy()
        while len(vs) < M:
            v = B[:, 0] / np.linalg.norm(B[:, 0])
            vs.append(_fix_sign(v))
            rs.append(0.0)
            drop = np.stack([v, Om @ v], axis=1)
            B = B - drop @ (drop.T @ B)
            if len(vs) < M:
                u_b, s_b, _ = np.linalg.svd(B, full_matrices=False)
                B = u_b[:, s_b > 1e-8]
    if len(vs) != M:
        raise ValidationError("failed to assemble a symplectic eigenbasis")

    Vx = np.stack(vs, axis=1)
    Q = np.hstack([Vx, -Om @ Vx])
    r = np.asarray(rs)
    inv_scale = np.concatenate([np.exp(-r), np.exp(r)])
    O1 = inv_scale[:, None] * (Q.T @ S)
    u2 = _orthogonal_symplectic_unitary(Q)
    u1 = _orthogonal_symplectic_unitary(O1)
    return GaussianUnitaryFactors(u2=u2, r=r, u1=u1)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary (QR of a complex Gaussian, phase-normalized)."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, rr = np.linalg.qr(z)
    d = np.diagonal(rr)
    return q * (d / np.abs(d))


def brickwork_unitary(modes: int, depth: int, rng: np.random.Generator) -> np.ndarray:
    """Nearest-neighbour brickwork of Haar-random two-mode blocks."""
    U = np.eye(modes, dtype=complex)
    for layer in range(depth):
        L = np.eye(modes, dtype=complex)
        for i in range(layer % 2, modes - 1, 2):
            L[np.ix_((i, i + 1), (i, i + 1))] = haar_unitary(2, rng)
        U = L @ U
    return U


def tmsv_cov(s: float) -> np.ndarray:
    """Covariance of a two-mode squeezed vacuum with parameter s."""
    c, sh = math.cosh(2.0 * s), math.sinh(2.0 * s)
    xx = np.array([[c, sh], [sh, c]])
    pp = np.array([[c, -sh], [-sh, c]])
    V = np.zeros((4, 4))
    V[:2, :2] = xx
    V[2:, 2:] = pp
    return V


@dataclass
class CircuitSpec:
    """Description of a squeezed-light circuit with loss.

    Either an explicit interferometer `unitary` or a named `ensemble` is
    given.  Ensembles: "global-haar" (seeded Haar unitary), "brickwork"
    (seeded brickwork of `depth` layers) and "tmsv-worst-case" (`pairs`
    two-mode squeezers laid across the center bipartition; r_in sets the
    pair squeezing and must be a scalar).
    """

    modes: int
    r_in: Union[float, Sequence[float]] = 0.0
    eta: Union[float, Sequence[float]] = 1.0
    unitary: Optional[np.ndarray] = None
    ensemble: Optional[str] = None
    depth: int = 0
    pairs: int = 0

    def __post_init__(self) -> None:
        if self.modes < 1:
            raise ValidationError("modes must be >= 1")
        if (self.unitary is None) == (self.ensemble is None):
            raise ValidationError("give exactly one of `unitary` or `ensemble`")
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), (self.modes,))
        if np.any(eta < 0.0) or np.any(eta > 1.0):
            raise ValidationError("transmission must lie in [0, 1]")


def _worst_case_unitary(modes: int, pairs: int) -> np.ndarray:
    U = np.eye(modes, dtype=complex)
    inv = 1.0 / math.sqrt(2.0)
    for k in range(pairs):
        i, j = k, modes - 1 - k
        U[i, i] = inv
        U[i, j] = inv
        U[j, i] = inv
        U[j, j] = -inv
    return U


def circuit_arrays(spec: CircuitSpec, seed: Optional[int] = None) -> dict:
    """Resolve a circuit spec into (r, U, eta, V0, V) arrays."""
    M = spec.modes
    eta = np.broadcast_to(np.asarray(spec.eta, dtype=float), (M,)).copy()
    if spec.unitary is not None:
        U = _require_unitary(spec.unitary)
        if U.shape[0] != M:
            raise ValidationError("unitary size does not match the mode count")
        r = np.broadcast_to(np.asarray(spec.r_in, dtype=float), (M,)).copy()
    elif spec.ensemble == "global-haar":
        rng = np.random.default_rng(seed)
        U = haar_unitary(M, rng)
        r = np.broadcast_to(np.asarray(spec.r_in, dtype=float), (M,)).copy()
    elif spec.ensemble == "brickwork":
        rng = np.random.default_rng(seed)
        U = brickwork_unitary(M, spec.depth, rng)
        r = np.broadcast_to(np.asarray(spec.r_in, dtype=float), (M,)).copy()
    elif spec.ensemble == "tmsv-worst-case":
        K = spec.pairs
        if K < 1 or 2 * K > M:
            raise ValidationError("need 1 <= pairs and 2*pairs <= modes")
        s = np.asarray(spec.r_in, dtype=float)
        if s.ndim != 0:
            raise ValidationError("tmsv-worst-case takes a scalar r_in")
        r = np.zeros(M)
        r[:K] = float(s)
        r[M - K:] = -float(s)
        # Pair k with mode M-1-k so every pair straddles the center cut;
        # opposite-sign squeezers through a 50:50 splitter form one TMSV.
        U = _worst_case_unitary(M, K)
    else:
        raise ValidationError(f"unknown ensemble {spec.ensemble!r}")

    V0 = squeezed_input(r)
    V = apply_loss(apply_passive(V0, U), eta)
    return {"r": r, "U": U, "eta": eta, "V0": V0, "V": V}


def build_circuit(spec: CircuitSpec, seed: Optional[int] = None) -> np.ndarray:
    """Output covariance of squeezed inputs through a lossy interferometer."""
    return circuit_arrays(spec, seed)["V"]
