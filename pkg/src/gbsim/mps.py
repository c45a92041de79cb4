"""Direct matrix product state construction for pure Gaussian states.

Across every bond the reduced state on the right block is a product of
thermal modes rotated by a Gaussian unitary, so the Schmidt vectors are
photon-number states of those thermal modes and the Schmidt weights are
exact products of geometric laws.  Tensor entries are Fock matrix elements
of the composite unitary that maps one bond's eigenbasis into the next,
each one a single hafnian evaluation.
"""
from __future__ import annotations

import heapq
import json
import math
import os
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ResourceCapError, ValidationError
from .gaussian import (
    GaussianUnitaryFactors,
    bloch_messiah,
    reduced_covariance,
    require_valid_covariance,
    symplectic_inverse,
    williamson,
)
from .hafnian import build_sigma, hafnian_batch, repeat_pattern

__all__ = [
    "BondSpectrum",
    "bond_spectrum",
    "top_thermal_patterns",
    "TruncationReport",
    "MpsState",
    "build_mps",
    "truncation_error",
    "contract_amplitude",
    "save_mps",
    "load_mps",
]

_LAMBDA_FLOOR = 1e-12
_NBAR_FLOOR = 1e-15
_MAGIC_TENSOR = b"GBSMPS1\x00"
_MAGIC_LAMBDA = b"GBSLAM1\x00"
_FORMAT_VERSION = 1


def top_thermal_patterns(
    nbar: Sequence[float],
    max_count: Optional[int] = None,
    target_mass: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Highest-weight photon patterns of a product of thermal modes.

    Weights are p(n) = prod_i nbar_i^{n_i} / (nbar_i + 1)^{n_i + 1}.  Best
    first search over single-coordinate increments (nondecreasing frontier
    index, so each pattern is generated once); ties broken toward the
    lexicographically smallest pattern.  Stops after `max_count` patterns
    or once the kept mass reaches `target_mass`, whichever comes first.
    """
    nbar = np.asarray(nbar, dtype=float)
    if np.any(nbar < -1e-9):
        raise ValidationError("thermal means must be nonnegative")
    if max_count is None and target_mass is None:
        raise ValidationError("give max_count and/or target_mass")
    active = np.flatnonzero(nbar > _NBAR_FLOOR)
    ratios = nbar[active] / (nbar[active] + 1.0)
    log_ratios = np.log(ratios) if active.size else np.zeros(0)
    log_base = float(-np.sum(np.log1p(np.maximum(nbar, 0.0))))

    zero = tuple([0] * active.size)
    heap = [(0.0, zero, 0)]  # (-relative log weight, pattern, frontier)
    patterns: List[tuple] = []
    logws: List[float] = []
    mass = 0.0
    while heap:
        neg_logw, pat, frontier = heapq.heappop(heap)
        patterns.append(pat)
        logws.append(log_base - neg_logw)
        mass += math.exp(log_base - neg_logw)
        if max_count is not None and len(patterns) >= max_count:
            break
        if target_mass is not None and mass >= target_mass:
            break
        for j in range(frontier, active.size):
            child = list(pat)
            child[j] += 1
            heapq.heappush(heap, (neg_logw - log_ratios[j], tuple(child), j))

    full = np.zeros((len(patterns), nbar.size), dtype=int)
    if active.size:
        full[:, active] = np.asarray(patterns, dtype=int)
    return full, np.exp(np.asarray(logws))


@dataclass(frozen=True)
class BondSpectrum:
    """Thermal means and top Schmidt weights across one bipartition."""

    nbar: np.ndarray
    patterns: np.ndarray  # (chi, modes right of the bond)
    weights: np.ndarray  # descending, lambda = sqrt(weight)

    @property
    def lambdas(self) -> np.ndarray:
        return np.sqrt(self.weights)


def bond_spectrum(V_p: np.ndarray, bond: int, chi: int) -> BondSpectrum:
    """Schmidt data of the cut after mode `bond` (1-based, 1 <= bond <= M-1)."""
    V_p = require_valid_covariance(V_p)
    M = V_p.shape[0] // 2
    if not 1 <= bond <= M - 1:
        raise ValidationError(f"bond must lie in [1, {M - 1}]")
    if chi < 1:
        raise ValidationError("chi must be >= 1")
    wl = williamson(reduced_covariance(V_p, range(bond, M)))
    nbar = wl.thermal_means
    patterns, weights = top_thermal_patterns(nbar, max_count=chi)
    return BondSpectrum(nbar=nbar, patterns=patterns, weights=weights)


@dataclass(frozen=True)
class TruncationReport:
    """Per-bond squared singular value loss of a built chain."""

    bond_losses: np.ndarray  # entry b-1 is the loss at bond b (1-based bonds)
    center_bond: int
    max_pattern_total: int

    @property
    def center_error(self) -> float:
        if self.bond_losses.size == 0:
            return 0.0
        return float(self.bond_losses[self.center_bond - 1])


def truncation_error(report: TruncationReport) -> float:
    """Lost squared singular value weight at the center bipartition."""
    return report.center_error


@dataclass
class MpsState:
    """Canonical-form chain Gamma^[1] l^[1] Gamma^[2] ... l^[M-1] Gamma^[M].

    gammas[k] has shape (d, chi_left, chi_right) with chi_0 = chi_M = 1;
    lambdas[b] holds the bond-(b+1) singular values.  Contraction of the
    chain with one local index fixed per site yields state amplitudes.
    """

    gammas: List[np.ndarray]
    lambdas: List[np.ndarray]
    local_dim: int
    bond_patterns: Optional[List[np.ndarray]] = None
    report: Optional[TruncationReport] = None

    @property
    def modes(self) -> int:
        return len(self.gammas)

    @property
    def bond_dims(self) -> List[int]:
        return [g.shape[2] for g in self.gammas[:-1]]


def _embed_identity_first(S: np.ndarray) -> np.ndarray:
    """Embed a symplectic on modes 2..m of an m-mode register (identity on 1)."""
    m_small = S.shape[0] // 2
    m = m_small + 1
    out = np.eye(2 * m)
    idx = np.concatenate([np.arange(1, m), np.arange(1, m) + m])
    out[np.ix_(idx, idx)] = S
    return out


def build_mps(
    V_p: np.ndarray,
    chi: int,
    d: int,
    max_hafnian: int = 40,
    purity_tol: float = 1e-4,
) -> MpsState:
    """Build the photon-basis MPS of a pure Gaussian state.

    chi bounds the number of Schmidt vectors kept per bond and d is the
    local Fock cutoff.  Entries whose bond weight has lambda below 1e-12
    are zeroed rather than divided.  Raises if an entry would need a
    hafnian larger than `max_hafnian` (reporting the offending patterns).
    """
    V_p = require_valid_covariance(V_p)
    M = V_p.shape[0] // 2
    if chi < 1 or d < 2:
        raise ValidationError("need chi >= 1 and d >= 2")
    wl_full = williamson(V_p)
    if np.abs(wl_full.nu - 1.0).max() > purity_tol:
        raise ValidationError(
            f"state is not pure enough (max |nu - 1| = {np.abs(wl_full.nu - 1.0).max():.3e})"
        )

    # One Williamson per suffix k..M; bond b reuses the suffix starting at b+1.
    wls = [wl_full] + [williamson(reduced_covariance(V_p, range(k, M))) for k in range(1, M)]

    bond_pats: List[np.ndarray] = [np.zeros((1, M), dtype=int)]
    lambdas: List[np.ndarray] = []
    losses = np.zeros(max(M - 1, 1))
    for b in range(1, M):
        pats, weights = top_thermal_patterns(wls[b].thermal_means, max_count=chi)
        bond_pats.append(pats)
        lambdas.append(np.sqrt(weights))
        losses[b - 1] = max(0.0, 1.0 - float(weights.sum()))

    gammas: List[np.ndarray] = []
    l_max = 0
    for k in range(M):
        left = bond_pats[k]
        if k < M - 1:
            right = bond_pats[k + 1]
            comp = symplectic_inverse(_embed_identity_first(wls[k + 1].S)) @ wls[k].S
        else:
            right = np.zeros((1, 0), dtype=int)
            comp = wls[M - 1].S
        factors = bloch_messiah(comp)
        tensor = _site_tensor(factors, d, left, right, max_hafnian)
        if k < M - 1:
            lam = lambdas[k]
            safe = np.where(lam > _LAMBDA_FLOOR, lam, 1.0)
            tensor = tensor * np.where(lam > _LAMBDA_FLOOR, 1.0 / safe, 0.0)[None, None, :]
        gammas.append(tensor)
        l_max = max(l_max, int(left.sum(axis=1).max()), int(right.sum(axis=1).max()))

    report = TruncationReport(
        bond_losses=losses if M > 1 else np.zeros(0),
        center_bond=max(M // 2, 1),
        max_pattern_total=l_max,
    )
    return MpsState(
        gammas=gammas,
        lambdas=lambdas,
        local_dim=d,
        bond_patterns=bond_pats,
        report=report,
    )


def _site_tensor(
    factors: GaussianUnitaryFactors,
    d: int,
    left: np.ndarray,
    right: np.ndarray,
    max_hafnian: int,
) -> np.ndarray:
    """Fill one site: entries <(n, right_pat)| composite |left_pat>."""
    sigma = build_sigma(factors)
    log_cosh = float(np.sum(np.log(np.cosh(factors.r))))
    n_left, n_right = left.shape[0], right.shape[0]
    left_tot = left.sum(axis=1)
    right_tot = right.sum(axis=1)
    tensor = np.zeros((d, n_left, n_right), dtype=complex)

    jobs = {}
    for n in range(d):
        for b in range(n_right):
            for a in range(n_left):
                tot = n + int(right_tot[b]) + int(left_tot[a])
                if tot % 2:
                    continue
                if tot > max_hafnian:
                    raise ResourceCapError(
                        f"tensor entry (n={n}, right={right[b]}, left={left[a]}) needs a "
                        f"hafnian of size {tot} > cap {max_hafnian}"
                    )
                jobs.setdefault(tot, []).append((n, a, b))

    for tot, items in sorted(jobs.items()):
        stack = np.empty((len(items), tot, tot), dtype=complex)
        logs = np.empty(len(items))
        for t, (n, a, b) in enumerate(items):
            bra = np.concatenate([[n], right[b]])
            ket = left[a]
            stack[t] = repeat_pattern(sigma, bra, ket)
            lg = math.lgamma(n + 1) + _sum_lgamma(right[b]) + _sum_lgamma(ket)
            logs[t] = 0.5 * (lg + log_cosh)
        vals = hafnian_batch(stack, max_size=max_hafnian) * np.exp(-logs)
        for t, (n, a, b) in enumerate(items):
            tensor[n, a, b] = vals[t]
    return tensor


def _sum_lgamma(pattern: np.ndarray) -> float:
    return float(sum(math.lgamma(int(x) + 1) for x in pattern))


def contract_amplitude(mps: MpsState, m: Sequence[int]) -> complex:
    """Amplitude of photon pattern m by left-to-right chain contraction."""
    m = np.asarray(m, dtype=int)
    if m.size != mps.modes:
        raise ValidationError("pattern length must equal the mode count")
    if np.any(m < 0) or np.any(m >= mps.local_dim):
        raise ValidationError("pattern entry outside the local cutoff")
    vec = mps.gammas[0][m[0], 0, :]
    for k in range(1, mps.modes):
        vec = (vec * mps.lambdas[k - 1]) @ mps.gammas[k][m[k]]
    return complex(vec[0])


def save_mps(mps: MpsState, directory: str) -> None:
    """Persist a chain: one tensor file per mode, one singular file per bond.

    Tensor files carry a header (magic, version, site, d, chi_left,
    chi_right as little-endian uint32) followed by complex128 entries in
    row-major order with the local index slowest.
    """
    os.makedirs(directory, exist_ok=True)
    for k, gam in enumerate(mps.gammas):
        path = os.path.join(directory, f"tensor_{k:04d}.bin")
        d, cl, cr = gam.shape
        with open(path, "wb") as fh:
            fh.write(_MAGIC_TENSOR)
            fh.write(struct.pack("<IIIII", _FORMAT_VERSION, k, d, cl, cr))
            fh.write(np.ascontiguousarray(gam, dtype=np.complex128).tobytes())
    for b, lam in enumerate(mps.lambdas, start=1):
        path = os.path.join(directory, f"lambda_{b:04d}.bin")
        with open(path, "wb") as fh:
            fh.write(_MAGIC_LAMBDA)
            fh.write(struct.pack("<III", _FORMAT_VERSION, b, lam.size))
            fh.write(np.ascontiguousarray(lam, dtype=np.float64).tobytes())
    manifest = {
        "modes": mps.modes,
        "local_dim": mps.local_dim,
        "bond_dims": mps.bond_dims,
        "center_error": mps.report.center_error if mps.report else None,
        "bond_losses": list(map(float, mps.report.bond_losses)) if mps.report else None,
        "center_bond": mps.report.center_bond if mps.report else None,
        "max_pattern_total": mps.report.max_pattern_total if mps.report else None,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_mps(directory: str) -> MpsState:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    M = manifest["modes"]
    gammas = []
    for k in range(M):
        path = os.path.join(directory, f"tensor_{k:04d}.bin")
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _MAGIC_TENSOR:
                raise ValidationError(f"{path}: bad magic")
            version, site, d, cl, cr = struct.unpack("<IIIII", fh.read(20))
            if version != _FORMAT_VERSION or site != k:
                raise ValidationError(f"{path}: bad header")
            gam = np.frombuffer(fh.read(), dtype=np.complex128).reshape(d, cl, cr)
        gammas.append(gam.copy())
    lambdas = []
    for b in range(1, M):
        path = os.path.join(directory, f"lambda_{b:04d}.bin")
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _MAGIC_LAMBDA:
                raise ValidationError(f"{path}: bad magic")
            version, bond, size = struct.unpack("<III", fh.read(12))
            if version != _FORMAT_VERSION or bond != b:
                raise ValidationError(f"{path}: bad header")
            lam = np.frombuffer(fh.read(), dtype=np.float64)
            if lam.size != size:
                raise ValidationError(f"{path}: truncated data")
        lambdas.append(lam.copy())
    report = None
    if manifest.get("bond_losses") is not None:
        report = TruncationReport(
            bond_losses=np.asarray(manifest["bond_losses"], dtype=float),
            center_bond=int(manifest["center_bond"]),
            max_pattern_total=int(manifest["max_pattern_total"]),
        )
    return MpsState(
        gammas=gammas,
        lambdas=lambdas,
        local_dim=int(manifest["local_dim"]),
        bond_patterns=None,
        report=report,
    )
