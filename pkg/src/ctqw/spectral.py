"""Hermitian validation, deterministic eigendecomposition, eigenspace grouping
and spectral-gap reports.

Conventions fixed here and relied on everywhere else:

* eigenvalues ascending, eigenvectors as columns, global phase fixed so the
  first component above threshold is real and positive;
* degeneracy grouping at an absolute tolerance (default 1e-8 times the
  spectral range), greedy over adjacent gaps and validated both ways;
* gap reports always work on group representative energies, never raw
  eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousDegeneracyError,
    EmptyOperatorError,
    GapUndefinedError,
    NonHermitianError,
    ValidationError,
)

__all__ = [
    "HermitianOperator",
    "SpectralDecomposition",
    "EigenspacePartition",
    "GapReport",
    "hermitian",
    "decompose",
    "group_eigenspaces",
    "gaps",
    "default_degeneracy_tol",
]

#: relative tolerance for the hermiticity check
TOL_HERM = 1e-10
#: Frobenius tolerance (relative) for reconstruction checks
TOL_RECON = 1e-9
#: phase convention: first component with modulus above this is made real positive
PHASE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class HermitianOperator:
    """A validated Hermitian matrix.

    entries is the symmetrized matrix 0.5 * (H + H^dagger); construction
    rejects input whose asymmetry exceeds TOL_HERM relative to the largest
    entry magnitude.
    """

    entries: np.ndarray
    dim: int

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise ValidationError(
                f"entries shape {self.entries.shape} does not match dim {self.dim}"
            )


def hermitian(matrix: np.ndarray) -> HermitianOperator:
    """Validate and symmetrize a matrix into a HermitianOperator.

    Raises
    ------
    EmptyOperatorError
        for 0 x 0 input.
    NonHermitianError
        if |H - H^dagger| exceeds TOL_HERM relative to max|H|; the message
        names the worst offending entry pair.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        raise EmptyOperatorError("operator has dimension zero")
    m = m.astype(np.complex128, copy=False)
    scale = np.max(np.abs(m))
    asym = np.abs(m - m.conj().T)
    worst = np.max(asym)
    if scale > 0 and worst > TOL_HERM * scale:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise NonHermitianError(
            f"matrix is not Hermitian: entry ({i},{j})={m[i, j]:.6g} vs "
            f"({j},{i})*={np.conj(m[j, i]):.6g}, asymmetry {worst:.3g} "
            f"exceeds {TOL_HERM:g} * max|H| = {TOL_HERM * scale:.3g}"
        )
    sym = 0.5 * (m + m.conj().T)
    return HermitianOperator(entries=sym, dim=sym.shape[0])


def _as_operator(h) -> HermitianOperator:
    if isinstance(h, HermitianOperator):
        return h
    return hermitian(np.asarray(h))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of H."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    operator: HermitianOperator

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def spectral_range(self) -> float:
        if self.dim < 2:
            return 0.0
        return float(self.eigenvalues[-1] - self.eigenvalues[0])


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first component above threshold is real positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > PHASE_THRESHOLD)
        if nz.size == 0:
            continue
        pivot = col[nz[0]]
        out[:, j] = col * (np.conj(pivot) / np.abs(pivot))
    return out


def decompose(h) -> SpectralDecomposition:
    """Deterministic eigendecomposition of a Hermitian operator.

    Postconditions (checked): eigenvalues ascending; eigenvector columns
    orthonormal; V diag(E) V^dagger reconstructs H within TOL_RECON relative
    Frobenius error.
    """
    op = _as_operator(h)
    evals, evecs = np.linalg.eigh(op.entries)
    evecs = _fix_phases(evecs)
    dec = SpectralDecomposition(eigenvalues=evals, eigenvectors=evecs, operator=op)
    _check_reconstruction(dec)
    return dec


def _check_reconstruction(dec: SpectralDecomposition) -> None:
    v, e = dec.eigenvectors, dec.eigenvalues
    gram = v.conj().T @ v
    ortho_err = np.max(np.abs(gram - np.eye(dec.dim)))
    if ortho_err > 1e-10:
        raise ValidationError(f"eigenvectors not orthonormal: error {ortho_err:.3g}")
    recon = (v * e) @ v.conj().T
    scale = max(np.linalg.norm(dec.operator.entries), 1.0)
    err = np.linalg.norm(recon - dec.operator.entries) / scale
    if err > TOL_RECON:
        raise ValidationError(f"spectral reconstruction error {err:.3g} exceeds {TOL_RECON:g}")


@dataclass(frozen=True)
class EigenspacePartition:
    """Eigenvalues clustered into (near-)degenerate groups.

    groups holds index tuples into the decomposition ordering; energies holds
    one representative (mean) energy per group, ascending.
    """

    decomposition: SpectralDecomposition
    groups: tuple[tuple[int, ...], ...]
    energies: np.ndarray
    tol_degen: float

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def projector(self, g: int) -> np.ndarray:
        """Orthogonal projector onto group g's eigenspace."""
        cols = self.decomposition.eigenvectors[:, list(self.groups[g])]
        return cols @ cols.conj().T

    def group_of(self, eigen_index: int) -> int:
        for g, members in enumerate(self.groups):
            if eigen_index in members:
                return g
        raise IndexError(f"eigen index {eigen_index} out of range")


def default_degeneracy_tol(dec: SpectralDecomposition) -> float:
    """1e-8 times the spectral range (absolute floor 1e-12 for flat spectra)."""
    return max(1e-8 * dec.spectral_range, 1e-12)


def group_eigenspaces(dec: SpectralDecomposition, tol_degen: float | None = None) -> EigenspacePartition:
    """Cluster eigenvalues into groups separated by more than tol_degen.

    Greedy over adjacent gaps; afterwards both invariants are enforced:
    within-group spread <= tol_degen and between-group gap > tol_degen.
    A spectrum violating both simultaneously (a chain of near-ties wider than
    the tolerance) raises AmbiguousDegeneracyError.
    """
    if tol_degen is None:
        tol_degen = default_degeneracy_tol(dec)
    if tol_degen < 0:
        raise ValidationError(f"tol_degen must be non-negative, got {tol_degen}")
    e = dec.eigenvalues
    groups: list[list[int]] = [[0]]
    for i in range(1, e.shape[0]):
        if e[i] - e[groups[-1][-1]] <= tol_degen:
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        spread = e[g[-1]] - e[g[0]]
        if spread > tol_degen:
            raise AmbiguousDegeneracyError(
                f"eigenvalue cluster {e[g[0]]:.12g}..{e[g[-1]]:.12g} has spread "
                f"{spread:.3g} > tol_degen {tol_degen:.3g} but no internal gap above it"
            )
    for a, b in zip(groups, groups[1:]):
        gap = e[b[0]] - e[a[-1]]
        if gap <= tol_degen:
            raise AmbiguousDegeneracyError(
                f"adjacent clusters separated by {gap:.3g} <= tol_degen {tol_degen:.3g}"
            )
    energies = np.array([float(np.mean(e[list(g)])) for g in groups])
    return EigenspacePartition(
        decomposition=dec,
        groups=tuple(tuple(g) for g in groups),
        energies=energies,
        tol_degen=float(tol_degen),
    )


@dataclass(frozen=True)
class GapReport:
    """Spectral gaps over group representative energies.

    delta_e_min: smallest gap between any two groups.
    delta_e_star: per-group gap to the nearest other group.
    For a subset S of group indices, delta_e_s is the minimum gap over pairs
    with at least one endpoint in S; the two sub-minima (within S, S to
    complement) are recorded separately. Fields are None when undefined
    (fewer than two subset members / empty complement).
    """

    delta_e_min: float
    delta_e_star: tuple[float, ...]
    subset: tuple[int, ...] | None = None
    delta_e_s: float | None = None
    within_subset_gap: float | None = None
    cross_subset_gap: float | None = None
    _energies: np.ndarray = field(default=None, repr=False)


def gaps(partition: EigenspacePartition, subset=None) -> GapReport:
    """Gap report for a partition, optionally focused on a subset of groups.

    Raises GapUndefinedError when the partition has fewer than two groups.
    """
    energies = partition.energies
    m = energies.shape[0]
    if m < 2:
        raise GapUndefinedError(
            f"gaps undefined: spectrum has {m} eigenspace group(s), need at least 2"
        )
    adjacent = np.diff(energies)
    delta_e_min = float(np.min(adjacent))
    star = []
    for g in range(m):
        others = np.abs(energies - energies[g])
        others[g] = np.inf
        star.append(float(np.min(others)))
    if subset is None:
        return GapReport(delta_e_min=delta_e_min, delta_e_star=tuple(star), _energies=energies)

    s = tuple(sorted(set(int(i) for i in subset)))
    if len(s) == 0:
        raise ValidationError("subset must be non-empty")
    for i in s:
        if i < 0 or i >= m:
            raise ValidationError(f"subset index {i} outside group range 0..{m - 1}")
    within = None
    if len(s) >= 2:
        es = energies[list(s)]
        within = float(np.min(np.diff(es)))
    comp = [i for i in range(m) if i not in s]
    cross = None
    if comp:
        cross = float(np.min(np.abs(energies[list(s)][:, None] - energies[comp][None, :])))
    candidates = [x for x in (within, cross) if x is not None]
    delta_e_s = float(min(candidates))
    return GapReport(
        delta_e_min=delta_e_min,
        delta_e_star=tuple(star),
        subset=s,
        delta_e_s=delta_e_s,
        within_subset_gap=within,
        cross_subset_gap=cross,
        _energies=energies,
    )
