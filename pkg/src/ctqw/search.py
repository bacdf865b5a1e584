"""Quantum spatial search built from a reversible chain.

The walk lives on the doubled register space (dimension n^2, basis |x, y>).
A block reflection V(s) prepares each row distribution of the interpolated
chain, an edge swap S exchanges the registers on supported pairs, and
A = V^T S V is a real symmetric involution whose |x,0> block reproduces the
discriminant of the interpolated chain. The search generator
H = i(A P0 - P0 A) has a zero eigenspace of dimension (n-1)^2 + 1 for lazy
chains plus paired energies +-sqrt(1 - lambda^2), one pair per discriminant
eigenvalue below the top; the spectral gap is thus quadratically amplified
relative to the classical one. Evolving the stationary start for a random
time of scale sqrt(hitting time) leaves at least 1/4 - epsilon of the
averaged population on the marked rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import markov, spectral, walk
from .errors import AssertionFailure, InconsistencyError, NonErgodicError, ValidationError
from .markov import InterpolatedChain, ReversibleChain
from .rng import rng_stream
from .walk import TimeDistribution

__all__ = [
    "SEARCH_TIME_FACTOR",
    "SearchOperators",
    "SearchSpectrumReport",
    "SearchRecord",
    "OverlapReport",
    "swap_operator",
    "block_reflection",
    "search_operators",
    "spectrum_report",
    "start_state",
    "marked_subspace_basis",
    "overlap_preconditions",
    "run_search",
]

#: evolution-time scale c in T = c sqrt(HT); smallest value in {1, 2, 4, 8}
#: for which the averaged success floor 1/4 - epsilon holds across the
#: reference families (complete, cycle, random-reversible; n <= 32,
#: epsilon >= 0.025). Frozen; never auto-tuned during runs.
SEARCH_TIME_FACTOR = 1.0

INVOLUTION_TOL = 1e-12
ZERO_ENERGY_TOL = 1e-8


def _householder_column(w: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is the unit vector w."""
    n = w.shape[0]
    u = w - np.eye(n)[:, 0]
    nrm = np.linalg.norm(u)
    if nrm < 1e-14:
        return np.eye(n)
    u = u / nrm
    return np.eye(n) - 2.0 * np.outer(u, u)


def _random_orthogonal(n: int, rng) -> np.ndarray:
    g = rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def block_reflection(
    p_s: np.ndarray, completion: str = "householder", completion_seed: int | None = None
) -> np.ndarray:
    """Block-diagonal V(s): the x-th block maps e_0 to sqrt of the x-th row.

    Only the first column of each block is pinned by the construction;
    completion "randomized" multiplies the remaining columns by a random
    orthogonal mixer, which must leave every walk observable unchanged.
    """
    n = p_s.shape[0]
    if completion == "randomized":
        if completion_seed is None:
            raise ValidationError("randomized completion requires completion_seed")
        rng = rng_stream(completion_seed, 29)
    elif completion != "householder":
        raise ValidationError(f"unknown completion {completion!r}")
    v = np.zeros((n * n, n * n))
    for x in range(n):
        w = np.sqrt(p_s[x])
        u = _householder_column(w)
        if completion == "randomized":
            mix = np.eye(n)
            mix[1:, 1:] = _random_orthogonal(n - 1, rng)
            u = u @ mix
        v[x * n : (x + 1) * n, x * n : (x + 1) * n] = u
    return v


def swap_operator(base_p: np.ndarray) -> np.ndarray:
    """Register swap on pairs supported by the base chain, identity elsewhere.

    Built from the un-interpolated support so the same involution serves
    every interpolation value (interpolation only removes edges and adds the
    marked self-loop, which the swap fixes anyway).
    """
    n = base_p.shape[0]
    support = (base_p > 0) | (base_p.T > 0)
    perm = np.arange(n * n)
    for x in range(n):
        for y in range(x + 1, n):
            if support[x, y]:
                perm[x * n + y], perm[y * n + x] = y * n + x, x * n + y
    return np.eye(n * n)[perm]


@dataclass(frozen=True)
class SearchOperators:
    """Walk operators for one interpolated chain."""

    interpolated: InterpolatedChain
    V: np.ndarray
    S: np.ndarray
    A: np.ndarray
    H: np.ndarray

    @property
    def n(self) -> int:
        return self.interpolated.base.n

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def search_operators(
    chain: ReversibleChain,
    marked: int,
    s: float,
    completion: str = "householder",
    completion_seed: int | None = None,
) -> SearchOperators:
    """Assemble V, S, A and the search generator H for P(s).

    Certifies A = V^T S V is a symmetric involution and that its |x,0> block
    equals the interpolated discriminant before handing back H.
    """
    inter = markov.interpolate(chain, marked, s)
    n = chain.n
    v = block_reflection(inter.P_s, completion, completion_seed)
    sw = swap_operator(chain.P)
    a = v.T @ sw @ v
    a = 0.5 * (a + a.T)
    dev = float(np.max(np.abs(a @ a - np.eye(n * n))))
    if dev > INVOLUTION_TOL * n:
        raise InconsistencyError(f"A fails to square to identity (deviation {dev:.3g})")
    d_block = a[::n, ::n]
    d_expect = markov.discriminant(inter.P_s)
    blk = float(np.max(np.abs(d_block - d_expect)))
    if blk > 1e-10:
        raise InconsistencyError(f"discriminant block deviates by {blk:.3g}")

    p0 = np.zeros(n * n)
    p0[[x * n for x in range(n)]] = 1.0
    ap0 = a * p0[None, :]
    p0a = a * p0[:, None]
    h = 1j * (ap0 - p0a)
    return SearchOperators(interpolated=inter, V=v, S=sw, A=a, H=h)


def start_state(chain: ReversibleChain) -> walk.PureState:
    """|pi, 0>: square-root stationary weights on the first register."""
    n = chain.n
    vec = np.zeros(n * n, dtype=np.complex128)
    vec[[x * n for x in range(n)]] = np.sqrt(chain.pi)
    return walk.pure_state(vec)


def marked_subspace_basis(n: int, marked: int) -> np.ndarray:
    """Orthonormal columns spanning the marked first-register rows."""
    b = np.zeros((n * n, n), dtype=np.complex128)
    for y in range(n):
        b[marked * n + y, y] = 1.0
    return b


@dataclass(frozen=True)
class SearchSpectrumReport:
    """Structure of the search generator's spectrum at one (marked, s)."""

    n: int
    dim: int
    s: float
    zero_multiplicity: int
    expected_zero_multiplicity: int
    simple_zero_formula: int  # (n-1)^2 + 1, exact when only the top discriminant eigenvalue sits at +-1
    formula_matches: bool
    pairing_residual: float
    spectrum_match_residual: float
    eigenpair_residual: float
    top_discriminant_residual: float
    top_eigvec_residual: float  # top eigenvector vs entrywise sqrt(pi_s)
    discriminant_gap: float
    amplified_gap: float
    amplification_ratio: float  # amplified_gap / sqrt(discriminant_gap)
    ratio_in_range: bool  # within [1, sqrt(2)]


def spectrum_report(
    chain: ReversibleChain,
    marked: int,
    s: float,
    completion: str = "householder",
    completion_seed: int | None = None,
) -> SearchSpectrumReport:
    """Measure the spectral structure of H against the discriminant's.

    Checks performed: paired +-energies, zero multiplicity, agreement of the
    nonzero energies with +-sqrt(1 - lambda^2), explicit eigenvector pairs
    (|v,0> +- i |w>)/sqrt(2), and the quadratic gap amplification ratio.
    """
    ops = search_operators(chain, marked, s, completion, completion_seed)
    n = ops.n
    dec = spectral.decompose(spectral.hermitian(ops.H))
    energies = dec.eigenvalues

    disc = markov.discriminant(ops.interpolated.P_s)
    lam, vecs = np.linalg.eigh(disc)
    nonzero_pred = []
    for l in lam:
        if abs(float(l)) >= 1.0 - 1e-12:
            continue  # magnitude-1 eigenvalue: contributes an exact zero energy
        val = math.sqrt(max(0.0, 1.0 - float(l) ** 2))
        if val > ZERO_ENERGY_TOL:
            nonzero_pred.extend((-val, val))
    nonzero_pred = np.sort(np.array(nonzero_pred))
    expected_zero = n * n - nonzero_pred.shape[0]

    zero_mult = int(np.sum(np.abs(energies) <= ZERO_ENERGY_TOL))
    measured_nonzero = np.sort(energies[np.abs(energies) > ZERO_ENERGY_TOL])
    if measured_nonzero.shape[0] != nonzero_pred.shape[0]:
        raise InconsistencyError(
            f"{measured_nonzero.shape[0]} nonzero energies, predicted {nonzero_pred.shape[0]}"
        )
    match_resid = float(np.max(np.abs(measured_nonzero - nonzero_pred))) if nonzero_pred.size else 0.0
    pairing = float(np.max(np.abs(np.sort(energies) + np.sort(energies)[::-1])))

    # explicit eigenvectors from discriminant pairs
    eig_resid = 0.0
    for idx in range(lam.shape[0]):
        l = float(lam[idx])
        if abs(l) >= 1.0 - 1e-12:
            continue
        amp = math.sqrt(max(0.0, 1.0 - l * l))
        if amp <= ZERO_ENERGY_TOL:
            continue
        v0 = np.zeros(n * n, dtype=np.complex128)
        v0[[x * n for x in range(n)]] = vecs[:, idx]
        w = (ops.A @ v0 - l * v0) / amp
        for sign in (+1.0, -1.0):
            psi = (v0 + sign * 1j * w) / math.sqrt(2.0)
            resid = float(np.linalg.norm(ops.H @ psi - sign * amp * psi))
            eig_resid = max(eig_resid, resid)

    top_resid = float(abs(lam[-1] - 1.0))
    u = vecs[:, -1]
    if u.sum() < 0:
        u = -u
    top_vec_resid = float(np.max(np.abs(u - np.sqrt(ops.interpolated.pi_s))))
    disc_gap = float(1.0 - lam[-2])
    amplified = math.sqrt(max(0.0, 1.0 - float(lam[-2]) ** 2))
    ratio = amplified / math.sqrt(disc_gap) if disc_gap > 0 else float("nan")
    in_range = bool(disc_gap > 0 and 1.0 - 1e-9 <= ratio <= math.sqrt(2.0) + 1e-9)
    return SearchSpectrumReport(
        n=n,
        dim=n * n,
        s=float(s),
        zero_multiplicity=zero_mult,
        expected_zero_multiplicity=int(expected_zero),
        simple_zero_formula=(n - 1) ** 2 + 1,
        formula_matches=bool(zero_mult == (n - 1) ** 2 + 1),
        pairing_residual=pairing,
        spectrum_match_residual=match_resid,
        eigenpair_residual=eig_resid,
        top_discriminant_residual=top_resid,
        top_eigvec_residual=top_vec_resid,
        discriminant_gap=disc_gap,
        amplified_gap=amplified,
        amplification_ratio=ratio,
        ratio_in_range=in_range,
    )


@dataclass(frozen=True)
class OverlapReport:
    """Start-state and marked-state overlaps with the stationary eigenvector
    at the half-weight interpolation point."""

    n: int
    marked: int
    s: float
    overlap_start: float  # |<top eigvec of D(P_s) | sqrt(base pi)>|^2
    overlap_marked: float  # |<marked | top eigvec>|^2
    closed_form_residual: float  # top eigvec vs entrywise sqrt(pi_s)


def overlap_preconditions(ic: InterpolatedChain, tol: float = 1e-9) -> OverlapReport:
    """Certify the two overlap conditions the success floor rests on.

    At s*, the top discriminant eigenvector (computed numerically, then
    matched against its closed form sqrt(pi_s)) must carry squared overlap
    >= 1/2 with the stationary start and exactly 1/2 with the marked vertex.
    Violations raise AssertionFailure; a closed-form mismatch raises
    InconsistencyError.
    """
    pv = float(ic.pi_s[ic.marked])
    if abs(pv - 0.5) > 1e-9:
        raise ValidationError(
            f"overlap preconditions hold at the half-weight point; marked weight is {pv:.12g}"
        )
    lam, vecs = np.linalg.eigh(markov.discriminant(ic.P_s))
    u = vecs[:, -1]
    if u.sum() < 0:
        u = -u
    resid = float(np.max(np.abs(u - np.sqrt(ic.pi_s))))
    if resid > 1e-8:
        raise InconsistencyError(
            f"top discriminant eigenvector deviates from sqrt(pi_s) by {resid:.3g}"
        )
    overlap_start = float((u @ np.sqrt(ic.base.pi)) ** 2)
    overlap_marked = float(u[ic.marked] ** 2)
    if overlap_start < 0.5 - tol:
        raise AssertionFailure(f"start overlap {overlap_start:.12g} fell below 1/2")
    if abs(overlap_marked - 0.5) > tol:
        raise AssertionFailure(f"marked overlap {overlap_marked:.12g} is not 1/2")
    return OverlapReport(
        n=ic.base.n,
        marked=int(ic.marked),
        s=float(ic.s),
        overlap_start=overlap_start,
        overlap_marked=overlap_marked,
        closed_form_residual=resid,
    )


@dataclass(frozen=True)
class SearchRecord:
    """One search experiment: exact averaged success and its Monte Carlo check."""

    family: str
    n: int
    marked: int
    epsilon: float
    lazified: bool
    s_star: float
    gap_s_star: float
    hitting_time: float
    time_factor: float
    T: float
    k: int
    total_time: float  # k T, the per-run evolution-time budget
    p_exact: float
    success_floor: float  # 1/4 - epsilon
    floor_holds: bool
    overlap_start: float  # |<top eigvec at s*|start>|^2, >= 1/2
    overlap_marked: float  # marked weight at s*, = 1/2
    mc_shots: int
    mc_freq: float | None
    mc_std_error: float | None
    mc_within_3sigma: bool | None
    rng_seed: int


def run_search(
    chain_or_matrix,
    marked: int,
    epsilon: float,
    rng_seed: int,
    family: str = "",
    shots: int = 100000,
    lazify_first: bool = True,
    time_factor: float | None = None,
    completion: str = "householder",
    enforce_floor: bool = True,
) -> SearchRecord:
    """Search for the marked vertex by the randomized-time averaged walk.

    Pipeline: lazify (default), interpolate to s* where the marked
    stationary weight is 1/2, evolve |pi, 0> under the search generator for
    t summed from k = ceil(log2(1/epsilon)) uniforms on [0, T] with
    T = time_factor sqrt(HT), and measure the first register. The exact
    averaged success probability is certified against the 1/4 - epsilon
    floor (AssertionFailure when enforce_floor; calibration sweeps disable
    it and read floor_holds off the record instead); shots > 0 adds a
    Bernoulli Monte Carlo estimate of the same number (shots = 0 skips it).
    """
    if isinstance(chain_or_matrix, ReversibleChain):
        base = chain_or_matrix
    else:
        base = markov.validate_chain(chain_or_matrix, require_aperiodic=False)
    if not 0.0 < epsilon < 0.25:
        raise ValidationError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    if shots < 0:
        raise ValidationError(f"shots must be >= 0, got {shots}")
    work = markov.lazify(base) if lazify_first else base
    if not work.aperiodic:
        raise NonErgodicError("search requires an aperiodic chain; enable lazify_first")

    n = work.n
    sstar = markov.s_star(work, marked)
    ht = markov.classical_hitting_time(work, marked)
    gap = markov.interpolated_gap(work, marked, sstar)
    c = SEARCH_TIME_FACTOR if time_factor is None else float(time_factor)
    T = c * math.sqrt(ht)
    k = max(1, math.ceil(math.log2(1.0 / epsilon)))
    dist = TimeDistribution(T=T, k=k)

    ops = search_operators(work, marked, sstar, completion, rng_seed if completion == "randomized" else None)
    dec = spectral.decompose(spectral.hermitian(ops.H))
    psi0 = start_state(work)
    basis = marked_subspace_basis(n, marked)
    p_exact = walk.avg_projector_probability_exact(ops.H, psi0, basis, dist, dec=dec)
    floor = 0.25 - epsilon
    holds = bool(p_exact >= floor - 1e-9)
    if enforce_floor and not holds:
        raise AssertionFailure(
            f"averaged success {p_exact:.12g} fell below the floor 1/4 - epsilon = {floor:.12g}"
            f" (family={family or '?'}, n={n}, T={T:.6g}, k={k})"
        )

    ov = overlap_preconditions(ops.interpolated)

    mc_freq = mc_err = None
    within = None
    if shots > 0:
        rng = rng_stream(rng_seed, 23)
        c_eig = dec.eigenvectors.conj().T @ psi0.amplitudes
        rows = dec.eigenvectors[marked * n : (marked + 1) * n, :]
        hits = 0
        done = 0
        chunk = 5000
        while done < shots:
            m = min(chunk, shots - done)
            ts = rng.random((m, k)).sum(axis=1) * T
            amps = (np.exp(-1j * np.outer(ts, dec.eigenvalues)) * c_eig) @ rows.T
            q = np.clip(np.sum(np.abs(amps) ** 2, axis=1), 0.0, 1.0)
            hits += int(np.sum(rng.random(m) < q))
            done += m
        mc_freq = hits / float(shots)
        mc_err = math.sqrt(max(mc_freq * (1.0 - mc_freq), 1e-12) / shots)
        sigma_exact = math.sqrt(max(p_exact * (1.0 - p_exact), 1e-12) / shots)
        within = bool(abs(mc_freq - p_exact) <= 3.0 * sigma_exact + 1e-12)

    return SearchRecord(
        family=family,
        n=n,
        marked=int(marked),
        epsilon=float(epsilon),
        lazified=bool(lazify_first),
        s_star=float(sstar),
        gap_s_star=float(gap),
        hitting_time=float(ht),
        time_factor=float(c),
        T=float(T),
        k=int(k),
        total_time=float(k) * float(T),
        p_exact=float(p_exact),
        success_floor=float(floor),
        floor_holds=holds,
        overlap_start=ov.overlap_start,
        overlap_marked=ov.overlap_marked,
        mc_shots=int(shots),
        mc_freq=mc_freq,
        mc_std_error=mc_err,
        mc_within_3sigma=within,
        rng_seed=int(rng_seed),
    )
