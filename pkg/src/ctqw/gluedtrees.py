"""Glued binary trees: instances, column-space reduction, exact spectrum.

Two depth-d complete binary trees joined leaf-to-leaf by a random alternating
cycle. The walk generator on the full graph is the adjacency matrix scaled by
1/sqrt(2); on the invariant column subspace it reduces to a (2n = 2(d+1))
dimensional tridiagonal matrix with unit couplings and a single sqrt(2) bond
in the middle. Eigenvectors in the column space are sine profiles whose
momenta solve sin((n+1)p) = +-sqrt(2) sin(np); two additional hyperbolic
states sit outside the band. The traversal experiment walks from the
entrance root and certifies the exit probability with the exact engine.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import spectral, walk
from .errors import InconsistencyError, InvalidLabelError, ValidationError
from .rng import rng_stream
from .spectral import EigenspacePartition
from .walk import TimeDistribution

__all__ = [
    "GluedTreesInstance",
    "MomentumSolution",
    "MomentaReport",
    "SubspaceReport",
    "TraversalRecord",
    "EquivalenceRecord",
    "alpha_sq",
    "column_hamiltonian",
    "solve_momenta",
    "column_spectrum_check",
    "eigenstate_from_momentum",
    "hyperbolic_overlaps",
    "certified_hitting_times",
    "subspace_S",
    "generate_instance",
    "validate_instance",
    "oracle_neighbors",
    "discover_graph",
    "full_hamiltonian",
    "full_vs_column_equivalence",
    "instance_to_json",
    "instance_from_json",
    "run_traversal",
    "traversal_success_stats",
    "default_schedule",
]

SQRT2 = math.sqrt(2.0)
#: residual tolerance for momentum solutions, |sin((n+1)p)/sin(np) -+ sqrt2|
MOMENTUM_RESIDUAL_TOL = 1e-10


def column_hamiltonian(two_n: int) -> np.ndarray:
    """Reduced walk generator on the 2n column states.

    Tridiagonal, zero diagonal, off-diagonal 1 everywhere except the middle
    bond (n, n+1) which carries sqrt(2).
    """
    if two_n < 2 or two_n % 2 != 0:
        raise ValidationError(f"two_n must be an even integer >= 2, got {two_n}")
    n = two_n // 2
    h = np.zeros((two_n, two_n))
    for j in range(two_n - 1):
        h[j, j + 1] = h[j + 1, j] = SQRT2 if j == n - 1 else 1.0
    return h


@dataclass(frozen=True)
class MomentumSolution:
    """One band solution: momentum p in (0, pi), branch sign, band index."""

    p: float
    branch: int  # +1 or -1: which sign of sqrt(2) the ratio hits
    ell: int  # 1-based index within its branch, ascending in p
    energy: float  # 2 cos p
    alpha_p: float  # normalization 1 / sqrt(2 sum_{j<=n} sin^2(pj))


@dataclass(frozen=True)
class MomentaReport:
    two_n: int
    minus: tuple[MomentumSolution, ...]
    plus: tuple[MomentumSolution, ...]
    hyperbolic_q: float | None
    hyperbolic_energies: tuple[float, ...]
    all_energies: np.ndarray
    max_residual: float


def alpha_sq(two_n: int, p: float) -> float:
    """Normalization weight 1 / (2 sum_{j<=n} sin^2(p j)); the squared
    entrance-column amplitude of the band eigenvector is alpha_sq * sin^2 p."""
    n = two_n // 2
    s = sum(math.sin(p * j) ** 2 for j in range(1, n + 1))
    return 1.0 / (2.0 * s)


def _scan_roots(f, lo: float, hi: float, points: int) -> list[float]:
    """All roots of f on (lo, hi) via dense sign scan plus bracketed refinement."""
    xs = np.linspace(lo, hi, points)
    ys = f(xs)
    roots = []
    for i in range(points - 1):
        a, b = ys[i], ys[i + 1]
        if a == 0.0:
            roots.append(float(xs[i]))
        elif a * b < 0:
            roots.append(float(brentq(lambda x: float(f(np.array([x]))[0]), xs[i], xs[i + 1], xtol=1e-15, rtol=8.9e-16)))
    if ys[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def solve_momenta(two_n: int) -> MomentaReport:
    """Solve sin((n+1)p)/sin(np) = +-sqrt(2) on (0, pi), plus the hyperbolic pair.

    Sign-scans the pole-free forms sin((n+1)p) -+ sqrt(2) sin(np); each root is
    refined to machine precision and its ratio residual certified below
    MOMENTUM_RESIDUAL_TOL. Counts are cross-checked against the 2n dimension;
    a mismatch raises InconsistencyError.
    """
    if two_n < 4 or two_n % 2 != 0:
        raise ValidationError(f"two_n must be an even integer >= 4, got {two_n}")
    n = two_n // 2
    # adjacent roots near the band edge close up as ~1/n^2; step ~ pi/(40 n^2)
    points = max(4001, 40 * n * n)
    sols: dict[int, list[float]] = {}
    for sign in (+1, -1):
        f = lambda p, s=sign: np.sin((n + 1) * p) - s * SQRT2 * np.sin(n * p)
        raw = _scan_roots(f, 0.0, math.pi, points)
        roots = [p for p in raw if 1e-9 < p < math.pi - 1e-9]
        sols[sign] = sorted(roots)

    max_resid = 0.0
    for sign in (+1, -1):
        for p in sols[sign]:
            resid = abs(math.sin((n + 1) * p) / math.sin(n * p) - sign * SQRT2)
            max_resid = max(max_resid, resid)
    if max_resid > MOMENTUM_RESIDUAL_TOL:
        raise InconsistencyError(
            f"momentum residual {max_resid:.3g} exceeds {MOMENTUM_RESIDUAL_TOL:g}"
        )

    n_sine = len(sols[+1]) + len(sols[-1])
    missing = two_n - n_sine
    if missing not in (0, 2):
        raise InconsistencyError(
            f"found {n_sine} band solutions for two_n={two_n}; expected {two_n} or {two_n - 2}"
        )
    hyperbolic_q = None
    hyp_energies: tuple[float, ...] = ()
    if missing == 2:
        g = lambda q: math.sinh((n + 1) * q) - SQRT2 * math.sinh(n * q)
        # g < 0 just above 0 (slope (n+1) - sqrt(2) n), g > 0 by q = 1
        hyperbolic_q = float(brentq(g, 1e-12, 1.0, xtol=1e-15, rtol=8.9e-16))
        e = 2.0 * math.cosh(hyperbolic_q)
        hyp_energies = (-e, e)

    minus = tuple(
        MomentumSolution(
            p=p,
            branch=-1,
            ell=i + 1,
            energy=2.0 * math.cos(p),
            alpha_p=math.sqrt(alpha_sq(two_n, p)),
        )
        for i, p in enumerate(sols[-1])
    )
    plus = tuple(
        MomentumSolution(
            p=p,
            branch=+1,
            ell=i + 1,
            energy=2.0 * math.cos(p),
            alpha_p=math.sqrt(alpha_sq(two_n, p)),
        )
        for i, p in enumerate(sols[+1])
    )
    # the two branches must strictly alternate along the momentum axis
    merged = sorted(minus + plus, key=lambda s: s.p)
    for a, b in zip(merged, merged[1:]):
        if a.branch == b.branch:
            raise InconsistencyError(
                f"branch interleaving violated near p={a.p:.6g}, {b.p:.6g} (two_n={two_n})"
            )
    energies = np.sort(
        np.array([s.energy for s in minus] + [s.energy for s in plus] + list(hyp_energies))
    )
    return MomentaReport(
        two_n=two_n,
        minus=minus,
        plus=plus,
        hyperbolic_q=hyperbolic_q,
        hyperbolic_energies=hyp_energies,
        all_energies=energies,
        max_residual=max_resid,
    )


def column_spectrum_check(two_n: int, atol: float = 1e-9) -> float:
    """Max deviation between the transcendental spectrum and dense eigenvalues.

    Raises InconsistencyError beyond atol; returns the deviation otherwise.
    """
    report = solve_momenta(two_n)
    dense = np.linalg.eigvalsh(column_hamiltonian(two_n))
    if report.all_energies.shape != dense.shape:
        raise InconsistencyError(
            f"momentum solutions count {report.all_energies.shape[0]} != dim {dense.shape[0]}"
        )
    dev = float(np.max(np.abs(report.all_energies - dense)))
    if dev > atol:
        raise InconsistencyError(f"spectrum deviation {dev:.3g} exceeds {atol:g}")
    return dev


def eigenstate_from_momentum(two_n: int, sol: MomentumSolution) -> np.ndarray:
    """Closed-form column-space eigenvector for a band momentum solution.

    Components sin(p j) on the first n columns and branch * sin(p (2n+1-j))
    on the rest, normalized. Mirror (anti)symmetric per the branch sign.
    """
    n = two_n // 2
    v = np.zeros(two_n)
    for j in range(1, n + 1):
        v[j - 1] = math.sin(sol.p * j)
    for j in range(n + 1, two_n + 1):
        v[j - 1] = sol.branch * math.sin(sol.p * (two_n + 1 - j))
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise InconsistencyError(f"degenerate eigenvector for p={sol.p}")
    return v / norm


def hyperbolic_overlaps(two_n: int) -> tuple[float, ...]:
    """|<entrance|E><E|exit>| for each out-of-band (cosh-type) eigenvector.

    Located spectrally: band energies satisfy |E| < 2, the hyperbolic pair
    sits strictly outside. Returns () when the spectrum is entirely in-band
    (two_n = 4). Counts are cross-checked against solve_momenta.
    """
    report = solve_momenta(two_n)
    evals, evecs = np.linalg.eigh(column_hamiltonian(two_n))
    outside = [i for i, e in enumerate(evals) if abs(e) > 2.0]
    expected = len(report.hyperbolic_energies)
    if len(outside) != expected:
        raise InconsistencyError(
            f"{len(outside)} out-of-band eigenvalues, expected {expected} (two_n={two_n})"
        )
    return tuple(float(abs(evecs[0, i] * evecs[-1, i])) for i in outside)


@dataclass(frozen=True)
class SubspaceReport:
    """The middle band of minus-branch solutions and its gap structure."""

    two_n: int
    ells: tuple[int, ...]
    momenta: tuple[float, ...]
    energies: tuple[float, ...]
    sines: tuple[float, ...]
    group_indices: tuple[int, ...]
    alpha4_mass: float  # sum of squared normalization weights over members
    first_term_mass: float  # sum of |<exit|P_g|entrance>|^2 over members
    delta_e_s: float
    within_subset_gap: float | None
    cross_subset_gap: float | None
    within_gap_floor: float  # pi / (16 n)
    cross_gap_floor: float  # pi / (12 n)
    checks: dict


def subspace_S(two_n: int, partition: EigenspacePartition | None = None) -> SubspaceReport:
    """Minus-branch solutions with ceil(n/4) <= ell <= ceil(3n/4).

    Members are mapped onto eigenspace groups of the column operator; the
    report carries the subset gap (certified >= pi/(16n)), both sub-minima
    with their analytic floors, and the band overlap masses.
    """
    if two_n < 8:
        raise ValidationError(f"subspace requires two_n >= 8, got {two_n}")
    n = two_n // 2
    report = solve_momenta(two_n)
    lo, hi = math.ceil(n / 4), math.ceil(3 * n / 4)
    members = [s for s in report.minus if lo <= s.ell <= hi]
    if not members:
        raise InconsistencyError(f"empty band subset for two_n={two_n}")

    if partition is None:
        partition = spectral.group_eigenspaces(spectral.decompose(column_hamiltonian(two_n)))
    group_indices = []
    for s in members:
        diffs = np.abs(partition.energies - s.energy)
        g = int(np.argmin(diffs))
        if diffs[g] > 1e-9:
            raise InconsistencyError(
                f"momentum energy {s.energy:.12g} matches no eigenspace (off by {diffs[g]:.3g})"
            )
        group_indices.append(g)
    if len(set(group_indices)) != len(group_indices):
        raise InconsistencyError("two band members mapped to one eigenspace")

    gap_report = spectral.gaps(partition, subset=group_indices)
    dec = partition.decomposition
    e_in = walk.basis_state(two_n, 0)
    e_out = walk.basis_state(two_n, two_n - 1)
    first_term = 0.0
    for g in group_indices:
        idx = list(partition.groups[g])
        v = dec.eigenvectors[:, idx]
        amp = np.sum(np.conj(v.conj().T @ e_out.amplitudes) * (v.conj().T @ e_in.amplitudes))
        first_term += float(np.abs(amp) ** 2)
    a4 = sum(s.alpha_p**4 for s in members)

    within_floor = math.pi / (16 * n)
    cross_floor = math.pi / (12 * n)
    sines = tuple(math.sin(s.p) for s in members)
    checks = {
        "delta_e_s_floor_ok": bool(gap_report.delta_e_s >= within_floor),
        "within_gap_ok": bool(
            gap_report.within_subset_gap is None or gap_report.within_subset_gap > within_floor
        ),
        "cross_gap_ok": bool(
            gap_report.cross_subset_gap is None or gap_report.cross_subset_gap > cross_floor
        ),
        "alpha4_mass_ok": bool(a4 >= 1.0 / (4 * n)),
        "alpha_floor_ok": bool(all(s.alpha_p > 1.0 / math.sqrt(2 * n) for s in members)),
        # the normalization-weight range of sin(p) over members is reported as
        # measured data, not asserted against a nominal (1/sqrt(2), 1) window:
        # at finite n the band-edge momenta land slightly outside (pi/4, 3pi/4)
        # on both sides, so min_sine sits below 1/sqrt(2) at desk sizes
        "min_sine": float(min(sines)),
        "max_sine": float(max(sines)),
    }
    return SubspaceReport(
        two_n=two_n,
        ells=tuple(s.ell for s in members),
        momenta=tuple(s.p for s in members),
        energies=tuple(s.energy for s in members),
        sines=sines,
        group_indices=tuple(group_indices),
        alpha4_mass=float(a4),
        first_term_mass=first_term,
        delta_e_s=float(gap_report.delta_e_s),
        within_subset_gap=gap_report.within_subset_gap,
        cross_subset_gap=gap_report.cross_subset_gap,
        within_gap_floor=within_floor,
        cross_gap_floor=cross_floor,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# full-graph instances


@dataclass(frozen=True)
class GluedTreesInstance:
    """Label-faithful glued-trees graph.

    Vertex names are opaque fixed-width hex identifiers; adjacency should be
    read through oracle_neighbors only (walk code discovers the graph by
    breadth-first oracle queries, never by touching this mapping directly).
    """

    depth: int
    entrance: str
    exit: str
    adjacency: dict
    seed: int | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)


def _label_width_bits(n_vertices: int) -> int:
    return 2 * math.ceil(math.log2(n_vertices)) + 2


def generate_instance(depth: int, seed: int) -> GluedTreesInstance:
    """Random glued-trees instance: heap-shaped trees, random alternating
    leaf cycle, collision-checked random labels, per-vertex neighbor order
    shuffled so the oracle leaks no positional structure."""
    if depth < 2:
        raise ValidationError(f"depth must be >= 2, got {depth}")
    rng = rng_stream(seed, 71)
    tree_size = 2 ** (depth + 1) - 1
    n_leaves = 2**depth
    total = 2 * tree_size

    # internal ids: tree A = 0..tree_size-1 (heap order), tree B offset by tree_size
    edges: list[tuple[int, int]] = []
    for t_off in (0, tree_size):
        for i in range(tree_size):
            for child in (2 * i + 1, 2 * i + 2):
                if child < tree_size:
                    edges.append((t_off + i, t_off + child))
    leaves_a = [tree_size - n_leaves + i for i in range(n_leaves)]
    leaves_b = [tree_size + tree_size - n_leaves + i for i in range(n_leaves)]
    perm_a = [leaves_a[i] for i in rng.permutation(n_leaves)]
    perm_b = [leaves_b[i] for i in rng.permutation(n_leaves)]
    for i in range(n_leaves):
        edges.append((perm_a[i], perm_b[i]))
        edges.append((perm_b[i], perm_a[(i + 1) % n_leaves]))

    bits = _label_width_bits(total)
    width = (bits + 3) // 4
    labels: list[str] = []
    seen = set()
    while len(labels) < total:
        draw = int(rng.integers(0, 2**bits))
        if draw in seen:
            continue  # collision: redraw
        seen.add(draw)
        labels.append(format(draw, f"0{width}x"))

    adj: dict[str, list[str]] = {lab: [] for lab in labels}
    for u, v in edges:
        adj[labels[u]].append(labels[v])
        adj[labels[v]].append(labels[u])
    shuffled = {}
    for lab in labels:
        order = rng.permutation(len(adj[lab]))
        shuffled[lab] = tuple(adj[lab][i] for i in order)

    inst = GluedTreesInstance(
        depth=depth,
        entrance=labels[0],
        exit=labels[tree_size],
        adjacency=shuffled,
        seed=seed,
    )
    validate_instance(inst)
    return inst


def validate_instance(inst: GluedTreesInstance) -> None:
    """Structural checks: vertex count, symmetry, degrees, layer profile."""
    total = 2 * (2 ** (inst.depth + 1) - 1)
    if inst.n_vertices != total:
        raise ValidationError(f"expected {total} vertices, found {inst.n_vertices}")
    degs = {}
    for lab, nbrs in inst.adjacency.items():
        if len(set(nbrs)) != len(nbrs):
            raise ValidationError(f"duplicate neighbor at {lab}")
        for m in nbrs:
            if lab not in inst.adjacency.get(m, ()):
                raise ValidationError(f"asymmetric edge {lab}-{m}")
        degs[lab] = len(nbrs)
    roots = sorted(lab for lab, d in degs.items() if d == 2)
    if len(roots) != 2 or any(d != 3 for lab, d in degs.items() if lab not in roots):
        raise ValidationError("degree profile must be two 2s (roots), rest 3s")
    if sorted((inst.entrance, inst.exit)) != roots:
        raise ValidationError("entrance/exit must be the two degree-2 vertices")
    # BFS layer profile 1,2,...,2^d,2^d,...,2,1
    expected = [2**i for i in range(inst.depth + 1)] + [2**i for i in range(inst.depth, -1, -1)]
    layer = {inst.entrance: 0}
    frontier = [inst.entrance]
    sizes = [1]
    while frontier:
        nxt = []
        for u in frontier:
            for v in inst.adjacency[u]:
                if v not in layer:
                    layer[v] = layer[u] + 1
                    nxt.append(v)
        if nxt:
            sizes.append(len(nxt))
        frontier = nxt
    if sizes != expected:
        raise ValidationError(f"layer profile {sizes} != expected {expected}")
    if layer.get(inst.exit) != 2 * inst.depth + 1:
        raise ValidationError("exit is not at the far end of the layer profile")


def oracle_neighbors(inst: GluedTreesInstance, label: str) -> tuple[str, ...]:
    """Neighbors of a vertex, in the instance's shuffled order."""
    try:
        return inst.adjacency[label]
    except KeyError:
        raise InvalidLabelError(f"unknown vertex label {label!r}") from None


def discover_graph(oracle, entrance: str):
    """Breadth-first discovery through an oracle callable.

    Returns (labels in discovery order, adjacency dict). Every edge the
    returned structure knows about came from an oracle reply.
    """
    order = [entrance]
    seen = {entrance}
    adj = {}
    i = 0
    while i < len(order):
        u = order[i]
        nbrs = tuple(oracle(u))
        adj[u] = nbrs
        for v in nbrs:
            if v not in seen:
                seen.add(v)
                order.append(v)
        i += 1
    return order, adj


def full_hamiltonian(inst: GluedTreesInstance):
    """Walk generator on the full graph, built via oracle discovery.

    Adjacency scaled by 1/sqrt(2) so the column reduction has unit in-tree
    couplings and a sqrt(2) middle bond. Returns (H, labels in row order).
    """
    labels, adj = discover_graph(lambda lab: oracle_neighbors(inst, lab), inst.entrance)
    index = {lab: i for i, lab in enumerate(labels)}
    m = len(labels)
    h = np.zeros((m, m))
    for lab, nbrs in adj.items():
        i = index[lab]
        for nb in nbrs:
            h[i, index[nb]] = 1.0 / SQRT2
    return h, labels


@dataclass(frozen=True)
class EquivalenceRecord:
    depth: int
    two_n: int
    T: float
    k: int
    trials: int
    p_full: float
    p_column: float
    difference: float
    tolerance: float
    passes: bool


def full_vs_column_equivalence(
    inst: GluedTreesInstance, T: float, k: int = 1, trials: int = 1, tolerance: float = 1e-8
) -> EquivalenceRecord:
    """Exit probability computed on the full graph equals the column-space
    value for the same time law (the column subspace is invariant).

    Checked at `trials` time points T, 2T, ..., trials*T; the record carries
    the probabilities at the base point and the worst difference seen.
    Capped at depth 6: beyond that the dense full-graph decomposition stops
    being a reasonable oracle.
    """
    if inst.depth > 6:
        raise ValidationError(
            f"full-graph comparison capped at depth 6, got depth {inst.depth}"
        )
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    h_full, labels = full_hamiltonian(inst)
    m = len(labels)
    psi0 = walk.basis_state(m, labels.index(inst.entrance))
    y = walk.basis_state(m, labels.index(inst.exit))
    dec_full = spectral.decompose(h_full)

    two_n = 2 * (inst.depth + 1)
    h_col = column_hamiltonian(two_n)
    dec_col = spectral.decompose(h_col)
    col0 = walk.basis_state(two_n, 0)
    col_last = walk.basis_state(two_n, two_n - 1)

    p_full = p_col = 0.0
    worst = 0.0
    for j in range(1, trials + 1):
        dist = TimeDistribution(T=float(T) * j, k=k)
        pf = walk.avg_probability_exact(h_full, psi0, y, dist, dec=dec_full)
        pc = walk.avg_probability_exact(h_col, col0, col_last, dist, dec=dec_col)
        if j == 1:
            p_full, p_col = pf, pc
        worst = max(worst, abs(pf - pc))
    return EquivalenceRecord(
        depth=inst.depth,
        two_n=two_n,
        T=float(T),
        k=int(k),
        trials=int(trials),
        p_full=p_full,
        p_column=p_col,
        difference=float(worst),
        tolerance=float(tolerance),
        passes=bool(worst <= tolerance),
    )


# ---------------------------------------------------------------------------
# certified hitting-time estimates


def certified_hitting_times(two_n: int, grid_points: int = 25) -> dict:
    """Hitting-time figures certified by the three lower-bound routes.

    Each route minimizes (segments * T) / floor(T) over a geometric time grid
    spanning the scale where its floor is positive:

    - mixing route, one uniform time: T in [1.5, 48] x 2/(p_inf delta_e_min)
    - single-eigenspace route (middle band state), one uniform time:
      T in [5, 30] / delta_e_star
    - subset route with ceil(log2 5n) summed uniforms: T in [1, 64] x
      2/delta_e_s, which brackets the optimum of a - sqrt(3) (2/(T d))^k

    Floors come from the bounds module; grid points with nonpositive floors
    are skipped. The subset route keeps k pinned to the log schedule rather
    than optimizing it.
    """
    from . import bounds  # local import: bounds pulls walk/spectral only

    n = two_n // 2
    h = column_hamiltonian(two_n)
    dec = spectral.decompose(h)
    part = spectral.group_eigenspaces(dec)
    gap_report = spectral.gaps(part)
    psi0 = walk.basis_state(two_n, 0)
    y = walk.basis_state(two_n, two_n - 1)
    p_inf = walk.limiting_probability(h, psi0, y, partition=part)

    report = solve_momenta(two_n)
    middle = next(s for s in report.minus if s.ell == math.ceil(n / 2))
    diffs = np.abs(part.energies - middle.energy)
    g_mid = int(np.argmin(diffs))
    if diffs[g_mid] > 1e-9:
        raise InconsistencyError("middle band state matches no eigenspace")
    de_star = gap_report.delta_e_star[g_mid]

    sub = subspace_S(two_n)
    k3 = math.ceil(math.log2(5 * n))

    def best(grid, k, floor_at):
        tau = best_t = None
        for t in grid:
            val = floor_at(float(t))
            if val <= 0.0:
                continue
            cand = k * float(t) / val
            if tau is None or cand < tau:
                tau, best_t = cand, float(t)
        if tau is None:
            raise InconsistencyError("no grid point certified a positive floor")
        return tau, best_t

    t1 = 2.0 / (p_inf * gap_report.delta_e_min)
    tau1, t_at_1 = best(
        np.geomspace(1.5 * t1, 48.0 * t1, grid_points),
        1,
        lambda t: bounds.mixing_bound(h, psi0, y, t, partition=part).bound_value,
    )
    tau2, t_at_2 = best(
        np.geomspace(5.0 / de_star, 30.0 / de_star, grid_points),
        1,
        lambda t: bounds.eigenspace_bound(h, psi0, y, t, g_mid, partition=part).bound_value,
    )
    t3 = 2.0 / sub.delta_e_s
    tau3, t_at_3 = best(
        np.geomspace(t3, 64.0 * t3, grid_points + 8),
        k3,
        lambda t: bounds.subset_bound(
            h, psi0, y, TimeDistribution(T=t, k=k3), sub.group_indices, partition=part
        ).bound_value,
    )
    return {
        "tau_l1": float(tau1),
        "T_l1": t_at_1,
        "tau_l2": float(tau2),
        "T_l2": t_at_2,
        "group_l2": g_mid,
        "delta_e_star_l2": float(de_star),
        "tau_l3": float(tau3),
        "T_l3": t_at_3,
        "k_l3": int(k3),
        "p_inf": float(p_inf),
        "delta_e_min": float(gap_report.delta_e_min),
        "delta_e_s": float(sub.delta_e_s),
    }


# ---------------------------------------------------------------------------
# traversal experiment


def default_schedule(two_n: int, k_schedule: str = "log") -> tuple[float, int, int]:
    """(T, segments k, max repetitions) for the traversal experiment.

    k_schedule "log" uses ceil(log2(5n)) segments; "linear" uses 5n (a far
    costlier schedule kept for comparison runs).
    """
    n = two_n // 2
    T = 64.0 * n
    if k_schedule == "log":
        k = math.ceil(math.log2(5 * n))
    elif k_schedule == "linear":
        k = 5 * n
    else:
        raise ValidationError(f"unknown k_schedule {k_schedule!r}")
    return T, k, 20 * n


@dataclass(frozen=True)
class TraversalRecord:
    mode: str
    two_n: int
    T: float
    k: int
    k_schedule: str
    max_repetitions: int
    success: bool
    repetitions_used: int
    outcome: str
    per_shot_probability: float
    per_shot_floor: float
    certified: bool
    total_evolved_time: float
    time_budget: float
    rng_seed: int


def run_traversal(
    target,
    rng_seed: int,
    k_schedule: str = "log",
    T: float | None = None,
    k: int | None = None,
    max_repetitions: int | None = None,
) -> TraversalRecord:
    """One traversal experiment: repeat the randomized-time walk from the
    entrance until the exit is measured or the repetition budget runs out.

    target is either an even integer (column-space mode) or a
    GluedTreesInstance (full-graph mode; the generator is built through
    oracle queries and success is recognized by the degree-2 test on the
    measured label, never by peeking at the exit's identity).
    """
    if isinstance(target, GluedTreesInstance):
        mode = "full"
        two_n = 2 * (target.depth + 1)
        h, labels = full_hamiltonian(target)
        start = labels.index(target.entrance)
        exit_index = labels.index(target.exit)
        dim = len(labels)
    else:
        mode = "column"
        two_n = int(target)
        h = column_hamiltonian(two_n)
        labels = None
        start, exit_index, dim = 0, two_n - 1, two_n
    n = two_n // 2
    t_def, k_def, reps_def = default_schedule(two_n, k_schedule)
    T = t_def if T is None else float(T)
    k = k_def if k is None else int(k)
    max_repetitions = reps_def if max_repetitions is None else int(max_repetitions)

    dec = spectral.decompose(h)
    psi0 = walk.basis_state(dim, start)
    y = walk.basis_state(dim, exit_index)
    dist = TimeDistribution(T=T, k=k)
    p_shot = walk.avg_probability_exact(h, psi0, y, dist, dec=dec)
    floor = 1.0 / (20 * n)
    certified = bool(p_shot >= floor - 1e-12)

    rng = rng_stream(rng_seed, 11)
    ts = rng.random((max_repetitions, k)).sum(axis=1) * T
    c = dec.eigenvectors.conj().T @ psi0.amplitudes
    amps = (np.exp(-1j * np.outer(ts, dec.eigenvalues)) * c) @ dec.eigenvectors.T
    probs = np.abs(amps) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    u = rng.random(max_repetitions)
    outcomes = (probs.cumsum(axis=1) >= u[:, None]).argmax(axis=1)

    success = False
    reps_used = max_repetitions
    outcome_name = ""
    for r in range(max_repetitions):
        idx = int(outcomes[r])
        if mode == "full":
            lab = labels[idx]
            nbrs = oracle_neighbors(target, lab)
            hit = len(nbrs) == 2 and lab != target.entrance
            name = lab
        else:
            hit = idx == exit_index
            name = f"col{idx + 1}"
        if hit:
            success = True
            reps_used = r + 1
            outcome_name = name
            break
    total_time = float(ts[:reps_used].sum())
    return TraversalRecord(
        mode=mode,
        two_n=two_n,
        T=T,
        k=k,
        k_schedule=k_schedule,
        max_repetitions=max_repetitions,
        success=success,
        repetitions_used=reps_used,
        outcome=outcome_name,
        per_shot_probability=p_shot,
        per_shot_floor=floor,
        certified=certified,
        total_evolved_time=total_time,
        time_budget=float(max_repetitions) * k * T,
        rng_seed=rng_seed,
    )


def traversal_success_stats(
    two_n: int, rng_seed: int, runs: int, k_schedule: str = "log"
) -> dict:
    """Monte Carlo success statistics for the column-mode traversal.

    Vectorized over runs x repetitions; deterministic for a fixed seed.
    """
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    h = column_hamiltonian(two_n)
    n = two_n // 2
    T, k, reps = default_schedule(two_n, k_schedule)
    dec = spectral.decompose(h)
    psi0 = walk.basis_state(two_n, 0)
    c = dec.eigenvectors.conj().T @ psi0.amplitudes
    rng = rng_stream(rng_seed, 13)
    total = runs * reps
    ts = rng.random((total, k)).sum(axis=1) * T
    amps = (np.exp(-1j * np.outer(ts, dec.eigenvalues)) * c) @ dec.eigenvectors.T
    probs = np.abs(amps) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    u = rng.random(total)
    outcomes = (probs.cumsum(axis=1) >= u[:, None]).argmax(axis=1).reshape(runs, reps)
    hits = outcomes == (two_n - 1)
    any_hit = hits.any(axis=1)
    first = np.where(any_hit, hits.argmax(axis=1) + 1, reps)
    return {
        "runs": int(runs),
        "success_fraction": float(any_hit.mean()),
        "mean_repetitions": float(first.mean()),
        "T": float(T),
        "k": int(k),
        "max_repetitions": int(reps),
        "per_shot_floor": 1.0 / (20 * n),
    }


# ---------------------------------------------------------------------------
# serialization


def instance_to_json(inst: GluedTreesInstance) -> str:
    """Schema: {depth, entrance, exit, adjacency: {label: [labels]}}."""
    payload = {
        "depth": inst.depth,
        "entrance": inst.entrance,
        "exit": inst.exit,
        "adjacency": {lab: list(nbrs) for lab, nbrs in sorted(inst.adjacency.items())},
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def instance_from_json(text: str) -> GluedTreesInstance:
    data = json.loads(text)
    try:
        inst = GluedTreesInstance(
            depth=int(data["depth"]),
            entrance=data["entrance"],
            exit=data["exit"],
            adjacency={lab: tuple(nbrs) for lab, nbrs in data["adjacency"].items()},
        )
    except KeyError as exc:
        raise ValidationError(f"instance JSON missing field {exc}") from None
    validate_instance(inst)
    return inst
