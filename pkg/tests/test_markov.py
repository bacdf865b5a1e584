"""Reversible-chain layer: validation, interpolation, hitting times."""
import math

import numpy as np
import pytest

from ctqw import markov
from ctqw.errors import (
    InconsistencyError,
    IrreversibleChainError,
    MarkedWeightError,
    NonErgodicError,
    ValidationError,
)

TWO_STATE = np.array([[0.7, 0.3], [0.2, 0.8]])


def star_with_heavy_center(extra: float = 10.0) -> np.ndarray:
    """Random walk on K_{1,4} with a weight-`extra` self-loop at the center.

    Plain stars put exactly half the stationary weight on the center; the
    self-loop pushes it strictly above 1/2.
    """
    w = np.zeros((5, 5))
    w[0, 1:] = w[1:, 0] = 1.0
    w[0, 0] = extra
    p = w / w.sum(axis=1, keepdims=True)
    return p


# ---------------------------------------------------------------------------
# validation and stationary distributions


def test_complete_chain_uniform_stationary():
    chain = markov.complete_chain(8)
    assert np.allclose(chain.pi, np.full(8, 1 / 8), atol=1e-12)
    assert chain.detailed_balance_residual <= 1e-12


def test_directed_cycle_rejected():
    p = np.roll(np.eye(3), 1, axis=1)
    with pytest.raises(IrreversibleChainError) as exc:
        markov.validate_chain(p)
    assert "residual" in str(exc.value) or "balance" in str(exc.value)


def test_disconnected_chain_rejected():
    p = np.eye(4)
    with pytest.raises(NonErgodicError):
        markov.validate_chain(p)


def test_bad_row_sums_rejected():
    p = np.array([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(ValidationError):
        markov.validate_chain(p)


def test_weighted_degree_stationary():
    # symmetric weights: pi is proportional to weighted degree
    rng = np.random.default_rng(55)
    w = rng.random((6, 6)) + 0.1
    w = w + w.T
    p = w / w.sum(axis=1, keepdims=True)
    chain = markov.validate_chain(p)
    expect = w.sum(axis=1) / w.sum()
    assert np.max(np.abs(chain.pi - expect)) <= 1e-12


def test_periodic_chain_needs_flag():
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValidationError):
        markov.validate_chain(p)
    chain = markov.validate_chain(p, require_aperiodic=False)
    assert not chain.aperiodic


# ---------------------------------------------------------------------------
# lazification


def test_lazify_keeps_stationary_maps_spectrum():
    base = markov.validate_chain(np.array([[0.0, 1.0], [1.0, 0.0]]), require_aperiodic=False)
    lazy = markov.lazify(base)
    assert lazy.lazified and lazy.aperiodic
    assert np.allclose(lazy.pi, base.pi, atol=1e-14)
    evals = np.sort(np.linalg.eigvals(lazy.P).real)
    assert evals[0] == pytest.approx(0.0, abs=1e-12)  # -1 maps to 0
    d_evals = np.linalg.eigvalsh(markov.discriminant(lazy.P))
    assert np.all(d_evals >= -1e-12)


def test_lazify_doubles_hitting_time():
    base = markov.validate_chain(TWO_STATE)
    lazy = markov.lazify(base)
    ht = markov.classical_hitting_time(base, 0)
    assert markov.classical_hitting_time(lazy, 0) == pytest.approx(2.0 * ht, rel=1e-12)


def test_sampled_hitting_time_matches_solve():
    lazy = markov.lazify(markov.validate_chain(TWO_STATE))
    out = markov.sample_hitting_time(lazy, marked=0, rng_seed=97, walks=20000)
    assert abs(out["mean"] - out["exact"]) <= 3.0 * out["std_error"]


# ---------------------------------------------------------------------------
# interpolation and s*


def test_interpolate_endpoints():
    chain = markov.complete_chain(5)
    p0 = markov.interpolate(chain, 2, 0.0)
    assert np.allclose(p0.P_s, chain.P, atol=1e-14)
    p1 = markov.interpolate(chain, 2, 1.0)
    absorbing = np.zeros(5)
    absorbing[2] = 1.0
    assert np.allclose(p1.P_s[2], absorbing, atol=1e-14)
    with pytest.raises(ValidationError):
        markov.interpolate(chain, 2, 1.5)
    with pytest.raises(ValidationError):
        markov.interpolate(chain, 2, -0.1)


def test_interpolated_stationary_closed_form():
    chain = markov.validate_chain(TWO_STATE)
    for s in (0.0, 0.25, 0.8):
        ic = markov.interpolate(chain, 0, s)
        pv = chain.pi[0]
        z = (1 - s) * (1 - pv) + pv
        assert ic.pi_s[0] == pytest.approx(pv / z, rel=1e-12)
        # stationarity of the closed form under P_s
        assert np.max(np.abs(ic.pi_s @ ic.P_s - ic.pi_s)) <= 1e-12


def test_s_star_values():
    assert markov.s_star(markov.complete_chain(8), 3) == pytest.approx(1.0 - 1.0 / 7.0, rel=1e-12)
    # pi_v exactly 1/2 (star center): boundary value 0
    w = np.zeros((5, 5))
    w[0, 1:] = w[1:, 0] = 1.0
    star = markov.validate_chain(w / w.sum(axis=1, keepdims=True), require_aperiodic=False)
    assert star.pi[0] == pytest.approx(0.5, abs=1e-14)
    assert markov.s_star(star, 0) == 0.0
    # vanishing marked weight pushes s* toward 1
    assert markov.s_star(markov.complete_chain(400), 0) > 0.99


def test_s_star_overweight_vertex_rejected():
    chain = markov.validate_chain(star_with_heavy_center())
    assert chain.pi[0] > 0.5
    with pytest.raises(MarkedWeightError):
        markov.s_star(chain, 0)


def test_marked_weight_at_s_star():
    chain = markov.complete_chain(8)
    s = markov.s_star(chain, 1)
    ic = markov.interpolate(chain, 1, s)
    assert ic.pi_s[1] == pytest.approx(0.5, abs=1e-12)
    # top discriminant eigenvector puts weight 1/sqrt(2) on the marked vertex
    d = markov.discriminant(ic.P_s)
    evals, evecs = np.linalg.eigh(d)
    top = np.abs(evecs[:, -1])
    assert top[1] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-10)


# ---------------------------------------------------------------------------
# hitting times


def test_hitting_time_single_state():
    chain = markov.validate_chain(np.array([[1.0]]))
    assert markov.classical_hitting_time(chain, 0) == 0.0


def test_two_state_hand_oracle():
    # from state 1, absorb at 0: h = 1 + 0.8 h so h = 5; HT averages over
    # pi = (0.4, 0.6): 0.6 * 5 = 3. s* = 1 - 0.4/0.6 = 1/3; the interpolated
    # discriminant gap at s* is 0.4, so gap * HT = 1.2
    chain = markov.validate_chain(TWO_STATE)
    assert np.allclose(chain.pi, [0.4, 0.6], atol=1e-12)
    assert markov.classical_hitting_time(chain, 0) == pytest.approx(3.0, rel=1e-12)
    rec = markov.gap_vs_hitting_time(chain, 0)
    assert rec.s_star == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert rec.gap_at_s_star == pytest.approx(0.4, rel=1e-10)
    assert rec.product == pytest.approx(1.2, rel=1e-10)


def test_sample_hitting_time_three_sigma():
    for chain, marked in ((markov.complete_chain(6), 2), (markov.cycle_chain(5), 0)):
        out = markov.sample_hitting_time(chain, marked, rng_seed=31, walks=20000)
        assert abs(out["mean"] - out["exact"]) <= 3.0 * out["std_error"]
        assert out["walks"] == 20000


def test_gap_hitting_time_floor():
    # Delta(s*) * HT stays above the constant 1 on both families
    for n in (4, 8, 16, 32):
        rec = markov.gap_vs_hitting_time(markov.complete_chain(n), 0)
        assert rec.product >= 1.0
    for n in (4, 8, 16):
        rec = markov.gap_vs_hitting_time(markov.cycle_chain(n), 0)
        assert rec.product >= 1.0


# ---------------------------------------------------------------------------
# discriminant similarity


def test_discriminant_similar_to_interpolated_chain():
    chain = markov.random_reversible_chain(6, seed=8)
    for s in (0.0, 0.3, 0.7):
        ic = markov.interpolate(chain, 4, s)
        d = markov.discriminant(ic.P_s)
        ev_d = np.sort(np.linalg.eigvalsh(d))
        ev_p = np.sort(np.linalg.eigvals(ic.P_s).real)
        assert np.max(np.abs(ev_d - ev_p)) <= 1e-8
        # top eigenvector is sqrt(pi_s) up to sign
        _, evecs = np.linalg.eigh(d)
        top = evecs[:, -1]
        top = top * np.sign(top[np.argmax(np.abs(top))])
        assert np.max(np.abs(top - np.sqrt(ic.pi_s))) <= 1e-8


def test_gap_continuity_on_grid():
    chain = markov.random_reversible_chain(5, seed=3)
    rows = markov.interpolation_sweep(chain, 1, points=100)
    gaps = [g for _, g, _ in rows]
    assert all(g > 0 for g in gaps)
    diffs = [abs(b - a) for a, b in zip(gaps, gaps[1:])]
    for i in range(1, len(diffs) - 1):
        assert diffs[i] <= 10.0 * max(diffs[i - 1], diffs[i + 1]) + 1e-12


# ---------------------------------------------------------------------------
# payloads


def test_payload_round_trip_dense():
    chain = markov.random_reversible_chain(4, seed=2)
    payload = markov.chain_to_payload(chain, marked=3)
    back, marked = markov.chain_from_payload(payload)
    assert marked == 3
    assert np.allclose(back.P, chain.P, atol=1e-15)


def test_payload_weighted_graph():
    payload = {
        "n": 3,
        "format": "weighted-graph",
        "data": [[0, 1, 2.0], [1, 2, 1.0], [0, 2, 1.0]],
        "marked": 1,
    }
    chain, marked = markov.chain_from_payload(payload)
    assert marked == 1
    w = np.array([[0, 2, 1], [2, 0, 1], [1, 1, 0]], dtype=float)
    assert np.allclose(chain.P, w / w.sum(axis=1, keepdims=True), atol=1e-14)


def test_payload_bad_format_rejected():
    with pytest.raises(ValidationError):
        markov.chain_from_payload({"n": 2, "format": "sparse", "data": [], "marked": 0})


def test_write_interpolation_sweep(tmp_path):
    chain = markov.complete_chain(4)
    out = tmp_path / "sweep.csv"
    markov.write_interpolation_sweep(out, chain, marked=0, points=11)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "s,gap,pi_marked"
    assert len(lines) == 13
    first = lines[2].split(",")
    assert float(first[0]) == 0.0


def test_sample_hitting_time_cap_raises():
    chain = markov.complete_chain(8)
    with pytest.raises(InconsistencyError):
        markov.sample_hitting_time(chain, 0, rng_seed=1, walks=50, max_steps=1)
