"""Independent oracles for the test suite.

Everything here is deliberately brute force: exact rational arithmetic,
dense fixpoint iteration, exhaustive enumeration over edge indicator
vectors.  None of it shares code with the library paths it checks.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def exact_pi(t: int, r: int, k_p: int, k_q: int, p: float, q: float) -> Fraction:
    """Pr[Bin(k_p*t, p) + Bin(k_q*t, q) >= r] in exact rational arithmetic."""
    fp, fq = Fraction(p), Fraction(q)
    trials_p, trials_q = k_p * t, k_q * t
    head = Fraction(0)
    for total in range(min(r, trials_p + trials_q + 1)):
        for i in range(total + 1):
            j = total - i
            if i <= trials_p and j <= trials_q:
                head += (
                    Fraction(math.comb(trials_p, i)) * fp**i * (1 - fp) ** (trials_p - i)
                    * Fraction(math.comb(trials_q, j)) * fq**j * (1 - fq) ** (trials_q - j)
                )
    return 1 - head


def exact_sum_pmf(t: int, j: int, k_p: int, k_q: int, p: float, q: float) -> Fraction:
    """Pr[Bin(k_p*t, p) + Bin(k_q*t, q) = j] exactly."""
    fp, fq = Fraction(p), Fraction(q)
    trials_p, trials_q = k_p * t, k_q * t
    total = Fraction(0)
    for i in range(j + 1):
        if i <= trials_p and j - i <= trials_q:
            total += (
                Fraction(math.comb(trials_p, i)) * fp**i * (1 - fp) ** (trials_p - i)
                * Fraction(math.comb(trials_q, j - i)) * fq ** (j - i) * (1 - fq) ** (trials_q - j + i)
            )
    return total


def dense_fixpoint(n: int, edge_u: np.ndarray, edge_v: np.ndarray,
                   thresholds: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Final infected set of threshold percolation by dense fixpoint iteration."""
    adjacency = np.zeros((n, n), dtype=np.int64)
    adjacency[edge_u, edge_v] = 1
    adjacency[edge_v, edge_u] = 1
    infected = np.zeros(n, dtype=bool)
    infected[np.asarray(seeds, dtype=np.int64)] = True
    while True:
        fresh = (~infected) & (adjacency @ infected >= thresholds)
        if not fresh.any():
            return np.flatnonzero(infected)
        infected |= fresh


def _indicator_matrix(width: int) -> np.ndarray:
    """All 2^width edge indicator vectors as a (2^width, width) 0/1 array."""
    rows = np.arange(1 << width, dtype=np.int64)[:, None]
    return (rows >> np.arange(width)[None, :]) & 1


def enum_residual_er(m: int, delta: int, p: float, r: int) -> np.ndarray:
    """Exposure law by enumeration over all 2^(m+delta) edge indicator vectors."""
    bits = _indicator_matrix(m + delta)
    ones = bits.sum(axis=1)
    weights = p**ones * (1.0 - p) ** (m + delta - ones)
    prior = bits[:, :m].sum(axis=1)
    keep = prior <= r - 1
    out = np.bincount(ones[keep], weights=weights[keep], minlength=1)
    return out / out.sum()


def _indicator_tally(m: int, delta: int, prob: float) -> dict[tuple[int, int], float]:
    """Weights of (prior count, total count) over indicator vectors."""
    bits = _indicator_matrix(m + delta)
    ones = bits.sum(axis=1)
    weights = prob**ones * (1.0 - prob) ** (m + delta - ones)
    prior = bits[:, :m].sum(axis=1)
    tally: dict[tuple[int, int], float] = {}
    for d, a, w in zip(prior.tolist(), ones.tolist(), weights.tolist()):
        key = (d, a)
        tally[key] = tally.get(key, 0.0) + w
    return tally


def enum_residual_tm(
    m_near: int, d_near: int, m_far: int, d_far: int, p: float, q: float, r: int
) -> np.ndarray:
    """Joint (near, far) exposure law by enumeration, conditioned on survival.

    Near and far edges are independent, so the enumeration factorizes into
    indicator tallies joined through the constraint prior_near + prior_far
    <= r - 1.
    """
    near = _indicator_tally(m_near, d_near, p)
    far = _indicator_tally(m_far, d_far, q)
    out = np.zeros((m_near + d_near + 1, m_far + d_far + 1))
    total = 0.0
    for (dn, b), wn in near.items():
        for (df, c), wf in far.items():
            if dn + df <= r - 1:
                out[b, c] += wn * wf
                total += wn * wf
    return out / total


def enum_thinning(joint: np.ndarray, alpha_p: float, alpha_q: float) -> np.ndarray:
    """Push a small joint law through per-edge retention by enumeration."""
    rows, cols = joint.shape
    out = np.zeros_like(joint)
    for d in range(rows):
        for e in range(cols):
            mass = joint[d, e]
            if mass == 0.0:
                continue
            for keep_near in itertools.product((0, 1), repeat=d):
                w_near = 1.0
                for bit in keep_near:
                    w_near *= alpha_p if bit else 1.0 - alpha_p
                for keep_far in itertools.product((0, 1), repeat=e):
                    w_far = 1.0
                    for bit in keep_far:
                        w_far *= alpha_q if bit else 1.0 - alpha_q
                    out[sum(keep_near), sum(keep_far)] += mass * w_near * w_far
    return out


def janson_phi(n: int, p: float, r: int) -> float:
    """Classical single-block critical seed size for uniform threshold r."""
    return (1.0 - 1.0 / r) * (math.factorial(r - 1) / (n * p**r)) ** (1.0 / (r - 1))


def tv_distance(a: np.ndarray, b: np.ndarray) -> float:
    size = max(a.size, b.size)
    pa, pb = np.zeros(size), np.zeros(size)
    pa[: a.size] = a
    pb[: b.size] = b
    return 0.5 * float(np.abs(pa - pb).sum())


def tv_distance_2d(a: np.ndarray, b: np.ndarray) -> float:
    rows = max(a.shape[0], b.shape[0])
    cols = max(a.shape[1], b.shape[1])
    pa = np.zeros((rows, cols))
    pb = np.zeros((rows, cols))
    pa[: a.shape[0], : a.shape[1]] = a
    pb[: b.shape[0], : b.shape[1]] = b
    return 0.5 * float(np.abs(pa - pb).sum())
