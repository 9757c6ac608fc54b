"""Ground-truth machinery: exhaustive enumeration and Monte-Carlo ML decoding.

The reference encoders here are deliberately naive and independent of the
dynamic-programming enumerators, so that agreement between the two is a
meaningful check.  ML simulation uses exact log densities (true Gaussians
for BiAWGN), never the quadrature tables used on the bound side.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channels import DEFAULT_QUAD, ParallelChannelSet
from .spectra import Iowe, ResourceError, SpectraError, NEG_INF

__all__ = [
    "ExplicitCode",
    "MlTrialResult",
    "exhaustive_iowe",
    "exhaustive_interleaver_average",
    "ml_montecarlo",
    "wilson_interval",
    "enc_accumulate",
    "enc_repeat",
    "enc_rsc",
    "enc_partial_accumulate",
    "enc_punctured",
]

MC_BATCH = 8192  # fixed batch size keeps trial streams independent of threading


# ---------------------------------------------------------------------------
# Reference encoders (bit arrays in, bit arrays out)
# ---------------------------------------------------------------------------

def enc_accumulate(bits: np.ndarray) -> np.ndarray:
    """x_i = u_1 xor ... xor u_i."""
    return np.cumsum(bits) % 2


def enc_repeat(bits: np.ndarray, q: int) -> np.ndarray:
    return np.repeat(bits, q)


def enc_partial_accumulate(bits: np.ndarray, M: int) -> np.ndarray:
    """Accumulate the first M bits, pass the rest through unchanged."""
    out = np.array(bits, copy=True)
    out[:M] = np.cumsum(bits[:M]) % 2
    return out


def enc_rsc(bits: np.ndarray, feedback: int, forward: int, terminated: bool = False,
            parity_only: bool = False) -> np.ndarray:
    """Recursive systematic convolutional encoder [1, forward/feedback].

    Polynomials are bit masks (bit i = coefficient of D^i).  With
    ``terminated``, tail inputs force the register back to zero; tail
    outputs are appended.
    """
    memory = max(feedback.bit_length(), forward.bit_length()) - 1
    state = 0
    sys_out, par_out = [], []

    def step(u):
        nonlocal state
        fb = bin(state & (feedback >> 1)).count("1") & 1
        v = u ^ fb
        parity = (v & forward & 1) ^ (bin(state & (forward >> 1)).count("1") & 1)
        sys_out.append(u)
        par_out.append(parity)
        state = ((state << 1) | v) & ((1 << memory) - 1)

    for u in bits:
        step(int(u))
    if terminated:
        for _ in range(memory):
            fb = bin(state & (feedback >> 1)).count("1") & 1
            step(fb)
    if parity_only:
        return np.array(par_out)
    return np.array([b for pair in zip(sys_out, par_out) for b in pair])


def enc_punctured(encode, mask) -> "callable":
    """Wrap an encoder with a periodic keep-mask over its output positions."""
    mask = np.asarray(mask, dtype=int)

    def punctured(bits):
        out = np.asarray(encode(bits))
        keep = mask[np.arange(out.size) % mask.size].astype(bool)
        return out[keep]

    return punctured


# ---------------------------------------------------------------------------
# Exhaustive oracles
# ---------------------------------------------------------------------------

def _all_inputs(K: int):
    """All 2^K binary vectors, lexicographic."""
    return ((np.arange(2**K)[:, None] >> np.arange(K - 1, -1, -1)) & 1).astype(np.int8)


def exhaustive_iowe(encode, K: int, max_K: int = 16) -> Iowe:
    """Exact integer IOWE of an arbitrary encoder by full 2^K enumeration."""
    if K > max_K:
        raise ResourceError(f"exhaustive enumeration of 2^{K} inputs refused (cap {max_K})")
    inputs = _all_inputs(K)
    n = len(np.asarray(encode(inputs[0])))
    counts = np.zeros((K + 1, n + 1), dtype=np.int64)
    for u in inputs:
        w = int(u.sum())
        h = int(np.asarray(encode(u)).sum())
        counts[w, h] += 1
    with np.errstate(divide="ignore"):
        return Iowe(K, n, np.log(counts.astype(float)))


def exhaustive_interleaver_average(outer_encode, K: int, inner_encode, n_mid: int,
                                   max_mid: int = 7) -> Iowe:
    """Exact ensemble average of outer -> permutation -> inner over all permutations."""
    if n_mid > max_mid:
        raise ResourceError(f"averaging over {n_mid}! permutations refused (cap {max_mid})")
    inputs = _all_inputs(K)
    mids = [np.asarray(outer_encode(u)) for u in inputs]
    if any(m.size != n_mid for m in mids):
        raise SpectraError("outer encoder output length does not match n_mid")
    n = len(np.asarray(inner_encode(mids[0])))
    perms = list(itertools.permutations(range(n_mid)))
    counts = np.zeros((K + 1, n + 1), dtype=np.float64)
    for u, mid in zip(inputs, mids):
        w = int(u.sum())
        for perm in perms:
            h = int(np.asarray(inner_encode(mid[list(perm)])).sum())
            counts[w, h] += 1.0
    counts /= len(perms)
    with np.errstate(divide="ignore"):
        return Iowe(K, n, np.log(counts))


# ---------------------------------------------------------------------------
# Monte-Carlo ML decoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExplicitCode:
    """A code given by its full codeword list (rows of a 0/1 matrix)."""

    words: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.words, dtype=np.int8))
        object.__setattr__(self, "words", arr)
        if not np.any(~arr.any(axis=1)):
            raise SpectraError("code must contain the all-zero word")
        if arr.shape[0] > 2**16:
            raise ResourceError("explicit codes are capped at 2^16 words")

    @property
    def M(self) -> int:
        return self.words.shape[0]

    @property
    def n(self) -> int:
        return self.words.shape[1]

    @classmethod
    def from_generator(cls, G) -> "ExplicitCode":
        G = np.asarray(G, dtype=np.int8)
        k = G.shape[0]
        msgs = _all_inputs(k)
        return cls(msgs @ G % 2)

    @classmethod
    def repetition(cls, n: int) -> "ExplicitCode":
        return cls(np.vstack([np.zeros(n, np.int8), np.ones(n, np.int8)]))

    @classmethod
    def hamming_7_4(cls) -> "ExplicitCode":
        G = np.array([
            [1, 0, 0, 0, 1, 1, 0],
            [0, 1, 0, 0, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ])
        return cls.from_generator(G)

    @classmethod
    def random_linear(cls, n: int, k: int, seed: int = 7) -> "ExplicitCode":
        """Deterministic full-rank random generator matrix code."""
        rng = np.random.Generator(np.random.Philox(seed))
        while True:
            G = rng.integers(0, 2, size=(k, n), dtype=np.int8)
            if _gf2_rank(G) == k:
                return cls.from_generator(G)

    def distance_spectrum_log(self) -> np.ndarray:
        counts = np.bincount(self.words.sum(axis=1), minlength=self.n + 1)
        with np.errstate(divide="ignore"):
            return np.log(counts.astype(float))

    @classmethod
    def from_file(cls, path) -> "ExplicitCode":
        rows = []
        with open(path) as f:
            for ln in f:
                ln = ln.strip()
                if ln and not ln.startswith("#"):
                    rows.append([int(c) for c in ln])
        return cls(np.array(rows, dtype=np.int8))


def _gf2_rank(mat) -> int:
    m = np.array(mat, dtype=np.int8) % 2
    rank = 0
    for col in range(m.shape[1]):
        pivot = np.nonzero(m[rank:, col])[0]
        if pivot.size == 0:
            continue
        r = rank + pivot[0]
        m[[rank, r]] = m[[r, rank]]
        hits = np.nonzero(m[:, col])[0]
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return rank


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95 percent score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class MlTrialResult:
    trials: int
    errors: int
    estimate: float
    ci_lo: float
    ci_hi: float
    seed: int

    @property
    def std_error(self) -> float:
        p = self.estimate
        return math.sqrt(max(p * (1 - p), 1e-300) / self.trials)


def _exact_log_densities(channel, y, bits01):
    """Exact ln p(y | bit) for a channel; y encoding depends on the kind."""
    if channel.kind == "biawgn":
        mu = math.sqrt(2.0 * channel.param)
        s = np.where(bits01 == 0, mu, -mu)
        return -0.5 * (y - s) ** 2  # common Gaussian constant drops out
    if channel.kind == "bsc":
        p = channel.param
        with np.errstate(divide="ignore"):
            return np.where(y == bits01, math.log(max(1 - p, 1e-300)) if p < 1 else NEG_INF,
                            math.log(p) if p > 0 else NEG_INF)
    if channel.kind == "bec":
        e = channel.param
        out = np.full(y.shape, NEG_INF)
        out[y == 2] = math.log(e) if e > 0 else NEG_INF  # erasure symbol
        match = (y == bits01)
        out[match] = math.log(1 - e) if e < 1 else NEG_INF
        return out
    raise SpectraError(f"ml_montecarlo does not support channel kind {channel.kind!r}")


def ml_montecarlo(code: ExplicitCode, channel_set: ParallelChannelSet, trials: int,
                  seed: int = 0, assignment="random") -> MlTrialResult:
    """Estimate the block error probability of exact ML decoding.

    Per trial: draw a codeword uniformly, draw the per-position channel
    assignment (or use a fixed map), draw channel outputs, decode by the
    exact maximum of the summed log densities over all codewords with
    uniform random tie-breaking.  Trials are batched with per-batch
    counter-derived streams, so results depend only on (seed, trials).
    """
    words = code.words
    M, n = words.shape
    fixed_map = None
    if not isinstance(assignment, str):
        fixed_map = np.asarray(assignment, dtype=int)
        if fixed_map.shape != (n,):
            raise SpectraError("fixed assignment must give one channel index per position")
    elif assignment != "random":
        raise SpectraError(f"unknown assignment mode {assignment!r}")

    alphas = np.asarray(channel_set.alphas)
    errors = 0
    done = 0
    batch_idx = 0
    while done < trials:
        b = min(MC_BATCH, trials - done)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, batch_idx])))
        tx = rng.integers(0, M, size=b)
        if fixed_map is None:
            amap = rng.choice(len(alphas), size=(b, n), p=alphas)
        else:
            amap = np.broadcast_to(fixed_map, (b, n))
        sent = words[tx]  # (b, n)

        # channel outputs and per-position log densities under both inputs
        lp = np.zeros((2, b, n))
        y = np.zeros((b, n))
        for j, ch in enumerate(channel_set.channels):
            mask = amap == j
            cnt = int(mask.sum())
            if cnt == 0:
                continue
            xbits = sent[mask]
            if ch.kind == "biawgn":
                mu = math.sqrt(2.0 * ch.param)
                yj = np.where(xbits == 0, mu, -mu) + rng.standard_normal(cnt)
            elif ch.kind == "bsc":
                flips = rng.random(cnt) < ch.param
                yj = (xbits ^ flips).astype(float)
            elif ch.kind == "bec":
                erased = rng.random(cnt) < ch.param
                yj = np.where(erased, 2.0, xbits.astype(float))
            else:
                raise SpectraError(f"unsupported channel kind {ch.kind!r}")
            y[mask] = yj
            lp[0][mask] = _exact_log_densities(ch, yj, np.zeros(cnt, dtype=np.int8))
            lp[1][mask] = _exact_log_densities(ch, yj, np.ones(cnt, dtype=np.int8))

        # score all codewords: sum_i lp[c_i, trial, i]
        # impossible outputs carry -inf; clamp so 0 * -inf cannot poison the matmul
        lp = np.maximum(lp, -1e30)
        scores = lp[0] @ (1 - words.T.astype(float)) + lp[1] @ words.T.astype(float)
        best = scores.max(axis=1, keepdims=True)
        ties = scores == best
        n_ties = ties.sum(axis=1)
        pick = (rng.random(b) * n_ties).astype(int)
        # index of the pick-th tied codeword per row
        order = np.cumsum(ties, axis=1) - 1
        chosen = np.argmax((order == pick[:, None]) & ties, axis=1)
        errors += int(np.sum(chosen != tx))

        done += b
        batch_idx += 1

    est = errors / trials
    lo, hi = wilson_interval(errors, trials)
    return MlTrialResult(trials, errors, est, lo, hi, seed)
