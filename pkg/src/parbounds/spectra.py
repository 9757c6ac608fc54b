"""Input-output weight enumerators (IOWEs) of binary linear encoders.

Everything is kept in the natural-log domain: ``logA[w, h]`` is the log of
the (possibly ensemble-average, hence non-integer) number of codewords with
input weight w and output weight h, with -inf marking empty cells.  The
exhaustive integer oracles live in :mod:`parbounds.oracle`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "SpectraError",
    "ResourceError",
    "log_binomial",
    "log_sum_exp",
    "Iowe",
    "DistanceSpectrum",
    "SpectralExponent",
    "rep_iowe",
    "acc_iowe",
    "FsmEncoder",
    "fsm_iowe",
    "uniform_concat",
    "puncture_random",
    "systematic_join",
    "partial_precode",
    "turbo_two_branch",
    "to_distance",
    "exponent_of",
]

NEG_INF = -np.inf


class SpectraError(ValueError):
    """Contract violation in an enumerator operation."""


class ResourceError(RuntimeError):
    """An operation would exceed its configured memory budget."""


def log_binomial(n, k):
    """log C(n, k) through log-gamma; raises on k outside [0, n]."""
    n_arr = np.asarray(n, dtype=float)
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0) or np.any(k_arr > n_arr):
        raise SpectraError("binomial index k out of range [0, n]")
    out = gammaln(n_arr + 1.0) - gammaln(k_arr + 1.0) - gammaln(n_arr - k_arr + 1.0)
    return float(out) if np.isscalar(n) and np.isscalar(k) else out


def _log_binom_safe(n, k):
    """Vectorized log C(n, k) with -inf outside the valid range."""
    n_arr = np.asarray(n, dtype=float)
    k_arr = np.asarray(k, dtype=float)
    valid = (k_arr >= 0) & (k_arr <= n_arr) & (n_arr >= 0)
    out = np.full(np.broadcast(n_arr, k_arr).shape, NEG_INF)
    if np.any(valid):
        nv = np.broadcast_to(n_arr, out.shape)[valid]
        kv = np.broadcast_to(k_arr, out.shape)[valid]
        out[valid] = gammaln(nv + 1.0) - gammaln(kv + 1.0) - gammaln(nv - kv + 1.0)
    return out


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) with exact handling of +-inf edge cases."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return NEG_INF
    if np.any(np.isposinf(arr)):
        return np.inf
    finite = arr[arr > NEG_INF]
    if finite.size == 0:
        return NEG_INF
    return float(logsumexp(finite))


def _lse_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    """logsumexp along an axis, mapping all -inf slices to -inf silently."""
    with np.errstate(invalid="ignore"):
        out = logsumexp(arr, axis=axis)
    return np.where(np.isnan(out), NEG_INF, out)


@dataclass
class Iowe:
    """Input-output weight enumerator of a code or ensemble.

    ``logA`` has shape (K+1, n+1); entry (w, h) is ln of the average number
    of codewords with information weight w and codeword weight h.
    """

    K: int
    n: int
    logA: np.ndarray

    def __post_init__(self):
        self.logA = np.asarray(self.logA, dtype=float)
        if self.logA.shape != (self.K + 1, self.n + 1):
            raise SpectraError(
                f"logA shape {self.logA.shape} does not match (K+1, n+1)="
                f"{(self.K + 1, self.n + 1)}"
            )
        if not np.isclose(self.logA[0, 0], 0.0, atol=1e-9):
            raise SpectraError("a linear code must contain exactly one all-zero word")
        if self.n >= 1 and np.any(self.logA[0, 1:] > NEG_INF):
            raise SpectraError("input weight 0 cannot produce nonzero output weight")

    def total_log(self) -> float:
        """ln of the total codeword count (2^K for a complete enumerator)."""
        return log_sum_exp(self.logA.ravel())

    @classmethod
    def identity(cls, K: int) -> "Iowe":
        logA = np.full((K + 1, K + 1), NEG_INF)
        w = np.arange(K + 1)
        logA[w, w] = _log_binom_safe(K, w)
        return cls(K, K, logA)


@dataclass
class DistanceSpectrum:
    """Distance spectrum logA_h (block) or its w/K-weighted variant (bit)."""

    n: int
    logA: np.ndarray
    weighting: str = "block"
    K: int | None = None

    def __post_init__(self):
        self.logA = np.asarray(self.logA, dtype=float)
        if self.logA.shape != (self.n + 1,):
            raise SpectraError("spectrum length must be n+1")
        if self.weighting not in ("block", "bit"):
            raise SpectraError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "block" and not np.isclose(self.logA[0], 0.0, atol=1e-9):
            raise SpectraError("block spectrum must have A_0 = 1")


@dataclass
class SpectralExponent:
    """Samples (delta_i, r_i) of the normalized log spectrum r = ln(A_h)/n."""

    delta: np.ndarray
    r: np.ndarray
    n: int | None = None

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.delta.shape != self.r.shape:
            raise SpectraError("delta and r must have equal shapes")
        if np.any(np.diff(self.delta) <= 0):
            raise SpectraError("delta grid must be strictly increasing")

    def interp(self, delta: float) -> float:
        """Linear interpolation of r at delta (finite samples only)."""
        mask = np.isfinite(self.r)
        if not np.any(mask):
            return NEG_INF
        return float(np.interp(delta, self.delta[mask], self.r[mask]))


def rep_iowe(N: int, q: int) -> Iowe:
    """Repetition-by-q encoder on N bits: A_{w, qw} = C(N, w)."""
    if N < 1 or q < 2:
        raise SpectraError("repetition needs N >= 1 and q >= 2")
    logA = np.full((N + 1, q * N + 1), NEG_INF)
    w = np.arange(N + 1)
    logA[w, q * w] = _log_binom_safe(N, w)
    return Iowe(N, q * N, logA)


def acc_iowe(n: int) -> Iowe:
    """Accumulator (1/(1+D)) over n bits: A_{w,h} = C(n-h, floor(w/2)) C(h-1, ceil(w/2)-1)."""
    if n < 1:
        raise SpectraError("accumulator needs n >= 1")
    logA = np.full((n + 1, n + 1), NEG_INF)
    logA[0, 0] = 0.0
    w = np.arange(1, n + 1)[:, None]
    h = np.arange(n + 1)[None, :]
    logA[1:, :] = _log_binom_safe(n - h, w // 2) + _log_binom_safe(h - 1, (w + 1) // 2 - 1)
    return Iowe(n, n, logA)


_POLY_TERM = re.compile(r"(1|D(?:\^(\d+))?)")


def _parse_poly(text: str) -> int:
    """Binary polynomial in D as a bit mask (bit i = coefficient of D^i)."""
    mask = 0
    for part in text.replace(" ", "").split("+"):
        m = _POLY_TERM.fullmatch(part)
        if not m:
            raise SpectraError(f"cannot parse polynomial term {part!r}")
        if part == "1":
            mask |= 1
        else:
            mask |= 1 << int(m.group(2) or 1)
    return mask


@dataclass
class FsmEncoder:
    """Binary finite-state encoder given by transition and output tables.

    ``next_state[s, u]`` is the successor of state s on input bit u, and
    ``out_bits[s, u]`` the tuple of output bits emitted on that transition.
    ``termination[s]`` is the input driving state s one step toward zero.
    """

    next_state: np.ndarray
    out_bits: np.ndarray  # shape (S, 2, n_out), entries in {0, 1}
    termination: np.ndarray
    memory: int

    def __post_init__(self):
        self.next_state = np.asarray(self.next_state, dtype=np.int64)
        self.out_bits = np.asarray(self.out_bits, dtype=np.int64)
        self.termination = np.asarray(self.termination, dtype=np.int64)

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_out(self) -> int:
        return self.out_bits.shape[2]

    @classmethod
    def accumulator(cls) -> "FsmEncoder":
        next_state = np.array([[0, 1], [1, 0]])
        out = np.array([[[0], [1]], [[1], [0]]])
        term = np.array([0, 1])
        return cls(next_state, out, term, memory=1)

    @classmethod
    def rsc(cls, feedback: int | str, forward: int | str, systematic: bool = True) -> "FsmEncoder":
        """Recursive systematic convolutional encoder [1, forward/feedback].

        Polynomials are bit masks (bit i = coefficient of D^i) or strings
        like ``"1+D+D^2"``.  Output per step: (systematic, parity) when
        ``systematic``, else (parity,) only.
        """
        fb = _parse_poly(feedback) if isinstance(feedback, str) else int(feedback)
        fw = _parse_poly(forward) if isinstance(forward, str) else int(forward)
        if not fb & 1:
            raise SpectraError("feedback polynomial must have a constant term")
        memory = max(fb.bit_length(), fw.bit_length()) - 1
        S = 1 << memory
        next_state = np.zeros((S, 2), dtype=np.int64)
        n_out = 2 if systematic else 1
        out = np.zeros((S, 2, n_out), dtype=np.int64)
        term = np.zeros(S, dtype=np.int64)
        for s in range(S):
            # state bit i of s = register cell holding the value delayed i+1 steps
            fb_sum = bin(s & (fb >> 1)).count("1") & 1
            for u in (0, 1):
                v = u ^ fb_sum  # value entering the shift register
                parity = (v * (fw & 1)) ^ (bin(s & (fw >> 1)).count("1") & 1)
                ns = ((s << 1) | v) & (S - 1)
                next_state[s, u] = ns
                out[s, u] = (u, parity) if systematic else (parity,)
            term[s] = fb_sum  # input choice that shifts a zero in
        return cls(next_state, out, term, memory)

    @classmethod
    def from_g_string(cls, text: str, systematic: bool = True) -> "FsmEncoder":
        """Parse ``"[1,(1+D^4)/(1+D+D^2+D^3+D^4)]"`` into an RSC encoder."""
        m = re.fullmatch(r"\[\s*1\s*,\s*\(?([^()/]+)\)?\s*/\s*\(?([^()/]+)\)?\s*\]", text.strip())
        if not m:
            raise SpectraError(f"cannot parse generator string {text!r}")
        return cls.rsc(feedback=m.group(2), forward=m.group(1), systematic=systematic)


def _termination_path(enc: FsmEncoder, state: int):
    """Forced (input, state) steps driving ``state`` to zero."""
    path = []
    s = state
    for _ in range(enc.memory):
        u = int(enc.termination[s])
        path.append((s, u))
        s = int(enc.next_state[s, u])
    if s != 0:
        raise SpectraError("termination table does not reach the zero state")
    return path


def fsm_iowe(
    enc: FsmEncoder,
    n_steps: int,
    puncture=None,
    terminated: bool = False,
    cell_budget: int = 2**31,
) -> Iowe:
    """Exact IOWE of an FSM encoder by dynamic programming.

    Counts only output positions kept by the periodic ``puncture`` mask
    (an iterable of 0/1 over serialized output positions; None keeps all).
    With ``terminated``, the encoder is driven back to the zero state after
    the n_steps free inputs; tail inputs are excluded from the input weight
    and their kept outputs are included in the output weight.
    """
    if n_steps < 1:
        raise SpectraError("need n_steps >= 1")
    mask = np.asarray(puncture, dtype=np.int64) if puncture is not None else np.ones(1, dtype=np.int64)
    if mask.size == 0 or np.any((mask != 0) & (mask != 1)):
        raise SpectraError("puncture mask must be a nonempty 0/1 pattern")
    S, n_out = enc.n_states, enc.n_out
    total_steps = n_steps + (enc.memory if terminated else 0)
    pos = np.arange(total_steps * n_out)
    kept = mask[pos % mask.size]
    n_kept = int(kept.sum())

    cells = S * (n_steps + 1) * (n_kept + 1)
    if cells > cell_budget:
        raise ResourceError(
            f"fsm_iowe table needs {cells} cells, exceeding the budget of {cell_budget}"
        )

    # per-step kept-output weight for each transition
    def step_weights(t):
        seg = kept[t * n_out : (t + 1) * n_out]
        return (enc.out_bits * seg[None, None, :]).sum(axis=2)  # (S, 2)

    table = np.full((S, n_steps + 1, n_kept + 1), NEG_INF)
    table[0, 0, 0] = 0.0
    for t in range(n_steps):
        dw = step_weights(t)
        new = np.full_like(table, NEG_INF)
        for s in range(S):
            src = table[s]
            if not np.any(src > NEG_INF):
                continue
            for u in (0, 1):
                s2 = enc.next_state[s, u]
                d = int(dw[s, u])
                tgt = new[s2]
                blk = tgt[u : n_steps + 1, d : n_kept + 1]
                np.logaddexp(
                    blk,
                    src[0 : n_steps + 1 - u, 0 : n_kept + 1 - d],
                    out=blk,
                )
        table = new

    if terminated:
        # forced tail inputs: follow each state's zero-driving path
        final = np.full((n_steps + 1, n_kept + 1), NEG_INF)
        for s in range(S):
            if not np.any(table[s] > NEG_INF):
                continue
            d_total = 0
            st = s
            for i, (ps, u) in enumerate(_termination_path(enc, s)):
                seg = kept[(n_steps + i) * n_out : (n_steps + i + 1) * n_out]
                d_total += int((enc.out_bits[ps, u] * seg).sum())
                st = int(enc.next_state[ps, u])
            blk = final[:, d_total : n_kept + 1]
            np.logaddexp(blk, table[s][:, 0 : n_kept + 1 - d_total], out=blk)
        result = final
    else:
        result = _lse_axis(table, axis=0)

    return Iowe(n_steps, n_kept, result)


def uniform_concat(outer: Iowe, inner: Iowe) -> Iowe:
    """Serial concatenation through a uniform interleaver.

    A_{w,h} = sum_m outer_{w,m} inner_{m,h} / C(n_mid, m).
    """
    if outer.n != inner.K:
        raise SpectraError(
            f"outer output length {outer.n} != inner input length {inner.K}"
        )
    n_mid = outer.n
    norm = _log_binom_safe(n_mid, np.arange(n_mid + 1))
    mid = inner.logA - norm[:, None]  # (n_mid+1, n+1)
    # log-domain matrix product over m
    combined = outer.logA[:, :, None] + mid[None, :, :]
    logA = _lse_axis(combined, axis=1)
    return Iowe(outer.K, inner.n, logA)


def puncture_random(iowe: Iowe, kept: int) -> Iowe:
    """Ensemble average over uniformly random puncture patterns keeping ``kept`` bits.

    A'_{w,h'} = sum_h A_{w,h} C(h, h') C(n-h, kept-h') / C(n, kept).
    """
    n = iowe.n
    if not 0 <= kept <= n:
        raise SpectraError(f"kept = {kept} outside [0, n = {n}]")
    h = np.arange(n + 1)[:, None]
    hp = np.arange(kept + 1)[None, :]
    transfer = (
        _log_binom_safe(h, hp)
        + _log_binom_safe(n - h, kept - hp)
        - log_binomial(n, kept)
    )  # (n+1, kept+1)
    combined = iowe.logA[:, :, None] + transfer[None, :, :]
    return Iowe(iowe.K, kept, _lse_axis(combined, axis=1))


def systematic_join(iowe: Iowe) -> Iowe:
    """Transmit the input alongside the output: weight shifts h -> h + w."""
    K, n = iowe.K, iowe.n
    logA = np.full((K + 1, n + K + 1), NEG_INF)
    for w in range(K + 1):
        logA[w, w : w + n + 1] = iowe.logA[w]
    return Iowe(K, n + K, logA)


def partial_precode(N: int, M: int) -> Iowe:
    """Accumulator on M of the N input bits, identity on the remaining N - M."""
    if M > N or M < 0:
        raise SpectraError(f"cannot accumulate {M} of {N} bits")
    if M == 0:
        return Iowe.identity(N)
    acc = acc_iowe(M)
    free = N - M
    logA = np.full((N + 1, N + 1), NEG_INF)
    lb = _log_binom_safe(free, np.arange(free + 1))
    for t in range(free + 1):
        blk = logA[t : t + M + 1, t : t + M + 1]
        np.logaddexp(blk, acc.logA + lb[t], out=blk)
    return Iowe(N, N, logA)


def turbo_two_branch(branch: Iowe, K: int) -> Iowe:
    """Parallel concatenation of two identical parity branches plus systematic bits.

    ``branch`` is the parity-only IOWE of one constituent encoder with input
    length K; the ensemble average over the interleaver between the branches
    gives A_{w,h} = sum_{h1+h2+w=h} branch_{w,h1} branch_{w,h2} / C(K, w).
    """
    if branch.K != K:
        raise SpectraError(f"branch input length {branch.K} != K = {K}")
    nb = branch.n
    n = K + 2 * nb
    logA = np.full((K + 1, n + 1), NEG_INF)
    for w in range(K + 1):
        row = branch.logA[w]
        if not np.any(row > NEG_INF):
            continue
        # log-domain self-convolution of the parity row
        conv = np.full(2 * nb + 1, NEG_INF)
        idx = np.where(row > NEG_INF)[0]
        for i in idx:
            conv[i + idx] = np.logaddexp(conv[i + idx], row[i] + row[idx])
        logA[w, w : w + 2 * nb + 1] = conv - log_binomial(K, w)
    return Iowe(K, n, logA)


def to_distance(iowe: Iowe, weighting: str = "block") -> DistanceSpectrum:
    """Project an IOWE onto output weight; ``bit`` weights each term by w/K."""
    if weighting == "block":
        logA = _lse_axis(iowe.logA, axis=0)
    elif weighting == "bit":
        w = np.arange(iowe.K + 1, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.where(w > 0, np.log(w / iowe.K), NEG_INF)
        logA = _lse_axis(iowe.logA + lw[:, None], axis=0)
    else:
        raise SpectraError(f"unknown weighting {weighting!r}")
    return DistanceSpectrum(iowe.n, logA, weighting, K=iowe.K)


def exponent_of(spectrum: DistanceSpectrum, deltas=None) -> SpectralExponent:
    """Normalized log spectrum r(delta) = ln(A_h)/n at delta = h/n.

    With ``deltas`` given, h = max(1, round(delta * n)) per sample; otherwise
    every h in 1..n is reported.
    """
    n = spectrum.n
    if deltas is None:
        h = np.arange(1, n + 1)
    else:
        h = np.maximum(1, np.rint(np.asarray(deltas, dtype=float) * n).astype(int))
        h = np.unique(h)
    return SpectralExponent(h / n, spectrum.logA[h] / n, n=n)


# ---------------------------------------------------------------------------
# CSV round-trip for spectra and IOWEs
# ---------------------------------------------------------------------------

def _fmt_log(x: float) -> str:
    if x == NEG_INF:
        return "-inf"
    return f"{x:.12g}"


def write_spectrum_csv(path, spectrum: DistanceSpectrum, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append("n,K,weighting")
    lines.append(f"{spectrum.n},{spectrum.K if spectrum.K is not None else ''},{spectrum.weighting}")
    lines.append("h,logA")
    for h in range(spectrum.n + 1):
        lines.append(f"{h},{_fmt_log(spectrum.logA[h])}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> DistanceSpectrum:
    with open(path) as f:
        rows = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if rows[0] != "n,K,weighting" or rows[2] != "h,logA":
        raise SpectraError(f"{path} is not a spectrum CSV")
    n_s, k_s, weighting = rows[1].split(",")
    n = int(n_s)
    logA = np.full(n + 1, NEG_INF)
    for row in rows[3:]:
        h_s, v = row.split(",")
        logA[int(h_s)] = float(v)
    return DistanceSpectrum(n, logA, weighting, K=int(k_s) if k_s else None)


def write_iowe_csv(path, iowe: Iowe, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(f"# K={iowe.K} n={iowe.n}")
    lines.append("w,h,logA")
    ws, hs = np.where(iowe.logA > NEG_INF)
    for w, h in zip(ws, hs):
        lines.append(f"{w},{h},{_fmt_log(iowe.logA[w, h])}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_iowe_csv(path) -> Iowe:
    K = n = None
    entries = []
    with open(path) as f:
        for ln in f:
            ln = ln.strip()
            if ln.startswith("#"):
                m = re.match(r"#\s*K=(\d+)\s+n=(\d+)", ln)
                if m:
                    K, n = int(m.group(1)), int(m.group(2))
                continue
            if not ln or ln == "w,h,logA":
                continue
            w_s, h_s, v = ln.split(",")
            entries.append((int(w_s), int(h_s), float(v)))
    if K is None:
        raise SpectraError(f"{path} lacks the K/n metadata line")
    logA = np.full((K + 1, n + 1), NEG_INF)
    for w, h, v in entries:
        logA[w, h] = v
    return Iowe(K, n, logA)
