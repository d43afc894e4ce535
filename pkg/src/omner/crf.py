"""Linear-chain CRF over the 9-tag set: scoring, partition, NLL gradient,
Viterbi decoding (optionally IOB-constrained), and forward-backward marginals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import crf_backward, crf_forward, crf_viterbi
from .schema import NUM_TAGS, TAGS

NEG_INF = -np.inf


class CrfError(ValueError):
    pass


@dataclass
class CrfParams:
    transitions: np.ndarray  # (K, K), [a, b] = score of a followed by b
    start: np.ndarray        # (K,)
    stop: np.ndarray         # (K,)

    @classmethod
    def zeros(cls, num_tags: int = NUM_TAGS) -> "CrfParams":
        return cls(np.zeros((num_tags, num_tags)), np.zeros(num_tags), np.zeros(num_tags))

    @property
    def num_tags(self) -> int:
        return self.start.shape[0]


@dataclass
class DecodeOptions:
    constrained: bool = True


def _check(emissions: np.ndarray, params: CrfParams, tags=None):
    L, K = emissions.shape
    if K != params.num_tags:
        raise CrfError(f"emissions width {K} != tag count {params.num_tags}")
    if L < 1:
        raise CrfError("empty emission sequence")
    if tags is not None:
        if len(tags) != L:
            raise CrfError(f"{len(tags)} tags for {L} positions")
        if any(t < 0 or t >= K for t in tags):
            raise CrfError("tag index out of range")


def sequence_score(emissions: np.ndarray, tags, params: CrfParams) -> float:
    _check(emissions, params, tags)
    score = params.start[tags[0]] + emissions[0, tags[0]]
    for t in range(1, len(tags)):
        score += params.transitions[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    return float(score + params.stop[tags[-1]])


def log_partition(emissions: np.ndarray, params: CrfParams) -> float:
    _check(emissions, params)
    logz, _ = crf_forward(emissions, params.transitions, params.start, params.stop)
    return float(logz)


def marginals(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Per-position tag probabilities via forward-backward; rows sum to 1."""
    _check(emissions, params)
    logz, alpha = crf_forward(emissions, params.transitions, params.start, params.stop)
    beta = crf_backward(emissions, params.transitions, params.stop)
    return np.exp(alpha + beta - logz)


@dataclass
class CrfGradients:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray


def nll_and_gradient(emissions: np.ndarray, gold_tags, params: CrfParams
                     ) -> tuple[float, CrfGradients]:
    """NLL = logZ - score(gold); emission gradient is marginals minus gold one-hot."""
    _check(emissions, params, gold_tags)
    L, K = emissions.shape
    T, s, e = params.transitions, params.start, params.stop
    logz, alpha = crf_forward(emissions, T, s, e)
    beta = crf_backward(emissions, T, e)
    unary = np.exp(alpha + beta - logz)  # (L, K) marginals

    d_em = unary.copy()
    d_T = np.zeros_like(T)
    for t in range(1, L):
        # pairwise marginals P(y_{t-1}=a, y_t=b)
        d_T += np.exp(alpha[t - 1][:, None] + T + (emissions[t] + beta[t])[None, :] - logz)
    d_s = unary[0].copy()
    d_e = unary[L - 1].copy()

    d_em[np.arange(L), gold_tags] -= 1.0
    for t in range(1, L):
        d_T[gold_tags[t - 1], gold_tags[t]] -= 1.0
    d_s[gold_tags[0]] -= 1.0
    d_e[gold_tags[-1]] -= 1.0

    nll = logz - sequence_score(emissions, gold_tags, params)
    return float(nll), CrfGradients(d_em, d_T, d_s, d_e)


def _iob_constraint_masks(num_tags: int) -> tuple[np.ndarray, np.ndarray]:
    """Additive masks (transition, start) that forbid ill-formed IOB moves."""
    t_mask = np.zeros((num_tags, num_tags))
    s_mask = np.zeros(num_tags)
    for b, to_tag in enumerate(TAGS[:num_tags]):
        if not to_tag.startswith("I-"):
            continue
        etype = to_tag[2:]
        s_mask[b] = NEG_INF
        for a, from_tag in enumerate(TAGS[:num_tags]):
            ok = from_tag in (f"B-{etype}", f"I-{etype}")
            if not ok:
                t_mask[a, b] = NEG_INF
    return t_mask, s_mask


def viterbi_decode(emissions: np.ndarray, params: CrfParams,
                   options: DecodeOptions | None = None) -> tuple[list[int], float]:
    """Best tag sequence and its score; ties prefer the smaller tag index."""
    _check(emissions, params)
    options = options or DecodeOptions()
    T, s = params.transitions, params.start
    if options.constrained and params.num_tags == NUM_TAGS:
        t_mask, s_mask = _iob_constraint_masks(params.num_tags)
        T = T + t_mask
        s = s + s_mask
    path, score = crf_viterbi(emissions, T, s, params.stop)
    return [int(i) for i in path], float(score)
