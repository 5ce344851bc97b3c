"""Symmetric in-batch contrastive loss and its grouped multi-positive variant.

Both losses take *raw* embedding matrices and L2-normalize internally, so
the analytic gradients flow through the normalization and the losses are
invariant to positive row scaling.  Everything runs in float64; the
analytic gradients are verified against central finite differences.

Given queries Q and documents D (both B x d) and temperature T, the
similarity matrix is s_ij = (q_i/|q_i|) . (d_j/|d_j|) / T.  The plain loss
averages a row-softmax and a column-softmax cross-entropy on the diagonal
with factor 1/(2B).  The grouped variant replaces the row numerator
e^{s_ii} by the sum of e^{s_ij} over the positive set P(i); singleton
groups P(i) = {i} recover the plain loss exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

DEFAULT_TEMPERATURE = 0.05


@dataclass
class LossBatch:
    """Raw query/document embeddings, temperature, and optional positive sets.

    ``groups[i]`` is the 0-based set of document indices that are positives
    for query i; when present it must be non-empty and contain i itself.
    """

    Q: np.ndarray
    D: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE
    groups: list[frozenset[int]] | None = None

    def __post_init__(self) -> None:
        self.Q = np.asarray(self.Q, dtype=np.float64)
        self.D = np.asarray(self.D, dtype=np.float64)
        if self.Q.ndim != 2 or self.D.ndim != 2:
            raise ValueError("Q and D must be 2-D matrices")
        if self.Q.shape != self.D.shape:
            raise ValueError(f"shape mismatch: Q {self.Q.shape} vs D {self.D.shape}")
        if self.Q.shape[0] < 1 or self.Q.shape[1] < 1:
            raise ValueError("need at least one row and one dimension")
        if not (np.isfinite(self.Q).all() and np.isfinite(self.D).all()):
            raise ValueError("embeddings contain non-finite entries")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.groups is not None:
            b = self.batch_size
            if len(self.groups) != b:
                raise ValueError(f"expected {b} groups, got {len(self.groups)}")
            self.groups = [frozenset(g) for g in self.groups]
            for i, g in enumerate(self.groups):
                if not g:
                    raise ValueError(f"positive set for query {i} is empty")
                if any(not (0 <= j < b) for j in g):
                    raise ValueError(f"positive set for query {i} has out-of-range index")
                if i not in g:
                    raise ValueError(f"positive set for query {i} must contain {i}")

    @property
    def batch_size(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class LossOutput:
    """Loss value and analytic gradients w.r.t. the raw Q and D entries."""

    value: float
    grad_Q: np.ndarray = field(repr=False)
    grad_D: np.ndarray = field(repr=False)


def _row_norms(M: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(M, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"row {bad[0]} of {name} has zero norm")
    return norms


def l2_normalize_rows(M: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean norm; zero rows are an error."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return M / _row_norms(M, "matrix")[:, None]


def similarity_matrix(batch: LossBatch) -> np.ndarray:
    """Temperature-scaled cosine similarities, s_ij = q̂_i · d̂_j / T."""
    qn = batch.Q / _row_norms(batch.Q, "Q")[:, None]
    dn = batch.D / _row_norms(batch.D, "D")[:, None]
    return (qn @ dn.T) / batch.temperature


def _grad_through_normalization(
    grad_normed: np.ndarray, normed: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    # d/dx of x/|x| applied row-wise: project out the radial component,
    # then divide by the original norm.
    radial = np.sum(grad_normed * normed, axis=1, keepdims=True)
    return (grad_normed - radial * normed) / norms[:, None]


def _loss_core(batch: LossBatch, grouped: bool) -> LossOutput:
    b = batch.batch_size
    t = batch.temperature
    q_norms = _row_norms(batch.Q, "Q")
    d_norms = _row_norms(batch.D, "D")
    qn = batch.Q / q_norms[:, None]
    dn = batch.D / d_norms[:, None]
    s = (qn @ dn.T) / t

    log_row_den = logsumexp(s, axis=1)
    log_col_den = logsumexp(s, axis=0)
    diag = np.diag(s)

    p_row = softmax(s, axis=1)
    p_col = softmax(s, axis=0)
    eye = np.eye(b)

    if grouped:
        assert batch.groups is not None
        mask = np.zeros((b, b), dtype=bool)
        for i, g in enumerate(batch.groups):
            mask[i, list(g)] = True
        masked = np.where(mask, s, -np.inf)
        log_row_num = logsumexp(masked, axis=1)
        # Softmax restricted to each row's positive set.
        pos_soft = np.where(mask, np.exp(masked - log_row_num[:, None]), 0.0)
        row_terms = log_row_num - log_row_den
        grad_s = (p_row - pos_soft + p_col - eye) / (2 * b)
    else:
        row_terms = diag - log_row_den
        grad_s = (p_row - eye + p_col - eye) / (2 * b)

    col_terms = diag - log_col_den
    value = max(-(row_terms.sum() + col_terms.sum()) / (2 * b), 0.0)

    grad_qn = (grad_s @ dn) / t
    grad_dn = (grad_s.T @ qn) / t
    return LossOutput(
        value=float(value),
        grad_Q=_grad_through_normalization(grad_qn, qn, q_norms),
        grad_D=_grad_through_normalization(grad_dn, dn, d_norms),
    )


def mnr_loss(batch: LossBatch) -> LossOutput:
    """Symmetric in-batch softmax loss over rows and columns, factor 1/(2B)."""
    return _loss_core(batch, grouped=False)


def grouped_mnr_loss(batch: LossBatch) -> LossOutput:
    """Multi-positive variant: row numerators sum e^{s_ij} over j in P(i)."""
    if batch.groups is None:
        raise ValueError("grouped loss requires batch.groups")
    return _loss_core(batch, grouped=True)


def finite_diff_check(batch: LossBatch, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every entry of Q and D is perturbed by ±h; the relative error uses
    denominator max(|analytic|, |numeric|, 1e-8) so duplicated rows or flat
    directions cannot blow up the ratio.
    """
    if not 0 < h <= 1e-2:
        raise ValueError(f"step h must be in (0, 1e-2], got {h}")
    grouped = batch.groups is not None
    analytic = _loss_core(batch, grouped)

    def value_at(q: np.ndarray, d: np.ndarray) -> float:
        probe = LossBatch(Q=q, D=d, temperature=batch.temperature, groups=batch.groups)
        return _loss_core(probe, grouped).value

    worst = 0.0
    for m, grad in ((batch.Q, analytic.grad_Q), (batch.D, analytic.grad_D)):
        it = np.nditer(m, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = m[idx]
            m[idx] = orig + h
            up = value_at(batch.Q, batch.D)
            m[idx] = orig - h
            down = value_at(batch.Q, batch.D)
            m[idx] = orig
            numeric = (up - down) / (2 * h)
            a = grad[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
