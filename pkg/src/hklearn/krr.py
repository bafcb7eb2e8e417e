"""Ridge regression over hyper-Gram matrices.

Fits expansion coefficients beta by solving the shifted linear system
``(K + lam I) beta = y``.  Any solution of that system is stationary for the
quadratic objective ``||K beta - y||^2 + lam beta' K beta``, and the shift
keeps the factorization well posed without squaring the condition number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from .errors import InvalidInput, NumericalFailure
from .hyper import HyperGram

DIRECT_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class KrrConfig:
    """Ridge solve settings.

    ``lam`` must be positive for the SPD factorization guarantee; zero is
    accepted so that deliberately singular systems surface as
    ``NumericalFailure`` instead of being rejected up front.  ``solver`` is
    ``direct`` (Cholesky), ``cg`` (conjugate gradient), or ``auto`` which
    takes the iterative path above ``direct_limit`` unknowns.
    """

    lam: float
    solver: str = "direct"
    cg_tol: float = 1e-10
    cg_max_iter: int = 20_000
    direct_limit: int = 2000
    jitter_retries: int = 3

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInput(f"lam must be nonnegative, got {self.lam}")
        if self.solver not in ("direct", "cg", "auto"):
            raise InvalidInput(f"unknown solver {self.solver!r}")
        if not self.cg_tol > 0:
            raise InvalidInput("cg_tol must be positive")
        if self.jitter_retries < 0:
            raise InvalidInput("jitter_retries must be nonnegative")


@dataclass(frozen=True)
class CoefficientField:
    """Expansion coefficients aligned with a hyper-Gram pair enumeration.

    ``values[k]`` attaches to the ordered point pair ``pair_list[k]``; ``m``
    is the number of underlying sample points.  ``to_matrix`` scatters the
    coefficients into the dense m x m layout (zeros for pairs outside the
    enumeration of a restricted fit).
    """

    values: np.ndarray
    pair_list: np.ndarray
    m: int
    jitter_applied: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        pairs = np.asarray(self.pair_list, dtype=np.intp)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] != values.size:
            raise InvalidInput(
                f"pair_list shape {pairs.shape} does not align with {values.size} values"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInput("coefficients must be finite")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= self.m):
            raise InvalidInput(f"pair indices out of range for m={self.m}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pair_list", pairs)

    @property
    def n(self) -> int:
        return self.values.size

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((self.m, self.m))
        out[self.pair_list[:, 0], self.pair_list[:, 1]] = self.values
        return out


def krr_objective(gram: HyperGram, beta: np.ndarray, responses: np.ndarray, lam: float) -> float:
    """``||K beta - y||^2 + lam * beta' K beta`` for a candidate coefficient vector."""
    K = gram.entries
    r = K @ beta - responses
    return float(r @ r + lam * beta @ (K @ beta))


def solve_spd_with_jitter(
    entries: np.ndarray, shift: float, rhs: np.ndarray, base_jitter: float, retries: int = 3
):
    """Cholesky-solve ``(entries + shift I) x = rhs``, escalating a diagonal
    jitter (base, 10x, 100x) when the factorization fails or the solve is too
    inaccurate (relative residual above ``DIRECT_RESIDUAL_TOL``).

    A couple of iterative-refinement steps follow each factorization so the
    residual contract holds on ill-conditioned systems too.  Returns
    ``(x, jitter_applied)``; the residual is measured against the jittered
    system actually solved.
    """
    n = entries.shape[0]
    eye = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(rhs)))
    ladder = [0.0] + [base_jitter * 10.0 ** k for k in range(retries)]
    worst = None
    for jitter in ladder:
        shifted = entries + (shift + jitter) * eye
        try:
            c, low = cho_factor(shifted, lower=True)
        except np.linalg.LinAlgError:
            continue
        x = cho_solve((c, low), rhs)
        worst = float(np.linalg.norm(shifted @ x - rhs)) / scale
        for _ in range(2):
            if worst <= DIRECT_RESIDUAL_TOL:
                break
            x = x + cho_solve((c, low), rhs - shifted @ x)
            worst = float(np.linalg.norm(shifted @ x - rhs)) / scale
        if worst <= DIRECT_RESIDUAL_TOL:
            return x, jitter
    if worst is not None:
        raise NumericalFailure(
            f"solve residual {worst:.3e} exceeds tolerance {DIRECT_RESIDUAL_TOL:g}"
        )
    if retries:
        raise NumericalFailure(
            f"factorization failed after {retries} jitter retries "
            f"(last jitter {ladder[-1]:g})"
        )
    raise NumericalFailure("factorization failed and jitter is disabled")


def _infer_m(gram: HyperGram) -> int:
    return int(gram.pair_list.max()) + 1 if gram.pair_list.size else 0


def fit_krr(gram: HyperGram, responses, config: KrrConfig) -> CoefficientField:
    """Fit ridge coefficients for the given hyper-Gram and response vector.

    The returned coefficients satisfy
    ``||(K + lam I) beta - y|| / max(1, ||y||) <= 1e-8`` for direct solves and
    ``<= cg_tol`` for conjugate-gradient solves; otherwise ``NumericalFailure``
    is raised.
    """
    y = np.asarray(responses, dtype=float).ravel()
    if y.size != gram.n:
        raise InvalidInput(f"responses length {y.size} != gram dimension {gram.n}")
    K = gram.entries
    lam = config.lam

    solver = config.solver
    if solver == "auto":
        solver = "direct" if gram.n <= config.direct_limit else "cg"

    jitter = 0.0
    if solver == "direct":
        beta, jitter = solve_spd_with_jitter(
            K, lam, y, gram.base_jitter(), retries=config.jitter_retries
        )
    else:
        op = LinearOperator(
            shape=K.shape, matvec=lambda v: K @ v + lam * v, dtype=float
        )
        beta, _info = cg(op, y, rtol=min(config.cg_tol, 1e-12), atol=0.0,
                         maxiter=config.cg_max_iter)
        residual = float(np.linalg.norm(K @ beta + lam * beta - y))
        if residual > config.cg_tol * max(1.0, float(np.linalg.norm(y))):
            raise NumericalFailure(
                f"solve residual {residual:.3e} exceeds tolerance {config.cg_tol:g}"
            )
    return CoefficientField(beta, gram.pair_list, _infer_m(gram), jitter_applied=jitter)
