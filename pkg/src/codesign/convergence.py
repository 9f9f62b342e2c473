"""Split-versus-unsplit gradient descent checks on strongly convex quadratics.

Running a model across two devices splits the parameter vector into two
blocks that are updated independently.  On quadratics the strong-convexity
and gradient-smoothness constants are the eigenvalue extremes, the optimum
is available in closed form, and block updates can be compared against the
whole-vector update exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvariantViolation, StepSizeOutOfRange

# Below this relative size the loss gap is float noise, not signal.
_GAP_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class QuadraticObjective:
    """0.5 * w'Aw - b'w with A symmetric positive definite; parameters split
    into w[:split_index] (device 1) and w[split_index:] (device 2)."""

    matrix: np.ndarray
    linear: np.ndarray
    split_index: int

    def __post_init__(self):
        a = self.matrix
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got {a.shape}")
        if self.linear.shape != (a.shape[0],):
            raise DimensionMismatch(
                f"linear term has shape {self.linear.shape}, expected ({a.shape[0]},)")
        if not 1 <= self.split_index <= a.shape[0] - 1:
            raise DimensionMismatch(
                f"split_index={self.split_index} must leave both blocks non-empty")
        if not np.allclose(a, a.T):
            raise InvariantViolation("matrix must be symmetric")
        if np.linalg.eigvalsh(a)[0] <= 0:
            raise InvariantViolation("matrix must be positive definite")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def loss(self, w: np.ndarray) -> float:
        return 0.5 * float(w @ self.matrix @ w) - float(self.linear @ w)

    def full_gradient(self, w: np.ndarray) -> np.ndarray:
        # row-wise multiply+sum rather than a BLAS matvec: each coordinate
        # is reduced over its own row only, so block-sliced evaluation (the
        # split path) reproduces the same bits for any dimension
        return (self.matrix * w).sum(axis=1) - self.linear

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.matrix, self.linear)

    def optimum(self) -> float:
        return self.loss(self.minimizer())

    def curvature_bounds(self) -> tuple[float, float]:
        """(strong-convexity constant, gradient Lipschitz constant): the
        extreme eigenvalues."""
        eigenvalues = np.linalg.eigvalsh(self.matrix)
        return float(eigenvalues[0]), float(eigenvalues[-1])


def admissible_step_limit(obj: QuadraticObjective) -> float:
    """Largest admissible learning rate: the intersection of the
    loss-decrease bound 2/mu and the smoothness bound 2/L."""
    mu, lip = obj.curvature_bounds()
    return min(2.0 / mu, 2.0 / lip)


def split_gradient(obj: QuadraticObjective, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-block gradients, each computed on its own device's rows;
    concatenated they equal the full gradient bit-for-bit (same per-row
    summation order)."""
    if w.shape != (obj.dim,):
        raise DimensionMismatch(f"w has shape {w.shape}, expected ({obj.dim},)")
    k = obj.split_index
    g1 = (obj.matrix[:k] * w).sum(axis=1) - obj.linear[:k]
    g2 = (obj.matrix[k:] * w).sum(axis=1) - obj.linear[k:]
    return g1, g2


def split_step(obj: QuadraticObjective, w: np.ndarray, eta: float) -> np.ndarray:
    """One independent gradient step on each block; equals the whole-vector
    step when summation order matches."""
    g1, g2 = split_gradient(obj, w)
    k = obj.split_index
    return np.concatenate([w[:k] - eta * g1, w[k:] - eta * g2])


def rate_check(obj: QuadraticObjective, w0: np.ndarray, eta: float,
               steps: int) -> tuple[int | None, list[float]]:
    """Run split gradient descent and test the geometric contraction of the
    loss gap: gap_k <= (1 - eta*mu/2)^k * gap_0.

    Returns the first step at which the bound fails (None if it never does)
    and the per-step gap ratios gap_{k+1}/gap_k.  Once the gap falls below
    float noise the bound check stops and ratios are reported as 0.
    """
    limit = admissible_step_limit(obj)
    if not 0 < eta <= limit:
        raise StepSizeOutOfRange(f"eta={eta} outside (0, {limit}]")

    mu, _ = obj.curvature_bounds()
    optimum = obj.optimum()
    gap0 = obj.loss(w0) - optimum
    floor = _GAP_FLOOR_REL * max(abs(gap0), abs(optimum), 1.0)
    factor = 1.0 - eta * mu / 2.0

    w = w0
    previous_gap = gap0
    violated_at = None
    ratios = []
    for k in range(1, steps + 1):
        w = split_step(obj, w, eta)
        gap = obj.loss(w) - optimum
        ratios.append(gap / previous_gap if previous_gap > floor else 0.0)
        bound = gap0 * factor ** k
        if violated_at is None and gap > floor and gap > bound * (1.0 + 1e-9):
            violated_at = k
        previous_gap = gap
    return violated_at, ratios


def random_objective(rng: np.random.Generator, dim: int,
                     eigenvalue_range: tuple[float, float] = (0.5, 5.0),
                     ) -> QuadraticObjective:
    """Random SPD quadratic with eigenvalues drawn uniformly from the given
    range and an even block split."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eigenvalues = rng.uniform(*eigenvalue_range, dim)
    a = (q * eigenvalues) @ q.T
    a = (a + a.T) / 2.0
    return QuadraticObjective(matrix=a, linear=rng.standard_normal(dim),
                              split_index=dim // 2)


def run_lab(seed: int, dim: int, steps: int) -> dict:
    """One seeded lab run: random quadratic, learning rate at 90% of the
    admissible limit, geometric-bound check over the trajectory."""
    rng = np.random.default_rng(seed)
    obj = random_objective(rng, dim)
    mu, lip = obj.curvature_bounds()
    eta = 0.9 * admissible_step_limit(obj)
    w0 = rng.standard_normal(dim)

    violated_at, ratios = rate_check(obj, w0, eta, steps)
    gap0 = obj.loss(w0) - obj.optimum()
    factor = 1.0 - eta * mu / 2.0

    rows = []
    gap = gap0
    for k, ratio in enumerate(ratios, start=1):
        gap = gap * ratio
        rows.append({
            "step": k,
            "gap": gap,
            "bound": gap0 * factor ** k,
            "ratio": ratio,
            "within_bound": violated_at is None or k < violated_at,
        })
    return {
        "mu": mu,
        "lip": lip,
        "eta": eta,
        "violated_at": violated_at,
        "rows": rows,
    }
