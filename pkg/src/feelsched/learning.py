"""Synthetic strongly-convex learning tasks and the federated update rule.

Tasks expose exact smoothness/strong-convexity constants and a known optimum
so that convergence-bound diagnostics and the epsilon-accuracy stopping rule
can be evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class TaskConstructionError(RuntimeError):
    """Raised when a task cannot be built (singular Hessian, w* search fails)."""


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing stepsize eta(t) = chi / (t + nu)."""

    chi: float
    nu: float

    def __post_init__(self) -> None:
        if self.chi <= 0:
            raise ValueError(f"chi must be > 0, got {self.chi}")
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")

    def eta(self, t: int) -> float:
        return self.chi / (t + self.nu)


@dataclass
class GradientSet:
    """Per-device stochastic gradients and their size-weighted aggregate."""

    grads: np.ndarray     # (M, dim)
    sizes: np.ndarray     # (M,)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.grads, axis=1)

    @property
    def aggregate(self) -> np.ndarray:
        weights = self.sizes / self.sizes.sum()
        return weights @ self.grads


class QuadraticTask:
    """Per-device quadratics 0.5*(w - c_j)^T A_m (w - c_j).

    The global loss is the sample average over all devices; its Hessian is the
    size-weighted average of the device matrices, so the curvature constants
    and the optimum are available in closed form.
    """

    def __init__(self, hessians: np.ndarray, centers: list[np.ndarray]):
        hessians = np.asarray(hessians, dtype=float)
        self.dim = hessians.shape[1]
        self.num_devices = hessians.shape[0]
        self.hessians = hessians
        self.centers = [np.asarray(c, dtype=float) for c in centers]
        self.device_sizes = np.array([c.shape[0] for c in self.centers])
        self._center_means = np.stack([c.mean(axis=0) for c in self.centers])

        n = self.device_sizes.sum()
        weights = self.device_sizes / n
        avg_hessian = np.einsum("m,mij->ij", weights, hessians)
        eigs = np.linalg.eigvalsh(avg_hessian)
        if eigs[0] <= 1e-10:
            raise TaskConstructionError(f"average Hessian is singular (min eig {eigs[0]})")
        self.mu = float(eigs[0])
        self.ell = float(eigs[-1])
        rhs = np.einsum("m,mij,mj->i", weights, hessians, self._center_means)
        self.w_star = np.linalg.solve(avg_hessian, rhs)
        self.loss_star = self.loss(self.w_star)

    def loss(self, w: np.ndarray) -> float:
        n = self.device_sizes.sum()
        total = 0.0
        for a, c in zip(self.hessians, self.centers):
            diffs = w - c
            total += 0.5 * np.einsum("ji,ik,jk->", diffs, a, diffs)
        return float(total / n)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        weights = self.device_sizes / self.device_sizes.sum()
        return np.einsum("m,mij,mj->i", weights, self.hessians, w - self._center_means)

    def device_gradient(self, m: int, w: np.ndarray) -> np.ndarray:
        return self.hessians[m] @ (w - self._center_means[m])

    def batch_gradient(self, m: int, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return self.hessians[m] @ (w - self.centers[m][idx].mean(axis=0))


class LogisticTask:
    """L2-regularized logistic regression on synthetic Gaussian features.

    Labels are in {-1, +1}; the per-sample loss is
    log(1 + exp(-y * x.w)) + 0.5 * l2 * ||w||^2.
    """

    def __init__(self, features: list[np.ndarray], labels: list[np.ndarray], l2_reg: float):
        if l2_reg <= 0:
            raise ValueError(f"l2_reg must be > 0, got {l2_reg}")
        self.features = [np.asarray(x, dtype=float) for x in features]
        self.labels = [np.asarray(y, dtype=float) for y in labels]
        self.dim = self.features[0].shape[1]
        self.num_devices = len(self.features)
        self.device_sizes = np.array([x.shape[0] for x in self.features])
        self.l2_reg = float(l2_reg)

        x_all = np.vstack(self.features)
        n = x_all.shape[0]
        gram_eigs = np.linalg.eigvalsh(x_all.T @ x_all / (4.0 * n))
        self.ell = float(gram_eigs[-1]) + self.l2_reg
        self.mu = self.l2_reg
        self.w_star = self._solve_optimum()
        self.loss_star = self.loss(self.w_star)

    def _solve_optimum(self, tol: float = 1e-10, max_iters: int = 500_000) -> np.ndarray:
        # Deterministic full-gradient descent with stepsize 1/ell.
        w = np.zeros(self.dim)
        step = 1.0 / self.ell
        for _ in range(max_iters):
            g = self.gradient(w)
            if np.linalg.norm(g) < tol:
                return w
            w = w - step * g
        raise TaskConstructionError(
            f"optimum search did not reach gradient norm {tol} in {max_iters} iterations"
        )

    def loss(self, w: np.ndarray) -> float:
        n = self.device_sizes.sum()
        total = 0.0
        for x, y in zip(self.features, self.labels):
            margins = y * (x @ w)
            total += np.logaddexp(0.0, -margins).sum()
        return float(total / n + 0.5 * self.l2_reg * (w @ w))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        weights = self.device_sizes / self.device_sizes.sum()
        out = np.zeros(self.dim)
        for wt, (x, y) in zip(weights, zip(self.features, self.labels)):
            out += wt * self._device_data_gradient(x, y, w)
        return out + self.l2_reg * w

    @staticmethod
    def _device_data_gradient(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        margins = y * (x @ w)
        coeff = -y * expit(-margins)
        return (coeff @ x) / x.shape[0]

    def device_gradient(self, m: int, w: np.ndarray) -> np.ndarray:
        x, y = self.features[m], self.labels[m]
        return self._device_data_gradient(x, y, w) + self.l2_reg * w

    def batch_gradient(self, m: int, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        x, y = self.features[m][idx], self.labels[m][idx]
        return self._device_data_gradient(x, y, w) + self.l2_reg * w


LearningTask = QuadraticTask | LogisticTask

# Per-sample center jitter inside a device, in units of the global spread.
_SAMPLE_SPREAD = 0.5


def make_quadratic_task(
    dim: int,
    sizes: list[int],
    heterogeneity: float,
    rng: np.random.Generator,
) -> QuadraticTask:
    """Random per-device quadratics with device centers spread by ``heterogeneity``."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    hessians = []
    centers = []
    for n_m in sizes:
        q_mat, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        eigs = rng.uniform(1.0, 2.0, size=dim)
        hessians.append(q_mat @ np.diag(eigs) @ q_mat.T)
        mean = heterogeneity * rng.standard_normal(dim)
        centers.append(mean + _SAMPLE_SPREAD * rng.standard_normal((n_m, dim)))
    return QuadraticTask(np.stack(hessians), centers)


def make_logistic_task(
    dim: int,
    sizes: list[int],
    label_skew: float,
    l2_reg: float,
    rng: np.random.Generator,
) -> LogisticTask:
    """Synthetic logistic regression with device-skewed label distributions.

    ``label_skew`` in [0, 1] spreads the per-device probability of a positive
    label across [0.5 - skew/2, 0.5 + skew/2].
    """
    if not 0.0 <= label_skew <= 1.0:
        raise ValueError(f"label_skew must be in [0, 1], got {label_skew}")
    num_devices = len(sizes)
    direction = np.zeros(dim)
    direction[0] = 1.0
    features, labels = [], []
    for m, n_m in enumerate(sizes):
        offset = 0.0 if num_devices == 1 else m / (num_devices - 1) - 0.5
        p_pos = 0.5 + label_skew * offset
        y = np.where(rng.random(n_m) < p_pos, 1.0, -1.0)
        x = y[:, None] * direction + rng.standard_normal((n_m, dim))
        features.append(x)
        labels.append(y)
    return LogisticTask(features, labels, l2_reg)


def local_gradient(
    task: LearningTask,
    device_index: int,
    w: np.ndarray,
    batch_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Average gradient over a uniform batch; full local gradient by default."""
    if not 0 <= device_index < task.num_devices:
        raise IndexError(f"device index {device_index} out of range")
    n_m = int(task.device_sizes[device_index])
    if batch_size is None or batch_size >= n_m:
        return task.device_gradient(device_index, w)
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if rng is None:
        raise ValueError("rng required for mini-batch gradients")
    idx = rng.choice(n_m, size=batch_size, replace=False)
    return task.batch_gradient(device_index, w, idx)


def scaled_upload(g_m: np.ndarray, n_m: int, n: int, p_m: float) -> np.ndarray:
    """Scale a local gradient by n_m/(n*p_m) so the sampled update is unbiased."""
    if p_m <= 0:
        raise ValueError(f"scheduled device must have p_m > 0, got {p_m}")
    return (n_m / (n * p_m)) * g_m


def apply_update(w: np.ndarray, t: int, schedule: StepSchedule, g_hat: np.ndarray) -> np.ndarray:
    """One global model step: w - eta(t) * g_hat."""
    if t < 0:
        raise ValueError(f"round index must be >= 0, got {t}")
    return w - schedule.eta(t) * g_hat
