"""Finite-difference verification of the autodiff engine.

Each check builds a small float64 graph, reduces it to a scalar through a
random projection, runs the tape backward, and compares every tracked
gradient against central finite differences.  Relative error uses a small
denominator floor so that near-zero gradient pairs do not blow up the
ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import training
from .model import ModelConfig, RdnWeights, kaiming_init, model_forward
from .seeding import rng_for

FD_STEP = 1e-5
GRAD_TOL = 1e-4
_REL_FLOOR = 1e-3

# Composite check dimensions: small enough for exhaustive-ish probing,
# deep enough to cross every op in the model graph.
COMPOSITE_CONFIG = ModelConfig(scale=2, num_rdb=2, layers_per_rdb=2, growth=4, base_channels=8)
COMPOSITE_INPUT_HW = 8


@dataclass(frozen=True)
class OpCheck:
    name: str
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= GRAD_TOL


def relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), _REL_FLOOR)
    return abs(analytic - numeric) / denom


def _coords(shape: tuple[int, ...], rng: np.random.Generator, limit: int) -> list[tuple[int, ...]]:
    total = int(np.prod(shape))
    if total <= limit:
        flat = range(total)
    else:
        flat = rng.choice(total, size=limit, replace=False)
    return [np.unravel_index(i, shape) for i in flat]


def check_graph(
    build: Callable[[ad.Tape | None], ad.Tensor4],
    leaves: Sequence[tuple[np.ndarray, Callable[[], np.ndarray | None]]],
    rng: np.random.Generator,
    sample_limit: int = 64,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``build`` must construct the graph from the current leaf values and
    return the scalar loss; it is re-invoked (without a tape) for every
    finite-difference probe.  ``leaves`` pairs each wiggled array with a
    getter for its accumulated gradient (None means an expected zero).
    """
    tape = ad.Tape()
    loss = build(tape)
    ad.backward(tape, loss)

    worst = 0.0
    for arr, grad_of in leaves:
        grad = grad_of()
        for idx in _coords(arr.shape, rng, sample_limit):
            orig = arr[idx]
            arr[idx] = orig + FD_STEP
            f_plus = build(None).item()
            arr[idx] = orig - FD_STEP
            f_minus = build(None).item()
            arr[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * FD_STEP)
            analytic = 0.0 if grad is None else float(grad[idx])
            worst = max(worst, relative_error(analytic, numeric))
    return worst


def _rand(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)


def _param(rng: np.random.Generator, shape) -> ad.Parameter:
    return ad.Parameter(ad.Tensor4(_rand(rng, shape)))


def check_conv2d(rng: np.random.Generator, k: int = 3) -> float:
    x = ad.Tensor4(_rand(rng, (2, 3, 5, 4)))
    w = _param(rng, (4, 3, k, k))
    b = _param(rng, (1, 4, 1, 1))
    proj = _rand(rng, (2, 4, 5, 4))

    def build(tape):
        return ad.weighted_sum(ad.conv2d(x, w, b, (k - 1) // 2, tape), proj, tape)

    return check_graph(
        build,
        [
            (x.data, lambda: x.grad),
            (w.value.data, lambda: w.grad.data),
            (b.value.data, lambda: b.grad.data),
        ],
        rng,
    )


def check_relu(rng: np.random.Generator) -> float:
    # keep values away from the kink so the numeric derivative is valid
    vals = _rand(rng, (2, 3, 4, 4))
    vals = np.where(np.abs(vals) < 0.1, vals + 0.2 * np.sign(vals + 0.5), vals)
    x = ad.Tensor4(vals)
    proj = _rand(rng, x.shape)

    def build(tape):
        return ad.weighted_sum(ad.relu(x, tape), proj, tape)

    return check_graph(build, [(x.data, lambda: x.grad)], rng)


def check_concat_channels(rng: np.random.Generator) -> float:
    parts = [ad.Tensor4(_rand(rng, (2, c, 3, 4))) for c in (2, 3, 1)]
    proj = _rand(rng, (2, 6, 3, 4))

    def build(tape):
        return ad.weighted_sum(ad.concat_channels(parts, tape), proj, tape)

    return check_graph(build, [(p.data, (lambda p=p: p.grad)) for p in parts], rng)


def check_add(rng: np.random.Generator) -> float:
    a = ad.Tensor4(_rand(rng, (2, 3, 4, 4)))
    b = ad.Tensor4(_rand(rng, (2, 3, 4, 4)))
    proj = _rand(rng, a.shape)

    def build(tape):
        return ad.weighted_sum(ad.add(a, b, tape), proj, tape)

    return check_graph(build, [(a.data, lambda: a.grad), (b.data, lambda: b.grad)], rng)


def check_pixel_shuffle(rng: np.random.Generator) -> float:
    x = ad.Tensor4(_rand(rng, (1, 8, 3, 2)))
    proj = _rand(rng, (1, 2, 6, 4))

    def build(tape):
        return ad.weighted_sum(ad.pixel_shuffle(x, 2, tape), proj, tape)

    return check_graph(build, [(x.data, lambda: x.grad)], rng)


def check_l1_loss(rng: np.random.Generator) -> float:
    # separate pred/target so |pred - target| stays clear of the kink
    pred = ad.Tensor4(_rand(rng, (2, 3, 4, 4)) + 2.0)
    target = ad.Tensor4(_rand(rng, (2, 3, 4, 4)) - 2.0)

    def build(tape):
        return training.l1_loss(pred, target, tape)

    return check_graph(
        build, [(pred.data, lambda: pred.grad), (target.data, lambda: target.grad)], rng
    )


def check_composite(rng: np.random.Generator, config: ModelConfig = COMPOSITE_CONFIG) -> float:
    weights = kaiming_init(RdnWeights(config, dtype=np.float64), seed=int(rng.integers(2**31)))
    hw = COMPOSITE_INPUT_HW
    x = ad.Tensor4(rng.uniform(0.0, 1.0, size=(1, config.in_channels, hw, hw)))
    proj = _rand(rng, (1, config.in_channels, config.scale * hw, config.scale * hw))

    def build(tape):
        return ad.weighted_sum(model_forward(x, weights, tape), proj, tape)

    leaves = [(x.data, lambda: x.grad)]
    for name, p in weights.items():
        leaves.append((p.value.data, (lambda p=p: p.grad.data)))
    return check_graph(build, leaves, rng, sample_limit=12)


_CHECKS: list[tuple[str, Callable[[np.random.Generator], float]]] = [
    ("conv2d_3x3", lambda rng: check_conv2d(rng, k=3)),
    ("conv2d_1x1", lambda rng: check_conv2d(rng, k=1)),
    ("relu", check_relu),
    ("concat_channels", check_concat_channels),
    ("add", check_add),
    ("pixel_shuffle", check_pixel_shuffle),
    ("l1_loss", check_l1_loss),
    ("composite_rdn", check_composite),
]


def run_suite(seed: int = 0) -> list[OpCheck]:
    """Run every op check plus the composite model check."""
    results = []
    for name, fn in _CHECKS:
        results.append(OpCheck(name, fn(rng_for(seed, f"gradcheck/{name}"))))
    return results
