"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteError
from .rng import SeededRng
from .tensor import Tensor, backward


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: list = field(default_factory=list)  # flat indices at kinks


def finite_diff_check(f, x: Tensor, h: float = 1e-5, sample: int | None = None,
                      rng: SeededRng | None = None) -> GradCheckResult:
    """Compare the tape gradient of scalar `f` at `x` against central differences.

    Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
    Coordinates where forward and backward one-sided differences disagree
    (a kink, e.g. relu at exactly 0) are skipped and reported, not scored.
    `sample` limits the check to that many seeded random coordinates.
    """
    base = np.array(x.data, dtype=np.float64, copy=True)
    xt = Tensor(base, requires_grad=True)
    out = f(xt)
    if out.data.size != 1:
        raise ValueError("finite_diff_check needs a scalar-valued function")
    backward(out)
    analytic = (np.zeros_like(base) if xt.grad is None else xt.grad).reshape(-1)
    f0 = float(out.data.reshape(-1)[0])

    coords = np.arange(base.size)
    if sample is not None and sample < base.size:
        gen = (rng or SeededRng(0)).child("gradcheck-sample")
        coords = np.sort(gen.generator.choice(base.size, size=sample, replace=False))

    def eval_at(flat):
        v = float(f(Tensor(flat.reshape(base.shape))).data.reshape(-1)[0])
        if not np.isfinite(v):
            raise NonFiniteError("function non-finite at perturbed point")
        return v

    result = GradCheckResult(0.0, 0)
    flat = base.reshape(-1)
    for i in coords:
        hi = h * max(1.0, abs(flat[i]))
        plus = flat.copy()
        plus[i] += hi
        minus = flat.copy()
        minus[i] -= hi
        fp, fm = eval_at(plus), eval_at(minus)
        fwd = (fp - f0) / hi
        bwd_ = (f0 - fm) / hi
        if abs(fwd - bwd_) > 5e-3 * (1.0 + abs(fwd) + abs(bwd_)):
            result.skipped.append(int(i))
            continue
        numeric = (fp - fm) / (2.0 * hi)
        a = analytic[i]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        result.max_rel_error = max(result.max_rel_error, err)
        result.checked += 1
    return result
