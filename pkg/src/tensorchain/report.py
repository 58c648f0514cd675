"""Bound-verification reports and their serialization.

A report records, per tested point, the evaluated threshold, the claimed
probability bound, the empirical exceedance frequency, and the binomial
margin used for the verdict.  The verdict is "holds" only when every row
satisfies empirical <= bound + margin.  Serialization is deterministic:
reruns with identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


def binomial_margin(prob: float, samples: int, sigmas: float = 3.0) -> float:
    """`sigmas` binomial standard errors at success probability `prob`.

    The standard error is floored at 1/samples: below that, a frequency
    estimator has no resolution, and an unfloored margin would force
    verdicts to hinge on single extreme samples.
    """
    p = min(max(prob, 0.0), 1.0)
    if samples <= 0:
        return 0.0
    return sigmas * max(math.sqrt(p * (1.0 - p) / samples), 1.0 / samples)


@dataclass(frozen=True)
class BoundRow:
    u: float
    threshold: float
    prob_bound: float
    empirical: float
    margin: float
    holds: bool


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    inputs: dict
    rows: tuple
    fitted: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "holds" if all(r.holds for r in self.rows) else "violated"

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "inputs": self.inputs,
            "rows": [asdict(r) for r in self.rows],
            "fitted": self.fitted,
            "extras": self.extras,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["u,threshold,prob_bound,empirical,margin,holds"]
        for r in self.rows:
            lines.append(
                f"{r.u!r},{r.threshold!r},{r.prob_bound!r},"
                f"{r.empirical!r},{r.margin!r},{int(r.holds)}"
            )
        return "\n".join(lines) + "\n"


def make_rows(u_grid, thresholds, prob_bounds, empiricals, samples, sigmas=3.0):
    rows = []
    for u, thr, pb, emp in zip(u_grid, thresholds, prob_bounds, empiricals):
        margin = binomial_margin(pb, samples, sigmas)
        rows.append(
            BoundRow(
                u=float(u),
                threshold=float(thr),
                prob_bound=float(pb),
                empirical=float(emp),
                margin=float(margin),
                holds=bool(emp <= pb + margin),
            )
        )
    return tuple(rows)
