"""Expected-loss arithmetic: exposure at default, provisions and CCF estimation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

# Defaulters whose undrawn amount at period start is at most this are skipped.
CCF_DENOMINATOR_EPS = 1e-9

DEFAULTERS_COLUMNS = ("customer_id", "ob_at_default", "ob_at_period_start", "limit")


class CCFEstimationError(ValueError):
    pass


@dataclass(frozen=True)
class DefaulterObservation:
    ob_at_default: float
    ob_at_period_start: float
    limit: float
    customer_id: str = ""


def compute_ead(ob: float, limit: float, ccf: float) -> float:
    """Exposure at default: drawn balance plus the expected draw on the undrawn limit.

    An over-limit balance has no undrawn amount, so the CCF term is clamped at zero.
    """
    return ob + ccf * max(0.0, limit - ob)


def compute_provision(pd: float, lgd: float, ob: float, limit: float, ccf: float) -> float:
    return pd * lgd * compute_ead(ob, limit, ccf)


def individual_ccf(obs: DefaulterObservation) -> Optional[float]:
    """Share of the undrawn limit drawn down by default time, clamped to [0, 1].

    Returns None when the undrawn amount at period start is (numerically) zero;
    such observations carry no information and are left out of the average.
    """
    undrawn = obs.limit - obs.ob_at_period_start
    if undrawn <= CCF_DENOMINATOR_EPS:
        return None
    raw = (obs.ob_at_default - obs.ob_at_period_start) / undrawn
    return min(1.0, max(0.0, raw))


def portfolio_ccf(observations: Iterable[DefaulterObservation]) -> float:
    values = [v for v in map(individual_ccf, observations) if v is not None]
    if not values:
        raise CCFEstimationError("no usable defaulter observations")
    return sum(values) / len(values)


def load_defaulters_csv(path: str | Path) -> list[DefaulterObservation]:
    path = Path(path)
    if not path.exists():
        raise CCFEstimationError(f"missing defaulters file: {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != list(DEFAULTERS_COLUMNS):
            raise CCFEstimationError(f"{path}: malformed header, expected {','.join(DEFAULTERS_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cid, ob_def, ob_start, limit = row
                obs = DefaulterObservation(float(ob_def), float(ob_start), float(limit), customer_id=cid)
            except ValueError:
                raise CCFEstimationError(f"row {lineno}: cannot parse {row!r}") from None
            if obs.limit <= 0 or obs.ob_at_default < 0 or obs.ob_at_period_start < 0:
                raise CCFEstimationError(f"row {lineno}: balances must be >= 0 and limit > 0")
            out.append(obs)
    return out
