"""Seeded synthetic credit-card portfolios with known balance responses.

Customers come from four archetypes. Each archetype fixes the ranges of the
retrospective behaviour (utilization, payment and consumption rates, missed
payments, PD) and an elasticity: the prospective average balance under an
increase is the maintain balance scaled by (1 + beta) ** elasticity, capped at
the new limit. Full payers carry no balance either way.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .portfolio import CustomerRecord, Portfolio, PortfolioError
from .predictor.two_stage import TrainingRow
from .seeding import HISTORY, PORTFOLIO, RESPONSE_NOISE, derive_seed

ARCHETYPES = ("full_payer", "revolver", "heavy_spender", "at_risk")
GROUND_TRUTH_COLUMNS = ("customer_id", "rbar_maintain", "rbar_increase")


@dataclass(frozen=True)
class ArchetypeSpec:
    ur: tuple[float, float]
    pr: tuple[float, float]
    cr: tuple[float, float]
    pd: tuple[float, float]
    limits: tuple[float, ...]
    mp_probs: tuple[float, ...] = (1.0,)  # P(mp_r = 0), P(mp_r = 1), ...
    elasticity: float = 0.5
    bureau_mean: float = 650.0
    inactive_share: float = 0.0
    interest: tuple[float, ...] = ()  # annual-rate tiers; empty means the config's tiers


DEFAULT_ARCHETYPES: Mapping[str, ArchetypeSpec] = {
    "full_payer": ArchetypeSpec(ur=(0.05, 0.15), pr=(1.0, 1.0), cr=(0.05, 0.15), pd=(0.003, 0.008),
                                limits=(500, 1000, 2000), elasticity=0.0, bureau_mean=720, inactive_share=0.2),
    "revolver": ArchetypeSpec(ur=(0.45, 0.55), pr=(0.15, 0.25), cr=(0.10, 0.15), pd=(0.004, 0.012),
                              limits=(500, 1000, 2000), mp_probs=(0.85, 0.15), elasticity=0.6, bureau_mean=650),
    "heavy_spender": ArchetypeSpec(ur=(0.75, 0.85), pr=(0.35, 0.45), cr=(0.65, 0.75), pd=(0.004, 0.010),
                                   limits=(1000, 2000), elasticity=0.9, bureau_mean=680),
    "at_risk": ArchetypeSpec(ur=(0.90, 1.00), pr=(0.00, 0.05), cr=(0.05, 0.10), pd=(0.34, 0.37),
                             limits=(1000, 2000), mp_probs=(0.0, 0.5, 0.5), elasticity=1.0, bureau_mean=570,
                             interest=(0.54,)),
}


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 2000
    seed: int = 0
    archetype_mix: tuple[float, float, float, float] = (0.45, 0.20, 0.10, 0.25)
    limit_range: tuple[float, float] = (100.0, 5000.0)
    interest_range: tuple[float, float] = (0.30, 0.54)
    interest_tiers: int = 3
    rate_jitter: float = 0.01
    response_noise: float = 0.0
    lgd: float = 0.6
    beta: float = 0.5
    ccf: float = 0.4
    archetypes: Mapping[str, ArchetypeSpec] = field(default_factory=lambda: dict(DEFAULT_ARCHETYPES))

    def validate(self) -> None:
        if self.n_customers <= 0:
            raise ValueError("n_customers must be > 0")
        if len(self.archetype_mix) != len(ARCHETYPES) or any(m < 0 for m in self.archetype_mix):
            raise ValueError("archetype_mix needs one non-negative fraction per archetype")
        if abs(sum(self.archetype_mix) - 1.0) > 1e-9:
            raise ValueError(f"archetype_mix must sum to 1, got {sum(self.archetype_mix)}")
        for lo, hi in (self.limit_range, self.interest_range):
            if not lo <= hi:
                raise ValueError("ranges must be ordered (low <= high)")
        if self.response_noise < 0:
            raise ValueError("response_noise must be >= 0")
        for name in ARCHETYPES:
            spec = self.archetypes[name]
            for lo, hi in (spec.ur, spec.pr, spec.cr, spec.pd):
                if not lo <= hi:
                    raise ValueError(f"{name}: ranges must be ordered")
            if not (0 <= spec.pd[0] and spec.pd[1] <= 1):
                raise ValueError(f"{name}: pd range must lie in [0, 1]")


PRESETS = {
    "default": SynthConfig(),
    # balance classes 0/1/2 at roughly 17/26/57 % in the historical table
    "imbalance": SynthConfig(
        n_customers=5000,
        archetype_mix=(0.57, 0.31, 0.07, 0.05),
        response_noise=5.0,
        archetypes={
            **DEFAULT_ARCHETYPES,
            "full_payer": replace(DEFAULT_ARCHETYPES["full_payer"], inactive_share=0.3),
            "revolver": replace(DEFAULT_ARCHETYPES["revolver"], ur=(0.05, 0.45), limits=(150, 200, 300, 500, 1000)),
        },
    ),
}


def preset(name: str, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown synth preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)


@dataclass(frozen=True)
class GroundTruthResponse:
    rbar_maintain: float
    rbar_increase: float

    def __getitem__(self, action: int) -> float:
        return self.rbar_increase if action else self.rbar_maintain


@dataclass(frozen=True)
class SynthData:
    portfolio: Portfolio
    responses: tuple[GroundTruthResponse, ...]
    archetypes: tuple[str, ...]


def allocate_counts(mix: Sequence[float], n: int) -> list[int]:
    """Largest-remainder apportionment of n customers over the mix (ties to earlier entries)."""
    quotas = [m * n for m in mix]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(mix)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _interest_tiers(cfg: SynthConfig) -> np.ndarray:
    lo, hi = cfg.interest_range
    return np.linspace(lo, hi, cfg.interest_tiers) if cfg.interest_tiers > 1 else np.array([lo])


def _draw_customer(rng: np.random.Generator, spec: ArchetypeSpec, cfg: SynthConfig, beta: float):
    limits = [l for l in spec.limits if cfg.limit_range[0] <= l <= cfg.limit_range[1]] or [cfg.limit_range[0]]
    limit = float(rng.choice(limits))
    int_annual = round(float(rng.choice(spec.interest or _interest_tiers(cfg))), 4)

    # one latent intensity drives the three rates: heavier use, lower payment share
    u = rng.random()
    ur = spec.ur[0] + (spec.ur[1] - spec.ur[0]) * u
    pr = spec.pr[1] - (spec.pr[1] - spec.pr[0]) * u
    cr = spec.cr[0] + (spec.cr[1] - spec.cr[0]) * u
    inactive = rng.random() < spec.inactive_share
    jit = cfg.rate_jitter

    ob, pay, tc = [], [], []
    for _ in range(3):
        if inactive:
            ob.append(0.0), pay.append(0.0), tc.append(0.0)
            continue
        ui = max(0.0, ur + rng.uniform(-jit, jit))
        p = min(1.0, max(0.0, pr + rng.uniform(-jit, jit))) if pr < 1.0 else 1.0
        c = max(0.0, cr + rng.uniform(-jit, jit))
        balance = round(ui * limit, 2)
        ob.append(balance)
        pay.append(round(p * balance, 2))
        tc.append(round(c * limit, 2))
    mp = int(rng.choice(len(spec.mp_probs), p=spec.mp_probs))

    # PD rises with utilization and falls with payment rate within the archetype's range
    span_ur = spec.ur[1] - spec.ur[0] or 1.0
    span_pr = spec.pr[1] - spec.pr[0] or 1.0
    risk = 0.5 * (ur - spec.ur[0]) / span_ur + 0.5 * (1.0 - (pr - spec.pr[0]) / span_pr)
    pd = spec.pd[0] + (spec.pd[1] - spec.pd[0]) * min(1.0, max(0.0, risk))
    bureau = float(np.clip(rng.normal(spec.bureau_mean, 40.0), 300.0, 850.0))
    months = int(rng.integers(3, 61))

    if inactive or spec.elasticity == 0.0 and pr >= 1.0:
        rbar0 = rbar1 = 0.0
    else:
        pr_avg = sum(1.0 if o == 0 else q / o for o, q in zip(ob, pay)) / 3.0
        rbar0 = (sum(ob) / 3.0) * (1.0 - 0.5 * pr_avg)
        rbar1 = min(rbar0 * (1.0 + beta) ** spec.elasticity, limit * (1.0 + beta))
    return (tuple(tc), tuple(ob), tuple(pay), mp, limit, int_annual, round(pd, 6),
            round(bureau, 1), months), (rbar0, rbar1)


def generate_portfolio(cfg: SynthConfig) -> SynthData:
    cfg.validate()
    rng = np.random.default_rng(derive_seed(cfg.seed, PORTFOLIO))
    noise_rng = np.random.default_rng(derive_seed(cfg.seed, RESPONSE_NOISE))
    counts = allocate_counts(cfg.archetype_mix, cfg.n_customers)
    labels = np.repeat(np.arange(len(ARCHETYPES)), counts)
    labels = labels[rng.permutation(cfg.n_customers)]
    width = len(str(cfg.n_customers))

    records, responses = [], []
    for i, a in enumerate(labels.tolist()):
        fields, (r0, r1) = _draw_customer(rng, cfg.archetypes[ARCHETYPES[a]], cfg, cfg.beta)
        tc, ob, pay, mp, limit, int_annual, pd, bureau, months = fields
        rec = CustomerRecord(f"C{i:0{width}d}", tc, ob, pay, mp, limit, int_annual, pd, bureau, months)
        rec.validate()
        records.append(rec)
        if cfg.response_noise > 0:
            eps = noise_rng.normal(0.0, cfg.response_noise, size=2)
            r0 = max(0.0, r0 + eps[0]) if r0 > 0 else 0.0
            r1 = max(0.0, r1 + eps[1]) if r1 > 0 else 0.0
        responses.append(GroundTruthResponse(r0, r1))
    portfolio = Portfolio(tuple(records), lgd=cfg.lgd, beta=cfg.beta, ccf=cfg.ccf)
    return SynthData(portfolio, tuple(responses), tuple(ARCHETYPES[a] for a in labels.tolist()))


def generate_training_table(cfg: SynthConfig, historical_increase_rate: float) -> list[TrainingRow]:
    """Historical decisions: each customer independently got the increase with the given rate."""
    if not 0.0 <= historical_increase_rate <= 1.0:
        raise ValueError("historical_increase_rate must lie in [0, 1]")
    data = generate_portfolio(cfg)
    draws = np.random.default_rng(derive_seed(cfg.seed, HISTORY)).random(cfg.n_customers)
    rows = []
    for rec, resp, u in zip(data.portfolio.customers, data.responses, draws.tolist()):
        ha = int(u < historical_increase_rate)
        limit_post = rec.limit * (1.0 + cfg.beta) if ha else rec.limit
        rows.append(TrainingRow(rec, limit_post, ha, resp[ha]))
    return rows


class GroundTruthPredictor:
    """Response model that returns the generator's true balances by customer id."""

    def __init__(self, responses: Mapping[str, GroundTruthResponse], beta: Optional[float] = None):
        self.responses = dict(responses)
        self.beta = beta

    @classmethod
    def from_data(cls, data: SynthData) -> "GroundTruthPredictor":
        return cls({r.customer_id: resp for r, resp in zip(data.portfolio.customers, data.responses)},
                   beta=data.portfolio.beta)

    def predict_response(self, records: Sequence[CustomerRecord], action: int, beta: float) -> np.ndarray:
        if self.beta is not None and not math.isclose(beta, self.beta):
            raise ValueError(f"ground truth was generated for beta={self.beta}, not {beta}")
        try:
            return np.array([self.responses[r.customer_id][action] for r in records], dtype=float)
        except KeyError as exc:
            raise KeyError(f"no ground-truth response for customer {exc.args[0]!r}") from None


def write_ground_truth_csv(path: str | Path, data: SynthData) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_COLUMNS)
        for rec, resp in zip(data.portfolio.customers, data.responses):
            w.writerow([rec.customer_id, repr(float(resp.rbar_maintain)), repr(float(resp.rbar_increase))])


def read_ground_truth_csv(path: str | Path) -> dict[str, GroundTruthResponse]:
    path = Path(path)
    if not path.exists():
        raise PortfolioError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != list(GROUND_TRUTH_COLUMNS):
            raise PortfolioError(f"{path}: malformed header, expected {','.join(GROUND_TRUTH_COLUMNS)}")
        return {cid: GroundTruthResponse(float(r0), float(r1)) for cid, r0, r1 in reader}
