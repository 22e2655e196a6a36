from __future__ import annotations

import numpy as np
import pytest

from creditrl.portfolio import CustomerRecord, Portfolio

ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, passed: bool, detail: str = "") -> None:
    """Record one acceptance line; printed in the terminal summary."""
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number} [{status}] {title}"
    if detail:
        line += f" :: {detail}"
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def make_record(cid="C0", tc=(10.0, 20.0, 30.0), ob=(100.0, 150.0, 200.0), pay=(50.0, 60.0, 70.0), mp_r=0,
                limit=500.0, int_annual=0.36, pd=0.05, bureau_score=650.0, months_on_book=12) -> CustomerRecord:
    return CustomerRecord(cid, tuple(tc), tuple(ob), tuple(pay), mp_r, limit, int_annual, pd, bureau_score,
                          months_on_book)


def random_records(rng: np.random.Generator, n: int) -> list[CustomerRecord]:
    out = []
    for i in range(n):
        limit = float(rng.choice([200.0, 500.0, 1000.0, 2500.0]))
        ob = tuple(float(x) for x in np.round(rng.uniform(0, 1.2, 3) * limit, 2))
        pay = tuple(float(x) for x in np.round(rng.uniform(0, 1.0, 3) * np.array(ob), 2))
        tc = tuple(float(x) for x in np.round(rng.uniform(0, 0.8, 3) * limit, 2))
        out.append(CustomerRecord(f"R{i}", tc, ob, pay, int(rng.integers(0, 5)), limit,
                                  float(rng.uniform(0.2, 0.6)), float(rng.uniform(0, 0.5)),
                                  float(rng.normal(650, 50)), int(rng.integers(3, 60))))
    return out


class TablePredictor:
    """Fixed balances per customer id and action."""

    def __init__(self, rbar0: dict, rbar1: dict):
        self.rbar = (rbar0, rbar1)

    def predict_response(self, records, action, beta):
        return np.array([self.rbar[action][r.customer_id] for r in records], dtype=float)


def random_setup(rng: np.random.Generator, n: int, lgd=0.6, beta=0.5, ccf=0.4):
    recs = random_records(rng, n)
    r0 = {r.customer_id: float(rng.uniform(0, 1) * r.limit) for r in recs}
    r1 = {r.customer_id: float(r0[r.customer_id] * rng.uniform(0.8, 1.6)) for r in recs}
    return Portfolio(tuple(recs), lgd=lgd, beta=beta, ccf=ccf), TablePredictor(r0, r1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
