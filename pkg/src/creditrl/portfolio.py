"""Customer records, portfolio CSV I/O and the derived financial features."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

PORTFOLIO_COLUMNS = (
    "customer_id",
    "tc_1", "tc_2", "tc_3",
    "ob_1", "ob_2", "ob_3",
    "pay_1", "pay_2", "pay_3",
    "mp_r", "limit", "int_annual", "pd", "bureau_score", "months_on_book",
)

MIN_MONTHS_ON_BOOK = 3


class PortfolioError(ValueError):
    """Raised for malformed portfolio files or records violating invariants."""


@dataclass(frozen=True)
class CustomerRecord:
    customer_id: str
    tc: tuple[float, float, float]
    ob: tuple[float, float, float]
    pay: tuple[float, float, float]
    mp_r: int
    limit: float
    int_annual: float
    pd: float
    bureau_score: float
    months_on_book: int

    def validate(self) -> None:
        """Raise PortfolioError naming the first offending field."""
        for name in ("tc", "ob", "pay"):
            values = getattr(self, name)
            if len(values) != 3:
                raise PortfolioError(f"{name}: expected 3 monthly values")
            for i, v in enumerate(values, start=1):
                if not math.isfinite(v) or v < 0:
                    raise PortfolioError(f"{name}_{i}: must be finite and >= 0, got {v}")
        if self.mp_r < 0:
            raise PortfolioError(f"mp_r: must be >= 0, got {self.mp_r}")
        if not math.isfinite(self.limit) or self.limit <= 0:
            raise PortfolioError(f"limit: must be > 0, got {self.limit}")
        if not math.isfinite(self.int_annual) or self.int_annual < 0:
            raise PortfolioError(f"int_annual: must be >= 0, got {self.int_annual}")
        if not (0.0 <= self.pd <= 1.0):
            raise PortfolioError(f"pd: must lie in [0, 1], got {self.pd}")
        if not math.isfinite(self.bureau_score):
            raise PortfolioError(f"bureau_score: must be finite, got {self.bureau_score}")
        if self.months_on_book < 0:
            raise PortfolioError(f"months_on_book: must be >= 0, got {self.months_on_book}")

    @property
    def eligible(self) -> bool:
        # Current arrears are not part of the schema; records are taken as up to date.
        return self.months_on_book >= MIN_MONTHS_ON_BOOK

    def to_row(self) -> list[str]:
        return [
            self.customer_id,
            *(repr(float(v)) for v in self.tc),
            *(repr(float(v)) for v in self.ob),
            *(repr(float(v)) for v in self.pay),
            str(self.mp_r),
            repr(float(self.limit)),
            repr(float(self.int_annual)),
            repr(float(self.pd)),
            repr(float(self.bureau_score)),
            str(self.months_on_book),
        ]


@dataclass(frozen=True)
class FinancialFeatures:
    ur_avg: float
    pr_avg: float
    cr_avg: float
    mp: int
    limit: float
    int_monthly: float


@dataclass(frozen=True)
class Portfolio:
    customers: tuple[CustomerRecord, ...]
    lgd: float = 0.6
    beta: float = 0.5
    ccf: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "customers", tuple(self.customers))
        if not self.beta > 0:
            raise PortfolioError(f"beta: must be > 0, got {self.beta}")
        if not 0.0 <= self.lgd <= 1.0:
            raise PortfolioError(f"lgd: must lie in [0, 1], got {self.lgd}")
        if not 0.0 <= self.ccf <= 1.0:
            raise PortfolioError(f"ccf: must lie in [0, 1], got {self.ccf}")

    def __len__(self) -> int:
        return len(self.customers)

    def require_nonempty(self) -> None:
        if not self.customers:
            raise PortfolioError("empty portfolio")

    def eligible_only(self) -> "Portfolio":
        return Portfolio(tuple(c for c in self.customers if c.eligible),
                         lgd=self.lgd, beta=self.beta, ccf=self.ccf)

    def with_params(self, **params) -> "Portfolio":
        kw = dict(lgd=self.lgd, beta=self.beta, ccf=self.ccf)
        kw.update(params)
        return Portfolio(self.customers, **kw)


def derive_features(rec: CustomerRecord) -> FinancialFeatures:
    """Average 3-month utilization, payment and consumption rates plus the raw state fields.

    Payment rate for a month with zero balance is taken as 1 (nothing owed, nothing missed).
    """
    ur = sum(ob / rec.limit for ob in rec.ob) / 3.0
    pr = sum(1.0 if ob == 0 else pay / ob for ob, pay in zip(rec.ob, rec.pay)) / 3.0
    cr = sum(tc / rec.limit for tc in rec.tc) / 3.0
    return FinancialFeatures(ur_avg=ur, pr_avg=pr, cr_avg=cr, mp=rec.mp_r,
                             limit=rec.limit, int_monthly=rec.int_annual / 12.0)


def _parse_row(row: Sequence[str], lineno: int) -> CustomerRecord:
    if len(row) != len(PORTFOLIO_COLUMNS):
        raise PortfolioError(f"row {lineno}: expected {len(PORTFOLIO_COLUMNS)} fields, got {len(row)}")
    values = dict(zip(PORTFOLIO_COLUMNS, row))
    parsed: dict = {}
    for name, raw in values.items():
        if name == "customer_id":
            parsed[name] = raw
            continue
        try:
            parsed[name] = int(raw) if name in ("mp_r", "months_on_book") else float(raw)
        except ValueError:
            raise PortfolioError(f"row {lineno}: field {name}: cannot parse {raw!r}") from None
    rec = CustomerRecord(
        customer_id=parsed["customer_id"],
        tc=(parsed["tc_1"], parsed["tc_2"], parsed["tc_3"]),
        ob=(parsed["ob_1"], parsed["ob_2"], parsed["ob_3"]),
        pay=(parsed["pay_1"], parsed["pay_2"], parsed["pay_3"]),
        mp_r=parsed["mp_r"],
        limit=parsed["limit"],
        int_annual=parsed["int_annual"],
        pd=parsed["pd"],
        bureau_score=parsed["bureau_score"],
        months_on_book=parsed["months_on_book"],
    )
    try:
        rec.validate()
    except PortfolioError as exc:
        raise PortfolioError(f"row {lineno}: field {exc}") from None
    return rec


def read_records(path: str | Path, extra_columns: Sequence[str] = ()) -> tuple[list[CustomerRecord], list[list[str]]]:
    """Parse a CSV whose first columns follow the portfolio schema.

    Returns the records and, per row, the raw values of ``extra_columns``.
    """
    path = Path(path)
    if not path.exists():
        raise PortfolioError(f"missing file: {path}")
    expected = list(PORTFOLIO_COLUMNS) + list(extra_columns)
    records, extras = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise PortfolioError(f"{path}: malformed header, expected {','.join(expected)}")
        n_base = len(PORTFOLIO_COLUMNS)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise PortfolioError(f"row {lineno}: expected {len(expected)} fields, got {len(row)}")
            records.append(_parse_row(row[:n_base], lineno))
            extras.append(row[n_base:])
    return records, extras


def load_portfolio_csv(path: str | Path, lgd: float = 0.6, beta: float = 0.5, ccf: float = 0.4,
                       eligible_only: bool = False) -> Portfolio:
    records, _ = read_records(path)
    if eligible_only:
        records = [r for r in records if r.eligible]
    return Portfolio(tuple(records), lgd=lgd, beta=beta, ccf=ccf)


def write_records(path: str | Path, records: Iterable[CustomerRecord],
                  extra_columns: Sequence[str] = (), extras: Iterable[Sequence[str]] | None = None) -> None:
    path = Path(path)
    records = list(records)
    extras = list(extras) if extras is not None else [[] for _ in records]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(PORTFOLIO_COLUMNS) + list(extra_columns))
        for rec, extra in zip(records, extras):
            writer.writerow(rec.to_row() + list(extra))


def write_portfolio_csv(path: str | Path, portfolio: Portfolio) -> None:
    write_records(path, portfolio.customers)
