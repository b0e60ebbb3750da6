"""Weibull lifetimes and the annual cohort stock-flow recursion.

Installations are booked at integer year boundaries and a unit's age in
observation year ``Y`` is ``Y - y``.  A cohort cannot fail in its
installation year, and replacements are booked in the failure year.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import InputError, ParameterDomainError
from .tables import parse_float, read_rows, render_csv

MAX_AGE = 200
LIFETIME_CASES = ("optimistic", "pessimistic")


@dataclass(frozen=True)
class WeibullParams:
    alpha: float  # scale, years
    beta: float  # shape

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterDomainError(f"Weibull {name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class LifetimeProfile:
    equipment_class: str
    optimistic: WeibullParams
    pessimistic: WeibullParams

    def for_case(self, case: str) -> WeibullParams:
        if case not in LIFETIME_CASES:
            raise ParameterDomainError(f"lifetime case must be one of {LIFETIME_CASES}, got {case!r}")
        return getattr(self, case)


# (pessimistic, optimistic) pairs
_TABLE = {
    "transformer": ((40.95, 7.341), (49.5663, 4.6141)),
    "spv_inverter": ((16.23, 4.23), (25.59, 4.35)),
    "dfig_converter": ((13.5, 0.6), (13.5, 0.7)),
    "pmsg_converter": ((30.3, 0.34), (30.3, 0.95)),
    "dc_ups": ((9.81, 2.85), (9.81, 2.85)),
    "ev_charger_pcs": ((18.78, 5.0), (18.78, 5.0)),
    "battery_pcs": ((19.56, 5.83), (38.42, 5.86)),
}
# data-center transformers share the transformer parameters
_ALIASES = {"dc_transformer": "transformer"}


def default_lifetimes() -> dict[str, LifetimeProfile]:
    out = {}
    for cls, (pess, opt) in _TABLE.items():
        out[cls] = LifetimeProfile(cls, WeibullParams(*opt), WeibullParams(*pess))
    for alias, target in _ALIASES.items():
        src = out[target]
        out[alias] = LifetimeProfile(alias, src.optimistic, src.pessimistic)
    return out


def lifetimes_csv(profiles: Mapping[str, LifetimeProfile]) -> str:
    rows = []
    for cls in sorted(profiles):
        prof = profiles[cls]
        for case in LIFETIME_CASES:
            p = prof.for_case(case)
            rows.append((cls, case, repr(p.alpha), repr(p.beta)))
    return render_csv(("class", "scenario", "alpha", "beta"), rows)


def load_lifetimes(path: str | Path, base: Mapping[str, LifetimeProfile] | None = None) -> dict[str, LifetimeProfile]:
    """Read ``class, scenario, alpha, beta`` rows, overriding ``base`` (the built-in parameter table by default)."""
    params: dict[str, dict[str, WeibullParams]] = {}
    for i, row in enumerate(read_rows(path, ("class", "scenario", "alpha", "beta")), start=2):
        where = f"{path}:{i}"
        if row["scenario"] not in LIFETIME_CASES:
            raise InputError(f"{where}: unknown lifetime case {row['scenario']!r}")
        params.setdefault(row["class"], {})[row["scenario"]] = WeibullParams(
            parse_float(row["alpha"], where), parse_float(row["beta"], where)
        )
    out = dict(default_lifetimes() if base is None else base)
    for cls, cases in params.items():
        prev = out.get(cls)
        try:
            opt = cases.get("optimistic") or prev.optimistic
            pess = cases.get("pessimistic") or prev.pessimistic
        except AttributeError:
            raise InputError(f"{path}: class {cls!r} needs both lifetime cases") from None
        out[cls] = LifetimeProfile(cls, opt, pess)
    return out


def _age(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ParameterDomainError(f"age must be finite and >= 0, got {t!r}")
    return arr


def _ret(arr, t):
    return float(arr) if np.ndim(t) == 0 else arr


def cumulative_failure(t, p: WeibullParams):
    """F(t) = 1 - exp(-(t/alpha)^beta). Accepts scalars or arrays."""
    arr = _age(t)
    return _ret(-np.expm1(-((arr / p.alpha) ** p.beta)), t)


def survival(t, p: WeibullParams):
    arr = _age(t)
    return _ret(np.exp(-((arr / p.alpha) ** p.beta)), t)


def annual_failure_increment(t, p: WeibullParams):
    """Probability of failing between ages t-1 and t; zero at t=0."""
    arr = _age(t)
    if np.any(arr != np.round(arr)):
        raise ParameterDomainError(f"age must be an integer number of years, got {t!r}")
    F = -np.expm1(-((arr / p.alpha) ** p.beta))
    Fprev = -np.expm1(-((np.maximum(arr - 1, 0) / p.alpha) ** p.beta))
    out = np.where(arr >= 1, F - Fprev, 0.0)
    return _ret(out, t)


def failure_increments(n: int, p: WeibullParams) -> np.ndarray:
    """``d[k] = dF(k)`` for k = 0..n-1, zeroed beyond the 200-year age cap."""
    ages = np.arange(n, dtype=float)
    F = -np.expm1(-((ages / p.alpha) ** p.beta))
    d = np.zeros(n)
    d[1:] = np.diff(F)
    d[MAX_AGE + 1 :] = 0.0
    return d


class Quantiles(NamedTuple):
    T25: float
    T50: float
    T75: float


def lifetime_quantile(p: WeibullParams, q: float) -> float:
    if not 0 < q < 1:
        raise ParameterDomainError(f"quantile must lie in (0, 1), got {q}")
    return p.alpha * (-math.log1p(-q)) ** (1.0 / p.beta)


def lifetime_quantiles(p: WeibullParams) -> Quantiles:
    return Quantiles(*(lifetime_quantile(p, q) for q in (0.25, 0.5, 0.75)))


def cdf_crossings(a: WeibullParams, b: WeibullParams, grid=None) -> list[float]:
    """Grid points after which ``F_a - F_b`` changes sign (t=0 excluded)."""
    if grid is None:
        grid = np.arange(0.0, 60.0 + 1e-9, 0.5)
    grid = np.asarray(grid, dtype=float)
    diff = cumulative_failure(grid, a) - cumulative_failure(grid, b)
    sign = np.sign(np.where(np.abs(diff) < 1e-15, 0.0, diff))
    out = []
    last = 0.0
    for t, s in zip(grid, sign):
        if s == 0:
            continue
        if last != 0 and s != last:
            out.append(float(t))
        last = s
    return out


@dataclass(frozen=True)
class CohortLedger:
    start_year: int
    net_additions: np.ndarray  # C(y)
    total_installations: np.ndarray  # TC(y)
    params: WeibullParams
    _survival: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._survival is None:
            ages = np.arange(len(self.net_additions), dtype=float)
            S = np.exp(-((ages / self.params.alpha) ** self.params.beta))
            S[MAX_AGE + 1 :] = 0.0
            object.__setattr__(self, "_survival", S)

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.start_year + len(self.net_additions))

    @property
    def replacement(self) -> np.ndarray:
        return self.total_installations - self.net_additions

    def _index(self, year: int) -> int:
        i = int(year) - self.start_year
        if i < 0:
            raise ParameterDomainError(f"year {year} precedes ledger start {self.start_year}")
        if i >= len(self.net_additions):
            raise ParameterDomainError(f"year {year} beyond ledger end {self.years[-1]}")
        return i

    def surviving_by_cohort(self, cohort_year: int, year: int) -> float:
        """SC(y; Y) = TC(y) S(Y - y)."""
        i, j = self._index(cohort_year), self._index(year)
        if j < i:
            raise ParameterDomainError("observation year precedes cohort year")
        return float(self.total_installations[i] * self._survival[j - i])

    def surviving_stock(self, year: int) -> float:
        j = self._index(year)
        tc = self.total_installations[: j + 1]
        return float(np.dot(tc[::-1], self._survival[: j + 1]))

    def age_profile(self, year: int) -> tuple[np.ndarray, np.ndarray]:
        """(ages, surviving capacity) of the in-service fleet in ``year``."""
        j = self._index(year)
        ages = np.arange(j, -1, -1)
        return ages, self.total_installations[: j + 1] * self._survival[ages]


def build_cohort_ledger(net_additions: Iterable[float], p: WeibullParams, start_year: int = 1) -> CohortLedger:
    """TC(1) = C(1); TC(y) = C(y) + sum_k TC(k) dF(y-k) for y >= 2.

    The convolution runs over TC, so replacements of replacements are kept.
    """
    C = np.asarray(list(net_additions) if not isinstance(net_additions, np.ndarray) else net_additions, dtype=float)
    if C.ndim != 1 or C.size == 0:
        raise InputError("net additions must be a non-empty 1-d series")
    if np.any(~np.isfinite(C)) or np.any(C < 0):
        raise InputError("net additions must be finite and nonnegative")
    n = C.size
    d = failure_increments(n, p)
    TC = np.empty(n)
    for y in range(n):
        # d[1..y] against TC[y-1..0]
        TC[y] = C[y] + np.dot(TC[:y][::-1], d[1 : y + 1])
    return CohortLedger(int(start_year), C, TC, p)


def surviving_stock(ledger: CohortLedger, year: int) -> float:
    """SC_total(Y) = sum_{y<=Y} TC(y) S(Y-y)."""
    return ledger.surviving_stock(year)


def read_net_additions(path: str | Path) -> dict[str, dict[int, float]]:
    """``equipment_class, year, net_addition_gva`` -> {class: {year: gva}}."""
    out: dict[str, dict[int, float]] = {}
    for i, row in enumerate(read_rows(path, ("equipment_class", "year", "net_addition_gva")), start=2):
        where = f"{path}:{i}"
        try:
            year = int(row["year"])
        except ValueError:
            raise InputError(f"{where}: bad year {row['year']!r}") from None
        val = parse_float(row["net_addition_gva"], where)
        if not math.isfinite(val) or val < 0:
            raise InputError(f"{where}: net addition must be nonnegative")
        series = out.setdefault(row["equipment_class"], {})
        if year in series:
            raise InputError(f"{where}: duplicate year {year} for {row['equipment_class']}")
        series[year] = val
    return out


def dense_series(series: Mapping[int, float], last_year: int | None = None) -> tuple[int, np.ndarray]:
    """Contiguous array from first recorded year, gaps filled with zero."""
    if not series:
        raise InputError("empty net-addition series")
    first = min(series)
    last = max(series) if last_year is None else max(last_year, max(series))
    arr = np.zeros(last - first + 1)
    for y, v in series.items():
        arr[y - first] = v
    return first, arr
