"""Two-sample t-tests over per-run balanced-accuracy samples, and the
comparison/best tables built from experiment results.

The t CDF is computed through the regularized incomplete beta function
(continued-fraction evaluation); Welch's unequal-variance test is the
default, with Student's pooled test available behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .nn import DEFAULT_FILTER_PAIRS

PAIR_ORDER = [f"{a}-{b}" for a, b in DEFAULT_FILTER_PAIRS]

APPROACH_TITLES = {
    "binary-binary": "Binary training / Binary classification",
    "multi-multi": "Multiclass training / Multi-class classification",
    "multi-binary": "Multiclass training / Binary classification",
}


class DegenerateTestError(ValueError):
    pass


def _betacf(a: float, b: float, x: float, max_iter: int = 300,
            eps: float = 3e-16) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: float) -> float:
    """CDF of Student's t distribution with df degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    ib = betainc_reg(df / 2.0, 0.5, df / (df + x * x))
    return 1.0 - ib / 2.0 if x > 0 else ib / 2.0


def _mean_var(values: list[float]) -> tuple[float, float, int]:
    n = len(values)
    if n < 2:
        raise ValueError("need at least 2 values per sample")
    if any(not math.isfinite(v) for v in values):
        raise ValueError("samples must be finite")
    m = math.fsum(values) / n
    var = math.fsum((v - m) ** 2 for v in values) / (n - 1)
    return m, var, n


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    alpha: float

    @property
    def reject_h0(self) -> bool:
        return self.p_value < self.alpha


def welch_t_test(a: list[float], b: list[float], alpha: float = 0.05,
                 equal_var: bool = False) -> TTestResult:
    """Two-tailed two-sample t-test of equal means.  Welch's statistic and
    Welch-Satterthwaite df by default; equal_var=True selects Student's
    pooled-variance variant."""
    ma, va, na = _mean_var(a)
    mb, vb, nb = _mean_var(b)
    if va == 0.0 and vb == 0.0:
        if ma == mb:
            raise DegenerateTestError("both samples constant and equal; t-test undefined")
        raise DegenerateTestError("both samples have zero variance")
    if equal_var:
        sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        se2 = sp2 * (1.0 / na + 1.0 / nb)
        df = float(na + nb - 2)
    else:
        se2 = va / na + vb / nb
        df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    t = (ma - mb) / math.sqrt(se2)
    p = 2.0 * (1.0 - t_cdf(abs(t), df)) if t != 0.0 else 1.0
    return TTestResult(t, df, min(p, 1.0), alpha)


# ---------------------------------------------------------------------------
# report tables


def format_pvalue(p: float) -> str:
    """Scientific notation with 3 significant digits, e.g. 3.68e-19."""
    if p == 0.0:
        return "0.00e+00"
    return f"{p:.2e}"


@dataclass
class Table:
    title: str
    header: list[str]
    rows: list[list[str]]

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        cols = [self.header] + self.rows
        widths = [max(len(row[i]) for row in cols) for i in range(len(self.header))]
        def fmt(row):
            return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
        return "\n".join([self.title, sep, fmt(self.header), sep]
                         + [fmt(r) for r in self.rows] + [sep]) + "\n"


class MissingCellError(ValueError):
    pass


def _cell(results: dict, approach: str, pair: str):
    res = results.get((approach, pair))
    if res is None or not res.baccs:
        raise MissingCellError(f"no results for approach {approach!r}, pair {pair!r}")
    return res


def comparison_table(results: dict, approach_a: str, approach_b: str,
                     alpha: float = 0.05, pairs: list[str] | None = None,
                     equal_var: bool = False) -> Table:
    """Per-filter-pair p-values for equal mean bACC between two approaches."""
    pairs = pairs or PAIR_ORDER
    rows = []
    for pair in pairs:
        ra = _cell(results, approach_a, pair)
        rb = _cell(results, approach_b, pair)
        tt = welch_t_test(ra.baccs, rb.baccs, alpha, equal_var)
        rows.append([pair.replace("-", " - "), format_pvalue(tt.p_value),
                     "reject" if tt.reject_h0 else "accept"])
    title = (f"P-values from t-test: {APPROACH_TITLES.get(approach_a, approach_a)} "
             f"vs {APPROACH_TITLES.get(approach_b, approach_b)} (alpha={alpha})")
    return Table(title, ["Filter pair", "p-value", "H0"], rows)


def best_bacc_table(results: dict, approaches: list[str] | None = None,
                    pairs: list[str] | None = None) -> Table:
    """Best bACC per (filter pair, approach) cell, as percentages."""
    approaches = approaches or list(APPROACH_TITLES)
    pairs = pairs or PAIR_ORDER
    rows = []
    for pair in pairs:
        row = [pair.replace("-", " - ")]
        for approach in approaches:
            row.append(f"{_cell(results, approach, pair).best * 100:.1f}")
        rows.append(row)
    header = ["Number-of-filter values"] + [f"{APPROACH_TITLES.get(a, a)} (%)"
                                            for a in approaches]
    return Table("Best balanced accuracy (bACC) by training approach and filter pair",
                 header, rows)
