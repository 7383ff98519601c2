"""Regression of runtime on dataset size, and runtime report tables."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

P_FLOOR = 2.2e-16
BETACF_TOL = 1e-12
BETACF_MAX_ITER = 10_000


class SingularDesignError(ValueError):
    pass


# -- t distribution -------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def format_p(p: float) -> str:
    return f"< {P_FLOOR:.1e}" if p < P_FLOOR else f"{p:.3g}"


# -- OLS ------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionFit:
    beta0: float
    beta1: float
    stderr0: float
    stderr1: float
    t0: float
    t1: float
    p0: float
    p1: float
    r_squared: float
    n_points: int


def fit_ols(x: Sequence[float], y: Sequence[float]) -> RegressionFit:
    """Least squares ``y ~ beta0 + beta1*x`` via Householder QR, with two-sided t-test p-values."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    n = xs.size
    if n != ys.size:
        raise ValueError("x and y differ in length")
    if n < 3:
        raise ValueError("need at least 3 points")
    if np.all(xs == xs[0]):
        raise SingularDesignError("x has zero variance")

    design = np.column_stack([np.ones(n), xs])
    q, r = np.linalg.qr(design)
    qty = q.T @ ys
    # back-substitution on the 2x2 upper-triangular factor
    beta1 = qty[1] / r[1, 1]
    beta0 = (qty[0] - r[0, 1] * beta1) / r[0, 0]

    resid = ys - (beta0 + beta1 * xs)
    ssr = float(resid @ resid)
    centred = ys - ys.mean()
    sst = float(centred @ centred)
    df = n - 2
    sigma2 = ssr / df
    r_inv = np.linalg.inv(r)
    cov = sigma2 * (r_inv @ r_inv.T)
    se0, se1 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])

    def tstat(b, se):
        if se == 0.0:
            # a perfect fit: nonzero coefficients are certain, an exact zero carries no evidence
            return math.copysign(math.inf, b) if b else 0.0
        return b / se

    t0, t1 = tstat(beta0, se0), tstat(beta1, se1)
    r2 = 1.0 if sst == 0.0 else 1.0 - ssr / sst
    return RegressionFit(float(beta0), float(beta1), se0, se1, t0, t1,
                         t_two_sided_p(t0, df), t_two_sided_p(t1, df), r2, n)


# -- report tables ----------------------------------------------------------------

PROTOCOL_ORDER = {"HE": 0, "MPC": 1}


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    protocol: str
    M: int
    theta_cli: float
    var_cli: float
    theta_srv: float
    var_srv: float
    size: int | None = None


@dataclass
class ReportTable:
    experiment: str
    rows: list[ReportRow] = field(default_factory=list)
    regressions: dict[str, RegressionFit] = field(default_factory=dict)

    def sorted_rows(self) -> list[ReportRow]:
        """Rows by dataset (first appearance), protocol, size, then M."""
        order: dict[str, int] = {}
        for row in self.rows:
            order.setdefault(row.dataset, len(order))
        return sorted(self.rows, key=lambda r: (
            order[r.dataset], PROTOCOL_ORDER.get(r.protocol, 99), r.protocol,
            -1 if r.size is None else r.size, r.M))


COLUMNS = ("dataset", "size", "protocol", "M", "theta_cli", "var_cli", "theta_srv", "var_srv")


def _fmt_theta(v: float) -> str:
    return f"{v:.3f}" if abs(v) < 1 else f"{v:.2f}"


def _fmt_var(v: float) -> str:
    return f"{v:.2e}" if abs(v) < 1e-3 else f"{v:.3f}" if abs(v) < 1 else f"{v:.2f}"


def _render_markdown(table: ReportTable) -> str:
    rows = table.sorted_rows()
    show_size = any(r.size is not None for r in rows)
    header = ["Dataset"] + (["Size"] if show_size else []) + \
        ["Protocol", "M", "θ̂_cli", "Var(θ̂_cli)", "θ̂_srv", "Var(θ̂_srv)"]
    lines = [f"## {table.experiment}", "",
             "| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    for r in rows:
        cells = [r.dataset] + ([str(r.size)] if show_size else []) + [
            r.protocol, str(r.M), _fmt_theta(r.theta_cli), _fmt_var(r.var_cli),
            _fmt_theta(r.theta_srv), _fmt_var(r.var_srv)]
        lines.append("| " + " | ".join(cells) + " |")
    if table.regressions:
        lines += ["", "### t_cli ~ β0 + β1·ℓ", "",
                  "| Protocol | β0 | β1 | se(β0) | se(β1) | p(β0) | p(β1) | R² | n |",
                  "|---|---|---|---|---|---|---|---|---|"]
        for name in sorted(table.regressions, key=lambda p: (PROTOCOL_ORDER.get(p, 99), p)):
            f = table.regressions[name]
            lines.append(
                f"| {name} | {f.beta0:.4g} | {f.beta1:.4g} | {f.stderr0:.3g} | {f.stderr1:.3g} "
                f"| {format_p(f.p0)} | {format_p(f.p1)} | {f.r_squared:.4f} | {f.n_points} |")
    return "\n".join(lines) + "\n"


def _render_csv(table: ReportTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.sorted_rows():
        w.writerow([r.dataset, "" if r.size is None else r.size, r.protocol, r.M,
                    repr(r.theta_cli), repr(r.var_cli), repr(r.theta_srv), repr(r.var_srv)])
    return buf.getvalue()


def _render_json(table: ReportTable) -> str:
    obj = {
        "experiment": table.experiment,
        "rows": [asdict(r) for r in table.sorted_rows()],
        "regressions": {k: asdict(v) for k, v in sorted(table.regressions.items())},
    }
    return json.dumps(obj, indent=2) + "\n"


RENDERERS = {"markdown": _render_markdown, "csv": _render_csv, "json": _render_json}
EXTENSIONS = {"markdown": "md", "csv": "csv", "json": "json"}


def render(table: ReportTable, fmt: str = "markdown") -> str:
    try:
        return RENDERERS[fmt](table)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None


def parse_json(text: str) -> ReportTable:
    obj = json.loads(text)
    return ReportTable(
        obj["experiment"],
        [ReportRow(**r) for r in obj["rows"]],
        {k: RegressionFit(**v) for k, v in obj.get("regressions", {}).items()},
    )


def timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def write_report(table: ReportTable, out_dir: str | Path, fmt: str = "markdown",
                 stamp: str | None = None) -> Path:
    """Write ``{experiment}-{timestamp}.{ext}`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{table.experiment}-{stamp or timestamp()}.{EXTENSIONS[fmt]}"
    path.write_text(render(table, fmt))
    return path
