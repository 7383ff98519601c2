"""Datasets for the experiments: CSV ingestion and seeded distribution samplers.

Continuous draws are rounded half-up to nonnegative integers, since the
protocols operate on residues.
"""
from __future__ import annotations

import csv
import enum
import math
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Sequence

from ._rand import uniform_below


class DatasetError(ValueError):
    pass


class Family(str, enum.Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"
    GAMMA = "gamma"
    BETA = "beta"


@dataclass(frozen=True)
class DistSpec:
    """A distribution family with its parameters, an output multiplier and a sample size.

    Parameters are (low, high) for uniform, (mean, sd) for normal,
    (shape, scale) for gamma and (alpha, beta) for beta.
    """

    family: Family
    params: tuple[float, float]
    size: int
    scale_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(self.params))
        a, b = self.params
        if self.size < 1:
            raise DatasetError(f"size must be at least 1, got {self.size}")
        if self.scale_factor <= 0:
            raise DatasetError("scale_factor must be positive")
        fam = self.family
        if fam is Family.UNIFORM:
            if a != int(a) or b != int(b) or a < 0 or b <= a:
                raise DatasetError(f"uniform bounds must be integers with 0 <= low < high, got {self.params}")
        elif fam is Family.NORMAL:
            if b <= 0:
                raise DatasetError(f"normal sd must be positive, got {b}")
            if a < 0:
                raise DatasetError("normal mean must be nonnegative")
        elif a <= 0 or b <= 0:
            raise DatasetError(f"{fam.value} parameters must be positive, got {self.params}")

    def with_size(self, size: int) -> DistSpec:
        return DistSpec(self.family, self.params, size, self.scale_factor)

    @property
    def label(self) -> str:
        a, b = (int(p) if float(p).is_integer() else p for p in self.params)
        name = f"{self.family.value.capitalize()} ({a}, {b})"
        if self.scale_factor != 1:
            name = f"{self.scale_factor:g}*{name}"
        return name

    def mean(self) -> float:
        """Analytic mean of the (unrounded) scaled variate."""
        a, b = self.params
        fam = self.family
        if fam is Family.UNIFORM:
            m = (a + b - 1) / 2
        elif fam is Family.NORMAL:
            m = a
        elif fam is Family.GAMMA:
            m = a * b
        else:
            m = a / (a + b)
        return m * self.scale_factor

    def variance(self) -> float:
        a, b = self.params
        fam = self.family
        if fam is Family.UNIFORM:
            return ((b - a) ** 2 - 1) / 12
        if fam is Family.NORMAL:
            v = b * b
        elif fam is Family.GAMMA:
            v = a * b * b
        else:
            v = a * b / ((a + b) ** 2 * (a + b + 1))
        return v * self.scale_factor**2


# The four distributions of the sweep experiment.
SWEEP_DISTRIBUTIONS = {
    "uniform": lambda size: DistSpec(Family.UNIFORM, (80, 160), size),
    "normal": lambda size: DistSpec(Family.NORMAL, (120, 30), size),
    "gamma": lambda size: DistSpec(Family.GAMMA, (2, 2), size, 120),
    "beta": lambda size: DistSpec(Family.BETA, (30, 2), size, 120),
}


def parse_dist(text: str, size: int) -> DistSpec:
    """Parse ``name`` or ``name:p1:p2[:scale]`` into a DistSpec."""
    parts = text.split(":")
    name = parts[0].lower()
    if len(parts) == 1:
        if name not in SWEEP_DISTRIBUTIONS:
            raise DatasetError(f"unknown distribution {text!r}")
        return SWEEP_DISTRIBUTIONS[name](size)
    if len(parts) not in (3, 4):
        raise DatasetError(f"expected name:p1:p2[:scale], got {text!r}")
    try:
        nums = [float(p) for p in parts[1:]]
    except ValueError:
        raise DatasetError(f"non-numeric distribution parameter in {text!r}") from None
    scale = nums[2] if len(nums) == 3 else 1.0
    try:
        family = Family(name)
    except ValueError:
        raise DatasetError(f"unknown distribution family {name!r}") from None
    return DistSpec(family, (nums[0], nums[1]), size, scale)


@dataclass(frozen=True)
class Dataset:
    values: tuple[int, ...]
    provenance: str

    def __len__(self):
        return len(self.values)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


# -- CSV ------------------------------------------------------------------------

def load_csv(path: str | Path, column: str, delimiter: str = ",") -> Dataset:
    """Read one numeric column (header row required), rounding cells half-up to integers."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"file not found: {path}")
    values = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise DatasetError(f"{path}: column {column!r} not present (have {reader.fieldnames})")
        # header is line 1
        for row_no, row in enumerate(reader, start=2):
            cell = (row[column] or "").strip()
            try:
                value = int(Decimal(cell).quantize(Decimal(1), rounding=ROUND_HALF_UP))
            except (InvalidOperation, ValueError):
                raise DatasetError(f"{path}: row {row_no}: non-numeric cell {cell!r} in {column!r}") from None
            if value < 0:
                raise DatasetError(f"{path}: row {row_no}: negative value {value} in {column!r}")
            values.append(value)
    return Dataset(tuple(values), f"{path.name}:{column}")


def write_csv(dataset: Dataset | Sequence[int], path: str | Path, column: str = "value") -> None:
    values = dataset.values if isinstance(dataset, Dataset) else dataset
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([column])
        w.writerows([v] for v in values)


FIXTURES = {
    "dow_jones": ("dow_jones_index.csv", "volume", "Dow Jones Index"),
    "bank_marketing": ("bank_marketing.csv", "balance", "Bank Marketing"),
}


def fixture_path(name: str) -> Path:
    filename = FIXTURES[name][0]
    return Path(str(resources.files("mcruntime") / "fixtures" / filename))


def load_fixture(name: str) -> Dataset:
    filename, column, _ = FIXTURES[name]
    return load_csv(fixture_path(name), column)


# -- samplers ---------------------------------------------------------------------

class Variates:
    """Normal (Box-Muller), gamma (Marsaglia-Tsang) and beta draws from one random source."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self._spare: float | None = None

    def _open_unit(self) -> float:
        """Uniform on (0, 1]."""
        return 1.0 - self.rng.random()

    def std_normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        radius = math.sqrt(-2.0 * math.log(self._open_unit()))
        angle = 2.0 * math.pi * self.rng.random()
        self._spare = radius * math.sin(angle)
        return radius * math.cos(angle)

    def std_gamma(self, shape: float) -> float:
        if shape < 1.0:
            # boost: G(a) = G(a+1) * U^(1/a)
            return self.std_gamma(shape + 1.0) * self._open_unit() ** (1.0 / shape)
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.std_normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self._open_unit()
            if u < 1.0 - 0.0331 * x**4:
                return d * v
            if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
                return d * v

    def beta(self, a: float, b: float) -> float:
        x = self.std_gamma(a)
        y = self.std_gamma(b)
        return x / (x + y)


def sample(spec: DistSpec, seed: int) -> Dataset:
    """Draw ``spec.size`` i.i.d. nonnegative integers; deterministic in ``seed``."""
    rng = random.Random(seed)
    var = Variates(rng)
    a, b = spec.params
    scale = spec.scale_factor
    fam = spec.family
    out = []
    for _ in range(spec.size):
        if fam is Family.UNIFORM:
            out.append(int(a) + uniform_below(rng, int(b) - int(a)))
            continue
        while True:
            if fam is Family.NORMAL:
                x = a + b * var.std_normal()
            elif fam is Family.GAMMA:
                x = var.std_gamma(a) * b
            else:
                x = var.beta(a, b)
            value = round_half_up(x * scale)
            if value >= 0:
                break
        out.append(value)
    return Dataset(tuple(out), f"{spec.label} size={spec.size} seed={seed}")
