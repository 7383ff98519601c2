"""Monte Carlo runtime estimation over repeated protocol runs.

For recorded runtimes t_1..t_M the engine reports

    theta_hat = (1/M) * sum(t_i)
    var_hat   = (1/M**2) * sum((t_i - theta_hat)**2)

per role. ``var_hat`` is the variance of the estimator, not of the samples;
the unbiased sample variance is reported alongside as ``sample_var``.
"""
from __future__ import annotations

import csv
import gc
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TextIO

from . import paillier as he
from ._rand import RecordingRandom, derive_seed
from .data_gen import DistSpec, sample
from .harness import CLIENT, SERVER, RuntimeSample, SimHarness
from .mean_protocols import MeanProtocolConfig, Protocol, run_protocol


class IterationError(RuntimeError):
    def __init__(self, iteration: int, cause: BaseException):
        super().__init__(f"iteration {iteration} failed: {cause!r}")
        self.iteration = iteration


@dataclass(frozen=True)
class McEstimate:
    theta_hat: float
    var_hat: float
    M: int
    role: str
    sample_var: float = float("nan")
    samples: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunnerSpec:
    """Everything that fixes one iteration's workload distribution.

    Exactly one of ``dataset`` (fixed values) or ``dist`` (resampled every
    iteration) is set. Iteration ``i`` draws its protocol randomness and, for
    ``dist``, its dataset from seeds split off ``seed``.
    """

    config: MeanProtocolConfig
    dataset: tuple[int, ...] | None = None
    dist: DistSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.dataset is None) == (self.dist is None):
            raise ValueError("exactly one of dataset or dist is required")
        if self.dataset is not None:
            object.__setattr__(self, "dataset", tuple(self.dataset))

    @property
    def size(self) -> int:
        return len(self.dataset) if self.dataset is not None else self.dist.size


def msb_magnitude(values: Iterable[int]) -> float:
    """Average most-significant-bit position; 0 maps to 0 and u > 0 to floor(log2 u) + 1."""
    total = count = 0
    for u in values:
        total += int(u).bit_length()
        count += 1
    return total / count if count else 0.0


def moments(samples: Sequence[float]) -> tuple[float, float, float]:
    """Return (theta_hat, var_hat, sample_var) for the given runtimes."""
    m = len(samples)
    if m < 1:
        raise ValueError("need at least one sample")
    theta = math.fsum(samples) / m
    ss = math.fsum((t - theta) ** 2 for t in samples)
    sample_var = ss / (m - 1) if m > 1 else float("nan")
    return theta, ss / (m * m), sample_var


def summarize(samples: Sequence[RuntimeSample]) -> tuple[McEstimate, McEstimate]:
    out = []
    for role, attr in ((CLIENT, "t_cli"), (SERVER, "t_srv")):
        ts = tuple(getattr(s, attr) for s in samples)
        theta, var_hat, sample_var = moments(ts)
        out.append(McEstimate(theta, var_hat, len(ts), role, sample_var, ts))
    return out[0], out[1]


@lru_cache(maxsize=8)
def cached_keypair(bits: int, seed: int) -> tuple[he.PublicKey, he.PrivateKey]:
    return he.keygen(bits, RecordingRandom(derive_seed(seed, "paillier-key", bits)))


def simulate(
    runner: RunnerSpec,
    M: int,
    harness: SimHarness | None = None,
    keys: tuple[he.PublicKey, he.PrivateKey] | None = None,
    disable_gc: bool = True,
    progress: Callable[[int], None] | None = None,
) -> list[RuntimeSample]:
    """Run the protocol ``M`` times and return every iteration's sample.

    Key generation and dataset sampling happen outside the timed phases.
    With ``disable_gc`` the cyclic collector is paused while an iteration runs.
    """
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    cfg = runner.config
    owns_harness = harness is None
    harness = harness or SimHarness()
    if cfg.protocol is Protocol.HE and keys is None:
        keys = cached_keypair(cfg.key_bits, runner.seed)
    samples = []
    try:
        for i in range(M):
            if runner.dataset is not None:
                data = runner.dataset
            else:
                data = sample(runner.dist, derive_seed(runner.seed, "data", i)).values
            rng = RecordingRandom(derive_seed(runner.seed, "protocol", i))
            gc_was_on = gc.isenabled()
            if disable_gc:
                gc.disable()
            try:
                result = run_protocol(data, cfg, harness, rng, keys, iteration=i)
            except Exception as exc:
                raise IterationError(i, exc) from exc
            finally:
                if gc_was_on:
                    gc.enable()
            result.timings.h_u = msb_magnitude(rng.draws)
            samples.append(result.timings)
            if progress is not None:
                progress(i)
    finally:
        if owns_harness:
            harness.shutdown()
    return samples


def estimate(runner: RunnerSpec, M: int, **kwargs) -> tuple[McEstimate, McEstimate]:
    """Client and server estimates from ``M`` fresh runs."""
    return summarize(simulate(runner, M, **kwargs))


def convergence_report(runner: RunnerSpec, M_list: Sequence[int], **kwargs) -> list[tuple[int, McEstimate, McEstimate]]:
    """One estimate pair per M, all from the same master seed."""
    if not M_list:
        raise ValueError("M_list is empty")
    if list(M_list) != sorted(M_list):
        raise ValueError("M_list must be ascending")
    return [(M, *estimate(runner, M, **kwargs)) for M in M_list]


SAMPLE_FIELDS = ("iteration", "t_cli_ms", "t_srv_ms", "h_U")


def sample_row(s: RuntimeSample) -> list[str]:
    return [str(s.iteration), repr(s.t_cli), repr(s.t_srv), repr(s.h_u)]


def write_samples_csv(samples: Sequence[RuntimeSample], fp: TextIO) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(SAMPLE_FIELDS)
    for s in samples:
        w.writerow(sample_row(s))
