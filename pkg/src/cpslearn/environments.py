"""Data-source abstractions: batch, streaming, and interactive environments.

Three environment kinds cover the ways a system can provide data: an
:class:`OfflineEnvironment` is observed once and yields a whole dataset, an
:class:`IncrementalEnvironment` yields batches until exhausted, and an
:class:`ActiveEnvironment` is driven step by step through actions. A
fixed-step simulation of a nonlinear water tank serves as the built-in
benchmark system.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator

import numpy as np

from .dataset import Dataset, load_csv, load_json
from .errors import PipelineError
from .transforms import Transform, TransformChain, as_chain


class ActionOutOfRange(PipelineError):
    """An action was submitted outside the environment's action space."""


class NonFiniteState(PipelineError):
    """Numerical integration produced a non-finite state."""


class OfflineEnvironment:
    """A data source observed once, as a single batch.

    Observation is idempotent: the underlying source is loaded once and
    cached, so repeated observations yield equal datasets even if a backing
    file changes in between. Transforms attached via :meth:`with_transform`
    are applied, in attachment order, to every observation.
    """

    def __init__(self, loader: Callable[[], Dataset], transforms: TransformChain | None = None):
        self._loader = loader
        self._chain = as_chain(transforms)
        self._raw: Dataset | None = None

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "OfflineEnvironment":
        return cls(lambda: dataset)

    @classmethod
    def from_csv(cls, path, has_header: bool = True, delimiter: str = ",") -> "OfflineEnvironment":
        return cls(lambda: load_csv(path, has_header=has_header, delimiter=delimiter))

    @classmethod
    def from_json(cls, path) -> "OfflineEnvironment":
        return cls(lambda: load_json(path))

    def with_transform(self, transform: Transform) -> "OfflineEnvironment":
        """Return a new environment with one more transform attached."""
        env = OfflineEnvironment(self._loader, TransformChain([*self._chain, transform]))
        env._raw = self._raw
        return env

    def observe(self) -> Dataset:
        if self._raw is None:
            self._raw = self._loader()
        return self._chain.apply(self._raw)


class IncrementalEnvironment(abc.ABC):
    """A source that yields datasets batch by batch until exhausted."""

    @abc.abstractmethod
    def next_batch(self) -> Dataset | None:
        """Return the next batch, or None once the stream is exhausted.

        Exhaustion is stable: after the first None, every further call
        returns None as well.
        """

    def __iter__(self) -> Iterator[Dataset]:
        while (batch := self.next_batch()) is not None:
            yield batch


class DatasetStream(IncrementalEnvironment):
    """Replay a dataset as a stream of consecutive row batches.

    Every batch holds at most ``batch_size`` rows; the final batch may be
    shorter. Concatenating all batches reproduces the source dataset.
    """

    def __init__(self, dataset: Dataset, batch_size: int):
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        self._dataset = dataset
        self._batch_size = batch_size
        self._cursor = 0

    def next_batch(self) -> Dataset | None:
        if self._cursor >= self._dataset.row_count:
            return None
        batch = self._dataset.slice_rows(self._cursor, self._cursor + self._batch_size)
        self._cursor += batch.row_count
        return batch


@dataclass(frozen=True)
class ActionSpace:
    """A single continuous action dimension with inclusive bounds."""

    name: str
    low: float
    high: float

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


class ActiveEnvironment(abc.ABC):
    """A system driven through an act / advance / observe cycle.

    ``observe`` is side-effect free: without an intervening ``act`` or
    ``advance`` it keeps returning the same single-row dataset.
    """

    @property
    @abc.abstractmethod
    def action_space(self) -> ActionSpace: ...

    @abc.abstractmethod
    def act(self, action: float) -> None:
        """Record an action; it takes effect at the next advance."""

    @abc.abstractmethod
    def advance(self) -> None:
        """Move internal time forward one step under the pending action."""

    @abc.abstractmethod
    def observe(self) -> Dataset:
        """Return the current observation as a single-row dataset."""


def clipped_sine_inflow(t: float) -> float:
    """Default benchmark inflow: a sine wave of period 10 s, clipped at 0."""
    return max(0.0, math.sin(2.0 * math.pi * t / 10.0))


def zero_inflow(t: float) -> float:
    return 0.0


def rk4_step(f: Callable[[float, float], float], t: float, y: float, h: float) -> float:
    """One classical 4th-order Runge-Kutta step for a scalar ODE y' = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + h / 2.0, y + h * k1 / 2.0)
    k3 = f(t + h / 2.0, y + h * k2 / 2.0)
    k4 = f(t + h, y + h * k3)
    return y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@dataclass(frozen=True)
class WaterTankSystem:
    """A tank with level-proportional-root outflow and a gated inflow.

    The fill level changes at rate
    ``(inflow_gain * inflow(t) - outflow_coeff * sqrt(level)) / area``.
    The level is physically non-negative: it is clamped at zero both inside
    the rate evaluation and after every integration step.

    Attributes:
        level: current fill level (dimensionless length units).
        time: current simulation time in seconds.
        area: tank cross-section, must be positive.
        outflow_coeff: scaling of the square-root outflow term.
        inflow_gain: scaling of the inflow term.
        inflow: time-dependent inflow signal.
    """

    level: float = 1.0
    time: float = 0.0
    area: float = 5.0
    outflow_coeff: float = 0.5
    inflow_gain: float = 2.0
    inflow: Callable[[float], float] = clipped_sine_inflow

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError(f"tank area must be positive, got {self.area}")

    def rate(self, t: float, level: float) -> float:
        """Time derivative of the fill level at (t, level)."""
        outflow = self.outflow_coeff * math.sqrt(max(level, 0.0))
        return (self.inflow_gain * self.inflow(t) - outflow) / self.area

    def step(self, dt: float) -> "WaterTankSystem":
        """Advance one fixed RK4 step of size ``dt``; returns the new system.

        Raises:
            NonFiniteState: if the level leaves the finite range.
        """
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        level = rk4_step(self.rate, self.time, self.level, dt)
        if not math.isfinite(level):
            raise NonFiniteState(f"level became non-finite at t={self.time + dt}")
        return replace(self, level=max(level, 0.0), time=self.time + dt)


class OdeEnvironment:
    """Samples a simulated ODE system at a fixed period.

    Between output samples the system is integrated with a fixed internal
    substep (default 1 ms) so the sampling period does not limit accuracy.
    Sample ``i`` is taken at ``t0 + i * sample_period``, starting at the
    system's initial time.
    """

    def __init__(self, system: WaterTankSystem, sample_period: float = 0.1, substep: float = 1e-3):
        if sample_period <= 0:
            raise ValueError(f"sample_period must be positive, got {sample_period}")
        if substep <= 0:
            raise ValueError(f"substep must be positive, got {substep}")
        self._initial = system
        self.sample_period = sample_period
        self.substep = substep

    def sample_trajectory(self, n: int) -> Dataset:
        """Simulate and return n samples as a Dataset {t, V, x}.

        Columns: sample time ``t``, inflow value ``V`` at that time, and the
        fill level ``x``. Consecutive rows are ``sample_period`` apart.
        """
        if n < 1:
            raise ValueError(f"need at least one sample, got {n}")
        system = self._initial
        substeps = max(1, round(self.sample_period / self.substep))
        h = self.sample_period / substeps

        times = np.empty(n, dtype=np.float64)
        inflows = np.empty(n, dtype=np.float64)
        levels = np.empty(n, dtype=np.float64)
        t0 = system.time
        for i in range(n):
            # Re-anchor the clock each sample so times carry no accumulated drift.
            t_i = t0 + i * self.sample_period
            system = replace(system, time=t_i)
            times[i] = t_i
            inflows[i] = system.inflow(t_i)
            levels[i] = system.level
            if i + 1 < n:
                for _ in range(substeps):
                    system = system.step(h)
        return Dataset([("t", times), ("V", inflows), ("x", levels)])


class WaterTankActiveEnvironment(ActiveEnvironment):
    """Interactive water tank: the action is the inflow level for a step.

    The pending action persists across advances (zero-order hold) until a new
    one is submitted; before any action the default inflow 0 is used.
    """

    def __init__(
        self,
        system: WaterTankSystem | None = None,
        step_period: float = 0.1,
        substep: float = 1e-3,
        max_inflow: float = 1.0,
    ):
        self._system = system if system is not None else WaterTankSystem()
        self._space = ActionSpace("V", 0.0, max_inflow)
        self._pending = 0.0
        self._step_period = step_period
        self._substeps = max(1, round(step_period / substep))

    @property
    def action_space(self) -> ActionSpace:
        return self._space

    @property
    def time(self) -> float:
        return self._system.time

    def act(self, action: float) -> None:
        if not self._space.contains(action):
            raise ActionOutOfRange(
                f"action {action} outside [{self._space.low}, {self._space.high}]"
            )
        self._pending = float(action)

    def advance(self) -> None:
        held = self._pending
        system = replace(self._system, inflow=lambda t: held)
        h = self._step_period / self._substeps
        for _ in range(self._substeps):
            system = system.step(h)
        self._system = replace(system, inflow=self._system.inflow)

    def observe(self) -> Dataset:
        return Dataset([("t", [self._system.time]), ("x", [self._system.level])])
