"""Source, channel and system configuration types, plus frame enumeration."""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import CapExceeded, ConfigError

__all__ = [
    "SourceModel",
    "ChannelKind",
    "ChannelModel",
    "SystemConfig",
    "FrameState",
    "FrameTable",
    "PolicyDecision",
    "make_source_u",
    "make_source_g",
    "make_source_d",
    "source_by_name",
    "enumerate_frames",
    "frame_table",
    "db_to_linear",
    "linear_to_db",
    "load_config",
    "parse_config",
    "DEFAULT_FRAME_CAP",
]

DEFAULT_FRAME_CAP = 10**6
_PMF_TOL = 1e-12


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SourceModel:
    """Discrete-state Gaussian source: per-state variances and state pmf."""

    variances: tuple
    pmf: tuple
    name: str = ""

    def __post_init__(self):
        variances = tuple(float(v) for v in self.variances)
        pmf = tuple(float(p) for p in self.pmf)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "pmf", pmf)
        if len(variances) == 0:
            raise ConfigError("source needs at least one state")
        if len(variances) != len(pmf):
            raise ConfigError(
                f"variances ({len(variances)}) and pmf ({len(pmf)}) differ in length"
            )
        if not all(math.isfinite(v) and v > 0.0 for v in variances):
            raise ConfigError("variances must be finite and strictly positive")
        if any(p < 0.0 or not math.isfinite(p) for p in pmf):
            raise ConfigError("pmf entries must be nonnegative")
        if abs(math.fsum(pmf) - 1.0) > _PMF_TOL:
            raise ConfigError(f"pmf sums to {math.fsum(pmf)!r}, not 1")

    @property
    def num_states(self) -> int:
        return len(self.variances)

    @property
    def mean_variance(self) -> float:
        """E_s[sigma^2]."""
        return math.fsum(v * p for v, p in zip(self.variances, self.pmf))


class ChannelKind(enum.Enum):
    RAYLEIGH_UNIT_MEAN = "rayleigh"


@dataclass(frozen=True)
class ChannelModel:
    """Block-fading power gain. Only unit-mean Rayleigh (exponential gain) is modelled."""

    kind: ChannelKind = ChannelKind.RAYLEIGH_UNIT_MEAN

    def density(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        return np.where(alpha >= 0.0, np.exp(-alpha), 0.0)

    def survival(self, alpha):
        """Pr(gain >= alpha)."""
        alpha = np.asarray(alpha, dtype=float)
        return np.where(alpha >= 0.0, np.exp(-np.maximum(alpha, 0.0)), 1.0)

    def outage_probability(self, threshold):
        """Pr(gain < threshold)."""
        return -np.expm1(-np.maximum(np.asarray(threshold, dtype=float), 0.0))


RAYLEIGH = ChannelModel()


@dataclass(frozen=True)
class SystemConfig:
    """Frame size K, bandwidth ratio b, buffer cap B_max (bits/sample) and power budget."""

    frame_blocks: int
    bandwidth_ratio: float = 1.0
    buffer_cap: float = math.inf
    power_budget: float = 1.0

    def __post_init__(self):
        if int(self.frame_blocks) != self.frame_blocks or self.frame_blocks < 1:
            raise ConfigError(f"frame_blocks must be a positive integer, got {self.frame_blocks}")
        object.__setattr__(self, "frame_blocks", int(self.frame_blocks))
        if not (self.bandwidth_ratio >= 1.0) or math.isinf(self.bandwidth_ratio):
            raise ConfigError(f"bandwidth_ratio must be finite and >= 1, got {self.bandwidth_ratio}")
        if not (self.buffer_cap > 0.0):
            raise ConfigError(f"buffer_cap must be positive, got {self.buffer_cap}")
        if not (self.power_budget > 0.0) or math.isinf(self.power_budget):
            raise ConfigError(f"power_budget must be finite and positive, got {self.power_budget}")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.buffer_cap)

    @property
    def power_db(self) -> float:
        return linear_to_db(self.power_budget)

    def with_power_db(self, power_db: float) -> "SystemConfig":
        return SystemConfig(self.frame_blocks, self.bandwidth_ratio, self.buffer_cap,
                            db_to_linear(power_db))

    def replace(self, **changes) -> "SystemConfig":
        kw = dict(frame_blocks=self.frame_blocks, bandwidth_ratio=self.bandwidth_ratio,
                  buffer_cap=self.buffer_cap, power_budget=self.power_budget)
        kw.update(changes)
        return SystemConfig(**kw)


@dataclass(frozen=True)
class FrameState:
    """One realization of the K block states, with variances sorted descending."""

    states: tuple
    sorted_variances: tuple
    probability: float
    # block index of each sorted entry, for mapping rates back to block order
    order: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class PolicyDecision:
    """Per-(frame, gain) decision. ``source_rates`` follow descending-variance order."""

    source_rates: tuple
    channel_rate: float
    power: float

    @property
    def total_rate(self) -> float:
        return math.fsum(self.source_rates)


@dataclass(frozen=True)
class FrameTable:
    """Array view of an enumerated frame set: rows of descending variances and weights."""

    variances: np.ndarray  # (F, K), each row nonincreasing
    probabilities: np.ndarray  # (F,)

    @property
    def frame_blocks(self) -> int:
        return self.variances.shape[1]

    def __len__(self):
        return self.variances.shape[0]

    def expect(self, values) -> float:
        """Probability-weighted sum of per-frame values."""
        return float(np.dot(self.probabilities, np.asarray(values, dtype=float)))


def make_source_u() -> SourceModel:
    """Nine states, variance 1 + (s-1)^2, uniform pmf."""
    variances = [1.0 + (s - 1) ** 2 for s in range(1, 10)]
    return SourceModel(tuple(variances), tuple([1.0 / 9.0] * 9), name="U")


def make_source_g(mean: float = 5.49, var: float = 2.52) -> SourceModel:
    """Same variances as source U, discretised Gaussian pmf over the state index."""
    states = np.arange(1, 10, dtype=float)
    kernel = np.exp(-((states - mean) ** 2) / (2.0 * var))
    pmf = kernel / kernel.sum()
    pmf = pmf / math.fsum(pmf)
    variances = [1.0 + (s - 1) ** 2 for s in range(1, 10)]
    return SourceModel(tuple(variances), tuple(pmf.tolist()), name="G")


def make_source_d(variance: float = 23.66) -> SourceModel:
    """Stationary single-state source."""
    return SourceModel((variance,), (1.0,), name="D")


_NAMED_SOURCES = {"U": make_source_u, "G": make_source_g, "D": make_source_d}


def source_by_name(name: str) -> SourceModel:
    try:
        return _NAMED_SOURCES[name.upper()]()
    except KeyError:
        raise ConfigError(f"unknown source {name!r}; expected one of U, G, D") from None


def enumerate_frames(source: SourceModel, K: int, cap: int = DEFAULT_FRAME_CAP,
                     merge: bool = False) -> list:
    """All N_s^K state vectors with their product probabilities.

    With ``merge=True`` frames sharing the same sorted variance vector are
    collapsed into one entry (their probabilities summed; ``states`` holds
    the first representative).
    """
    if K < 1:
        raise ConfigError(f"K must be positive, got {K}")
    count = source.num_states ** K
    if count > cap:
        raise CapExceeded(f"{source.num_states}^{K} = {count} frames exceeds cap {cap}")
    var = source.variances
    pmf = source.pmf
    frames = []
    merged = {}
    for states in itertools.product(range(source.num_states), repeat=K):
        prob = math.prod(pmf[s] for s in states)
        # stable sort: ties keep original block order
        order = tuple(sorted(range(K), key=lambda j: -var[states[j]]))
        sorted_var = tuple(var[states[j]] for j in order)
        if merge:
            if sorted_var in merged:
                idx = merged[sorted_var]
                f = frames[idx]
                frames[idx] = FrameState(f.states, f.sorted_variances, f.probability + prob, f.order)
                continue
            merged[sorted_var] = len(frames)
        frames.append(FrameState(tuple(s + 1 for s in states), sorted_var, prob, order))
    return frames


def frame_table(source: SourceModel, K: int, merge: bool = True,
                cap: int = DEFAULT_FRAME_CAP) -> FrameTable:
    """Frame set as arrays; merged by default since every evaluator is order-invariant."""
    if merge:
        # combinations with replacement over states sorted by descending variance
        idx = sorted(range(source.num_states), key=lambda s: -source.variances[s])
        var = np.array([source.variances[s] for s in idx])
        pmf = np.array([source.pmf[s] for s in idx])
        rows, probs = [], []
        for combo in itertools.combinations_with_replacement(range(len(idx)), K):
            counts = np.bincount(combo, minlength=len(idx))
            multinom = math.factorial(K) / math.prod(math.factorial(c) for c in counts)
            prob = multinom * math.prod(pmf[c] for c in combo)
            if prob == 0.0:
                continue
            rows.append(var[list(combo)])
            probs.append(prob)
        if len(rows) > cap:
            raise CapExceeded(f"{len(rows)} merged frames exceeds cap {cap}")
        return FrameTable(np.array(rows), np.array(probs))
    frames = enumerate_frames(source, K, cap=cap)
    return FrameTable(np.array([f.sorted_variances for f in frames]),
                      np.array([f.probability for f in frames]))


def parse_config(doc: dict) -> tuple:
    """Build ``(SourceModel, SystemConfig)`` from a config mapping.

    Keys: ``source`` ("U" | "G" | "D" or ``{"variances": [...], "pmf": [...]}``),
    ``K``, ``b``, ``B_max`` (number or "inf") and ``P_bar_dB``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    try:
        src = doc["source"]
        K = doc["K"]
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc.args[0]!r}") from None
    if isinstance(src, str):
        source = source_by_name(src)
    elif isinstance(src, dict):
        try:
            source = SourceModel(tuple(src["variances"]), tuple(src["pmf"]),
                                 name=str(src.get("name", "custom")))
        except KeyError as exc:
            raise ConfigError(f"explicit source needs {exc.args[0]!r}") from None
    else:
        raise ConfigError("source must be a name or an object with variances and pmf")

    b_max = doc.get("B_max", "inf")
    if isinstance(b_max, str):
        if b_max.strip().lower() not in ("inf", "infinity", "unbounded"):
            raise ConfigError(f"B_max must be a number or 'inf', got {b_max!r}")
        b_max = math.inf
    if isinstance(K, bool) or not isinstance(K, int):
        raise ConfigError(f"K must be an integer, got {K!r}")
    try:
        cfg = SystemConfig(
            frame_blocks=K,
            bandwidth_ratio=float(doc.get("b", 1.0)),
            buffer_cap=float(b_max),
            power_budget=db_to_linear(float(doc.get("P_bar_dB", 0.0))),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return source, cfg


def load_config(path) -> tuple:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(doc)
