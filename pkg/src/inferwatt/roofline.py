"""Per-operation roofline latency model with empirical efficiency ceilings.

Each kernel-level operation is characterized by its floating-point work and
its device-memory traffic. Its latency lower bound is

    t = max(flops / f_eff, bytes / b_eff)

where the effective ceilings are the peak hardware numbers derated by
calibrated efficiency factors:

    f_eff = mu_comp * f_max        b_eff = mu_mem * b_max

The factors absorb occupancy, alignment, and overlap losses. Totals assume
no compute/memory overlap, so a sum over operations upper-bounds any
overlapped schedule of the same work. Kernel launch overhead is not modeled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigError
from . import kvconfig

# Calibrated efficiency factors for FP32 transformer inference on an
# H100 SXM; used when a profile file omits mu_comp / mu_mem.
DEFAULT_MU_COMP = 0.675
DEFAULT_MU_MEM = 0.443


class Phase(enum.Enum):
    """Inference phase, used to select the matching mean power draw."""

    PREFILL = "prefill"
    DECODE = "decode"


class Boundedness(enum.Enum):
    COMPUTE_BOUND = "compute_bound"
    MEMORY_BOUND = "memory_bound"
    BALANCED = "balanced"


@dataclass(frozen=True)
class HardwareProfile:
    """Compute/bandwidth ceilings, efficiency factors, and per-phase mean power.

    f_max is peak arithmetic throughput in FLOP/s, b_max peak memory bandwidth
    in bytes/s; p_prefill and p_decode are mean device power draws in watts
    observed during each phase.
    """

    f_max: float
    b_max: float
    mu_comp: float = DEFAULT_MU_COMP
    mu_mem: float = DEFAULT_MU_MEM
    p_prefill: float = 1.0
    p_decode: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not (self.f_max > 0 and self.b_max > 0):
            raise ValueError("f_max and b_max must be positive")
        if not (0 < self.mu_comp <= 1 and 0 < self.mu_mem <= 1):
            raise ValueError("efficiency factors must lie in (0, 1]")
        if not (self.p_prefill > 0 and self.p_decode > 0):
            raise ValueError("phase powers must be positive")

    def power(self, phase: Phase) -> float:
        return self.p_prefill if phase is Phase.PREFILL else self.p_decode


@dataclass(frozen=True)
class OpCost:
    """FLOP count and byte traffic of one kernel-level operation (or an
    aggregate of homogeneous ones)."""

    flops: float
    bytes: float
    label: str = ""

    def __post_init__(self):
        if self.flops < 0 or self.bytes < 0:
            raise ValueError("flops and bytes must be nonnegative")
        if self.flops == 0 and self.bytes == 0:
            raise ValueError("operation must move data or do work")


def effective_ceilings(hw: HardwareProfile) -> tuple[float, float]:
    """Derated (f_eff, b_eff) ceilings actually attainable on this device."""
    return hw.mu_comp * hw.f_max, hw.mu_mem * hw.b_max


def op_latency(cost: OpCost, hw: HardwareProfile) -> float:
    """Roofline latency of one operation: max of compute and memory time."""
    f_eff, b_eff = effective_ceilings(hw)
    return max(cost.flops / f_eff, cost.bytes / b_eff)


def boundedness(cost: OpCost, hw: HardwareProfile) -> Boundedness:
    """Classify which resource limits the operation.

    Uses exact comparison of the two resource times; ties are Balanced.
    """
    f_eff, b_eff = effective_ceilings(hw)
    compute_time = cost.flops / f_eff
    memory_time = cost.bytes / b_eff
    if compute_time > memory_time:
        return Boundedness.COMPUTE_BOUND
    if compute_time < memory_time:
        return Boundedness.MEMORY_BOUND
    return Boundedness.BALANCED


def total_latency(costs: Iterable[OpCost], hw: HardwareProfile) -> float:
    """Sum of per-operation roofline latencies (no-overlap assumption)."""
    return sum(op_latency(c, hw) for c in costs)


# Profile file keys match the HardwareProfile field names; mu_comp / mu_mem
# fall back to the calibrated defaults when omitted.

def profile_from_kv(kv: dict) -> HardwareProfile:
    known = {"name", "f_max", "b_max", "mu_comp", "mu_mem", "p_prefill", "p_decode"}
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"unknown hardware profile keys: {sorted(unknown)}")
    try:
        return HardwareProfile(
            f_max=kvconfig.get_float(kv, "f_max"),
            b_max=kvconfig.get_float(kv, "b_max"),
            mu_comp=kvconfig.get_float(kv, "mu_comp", DEFAULT_MU_COMP),
            mu_mem=kvconfig.get_float(kv, "mu_mem", DEFAULT_MU_MEM),
            p_prefill=kvconfig.get_float(kv, "p_prefill"),
            p_decode=kvconfig.get_float(kv, "p_decode"),
            name=kv.get("name", ""),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_profile(path) -> HardwareProfile:
    return profile_from_kv(kvconfig.read_kv_file(path))


def profile_to_kv(hw: HardwareProfile) -> list[tuple[str, str]]:
    return [
        ("name", hw.name),
        ("f_max", repr(hw.f_max)),
        ("b_max", repr(hw.b_max)),
        ("mu_comp", repr(hw.mu_comp)),
        ("mu_mem", repr(hw.mu_mem)),
        ("p_prefill", repr(hw.p_prefill)),
        ("p_decode", repr(hw.p_decode)),
    ]
