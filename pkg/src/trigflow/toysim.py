"""Desk-scale stand-in for a reacting-flow solver.

Each rank owns a small block of cells. All fields are low-amplitude noise
around fixed baselines, regenerated every step from ``(seed, t, rank)``.
On ``ignition_rank`` a Gaussian kernel centred in the block grows as
``exp(hr_growth * (t - ignition_step))`` up to the ignition step and
burns out quickly afterwards. The kernel drives heat release above the
1e-3 candidate threshold from ``onset_step`` on, and perturbs temperature
and the four mass fractions enough to move their moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .values import FieldV

FIELDS = ("HeatRelease", "temperature", "Y1", "Y2", "Y3", "Y4")
HR_THRESHOLD = 1e-3

# baseline value, noise scale and kernel coefficient per field
_PROFILE = {
    "temperature": (1.0, 0.01, 0.12),
    "Y1": (0.20, 0.002, -0.02),
    "Y2": (0.10, 0.001, 0.012),
    "Y3": (0.05, 0.001, 0.005),
    "Y4": (0.65, 0.002, 0.0025),
}


@dataclass(frozen=True)
class ToyIgnitionConfig:
    grid_per_rank: tuple[int, int, int] = (16, 16, 16)
    ranks: int = 4
    steps: int = 220
    ignition_rank: int = 1
    ignition_step: int = 210
    baseline_hr: float = 1e-5
    hr_peak: float = 0.05
    hr_growth: float = 0.55
    burnout_rate: float = 1.5
    kernel_width: float = 2.0
    noise_seed: int = 2024

    def validate(self) -> None:
        if len(self.grid_per_rank) != 3 or min(self.grid_per_rank) < 2:
            raise ConfigError(f"grid_per_rank must be 3 sizes >= 2, got {self.grid_per_rank}")
        if self.ranks < 1:
            raise ConfigError("ranks must be >= 1")
        if not 0 <= self.ignition_rank < self.ranks:
            raise ConfigError(f"ignition_rank {self.ignition_rank} outside 0..{self.ranks - 1}")
        if not 0 <= self.ignition_step < self.steps:
            raise ConfigError(f"ignition_step {self.ignition_step} outside 0..{self.steps - 1}")
        if self.hr_growth <= 0 or self.burnout_rate <= 0 or self.hr_peak <= HR_THRESHOLD:
            raise ConfigError("hr_growth and burnout_rate must be positive and hr_peak above the threshold")

    @property
    def onset_step(self) -> int:
        """First step at which the kernel's heat release exceeds the threshold."""
        lead = math.log(self.hr_peak / HR_THRESHOLD) / self.hr_growth
        return self.ignition_step - math.floor(lead - 1e-12)

    def kernel_amplitude(self, t: int) -> float:
        """Kernel strength relative to its peak at the ignition step."""
        dt = t - self.ignition_step
        if dt <= 0:
            return math.exp(self.hr_growth * dt)
        return math.exp(-self.burnout_rate * dt)


@lru_cache(maxsize=8)
def _kernel_shape(dims: tuple[int, int, int], width: float) -> np.ndarray:
    axes = [np.arange(n) - n // 2 for n in dims]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    shape = np.exp(-(x * x + y * y + z * z) / (2.0 * width * width))
    shape.setflags(write=False)
    return shape


def toy_sim_step(config: ToyIgnitionConfig, t: int, rank: int) -> dict[str, FieldV]:
    """All fields of one rank at step ``t``; deterministic in (seed, t, rank)."""
    config.validate()
    if not 0 <= t < config.steps:
        raise ConfigError(f"step {t} outside 0..{config.steps - 1}")
    if not 0 <= rank < config.ranks:
        raise ConfigError(f"rank {rank} outside 0..{config.ranks - 1}")
    dims = tuple(config.grid_per_rank)
    rng = np.random.default_rng([config.noise_seed, t, rank])
    noise = rng.standard_normal((len(FIELDS), *dims))
    kernel = None
    if rank == config.ignition_rank:
        kernel = config.kernel_amplitude(t) * _kernel_shape(dims, config.kernel_width)

    hr = config.baseline_hr * (1.0 + 0.25 * np.abs(noise[0]))
    if kernel is not None:
        hr = hr + config.hr_peak * kernel
    out = {"HeatRelease": FieldV(dims, hr)}
    for k, name in enumerate(FIELDS[1:], start=1):
        base, scale, coeff = _PROFILE[name]
        f = base + scale * noise[k]
        if kernel is not None:
            f = f + coeff * kernel
        out[name] = FieldV(dims, f)
    return out


def workload(config: ToyIgnitionConfig):
    """Adapter for the rank simulator: ``(t, rank) -> fields``."""
    config.validate()
    return lambda t, rank: toy_sim_step(config, t, rank)
