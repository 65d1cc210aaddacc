"""
Dataclasses for family parameters, stage results and classification records.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import DistributionError


@dataclass(frozen=True)
class RelaxationParams:
    """Bounds eps1 * product <= correlated source distribution <= eps2 * product."""

    eps1: Fraction = Fraction(1)
    eps2: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "eps1", Fraction(self.eps1))
        object.__setattr__(self, "eps2", Fraction(self.eps2))
        if not 0 < self.eps1 <= 1:
            raise ValueError(f"eps1 must lie in (0, 1], got {self.eps1}")
        if self.eps2 < 1:
            raise ValueError(f"eps2 must be at least 1, got {self.eps2}")


@dataclass(frozen=True)
class GhzFamilyPoint:
    x: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x))
        if not 0 < self.x < 1:
            raise DistributionError(f"GHZ weight must lie in (0, 1), got {self.x}")


@dataclass(frozen=True)
class WFamilyPoint:
    mu: Fraction
    nu: Fraction
    v: Fraction = Fraction(1)  # visibility

    def __post_init__(self):
        for name in ("mu", "nu", "v"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if not (self.mu > 0 and self.nu > 0 and self.mu + self.nu < 1):
            raise DistributionError(f"(mu, nu) = ({self.mu}, {self.nu}) is outside the open simplex")
        if not 0 <= self.v <= 1:
            raise DistributionError(f"visibility must lie in [0, 1], got {self.v}")


@dataclass
class StageResult:
    stage: str
    verdict: str  # "pass", "fail", "local", "no-model", "consistent", "contradiction", "not-local", "budget", "error"
    witness: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class ClassificationRecord:
    scenario: str
    canonical: str  # bitstring of the orbit representative
    literal: str
    orbit_size: int
    stages: list[StageResult] = field(default_factory=list)
    label: str = "unknown"


@dataclass
class PipelineConfig:
    scenario: str
    stages: tuple[str, ...]
    jobs: int = 1
    out_dir: Optional[str] = None
    resume: bool = False
    max_conflicts: Optional[int] = None
    time_limit: Optional[float] = None
    node_budget: Optional[int] = None
    symmetric_only: bool = False
