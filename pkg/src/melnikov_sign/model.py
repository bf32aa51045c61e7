"""Parameters of x'' + alpha*sign(x) = eta*x + eps*f(t, x, x') and case bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import NoPeriodAnnulus


@dataclass(frozen=True)
class Parameters:
    alpha: float
    eta: float
    sigma: float
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "eta", "sigma", "epsilon"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


class Case(str, Enum):
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"
    C6 = "C6"
    C7 = "C7"
    C8 = "C8"
    C9 = "C9"

    @property
    def index(self) -> int:
        return int(self.value[1:])


DESCRIPTIONS = {
    Case.C1: "invisible fold-fold center at origin; saddles at (±{p}, 0)",
    Case.C2: "smooth linear saddle at origin",
    Case.C3: "visible fold-fold at origin (only singularity)",
    Case.C4: "invisible fold-fold center at origin",
    Case.C5: "line y=0 of critical points",
    Case.C6: "visible fold-fold at origin (only singularity)",
    Case.C7: "invisible fold-fold center at origin",
    Case.C8: "smooth linear center at origin (not treated)",
    Case.C9: "visible fold-fold at origin; linear centers at p± = (±{p}, 0)",
}


@dataclass(frozen=True)
class CaseClass:
    tag: Case
    alpha: float
    eta: float
    omega: float | None = None

    @property
    def index(self) -> int:
        return self.tag.index

    def describe(self) -> str:
        text = DESCRIPTIONS[self.tag]
        if "{p}" in text:
            text = text.format(p=f"{abs(self.alpha / self.eta):g}")
        return f"{self.tag.value}: {text}"


@dataclass(frozen=True)
class AnnulusInfo:
    case_index: int
    domain_D: tuple[float, float]
    image_I: tuple[float, float]
    tau0_monotone_sign: int


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float


@dataclass(frozen=True)
class SectionPoint:
    theta0: float
    y0: float

    def __post_init__(self):
        if not self.y0 > 0:
            raise ValueError("section points need y0 > 0")


def _sign(v: float) -> int:
    return (v > 0.0) - (v < 0.0)


# (sign(eta), sign(alpha)) -> case
_TABLE = {
    (1, 1): Case.C1, (1, 0): Case.C2, (1, -1): Case.C3,
    (0, 1): Case.C4, (0, 0): Case.C5, (0, -1): Case.C6,
    (-1, 1): Case.C7, (-1, 0): Case.C8, (-1, -1): Case.C9,
}


def classify(alpha: float, eta: float) -> CaseClass:
    """Case C1..C9 of the unperturbed portrait, by exact signs of eta and alpha."""
    tag = _TABLE[(_sign(eta), _sign(alpha))]
    omega = math.sqrt(-eta) if eta < 0.0 else None
    return CaseClass(tag, float(alpha), float(eta), omega)


def annulus_info(case: CaseClass) -> AnnulusInfo:
    """Domain and image of the half-period function for annulus cases 1, 4, 7, 9.

    C8 has a period annulus but a constant half period, so it is rejected too.
    """
    tag = case.tag
    inf = math.inf
    if tag is Case.C1:
        return AnnulusInfo(1, (0.0, case.alpha / math.sqrt(case.eta)), (0.0, inf), 1)
    if tag is Case.C4:
        return AnnulusInfo(4, (0.0, inf), (0.0, inf), 1)
    if tag is Case.C7:
        return AnnulusInfo(7, (0.0, inf), (0.0, math.pi / case.omega), 1)
    if tag is Case.C9:
        return AnnulusInfo(9, (0.0, inf), (math.pi / case.omega, 2.0 * math.pi / case.omega), -1)
    raise NoPeriodAnnulus(f"{tag.value} has no period annulus usable here (need C1, C4, C7 or C9)")


def inside(value: float, interval: tuple[float, float]) -> bool:
    lo, hi = interval
    return lo < value < hi


def sigma_admissible(params: Parameters) -> bool:
    """True iff sigma/2 lies strictly inside the image of tau0."""
    info = annulus_info(classify(params.alpha, params.eta))
    return inside(params.sigma / 2.0, info.image_I)
