"""Physical parameter set shared by the spectral, renewal and spde modules."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError

__all__ = ["PhysParams"]


@dataclass(frozen=True)
class PhysParams:
    """Dissipation order, memory index, noise superlinearity and viscosity.

    Strict validation enforces ``1 < alpha < 3/2``, ``0 < beta < 1``,
    ``0 < gamma < 1/2`` and ``nu > 0``.  With ``relaxed=True`` the ranges widen
    to ``0 < alpha <= 2``, ``0 < beta <= 1`` and ``gamma >= 0`` so kernel
    studies (``alpha < 1``), the classical heat limit (``alpha = 2``,
    ``beta = 1``) and the ``gamma -> 0`` limit are reachable.
    """

    alpha: float
    beta: float
    gamma: float = 0.25
    nu: float = 1.0
    relaxed: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "nu"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite number, got {v!r}")
        if not self.nu > 0:
            raise DomainError(f"nu must be > 0, got {self.nu}")
        if self.relaxed:
            checks = [
                (0.0 < self.alpha <= 2.0, "alpha in (0, 2]"),
                (0.0 < self.beta <= 1.0, "beta in (0, 1]"),
                (self.gamma >= 0.0, "gamma >= 0"),
            ]
        else:
            checks = [
                (1.0 < self.alpha < 1.5, "alpha in (1, 3/2)"),
                (0.0 < self.beta < 1.0, "beta in (0, 1)"),
                (0.0 < self.gamma < 0.5, "gamma in (0, 1/2)"),
            ]
        for ok, msg in checks:
            if not ok:
                mode = "relaxed" if self.relaxed else "strict"
                hint = "" if self.relaxed else " (use relaxed validation to widen)"
                raise DomainError(
                    f"{mode} validation requires {msg}; got alpha={self.alpha}, "
                    f"beta={self.beta}, gamma={self.gamma}{hint}"
                )

    def as_dict(self) -> dict:
        return asdict(self)
