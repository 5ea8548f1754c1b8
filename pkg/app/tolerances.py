"""Named tolerance profiles. BVP_TOLERANCE_PROFILE picks the default one."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace
from typing import Any

from app.errors import DomainError

ENV_PROFILE = "BVP_TOLERANCE_PROFILE"


@dataclass(frozen=True)
class Tolerances:
    """Every numerical knob the pipeline exposes."""

    rtol: float = 1e-10
    atol: float = 1e-12
    quad_tol: float = 1e-10
    rank_tol: float = 1e-10
    # Singular values below this are noise from integration and quadrature,
    # whatever the scale of M.
    rank_atol: float = 1e-8
    consistency_tol: float = 1e-7
    gl_nodes: int = 32
    max_panels: int = 64

    def __post_init__(self) -> None:
        for name in ("rtol", "atol", "quad_tol", "rank_tol", "consistency_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.rank_atol < 0:
            raise DomainError(f"rank_atol must be non-negative, got {self.rank_atol!r}")
        if self.gl_nodes < 2 or self.max_panels < 1:
            raise DomainError("gl_nodes must be >= 2 and max_panels >= 1")

    def updated(self, **overrides: Any) -> "Tolerances":
        """Copy with the given fields replaced; None values are ignored."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


PROFILES: dict[str, Tolerances] = {
    "default": Tolerances(),
    "strict": Tolerances(rtol=1e-12, atol=1e-14, quad_tol=1e-12, rank_tol=1e-12, rank_atol=1e-10),
    "loose": Tolerances(rtol=1e-7, atol=1e-9, quad_tol=1e-8, rank_tol=1e-8, rank_atol=1e-6,
                        consistency_tol=1e-5, gl_nodes=16, max_panels=32),
}

DEFAULT = PROFILES["default"]


def get_profile(name: str | None = None) -> Tolerances:
    """Return the named profile (None means "default")."""
    if name is None:
        return DEFAULT
    try:
        return PROFILES[name]
    except KeyError:
        raise DomainError(
            f"Unknown tolerance profile {name!r}; choose one of {sorted(PROFILES)}"
        ) from None


def tolerances_from_env() -> Tolerances:
    """Profile named by BVP_TOLERANCE_PROFILE, or the default one when unset."""
    return get_profile(os.environ.get(ENV_PROFILE) or None)


def resolve(tolerances: Tolerances | None) -> Tolerances:
    return tolerances if tolerances is not None else tolerances_from_env()
