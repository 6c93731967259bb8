"""Analysis options shared by the manifest loader, workflow and CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ManifestError

VALID_BASES = ("current", "voltage")
VALID_GRID_POLICIES = ("finest", "coarsest")


@dataclass(frozen=True)
class AnalysisOptions:
    """Knobs of the analysis pipeline.

    delta
        Distance to (-1, 0) below which an eigenlocus counts as critical.
    peak_prominence_db, phase_window
        Resonant-peak detection and phase-slope fit for the open-loop
        RHP-pole count on det(F).
    cond_limit
        Condition-number ceiling before network inversion warns.
    winding_tol
        Budget for winding-number rounding and the det(F) cross-check.
    merge_poles
        Report one score per station (sum of pole-impedance magnitudes)
        instead of separate positive/negative entries.
    """

    grid_policy: str = "finest"
    basis: str = "current"
    delta: float = 0.5
    peak_prominence_db: float = 6.0
    phase_window: int = 3
    cond_limit: float = 1e12
    winding_tol: float = 0.25
    merge_poles: bool = False

    def __post_init__(self):
        if self.basis not in VALID_BASES:
            raise ManifestError(f"basis must be one of {VALID_BASES}, got {self.basis!r}")
        if self.grid_policy not in VALID_GRID_POLICIES:
            raise ManifestError(
                f"grid_policy must be one of {VALID_GRID_POLICIES}, got {self.grid_policy!r}"
            )
        for name in ("delta", "peak_prominence_db", "cond_limit", "winding_tol"):
            if not getattr(self, name) > 0:
                raise ManifestError(f"option {name} must be positive")
        if self.phase_window < 1:
            raise ManifestError("phase_window must be at least 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "AnalysisOptions":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ManifestError(f"unknown option(s): {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)
