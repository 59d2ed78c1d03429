"""Exception hierarchy shared by all solver tiers.

Every solver error names the violated invariant and, where it applies, the
field and the location of the offending extremum so that run reports can
point at the problem without re-running anything.
"""

from __future__ import annotations


class WkbflowError(Exception):
    """Base class for all package errors."""

    invariant = "unspecified"

    def __init__(self, message: str, *, field: str | None = None,
                 value: float | None = None, location=None):
        self.field = field
        self.value = value
        self.location = location
        parts = [message]
        if field is not None:
            parts.append(f"field={field}")
        if value is not None:
            parts.append(f"value={value:.6g}")
        if location is not None:
            parts.append(f"at={location}")
        super().__init__(" | ".join(parts))


class ConfigInvalid(WkbflowError):
    invariant = "config schema"


class NonPositiveDensity(WkbflowError):
    invariant = "density > rho_floor"


class MeanNotZero(WkbflowError):
    invariant = "zero theta-average"


class VanishingPhaseGradient(WkbflowError):
    invariant = "|grad S| > grad_S_floor"


class SingularLabelMap(WkbflowError):
    invariant = "label map gradient invertible"


class ResonantDenominator(WkbflowError):
    invariant = "c_s|grad S| - pbar.grad S/rhobar bounded away from zero"


class StepRejected(WkbflowError):
    invariant = "post-step state admissible"


class CausticWarning(StepRejected):
    invariant = "no caustic (|grad periodic(S)| < |winding gradient|)"
