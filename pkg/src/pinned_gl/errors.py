"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can map it
to an exit status and a JSON payload.
"""

from __future__ import annotations


class PinnedGLError(Exception):
    code = "Error"
    exit_status = 2

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items()})
        return out


class ValidationError(PinnedGLError):
    """Bad input data; maps to exit status 2."""

    code = "ValidationError"


class ConvergenceError(PinnedGLError):
    """Numerical failure; maps to exit status 3."""

    code = "ConvergenceError"
    exit_status = 3


def _make(name: str, base: type) -> type:
    return type(name, (base,), {"code": name})


InvalidScene = _make("InvalidScene", ValidationError)
InvalidSingularities = _make("InvalidSingularities", ValidationError)
DeltaTooLarge = _make("DeltaTooLarge", ValidationError)
DegenerateEndpoints = _make("DegenerateEndpoints", ValidationError)
OutOfBox = _make("OutOfBox", ValidationError)
NonSquare = _make("NonSquare", ValidationError)
NegativeEntry = _make("NegativeEntry", ValidationError)
GapPositive = _make("GapPositive", ConvergenceError)
KTouchesSingularity = _make("KTouchesSingularity", ValidationError)
InfeasiblePotential = _make("InfeasiblePotential", ValidationError)
KernelWiderThanMargin = _make("KernelWiderThanMargin", ValidationError)
EtaBudgetInfeasible = _make("EtaBudgetInfeasible", ConvergenceError)
MOnAxis = _make("MOnAxis", ValidationError)
NoConvergence = _make("NoConvergence", ConvergenceError)
MeshTooCoarse = _make("MeshTooCoarse", ValidationError)
FitDegenerate = _make("FitDegenerate", ConvergenceError)
ShapeMismatch = _make("ShapeMismatch", ValidationError)
TraceNotUnimodular = _make("TraceNotUnimodular", ValidationError)
TubesOverlap = _make("TubesOverlap", ValidationError)
StripConditionFailed = _make("StripConditionFailed", ValidationError)
ProfileUnavailable = _make("ProfileUnavailable", ValidationError)
