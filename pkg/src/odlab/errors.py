"""Exception hierarchy shared by all odlab modules."""


class OdlabError(Exception):
    pass


class GridError(OdlabError, ValueError):
    """Input does not conform to its grid or is below the resolved scale."""


class DomainError(GridError):
    """A probe ball is not contained in the computational domain."""


class ParameterError(OdlabError, ValueError):
    pass


class PreconditionError(OdlabError, ValueError):
    pass


class DegenerateProbeError(OdlabError, ValueError):
    """The probe has nothing to measure (no curve in the ball, zero field...)."""


class FormatError(OdlabError, ValueError):
    pass


class SolverError(OdlabError, RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SearchError(OdlabError, RuntimeError):
    """A root or extremum search found nothing in its bracket."""


class ClaimViolation(OdlabError):
    """A computed quantity contradicts a bound the model is known to satisfy."""
