"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command-line layer
never has to pattern-match on message text.
"""

from __future__ import annotations


class BranchPathError(Exception):
    exit_code = 1


class ConfigError(BranchPathError, ValueError):
    exit_code = 2


class InputError(BranchPathError, ValueError):
    exit_code = 3


class BudgetError(BranchPathError, RuntimeError):
    exit_code = 4


class InfeasibleError(BranchPathError, ValueError):
    exit_code = 5


# -- complex construction -----------------------------------------------------

class MalformedDescription(InputError):
    pass


class DanglingFace(InputError):
    pass


class WeightBelowBound(InputError):
    pass


class UnknownSimplex(InputError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class RefinementUnsupported(InputError):
    pass


# -- counting / enumeration ---------------------------------------------------

class BudgetExceeded(BudgetError):
    pass


class PathExplosion(BudgetError):
    pass


class ZeroMicrostates(InfeasibleError):
    pass


class InvalidEndpoints(InputError):
    pass


# -- numerics -----------------------------------------------------------------

class DimensionMismatch(ConfigError):
    pass


class DegenerateEnsemble(ConfigError):
    pass


class BadModelKind(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class BadInitialState(ConfigError):
    pass


class NonOrthogonalDecomposition(ConfigError):
    pass


class UnnormalizedState(ConfigError):
    pass


class DegenerateProbability(ConfigError):
    pass
