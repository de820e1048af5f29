"""Exception hierarchy shared by the planner modules."""


class FibrePlanError(Exception):
    """Base class for all planner errors."""


class MapParseError(FibrePlanError):
    """A map, rules or solution document does not follow its schema."""


class MapIntegrityError(FibrePlanError):
    """A document parses but references are inconsistent (ids, root count)."""


class UnusableMapError(FibrePlanError):
    """The OLT root cannot reach any equipment candidate."""


class ConfigurationError(FibrePlanError):
    """Business rules or GA parameters are out of range."""


class InfeasibilityError(FibrePlanError):
    """A route or branch that must exist does not."""


class GenerationError(FibrePlanError):
    """A synthetic instance specification cannot be realised."""


class InstanceTooLargeError(FibrePlanError):
    """The exhaustive oracle was asked to solve an instance beyond its size gate."""
