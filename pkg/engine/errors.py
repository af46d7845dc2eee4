"""Domain errors raised by the selection engine."""


class ScenePickError(Exception):
    """Base class for every domain error of the toolkit."""


class InvalidTimelineError(ScenePickError, ValueError):
    pass


class DimensionError(ScenePickError, ValueError):
    pass


class InsufficientFramesError(ScenePickError, ValueError):
    pass


class InsufficientDataError(ScenePickError, ValueError):
    pass


class InvalidBudgetError(ScenePickError, ValueError):
    pass


class OverBudgetError(ScenePickError, ValueError):
    pass


class NoClipsError(ScenePickError, ValueError):
    pass


class InsufficientCandidatesError(ScenePickError, ValueError):
    pass


class EmptyEvidenceError(ScenePickError, ValueError):
    pass


class InvalidParameterError(ScenePickError, ValueError):
    pass
