"""Exception types shared across the toolkit.

All exceptions take a single message argument so callers can re-raise them
with added context without knowing the concrete type.
"""


class FlowNavError(Exception):
    """Base class for all flownav errors."""


class LabelClassificationError(FlowNavError):
    """A semantic label id is not covered by the label mapping."""


class ConfigurationError(FlowNavError):
    """A configuration value is out of range or an unknown key was given."""


class TargetNotFoundError(FlowNavError):
    """The requested target instance does not exist in the map."""


class UnreachableGoalError(FlowNavError):
    """No valid goal source pixel could be derived for the target."""


class UnreachableSceneError(FlowNavError):
    """No free pixel can reach the goal sources."""


class UnreachableStartError(FlowNavError):
    """No start pixel satisfies the sampling constraints, or a given start
    cannot reach the goal."""


class SceneGenerationError(FlowNavError):
    """Procedural scene generation could not satisfy a placement constraint."""


class FieldFormatError(FlowNavError):
    """A serialized field or scene file is malformed."""


class InternalConsistencyError(FlowNavError):
    """An internal invariant was violated (indicates a bug, not bad input)."""
