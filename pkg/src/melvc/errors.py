"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """A configuration file is missing, unreadable, or has bad values."""


class ShapeError(ValueError):
    """Matrix arguments have incompatible shapes."""


class InputTooShort(ValueError):
    """Signal is shorter than one analysis window."""


class UnknownPhoneme(ValueError):
    """Utterance spec references a phoneme missing from the inventory."""


class UnknownSpeaker(KeyError):
    """Decoder asked for a speaker with no bias entry."""


class NoTranscribedData(ValueError):
    """Training manifest contains no transcribed utterances."""


class NoAdaptationData(ValueError):
    """Adaptation called with an empty utterance list."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite.

    Carries the step at which divergence was detected and the last
    parameter state with a finite loss.
    """

    def __init__(self, step, last_good_params=None):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.last_good_params = last_good_params


class IncompatibleCheckpoint(RuntimeError):
    """Checkpoint was written by an incompatible format version."""


class CorruptCheckpoint(RuntimeError):
    """Checkpoint file is truncated or fails its integrity check."""


class DegenerateLabels(ValueError):
    """Speaker probe needs at least two distinct labels."""


class MissingCheckpoint(FileNotFoundError):
    """A scenario requires a checkpoint that was not supplied."""


class InvalidScenario(ValueError):
    """Scenario id and language fields disagree, or required data is absent."""


class NotAdaptedWarning(UserWarning):
    """Conversion invoked on a checkpoint that still carries speaker biases."""
