"""Exception hierarchy shared by every module."""


class CTVError(Exception):
    """Base class for all user-facing errors."""


class IngestError(CTVError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class MalformedRow(IngestError):
    pass


class UnknownToken(IngestError):
    pass


class BadTimestamp(IngestError):
    pass


class InvariantViolation(IngestError):
    pass


class DuplicateUser(CTVError):
    pass


class UnknownPreset(CTVError):
    pass


class UnknownDimensionLetter(CTVError):
    pass


class UnknownUser(CTVError):
    pass


class EmptyInput(CTVError):
    pass


class DegenerateTable(CTVError):
    pass


class NoDisagreement(CTVError):
    pass


class NonFiniteLoss(CTVError):
    pass


class EmptyTraining(CTVError):
    pass


class WidthMismatch(CTVError):
    pass


class TooFewEvents(CTVError):
    pass


class EmptyGrid(CTVError):
    pass


class IdMismatch(CTVError):
    pass


class InvalidSpec(CTVError):
    pass


class MissingArtifacts(CTVError):
    pass
