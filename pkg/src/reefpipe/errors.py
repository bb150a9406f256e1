"""Exception hierarchy for pipeline failures."""


class ReefPipeError(Exception):
    """Base for all pipeline errors."""


class SourceError(ReefPipeError):
    """Frame source cannot be opened at all (missing directory, bad spec)."""


class StorageError(ReefPipeError):
    """Archive write failed; data collection is the mission, so fatal."""


class DetectorError(ReefPipeError):
    """Detection backend failed for a batch; carries the affected frames."""

    def __init__(self, message: str, frame_ids: list | None = None):
        super().__init__(message)
        self.frame_ids = frame_ids or []


class ProtocolError(DetectorError):
    """External backend sent a malformed or misaligned response."""


class DeadlineError(DetectorError):
    """External backend missed its response deadline."""


class BackendUnavailableError(DetectorError):
    """Backend process or socket is gone; the pipeline cannot continue detecting."""


class OrderingError(ReefPipeError):
    """Tracker was handed frames out of order."""


class EvaluationError(ReefPipeError):
    """Evaluation input was inconsistent with the truth corpus."""


class ExportError(ReefPipeError):
    """Archive export failed; partial output has been removed."""
