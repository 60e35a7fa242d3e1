"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: DataError -> 1, ConfigError -> 2,
DivergenceError -> 3.
"""


class FrdlError(Exception):
    pass


class DataError(FrdlError):
    """Bad or unreadable input data."""


class ConfigError(FrdlError, ValueError):
    """Invalid parameter or configuration value."""


class DivergenceError(FrdlError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss={loss})")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class StructureError(FrdlError, ValueError):
    """Shape mismatch between a network config and its inputs or params."""


class CheckpointError(FrdlError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError, StructureError):
    pass
