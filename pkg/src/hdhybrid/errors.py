"""Exception hierarchy shared by all pipeline stages."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class DataError(PipelineError):
    """Problems with input data files or their contents."""


class MalformedCsvError(DataError):
    pass


class MissingKeyColumnError(DataError):
    pass


class EmptyIntersectionError(DataError):
    pass


class MissingLabelColumnError(DataError):
    pass


class NoValidRowsError(DataError):
    pass


class AllColumnsDroppedError(DataError):
    pass


class SchemaMismatchError(DataError):
    pass


class TrainError(PipelineError):
    """Problems during model fitting."""


class SingleClassError(TrainError):
    pass


class NonFiniteInputError(TrainError):
    pass


class NonFiniteLossError(TrainError):
    pass


class DimensionMismatchError(PipelineError):
    pass


class LengthMismatchError(PipelineError):
    pass


class KTooLargeError(PipelineError):
    pass


class ClassTooSmallError(PipelineError):
    pass


class ConfigError(PipelineError):
    pass


class InvalidSpecError(ConfigError):
    pass
