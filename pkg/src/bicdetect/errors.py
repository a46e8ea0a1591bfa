"""Exception hierarchy.

``ValidationError`` subclasses map to CLI exit code 1, ``DataError``
subclasses to exit code 2. Anything else escaping the CLI is exit code 3.
"""


class BicError(Exception):
    exit_code = 3


class ValidationError(BicError, ValueError):
    exit_code = 1


class DataError(BicError):
    exit_code = 2


# corpus
class DuplicateCommit(DataError):
    pass


class MissingColumn(DataError):
    pass


class UnparsableLabel(DataError):
    pass


class MissingTimestamp(DataError):
    pass


class CommitNotFound(DataError):
    pass


class RepoUnavailable(DataError):
    pass


class EmptySplit(DataError):
    pass


# syntax
class MalformedDiff(DataError):
    pass


class UnsupportedLanguage(DataError):
    pass


class MalformedXml(DataError):
    pass


class UnknownElement(DataError):
    pass


# featurize
class MissingMetric(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class EmptyVocabulary(DataError):
    pass


# select / learn
class EstimatorWithoutImportances(ValidationError):
    pass


class DegenerateLabels(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class ShapeMismatch(DataError):
    pass


# evaluate
class LengthMismatch(DataError):
    pass


class SingleClassAUC(DataError):
    pass


class AllZeroDifferences(DataError):
    pass


class ConstantSeries(DataError):
    pass


class UnpairedProjects(DataError):
    pass


class ConfigError(ValidationError):
    pass


class LowFidelity(UserWarning):
    """Surrogate agreement with the model fell under the configured floor."""
