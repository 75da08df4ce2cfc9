"""Exception hierarchy shared by every module."""


class SpecDemandError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class DegenerateBBox(SpecDemandError):
    pass


class CellOutOfBounds(SpecDemandError):
    pass


class OutOfValidityRange(SpecDemandError):
    pass


class ParseError(SpecDemandError):
    def __init__(self, line, column, reason, path=None):
        self.line = line
        self.column = column
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}line {line}, column {column!r}: {reason}")


class ValidationError(SpecDemandError):
    """Raised after a full scan; ``problems`` lists every offending row."""

    def __init__(self, problems, path=None):
        self.problems = list(problems)
        self.path = path
        head = f"{path}: " if path else ""
        body = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems)
        super().__init__(f"{head}{len(self.problems)} invalid row(s): {body}")


class UnsupportedGeometry(SpecDemandError):
    pass


class GeometryError(SpecDemandError):
    pass


class MissingFootprint(SpecDemandError):
    def __init__(self, site_id):
        self.site_id = site_id
        super().__init__(f"no coverage footprint for site {site_id!r}")


class NoOverlap(SpecDemandError):
    pass


class GridMismatch(SpecDemandError):
    pass


class DegenerateVariance(SpecDemandError):
    pass


class EmptyTable(SpecDemandError):
    pass


class DuplicateColumn(SpecDemandError):
    pass


class TooFewRows(SpecDemandError):
    pass


class TooFewFeatures(SpecDemandError):
    pass


class SingularSystem(SpecDemandError):
    pass


class UnknownFeature(SpecDemandError):
    pass


class SchemaMismatch(SpecDemandError):
    pass


class ConfigError(SpecDemandError):
    pass


class MissingStage(SpecDemandError):
    def __init__(self, stage, missing):
        self.stage = stage
        self.missing = missing
        super().__init__(f"missing {missing}; run the '{stage}' subcommand first")


class InvalidInput(SpecDemandError, ValueError):
    """A value outside its documented domain (coordinates, sizes, parameters)."""
