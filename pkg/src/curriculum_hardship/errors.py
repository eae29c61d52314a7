"""Exception hierarchy. Each carries a ``category`` used for CLI exit codes."""


class HardshipError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(HardshipError):
    category = "config"
    exit_code = 2


class SchemaError(HardshipError):
    category = "schema"
    exit_code = 3


class IngestError(HardshipError):
    category = "ingest"
    exit_code = 3


class StageOrderError(HardshipError):
    category = "stage_order"
    exit_code = 4


class StandardizationError(HardshipError):
    category = "standardization"
    exit_code = 5


class UndefinedMetricError(HardshipError):
    category = "metric"
    exit_code = 5


class AssociationError(HardshipError):
    category = "association"
    exit_code = 5


class SimulationConfigError(ConfigError):
    pass
