from enum import Enum


class CenterModeEnum(Enum):
    MEAN = "mean"
    TIME0 = "time0"
    NONE = "none"


class ExportFormatEnum(Enum):
    CSV = "csv"
    JSON = "json"
    DOT = "dot"


class DefinitenessEnum(Enum):
    POSITIVE_DEFINITE = "positive_definite"
    POSITIVE_SEMIDEFINITE = "positive_semidefinite"
    INDEFINITE = "indefinite"


class ModelKindEnum(Enum):
    GGIM = "ggim"
    GGIM_BOUNDED = "ggim-bounded"
    GGCEM = "ggcem"
    GGCEM_EXTENDED = "ggcem-ext"
    SEMIDEF = "semidef"
