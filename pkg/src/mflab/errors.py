"""Error types with machine-readable kinds.

Every failure mode the library raises deliberately carries a short
``kind`` string so batch drivers can report it without parsing messages.
"""


class LabError(Exception):
    kind = "error"


class InvalidResolution(LabError):
    kind = "invalid-resolution"


class InvalidMetric(LabError):
    kind = "invalid-metric"


class IncompatibleField(LabError):
    kind = "incompatible-field"


class DegenerateMass(LabError):
    kind = "degenerate-mass"


class InvalidParameter(LabError):
    kind = "invalid-parameter"


class UnsupportedMetric(LabError):
    kind = "unsupported-metric"


class InsufficientSamples(LabError):
    kind = "insufficient-samples"


class InvalidDomain(LabError):
    kind = "invalid-domain"


class EmptyAdmissibleSet(LabError):
    kind = "empty-admissible-set"


class InvalidBubble(LabError):
    kind = "invalid-bubble"


class InvalidFieldFile(LabError):
    kind = "invalid-field-file"


class InvalidConfig(LabError):
    kind = "invalid-config"
