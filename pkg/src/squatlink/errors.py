"""Exception types shared across the package.

Every exception carries a short machine-readable ``code`` so the HTTP
control plane can map failures without string matching.
"""


class SquatLinkError(Exception):
    """Base class for all squatlink errors."""

    code = "error"


class InputError(SquatLinkError, ValueError):
    """A value is outside its documented domain (non-finite, out of range)."""

    code = "input_error"


class DegenerateOrientationError(InputError):
    """Accelerometer reading cannot resolve a sagittal tilt (ax = az = 0)."""

    code = "degenerate_orientation"


class TimingError(InputError):
    """Non-positive or non-finite time step."""

    code = "timing_error"


class InsufficientDataError(SquatLinkError):
    """Not enough samples for the requested computation."""

    code = "insufficient_data"


class ConfigurationError(SquatLinkError, ValueError):
    """Invalid parameter combination."""

    code = "configuration_error"


class StateError(SquatLinkError, RuntimeError):
    """Operation not legal in the current lifecycle state."""

    code = "state_error"


class FramingError(SquatLinkError, ValueError):
    """Byte buffer does not have the expected wire length."""

    code = "framing_error"


class ConformanceError(SquatLinkError, ValueError):
    """Refusing to encode a packet that violates the wire contract."""

    code = "conformance_error"


class ExportError(SquatLinkError, RuntimeError):
    """Session export failed or was refused."""

    code = "export_error"


class TransportClosedError(SquatLinkError, RuntimeError):
    """Datagram transport was closed while still in use."""

    code = "transport_closed"
