"""Error types raised by the lab."""


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""


class InvalidHmm(LabError):
    """An HMM violates one of its invariants."""

    def __init__(self, result):
        self.result = result
        super().__init__(str(result))


class DataFormatError(LabError):
    """Malformed fixation CSV or JSON input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EstimationFailure(LabError):
    """VB estimation could not produce a model (degenerate data, non-finite bound)."""


class DistortionInfeasible(LabError):
    """A distortion parameter cannot be reached for the given HMM."""


class NonMonotoneCurve(LabError):
    """A calibration curve is not monotone, so it cannot be inverted."""

    def __init__(self, message, cells):
        self.cells = list(cells)
        super().__init__(f"{message}: {self.cells}")


class OutOfRange(LabError):
    """An observed metric lies outside a calibration curve's range."""

    def __init__(self, value, low, high):
        self.value = value
        self.low = low
        self.high = high
        side = 'below' if value < low else 'above'
        self.side = side
        super().__init__(f"{value:.6g} is {side} the calibrated range [{low:.6g}, {high:.6g}]")


class DegenerateData(EstimationFailure):
    """The pooled fixations have a singular covariance (e.g. all identical)."""
