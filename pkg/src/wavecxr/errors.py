"""Exception hierarchy shared by every subpackage."""


class WaveCXRError(Exception):
    """Base class for all errors raised by wavecxr."""


# wavelet core
class OddLengthError(WaveCXRError, ValueError):
    def __init__(self, n):
        super().__init__(f"signal length {n} is odd; single-level analysis needs an even length")
        self.n = n


class SignalTooShortError(WaveCXRError, ValueError):
    def __init__(self, n):
        super().__init__(f"signal length {n} is too short; need at least 2 samples")
        self.n = n


class LengthMismatchError(WaveCXRError, ValueError):
    pass


class OddDimensionError(WaveCXRError, ValueError):
    def __init__(self, h, w):
        super().__init__(f"image dimensions {h}x{w} must both be even and >= 2")
        self.h, self.w = h, w


class DimensionMismatchError(WaveCXRError, ValueError):
    pass


class DepthTooDeepError(WaveCXRError, ValueError):
    def __init__(self, depth, h, w):
        super().__init__(f"depth {depth} needs both of {h}x{w} divisible by {2 ** depth}")
        self.depth, self.h, self.w = depth, h, w


class InvalidFilterError(WaveCXRError, ValueError):
    pass


# image pipeline
class UnsupportedFormatError(WaveCXRError, ValueError):
    pass


class CorruptImageError(WaveCXRError, ValueError):
    pass


class ZeroDimensionError(WaveCXRError, ValueError):
    pass


class InvalidParamsError(WaveCXRError, ValueError):
    pass


# dataset
class UnknownLabelError(WaveCXRError, ValueError):
    def __init__(self, token, line_no=None):
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"unknown label {token!r}{where}")
        self.token, self.line_no = token, line_no


class MissingColumnError(WaveCXRError, ValueError):
    def __init__(self, name):
        super().__init__(f"manifest is missing required column {name!r}")
        self.name = name


class MalformedRowError(WaveCXRError, ValueError):
    def __init__(self, line_no, reason="wrong number of fields"):
        super().__init__(f"malformed manifest row at line {line_no}: {reason}")
        self.line_no = line_no


class BadRatiosError(WaveCXRError, ValueError):
    pass


class TooFewEntriesError(WaveCXRError, ValueError):
    pass


# model
class ShapeChainMismatchError(WaveCXRError, ValueError):
    def __init__(self, index, reason):
        super().__init__(f"layer {index}: {reason}")
        self.index = index


class InputShapeMismatchError(WaveCXRError, ValueError):
    pass


class ShapeMismatchError(WaveCXRError, ValueError):
    pass


class FreezeAllError(WaveCXRError, ValueError):
    def __init__(self, k, n_layers):
        super().__init__(f"cannot freeze {k} of {n_layers} layers; the head must stay trainable")
        self.k, self.n_layers = k, n_layers


class EmptySplitError(WaveCXRError, ValueError):
    pass


class CheckpointError(WaveCXRError, ValueError):
    pass


# metrics
class DegenerateLabelsError(WaveCXRError, ValueError):
    pass


class SplitMismatchError(WaveCXRError, ValueError):
    pass


class ConfigError(WaveCXRError, ValueError):
    pass
