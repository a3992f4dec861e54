"""Exception hierarchy shared by every module of the package."""


class BRGMError(Exception):
    """Base class for all errors raised by brgm."""


class ShapeMismatch(BRGMError, ValueError):
    pass


class NonFiniteValue(BRGMError, FloatingPointError):
    pass


class NotScalarOutput(BRGMError, ValueError):
    pass


class LeafNotOnTape(BRGMError, ValueError):
    pass


class DegenerateSampler(BRGMError, ValueError):
    pass


class InsufficientImages(BRGMError, ValueError):
    pass


class BadMagic(BRGMError, ValueError):
    pass


class VersionUnsupported(BRGMError, ValueError):
    pass


class TruncatedFile(BRGMError, ValueError):
    pass


class EmptyOutput(BRGMError, ValueError):
    pass


class BadParameter(BRGMError, ValueError):
    pass


class BadImage(BRGMError, ValueError):
    pass


class BadHeader(BadImage):
    pass


class UnsupportedMaxval(BadImage):
    pass


class ZeroNormLatent(BRGMError, ValueError):
    pass


class NonFiniteGradient(NonFiniteValue):
    pass


class DivergedLoss(BRGMError, ArithmeticError):
    pass


class NonPositiveArgument(BRGMError, ValueError):
    pass


class ImageTooSmall(BRGMError, ValueError):
    pass


class ConfigError(BRGMError, ValueError):
    pass
