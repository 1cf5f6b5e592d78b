"""Exception types shared across the package."""


class GghlError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateBox(GghlError):
    """Box has (near-)zero area or collapsed semi-axes."""


class NonConvex(GghlError):
    """Vertices do not form a convex quadrilateral."""


class InvalidDistances(GghlError):
    """Edge-distance vector describes a box with non-positive extent."""


class CellOutsideBox(GghlError):
    """Grid cell center lies outside the circumscribed box."""


class InvalidCode(GghlError):
    """Box code component outside its valid range."""


class InvalidAnnotation(GghlError):
    """Ground-truth annotation fails validation."""


class SideOutOfRange(GghlError):
    """Object side length outside the scale-routing ranges."""


class ShapeMismatch(GghlError):
    """Label and prediction tensors disagree in shape."""


class NonFiniteLoss(GghlError):
    """A loss term evaluated to NaN or infinity."""


class ParseError(GghlError):
    """Malformed annotation line."""

    def __init__(self, message, line_no=None):
        super().__init__(message)
        self.line_no = line_no


class UnknownClass(GghlError):
    """Class name missing from the class list."""


class BadMagic(GghlError):
    """Tensor file does not start with the expected magic bytes."""


class VersionMismatch(GghlError):
    """Tensor file version is not supported."""


class TruncatedPayload(GghlError):
    """Tensor file payload shorter than the header implies."""
