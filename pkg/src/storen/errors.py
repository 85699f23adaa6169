"""Error vocabulary shared across the package.

UsageError covers bad arguments and malformed inputs, CapacityError marks
exhaustive operations asked to run past their documented size guards, and
ProtocolError is reserved for wire-level trouble (bad frames, fingerprint
mismatches).  Decode failure of the Reed-Solomon codec is a normal outcome,
not an exception; the decoder returns None for it.
"""


class UsageError(ValueError):
    """A caller violated a documented precondition."""


class CapacityError(UsageError):
    """An exhaustive operation was asked to exceed its documented bound."""


class UnsupportedVariantError(UsageError):
    """The requested protocol variant does not exist for this family kind."""


class ProtocolError(RuntimeError):
    """A wire-level failure: malformed frame, bad phase, or fingerprint mismatch."""
