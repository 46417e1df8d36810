"""Exception hierarchy shared by every layer of the stack."""


class HpmError(Exception):
    """Base class for all hpmstack errors."""


class ParseError(HpmError):
    def __init__(self, message, source=None, line=None):
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.source = source
        self.line = line


class ValidationError(HpmError):
    """A platform description breaks one of its invariants."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class AccessFault(HpmError):
    """Models the illegal-instruction trap raised by a denied CSR access."""


class CsrNotImplemented(HpmError):
    """The register is absent on this platform."""


class DuplicateCpuId(ParseError):
    pass


class DuplicateEventName(HpmError):
    pass


class InvalidMask(HpmError):
    pass


class UnknownEvent(HpmError):
    pass


class UnknownCpu(HpmError):
    pass


class EncodeOverflow(HpmError):
    pass


class NoUsableCounter(HpmError):
    pass


class StateError(HpmError):
    pass


class SbiError(HpmError):
    """A driver-side SBI call came back with a non-zero error code."""

    def __init__(self, function, error):
        super().__init__(f"{function} failed with SBI error {error}")
        self.function = function
        self.error = error
