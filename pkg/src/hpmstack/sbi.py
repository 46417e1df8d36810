"""The experimental OpenSBI "HPM" extension, dispatched over a :class:`PmuState`.

Function IDs are assigned sequentially in the order of the extension's call
table. Every call returns an :class:`SbiRet`; nothing here raises for a bad
index or an unknown function.
"""

import enum
from dataclasses import dataclass

from .platform import LAST_HPM, TIME

EXT_HPM = 0x0848504D

SBI_SUCCESS = 0
SBI_ERR_NOT_SUPPORTED = -2
SBI_ERR_DENIED = -4

RV32_RETRIES = 3


class Fn(enum.IntEnum):
    GET_MEVENT = 0
    SET_MEVENT = 1
    GET_MCOUNTER = 2
    SET_MCOUNTER = 3
    GET_UCOUNTER = 4
    SET_UCOUNTER = 5
    GET_MCOUNTEREN = 6
    SET_MCOUNTEREN = 7
    GET_SCOUNTEREN = 8
    SET_SCOUNTEREN = 9
    GET_MCOUNTINHIBIT = 10
    SET_MCOUNTINHIBIT = 11

    @property
    def call_name(self):
        return "hpm_" + self.name.lower()


FUNCTIONS = {fn.call_name: fn for fn in Fn}


def to_signed(value, xlen):
    value &= (1 << xlen) - 1
    return value - (1 << xlen) if value >> (xlen - 1) else value


@dataclass(frozen=True)
class SbiRet:
    value: int = 0
    error: int = SBI_SUCCESS

    @property
    def ok(self):
        return self.error == SBI_SUCCESS

    def unsigned(self, xlen):
        return self.value & ((1 << xlen) - 1)

    def __str__(self):
        return f"value={self.value & ((1 << 64) - 1):#x} error={self.error}"


@dataclass(frozen=True)
class SbiCall:
    extension_id: int
    function_id: int
    args: tuple = ()


NOT_SUPPORTED = SbiRet(0, SBI_ERR_NOT_SUPPORTED)
DENIED = SbiRet(0, SBI_ERR_DENIED)


def _ok(value, xlen):
    return SbiRet(to_signed(value, xlen), SBI_SUCCESS)


def _arg(args, i, default=None):
    return args[i] if len(args) > i else default


def _get_mevent(state, args):
    p = state.platform
    idx = _arg(args, 0)
    if idx is None or not p.is_hpm_implemented(idx):
        return NOT_SUPPORTED
    return _ok(state.event(idx), p.xlen)


def _set_mevent(state, args):
    p = state.platform
    idx, code = _arg(args, 0), _arg(args, 1, 0)
    if idx is None or not p.is_hpm_implemented(idx):
        return NOT_SUPPORTED
    if p.bound_event(idx) is not None:
        return DENIED
    state.set_event(idx, code)
    return SbiRet()


def _get_counter(state, args):
    # on RV32 a second argument selects the half: 0 = low, 1 = high
    p = state.platform
    idx, half = _arg(args, 0), _arg(args, 1, 0)
    if idx is None or not 0 <= idx <= LAST_HPM or not p.is_counter_implemented(idx):
        return NOT_SUPPORTED
    value = state.counter(idx)
    if p.xlen == 32:
        value = (value >> 32) if half else value
    return _ok(value, p.xlen)


def _set_counter(state, args):
    p = state.platform
    idx, value = _arg(args, 0), _arg(args, 1, 0)
    if idx is None or not 0 <= idx <= LAST_HPM or not p.is_counter_implemented(idx):
        return NOT_SUPPORTED
    if idx == TIME:
        return DENIED
    state.set_counter(idx, value & ((1 << p.xlen) - 1))
    return SbiRet()


def _get_mcounteren(state, args):
    if not state.platform.has_mcounteren:
        return NOT_SUPPORTED
    return SbiRet(state.mcounteren)


def _set_mcounteren(state, args):
    if not state.platform.has_mcounteren:
        return NOT_SUPPORTED
    state.set_mcounteren(_arg(args, 0, 0))
    return SbiRet()


def _get_scounteren(state, args):
    if not state.platform.has_scounteren:
        return NOT_SUPPORTED
    return SbiRet(state.scounteren)


def _set_scounteren(state, args):
    if not state.platform.has_scounteren:
        return NOT_SUPPORTED
    state.set_scounteren(_arg(args, 0, 0))
    return SbiRet()


def _get_mcountinhibit(state, args):
    if not state.platform.has_mcountinhibit:
        return NOT_SUPPORTED
    return SbiRet(state.mcountinhibit)


def _set_mcountinhibit(state, args):
    if not state.platform.has_mcountinhibit:
        return NOT_SUPPORTED
    mask = _arg(args, 0, 0)
    if mask & (1 << TIME):
        return DENIED
    state.set_mcountinhibit(mask)
    return SbiRet()


_HANDLERS = {
    Fn.GET_MEVENT: _get_mevent,
    Fn.SET_MEVENT: _set_mevent,
    Fn.GET_MCOUNTER: _get_counter,
    Fn.SET_MCOUNTER: _set_counter,
    # user-space counter access aliases the machine registers
    Fn.GET_UCOUNTER: _get_counter,
    Fn.SET_UCOUNTER: _set_counter,
    Fn.GET_MCOUNTEREN: _get_mcounteren,
    Fn.SET_MCOUNTEREN: _set_mcounteren,
    Fn.GET_SCOUNTEREN: _get_scounteren,
    Fn.SET_SCOUNTEREN: _set_scounteren,
    Fn.GET_MCOUNTINHIBIT: _get_mcountinhibit,
    Fn.SET_MCOUNTINHIBIT: _set_mcountinhibit,
}


def sbi_dispatch(call, state):
    if call.extension_id != EXT_HPM:
        return NOT_SUPPORTED
    try:
        handler = _HANDLERS[Fn(call.function_id)]
    except ValueError:
        return NOT_SUPPORTED
    args = tuple(int(a) for a in call.args)
    if any(a < 0 for a in args):
        # register arguments are unsigned here
        args = tuple(a & ((1 << 64) - 1) for a in args)
    return handler(state, args)


class HpmSbi:
    """Convenience wrapper issuing HPM ecalls against one hart."""

    def __init__(self, state):
        self.state = state

    @property
    def xlen(self):
        return self.state.platform.xlen

    def call(self, fn, *args):
        return sbi_dispatch(SbiCall(EXT_HPM, int(fn), args), self.state)

    def get_mevent(self, idx):
        return self.call(Fn.GET_MEVENT, idx)

    def set_mevent(self, idx, code):
        return self.call(Fn.SET_MEVENT, idx, code)

    def get_counter(self, idx, space="m", half=0):
        fn = Fn.GET_MCOUNTER if space == "m" else Fn.GET_UCOUNTER
        return self.call(fn, idx, half) if half else self.call(fn, idx)

    def set_counter(self, idx, value, space="m"):
        fn = Fn.SET_MCOUNTER if space == "m" else Fn.SET_UCOUNTER
        return self.call(fn, idx, value)

    def get_counteren(self, space="m"):
        return self.call(Fn.GET_MCOUNTEREN if space == "m" else Fn.GET_SCOUNTEREN)

    def set_counteren(self, mask, space="m"):
        return self.call(Fn.SET_MCOUNTEREN if space == "m" else Fn.SET_SCOUNTEREN, mask)

    def get_mcountinhibit(self):
        return self.call(Fn.GET_MCOUNTINHIBIT)

    def set_mcountinhibit(self, mask):
        return self.call(Fn.SET_MCOUNTINHIBIT, mask)

    def read_counter64(self, idx, space="m"):
        """Full counter value; unfolds into half-reads on RV32."""
        if self.xlen == 64:
            ret = self.get_counter(idx, space)
            return ret if not ret.ok else SbiRet(ret.unsigned(64))
        return read_counter64_rv32(lambda half: self.get_counter(idx, space, half))


def read_counter64_rv32(read_half, retries=RV32_RETRIES):
    """Assemble a 64-bit counter from 32-bit half reads.

    ``read_half(0)`` and ``read_half(1)`` return :class:`SbiRet` for the low and
    high words. The high word is sampled on both sides of the low read; if it
    moved, the low word wrapped in between and the low read is repeated
    against the newer high word. Returns an :class:`SbiRet` carrying the
    unsigned 64-bit count, or the first failing half-read.
    """
    hi = read_half(1)
    if not hi.ok:
        return hi
    for _ in range(retries):
        lo = read_half(0)
        if not lo.ok:
            return lo
        hi2 = read_half(1)
        if not hi2.ok:
            return hi2
        if hi2.unsigned(32) == hi.unsigned(32):
            break
        hi = hi2
    return SbiRet((hi2.unsigned(32) << 32) | lo.unsigned(32))
