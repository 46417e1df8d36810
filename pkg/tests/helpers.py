"""Test-only oracles and harnesses."""

from hpmstack.sbi import SbiRet

MASK32 = 0xFFFF_FFFF


class InterleavedCounter:
    """A 64-bit counter that an adversary bumps before chosen half-reads.

    ``schedule[k]`` is added to the counter just before the k-th half-read of
    the call; every value the counter holds during the window is recorded.
    """

    def __init__(self, start, schedule):
        self.value = start
        self.schedule = list(schedule)
        self.calls = 0
        self.held = {start}

    def read_half(self, half):
        if self.calls < len(self.schedule):
            self.value = (self.value + self.schedule[self.calls]) & ((1 << 64) - 1)
            self.held.add(self.value)
        self.calls += 1
        word = self.value >> 32 if half else self.value & MASK32
        return SbiRet(word - (1 << 32) if word >> 31 else word)


def high_word_changes(start, schedule):
    v, changes = start, 0
    for inc in schedule:
        nv = (v + inc) & ((1 << 64) - 1)
        changes += (nv >> 32) != (v >> 32)
        v = nv
    return changes


def reference_counts(num_hpm, events, inhibit, trace, width):
    """Brute-force counting model: plain loops over every counter and slice."""
    counters = [0] * (3 + num_hpm)
    for sl in trace:
        for idx in range(3 + num_hpm):
            if idx != 1 and inhibit & (1 << idx):
                continue
            if idx == 0 or idx == 1:
                inc = sl.cycles
            elif idx == 2:
                inc = sl.instructions
            else:
                code = events[idx - 3]
                inc = 0 if code == 0 else sl.deltas.get(code, 0)
            counters[idx] = (counters[idx] + inc) % (2 ** width)
    return counters
