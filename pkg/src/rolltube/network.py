"""Token-bucket traffic shaping and admissible transmission schedules.

Tokens accrue at ``g`` per step up to a cap ``b``; each transmission spends
``c`` tokens and is admissible only while the level stays nonnegative.  On
top of the bucket, a window constraint restricts binary schedules so that the
first transmission comes within ``H - s - 1`` steps of the last one (``s``
counts steps since the step after the last transmission), interior gaps never
exceed ``H``, and the schedule does not end more than ``H`` steps after its
final transmission.  Short schedules that fit entirely inside the remaining
window need not transmit at all.
"""

from dataclasses import dataclass

ENUMERATION_LIMIT = 16


@dataclass(frozen=True)
class TokenBucket:
    """Bucket parameters and current level.

    g: tokens gained per step (>= 1); c: tokens per transmission (>= g);
    b: capacity (>= c - g); level: current fill, in [0, b].
    """

    g: int
    c: int
    b: int
    level: int

    def __post_init__(self):
        if self.g < 1:
            raise ValueError(f"token gain g must be >= 1, got {self.g}")
        if self.c < self.g:
            raise ValueError(f"transmission cost c={self.c} must be >= g={self.g}")
        if self.b < self.c - self.g:
            raise ValueError(f"capacity b={self.b} must be >= c-g={self.c - self.g}")
        if not 0 <= self.level <= self.b:
            raise ValueError(f"level {self.level} outside [0, {self.b}]")


@dataclass(frozen=True)
class Schedule:
    """Finite binary transmission sequence."""

    bits: tuple

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("schedule bits must be 0 or 1")

    @classmethod
    def from_string(cls, text: str) -> "Schedule":
        return cls(tuple(int(ch) for ch in text))

    @property
    def n_steps(self) -> int:
        return len(self.bits)

    @property
    def tx_indices(self) -> tuple:
        return tuple(i for i, b in enumerate(self.bits) if b)

    @property
    def n_tx(self) -> int:
        return sum(self.bits)

    def __str__(self):
        return "".join(str(b) for b in self.bits)


def bucket_step(bucket: TokenBucket, gamma: int) -> int:
    """Next bucket level min(level + g - gamma*c, b).

    A negative return value flags a violation: the step transmitted without
    enough tokens.
    """
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    return min(bucket.level + bucket.g - gamma * bucket.c, bucket.b)


def bucket_trajectory(beta0: int, sched: Schedule, g: int, c: int, b: int):
    """Forward-simulate the bucket over a schedule.

    Returns (levels, feasible) where levels has length n_steps + 1 and
    feasible is True iff no level drops below zero.
    """
    levels = [int(beta0)]
    for gamma in sched.bits:
        levels.append(min(levels[-1] + g - gamma * c, b))
    return levels, all(lv >= 0 for lv in levels)


def in_schedule_set(sched: Schedule, H: int, s: int) -> bool:
    """Admissibility of a schedule for window length H and counter s.

    Either the whole schedule fits in the remaining transmission-free window
    (n_steps <= H - s - 1), or it contains at least one transmission with the
    first at index <= H - s - 1, consecutive transmissions at most H apart,
    and at most H trailing steps after the last transmission.
    """
    if H < 1:
        raise ValueError("window length H must be >= 1")
    if s < 0:
        raise ValueError("counter s must be >= 0")
    n = sched.n_steps
    if n <= H - s - 1:
        return True
    tx = sched.tx_indices
    if not tx:
        return False
    if tx[0] > H - s - 1:
        return False
    for left, right in zip(tx, tx[1:]):
        if right - left > H:
            return False
    return n - tx[-1] <= H


def counter_update(s: int, gamma: int) -> int:
    """Steps-since-transmission counter: reset on transmit, else increment."""
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    if s < 0:
        raise ValueError("counter s must be >= 0")
    return 0 if gamma else s + 1


def enumerate_feasible_schedules(N: int, H: int, s: int, beta0: int,
                                 g: int, c: int, b: int,
                                 require_initial_tx: bool = False):
    """All length-N schedules passing the window constraint and the bucket.

    Lexicographic order with bit 0 most significant; guarded against
    enumeration blowup at N > 16.  ``require_initial_tx`` restricts to
    schedules transmitting at step 0 (used at startup).
    """
    if N > ENUMERATION_LIMIT:
        raise ValueError(f"schedule enumeration limited to N <= {ENUMERATION_LIMIT}, got {N}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    out = []
    for code in range(2 ** N):
        bits = tuple((code >> (N - 1 - j)) & 1 for j in range(N))
        if require_initial_tx and (N == 0 or bits[0] != 1):
            continue
        sched = Schedule(bits)
        if not in_schedule_set(sched, H, s):
            continue
        _, ok = bucket_trajectory(beta0, sched, g, c, b)
        if ok:
            out.append(sched)
    return out
