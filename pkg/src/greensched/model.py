"""Domain types for DVFS-aware task allocation.

Tasks carry a work amount in million instructions (MI); resources are
DVS-enabled processors with an ordered voltage/frequency table. An
allocation assigns every task one (resource, level) pair and can be
encoded to / decoded from a fixed-width bit string for bit-flip search.
All types are immutable after construction and safe to share across
threads.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Task",
    "DvfsLevel",
    "Resource",
    "EtcMatrix",
    "Allocation",
    "BitGenome",
    "Problem",
    "DEFAULT_DVFS_TABLE",
    "DEFAULT_SLEEP_LEVEL",
    "field_widths",
    "encode",
    "decode",
]


@dataclass(frozen=True)
class DvfsLevel:
    """One (voltage, frequency) operating point.

    Frequency is a fraction of full speed in (0, 1]; zero is excluded so
    frequency-scaled completion times stay finite.
    """

    voltage: float
    frequency: float

    def __post_init__(self):
        if not (self.voltage > 0):
            raise ValueError(f"voltage must be > 0, got {self.voltage}")
        if not (0 < self.frequency <= 1):
            raise ValueError(f"frequency must be in (0, 1], got {self.frequency}")

    def to_dict(self):
        return {"voltage": self.voltage, "frequency": self.frequency}

    @classmethod
    def from_dict(cls, d):
        return cls(voltage=d["voltage"], frequency=d["frequency"])


# Configuration defaults for scenarios that do not supply a supply table:
# seven strictly decreasing operating points plus a sleep state.
DEFAULT_DVFS_TABLE = (
    DvfsLevel(1.5, 1.0),
    DvfsLevel(1.4, 0.9),
    DvfsLevel(1.3, 0.8),
    DvfsLevel(1.2, 0.7),
    DvfsLevel(1.1, 0.6),
    DvfsLevel(1.0, 0.5),
    DvfsLevel(0.9, 0.4),
)
DEFAULT_SLEEP_LEVEL = DvfsLevel(0.7, 0.1)


@dataclass(frozen=True)
class Task:
    """One unit of work: length in MI, arrival time in seconds."""

    id: int
    length: float
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"task id must be >= 0, got {self.id}")
        if not (self.length > 0):
            raise ValueError(f"task length must be > 0, got {self.length}")
        if self.arrival_time < 0:
            raise ValueError(f"arrival_time must be >= 0, got {self.arrival_time}")

    def to_dict(self):
        return {"id": self.id, "length": self.length, "arrival_time": self.arrival_time}

    @classmethod
    def from_dict(cls, d):
        return cls(id=d["id"], length=d["length"], arrival_time=d.get("arrival_time", 0.0))


@dataclass(frozen=True)
class Resource:
    """A DVS-enabled processor.

    The table is ordered with level 0 the highest (voltage, frequency)
    pair, strictly decreasing in both fields. ``gamma`` folds switching
    activity and load capacitance into one power coefficient (J s V^-2);
    ``lambda_`` is an additive per-resource energy term in joules;
    ``mips`` is the processing rate at full frequency.
    """

    id: int
    dvfs_table: tuple = DEFAULT_DVFS_TABLE
    gamma: float = 1.0
    sleep_level: DvfsLevel = DEFAULT_SLEEP_LEVEL
    lambda_: float = 0.0
    mips: float = 10_000.0

    def __post_init__(self):
        table = tuple(self.dvfs_table)
        object.__setattr__(self, "dvfs_table", table)
        if self.id < 0:
            raise ValueError(f"resource id must be >= 0, got {self.id}")
        if not table:
            raise ValueError("dvfs_table must be non-empty")
        for a, b in zip(table, table[1:]):
            if not (b.voltage < a.voltage and b.frequency < a.frequency):
                raise ValueError(
                    "dvfs_table must be strictly decreasing in voltage and frequency"
                )
        if self.sleep_level.voltage > table[-1].voltage:
            raise ValueError("sleep voltage must not exceed the lowest table voltage")
        if self.sleep_level.frequency > table[-1].frequency:
            raise ValueError("sleep frequency must not exceed the lowest table frequency")
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not (self.mips > 0):
            raise ValueError(f"mips must be > 0, got {self.mips}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lambda_}")

    @property
    def levels(self):
        """Number of DVFS levels in the table."""
        return len(self.dvfs_table)

    def to_dict(self):
        return {
            "id": self.id,
            "dvfs_table": [lv.to_dict() for lv in self.dvfs_table],
            "gamma": self.gamma,
            "sleep_level": self.sleep_level.to_dict(),
            "lambda": self.lambda_,
            "mips": self.mips,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=d["id"],
            dvfs_table=tuple(DvfsLevel.from_dict(x) for x in d["dvfs_table"]),
            gamma=d["gamma"],
            sleep_level=DvfsLevel.from_dict(d["sleep_level"]),
            lambda_=d["lambda"],
            mips=d["mips"],
        )


class EtcMatrix:
    """Expected completion times: ct[i, j] = seconds for task i on resource j at full frequency."""

    __slots__ = ("ct",)

    def __init__(self, ct):
        ct = np.asarray(ct, dtype=float)
        if ct.ndim != 2:
            raise ValueError(f"ct must be 2-D, got shape {ct.shape}")
        if ct.size and not (np.isfinite(ct).all() and (ct > 0).all()):
            raise ValueError("all ct entries must be finite and > 0")
        ct = ct.copy()
        ct.flags.writeable = False
        self.ct = ct

    @property
    def n(self):
        return self.ct.shape[0]

    @property
    def m(self):
        return self.ct.shape[1]

    @classmethod
    def from_workload(cls, tasks, resources):
        """Derive ct[i, j] = length_i / mips_j."""
        lengths = np.array([t.length for t in tasks], dtype=float)
        mips = np.array([r.mips for r in resources], dtype=float)
        return cls(lengths[:, None] / mips[None, :])

    def to_dict(self):
        return {"ct": self.ct.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["ct"])

    def __eq__(self, other):
        return isinstance(other, EtcMatrix) and np.array_equal(self.ct, other.ct)


class Allocation:
    """Per-task choice of (resource_index, level_index); the optimizer's genome.

    Stored as two parallel integer arrays for fast evaluation; ``genes``
    exposes the list-of-pairs view.
    """

    __slots__ = ("resource_idx", "level_idx")

    def __init__(self, genes):
        genes = list(genes)
        r = np.array([g[0] for g in genes], dtype=np.int64)
        l = np.array([g[1] for g in genes], dtype=np.int64)
        self._init_arrays(r, l)

    @classmethod
    def from_arrays(cls, resource_idx, level_idx):
        obj = object.__new__(cls)
        obj._init_arrays(
            np.asarray(resource_idx, dtype=np.int64),
            np.asarray(level_idx, dtype=np.int64),
        )
        return obj

    def _init_arrays(self, r, l):
        if r.shape != l.shape or r.ndim != 1:
            raise ValueError("resource and level index arrays must be 1-D and equal length")
        if r.size and (r.min() < 0 or l.min() < 0):
            raise ValueError("gene indices must be >= 0")
        r = r.copy()
        l = l.copy()
        r.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "resource_idx", r)
        object.__setattr__(self, "level_idx", l)

    def __setattr__(self, name, value):
        raise AttributeError("Allocation is immutable")

    @property
    def n(self):
        return self.resource_idx.size

    @property
    def genes(self):
        return [(int(r), int(l)) for r, l in zip(self.resource_idx, self.level_idx)]

    def validate(self, resources):
        """Check indices against the resource list; raises ValueError on violation."""
        m = len(resources)
        if self.n and self.resource_idx.max() >= m:
            raise ValueError("resource index out of range")
        k = np.array([r.levels for r in resources], dtype=np.int64)
        if self.n and (self.level_idx >= k[self.resource_idx]).any():
            raise ValueError("level index out of range for its resource")

    def __eq__(self, other):
        return (
            isinstance(other, Allocation)
            and np.array_equal(self.resource_idx, other.resource_idx)
            and np.array_equal(self.level_idx, other.level_idx)
        )

    def __repr__(self):
        return f"Allocation({self.genes!r})"

    def to_dict(self):
        return {"genes": [[int(r), int(l)] for r, l in zip(self.resource_idx, self.level_idx)]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple((g[0], g[1]) for g in d["genes"]))


def field_widths(m, k_max):
    """Bit widths (resource field, level field) for m resources and k_max levels."""
    if m < 1 or k_max < 1:
        raise ValueError("m and k_max must be >= 1")
    br = max(1, math.ceil(math.log2(m)))
    bl = max(1, math.ceil(math.log2(k_max)))
    return br, bl


class BitGenome:
    """Fixed-width binary chromosome: per task, resource bits then level bits, task-major."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        if isinstance(bits, str):
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(bits, dtype=np.uint8)
        if arr.size and arr.max() > 1:
            raise ValueError("genome bits must be 0 or 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BitGenome is immutable")

    def __len__(self):
        return self.bits.size

    def to01(self):
        return "".join("1" if b else "0" for b in self.bits)

    def __eq__(self, other):
        return isinstance(other, BitGenome) and np.array_equal(self.bits, other.bits)

    def __repr__(self):
        return f"BitGenome({self.to01()!r})"


def encode(alloc, m, k_max):
    """Encode an allocation as a bit string (MSB-first fields).

    Inverse of :func:`decode` on valid allocations.
    """
    br, bl = field_widths(m, k_max)
    n = alloc.n
    bits = np.zeros((n, br + bl), dtype=np.uint8)
    r = alloc.resource_idx
    l = alloc.level_idx
    if n and (r.max() >= m or l.max() >= k_max):
        raise ValueError("allocation indices exceed encoding capacity")
    for b in range(br):
        bits[:, br - 1 - b] = (r >> b) & 1
    for b in range(bl):
        bits[:, br + bl - 1 - b] = (l >> b) & 1
    return BitGenome(bits.reshape(-1))


def decode(genome, n, m, resources):
    """Decode a bit string into a valid allocation.

    Decoding is total: a resource field >= m reduces modulo m, and a level
    field >= the chosen resource's table length reduces modulo that length.
    """
    k_per = np.array([r.levels for r in resources], dtype=np.int64)
    k_max = int(k_per.max()) if len(resources) else 0
    br, bl = field_widths(m, k_max)
    expected = n * (br + bl)
    if len(genome) != expected:
        raise ValueError(f"genome length {len(genome)} != expected {expected}")
    fields = genome.bits.reshape(n, br + bl).astype(np.int64)
    pow_r = 1 << np.arange(br - 1, -1, -1, dtype=np.int64)
    pow_l = 1 << np.arange(bl - 1, -1, -1, dtype=np.int64)
    r = fields[:, :br] @ pow_r % m
    l = fields[:, br:] @ pow_l % k_per[r]
    return Allocation.from_arrays(r, l)


@dataclass(frozen=True)
class Problem:
    """A task set, a resource pool, and the completion-time matrix tying them together."""

    tasks: tuple
    resources: tuple
    etc: EtcMatrix = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "resources", tuple(self.resources))
        if self.etc is None:
            object.__setattr__(self, "etc", EtcMatrix.from_workload(self.tasks, self.resources))
        if [t.id for t in self.tasks] != list(range(len(self.tasks))):
            raise ValueError("task ids must be dense 0..n-1 in order")
        if [r.id for r in self.resources] != list(range(len(self.resources))):
            raise ValueError("resource ids must be dense 0..m-1 in order")
        if self.etc.ct.shape != (len(self.tasks), len(self.resources)):
            raise ValueError(
                f"etc shape {self.etc.ct.shape} does not match "
                f"{len(self.tasks)} tasks x {len(self.resources)} resources"
            )

    @property
    def n(self):
        return len(self.tasks)

    @property
    def m(self):
        return len(self.resources)

    @property
    def k_max(self):
        return max(r.levels for r in self.resources)

    @property
    def genome_length(self):
        br, bl = field_widths(self.m, self.k_max)
        return self.n * (br + bl)
