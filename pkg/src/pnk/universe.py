"""Finite packet universes and packet-set primitives.

A universe is an ordered list of named fields, each with a finite integer
domain ``0 .. size-1``.  A packet is a full assignment of field values,
encoded as a single integer index in mixed radix with the *first declared
field least significant*.  Packet sets are frozensets of packet indices:
memory stays proportional to the number of member packets rather than to
the universe size, which matters once state-space exploration starts
interning many small sets over universes with tens of thousands of packets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import UniverseError

DEFAULT_PACKET_CAP = 1 << 20

#: Packet sets are plain frozensets of packet indices.
PacketSet = frozenset
EMPTY: PacketSet = frozenset()


@dataclass(frozen=True)
class FieldDecl:
    """A named field with domain ``0 .. size-1``."""

    name: str
    size: int


class PacketUniverse:
    """The finite set of packets induced by an ordered field declaration list."""

    def __init__(self, decls, cap: int = DEFAULT_PACKET_CAP):
        decls = tuple(decls)
        if not decls:
            raise UniverseError("universe needs at least one field")
        seen = set()
        for d in decls:
            if d.size < 1:
                raise UniverseError(f"field {d.name!r} has domain size {d.size} < 1")
            if d.name in seen:
                raise UniverseError(f"duplicate field {d.name!r}")
            seen.add(d.name)
        self.decls = decls
        self._pos = {d.name: i for i, d in enumerate(decls)}
        # Mixed-radix weights, first field least significant.
        weights = []
        w = 1
        for d in decls:
            weights.append(w)
            w *= d.size
        self._weights = tuple(weights)
        self.packet_count = w
        if self.packet_count > cap:
            raise UniverseError(
                f"universe has {self.packet_count} packets, exceeding the cap of {cap}"
            )
        self._where_cache: dict[tuple[str, int], PacketSet] = {}
        self._all: PacketSet | None = None

    # -- field lookup -------------------------------------------------

    def has_field(self, name: str) -> bool:
        return name in self._pos

    def field(self, name: str) -> FieldDecl:
        try:
            return self.decls[self._pos[name]]
        except KeyError:
            raise UniverseError(f"unknown field {name!r}") from None

    def check_value(self, name: str, value: int) -> None:
        f = self.field(name)
        if not (0 <= value < f.size):
            raise UniverseError(
                f"value {value} out of range for field {name!r} (size {f.size})"
            )

    # -- packet coding ------------------------------------------------

    def encode(self, values) -> int:
        """Encode a full tuple of field values (declaration order) to an index."""
        values = tuple(values)
        if len(values) != len(self.decls):
            raise UniverseError(
                f"expected {len(self.decls)} field values, got {len(values)}"
            )
        idx = 0
        for d, w, v in zip(self.decls, self._weights, values):
            if not (0 <= v < d.size):
                raise UniverseError(
                    f"value {v} out of range for field {d.name!r} (size {d.size})"
                )
            idx += w * v
        return idx

    def decode(self, idx: int) -> tuple[int, ...]:
        if not (0 <= idx < self.packet_count):
            raise UniverseError(f"packet index {idx} out of range")
        out = []
        for d in self.decls:
            out.append(idx % d.size)
            idx //= d.size
        return tuple(out)

    def packet(self, **fields) -> int:
        """Encode a packet from keyword field values (all fields required)."""
        missing = [d.name for d in self.decls if d.name not in fields]
        if missing:
            raise UniverseError(f"missing field values: {missing}")
        extra = [k for k in fields if k not in self._pos]
        if extra:
            raise UniverseError(f"unknown fields: {extra}")
        return self.encode(tuple(fields[d.name] for d in self.decls))

    def field_value(self, idx: int, name: str) -> int:
        pos = self._pos[name]
        return (idx // self._weights[pos]) % self.decls[pos].size

    def record(self, idx: int) -> dict[str, int]:
        vals = self.decode(idx)
        return {d.name: v for d, v in zip(self.decls, vals)}

    # -- packet sets ----------------------------------------------------

    def all_packets(self) -> PacketSet:
        if self._all is None:
            self._all = frozenset(range(self.packet_count))
        return self._all

    def packets_where(self, name: str, value: int) -> PacketSet:
        """The characteristic set of the test ``name = value``."""
        self.check_value(name, value)
        key = (name, value)
        cached = self._where_cache.get(key)
        if cached is None:
            cached = frozenset(
                i for i in range(self.packet_count) if self.field_value(i, name) == value
            )
            self._where_cache[key] = cached
        return cached

    def modify(self, aset: PacketSet, name: str, value: int) -> PacketSet:
        """Image of ``aset`` under the field update ``name := value``."""
        self.check_value(name, value)
        pos = self._pos[name]
        w = self._weights[pos]
        size = self.decls[pos].size
        return frozenset(i - ((i // w) % size) * w + value * w for i in aset)

    # -- serialization --------------------------------------------------

    def sorted_set(self, aset: PacketSet) -> list[int]:
        return sorted(aset)

    def set_to_records(self, aset: PacketSet) -> list[dict[str, int]]:
        return [self.record(i) for i in sorted(aset)]

    def set_from_records(self, records) -> PacketSet:
        return frozenset(self.packet(**r) for r in records)

    def to_json(self) -> str:
        return json.dumps(
            {"fields": [{"name": d.name, "size": d.size} for d in self.decls]}
        )

    @classmethod
    def from_json(cls, text: str, cap: int = DEFAULT_PACKET_CAP) -> "PacketUniverse":
        try:
            obj = json.loads(text)
            decls = [FieldDecl(f["name"], int(f["size"])) for f in obj["fields"]]
        except (KeyError, TypeError, ValueError) as e:
            raise UniverseError(f"bad universe JSON: {e}") from None
        return cls(decls, cap=cap)

    # -- identity ---------------------------------------------------------

    def __eq__(self, other):
        return isinstance(other, PacketUniverse) and self.decls == other.decls

    def __hash__(self):
        return hash(self.decls)

    def __repr__(self):
        inner = ", ".join(f"{d.name}:{d.size}" for d in self.decls)
        return f"PacketUniverse({inner})"
