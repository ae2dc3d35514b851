"""Wire-format helpers: fixed-width big-endian integers and strict framing.

All multi-byte integers on the wire are big-endian. Variable-length fields are
length-prefixed with a 4-byte count. Parsers are strict: short reads, oversize
values, and trailing garbage all raise MalformedPayload, so a parsed object is
exactly one byte string and mutation fuzzing cannot find a lenient corner.
"""

from __future__ import annotations

from .errors import MalformedPayload


def int_to_fixed(x: int, width: int) -> bytes:
    if x < 0:
        raise ValueError("negative integer on the wire")
    try:
        return x.to_bytes(width, "big")
    except OverflowError:
        raise ValueError(f"integer needs more than {width} bytes") from None


def int_from_bytes(data: bytes) -> int:
    return int.from_bytes(data, "big")


def u8(x: int) -> bytes:
    return int_to_fixed(x, 1)


def u16(x: int) -> bytes:
    return int_to_fixed(x, 2)


def u32(x: int) -> bytes:
    return int_to_fixed(x, 4)


def u64(x: int) -> bytes:
    return int_to_fixed(x, 8)


def lp(data: bytes) -> bytes:
    """Length-prefixed field: 4-byte big-endian count, then the bytes."""
    return u32(len(data)) + data


class Reader:
    """Cursor over immutable bytes with bounds-checked reads."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise MalformedPayload(
                f"short read: wanted {n} bytes at offset {self._pos}, "
                f"have {len(self._data) - self._pos}"
            )
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def take_u8(self) -> int:
        return self.take(1)[0]

    def take_u16(self) -> int:
        return int_from_bytes(self.take(2))

    def take_u32(self) -> int:
        return int_from_bytes(self.take(4))

    def take_u64(self) -> int:
        return int_from_bytes(self.take(8))

    def take_int(self, width: int) -> int:
        return int_from_bytes(self.take(width))

    def take_lp(self, max_len: int = 1 << 24) -> bytes:
        n = self.take_u32()
        if n > max_len:
            raise MalformedPayload(f"length prefix {n} exceeds cap {max_len}")
        return self.take(n)

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise MalformedPayload(
                f"{len(self._data) - self._pos} trailing bytes after parse"
            )
