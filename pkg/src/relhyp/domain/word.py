from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass, field

from relhyp.domain.errors import InvalidLetter

# Factor-intrinsic element encodings: residue for Z/k, exponent vector for Z^m,
# reduced signed-index word for a free factor.
Payload = int | tuple[int, ...]


@dataclass(frozen=True, slots=True)
class XGen:
    symbol: str
    power: int = 1

    def inverse(self) -> XGen:
        return XGen(self.symbol, -self.power)

    def __str__(self) -> str:
        return self.symbol if self.power == 1 else f"{self.symbol}^-1"


@dataclass(frozen=True, slots=True)
class HLetter:
    peripheral: int
    element: Payload


Letter = XGen | HLetter


@dataclass(frozen=True, slots=True)
class Word:
    letters: tuple[Letter, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Word(self.letters[index])
        return self.letters[index]

    def __add__(self, other: Word) -> Word:
        return Word(self.letters + other.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    @classmethod
    def of(cls, *letters: Letter) -> Word:
        return cls(tuple(letters))


@dataclass(frozen=True, slots=True)
class RawToken:
    """A parsed but unresolved token of the inline word syntax."""

    kind: str  # "x" or "h"
    name: str = ""
    power: int = 1
    peripheral: int = -1
    payload: int | tuple[int, ...] | tuple[tuple[str, int], ...] = 0
    inverted: bool = False

    def inverse(self) -> RawToken:
        if self.kind == "x":
            return RawToken(kind="x", name=self.name, power=-self.power)
        return RawToken(
            kind="h",
            peripheral=self.peripheral,
            payload=self.payload,
            inverted=not self.inverted,
        )


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[+-]?\d+")


@dataclass
class _Parser:
    text: str
    pos: int = 0
    tokens: list[RawToken] = field(default_factory=list)

    def error(self, message: str) -> InvalidLetter:
        return InvalidLetter(f"{message} at position {self.pos} in {self.text!r}")

    def skip(self) -> None:
        while self.pos < len(self.text) and (self.text[self.pos].isspace() or self.text[self.pos] == "*"):
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def integer(self) -> int:
        m = _INT.match(self.text, self.pos)
        if not m:
            raise self.error("expected integer")
        self.pos = m.end()
        return int(m.group())

    def power(self) -> int:
        if self.peek() == "^":
            self.pos += 1
            return self.integer()
        return 1

    def sequence(self, closing: str = "") -> list[RawToken]:
        out: list[RawToken] = []
        while True:
            self.skip()
            char = self.peek()
            if char == closing:
                return out
            if char == "":
                raise self.error(f"expected {closing!r}")
            out.extend(self.item())

    def item(self) -> list[RawToken]:
        char = self.peek()
        if char == "(":
            self.pos += 1
            inner = self.sequence(")")
            self.expect(")")
            k = self.power()
            block = inner if k >= 0 else [t.inverse() for t in reversed(inner)]
            return block * abs(k)
        if char.isdigit():
            return [self.hletter()]
        m = _NAME.match(self.text, self.pos)
        if not m:
            raise self.error(f"unexpected {char!r}")
        self.pos = m.end()
        return [RawToken(kind="x", name=m.group(), power=self.power())]

    def hletter(self) -> RawToken:
        peripheral = self.integer()
        self.expect(":")
        char = self.peek()
        payload: int | tuple[int, ...] | tuple[tuple[str, int], ...]
        if char == "(":
            self.pos += 1
            values = []
            while True:
                self.skip_spaces()
                values.append(self.integer())
                self.skip_spaces()
                if self.peek() == ",":
                    self.pos += 1
                    continue
                break
            self.expect(")")
            payload = tuple(values)
        elif char == "[":
            self.pos += 1
            letters = []
            while True:
                self.skip()
                if self.peek() == "]":
                    break
                m = _NAME.match(self.text, self.pos)
                if not m:
                    raise self.error("expected generator name")
                self.pos = m.end()
                letters.append((m.group(), self.power()))
            self.expect("]")
            payload = tuple(letters)
        else:
            payload = self.integer()
        return RawToken(kind="h", peripheral=peripheral, payload=payload)

    def skip_spaces(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1


def tokenize(text: str) -> list[RawToken]:
    """Parse the inline word syntax into unresolved tokens.

    `a b^-1 (a b)^7 0:3 1:(1,-2) 2:[x y^-1]`; powers on generators expand later,
    group powers expand here.
    """
    parser = _Parser(text)
    tokens = parser.sequence("")
    return tokens
