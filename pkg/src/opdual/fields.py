"""Exact coefficient fields: the rationals and prime fields F_p."""
from __future__ import annotations

from fractions import Fraction


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


class Field:
    """A field of characteristic 0 (rationals) or p (integers mod p).

    Elements are plain Fraction / int values; this object just supplies
    the arithmetic so matrix code stays generic.
    """

    def __init__(self, characteristic: int = 0):
        if characteristic != 0 and not _is_prime(characteristic):
            raise ValueError(f"characteristic must be 0 or prime, got {characteristic}")
        self.char = characteristic
        if characteristic == 0:
            self.zero = Fraction(0)
            self.one = Fraction(1)
        else:
            self.zero = 0
            self.one = 1

    def of(self, x):
        """Coerce an int, Fraction, or 'a/b' string into this field."""
        if isinstance(x, str):
            x = Fraction(x)
        if self.char == 0:
            return Fraction(x)
        if isinstance(x, Fraction):
            if x.denominator % self.char == 0:
                raise ZeroDivisionError("denominator not invertible mod p")
            return (x.numerator * pow(x.denominator, -1, self.char)) % self.char
        return int(x) % self.char

    def add(self, a, b):
        return a + b if self.char == 0 else (a + b) % self.char

    def sub(self, a, b):
        return a - b if self.char == 0 else (a - b) % self.char

    def mul(self, a, b):
        return a * b if self.char == 0 else (a * b) % self.char

    def neg(self, a):
        return -a if self.char == 0 else (-a) % self.char

    def inv(self, a):
        if a == self.zero:
            raise ZeroDivisionError("inverse of zero")
        return Fraction(1) / a if self.char == 0 else pow(a, -1, self.char)

    def is_unit_entry(self, a):
        # pivots with value +-1 keep rational elimination fraction-free
        return a == self.one or a == self.neg(self.one)

    def __eq__(self, other):
        return isinstance(other, Field) and other.char == self.char

    def __hash__(self):
        return hash(("Field", self.char))

    def __repr__(self):
        return "Q" if self.char == 0 else f"F{self.char}"


QQ = Field(0)
F2 = Field(2)
