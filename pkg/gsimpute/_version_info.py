# SPDX-License-Identifier: MIT

from __future__ import annotations

from functools import total_ordering

from attrs import astuple, frozen


@total_ordering
@frozen(eq=False, order=False)
class VersionInfo:
    """
    The package version as a comparable record; compares against tuples of
    length 1 to 4:

    >>> VersionInfo(0, 1, 0, "final") <= (0, 2)
    True
    >>> VersionInfo(0, 1, 0, "final") == (0, 1)
    True
    """

    major: int
    minor: int
    micro: int
    releaselevel: str

    @classmethod
    def from_version_string(cls, s):
        """
        Parse ``"0.1.0"`` or ``"0.1.0.dev0"``.
        """
        v = s.split(".")
        if len(v) == 3:
            v.append("final")
        return cls(major=int(v[0]), minor=int(v[1]), micro=int(v[2]), releaselevel=v[3])

    def _ensure_tuple(self, other):
        if self.__class__ is other.__class__:
            other = astuple(other)
        if not isinstance(other, tuple) or not 1 <= len(other) <= 4:
            raise NotImplementedError
        return astuple(self)[: len(other)], other

    def __eq__(self, other):
        try:
            us, them = self._ensure_tuple(other)
        except NotImplementedError:
            return NotImplemented
        return us == them

    def __lt__(self, other):
        try:
            us, them = self._ensure_tuple(other)
        except NotImplementedError:
            return NotImplemented
        # "dev0" < "final" alphabetically, which is the order we want.
        return us < them
