"""
Enumeration types for the dialogue attention toolkit.

These enums name the architecture switches exposed on the command line.
"""

from enum import Enum, IntEnum


def _normalize(s: str) -> str:
    return s.strip().lower().replace('-', '').replace('_', '').replace(' ', '')


class AttentionKind(Enum):
    """The two base attention mechanisms over context utterances."""

    STATIC = 'static'     # weights computed once from h_i and h_S
    DYNAMIC = 'dynamic'   # weights recomputed from s_{t-1} at every step

    @classmethod
    def from_string(cls, s: str) -> 'AttentionKind':
        """Parse an attention kind from string."""
        mapping = {
            'static': cls.STATIC,
            's': cls.STATIC,
            'dynamic': cls.DYNAMIC,
            'd': cls.DYNAMIC,
        }
        key = _normalize(s)
        if key not in mapping:
            raise ValueError(f'Unknown attention kind: {s}')
        return mapping[key]


class HybridMode(Enum):
    """Rules for combining the static context c with the dynamic context c_t."""

    CONCAT = 'concat'           # [c; c_t]
    SUM = 'sum'                 # c + c_t
    LEARNABLE = 'learnable'     # alpha * c + beta * c_t, trainable alpha/beta
    ATTENTION = 'attention'     # cos(c, s) * c + cos(c_t, s) * c_t
    MAX = 'max'                 # elementwise max pooling
    MEAN = 'mean'               # elementwise mean pooling

    @classmethod
    def from_string(cls, s: str) -> 'HybridMode':
        """Parse a hybrid combination mode from string."""
        mapping = {
            'concat': cls.CONCAT,
            'concatenate': cls.CONCAT,
            'sum': cls.SUM,
            'add': cls.SUM,
            'learnable': cls.LEARNABLE,
            'linear': cls.LEARNABLE,
            'attention': cls.ATTENTION,
            'cosine': cls.ATTENTION,
            'max': cls.MAX,
            'maxpool': cls.MAX,
            'mean': cls.MEAN,
            'avg': cls.MEAN,
            'meanpool': cls.MEAN,
        }
        key = _normalize(s)
        if key not in mapping:
            raise ValueError(f'Unknown hybrid mode: {s}')
        return mapping[key]


class AttentionMode(Enum):
    """Model-level attention switch: the two bases plus the six hybrids."""

    STATIC = 'static'
    DYNAMIC = 'dynamic'
    CONCAT = 'concat'
    SUM = 'sum'
    LEARNABLE = 'learnable'
    ATTENTION = 'attention'
    MAX = 'max'
    MEAN = 'mean'

    @property
    def hybrid(self) -> HybridMode | None:
        """The hybrid combiner for this mode, or None for a base mode."""
        if self in {AttentionMode.STATIC, AttentionMode.DYNAMIC}:
            return None
        return HybridMode(self.value)

    @property
    def uses_static(self) -> bool:
        return self is not AttentionMode.DYNAMIC

    @property
    def uses_dynamic(self) -> bool:
        return self is not AttentionMode.STATIC

    @classmethod
    def from_string(cls, s: str) -> 'AttentionMode':
        """Parse an attention mode from string."""
        key = _normalize(s)
        for mode in cls:
            if key == mode.value:
                return mode
        try:
            return cls(HybridMode.from_string(s).value)
        except ValueError:
            pass
        try:
            return cls(AttentionKind.from_string(s).value)
        except ValueError:
            raise ValueError(f'Unknown attention mode: {s}') from None


class Direction(Enum):
    """Utterance encoder direction."""

    UNI = 'uni'
    BI = 'bi'

    @classmethod
    def from_string(cls, s: str) -> 'Direction':
        """Parse an encoder direction from string."""
        mapping = {
            'uni': cls.UNI,
            'unidirectional': cls.UNI,
            'forward': cls.UNI,
            '->': cls.UNI,
            'bi': cls.BI,
            'bidirectional': cls.BI,
            '<->': cls.BI,
        }
        key = s.strip().lower().replace('_', '').replace(' ', '')
        if key not in mapping:
            key = _normalize(s)
        if key not in mapping:
            raise ValueError(f'Unknown encoder direction: {s}')
        return mapping[key]


class TokenLevel(Enum):
    """How per-token encoder states enter the context attention."""

    OFF = 'off'            # utterance vectors only
    REPLACE = 'replace'    # attend over all non-PAD token states instead
    CONCAT = 'concat'      # [h_i; token summary_i] per utterance

    @classmethod
    def from_string(cls, s: str) -> 'TokenLevel':
        """Parse a token-level variant from string."""
        mapping = {
            'off': cls.OFF,
            'none': cls.OFF,
            'false': cls.OFF,
            'replace': cls.REPLACE,
            'substitute': cls.REPLACE,
            'concat': cls.CONCAT,
            'concatutterance': cls.CONCAT,
        }
        key = _normalize(s)
        if key not in mapping:
            raise ValueError(f'Unknown token-level variant: {s}')
        return mapping[key]


class ExitCode(IntEnum):
    """Process exit codes of the command-line tool."""

    OK = 0
    FAILURE = 1
    USAGE = 2
    DATA = 3
    NUMERIC = 4
