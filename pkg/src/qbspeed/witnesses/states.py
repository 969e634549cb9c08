"""
Named multi-qubit states used by the examples and the witness suite.
"""
import logging
import math
from itertools import combinations
from typing import Any, Dict, Sequence

import numpy as np

from qbspeed.core.linalg import PureState
from qbspeed.errors import ConfigError, InvalidDimensionError, InvalidSpecError

logger = logging.getLogger(__name__)


def dicke_state(N: int, m: int) -> PureState:
    """
    Symmetric superposition of all C(N, m) basis states with m excitations.

    Raises:
        InvalidSpecError: m outside [0, N]
    """
    if N < 1:
        raise InvalidDimensionError(f"Dicke state needs N >= 1, got {N}")
    if not 0 <= m <= N:
        raise InvalidSpecError(f"Excitation count m={m} outside [0, {N}]")
    amplitudes = np.zeros(2 ** N, dtype=np.complex128)
    for ones in combinations(range(N), m):
        # site 0 is the most significant bit
        amplitudes[sum(1 << (N - 1 - s) for s in ones)] = 1.0
    return PureState(amplitudes / math.sqrt(math.comb(N, m)))


def ghz_state(N: int) -> PureState:
    """(|0...0> + |1...1>) / sqrt(2)."""
    if N < 2:
        raise InvalidDimensionError(f"GHZ state needs N >= 2, got {N}")
    amplitudes = np.zeros(2 ** N, dtype=np.complex128)
    amplitudes[0] = amplitudes[-1] = 1 / math.sqrt(2)
    return PureState(amplitudes)


def plus_product(N: int) -> PureState:
    """|+>^(x)N."""
    if N < 1:
        raise InvalidDimensionError(f"Product state needs N >= 1, got {N}")
    return PureState(np.full(2 ** N, 2 ** (-N / 2), dtype=np.complex128))


def basis_product(digits: Sequence[int], d: int = 2) -> PureState:
    """Computational product state |digits[0] digits[1] ...>."""
    index = 0
    for x in digits:
        if not 0 <= x < d:
            raise InvalidSpecError(f"Basis digit {x} outside [0, {d})")
        index = index * d + int(x)
    return PureState.basis(index, d ** len(digits))


def state_from_dict(body: Dict[str, Any]) -> PureState:
    """
    Parse a named or explicit state description.

    Accepted forms: {"name": "ghz", "N": 4}, {"name": "dicke", "N": 4, "m": 2},
    {"name": "plus-product", "N": 3}, {"name": "basis", "digits": [0, 1], "d": 2}
    and {"amplitudes": [[re, im], ...]}.

    Raises:
        ConfigError: unknown name or malformed fields
    """
    try:
        if 'amplitudes' in body:
            amps = [complex(re, im) for re, im in body['amplitudes']]
            return PureState.from_amplitudes(amps)
        name = body['name']
        if name == 'ghz':
            return ghz_state(int(body['N']))
        if name == 'dicke':
            return dicke_state(int(body['N']), int(body['m']))
        if name == 'plus-product':
            return plus_product(int(body['N']))
        if name == 'basis':
            return basis_product([int(x) for x in body['digits']], int(body.get('d', 2)))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed state description {body}: {e}") from e
    raise ConfigError(f"Unknown state name '{body.get('name')}'")
