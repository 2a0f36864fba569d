"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st

from coopduality.probability import Alphabet, JointPmf


@st.composite
def joints(draw, names=("A", "B", "C"), max_size=3):
    sizes = [draw(st.integers(1, max_size)) for _ in names]
    count = int(np.prod(sizes))
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=count, max_size=count))
    w = np.asarray(weights) + 1e-3 * draw(st.booleans())
    if w.sum() <= 0:
        w = np.ones(count)
    return JointPmf([Alphabet(n, s) for n, s in zip(names, sizes)], (w / w.sum()).reshape(sizes))
