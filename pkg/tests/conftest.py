from __future__ import annotations

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from idla import Cluster

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def clusters(draw, n=None, max_rows: int = 6, base=None):
    """Random canonical clusters: R_base plus arbitrary row masks above it."""
    n = draw(st.integers(3, 9)) if n is None else n
    base = draw(st.integers(-3, 3)) if base is None else base
    rows = draw(st.lists(st.integers(0, (1 << n) - 1), max_size=max_rows))
    return Cluster(n, base, rows)
