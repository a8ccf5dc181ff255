"""Shared instance builders for the test suite."""

import numpy as np
from hypothesis import strategies as st

from wpccrn.scenario import channels_from_coefficients


@st.composite
def coef_instances(draw, n_min=1, n_max=4):
    """Coefficient-level instances where relaying carries real weight."""
    n = draw(st.integers(n_min, n_max))
    f = st.floats(0.3, 6.0)
    gp = draw(st.floats(0.1, 3.0))
    gip = [draw(f) for _ in range(n)]
    gih = [draw(f) for _ in range(n)]
    theta = [draw(st.floats(0.002, 0.03)) for _ in range(n)]
    q2 = [draw(st.floats(0.3, 4.0)) for _ in range(n)]
    rbar = draw(st.floats(0.05, 1.2))
    return channels_from_coefficients(gp, gip, gih, theta, 0.1, rbar, q2=q2)


def spec_instance():
    """The two-SU reference instance used throughout the examples."""
    return channels_from_coefficients(0.5, [2, 1], [1, 3], [0.01, 0.01], 0.1, 0.4)


def ratio_rank(c, members):
    members = list(members)
    r = np.array([c.gamma_ih[i] / c.gamma_ip[i] for i in members])
    return [members[j] for j in np.argsort(r, kind="stable")]
