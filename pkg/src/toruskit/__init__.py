"""toruskit: numerical and semi-analytic tools for quasi-periodic invariant
attractors of weakly dissipative quasi-integrable systems.

The package has five working layers:

- ``toruskit.dynamics``      the dissipative standard map and forced pendulum,
                             an adaptive 8th-order flow integrator, Poincare
                             sections and the relaxation-iteration count;
- ``toruskit.freqanalysis``  windowed Fourier amplitude estimation, principal
                             frequencies and quasi-periodic decomposition;
- ``toruskit.explorer``      frequency-map scans over the forcing frequency,
                             torus-breakdown thresholds and Newton inversion;
- ``toruskit.tfseries``      sparse Taylor-Fourier series algebra (products,
                             Poisson brackets, Lie series, class bookkeeping);
- ``toruskit.normalform``    the Kolmogorov normalization for action-linear
                             friction, conjugacy-based torus verification and
                             the contraction basin estimate;

plus ``toruskit.cli``, a batch front-end writing plot-ready CSV/JSON.
"""

__version__ = "0.1.0"

from . import dynamics, explorer, freqanalysis, normalform, tfseries  # noqa: F401
