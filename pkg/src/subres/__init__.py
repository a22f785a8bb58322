"""Subresonant polynomial algebra and finite-horizon cocycle numerics.

Modules: ``sralg`` (weighted spaces, subresonant maps), ``linz``
(linearization), ``nilq`` (nilpotent algebra, BCH, transversal charts),
``cocyc`` (Lyapunov spectra, flags, adapted norms, stable manifolds),
``nform`` (jets, normal forms, graded holonomy), ``batteries`` (exact law
checks) and ``cli`` (config runner).
"""

__version__ = "0.1.0"
