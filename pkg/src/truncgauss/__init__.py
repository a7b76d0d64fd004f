"""Fast exact samplers for truncated Gaussian distributions.

Submodules:

* :mod:`truncgauss.univariate` - one-dimensional samplers (table-based and baselines)
* :mod:`truncgauss.semifinite` - bivariate, x1 >= a1 and x2 >= a2
* :mod:`truncgauss.finite` - bivariate, rectangular box
* :mod:`truncgauss.multivariate` - chained samplers for d >= 3
* :mod:`truncgauss.oracle` - scipy-based reference computations
"""

from .rng import RandomStream
from .tables import RegionTable, default_table

__version__ = "0.1.0"

__all__ = ["RandomStream", "RegionTable", "default_table", "__version__"]
