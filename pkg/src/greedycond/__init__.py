"""Greedy conditioning of Gaussian random variables on point evaluations.

Modules: :mod:`~greedycond.kernelcore` (kernels, grids, Gram matrices),
:mod:`~greedycond.jointmodel` (jointly Gaussian example models),
:mod:`~greedycond.greedy` (weak P-greedy selection),
:mod:`~greedycond.conditioning` (posterior kernels and oracles),
:mod:`~greedycond.transferop` (transfer operators ``M``),
:mod:`~greedycond.rates` (decay curves and rate-bound checks),
:mod:`~greedycond.cli` (experiment harness).
"""

__version__ = "0.1.0"

from .exceptions import ConfigError, DomainError, NumericalError  # noqa: E402
