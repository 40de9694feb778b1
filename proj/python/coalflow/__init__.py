"""Monte Carlo laboratory for coalescing Brownian motions with drift."""

from ._coalflow import *  # noqa: F401,F403
