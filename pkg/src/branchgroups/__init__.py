"""Branch groups acting on spherically homogeneous rooted trees.

The package builds, from a finitely generated residually finite input
group, a family of finitely generated groups of rooted tree automorphisms,
and implements the associated decision procedures: a word-problem decider
driven by bounded stabilizer evaluation, effective residual-finiteness
output, and a sound conjugacy-certificate testbed.
"""

from . import alphabet, perm, resfin, suites, treeauto, wordcalc  # noqa: F401

__version__ = "0.1.0"
