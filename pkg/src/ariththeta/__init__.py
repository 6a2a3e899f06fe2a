"""Exact computations around special cycles on Shimura curves.

Subpackages:
    exact    -- characters, class numbers, Hilbert symbols (the trust anchor)
    quatalg  -- quaternion algebras, maximal orders, ternary lattices
    cycles   -- cycle degrees and local multiplicity formulas
    bttree   -- Bruhat-Tits tree cycles and the intersection oracle
    eis32    -- weight-3/2 Eisenstein coefficients and derivatives
    green    -- archimedean Green functions
    cli      -- JSON-lines command line front end
"""

__version__ = "0.1.0"
