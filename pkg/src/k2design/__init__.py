"""Exact verification that no block-transitive t-(k^2, k, lambda) design has
an exceptional group of Lie type as the socle of its automorphism group."""

from .formula import FactoredExpr, parse_formula, pretty
from .catalog import Catalog, load_builtin_catalog, load_catalog_file
from .verifier import CaseVerdict, TheoremReport, run_theorem, verify_case

__all__ = [
    "Catalog",
    "CaseVerdict",
    "FactoredExpr",
    "TheoremReport",
    "load_builtin_catalog",
    "load_catalog_file",
    "parse_formula",
    "pretty",
    "run_theorem",
    "verify_case",
]

__version__ = "0.1.0"
