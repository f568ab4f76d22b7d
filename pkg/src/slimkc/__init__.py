"""Compilation and counting for systems of slim global constraints."""
from __future__ import annotations

from .compile import CompileStats, compile_cnf, compile_system, count_via_compilation
from .core import (
    Cardinality,
    Clause,
    ConstraintSystem,
    ContractError,
    CsysParseError,
    SmallScope,
    SumModulo,
    Threshold,
    Xor,
    brute_force_count,
    eval_constraint,
    figure_system,
    incidence_graph,
    parse_system,
    serialize_system,
)
from .dpcount import count_cnf_xor, dp_count
from .sdnnf import SdnnfCircuit, Vtree, count_dsdnnf, validate_sdnnf
from .toolkit import check_all, clique_instance, gen_clique_system, gen_random_system
from .treedecomp import TreeDecomposition, heuristic_td, make_nice, validate_td

__version__ = "0.1.0"

__all__ = [
    "Cardinality",
    "Clause",
    "CompileStats",
    "ConstraintSystem",
    "ContractError",
    "CsysParseError",
    "SdnnfCircuit",
    "SmallScope",
    "SumModulo",
    "Threshold",
    "TreeDecomposition",
    "Vtree",
    "Xor",
    "brute_force_count",
    "check_all",
    "clique_instance",
    "compile_cnf",
    "compile_system",
    "count_cnf_xor",
    "count_dsdnnf",
    "count_via_compilation",
    "dp_count",
    "eval_constraint",
    "figure_system",
    "gen_clique_system",
    "gen_random_system",
    "heuristic_td",
    "incidence_graph",
    "make_nice",
    "parse_system",
    "serialize_system",
    "validate_sdnnf",
    "validate_td",
]
